"""From-scratch binary random forest over bit-level sample features."""
from ._backend import active_backend, native_available, use_backend
from .ensemble import (
    TASKS,
    CorruptModel,
    Forest,
    ForestError,
    Hyperparams,
    SingleClassInput,
    VersionMismatch,
    WidthMismatch,
    balanced_weights,
    bootstrap_counts,
    load_forest,
    predict_proba,
    save_forest,
    train_forest,
)
from .features import (
    DEFAULT_FEATURE_SET,
    FEATURE_SETS,
    featurize,
    featurize_many,
    field_words,
    words_to_features,
)
from .tree import EmptyPartition, Tree, best_split, gini, grow_tree

__all__ = [
    "active_backend", "native_available", "use_backend",
    "TASKS", "CorruptModel", "Forest", "ForestError", "Hyperparams", "SingleClassInput",
    "VersionMismatch", "WidthMismatch", "balanced_weights", "bootstrap_counts",
    "load_forest", "predict_proba", "save_forest", "train_forest",
    "DEFAULT_FEATURE_SET", "FEATURE_SETS", "featurize", "featurize_many", "field_words",
    "words_to_features",
    "EmptyPartition", "Tree", "best_split", "gini", "grow_tree",
]
