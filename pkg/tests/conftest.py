from __future__ import annotations

import sys

import pytest

from apbtriage import cascade
from apbtriage.faultgen import GenSpec, generate_dataset
from apbtriage.forest import Hyperparams


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(GenSpec.per_label(1500, seed=7))


@pytest.fixture(scope="session")
def small_cascade(small_dataset):
    train, _ = small_dataset.split(0.8)
    return cascade.train_cascade(train, Hyperparams(tree_count=40, base_seed=3))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
