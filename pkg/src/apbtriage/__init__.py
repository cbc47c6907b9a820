"""APB transaction error triage from VCD waveforms."""
