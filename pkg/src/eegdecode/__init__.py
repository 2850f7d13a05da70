"""EEG visual-object decoding: dual-branch masked CNN, baselines, and evaluation."""

__version__ = "0.1.0"
