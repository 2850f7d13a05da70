import numpy as np
import pytest

from eegdecode.datamodel import (
    EegDataset, default_occipital_mask, default_synth_config, synth_generate,
    synth_templates,
)


@pytest.fixture(scope="session")
def occipital_mask():
    return default_occipital_mask()


@pytest.fixture(scope="session")
def small_synth():
    """216 easy trials (3 per exemplar), signal confined to the default mask."""
    return synth_generate(default_synth_config(trials_per_exemplar=3, snr=10.0, seed=7))


def matched_filter_predict(ds: EegDataset, cfg) -> np.ndarray:
    """Independent oracle: normalized correlation against the true templates."""
    templates = synth_templates(cfg).reshape(72, -1)
    templates = templates / np.linalg.norm(templates, axis=1, keepdims=True)
    x = ds.trials.reshape(ds.n_trials, -1).astype(np.float64)
    return (x @ templates.T).argmax(axis=1)


def random_dataset(rng, n_trials=24, n_channels=124, n_samples=32, subject="rand") -> EegDataset:
    return EegDataset(
        rng.standard_normal((n_trials, n_channels, n_samples)).astype(np.float32),
        rng.integers(0, 72, n_trials),
        [f"E{i + 1}" for i in range(n_channels)],
        62.5, subject)
