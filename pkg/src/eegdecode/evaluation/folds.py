"""Seeded stratified k-fold plans.

Stratification is by exemplar label whenever every exemplar has at least
k trials (which also balances categories); otherwise it falls back to
category stratification and records a warning in the plan.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from ..datamodel import EegDataset


def subject_hash(subject_id: str) -> int:
    return zlib.crc32(subject_id.encode())


def fold_rng(seed: int, subject_id: str, fold: int, stream: int = 0) -> np.random.Generator:
    """The per-fold stream contract: one generator per (seed, subject, fold)."""
    return np.random.default_rng(np.random.SeedSequence([seed, subject_hash(subject_id), fold, stream]))


@dataclass
class FoldPlan:
    k: int
    seed: int
    subject_id: str
    strata: str
    test_folds: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def train_test(self, fold: int):
        test = self.test_folds[fold]
        mask = np.ones(self.n_trials, dtype=bool)
        mask[test] = False
        return np.nonzero(mask)[0], test

    @property
    def n_trials(self) -> int:
        return sum(len(f) for f in self.test_folds)

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "subject_id": self.subject_id,
                "strata": self.strata, "fold_sizes": [len(f) for f in self.test_folds],
                "warnings": list(self.warnings)}


def make_folds(ds: EegDataset, k: int = 10, seed: int = 0) -> FoldPlan:
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > ds.n_trials:
        raise ValueError(f"cannot split {ds.n_trials} trials into {k} folds")

    warnings = []
    labels = ds.exemplar_labels
    strata = "exemplar"
    counts = np.bincount(labels, minlength=1)
    if counts[counts > 0].min() < k:
        labels = ds.category_labels
        strata = "category"
        warnings.append("some exemplar has fewer trials than k; stratifying by category instead")
        if np.bincount(labels, minlength=1)[np.bincount(labels, minlength=1) > 0].min() < k:
            strata = "none"
            warnings.append("some category has fewer trials than k; plain shuffled folds")

    rng = np.random.default_rng(np.random.SeedSequence([seed, subject_hash(ds.subject_id)]))
    assignments = np.empty(ds.n_trials, dtype=np.int64)
    offset = 0
    if strata == "none":
        order = rng.permutation(ds.n_trials)
        assignments[order] = np.arange(ds.n_trials) % k
    else:
        for value in np.unique(labels):
            idx = np.nonzero(labels == value)[0]
            idx = rng.permutation(idx)
            # Rotate the starting fold per stratum so remainders spread evenly.
            assignments[idx] = (np.arange(len(idx)) + offset) % k
            offset += len(idx)

    plan = FoldPlan(k=k, seed=seed, subject_id=ds.subject_id, strata=strata, warnings=warnings)
    plan.test_folds = [np.nonzero(assignments == f)[0] for f in range(k)]
    return plan
