"""Shrinkage linear discriminant analysis.

With 124 x 32 = 3968 flattened features and a few hundred trials per
fold, the pooled covariance is singular; the analytic Ledoit-Wolf
estimate shrinks it toward a scaled identity, which keeps the
discriminant well posed without a tuning loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg


@dataclass
class LdaModel:
    class_means: np.ndarray   # [C, p]
    coef: np.ndarray          # [C, p], rows are Sigma^-1 mu_c
    intercept: np.ndarray     # [C]
    priors: np.ndarray        # [C]
    shrinkage: float
    n_classes: int


def _ledoit_wolf_shrinkage(z: np.ndarray, s: np.ndarray) -> float:
    """Analytic intensity toward mu*I from class-centered rows ``z``."""
    n, p = z.shape
    mu = np.trace(s) / p
    d2 = float(np.sum(s * s)) / p - 2.0 * mu * np.trace(s) / p + mu * mu
    if d2 <= 0:
        return 0.0
    # sum_i ||z_i z_i^T - S||_F^2 = sum_i ||z_i||^4 - n ||S||_F^2
    row_sq = np.einsum("ij,ij->i", z, z)
    b2 = (float(np.sum(row_sq ** 2)) - n * float(np.sum(s * s))) / (n * n * p)
    b2 = min(max(b2, 0.0), d2)
    return b2 / d2


def lda_fit(x: np.ndarray, y: np.ndarray, n_classes: int | None = None) -> LdaModel:
    """Fit on flattened trials [N, p] with integer labels."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n, p = x.shape
    classes = np.unique(y)
    if n_classes is None:
        n_classes = int(classes.max()) + 1
    if len(classes) != n_classes or classes.min() != 0 or classes.max() != n_classes - 1:
        missing = sorted(set(range(n_classes)) - set(classes.tolist()))
        raise ValueError(f"training data must contain every class; missing {missing}")
    if n < n_classes + 1:
        raise ValueError(f"need at least {n_classes + 1} trials, got {n}")

    means = np.stack([x[y == c].mean(axis=0) for c in range(n_classes)])
    priors = np.array([(y == c).sum() for c in range(n_classes)], dtype=np.float64) / n
    z = x - means[y]
    s = (z.T @ z) / n

    rho = _ledoit_wolf_shrinkage(z, s)
    mu = np.trace(s) / p
    sigma = (1.0 - rho) * s
    sigma[np.diag_indices_from(sigma)] += rho * mu

    jitter = 0.0
    while True:
        try:
            chol = linalg.cho_factor(sigma + (jitter * np.eye(p) if jitter else 0.0), lower=True)
            break
        except linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-10 * max(mu, 1.0))
            if jitter > max(mu, 1.0):
                raise
    coef = linalg.cho_solve(chol, means.T).T
    intercept = -0.5 * np.einsum("cp,cp->c", means, coef) + np.log(priors)
    return LdaModel(means, coef, intercept, priors, float(rho), n_classes)


def lda_scores(model: LdaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x @ model.coef.T + model.intercept


def lda_predict(model: LdaModel, x: np.ndarray) -> np.ndarray:
    return np.argmax(lda_scores(model, x), axis=1)
