"""Paired t-test with the table's star convention.

The two-tailed p-value comes from the regularized incomplete beta
function; the test suite cross-checks it against direct numerical
integration of the t density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    degenerate: bool = False

    @property
    def stars(self) -> str:
        return significance_stars(self.p)

    def to_dict(self) -> dict:
        return {"t": self.t, "p": self.p, "df": self.df,
                "degenerate": self.degenerate, "stars": self.stars}


def student_t_sf2(t: float, df: int) -> float:
    """Two-tailed tail probability of Student's t via I_x(df/2, 1/2)."""
    x = df / (df + t * t)
    return float(special.betainc(df / 2.0, 0.5, x))


def paired_ttest(a, b) -> TTestResult:
    """t = mean(d) / (sd(d)/sqrt(n)) on d = a - b, df = n - 1.

    Zero-variance differences: p = 1 when the mean difference is 0,
    otherwise the result is flagged degenerate (infinite t, p = 0).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired_ttest needs two equal-length vectors")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, df)
        return TTestResult(float(np.sign(mean)) * float("inf"), 0.0, df, degenerate=True)
    t = mean / (sd / np.sqrt(n))
    return TTestResult(float(t), student_t_sf2(t, df), df)


def significance_stars(p: float) -> str:
    """Table convention: ** for p < 0.01, * for p < 0.05."""
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""
