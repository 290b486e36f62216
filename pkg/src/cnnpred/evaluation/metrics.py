"""Classification metrics and the Welch two-sample t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BETA_TOL = 1e-10
BETA_MAX_TERMS = 200_000


@dataclass(frozen=True)
class ConfusionCounts:
    """Counts with class 1 meaning "up"."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @classmethod
    def from_labels(cls, preds, labels) -> "ConfusionCounts":
        p = np.asarray(preds).astype(np.int64).ravel()
        y = np.asarray(labels).astype(np.int64).ravel()
        if len(p) != len(y):
            raise ValueError(f"{len(p)} predictions for {len(y)} labels")
        if len(p) == 0:
            raise ValueError("cannot score an empty prediction set")
        if np.any((p != 0) & (p != 1)) or np.any((y != 0) & (y != 1)):
            raise ValueError("predictions and labels must be 0 or 1")
        return cls(tp=int(np.sum((p == 1) & (y == 1))), fp=int(np.sum((p == 1) & (y == 0))),
                   tn=int(np.sum((p == 0) & (y == 0))), fn=int(np.sum((p == 0) & (y == 1))))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionCounts":
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


def _f1(tp, fp, fn):
    # precision/recall harmonic mean; 0 when the class is never predicted nor present
    den = 2 * tp + fp + fn
    return 0.0 if den == 0 else 2.0 * tp / den


def class_f1(c: ConfusionCounts) -> tuple[float, float]:
    """``(F of class 1, F of class 0)``."""
    return _f1(c.tp, c.fp, c.fn), _f1(c.tn, c.fn, c.fp)


def macro_f_counts(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("cannot score an empty prediction set")
    up, down = class_f1(c)
    return 0.5 * (up + down)


def macro_f(preds, labels) -> float:
    """Mean of the per-class F1 scores; an undefined class F counts as 0."""
    return macro_f_counts(ConfusionCounts.from_labels(preds, labels))


def accuracy(preds, labels) -> float:
    c = ConfusionCounts.from_labels(preds, labels)
    return (c.tp + c.tn) / c.total


def _beta_series(x, a, b):
    # I_x(a,b) = x^a (1-x)^b / (a B(a,b)) * sum_n (a+b)_n / (a+1)_n x^n, all terms positive
    log_front = (a * math.log(x) + b * math.log1p(-x) - math.log(a)
                 - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)))
    term, total = 1.0, 1.0
    for n in range(BETA_MAX_TERMS):
        term *= (a + b + n) / (a + 1 + n) * x
        total += term
        if term < BETA_TOL * total:
            break
    else:
        raise ArithmeticError(f"incomplete beta series did not converge (x={x}, a={a}, b={b})")
    return math.exp(log_front) * total


def regularized_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``."""
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    # the series converges fastest below the distribution's mean region
    if x > (a + 1.0) / (a + b + 2.0):
        return 1.0 - _beta_series(1.0 - x, b, a)
    return _beta_series(x, a, b)


def welch_t_test(a, b) -> float:
    """Two-sided p-value of Welch's unequal-variance t-test."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("Welch t-test needs at least two values per group")
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0.0:
        return 1.0 if diff == 0.0 else 0.0
    t = diff / math.sqrt(se2)
    dof = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return min(1.0, regularized_beta(dof / (dof + t * t), dof / 2.0, 0.5))
