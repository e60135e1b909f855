"""Sparsify dense aggregates: hard, soft, and top-k thresholding.

All functions are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, GroundTruth, _as_vector
from .errors import InvalidInputError
from .qls import LassoFit


@dataclass(frozen=True)
class ThresholdRule:
    """A sparsification rule: hard/soft at level t, or keep-top-k."""

    kind: str
    t: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind in ("hard", "soft"):
            if self.t is None or self.t < 0:
                raise InvalidInputError(f"{self.kind} thresholding needs t >= 0")
            if self.k is not None:
                raise InvalidInputError(f"{self.kind} thresholding takes no k")
        elif self.kind == "topk":
            if self.k is None or self.k < 1:
                raise InvalidInputError("topk thresholding needs k >= 1")
            if self.t is not None:
                raise InvalidInputError("topk thresholding takes no t")
        else:
            raise InvalidInputError(f"unknown threshold kind {self.kind!r}")

    def apply(self, beta) -> np.ndarray:
        if self.kind == "hard":
            return hard_threshold(beta, self.t)
        if self.kind == "soft":
            return soft_threshold(beta, self.t)
        return topk_threshold(beta, self.k)


def hard_threshold(beta, t: float) -> np.ndarray:
    """Zero coordinates with |beta_j| < t; boundary values are kept."""
    beta = _as_vector(beta, "beta")
    if t < 0:
        raise InvalidInputError(f"threshold must be >= 0, got {t}")
    return np.where(np.abs(beta) >= t, beta, 0.0)


def soft_threshold(beta, t: float) -> np.ndarray:
    """Shrink each coordinate toward zero by t: sign(b) * max(|b| - t, 0)."""
    beta = _as_vector(beta, "beta")
    if t < 0:
        raise InvalidInputError(f"threshold must be >= 0, got {t}")
    return np.sign(beta) * np.maximum(np.abs(beta) - t, 0.0)


def topk_threshold(beta, k: int) -> np.ndarray:
    """Keep the k largest-magnitude coordinates; ties keep the lower index.

    The output is the closest k-sparse vector in l2 distance.
    """
    beta = _as_vector(beta, "beta")
    p = beta.shape[0]
    if not 1 <= k <= p:
        raise InvalidInputError(f"k must be in [1, {p}], got {k}")
    # stable sort on (-|beta|, index) keeps the lower index on ties
    order = np.argsort(-np.abs(beta), kind="stable")
    out = np.zeros(p)
    keep = order[:k]
    out[keep] = beta[keep]
    return out


def empirical_sparsity(data: Dataset, fit: LassoFit, eps: float = 1e-6) -> int:
    """Number of predictors whose residual correlation attains the penalty.

    Counts j with |x_j'(y - X beta)/n| >= lam * (1 - eps); exact
    equality is numerically meaningless, so ``eps`` supplies a relative
    tolerance. Every active coordinate of a converged fit is counted.
    """
    if eps < 0:
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    corr = data.x.T @ (data.y - data.x @ fit.beta_hat) / data.n
    return int(np.count_nonzero(np.abs(corr) >= fit.lam * (1.0 - eps)))


def default_threshold(N: int, p: int, noise_scale: float, c_t: float = 2.0) -> float:
    """Experiment default: c_t * noise_scale * sqrt(log p / N)."""
    return c_t * noise_scale * math.sqrt(math.log(p) / N)


def verify_threshold_guarantees(beta_dense, beta_sparse, truth: GroundTruth, t: float) -> bool:
    """Check the recovery guarantees that hold once t beats the dense error.

    When t > ||beta_dense - beta_star||_inf (measured), the thresholded
    vector must satisfy: support contained in the true support, linf
    error <= 2t, l2 error <= 2*sqrt(2s)*t, l1 error <= 2*sqrt(2)*s*t.
    Returns whether the premise held; raises AssertionError if it held
    and any guarantee failed.
    """
    beta_dense = _as_vector(beta_dense, "beta_dense")
    beta_sparse = _as_vector(beta_sparse, "beta_sparse")
    dense_err = float(np.abs(beta_dense - truth.beta_star).max())
    if not t > dense_err:
        return False
    s = truth.s
    diff = beta_sparse - truth.beta_star
    spurious = np.setdiff1d(np.nonzero(beta_sparse)[0], np.asarray(truth.support))
    checks = [
        (spurious.size == 0, f"support leaked indices {spurious[:5]}"),
        (np.abs(diff).max() <= 2 * t + 1e-12, "linf guarantee 2t failed"),
        (np.sqrt(diff @ diff) <= 2 * math.sqrt(2 * s) * t + 1e-12, "l2 guarantee failed"),
        (np.abs(diff).sum() <= 2 * math.sqrt(2) * s * t + 1e-12, "l1 guarantee failed"),
    ]
    for ok, msg in checks:
        if not ok:
            raise AssertionError(f"thresholding guarantee violated (t={t:.4g}): {msg}")
    return True
