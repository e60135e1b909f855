"""Domain types, error metrics, and covariance diagnostics.

Conventions used across the package: designs are dense, row-major,
64-bit float matrices with observations in rows; coefficient vectors are
where the sparsity lives. All functions here are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCovarianceError, InvalidInputError


def _as_matrix(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-d array, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return x


def _as_vector(v, name="v"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInputError(f"{name} must be a 1-d array, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True, eq=False)
class Dataset:
    """A design matrix (n observations x p predictors) and its responses."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x, "x"))
        object.__setattr__(self, "y", _as_vector(self.y, "y"))
        if self.x.shape[0] < 1 or self.x.shape[1] < 1:
            raise InvalidInputError(f"design must be at least 1x1, got {self.x.shape}")
        if self.x.shape[0] != self.y.shape[0]:
            raise InvalidInputError(
                f"row count {self.x.shape[0]} != response length {self.y.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """The coefficient vector a simulation was generated from."""

    beta_star: np.ndarray
    sigma_y: float = 0.0
    support: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "beta_star", _as_vector(self.beta_star, "beta_star"))
        if self.sigma_y < 0:
            raise InvalidInputError(f"sigma_y must be >= 0, got {self.sigma_y}")
        object.__setattr__(
            self, "support", tuple(int(j) for j in np.nonzero(self.beta_star)[0])
        )

    @property
    def s(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class CovarianceSpec:
    """Population predictor covariance: identity or AR(1) with parameter rho.

    AR(1) entries are rho**|i-j|; positive definite for any |rho| < 1.
    """

    kind: str
    p: int
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "ar1"):
            raise InvalidInputError(f"unknown covariance kind {self.kind!r}")
        if self.p < 1:
            raise InvalidInputError("dimension p must be >= 1")
        if self.kind == "ar1" and not (-1.0 < self.rho < 1.0):
            raise InvalidCovarianceError(
                f"ar1 requires |rho| < 1 for positive definiteness, got {self.rho}"
            )

    def matrix(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.p)
        idx = np.arange(self.p)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])

    def lambda_min(self) -> float:
        if self.kind == "identity":
            return 1.0
        return float(np.linalg.eigvalsh(self.matrix())[0])

    def condition_number(self) -> float:
        if self.kind == "identity":
            return 1.0
        w = np.linalg.eigvalsh(self.matrix())
        return float(w[-1] / w[0])


@dataclass(frozen=True)
class ErrorReport:
    """l1/l2/linf distances between two coefficient vectors."""

    l1: float
    l2: float
    linf: float
    support_recovered: bool


def empirical_covariance(x) -> np.ndarray:
    """Sample second-moment matrix x.T @ x / n, symmetrized.

    The result is averaged with its transpose so downstream coherence
    checks see an exactly symmetric matrix.
    """
    x = _as_matrix(x)
    s = x.T @ x / x.shape[0]
    return (s + s.T) / 2.0


def generalized_coherence(sigma_hat, theta) -> float:
    """max_j || sigma_hat @ theta[j] - e_j ||_inf.

    Measures how far each row of ``theta`` is from acting as the j-th row
    of an inverse of ``sigma_hat``; zero iff theta is an exact inverse.
    """
    sigma_hat = _as_matrix(sigma_hat, "sigma_hat")
    theta = _as_matrix(theta, "theta")
    p = sigma_hat.shape[0]
    if sigma_hat.shape != (p, p) or theta.shape != (p, p):
        raise InvalidInputError(
            f"expected two p x p matrices, got {sigma_hat.shape} and {theta.shape}"
        )
    return float(np.abs(sigma_hat @ theta.T - np.eye(p)).max())


def error_norms(a, b) -> ErrorReport:
    """Componentwise l1, l2, and linf distances between vectors a and b."""
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    d = a - b
    return ErrorReport(
        l1=float(np.abs(d).sum()),
        l2=float(np.sqrt(d @ d)),
        linf=float(np.abs(d).max()),
        support_recovered=bool(np.array_equal(a != 0, b != 0)),
    )


def norm_inf_l(x, l: int) -> float:
    """Interpolating norm: max over k >= l of ||k largest |entries|||_2 / sqrt(k).

    Equals the linf norm at l=1 and ||x||_2/sqrt(p) at l=p. For a fixed
    subset size k the best subset of coordinates is the top-k magnitudes,
    so the maximum over all subsets of size >= l reduces to a scan over
    sorted-magnitude prefixes.
    """
    x = _as_vector(x, "x")
    p = x.shape[0]
    if not 1 <= l <= p:
        raise InvalidInputError(f"l must be in [1, {p}], got {l}")
    mags = np.sort(np.abs(x))[::-1]
    prefix = np.cumsum(mags**2)
    k = np.arange(1, p + 1)
    return float(np.sqrt(prefix[l - 1 :] / k[l - 1 :]).max())
