"""Seeded generation of the simulation designs used by the experiments.

Reproducibility is a repo contract: draws come from a counter-based
generator (Philox) through four named substreams so that, e.g., the
coefficient vector does not change when the sample size does. Standard
normals are produced by the Marsaglia polar transform on the raw
uniform stream; the transform is fixed forever and uses only elementary
arithmetic, so streams are stable across platforms and library
versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .core import CovarianceSpec, Dataset, GroundTruth
from .errors import InvalidInputError
from .glm import sigmoid

# fixed substream labels; reordering would silently change every stream
_STREAMS = {"design": 0, "support": 1, "signs": 2, "noise": 3}


@dataclass(frozen=True)
class SynthConfig:
    """Shape, covariance, signal, and seed of one synthetic problem."""

    n: int
    p: int
    s: int
    cov: CovarianceSpec
    sigma_y: float = 1.0
    amplitude: float = 1.0
    seed: int = 0
    response: str = "linear"

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise InvalidInputError(f"need n, p >= 1, got n={self.n} p={self.p}")
        if not 0 <= self.s <= self.p:
            raise InvalidInputError(f"sparsity s={self.s} out of range [0, {self.p}]")
        if self.cov.p != self.p:
            raise InvalidInputError(
                f"covariance dimension {self.cov.p} != p {self.p}"
            )
        if self.sigma_y < 0:
            raise InvalidInputError(f"sigma_y must be >= 0, got {self.sigma_y}")
        if self.amplitude == 0:
            raise InvalidInputError("amplitude must be nonzero")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must fit in 64 unsigned bits")
        if self.response not in ("linear", "logistic"):
            raise InvalidInputError(f"unknown response kind {self.response!r}")


def _substream(seed: int, name: str) -> Generator:
    return Generator(Philox(SeedSequence(seed, spawn_key=(_STREAMS[name],))))


def _polar_normals(gen: Generator, count: int) -> np.ndarray:
    """Standard normals via the Marsaglia polar method on gen's uniforms.

    Consecutive uniforms form pairs (u, v) on (-1, 1)^2, rejected unless
    0 < s < 1 for s = u^2 + v^2; accepted pairs yield the two normals
    u * sqrt(-2 ln s / s) and v * sqrt(-2 ln s / s), consumed in order.
    Pair i always sits at stream positions (2i, 2i+1), so a longer draw
    extends a shorter one with the same prefix.
    """
    out = np.empty(count)
    filled = 0
    while filled < count:
        pairs = max(((count - filled + 1) // 2) * 4 // 3 + 8, 16)
        raw = 2.0 * gen.random(2 * pairs) - 1.0
        u = raw[0::2]
        v = raw[1::2]
        s = u * u + v * v
        keep = (s > 0.0) & (s < 1.0)
        u, v, s = u[keep], v[keep], s[keep]
        f = np.sqrt(-2.0 * np.log(s) / s)
        z = np.empty(2 * u.size)
        z[0::2] = u * f
        z[1::2] = v * f
        take = min(z.size, count - filled)
        out[filled : filled + take] = z[:take]
        filled += take
    return out


def gen_design(cfg: SynthConfig) -> np.ndarray:
    """Draw n i.i.d. rows from N(0, Sigma) for the configured covariance.

    Rows are built as x = L z with L the (lower-triangular) Cholesky
    factor of Sigma. For ar1 the factor action has a closed form, the
    stationary recursion x_j = rho * x_{j-1} + sqrt(1 - rho^2) * z_j,
    so no matrix decomposition is needed.
    """
    z = _polar_normals(_substream(cfg.seed, "design"), cfg.n * cfg.p)
    z = z.reshape(cfg.n, cfg.p)
    if cfg.cov.kind == "identity":
        return z
    # CovarianceSpec validated |rho| < 1 (positive definiteness) on construction
    rho = cfg.cov.rho
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    c = np.sqrt(1.0 - rho * rho)
    for j in range(1, cfg.p):
        x[:, j] = rho * x[:, j - 1] + c * z[:, j]
    return x


def gen_sparse_beta(cfg: SynthConfig) -> GroundTruth:
    """Draw an s-sparse coefficient vector with +-amplitude entries.

    The support is uniform without replacement (partial Fisher-Yates on
    the raw uniform stream); signs are independent fair coin flips.
    """
    beta = np.zeros(cfg.p)
    if cfg.s > 0:
        idx = np.arange(cfg.p)
        u = _substream(cfg.seed, "support").random(cfg.s)
        for i in range(cfg.s):
            j = i + int(u[i] * (cfg.p - i))
            idx[i], idx[j] = idx[j], idx[i]
        support = np.sort(idx[: cfg.s])
        flips = _substream(cfg.seed, "signs").random(cfg.s)
        beta[support] = np.where(flips < 0.5, -cfg.amplitude, cfg.amplitude)
    return GroundTruth(beta_star=beta, sigma_y=cfg.sigma_y)


def gen_response(x, truth: GroundTruth, cfg: SynthConfig) -> np.ndarray:
    """Linear responses x beta + sigma_y * z, or Bernoulli(sigmoid(x beta))."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cfg.n, cfg.p):
        raise InvalidInputError(f"design shape {x.shape} != ({cfg.n}, {cfg.p})")
    mean = x @ truth.beta_star
    gen = _substream(cfg.seed, "noise")
    if cfg.response == "linear":
        return mean + cfg.sigma_y * _polar_normals(gen, cfg.n)
    return (gen.random(cfg.n) < sigmoid(mean)).astype(np.float64)


def make_dataset(cfg: SynthConfig):
    """Generate (Dataset, GroundTruth) for one configuration."""
    truth = gen_sparse_beta(cfg)
    x = gen_design(cfg)
    y = gen_response(x, truth, cfg)
    return Dataset(x=x, y=y), truth
