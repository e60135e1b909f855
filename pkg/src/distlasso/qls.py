"""Coordinate-descent engine for l1-penalized quadratic objectives.

This is the single solver behind the lasso, the leave-one-column-out
regressions used for precision rows, and the quadratic subproblems of the
l1-penalized M-estimator. ``solve_lasso`` picks gram updates when p <= n
(the gram fits and each sweep is n-free) and residual updates otherwise;
``solve_penalized_quadratic`` exposes the gram form directly.

Solves are single-threaded and own their workspace; independent solves
may run concurrently on immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import Dataset, _as_matrix, _as_vector
from .errors import InvalidInputError, NonConvergenceError, UnboundedObjectiveError

_KKT_CAP_FACTOR = 10.0  # converged fits satisfy kkt_residual <= 10 * tol
_MONOTONE_SLACK = 1e-10


@dataclass
class SolverConfig:
    """Knobs for a single coordinate-descent solve.

    tol is the relative coordinate-update stopping threshold; the solver
    additionally refuses to stop while the subgradient violation exceeds
    10 * tol. ``debug`` checks that the penalized objective never
    increases across sweeps.
    """

    tol: float = 1e-8
    max_sweeps: int = 10000
    warm_start: Optional[np.ndarray] = None
    debug: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError(f"tol must be > 0, got {self.tol}")
        if self.max_sweeps < 1:
            raise InvalidInputError(f"max_sweeps must be >= 1, got {self.max_sweeps}")


@dataclass(frozen=True, eq=False)
class LassoFit:
    """A converged l1-penalized fit and its exit diagnostics."""

    beta_hat: np.ndarray
    lam: float
    sweeps_used: int
    kkt_violation: float

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.beta_hat))


def _start_vector(p, cfg):
    if cfg.warm_start is None:
        return np.zeros(p)
    w = _as_vector(cfg.warm_start, "warm_start")
    if w.shape[0] != p:
        raise InvalidInputError(f"warm_start length {w.shape[0]} != p {p}")
    return w.copy()


def _check_monotone(cfg, worst_increase):
    if cfg.debug and worst_increase > _MONOTONE_SLACK:
        raise AssertionError(
            f"objective increased across a sweep by relative {worst_increase:.3e}"
        )


def solve_lasso(data: Dataset, lam: float, cfg: SolverConfig | None = None) -> LassoFit:
    """Minimize ||y - X b||^2 / (2n) + lam * ||b||_1.

    No intercept and no column standardization happen here; that is the
    caller's responsibility. Raises NonConvergenceError (carrying the
    last iterate and its violation) if the sweep budget runs out.
    """
    cfg = cfg or SolverConfig()
    if not np.isfinite(lam) or lam <= 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    n, p = data.n, data.p
    beta = _start_vector(p, cfg)
    kkt_cap = _KKT_CAP_FACTOR * cfg.tol
    if p <= n:
        a = data.x.T @ data.x / n
        a = (a + a.T) / 2.0
        b = data.x.T @ data.y / n
        status, sweeps, viol, inc = _kernels.cd_gram(
            a, b, lam, cfg.tol, cfg.max_sweeps, kkt_cap, cfg.debug, beta, -1
        )
    else:
        xf = np.asfortranarray(data.x)
        status, sweeps, viol, inc = _kernels.cd_naive(
            xf, data.y, lam, cfg.tol, cfg.max_sweeps, kkt_cap, cfg.debug, beta
        )
    _check_monotone(cfg, inc)
    if status != 1:
        raise NonConvergenceError(
            f"lasso did not converge in {sweeps} sweeps (violation {viol:.3e})",
            beta=beta,
            violation=viol,
        )
    return LassoFit(beta_hat=beta, lam=lam, sweeps_used=sweeps, kkt_violation=viol)


def solve_penalized_quadratic(
    a, b, lam: float, cfg: SolverConfig | None = None
) -> np.ndarray:
    """Minimize 0.5 * g'Ag - b'g + lam * ||g||_1 for symmetric PSD A."""
    cfg = cfg or SolverConfig()
    gamma, _, _ = _solve_gram(a, b, lam, cfg)
    return gamma


def _solve_gram(a, b, lam, cfg, gamma0=None, skip=-1, kkt_cap=None):
    """Shared gram-form solve; returns (gamma, sweeps, violation).

    ``skip`` freezes coordinate ``skip`` at its start value, and
    ``kkt_cap`` overrides the default 10 * tol stationarity cap.
    """
    a = _as_matrix(a, "a")
    b = _as_vector(b, "b")
    p = b.shape[0]
    if a.shape != (p, p):
        raise InvalidInputError(f"a must be {p}x{p} to match b, got {a.shape}")
    if np.abs(a - a.T).max() > 1e-10 * max(1.0, np.abs(a).max()):
        raise InvalidInputError("a must be symmetric")
    if np.any(np.diagonal(a) < -1e-12):
        raise InvalidInputError("a has a negative diagonal entry; not PSD")
    return _solve_gram_raw(a, b, lam, cfg, gamma0=gamma0, skip=skip, kkt_cap=kkt_cap)


def _solve_gram_raw(a, b, lam, cfg, gamma0=None, skip=-1, kkt_cap=None):
    """Gram-form solve without the O(p^2) input validation.

    For callers that solve many rows against one already-validated
    matrix (precision-row builds); everything else should go through
    _solve_gram.
    """
    p = b.shape[0]
    if not np.isfinite(lam) or lam < 0:
        raise InvalidInputError(f"lambda must be nonnegative, got {lam}")
    dead = np.diagonal(a) <= _kernels._TINY_DIAG
    if np.any(dead & (np.abs(b) > lam)):
        j = int(np.nonzero(dead & (np.abs(b) > lam))[0][0])
        raise UnboundedObjectiveError(
            f"objective unbounded along coordinate {j}: zero curvature, |b_j| > lambda"
        )
    gamma = gamma0.copy() if gamma0 is not None else _start_vector(p, cfg)
    cap = kkt_cap if kkt_cap is not None else _KKT_CAP_FACTOR * cfg.tol
    status, sweeps, viol, inc = _kernels.cd_gram(
        a, b, lam, cfg.tol, cfg.max_sweeps, cap, cfg.debug, gamma, skip
    )
    _check_monotone(cfg, inc)
    if status != 1:
        raise NonConvergenceError(
            f"penalized quadratic did not converge in {sweeps} sweeps "
            f"(violation {viol:.3e})",
            beta=gamma,
            violation=viol,
        )
    return gamma, sweeps, viol


def kkt_residual(data: Dataset, beta, lam: float) -> float:
    """Subgradient optimality violation of ``beta`` for the lasso objective.

    max over j of: |corr_j| - lam clipped at zero for inactive
    coordinates, and |corr_j - lam * sign(beta_j)| for active ones, where
    corr = X'(y - X beta)/n. Zero iff beta is exactly optimal.
    """
    beta = _as_vector(beta, "beta")
    if beta.shape[0] != data.p:
        raise InvalidInputError(f"beta length {beta.shape[0]} != p {data.p}")
    if not np.isfinite(lam) or lam <= 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    corr = data.x.T @ (data.y - data.x @ beta) / data.n
    active = beta != 0
    viol = np.maximum(np.abs(corr) - lam, 0.0)
    viol[active] = np.abs(corr[active] - lam * np.sign(beta[active]))
    return float(viol.max()) if viol.size else 0.0
