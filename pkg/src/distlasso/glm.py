"""l1-regularized M-estimation for smooth convex losses.

The local fit is an outer proximal-Newton loop: at the current iterate
the loss is replaced by its second-order model (diagonal curvature
weights), the resulting l1-penalized quadratic is solved by the
coordinate-descent engine, and a backtracking line search keeps the true
penalized objective non-increasing. Debiasing reuses the nodewise row
construction on the curvature-weighted design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .core import Dataset, _as_vector, empirical_covariance
from .debias import precision_nodewise
from .distributed import (
    AggregateEstimate,
    CountingChannel,
    Shard,
    _check_shards,
    _row_block,
    _run_workers,
)
from .errors import InvalidInputError, InvalidLossError, NonConvergenceError
from .qls import LassoFit, SolverConfig, _solve_gram, solve_lasso

_MAX_OUTER = 50
_OUTER_TOL = 1e-7
_ARMIJO = 1e-4
_KKT_CAP_FACTOR = 10.0


def sigmoid(a):
    """Numerically stable logistic function."""
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class LossModel:
    """A smooth per-observation loss rho(y, a) with its derivatives in a.

    ``quadratic`` marks losses whose second-order model is exact, letting
    the solver finish in a single inner solve.
    """

    name: str
    rho: Callable
    rho_dot: Callable
    rho_ddot: Callable
    quadratic: bool = False


def squared_loss() -> LossModel:
    return LossModel(
        name="squared",
        rho=lambda y, a: 0.5 * (y - a) ** 2,
        rho_dot=lambda y, a: a - y,
        rho_ddot=lambda y, a: np.ones_like(np.asarray(a, dtype=np.float64)),
        quadratic=True,
    )


def logistic_loss() -> LossModel:
    # log(1 + e^a) - y*a via logaddexp keeps large |a| finite
    return LossModel(
        name="logistic",
        rho=lambda y, a: np.logaddexp(0.0, a) - y * a,
        rho_dot=lambda y, a: sigmoid(a) - y,
        rho_ddot=lambda y, a: sigmoid(a) * (1.0 - sigmoid(a)),
    )


LOSSES = {"squared": squared_loss, "logistic": logistic_loss}


@dataclass(frozen=True, eq=False)
class WeightedDesign:
    """Design rows rescaled by the square root of the loss curvature."""

    x_beta: np.ndarray
    weights: np.ndarray


def loss_value(data: Dataset, loss: LossModel, beta) -> float:
    return float(np.mean(loss.rho(data.y, data.x @ beta)))


def loss_gradient(data: Dataset, loss: LossModel, beta) -> np.ndarray:
    """Gradient of the empirical loss: X' rho_dot(y, X beta) / n."""
    return data.x.T @ loss.rho_dot(data.y, data.x @ beta) / data.n


def penalized_objective(data: Dataset, loss: LossModel, beta, lam: float) -> float:
    return loss_value(data, loss, beta) + lam * float(np.abs(beta).sum())


def mestimator_kkt(data: Dataset, loss: LossModel, beta, lam: float) -> float:
    """First-order violation: the gradient must sit in the penalty subdifferential."""
    beta = _as_vector(beta, "beta")
    g = loss_gradient(data, loss, beta)
    active = beta != 0
    viol = np.maximum(np.abs(g) - lam, 0.0)
    viol[active] = np.abs(g[active] + lam * np.sign(beta[active]))
    return float(viol.max()) if viol.size else 0.0


def weighted_design(data: Dataset, beta, loss: LossModel) -> WeightedDesign:
    """Scale row i by rho_ddot(y_i, x_i beta)^(1/2)."""
    beta = _as_vector(beta, "beta")
    if beta.shape[0] != data.p:
        raise InvalidInputError(f"beta length {beta.shape[0]} != p {data.p}")
    ddot = np.asarray(loss.rho_ddot(data.y, data.x @ beta), dtype=np.float64)
    if np.any(ddot < 0):
        raise InvalidLossError(f"{loss.name}: negative curvature encountered")
    w = np.sqrt(ddot)
    return WeightedDesign(x_beta=data.x * w[:, None], weights=w)


def solve_l1_mestimator(
    data: Dataset, loss: LossModel, lam: float, cfg: SolverConfig | None = None
) -> LassoFit:
    """Minimize mean rho(y_i, x_i beta) + lam * ||beta||_1.

    For quadratic losses a single inner quadratic solve is exact; with
    unit curvature that inner problem is literally the lasso and is
    delegated to it. ``sweeps_used`` on the returned fit counts outer
    iterations for the general path.
    """
    cfg = cfg or SolverConfig()
    if not np.isfinite(lam) or lam <= 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    n, p = data.n, data.p
    if cfg.warm_start is None:
        beta = np.zeros(p)
    else:
        beta = np.asarray(cfg.warm_start, dtype=np.float64).copy()

    ddot0 = np.asarray(loss.rho_ddot(data.y, data.x @ beta), dtype=np.float64)
    if np.any(ddot0 <= 0):
        raise InvalidLossError(f"{loss.name}: non-positive curvature encountered")

    if loss.quadratic:
        if np.all(ddot0 == 1.0):
            return solve_lasso(data, lam, cfg)
        wd = weighted_design(data, beta, loss)
        h = empirical_covariance(wd.x_beta)
        b = h @ beta - loss_gradient(data, loss, beta)
        gamma, sweeps, _ = _solve_gram(h, b, lam, cfg, gamma0=beta)
        kkt = mestimator_kkt(data, loss, gamma, lam)
        return LassoFit(beta_hat=gamma, lam=lam, sweeps_used=sweeps, kkt_violation=kkt)

    kkt_cap = _KKT_CAP_FACTOR * cfg.tol
    obj = penalized_objective(data, loss, beta, lam)
    for outer in range(1, _MAX_OUTER + 1):
        a = data.x @ beta
        ddot = np.asarray(loss.rho_ddot(data.y, a), dtype=np.float64)
        if np.any(ddot <= 0):
            raise InvalidLossError(f"{loss.name}: non-positive curvature encountered")
        g = data.x.T @ loss.rho_dot(data.y, a) / n
        xw = data.x * np.sqrt(ddot)[:, None]
        h = empirical_covariance(xw)
        target = h @ beta - g
        gamma, _, _ = _solve_gram(h, target, lam, cfg, gamma0=beta.copy())
        d = gamma - beta
        # backtracking on the true penalized objective; the model decrease
        # bound makes the direction a descent direction
        decrease = float(g @ d) + lam * (np.abs(gamma).sum() - np.abs(beta).sum())
        step = 1.0
        while step > 1e-12:
            cand = beta + step * d
            cand_obj = penalized_objective(data, loss, cand, lam)
            if cand_obj <= obj + _ARMIJO * step * decrease + 1e-15:
                break
            step *= 0.5
        beta = beta + step * d
        new_obj = penalized_objective(data, loss, beta, lam)
        change = float(np.abs(step * d).max())
        obj = new_obj
        if change <= _OUTER_TOL:
            kkt = mestimator_kkt(data, loss, beta, lam)
            if kkt <= kkt_cap:
                return LassoFit(beta_hat=beta, lam=lam, sweeps_used=outer, kkt_violation=kkt)
    kkt = mestimator_kkt(data, loss, beta, lam)
    if kkt <= kkt_cap:
        return LassoFit(beta_hat=beta, lam=lam, sweeps_used=_MAX_OUTER, kkt_violation=kkt)
    raise NonConvergenceError(
        f"M-estimator did not converge in {_MAX_OUTER} outer iterations "
        f"(violation {kkt:.3e})",
        beta=beta,
        violation=kkt,
    )


def default_glm_lambda(n: int, p: int, c_lambda: float = math.sqrt(2.0)) -> float:
    """Penalty rule with the Bernoulli gradient-noise scale 1/2 in place of sigma_y."""
    return c_lambda * 0.5 * math.sqrt(math.log(p) / n)


def naive_average_mestimator(
    shards: List[Shard],
    loss: LossModel,
    lam: float,
    cfg: SolverConfig | None = None,
    workers: int = 1,
) -> AggregateEstimate:
    """Plain mean of per-shard M-estimator fits."""
    _check_shards(shards)
    channel = CountingChannel()

    def work(sh):
        fit = solve_l1_mestimator(sh.data, loss, lam, cfg)
        return fit, channel.upload(fit.beta_hat)

    results = _run_workers(shards, work, workers)
    channel.close_round()
    beta = np.mean(np.stack([vec for _, vec in results]), axis=0)
    return AggregateEstimate(
        beta=beta,
        variant="naive_average",
        ledger=channel.ledger,
        local_fits=[fit for fit, _ in results],
    )


def average_glm(
    shards: List[Shard],
    loss: LossModel,
    lam: float,
    cfg: SolverConfig | None = None,
    workers: int = 1,
) -> AggregateEstimate:
    """Two-round averaged M-estimator with distributed debiasing.

    Mirrors the linear two-round protocol step for step, with local
    gradients uploaded in place of residual correlations and precision
    rows built on each worker's curvature-weighted design at its own
    local fit. The corrected coordinate subtracts the row's inner
    product with the averaged gradient, which reduces exactly to the
    linear protocol for the squared loss.
    """
    p = _check_shards(shards)
    m = len(shards)
    if m > p:
        raise InvalidInputError(f"need m <= p so every worker gets a row block ({m} > {p})")
    channel = CountingChannel()

    def round1(sh):
        fit = solve_l1_mestimator(sh.data, loss, lam, cfg)
        grad = loss_gradient(sh.data, loss, fit.beta_hat)
        return fit, channel.upload(fit.beta_hat), channel.upload(grad)

    results = _run_workers(shards, round1, workers)
    channel.close_round()

    beta_bar = np.mean(np.stack([b for _, b, _ in results]), axis=0)
    grad_bar = np.mean(np.stack([g for _, _, g in results]), axis=0)
    beta_bar = channel.broadcast(beta_bar, m)
    grad_bar = channel.broadcast(grad_bar, m)

    fits = [fit for fit, _, _ in results]

    def round2(sh):
        block = _row_block(p, m, sh.shard_id)
        if len(block) == 0:
            return block, channel.upload(np.empty(0))
        wd = weighted_design(sh.data, fits[sh.shard_id].beta_hat, loss)
        theta = precision_nodewise(wd.x_beta, cfg=cfg, rows=block)
        coords = np.array([beta_bar[j] - theta.rows[j] @ grad_bar for j in block])
        return block, channel.upload(coords)

    blocks = _run_workers(shards, round2, workers)
    channel.close_round()

    beta = np.empty(p)
    for block, coords in blocks:
        for offset, j in enumerate(block):
            beta[j] = coords[offset]
    return AggregateEstimate(
        beta=beta,
        variant="distributed_debias",
        ledger=channel.ledger,
        local_fits=fits,
    )
