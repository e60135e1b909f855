"""Batch experiment harness: grids of (machines, seed) cells to tidy CSV.

Each cell generates one synthetic problem, splits it, runs the requested
estimators, and records errors against the generating coefficients plus
the exact communication counts. Cells execute in a thread pool; output
rows are buffered and emitted in deterministic (grid, seed, estimator)
order, so re-running a config reproduces the CSV byte for byte apart
from the wall_ms column.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .core import CovarianceSpec, error_norms
from .distributed import (
    CommLedger,
    averaged_debiased,
    default_lambda,
    distributed_debias,
    naive_average,
    split,
)
from .errors import DistLassoError, InvalidInputError
from .glm import (
    LOSSES,
    average_glm,
    default_glm_lambda,
    loss_gradient,
    naive_average_mestimator,
    solve_l1_mestimator,
)
from .qls import SolverConfig, solve_lasso
from .synth import SynthConfig, make_dataset
from .threshold import (
    default_threshold,
    empirical_sparsity,
    hard_threshold,
    soft_threshold,
    topk_threshold,
    verify_threshold_guarantees,
)

CSV_COLUMNS = (
    "experiment", "seed", "p", "n", "N", "m", "s", "estimator",
    "l1", "l2", "linf", "floats_up", "floats_down", "wall_ms",
)

_LINEAR_ESTIMATORS = (
    "centralized_lasso", "naive_average", "averaged_debiased",
    "distributed_debias", "thresholded",
)
_GLM_ESTIMATORS = (
    "centralized_lasso", "naive_average", "distributed_debias", "thresholded",
)

_EXPERIMENTS = ("fig1", "fig2", "fig3", "glm")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment sweep: problem shape, grid, estimators, thresholds."""

    experiment: str
    p: int
    s: int
    m_grid: tuple
    n: Optional[int] = None            # samples per machine (fixed-n sweeps)
    N: Optional[int] = None            # total samples (fixed-N sweeps)
    cov_kind: str = "identity"
    rho: float = 0.5
    sigma_y: float = 1.0
    amplitude: float = 1.0
    seeds: int = 20
    base_seed: int = 0
    estimators: tuple = ("averaged_debiased",)
    threshold_kind: str = "hard"       # hard | soft | topk
    threshold_scale: float = 2.0       # multiplier on the default level
    theta_method: str = "nodewise"
    lam_scale: float = math.sqrt(2.0)
    loss: str = "squared"
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise InvalidInputError(f"unknown experiment {self.experiment!r}")
        if isinstance(self.m_grid, (int, np.integer)):
            object.__setattr__(self, "m_grid", (int(self.m_grid),))
        else:
            object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if isinstance(self.estimators, str):
            object.__setattr__(self, "estimators", (self.estimators,))
        else:
            object.__setattr__(self, "estimators", tuple(self.estimators))
        if not self.m_grid:
            raise InvalidInputError("m_grid must be non-empty")
        if any(int(m) < 1 for m in self.m_grid):
            raise InvalidInputError("machine counts must be >= 1")
        if self.seeds < 1:
            raise InvalidInputError("need at least one seed")
        if (self.n is None) == (self.N is None):
            raise InvalidInputError("set exactly one of n (per machine) or N (total)")
        if self.N is not None:
            for m in self.m_grid:
                if self.N % m != 0:
                    raise InvalidInputError(f"N={self.N} not divisible by m={m}")
        if self.loss not in LOSSES:
            raise InvalidInputError(f"unknown loss {self.loss!r}")
        allowed = _GLM_ESTIMATORS if self.loss == "logistic" else _LINEAR_ESTIMATORS
        if not self.estimators:
            raise InvalidInputError("estimators must be non-empty")
        for est in self.estimators:
            if est not in allowed:
                raise InvalidInputError(
                    f"estimator {est!r} not available for loss {self.loss!r}"
                )
        if self.threshold_kind not in ("hard", "soft", "topk"):
            raise InvalidInputError(f"unknown threshold kind {self.threshold_kind!r}")
        if self.theta_method not in ("nodewise", "jm_program"):
            raise InvalidInputError(f"unknown theta method {self.theta_method!r}")


_DESK_DEFAULTS = {
    "fig1": dict(
        p=200, n=150, s=5, m_grid=(1, 2, 4, 8, 16), cov_kind="identity",
        estimators=("centralized_lasso", "naive_average", "averaged_debiased", "thresholded"),
    ),
    "fig2": dict(
        p=200, N=4800, s=5, m_grid=(2, 4, 8, 16, 32, 48), cov_kind="ar1",
        estimators=("averaged_debiased",),
    ),
    "fig3": dict(
        p=200, n=150, s=5, m_grid=(8,), cov_kind="identity",
        estimators=("centralized_lasso", "averaged_debiased", "thresholded"),
    ),
    "glm": dict(
        p=100, n=400, s=4, m_grid=(4,), cov_kind="identity", loss="logistic",
        estimators=("naive_average", "distributed_debias", "thresholded"),
    ),
}


def desk_config(experiment: str, **overrides) -> ExperimentConfig:
    """Desk-scale defaults for each named experiment, with overrides."""
    if experiment not in _DESK_DEFAULTS:
        raise InvalidInputError(f"unknown experiment {experiment!r}")
    known = set(ExperimentConfig.__dataclass_fields__) - {"experiment"}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise InvalidInputError(f"unknown experiment option(s): {', '.join(unknown)}")
    params = dict(_DESK_DEFAULTS[experiment])
    params.update(overrides)
    return ExperimentConfig(experiment=experiment, **params)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    p: int
    n: int
    N: int
    m: int
    s: int
    estimator: str
    l1: float
    l2: float
    linf: float
    floats_up: int
    floats_down: int
    wall_ms: float
    beta: np.ndarray = field(repr=False, compare=False)

    def csv_fields(self):
        return (
            self.experiment, str(self.seed), str(self.p), str(self.n),
            str(self.N), str(self.m), str(self.s), self.estimator,
            repr(self.l1), repr(self.l2), repr(self.linf),
            str(self.floats_up), str(self.floats_down),
            format(self.wall_ms, ".3f"),
        )


class PartialResults(DistLassoError):
    """Raised when a cell fails; carries rows completed before the failure."""

    def __init__(self, rows, cause):
        super().__init__(f"experiment aborted: {cause}")
        self.rows = rows
        self.cause = cause


def _cell_estimates(cfg: ExperimentConfig, m: int, seed: int):
    """Run one (machines, seed) cell; returns rows in estimator order."""
    if cfg.N is not None:
        N, n = cfg.N, cfg.N // m
    else:
        n, N = cfg.n, cfg.n * m
    logistic = cfg.loss == "logistic"
    scfg = SynthConfig(
        n=N, p=cfg.p, s=cfg.s,
        cov=CovarianceSpec(cfg.cov_kind, cfg.p, cfg.rho),
        sigma_y=cfg.sigma_y, amplitude=cfg.amplitude,
        seed=cfg.base_seed + seed,
        response="logistic" if logistic else "linear",
    )
    data, truth = make_dataset(scfg)
    shards = split(data, m)
    loss = LOSSES[cfg.loss]()
    noise_scale = 0.5 if logistic else cfg.sigma_y
    if logistic:
        lam_local = default_glm_lambda(n, cfg.p, cfg.lam_scale)
        lam_central = default_glm_lambda(N, cfg.p, cfg.lam_scale)
    else:
        lam_local = default_lambda(n, cfg.p, cfg.sigma_y, cfg.lam_scale)
        lam_central = default_lambda(N, cfg.p, cfg.sigma_y, cfg.lam_scale)
    solver = SolverConfig()

    cache = {}

    def base_aggregate():
        """The dense aggregate that thresholding applies to."""
        name = "averaged_debiased" if not logistic else "distributed_debias"
        return compute(name)

    def compute(name):
        if name in cache:
            return cache[name]
        t0 = time.perf_counter()
        if name == "centralized_lasso":
            if logistic:
                fit = solve_l1_mestimator(data, loss, lam_central, solver)
            else:
                fit = solve_lasso(data, lam_central, solver)
            beta, ledger, fits = fit.beta_hat, CommLedger(), [fit]
        elif name == "naive_average":
            if logistic:
                agg = naive_average_mestimator(shards, loss, lam_local, solver)
            else:
                agg = naive_average(shards, lam_local, solver)
            beta, ledger, fits = agg.beta, agg.ledger, agg.local_fits
        elif name == "averaged_debiased":
            agg = averaged_debiased(shards, lam_local, cfg.theta_method, solver)
            beta, ledger, fits = agg.beta, agg.ledger, agg.local_fits
        elif name == "distributed_debias":
            if logistic:
                agg = average_glm(shards, loss, lam_local, solver)
            else:
                agg = distributed_debias(shards, lam_local, solver)
            beta, ledger, fits = agg.beta, agg.ledger, agg.local_fits
        elif name == "thresholded":
            dense_beta, ledger, fits, _ = base_aggregate()
            if cfg.threshold_kind == "topk":
                if logistic:
                    # gradient coordinates at the penalty play the role the
                    # residual correlations play in the linear lane
                    grad = loss_gradient(shards[0].data, loss, fits[0].beta_hat)
                    k = int(np.count_nonzero(np.abs(grad) >= lam_local * (1 - 1e-6)))
                else:
                    k = empirical_sparsity(shards[0].data, fits[0])
                beta = topk_threshold(dense_beta, min(max(1, k), cfg.p))
            else:
                t = default_threshold(N, cfg.p, noise_scale, cfg.threshold_scale)
                if cfg.threshold_kind == "hard":
                    beta = hard_threshold(dense_beta, t)
                else:
                    beta = soft_threshold(dense_beta, t)
                verify_threshold_guarantees(dense_beta, beta, truth, t)
        else:
            raise InvalidInputError(f"unknown estimator {name!r}")
        wall_ms = (time.perf_counter() - t0) * 1e3
        cache[name] = (beta, ledger, fits, wall_ms)
        return cache[name]

    rows = []
    for name in cfg.estimators:
        beta, ledger, _, wall_ms = compute(name)
        err = error_norms(beta, truth.beta_star)
        rows.append(
            ResultRow(
                experiment=cfg.experiment, seed=seed, p=cfg.p, n=n, N=N, m=m,
                s=truth.s, estimator=name, l1=err.l1, l2=err.l2, linf=err.linf,
                floats_up=ledger.floats_up, floats_down=ledger.floats_down,
                wall_ms=wall_ms, beta=beta,
            )
        )
    return rows


def run_experiment(cfg: ExperimentConfig, progress=None) -> List[ResultRow]:
    """Run all (m, seed) cells; returns rows in (grid, seed, estimator) order.

    On a cell failure, raises PartialResults carrying every row from
    cells that precede the failing one in deterministic order.
    """
    tasks = [(m, seed) for m in cfg.m_grid for seed in range(cfg.seeds)]
    workers = max(1, cfg.threads)

    def run_task(task):
        m, seed = task
        return _cell_estimates(cfg, m, seed)

    rows: List[ResultRow] = []
    done = 0
    if workers == 1:
        for task in tasks:
            try:
                rows.extend(run_task(task))
            except Exception as exc:
                raise PartialResults(rows, exc) from exc
            done += 1
            if progress:
                progress(done, len(tasks))
        return rows

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_task, t) for t in tasks]
        for fut in futures:
            try:
                rows.extend(fut.result())
            except Exception as exc:
                for other in futures:
                    other.cancel()
                raise PartialResults(rows, exc) from exc
            done += 1
            if progress:
                progress(done, len(tasks))
    return rows


def write_csv(rows: List[ResultRow], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row.csv_fields()) + "\n")


def mean_metric(rows, estimator, metric="linf", where=None):
    """Average a metric over seeds for one estimator, optionally filtered."""
    vals = [
        getattr(r, metric)
        for r in rows
        if r.estimator == estimator and (where is None or where(r))
    ]
    if not vals:
        raise InvalidInputError(f"no rows for estimator {estimator!r}")
    return float(np.mean(vals))
