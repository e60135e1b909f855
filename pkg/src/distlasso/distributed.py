"""Sharding, one-shot averaging protocols, and exact communication accounting.

Every vector a worker sends to the coordinator (or receives from it)
passes through a ``CountingChannel``, so the ledger totals are forced by
the protocol itself rather than configured. Aggregation always happens
in shard-id order, making results independent of how many workers
execute concurrently.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import Dataset, empirical_covariance
from .debias import debias, default_delta, precision_jm, precision_nodewise
from .errors import DistLassoError, InvalidInputError
from .qls import LassoFit, SolverConfig, solve_lasso


@dataclass(frozen=True, eq=False)
class Shard:
    """One machine's contiguous slice of a parent dataset."""

    data: Dataset
    shard_id: int
    global_row_range: tuple

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def p(self) -> int:
        return self.data.p


@dataclass
class CommLedger:
    """Exact float64 traffic between workers and the coordinator."""

    rounds: int = 0
    floats_up: int = 0
    floats_down: int = 0


class CountingChannel:
    """In-process transport that counts every float crossing it.

    ``upload`` models worker -> coordinator transfer and ``broadcast``
    models coordinator -> worker transfer to ``recipients`` workers. The
    ledger is updated under a lock so workers may send concurrently.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.ledger = CommLedger()

    def upload(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        with self._lock:
            self.ledger.floats_up += vec.size
        return vec

    def broadcast(self, vec, recipients: int):
        vec = np.asarray(vec, dtype=np.float64)
        with self._lock:
            self.ledger.floats_down += vec.size * recipients
        return vec

    def close_round(self):
        with self._lock:
            self.ledger.rounds += 1


@dataclass(frozen=True, eq=False)
class AggregateEstimate:
    """An aggregated coefficient vector plus the traffic that produced it."""

    beta: np.ndarray
    variant: str
    ledger: CommLedger
    local_fits: List[LassoFit]


def default_lambda(n: int, p: int, sigma_y: float, c_lambda: float = math.sqrt(2.0)) -> float:
    """Penalty rule c_lambda * sigma_y * sqrt(log p / n), shared by all shards."""
    return c_lambda * sigma_y * math.sqrt(math.log(p) / n)


def estimate_noise_scale(data: Dataset, cfg: SolverConfig | None = None) -> float:
    """Residual standard deviation of a pilot fit at a conservative penalty.

    Used when no generative noise scale is available (real datasets).
    """
    lam0 = math.sqrt(2.0 * math.log(data.p) / data.n) * float(np.std(data.y))
    if lam0 <= 0:
        raise InvalidInputError("response has zero variance; cannot scale a pilot fit")
    pilot = solve_lasso(data, lam0, cfg)
    return float(np.std(data.y - data.x @ pilot.beta_hat))


def split(data: Dataset, m: int) -> List[Shard]:
    """Cut ``data`` into m shards of equal size, preserving row order."""
    if m < 1:
        raise InvalidInputError(f"shard count must be >= 1, got {m}")
    if data.n % m != 0:
        raise InvalidInputError(
            f"shard count {m} does not divide n={data.n}; "
            "drop trailing rows explicitly if an uneven split is intended"
        )
    n_k = data.n // m
    shards = []
    for k in range(m):
        lo, hi = k * n_k, (k + 1) * n_k
        shards.append(
            Shard(
                data=Dataset(x=data.x[lo:hi], y=data.y[lo:hi]),
                shard_id=k,
                global_row_range=(lo, hi),
            )
        )
    return shards


def _check_shards(shards):
    if not shards:
        raise InvalidInputError("need at least one shard")
    p = shards[0].p
    for sh in shards:
        if sh.p != p:
            raise InvalidInputError(
                f"shard {sh.shard_id} has p={sh.p}, expected {p}"
            )
    return p


def _run_workers(shards, work, workers):
    """Apply ``work`` to every shard, tagging failures with the shard id.

    Results come back in shard order regardless of scheduling.
    """

    def guarded(sh):
        try:
            return work(sh)
        except DistLassoError as exc:
            if getattr(exc, "shard_id", None) is None:
                exc.shard_id = sh.shard_id
            raise
    if workers <= 1:
        return [guarded(sh) for sh in shards]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, shards))


def _row_block(p: int, m: int, k: int) -> range:
    """Contiguous index block k of size ceil(p/m); the last block is smaller."""
    size = -(-p // m)
    return range(k * size, min((k + 1) * size, p))


def naive_average(
    shards: List[Shard],
    lam: float,
    cfg: SolverConfig | None = None,
    workers: int = 1,
) -> AggregateEstimate:
    """Plain mean of per-shard lasso fits; the baseline that keeps the bias."""
    _check_shards(shards)
    channel = CountingChannel()

    def work(sh):
        fit = solve_lasso(sh.data, lam, cfg)
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


def averaged_debiased(
    shards: List[Shard],
    lam: float,
    theta_method: str = "nodewise",
    cfg: SolverConfig | None = None,
    workers: int = 1,
    delta: Optional[float] = None,
) -> AggregateEstimate:
    """One-shot mean of locally debiased fits.

    Each worker builds a full set of precision rows from its own slice
    (``theta_method`` is "nodewise" or "jm_program"), applies the
    correction locally, and uploads the single corrected vector.
    """
    p = _check_shards(shards)
    if theta_method not in ("nodewise", "jm_program"):
        raise InvalidInputError(f"unknown theta method {theta_method!r}")
    for sh in shards:
        if sh.n < 2:
            raise InvalidInputError(f"shard {sh.shard_id} has n={sh.n} < 2")
    channel = CountingChannel()

    def work(sh):
        fit = solve_lasso(sh.data, lam, cfg)
        if theta_method == "nodewise":
            theta = precision_nodewise(sh.data.x, cfg=cfg)
        else:
            d = delta if delta is not None else default_delta(sh.n, p)
            theta = precision_jm(empirical_covariance(sh.data.x), d, cfg=cfg)
        est = debias(fit, theta, sh.data)
        return fit, channel.upload(est.beta_d)

    results = _run_workers(shards, work, workers)
    channel.close_round()
    beta = np.mean(np.stack([vec for _, vec in results]), axis=0)
    return AggregateEstimate(
        beta=beta,
        variant="averaged_debiased",
        ledger=channel.ledger,
        local_fits=[fit for fit, _ in results],
    )


def distributed_debias(
    shards: List[Shard],
    lam: float,
    cfg: SolverConfig | None = None,
    workers: int = 1,
) -> AggregateEstimate:
    """Two-round protocol that shares the cost of debiasing across workers.

    Round 1: every worker uploads its local fit and its residual
    correlation vector X'(y - X beta)/n (2p floats each). The
    coordinator broadcasts the two averages back (2p floats to each
    worker). Round 2: worker k builds precision rows for its contiguous
    index block from its local data only and uploads the corrected
    coordinates for that block (block-size floats).
    """
    p = _check_shards(shards)
    m = len(shards)
    if m > p:
        raise InvalidInputError(f"need m <= p so every worker gets a row block ({m} > {p})")
    channel = CountingChannel()

    def round1(sh):
        fit = solve_lasso(sh.data, lam, cfg)
        u = sh.data.x.T @ (sh.data.y - sh.data.x @ fit.beta_hat) / sh.n
        return fit, channel.upload(fit.beta_hat), channel.upload(u)

    results = _run_workers(shards, round1, workers)
    channel.close_round()

    beta_bar = np.mean(np.stack([b for _, b, _ in results]), axis=0)
    u_bar = np.mean(np.stack([u for _, _, u in results]), axis=0)
    beta_bar = channel.broadcast(beta_bar, m)
    u_bar = channel.broadcast(u_bar, m)

    def round2(sh):
        block = _row_block(p, m, sh.shard_id)
        if len(block) == 0:
            return block, channel.upload(np.empty(0))
        theta = precision_nodewise(sh.data.x, cfg=cfg, rows=block)
        coords = np.array([beta_bar[j] + theta.rows[j] @ u_bar for j in block])
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
        local_fits=[fit for fit, _, _ in results],
    )
