"""Command-line driver: synthesize datasets, run fits, run experiments.

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence,
4 precision-row failure. The experiment command flushes partial CSV
results before reporting a failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .core import CovarianceSpec, Dataset, empirical_covariance
from .dataio import load_dataset, write_dataset, write_sidecar
from .debias import debias, default_delta, precision_jm, precision_nodewise
from .distributed import (
    averaged_debiased,
    distributed_debias,
    estimate_noise_scale,
    naive_average,
    split,
)
from .errors import (
    DegenerateColumnError,
    InfeasibleRowError,
    InvalidInputError,
    NonConvergenceError,
)
from .experiments import (
    PartialResults,
    desk_config,
    run_experiment,
    write_csv,
)
from .glm import LOSSES, solve_l1_mestimator
from .qls import SolverConfig, kkt_residual, solve_lasso
from .synth import SynthConfig, make_dataset

_EXIT_INVALID = 2
_EXIT_NONCONVERGENCE = 3
_EXIT_PRECISION = 4


def _threads_cap(requested):
    cap = os.environ.get("DISTLASSO_THREADS")
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise InvalidInputError(f"DISTLASSO_THREADS must be an integer, got {cap!r}")
        if cap < 1:
            raise InvalidInputError(f"DISTLASSO_THREADS must be >= 1, got {cap}")
        return min(requested, cap) if requested else cap
    return requested or 1


def cmd_synth(args) -> int:
    cov = CovarianceSpec(args.cov, args.p, args.rho)
    cfg = SynthConfig(
        n=args.n, p=args.p, s=args.s, cov=cov, sigma_y=args.sigma_y,
        amplitude=args.amplitude, seed=args.seed, response=args.response,
    )
    data, truth = make_dataset(cfg)
    write_dataset(args.out, data)
    write_sidecar(args.out, cfg, truth)
    print(f"wrote {args.out} (n={data.n}, p={data.p}, s={truth.s}) and sidecar")
    return 0


def _write_coefficients(path, beta):
    with open(path, "w") as fh:
        fh.write("j,beta\n")
        for j, v in enumerate(beta):
            fh.write(f"{j},{float(v)!r}\n")


_SHARDED_ESTIMATORS = ("naive_average", "averaged_debiased", "distributed_debias")


def cmd_fit(args) -> int:
    if args.lam is not None and args.lam <= 0:
        raise InvalidInputError(f"lambda must be positive, got {args.lam}")
    data = load_dataset(args.data)
    if args.drop_remainder and data.n % args.m != 0:
        dropped = data.n % args.m
        data = Dataset(x=data.x[: data.n - dropped], y=data.y[: data.n - dropped])
        print(f"dropped {dropped} trailing rows to make n divisible by m", file=sys.stderr)
    cfg = SolverConfig(tol=args.tol, max_sweeps=args.max_sweeps)
    sharded = args.estimator in _SHARDED_ESTIMATORS
    n_local = data.n // args.m if sharded else data.n
    if args.lam is None:
        sigma = estimate_noise_scale(data, cfg)
        lam = math.sqrt(2.0) * sigma * math.sqrt(math.log(data.p) / n_local)
        print(f"estimated noise scale {sigma:.4g}; lambda={lam:.4g}")
    else:
        lam = args.lam

    ledger = None
    if args.estimator == "lasso":
        fit = solve_lasso(data, lam, cfg)
        beta = fit.beta_hat
        kkt = kkt_residual(data, beta, lam)
    elif args.estimator == "debiased_lasso":
        fit = solve_lasso(data, lam, cfg)
        if args.theta_method == "nodewise":
            theta = precision_nodewise(data.x, cfg=cfg)
        else:
            delta = args.delta if args.delta is not None else default_delta(data.n, data.p)
            theta = precision_jm(empirical_covariance(data.x), delta, cfg=cfg)
        beta = debias(fit, theta, data).beta_d
        kkt = kkt_residual(data, fit.beta_hat, lam)
    elif args.estimator == "mestimator":
        loss = LOSSES[args.loss]()
        fit = solve_l1_mestimator(data, loss, lam, cfg)
        beta = fit.beta_hat
        kkt = fit.kkt_violation
    else:
        shards = split(data, args.m)
        runner = {
            "naive_average": lambda: naive_average(shards, lam, cfg),
            "averaged_debiased": lambda: averaged_debiased(shards, lam, args.theta_method, cfg),
            "distributed_debias": lambda: distributed_debias(shards, lam, cfg),
        }[args.estimator]
        agg = runner()
        beta = agg.beta
        ledger = agg.ledger
        kkt = max(f.kkt_violation for f in agg.local_fits)

    out = args.out or str(Path(args.data).with_suffix("")) + ".coef.csv"
    _write_coefficients(out, beta)
    print(
        f"estimator={args.estimator} lambda={lam:.6g} nonzeros={int(np.count_nonzero(beta))}"
        f" max|beta|={np.abs(beta).max():.6g} kkt_residual={kkt:.3e}"
    )
    if ledger is not None:
        print(
            f"communication: rounds={ledger.rounds} floats_up={ledger.floats_up}"
            f" floats_down={ledger.floats_down}"
        )
    print(f"coefficients written to {out}")
    return 0


def _parse_scalar(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def read_config_file(path) -> dict:
    """Flat key = value lines; '#' starts a comment; commas make tuples."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "," in value:
            out[key] = tuple(_parse_scalar(v.strip()) for v in value.split(",") if v.strip())
        else:
            out[key] = _parse_scalar(value)
    return out


_OVERRIDE_KEYS = (
    "p", "n", "N", "s", "seeds", "base_seed", "cov_kind", "rho", "sigma_y",
    "amplitude", "threshold_kind", "threshold_scale", "theta_method",
    "lam_scale", "loss", "threads",
)


def cmd_experiment(args) -> int:
    params = {}
    if args.config:
        params.update(read_config_file(args.config))
    experiment = args.experiment or params.pop("experiment", None)
    if experiment is None:
        raise InvalidInputError("experiment name required (flag or config file)")
    # flags win over config-file values
    for key in _OVERRIDE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if args.m_grid is not None:
        params["m_grid"] = tuple(int(v) for v in args.m_grid.split(","))
    if args.estimators is not None:
        params["estimators"] = tuple(v.strip() for v in args.estimators.split(","))
    params["threads"] = _threads_cap(params.get("threads"))
    out = args.out or params.pop("out", None) or f"{experiment}_results.csv"

    cfg = desk_config(experiment, **params)

    def progress(done, total):
        print(f"\rcells {done}/{total}", end="", file=sys.stderr, flush=True)

    try:
        rows = run_experiment(cfg, progress=progress)
    except PartialResults as partial:
        print(file=sys.stderr)
        write_csv(partial.rows, out)
        print(f"partial results ({len(partial.rows)} rows) written to {out}", file=sys.stderr)
        raise partial.cause
    print(file=sys.stderr)
    write_csv(rows, out)
    print(f"{len(rows)} rows written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distlasso",
        description="One-shot distributed sparse regression experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset file")
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--p", type=int, required=True)
    p_synth.add_argument("--s", type=int, required=True)
    p_synth.add_argument("--cov", choices=("identity", "ar1"), default="identity")
    p_synth.add_argument("--rho", type=float, default=0.5)
    p_synth.add_argument("--sigma-y", dest="sigma_y", type=float, default=1.0)
    p_synth.add_argument("--amplitude", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--response", choices=("linear", "logistic"), default="linear")
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_fit = sub.add_parser("fit", help="fit one estimator on a dataset file")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument(
        "--estimator",
        choices=("lasso", "debiased_lasso", "mestimator") + _SHARDED_ESTIMATORS,
        default="lasso",
    )
    p_fit.add_argument("--lambda", dest="lam", type=float, default=None)
    p_fit.add_argument("--tol", type=float, default=1e-8)
    p_fit.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=10000)
    p_fit.add_argument("--m", type=int, default=1, help="shard count for sharded estimators")
    p_fit.add_argument(
        "--drop-remainder", dest="drop_remainder", action="store_true",
        help="discard trailing rows when m does not divide n",
    )
    p_fit.add_argument("--theta-method", choices=("nodewise", "jm_program"), default="nodewise")
    p_fit.add_argument("--delta", type=float, default=None)
    p_fit.add_argument("--loss", choices=tuple(LOSSES), default="squared")
    p_fit.add_argument("--out", default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_exp = sub.add_parser("experiment", help="run a figure-style experiment grid")
    p_exp.add_argument("--experiment", choices=("fig1", "fig2", "fig3", "glm"), default=None)
    p_exp.add_argument("--config", default=None, help="flat key = value file; flags win")
    p_exp.add_argument("--out", default=None)
    p_exp.add_argument("--p", type=int, default=None)
    p_exp.add_argument("--n", type=int, default=None)
    p_exp.add_argument("--N", type=int, default=None)
    p_exp.add_argument("--s", type=int, default=None)
    p_exp.add_argument("--m-grid", dest="m_grid", default=None)
    p_exp.add_argument("--seeds", type=int, default=None)
    p_exp.add_argument("--base-seed", dest="base_seed", type=int, default=None)
    p_exp.add_argument("--cov", dest="cov_kind", choices=("identity", "ar1"), default=None)
    p_exp.add_argument("--rho", type=float, default=None)
    p_exp.add_argument("--sigma-y", dest="sigma_y", type=float, default=None)
    p_exp.add_argument("--amplitude", type=float, default=None)
    p_exp.add_argument("--estimators", default=None)
    p_exp.add_argument("--threshold-kind", dest="threshold_kind",
                       choices=("hard", "soft", "topk"), default=None)
    p_exp.add_argument("--threshold-scale", dest="threshold_scale", type=float, default=None)
    p_exp.add_argument("--theta-method", dest="theta_method",
                       choices=("nodewise", "jm_program"), default=None)
    p_exp.add_argument("--lam-scale", dest="lam_scale", type=float, default=None)
    p_exp.add_argument("--loss", choices=tuple(LOSSES), default=None)
    p_exp.add_argument("--threads", type=int, default=None)
    p_exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INVALID
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_NONCONVERGENCE
    except (InfeasibleRowError, DegenerateColumnError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_PRECISION


if __name__ == "__main__":
    sys.exit(main())
