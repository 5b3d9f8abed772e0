"""Command-line front end.

Subcommands: ``price``, ``tables``, ``validate``, ``converge``.
Exit codes: 0 success, 2 usage error, 3 validation failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import warnings
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .config import RunConfig
from .contracts import TABLE_PAYOFFS, CallPayoff, sigma_validate
from .drivers import (
    GridSpec,
    correlated_drivers,
    fgn_cholesky_factor,
    fgn_covariance,
    kernel_K,
    kernel_row,
)
from .engine import (
    THREADS_ENV,
    ExperimentSpec,
    convergence_study,
    default_threads,
    run_payoffs,
)
from .exceptions import DomainError, FHestonError, NumericalError, UsageError
from .model import (
    ModelParams,
    difference_residual,
    inverse_euler_step,
    parameter_condition,
)
from .streams import DRIVER_FGN, PathStreams, derive_seed

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4

SUMMARY_HEADER = ["payoff", "n", "mean", "sd", "cv", "min", "q1", "median", "q3", "max"]
ESTIMATES_HEADER = ["payoff", "n", "estimate_index", "value"]
CONVERGENCE_HEADER = ["level", "n", "delta", "strong_err_L2", "weak_err", "slope"]


def fmt(x) -> str:
    """Shortest decimal string that round-trips to the same double."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


@contextmanager
def warn_lines():
    """Print every Python warning raised inside the block as a ``WARN:`` line."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        yield
    seen = set()
    for w in caught:
        msg = str(w.message)
        if msg not in seen:
            seen.add(msg)
            print(f"WARN: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, action="append", help="grid size; repeat for several")
    common.add_argument("--paths", type=int, help="paths per estimate")
    common.add_argument("--estimates", type=int, help="number of estimates")
    common.add_argument("--payoff", choices=sorted(TABLE_PAYOFFS))
    common.add_argument("--strike", type=float, help="call strike (implies --payoff call)")
    common.add_argument("--scale", type=float, help="fraction of the configured estimate count")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument(
        "--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1); never changes results"
    )
    common.add_argument("--H", type=float, dest="hurst", help="Hurst index override")
    common.add_argument("--rho", type=float, help="correlation override")
    common.add_argument("--estimator", choices=["naive", "smoothed", "both"])

    parser = argparse.ArgumentParser(prog="fheston", description="Fractional Heston-type Monte-Carlo pricer")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("price", parents=[common], help="run one pricing experiment")
    sub.add_parser("tables", parents=[common], help="reproduce the three summary tables")
    v = sub.add_parser("validate", parents=[common], help="driver and assumption checks")
    v.add_argument("--p", type=float, help="moment order for the parameter condition")
    c = sub.add_parser("converge", parents=[common], help="coupled-ladder convergence study")
    c.add_argument("--ladder", type=int, nargs="+", help="dyadic grid ladder, coarse to fine")
    sub.add_parser("dump-config", parents=[common], help="print the effective configuration")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    d = cfg.to_dict()
    for key in ("seed", "paths", "estimates", "scale", "threads", "estimator"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    if args.n:
        d["grid_sizes"] = args.n
    if args.out is not None:
        d["out"] = str(args.out)
    if args.hurst is not None:
        d["model"]["H"] = args.hurst
    if args.rho is not None:
        d["model"]["rho"] = args.rho
    if args.strike is not None:
        d["payoff"] = CallPayoff(args.strike).to_dict()
    elif args.payoff:
        d["payoff"] = TABLE_PAYOFFS[args.payoff].to_dict()
    if getattr(args, "p", None) is not None:
        d["validate_p"] = args.p
    if getattr(args, "ladder", None):
        d["ladder"] = args.ladder
    return RunConfig.from_dict(d)


def _payoff_id(cfg: RunConfig) -> str:
    spec = cfg.payoff_spec()
    for name, p in TABLE_PAYOFFS.items():
        if p == spec:
            return name
    return spec.kind


def _print_summary(label: str, n: int, s) -> None:
    print(
        f"{label:<10} n={n:<5} mean={s.mean:.6g} sd={s.sd:.6g} cv={s.cv:.4f} "
        f"min={s.min:.6g} q1={s.q1:.6g} median={s.median:.6g} q3={s.q3:.6g} max={s.max:.6g}"
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_price(cfg: RunConfig, write: bool = False) -> int:
    params = cfg.model_params()
    sigma = cfg.sigma_spec()
    if not sigma.conforming:
        warnings.warn(f"sigma {sigma.kind} does not satisfy the regularity assumptions", UserWarning)
    payoff = cfg.payoff_spec()
    name = _payoff_id(cfg)
    n = cfg.grid_sizes[0]
    spec = ExperimentSpec(
        params, GridSpec(n, params.T), sigma, payoff, cfg.paths, cfg.scaled_estimates(), cfg.seed, cfg.estimator
    )
    res = run_payoffs(spec, {name: payoff}, cfg.threads)[name]
    print(f"payoff={name} paths={cfg.paths} estimates={spec.num_estimates} seed={cfg.seed}")
    for est, summary in res.summaries.items():
        _print_summary(est, n, summary)
    if write:
        out = Path(cfg.out)
        primary = res.primary
        write_csv(out / "summaries.csv", SUMMARY_HEADER, [[name, n, *res.summary.as_row()]])
        write_csv(
            out / "estimates.csv",
            ESTIMATES_HEADER,
            ([name, n, i, v] for i, v in enumerate(res.estimates[primary])),
        )
        print(f"wrote {out / 'summaries.csv'} and {out / 'estimates.csv'}")
    return EXIT_OK


def cmd_tables(cfg: RunConfig) -> int:
    """Three payoffs times the configured grid sizes, smoothed estimator."""
    params = cfg.model_params()
    sigma = cfg.sigma_spec()
    n_est = cfg.scaled_estimates()
    results = {}
    for n in cfg.grid_sizes:
        spec = ExperimentSpec(
            params,
            GridSpec(n, params.T),
            sigma,
            TABLE_PAYOFFS["call"],
            cfg.paths,
            n_est,
            derive_seed(cfg.seed, n),
            "smoothed",
        )
        results[n] = run_payoffs(spec, TABLE_PAYOFFS, cfg.threads)
    summary_rows, estimate_rows = [], []
    for name in TABLE_PAYOFFS:
        for n in cfg.grid_sizes:
            res = results[n][name]
            summary_rows.append([name, n, *res.summary.as_row()])
            _print_summary(name, n, res.summary)
            estimate_rows.extend([name, n, i, v] for i, v in enumerate(res.estimates["smoothed"]))
    out = Path(cfg.out)
    write_csv(out / "summaries.csv", SUMMARY_HEADER, summary_rows)
    write_csv(out / "estimates.csv", ESTIMATES_HEADER, estimate_rows)
    print(f"wrote {out / 'summaries.csv'} and {out / 'estimates.csv'}")
    return EXIT_OK


def _check(lines: list[str], ok: bool, text: str) -> bool:
    lines.append(f"{'PASS' if ok else 'FAIL'} {text}")
    return ok


def cmd_validate(cfg: RunConfig) -> int:
    """Driver statistics, kernel isometry, scheme invariants and assumption checks."""
    params = cfg.model_params()
    sigma = cfg.sigma_spec()
    H = params.H
    lines: list[str] = []
    warns: list[str] = []
    ok = True

    # exact fGn covariance
    n, N = 64, cfg.validate_paths
    grid = GridSpec(n, params.T)
    streams = PathStreams(cfg.seed)
    L = fgn_cholesky_factor(grid, H)
    x = streams.normals(DRIVER_FGN, np.arange(N), n) @ L.T
    cov = fgn_covariance(grid, H)
    # per-entry sd of the sample covariance, Bonferroni over the distinct entries
    sd = np.sqrt((np.outer(cov.diagonal(), cov.diagonal()) + cov**2) / N)
    z = float(norm.isf(1e-3 / (n * (n + 1))))
    worst = float(np.max(np.abs(x.T @ x / N - cov) / sd))
    ok &= _check(lines, worst <= z, f"fGn covariance n={n} H={H} N={N}: max |dev|/sd {worst:.3g} <= {z:.3g}")

    L5 = fgn_cholesky_factor(grid, 0.5)
    ok &= _check(lines, bool(np.array_equal(L5, math.sqrt(grid.delta) * np.eye(n))), "H=1/2 factor is sqrt(delta) I")

    if params.exploratory:
        warns.append(f"exploratory H regime (H={H}): isometry, cross-covariance and rate checks skipped")
    else:
        row = kernel_row(GridSpec(2000, params.T), H, 2000)
        iso = float(np.sum(row**2) * params.T / 2000)
        target = params.T ** (2 * H)
        ok &= _check(lines, abs(iso / target - 1) <= 0.02, f"kernel isometry n=2000: {iso:.6g} vs T^2H={target:.6g}")
        if params.rho != 0:
            ok &= _check_cross_covariance(lines, params, cfg)

    # scheme invariants on adversarial inputs
    rng = np.random.default_rng(cfg.seed)
    y = rng.uniform(1e-6, 5.0, 100_000)
    dbh = rng.normal(0, 1, y.size) * rng.choice([1e-3, 1.0, 100.0], y.size) - rng.choice([0.0, 50.0], y.size)
    y_next = inverse_euler_step(y, dbh, 1e-3, params)
    res, scale = difference_residual(y, y_next, dbh, 1e-3, params)
    ok &= _check(lines, bool(np.all(y_next > 0)), "inverse Euler step positive on 1e5 adversarial inputs")
    worst = float(np.max(np.abs(res) / scale))
    eps = np.finfo(float).eps
    ok &= _check(lines, worst <= 10 * eps, f"difference equation residual {worst:.3g} <= 10 eps")

    rep = sigma_validate(sigma)
    for name, item in rep.items.items():
        text = f"sigma {name}: {item.detail}"
        if item.passed:
            lines.append(f"PASS {text}")
        elif not sigma.conforming and params.rho == 0:
            warns.append(f"{text} (tolerated for rho = 0, naive estimator only)")
        else:
            ok &= _check(lines, False, text)
    if rep.ok:
        lines.append(f"INFO weak-error rate exponent r*H = {rep.rate_exponent(H):.4g}")

    cond = parameter_condition(cfg.validate_p, params)
    line = f"parameter condition {cond.describe()}"
    if cond.strict:
        lines.append(f"INFO {line}")
    else:
        warns.append(line)

    for l in lines:
        print(l)
    for w in warns:
        print(f"WARN: {w}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VALIDATION


def _check_cross_covariance(lines: list[str], params: ModelParams, cfg: RunConfig) -> bool:
    grid = GridSpec(64, params.T)
    N = cfg.validate_paths
    drv = correlated_drivers(grid, params.H, params.rho, PathStreams(derive_seed(cfg.seed, 1)), np.arange(N))
    bT, wT = drv.dBH.sum(axis=1), drv.dW.sum(axis=1)
    prod = bT * wT
    emp = float(prod.mean())
    exact = params.rho * quad(lambda u: kernel_K(params.T, u, params.H), 0, params.T, limit=200)[0]
    tol = 4 * float(prod.std()) / math.sqrt(N)
    return _check(lines, abs(emp - exact) <= tol, f"Cov(B^H_T, W_T) {emp:.4g} vs {exact:.4g} (tol {tol:.3g})")


def cmd_converge(cfg: RunConfig) -> int:
    params = cfg.model_params()
    rep = convergence_study(params, cfg.sigma_spec(), cfg.payoff_spec(), cfg.ladder, cfg.converge_paths, cfg.seed)
    rows = [[r.level, r.n, r.delta, r.strong_err_L2, r.weak_err, rep.strong_slope] for r in rep.rows]
    for r in rep.rows:
        print(
            f"level={r.level} n={r.n} strong_err_L2={r.strong_err_L2:.4g} "
            f"path_err_L2={r.path_err_L2:.4g} weak_err={r.weak_err:.4g}"
        )
    print(f"slope(Y_T)={rep.strong_slope:.4f} slope(path)={rep.path_slope:.4f} slope(weak)={rep.weak_slope:.4f}")
    out = Path(cfg.out) / "convergence.csv"
    write_csv(out, CONVERGENCE_HEADER, rows)
    print(f"wrote {out}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.paths is not None and args.paths < 1:
        parser.error("--paths must be >= 1")
    if args.estimates is not None and args.estimates < 1:
        parser.error("--estimates must be >= 1")
    try:
        with warn_lines():
            cfg = resolve_config(args)
            if cfg.threads is None:
                cfg = replace(cfg, threads=default_threads())
            if args.command == "price":
                return cmd_price(cfg, write=args.out is not None)
            if args.command == "tables":
                return cmd_tables(cfg)
            if args.command == "validate":
                return cmd_validate(cfg)
            if args.command == "converge":
                return cmd_converge(cfg)
            if args.command == "dump-config":
                sys.stdout.write(cfg.dump())
                return EXIT_OK
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FHestonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
