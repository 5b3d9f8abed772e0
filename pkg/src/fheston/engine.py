"""Monte-Carlo orchestration: naive and smoothed price estimators, batch statistics, convergence study."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .contracts import LinearSigma, PayoffSpec, SigmaSpec
from .drivers import DriverIncrements, GridSpec, correlated_drivers
from .exceptions import DomainError, InvalidSigmaError, UsageError
from .model import (
    ModelParams,
    PathResult,
    parameter_condition,
    simulate_price_terminal,
    simulate_vol_path,
)
from .streams import PathStreams

ESTIMATORS = ("naive", "smoothed", "both")
THREADS_ENV = "FHESTON_THREADS"
#: paths simulated at once inside one estimate; bounds memory, not results
CHUNK_PATHS = 4096


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentSpec:
    params: ModelParams
    grid: GridSpec
    sigma: SigmaSpec
    payoff: PayoffSpec
    paths_per_estimate: int = 1000
    num_estimates: int = 1000
    seed: int = 0
    estimator: str = "smoothed"

    def __post_init__(self):
        if self.paths_per_estimate < 1 or self.num_estimates < 1:
            raise UsageError("paths_per_estimate and num_estimates must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise UsageError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if abs(self.grid.T - self.params.T) > 1e-12 * self.params.T:
            raise UsageError(f"grid horizon {self.grid.T} differs from model T {self.params.T}")
        if isinstance(self.sigma, LinearSigma) and self.params.rho != 0:
            raise DomainError("a linear sigma is only admissible with rho = 0")
        if self.params.rho != 0 and self.params.H <= 0.5:
            raise DomainError("correlated drivers need H > 1/2 (Volterra representation)")


@dataclass(frozen=True)
class EstimateSummary:
    mean: float
    sd: float
    cv: float
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def as_row(self) -> list[float]:
        return [self.mean, self.sd, self.cv, self.min, self.q1, self.median, self.q3, self.max]


def summarize(estimates) -> EstimateSummary:
    """Descriptive statistics; quartiles interpolate linearly between order statistics."""
    x = np.asarray(estimates, dtype=float).ravel()
    if x.size == 0:
        raise UsageError("cannot summarise an empty set of estimates")
    mean = math.fsum(x) / x.size
    sd = float(np.sqrt(math.fsum((x - mean) ** 2) / (x.size - 1))) if x.size > 1 else 0.0
    cv = sd / mean if mean != 0 else float("nan")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    return EstimateSummary(mean, sd, cv, float(x.min()), float(q1), float(med), float(q3), float(x.max()))


# ---------------------------------------------------------------------------
# per-path quantities


def check_smoothable(sigma: SigmaSpec, params: ModelParams) -> None:
    if not sigma.sigma_min > 0:
        raise InvalidSigmaError(f"the smoothed estimator needs sigma bounded below by a positive constant; {sigma}")
    if abs(params.rho) == 1:
        raise InvalidSigmaError("the smoothed estimator needs |rho| < 1 (the V~ direction must carry noise)")


def smoothing_weight(result: PathResult, params: ModelParams) -> np.ndarray:
    """``1 + Z_T / (sqrt(1 - rho^2) T)``, the factor multiplying F(S_T)/S_T."""
    return 1.0 + result.zT / (math.sqrt(1.0 - params.rho**2) * params.T)


def naive_values(payoff: PayoffSpec, result: PathResult) -> np.ndarray:
    return np.asarray(payoff(result.sT), dtype=float)


def smoothed_values(payoff: PayoffSpec, result: PathResult, params: ModelParams) -> np.ndarray:
    return payoff.antiderivative(result.sT) / result.sT * smoothing_weight(result, params)


def simulate_paths(spec: ExperimentSpec, paths, streams: PathStreams | None = None) -> PathResult:
    """Simulate the listed global path indices (one row each)."""
    streams = streams or PathStreams(spec.seed)
    drivers = correlated_drivers(spec.grid, spec.params.H, spec.params.rho, streams, paths)
    vol = simulate_vol_path(drivers, spec.grid, spec.params)
    return simulate_price_terminal(drivers, vol, spec.grid, spec.params, spec.sigma)


def _chunks(start: int, count: int) -> Iterator[np.ndarray]:
    for lo in range(0, count, CHUNK_PATHS):
        yield np.arange(start + lo, start + min(lo + CHUNK_PATHS, count), dtype=np.int64)


def path_contributions(
    spec: ExperimentSpec,
    payoffs: dict[str, PayoffSpec],
    estimate_index: int,
    streams: PathStreams | None = None,
) -> dict[str, dict[str, np.ndarray]]:
    """Per-path naive / smoothed values of one estimate, keyed by payoff then estimator."""
    streams = streams or PathStreams(spec.seed)
    kinds = ("naive", "smoothed") if spec.estimator == "both" else (spec.estimator,)
    if "smoothed" in kinds:
        check_smoothable(spec.sigma, spec.params)
    parts: dict[str, dict[str, list]] = {name: {k: [] for k in kinds} for name in payoffs}
    start = estimate_index * spec.paths_per_estimate
    for paths in _chunks(start, spec.paths_per_estimate):
        res = simulate_paths(spec, paths, streams)
        for name, payoff in payoffs.items():
            if "naive" in kinds:
                parts[name]["naive"].append(naive_values(payoff, res))
            if "smoothed" in kinds:
                parts[name]["smoothed"].append(smoothed_values(payoff, res, spec.params))
    return {name: {k: np.concatenate(v) for k, v in d.items()} for name, d in parts.items()}


def _mean(values: np.ndarray) -> float:
    # correctly rounded, hence independent of summation order
    return math.fsum(values) / values.size


def naive_estimate(spec: ExperimentSpec, estimate_index: int = 0) -> float:
    spec = replace(spec, estimator="naive")
    return _mean(path_contributions(spec, {"f": spec.payoff}, estimate_index)["f"]["naive"])


def smoothed_estimate(spec: ExperimentSpec, estimate_index: int = 0) -> float:
    spec = replace(spec, estimator="smoothed")
    return _mean(path_contributions(spec, {"f": spec.payoff}, estimate_index)["f"]["smoothed"])


@dataclass
class ExperimentResult:
    estimates: dict[str, np.ndarray]
    summaries: dict[str, EstimateSummary] = field(default_factory=dict)

    @property
    def primary(self) -> str:
        return "smoothed" if "smoothed" in self.estimates else "naive"

    @property
    def summary(self) -> EstimateSummary:
        return self.summaries[self.primary]


def report_condition(params: ModelParams, p: float = 32) -> str | None:
    """Warning text when the sufficient parameter condition fails, else None."""
    rep = parameter_condition(p, params)
    if params.exploratory:
        return f"exploratory H regime (H={params.H}): rate and moment guarantees disabled"
    if not rep.strict:
        return f"parameter condition violated: {rep.describe()}"
    return None


def run_payoffs(
    spec: ExperimentSpec, payoffs: dict[str, PayoffSpec], threads: int | None = None
) -> dict[str, ExperimentResult]:
    """Run ``num_estimates`` estimates for several payoffs on shared paths.

    Output is identical for every ``threads`` value: estimates are
    independent work items with their own streams and exact summation.
    """
    msg = report_condition(spec.params)
    if msg:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    streams = PathStreams(spec.seed)
    threads = threads or default_threads()

    def one(i: int):
        contrib = path_contributions(spec, payoffs, i, streams)
        return {name: {k: _mean(v) for k, v in d.items()} for name, d in contrib.items()}

    if threads == 1:
        rows = [one(i) for i in range(spec.num_estimates)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(spec.num_estimates)))
    out = {}
    for name in payoffs:
        est = {k: np.array([r[name][k] for r in rows]) for k in rows[0][name]}
        out[name] = ExperimentResult(est, {k: summarize(v) for k, v in est.items()})
    return out


def run_experiment(spec: ExperimentSpec, threads: int | None = None) -> ExperimentResult:
    return run_payoffs(spec, {spec.payoff.kind: spec.payoff}, threads)[spec.payoff.kind]


@dataclass
class Comparison:
    """Large-sample naive vs smoothed comparison for one payoff."""

    naive: float
    smoothed: float
    se_naive: float
    se_smoothed: float

    @property
    def combined_se(self) -> float:
        return math.hypot(self.se_naive, self.se_smoothed)

    @property
    def z(self) -> float:
        return abs(self.naive - self.smoothed) / self.combined_se


def compare_estimators(spec: ExperimentSpec, payoffs: dict[str, PayoffSpec]) -> dict[str, Comparison]:
    """Naive and smoothed means with standard errors over ``paths_per_estimate`` paths."""
    contrib = path_contributions(replace(spec, estimator="both"), payoffs, 0)
    out = {}
    for name, d in contrib.items():
        a, b = d["naive"], d["smoothed"]
        out[name] = Comparison(
            _mean(a), _mean(b), float(np.std(a, ddof=1) / np.sqrt(a.size)), float(np.std(b, ddof=1) / np.sqrt(b.size))
        )
    return out


# ---------------------------------------------------------------------------
# convergence study


@dataclass
class ConvergenceRow:
    level: int
    n: int
    delta: float
    strong_err_L2: float
    weak_err: float
    #: sup over fine-grid times of the L2 error of the piecewise-constant path
    path_err_L2: float = 0.0


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    strong_slope: float
    weak_slope: float
    path_slope: float = float("nan")


def _fit_slope(deltas, errs) -> float:
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errs, dtype=float)
    keep = e > 0
    if np.unique(d[keep]).size < 2:
        return float("nan")
    return float(np.polyfit(np.log(d[keep]), np.log(e[keep]), 1)[0])


def check_ladder(ladder) -> list[int]:
    ladder = [int(n) for n in ladder]
    if not ladder or min(ladder) < 1:
        raise UsageError("the grid ladder must be a non-empty list of positive integers")
    for a, b in zip(ladder, ladder[1:]):
        if b < a or b % a:
            raise UsageError(f"grid ladder must be increasing with each level dividing the next: {ladder}")
    return ladder


def convergence_study(
    params: ModelParams,
    sigma: SigmaSpec,
    payoff: PayoffSpec,
    ladder,
    paths: int,
    seed: int = 0,
) -> ConvergenceReport:
    """Strong error of the volatility and weak error of the smoothed price.

    Drivers are simulated on the finest grid and summed in blocks for the
    coarser ones, so every level sees the same Brownian and fractional
    paths. Errors are measured against the finest level: at T
    (``strong_err_L2``) and uniformly over the fine grid with the coarse path
    held constant between its nodes (``path_err_L2``).
    """
    ladder = check_ladder(ladder)
    if paths < 1:
        raise UsageError("paths must be >= 1")
    check_smoothable(sigma, params)
    fine = GridSpec(ladder[-1], params.T)
    streams = PathStreams(seed)
    sq = np.zeros(len(ladder))
    diff = np.zeros(len(ladder))
    sq_path = np.zeros((len(ladder), fine.n))

    for chunk in _chunks(0, paths):
        drv = correlated_drivers(fine, params.H, params.rho, streams, chunk)
        outs = []
        for n in ladder:
            g = GridSpec(n, params.T)
            d: DriverIncrements = drv.coarsen(fine.n // n)
            vol = simulate_vol_path(d, g, params)
            res = simulate_price_terminal(d, vol, g, params, sigma)
            outs.append((vol, smoothed_values(payoff, res, params)))
        vol_f, v_f = outs[-1]
        for i, (vol, v) in enumerate(outs):
            sq[i] += math.fsum((vol[:, -1] - vol_f[:, -1]) ** 2)
            diff[i] += math.fsum(v - v_f)
            held = np.repeat(vol[:, :-1], fine.n // ladder[i], axis=1)
            sq_path[i] += np.sum((held - vol_f[:, :-1]) ** 2, axis=0)

    rows = [
        ConvergenceRow(
            i, n, params.T / n, math.sqrt(sq[i] / paths), abs(diff[i]) / paths, math.sqrt(sq_path[i].max() / paths)
        )
        for i, n in enumerate(ladder)
    ]
    coarse = rows[:-1]
    deltas = [r.delta for r in coarse]
    return ConvergenceReport(
        rows,
        _fit_slope(deltas, [r.strong_err_L2 for r in coarse]),
        _fit_slope(deltas, [r.weak_err for r in coarse]),
        _fit_slope(deltas, [r.path_err_L2 for r in coarse]),
    )
