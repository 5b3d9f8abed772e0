"""Volatility scheme, discretised price and related path functionals.

Everything here is vectorised: arrays of driver increments carry paths on
their leading axes and time on the last axis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

from .contracts import SigmaSpec
from .drivers import DriverIncrements, GridSpec
from .exceptions import (
    DomainError,
    ExploratoryRegimeWarning,
    InvalidSigmaError,
    UsageError,
)


@dataclass(frozen=True)
class ModelParams:
    """Constants of the price / volatility system.

    ``lam`` is the risk-free rate; it only enters the martingale density and
    :meth:`discount`. Hurst indices in ``(0, 1/2]`` are accepted with an
    :class:`ExploratoryRegimeWarning`.
    """

    mu: float = 0.5
    kappa: float = 1.0
    theta: float = 1.0
    nu: float = 0.14
    H: float = 0.7
    rho: float = 0.0
    lam: float = 0.0
    S0: float = 1.0
    Y0: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))
        for name in ("kappa", "theta", "S0", "Y0", "T"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.nu >= 0:
            raise DomainError(f"nu must be non-negative, got {self.nu}")
        if not 0 < self.H < 1:
            raise DomainError(f"H must lie in (0, 1), got {self.H}")
        if not -1 <= self.rho <= 1:
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")
        if not self.lam >= 0:
            raise DomainError(f"the risk-free rate must be non-negative, got {self.lam}")
        if self.exploratory:
            warnings.warn(
                f"exploratory H regime (H={self.H} <= 1/2): the scheme runs but "
                "convergence and moment guarantees do not apply",
                ExploratoryRegimeWarning,
                stacklevel=3,
            )

    @property
    def exploratory(self) -> bool:
        return self.H <= 0.5

    @property
    def fixed_point(self) -> float:
        """Zero of the volatility drift, ``sqrt(kappa / theta)``."""
        return math.sqrt(self.kappa / self.theta)

    def discount(self) -> float:
        return math.exp(-self.lam * self.T)

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class PathResult:
    """Per-path outputs; scalars become arrays when a batch is simulated."""

    volPath: np.ndarray
    xT: np.ndarray
    sT: np.ndarray
    zT: np.ndarray
    density: np.ndarray | None = None


def inverse_euler_step(y_prev, dBH, delta: float, params: ModelParams):
    """One step of the drift-implicit scheme, solved in closed form.

    Returns the positive root of ``(2 + theta delta) y^2 - 2 a y - kappa delta = 0``
    with ``a = y_prev + nu dBH / 2``. For ``a < 0`` the root is computed from
    the conjugate form to avoid cancellation.
    """
    kappa, theta = params.kappa, params.theta
    a = np.asarray(y_prev, dtype=float) + 0.5 * params.nu * np.asarray(dBH, dtype=float)
    c = kappa * delta * (2 + theta * delta)
    denom = 2 + theta * delta
    root = np.sqrt(a * a + c)
    # a + root for a >= 0, c / (root - a) otherwise: both positive
    safe_a = np.where(a >= 0, a, 0.0)
    out = np.where(a >= 0, (safe_a + root) / denom, c / ((root - np.minimum(a, 0.0)) * denom))
    return out[()] if out.ndim == 0 else out


def difference_residual(y_prev, y_next, dBH, delta: float, params: ModelParams):
    """Residual of the implicit difference equation and its magnitude scale.

    Returns ``(residual, scale)`` where scale is the sum of absolute values
    of the terms, so ``|residual| / scale`` is a backward relative error.
    """
    y_prev, y_next, dBH = (np.asarray(v, dtype=float) for v in (y_prev, y_next, dBH))
    terms = (
        y_prev,
        0.5 * params.kappa / y_next * delta,
        -0.5 * params.theta * y_next * delta,
        0.5 * params.nu * dBH,
    )
    rhs = terms[0] + terms[1] + terms[2] + terms[3]
    scale = np.abs(y_next) + sum(np.abs(t) for t in terms)
    return y_next - rhs, scale


def simulate_vol_path(drivers: DriverIncrements, grid: GridSpec, params: ModelParams) -> np.ndarray:
    """Volatility on the grid, shape ``(..., n + 1)``; first column is ``Y0``."""
    dBH = np.asarray(drivers.dBH, dtype=float)
    if dBH.shape[-1] != grid.n:
        raise UsageError(f"drivers have {dBH.shape[-1]} steps, grid has {grid.n}")
    out = np.empty(dBH.shape[:-1] + (grid.n + 1,))
    out[..., 0] = params.Y0
    delta = grid.delta
    for k in range(grid.n):
        out[..., k + 1] = inverse_euler_step(out[..., k], dBH[..., k], delta, params)
    return out


def _sigma_left(sigma: SigmaSpec, vol: np.ndarray) -> np.ndarray:
    return sigma(vol[..., :-1])


def simulate_price_terminal(
    drivers: DriverIncrements,
    vol: np.ndarray,
    grid: GridSpec,
    params: ModelParams,
    sigma: SigmaSpec,
    with_density: bool = False,
) -> PathResult:
    """Terminal log-price, price and smoothing weight from left-point sums."""
    s = _sigma_left(sigma, vol)
    delta = grid.delta
    xT = (
        math.log(params.S0)
        + params.mu * params.T
        - 0.5 * np.sum(s * s, axis=-1) * delta
        + np.sum(s * drivers.dW, axis=-1)
    )
    with np.errstate(divide="ignore"):
        zT = np.sum(drivers.dVtilde / s, axis=-1)
    density = minimal_martingale_density(drivers, vol, grid, params, sigma) if with_density else None
    return PathResult(vol, xT, np.exp(xT), zT, density)


def minimal_martingale_density(
    drivers: DriverIncrements, vol: np.ndarray, grid: GridSpec, params: ModelParams, sigma: SigmaSpec
):
    """Radon-Nikodym weight of the minimal martingale measure at T."""
    s = _sigma_left(sigma, vol)
    if np.any(s <= 0):
        raise InvalidSigmaError("sigma vanished on a simulated path; the density needs sigma > 0")
    market_price = (params.lam - params.mu) / s
    eta1 = params.rho * market_price
    eta2 = math.sqrt(1 - params.rho**2) * market_price
    log_d = (
        np.sum(eta1 * drivers.dV, axis=-1)
        + np.sum(eta2 * drivers.dVtilde, axis=-1)
        - 0.5 * np.sum(eta1 * eta1 + eta2 * eta2, axis=-1) * grid.delta
    )
    return np.exp(log_d)


@dataclass(frozen=True)
class ConditionReport:
    p: float
    bound: float
    strict: bool  # 3p + 1 <= bound, needed for the price error rate
    inverse_moment: bool  # p + 1 <= bound, finite inverse moments of order p

    @property
    def margin(self) -> float:
        """``bound - (3p + 1)``; negative when the strict condition fails."""
        return self.bound - (3 * self.p + 1)

    @property
    def inverse_margin(self) -> float:
        return self.bound - (self.p + 1)

    def describe(self) -> str:
        return (
            f"p={self.p:g}: 3p+1={3 * self.p + 1:g} <= {self.bound:.4f} is {self.strict} "
            f"(margin {self.margin:+.4f}); p+1 <= bound is {self.inverse_moment}"
        )


def parameter_condition(p: float, params: ModelParams) -> ConditionReport:
    """Sufficient condition ``3p + 1 <= 2 kappa / (nu^2 H T^(2H-1))``."""
    if params.nu == 0:
        bound = math.inf
    else:
        bound = 2 * params.kappa / (params.nu**2 * params.H * params.T ** (2 * params.H - 1))
    return ConditionReport(float(p), bound, 3 * p + 1 <= bound, p + 1 <= bound)


@dataclass
class MomentDiagnostics:
    p: float
    sup_moment: float
    sup_inverse_moment: float
    inverse_meaningful: bool
    lags: np.ndarray
    increment_moments: np.ndarray
    increment_exponent: float


def moment_diagnostics(
    paths: np.ndarray, p: float, grid: GridSpec | None = None, params: ModelParams | None = None
) -> MomentDiagnostics:
    """Empirical moment bounds and increment scaling for a batch of volatility paths.

    ``paths`` has shape ``(N, n + 1)``. The increment exponent is the
    log-log slope of ``E|Y_{t+h} - Y_t|^p`` over dyadic lags h, averaged
    over all admissible t.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    if paths.shape[0] == 0 or paths.shape[1] == 0:
        raise UsageError("moment_diagnostics needs a non-empty batch")
    n = paths.shape[1] - 1
    delta = grid.delta if grid is not None else 1.0 / max(n, 1)
    sup_m = float(np.max(np.mean(paths**p, axis=0)))
    sup_inv = float(np.max(np.mean(paths ** (-p), axis=0)))
    meaningful = parameter_condition(p, params).inverse_moment if params is not None else False

    lags = []
    h = 1
    while h <= max(n // 8, 1) and h <= n:
        lags.append(h)
        h *= 2
    lags = np.asarray(lags if n >= 1 else [], dtype=int)
    inc = np.array([np.mean(np.abs(paths[:, h:] - paths[:, :-h]) ** p) for h in lags])
    if len(lags) >= 2 and np.all(inc > 0):
        slope = float(np.polyfit(np.log(lags * delta), np.log(inc), 1)[0])
    else:
        slope = float("nan")
    return MomentDiagnostics(p, sup_m, sup_inv, meaningful, lags * delta, inc, slope)
