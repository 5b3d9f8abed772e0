"""Volatility functions sigma and payoff functions f with closed-form antiderivatives.

Every spec is a small frozen dataclass that evaluates vectorised over numpy
arrays and serialises to a plain dict (``to_dict`` / ``sigma_from_dict`` /
``payoff_from_dict``) for the config file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, ClassVar

import numpy as np

from .exceptions import DomainError


def _nonneg(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("argument must be non-negative")
    return x


def _scalar(out: np.ndarray):
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# volatility functions


@dataclass(frozen=True)
class SigmaSpec:
    kind: ClassVar[str] = ""
    #: Hoelder exponent r of sigma, by analysis of the family
    holder_exponent: ClassVar[float] = 1.0

    def __call__(self, x):
        return _scalar(self._eval(_nonneg(x)))

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def sigma_min(self) -> float:
        """Certified lower bound of sigma on ``[0, inf)``."""
        raise NotImplementedError

    @property
    def growth_exponent(self) -> float:
        """q with ``sigma(x) <= C (1 + x^q)``."""
        raise NotImplementedError

    @property
    def constant(self) -> float:
        """A constant C valid for the growth, Hoelder and derivative bounds."""
        raise NotImplementedError

    @property
    def conforming(self) -> bool:
        return True

    def to_dict(self) -> dict[str, Any]:
        d = {"kind": self.kind}
        d.update({f.name: getattr(self, f.name) for f in fields(self)})
        return d


@dataclass(frozen=True)
class ShiftedPowerSigma(SigmaSpec):
    """``c (x + a)^q`` with ``c, a > 0`` and ``0 < q < 1``."""

    c: float = 0.5
    a: float = 0.01
    q: float = 0.9
    kind: ClassVar[str] = "shifted-power"

    def __post_init__(self):
        if not (self.c > 0 and self.a > 0 and 0 < self.q < 1):
            raise DomainError(f"shifted-power sigma needs c > 0, a > 0, 0 < q < 1; got {self}")

    def _eval(self, x):
        return self.c * (x + self.a) ** self.q

    def derivative(self, x):
        return self.c * self.q * (_nonneg(x) + self.a) ** (self.q - 1)

    @property
    def holder_exponent(self) -> float:
        return min(1.0, self.q)

    @property
    def sigma_min(self) -> float:
        return self.c * self.a**self.q

    @property
    def growth_exponent(self) -> float:
        return self.q

    @property
    def constant(self) -> float:
        # (x+a)^q <= x^q + a^q; |u^q - v^q| <= |u-v|^q; sigma' <= c q a^(q-1)
        return self.c * max(1.0, self.a**self.q, self.q * self.a ** (self.q - 1))


@dataclass(frozen=True)
class ConstantSigma(SigmaSpec):
    c: float = 0.5
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"constant sigma needs c > 0, got {self.c}")

    def _eval(self, x):
        return np.full(x.shape, float(self.c))

    def derivative(self, x):
        return np.zeros(np.shape(x))

    @property
    def sigma_min(self) -> float:
        return float(self.c)

    @property
    def growth_exponent(self) -> float:
        return 0.0

    @property
    def constant(self) -> float:
        return float(self.c)


@dataclass(frozen=True)
class LinearSigma(SigmaSpec):
    """``c x``: the plain fractional Heston volatility.

    Violates the lower-bound and sublinear-growth requirements, so it is
    only accepted for uncorrelated drivers and never with the smoothed
    estimator.
    """

    c: float = 0.5
    kind: ClassVar[str] = "linear"

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"linear sigma needs c > 0, got {self.c}")

    def _eval(self, x):
        return self.c * x

    def derivative(self, x):
        return np.full(np.shape(x), float(self.c))

    @property
    def sigma_min(self) -> float:
        return 0.0

    @property
    def growth_exponent(self) -> float:
        return 1.0

    @property
    def constant(self) -> float:
        return float(self.c)

    @property
    def conforming(self) -> bool:
        return False


_SIGMAS = {cls.kind: cls for cls in (ShiftedPowerSigma, ConstantSigma, LinearSigma)}


def sigma_from_dict(d: dict[str, Any]) -> SigmaSpec:
    d = dict(d)
    kind = d.pop("kind")
    try:
        cls = _SIGMAS[kind]
    except KeyError:
        raise DomainError(f"unknown sigma kind {kind!r}; expected one of {sorted(_SIGMAS)}") from None
    return cls(**{k: float(v) for k, v in d.items()})


def sigma_eval(spec: SigmaSpec, x):
    return spec(x)


@dataclass
class CheckItem:
    passed: bool
    detail: str
    value: float | None = None


@dataclass
class SigmaReport:
    """Per-item outcome of the sigma regularity checks."""

    spec: SigmaSpec
    items: dict[str, CheckItem] = field(default_factory=dict)
    holder_exponent: float = 1.0

    @property
    def ok(self) -> bool:
        return all(item.passed for item in self.items.values())

    def rate_exponent(self, H: float) -> float:
        """The product r H governing the weak error of the smoothed price."""
        return self.holder_exponent * H

    def lines(self) -> list[str]:
        out = []
        for name, item in self.items.items():
            out.append(f"{'PASS' if item.passed else 'FAIL'} sigma {name}: {item.detail}")
        return out


def sigma_validate(spec: SigmaSpec, x_max: float = 100.0, n_pairs: int = 10_000) -> SigmaReport:
    """Check the four regularity requirements on sigma over ``[0, x_max]``.

    Bounds that are claimed analytically are confirmed on log-spaced grids;
    violations are reported, never raised.
    """
    C = spec.constant
    r = spec.holder_exponent
    rep = SigmaReport(spec, holder_exponent=r)
    xs = np.concatenate([[0.0], np.logspace(-8, np.log10(x_max), 2000)])
    vals = spec(xs)

    smin = spec.sigma_min
    ok = smin > 0 and bool(np.all(vals >= smin))
    rep.items["lower-bound"] = CheckItem(ok, f"sigma_min = {smin:.6g}", smin)

    q = spec.growth_exponent
    growth_ok = q < 1 and bool(np.all(vals <= C * (1 + xs**q) * (1 + 1e-12)))
    rep.items["growth"] = CheckItem(growth_ok, f"q = {q:g}" + ("" if q < 1 else " (needs q < 1)"), q)

    # Hoelder ratio over pairs on a log-spaced grid
    m = int(np.sqrt(n_pairs))
    grid = np.concatenate([[0.0], np.logspace(-6, np.log10(x_max), m - 1)])
    x, y = np.meshgrid(grid, grid)
    mask = x != y
    ratio = np.abs(spec(x[mask]) - spec(y[mask])) / np.abs(x[mask] - y[mask]) ** r
    worst = float(ratio.max())
    rep.items["holder"] = CheckItem(worst <= C * (1 + 1e-9), f"r = {r:g}, max ratio {worst:.4g} <= C = {C:.4g}", r)

    qd = 1.0
    d = spec.derivative(xs)
    rep.items["derivative"] = CheckItem(
        bool(np.all(d <= C * (1 + xs**qd) * (1 + 1e-12))), f"sigma' <= C (1 + x^{qd:g}) on the check grid"
    )
    return rep


# ---------------------------------------------------------------------------
# payoffs


@dataclass(frozen=True)
class PayoffSpec:
    kind: ClassVar[str] = ""

    def __call__(self, x):
        return _scalar(self._eval(_nonneg(x)))

    def antiderivative(self, x):
        """``F(x) = int_0^x f(z) dz`` in closed form."""
        return _scalar(self._F(_nonneg(x)))

    def _eval(self, x):
        raise NotImplementedError

    def _F(self, x):
        raise NotImplementedError

    @property
    def jumps(self) -> tuple[float, ...]:
        """Discontinuity points of f."""
        return ()

    def growth_bound(self) -> tuple[float, float]:
        """``(C_f, p)`` with ``f(x) <= C_f (1 + x^p)``."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        d = {"kind": self.kind}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d


@dataclass(frozen=True)
class CallPayoff(PayoffSpec):
    """``(x - K)^+``."""

    strike: float = 1.0
    kind: ClassVar[str] = "call"

    def __post_init__(self):
        if not self.strike >= 0:
            raise DomainError(f"strike must be non-negative, got {self.strike}")

    def _eval(self, x):
        return np.maximum(x - self.strike, 0.0)

    def _F(self, x):
        return 0.5 * np.maximum(x - self.strike, 0.0) ** 2

    def growth_bound(self):
        return 1.0, 1.0


@dataclass(frozen=True)
class IndicatorPayoff(PayoffSpec):
    """Indicator of the closed interval ``[lower, upper]``."""

    lower: float = 0.5
    upper: float = 1.0
    kind: ClassVar[str] = "indicator"

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper:
            raise DomainError(f"need 0 <= lower <= upper, got [{self.lower}, {self.upper}]")

    def _eval(self, x):
        return ((x >= self.lower) & (x <= self.upper)).astype(float)

    def _F(self, x):
        return np.clip(x, self.lower, self.upper) - self.lower

    @property
    def jumps(self):
        return (self.lower, self.upper)

    def growth_bound(self):
        return 1.0, 1.0


@dataclass(frozen=True)
class StaircasePayoff(PayoffSpec):
    """``sum_i w_i 1_{(a_i, inf)}(x)`` with non-negative weights (open left ends)."""

    points: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    weights: tuple[float, ...] = (1.0, 0.5, 0.5, 0.5, 0.5, 0.5)
    kind: ClassVar[str] = "staircase"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.points) != len(self.weights) or not self.points:
            raise DomainError("staircase needs matching, non-empty points and weights")
        if min(self.points) < 0 or min(self.weights) < 0:
            raise DomainError("staircase points and weights must be non-negative")

    def _eval(self, x):
        a = np.asarray(self.points)
        return (x[..., None] > a).astype(float) @ np.asarray(self.weights)

    def _F(self, x):
        a = np.asarray(self.points)
        return np.maximum(x[..., None] - a, 0.0) @ np.asarray(self.weights)

    @property
    def jumps(self):
        return self.points

    def growth_bound(self):
        return float(sum(self.weights)), 1.0


@dataclass(frozen=True)
class PiecewiseLinearPayoff(PayoffSpec):
    """Piecewise-linear payoff with jumps allowed at the breakpoints.

    On ``[breaks[i], breaks[i+1])`` the payoff is
    ``levels[i] + slopes[i] (x - breaks[i])``; the last piece extends to
    infinity. ``breaks[0]`` must be 0.
    """

    breaks: tuple[float, ...] = (0.0,)
    levels: tuple[float, ...] = (0.0,)
    slopes: tuple[float, ...] = (1.0,)
    kind: ClassVar[str] = "piecewise"

    def __post_init__(self):
        for name in ("breaks", "levels", "slopes"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        b, c, s = self.breaks, self.levels, self.slopes
        if not (len(b) == len(c) == len(s) >= 1):
            raise DomainError("breaks, levels and slopes must have equal non-zero length")
        if b[0] != 0 or any(x >= y for x, y in zip(b, b[1:])):
            raise DomainError("breaks must start at 0 and increase strictly")
        ends = [c[i] + s[i] * (b[i + 1] - b[i]) for i in range(len(b) - 1)]
        if min(c) < 0 or min(ends, default=0.0) < -1e-15 or s[-1] < 0:
            raise DomainError("piecewise payoff must be non-negative everywhere")

    def _piece(self, x):
        return np.searchsorted(np.asarray(self.breaks), x, side="right") - 1

    def _eval(self, x):
        i = self._piece(x)
        b, c, s = (np.asarray(v) for v in (self.breaks, self.levels, self.slopes))
        return c[i] + s[i] * (x - b[i])

    def _F(self, x):
        b, c, s = (np.asarray(v) for v in (self.breaks, self.levels, self.slopes))
        widths = np.diff(b)
        full = c[:-1] * widths + 0.5 * s[:-1] * widths**2
        cum = np.concatenate([[0.0], np.cumsum(full)])
        i = self._piece(x)
        u = x - b[i]
        return cum[i] + c[i] * u + 0.5 * s[i] * u**2

    @property
    def jumps(self):
        return self.breaks[1:]

    def growth_bound(self):
        # linear pieces peak at their ends; the last piece grows like slope * x
        b, c, s = self.breaks, self.levels, self.slopes
        ends = [c[i] + s[i] * (b[i + 1] - b[i]) for i in range(len(b) - 1)]
        return max(max(c), max(ends, default=0.0), s[-1]), 1.0


_PAYOFFS = {cls.kind: cls for cls in (CallPayoff, IndicatorPayoff, StaircasePayoff, PiecewiseLinearPayoff)}

#: the three payoffs of the reproduction tables
TABLE_PAYOFFS: dict[str, PayoffSpec] = {
    "call": CallPayoff(1.0),
    "indicator": IndicatorPayoff(0.5, 1.0),
    "staircase": StaircasePayoff(),
}


def payoff_from_dict(d: dict[str, Any]) -> PayoffSpec:
    d = dict(d)
    kind = d.pop("kind")
    try:
        cls = _PAYOFFS[kind]
    except KeyError:
        raise DomainError(f"unknown payoff kind {kind!r}; expected one of {sorted(_PAYOFFS)}") from None
    return cls(**d)


def payoff_eval(spec: PayoffSpec, x):
    return spec(x)


def antiderivative_F(spec: PayoffSpec, x):
    return spec.antiderivative(x)
