"""Gaussian drivers: fractional Gaussian noise, Volterra kernel, correlated Wiener increments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.special import betaln, hyp2f1, roots_jacobi

from .exceptions import DomainError, NumericalError
from .streams import DRIVER_FGN, DRIVER_V, DRIVER_VTILDE, PathStreams

CHEB_DEGREE = 20


@dataclass(frozen=True)
class GridSpec:
    """Equidistant partition ``t_k = k T / n`` of ``[0, T]``."""

    n: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))

    @property
    def delta(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.T / self.n


@dataclass
class DriverIncrements:
    """Increments of V, V~, W and B^H on a grid; arrays have shape ``(..., n)``.

    Leading axes index paths, so one instance may hold a whole batch.
    """

    dV: np.ndarray
    dVtilde: np.ndarray
    dW: np.ndarray
    dBH: np.ndarray

    @property
    def n(self) -> int:
        return self.dBH.shape[-1]

    def __len__(self):
        return 1 if self.dBH.ndim == 1 else self.dBH.shape[0]

    def coarsen(self, factor: int) -> "DriverIncrements":
        """Sum increments in consecutive blocks of ``factor`` steps."""
        if self.n % factor:
            raise DomainError(f"block size {factor} does not divide n={self.n}")

        def agg(a):
            return a.reshape(a.shape[:-1] + (self.n // factor, factor)).sum(axis=-1)

        return DriverIncrements(agg(self.dV), agg(self.dVtilde), agg(self.dW), agg(self.dBH))


def c_H(H: float) -> float:
    """Normalising constant of the Molchan-Golosov type kernel, for 1/2 < H < 1."""
    if not 0.5 < H < 1:
        raise DomainError(f"c_H requires 1/2 < H < 1, got {H}")
    return math.exp(0.5 * (math.log(H * (2 * H - 1)) - betaln(2 - 2 * H, H - 0.5)))


def covariance_RH(t, s, H: float):
    """fBm covariance ``(t^2H + s^2H - |t-s|^2H) / 2``; broadcasts over arrays."""
    if not 0 < H < 1:
        raise DomainError(f"H must lie in (0, 1), got {H}")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("covariance_RH is defined for t, s >= 0")
    h2 = 2 * H
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return out[()] if out.ndim == 0 else out


def fgn_covariance(grid: GridSpec, H: float) -> np.ndarray:
    """Covariance matrix of the fBm increments on ``grid``."""
    return grid.delta ** (2 * H) * _unit_fgn_covariance(grid.n, H)


def _unit_fgn_covariance(n: int, H: float) -> np.ndarray:
    # unit-step increments; self-similarity rescales by delta^(2H)
    k = np.arange(n + 1, dtype=float)
    a, b = k[1:, None], k[None, 1:]
    c, d = k[:-1, None], k[None, :-1]
    return covariance_RH(a, b, H) - covariance_RH(a, d, H) - covariance_RH(c, b, H) + covariance_RH(c, d, H)


@lru_cache(maxsize=32)
def _unit_cholesky(n: int, H: float) -> np.ndarray:
    cov = _unit_fgn_covariance(n, H)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"fGn covariance for n={n}, H={H} is not numerically positive definite; "
            "add a small diagonal jitter (e.g. 1e-12) or reduce n"
        ) from exc
    L.setflags(write=False)
    return L


def fgn_cholesky_factor(grid: GridSpec, H: float) -> np.ndarray:
    """Lower Cholesky factor of :func:`fgn_covariance` (cached per (n, H))."""
    if not 0 < H < 1:
        raise DomainError(f"H must lie in (0, 1), got {H}")
    return grid.delta**H * _unit_cholesky(grid.n, float(H))


def fgn_cholesky(grid: GridSpec, H: float, normals: np.ndarray) -> np.ndarray:
    """Exact fGn increments from standard normals of shape ``(..., n)``."""
    normals = np.asarray(normals, dtype=float)
    if normals.shape[-1] != grid.n:
        raise DomainError(f"expected trailing dimension {grid.n}, got {normals.shape[-1]}")
    return normals @ fgn_cholesky_factor(grid, H).T


@lru_cache(maxsize=32)
def _jacobi_rule(alpha: float, beta: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for the weight ``(1 - v)^alpha v^beta``."""
    x, w = roots_jacobi(order, alpha, beta)
    return (1 + x) / 2, w * 2.0 ** (-alpha - beta - 1)


def _inner(t: np.ndarray, s: np.ndarray, H: float) -> np.ndarray:
    # int_0^1 v^(H-3/2) (s + (t-s) v)^(H-1/2) dv, the smooth factor of K, in closed form
    q = H - 0.5
    return s ** (2 * q) * t ** (-q) / q * hyp2f1(q, 2 * H, H + 0.5, 1 - s / t)


@lru_cache(maxsize=32)
def _phi_pieces(H: float):
    """Chebyshev fits of the two analytic factors of the smooth part of K, plus connection constants."""
    q = H - 0.5
    far = Chebyshev.interpolate(lambda x: hyp2f1(q, 2 * H, H + 0.5, x), CHEB_DEGREE, domain=[0, 0.5])
    near = Chebyshev.interpolate(lambda z: hyp2f1(1.0, 0.5 - H, 2 - 2 * H, z), CHEB_DEGREE, domain=[0, 0.5])
    c1 = math.gamma(H + 0.5) * math.gamma(1 - 2 * H) / math.gamma(0.5 - H)
    c2 = math.exp(math.lgamma(H + 0.5) + math.lgamma(2 * H - 1) - math.lgamma(H - 0.5) - math.lgamma(2 * H))
    return far, near, c1, c2


def _fast_inner(t: np.ndarray, s: np.ndarray, H: float) -> np.ndarray:
    """Same as :func:`_inner` via the scaling ``J(t, s) = t^(H-1/2) phi(s/t)`` and cached fits."""
    far, near, c1, c2 = _phi_pieces(H)
    q = H - 0.5
    z = s / t
    out = np.empty(z.shape)
    lo = z < 0.5
    zl, zh = z[lo], z[~lo]
    out[lo] = (c1 * zl ** (2 * q) * (1 - zl) ** (-q) + c2 * near(zl)) / q
    out[~lo] = zh ** (2 * q) / q * far(1 - zh)
    return out * t ** q


def kernel_K(t, s, H: float):
    """Volterra kernel of fBm, K(t, s), for 1/2 < H < 1 and s > 0.

    The inner integral is a Gauss hypergeometric function, which stays
    accurate as ``s / t -> 0`` where polynomial rules lose digits.
    Zero for ``s >= t``. Broadcasts over ``t`` and ``s``.
    """
    ch = c_H(H)
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if np.any(s <= 0):
        raise DomainError("kernel_K requires s > 0")
    out = np.zeros(t.shape)
    live = s < t
    tt, ss = t[live], s[live]
    out[live] = ch * ss ** (0.5 - H) * (tt - ss) ** (H - 0.5) * _inner(tt, ss, H)
    return out[()] if out.ndim == 0 else out


def _head_energy(t: float, H: float, width: float, order: int) -> float:
    """``int_0^width K(t, s)^2 ds`` for ``width <= t / 2``.

    Near s = 0 the smooth factor splits as ``C1 s^(2H-1) g1(s) + C2 t^(2H-1) g2(s)``
    with g1, g2 analytic there, so each cross term gets its own Jacobi weight.
    """
    q = H - 0.5
    _, near, c1, c2 = _phi_pieces(H)
    total = 0.0
    # exponent of s carried by each term of s^(1-2H) J^2
    for beta, coef, pick in ((2 * H - 1, c1 * c1, 0), (0.0, 2 * c1 * c2, 1), (1 - 2 * H, c2 * c2, 2)):
        nodes, weights = _jacobi_rule(0.0, beta, order)
        s = width * nodes
        z = s / t
        g1 = (1 - z) ** (-q)
        g2 = near(z)
        f = (g1 * g1, g1 * g2 * t ** (2 * H - 1), g2 * g2 * t ** (4 * H - 2))[pick]
        f = f * (t - s) ** (2 * H - 1) * width ** beta
        total += coef * width * float(f @ weights)
    return c_H(H) ** 2 * t ** (-2 * q) / (q * q) * total


def _cell_energy(t: float, H: float, n_cells: int, delta: float, order: int = 8) -> np.ndarray:
    """``int K(t, s)^2 ds`` over the cells ``[j delta, (j+1) delta]``, j < n_cells.

    K^2 = c_H^2 s^(1-2H) (t-s)^(2H-1) J(t,s)^2. The left half of the first
    cell is done by :func:`_head_energy`; elsewhere J is smooth and the
    ``(t-s)`` singularity of the last cell goes into a Jacobi weight.
    """
    ch2 = c_H(H) ** 2
    half = 0.5 * delta
    out = np.zeros(n_cells)
    out[0] = _head_energy(t, H, half, order)
    # (left ends, width, alpha on the right end)
    groups = []
    if n_cells == 1:
        groups.append((np.array([half]), half, 2 * H - 1, [0]))
    else:
        groups.append((np.array([half]), half, 0.0, [0]))
        groups.append((np.array([(n_cells - 1) * delta]), delta, 2 * H - 1, [n_cells - 1]))
        if n_cells > 2:
            groups.append((np.arange(1, n_cells - 1) * delta, delta, 0.0, slice(1, n_cells - 1)))
    for lo, width, alpha, cells in groups:
        nodes, weights = _jacobi_rule(float(alpha), 0.0, order)
        s = lo[:, None] + width * nodes
        r = t - s
        smooth = _fast_inner(np.full_like(s, t), s, H) ** 2 * s ** (1 - 2 * H)
        smooth *= r ** (2 * H - 1) / (r / width) ** alpha if alpha else r ** (2 * H - 1)
        out[cells] += ch2 * width * (smooth @ weights)
    return out


@dataclass(frozen=True)
class KernelTable:
    """Cell weights of the Volterra kernel on a grid.

    ``weights[k, j]`` is the root-mean-square of ``K(t_k, .)`` over cell j,
    so ``sum_j weights[k, j]^2 delta`` reproduces ``t_k^(2H)`` up to
    quadrature error. Shape ``(n + 1, n)``; entries with ``j >= k`` are
    exactly zero.
    """

    H: float
    grid: GridSpec
    weights: np.ndarray

    @classmethod
    def build(cls, grid: GridSpec, H: float) -> "KernelTable":
        return _kernel_table(grid, float(H))

    def levels(self, dV: np.ndarray) -> np.ndarray:
        """Approximate ``B^H(t_k)`` for k = 0..n from Wiener increments."""
        return dV @ self.weights.T

    def increments(self, dV: np.ndarray) -> np.ndarray:
        return np.diff(self.levels(dV), axis=-1)

    def isometry(self, k: int | None = None) -> float:
        """``sum_j weights[k, j]^2 * delta``, which should approximate ``t_k^(2H)``."""
        k = self.grid.n if k is None else k
        return float(np.sum(self.weights[k] ** 2) * self.grid.delta)


def kernel_row(grid: GridSpec, H: float, k: int) -> np.ndarray:
    """Row k of the weight table without building the full matrix."""
    if not 0.5 < H < 1:
        raise DomainError(f"the Volterra representation needs 1/2 < H < 1, got {H}")
    row = np.zeros(grid.n)
    if k > 0:
        row[:k] = np.sqrt(_cell_energy(k * grid.T / grid.n, H, k, grid.delta) / grid.delta)
    return row


@lru_cache(maxsize=8)
def _kernel_table(grid: GridSpec, H: float) -> KernelTable:
    w = np.zeros((grid.n + 1, grid.n))
    for k in range(1, grid.n + 1):
        w[k] = kernel_row(grid, H, k)
    w.setflags(write=False)
    return KernelTable(H, grid, w)


def correlated_drivers(grid: GridSpec, H: float, rho: float, streams: PathStreams, paths) -> DriverIncrements:
    """Driver increments for the given path indices (one row per path).

    ``rho == 0`` samples B^H exactly by Cholesky, independently of W = V~.
    Otherwise B^H is built from V through the Volterra cell table and
    ``dW = rho dV + sqrt(1 - rho^2) dV~``.
    """
    if not -1 <= rho <= 1:
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    n = grid.n
    sd = math.sqrt(grid.delta)
    dV = sd * streams.normals(DRIVER_V, paths, n)
    dVtilde = sd * streams.normals(DRIVER_VTILDE, paths, n)
    if rho == 0:
        dBH = fgn_cholesky(grid, H, streams.normals(DRIVER_FGN, paths, n))
        return DriverIncrements(dV, dVtilde, dVtilde.copy(), dBH)
    dW = rho * dV + math.sqrt(1 - rho * rho) * dVtilde
    dBH = KernelTable.build(grid, H).increments(dV)
    return DriverIncrements(dV, dVtilde, dW, dBH)
