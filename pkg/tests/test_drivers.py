import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from fheston.drivers import (
    DriverIncrements,
    GridSpec,
    KernelTable,
    c_H,
    correlated_drivers,
    covariance_RH,
    fgn_cholesky,
    fgn_cholesky_factor,
    fgn_covariance,
    kernel_K,
    kernel_row,
)
from fheston.exceptions import DomainError
from fheston.streams import DRIVER_FGN, PathStreams


def c_H_oracle(H):
    with mp.workdps(40):
        H = mp.mpf(H)
        beta = mp.gamma(2 - 2 * H) * mp.gamma(H - mp.mpf(1) / 2) / mp.gamma(mp.mpf(3) / 2 - H)
        return float(mp.sqrt(H * (2 * H - 1) / beta))


def K_oracle(t, s, H):
    """K(t, s) by adaptive tanh-sinh quadrature after subtracting the endpoint singularity."""
    with mp.workdps(30):
        t, s, H = mp.mpf(t), mp.mpf(s), mp.mpf(H)
        a, b = H - mp.mpf(1) / 2, H - mp.mpf(3) / 2
        regular = mp.quad(lambda u: (u**a - s**a) * (u - s) ** b, [s, t])
        singular = s**a * (t - s) ** (b + 1) / (b + 1)
        return float(mp.mpf(c_H_oracle(H)) * s ** (mp.mpf(1) / 2 - H) * (regular + singular))


class TestGrid:
    def test_delta_and_times(self):
        g = GridSpec(4, 2.0)
        assert g.delta == 0.5
        assert np.array_equal(g.times, [0, 0.5, 1.0, 1.5, 2.0])

    @pytest.mark.parametrize("n,T", [(0, 1.0), (-3, 1.0), (2.5, 1.0), (4, 0.0)])
    def test_rejects_bad_grid(self, n, T):
        with pytest.raises(DomainError):
            GridSpec(n, T)


class TestCH:
    @pytest.mark.parametrize("H", [0.51, 0.6, 0.7, 0.75, 0.9, 0.99])
    def test_defining_identity(self, H):
        B = math.exp(math.lgamma(2 - 2 * H) + math.lgamma(H - 0.5) - math.lgamma(1.5 - H))
        assert c_H(H) ** 2 * B == pytest.approx(H * (2 * H - 1), rel=1e-12)

    @pytest.mark.parametrize("H", [0.55, 0.75, 0.95])
    def test_against_high_precision_gamma(self, H):
        assert c_H(H) == pytest.approx(c_H_oracle(H), rel=1e-13)

    def test_value_at_three_quarters(self):
        assert c_H(0.75) == pytest.approx(0.2674, abs=5e-5)

    def test_vanishes_at_half(self):
        assert c_H(0.5 + 1e-9) < 1e-4
        assert c_H(0.5 + 1e-6) < c_H(0.5 + 1e-3) < c_H(0.6)

    @pytest.mark.parametrize("H", [0.5, 0.3, 1.0, 1.2])
    def test_domain(self, H):
        with pytest.raises(DomainError):
            c_H(H)


class TestCovariance:
    @pytest.mark.parametrize("H", [0.2, 0.5, 0.7, 0.9])
    def test_trivial_values(self, H):
        assert covariance_RH(1, 1, H) == pytest.approx(1.0, abs=1e-15)
        assert covariance_RH(1, 0.5, H) == pytest.approx(0.5, abs=1e-15)

    def test_reference_value(self):
        with mp.workdps(30):
            ref = float((mp.mpf("0.8") ** mp.mpf("1.4") + mp.mpf("0.3") ** mp.mpf("1.4") - mp.mpf("0.5") ** mp.mpf("1.4")) / 2)
        assert covariance_RH(0.8, 0.3, 0.7) == pytest.approx(ref, rel=1e-14)
        assert covariance_RH(0.8, 0.3, 0.7) == pytest.approx(0.2691, abs=1e-4)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            covariance_RH(-0.1, 0.3, 0.7)


class TestFGN:
    def test_wiener_case_is_scaled_identity(self):
        g = GridSpec(50, 2.0)
        assert np.array_equal(fgn_covariance(g, 0.5), g.delta * np.eye(50))
        assert np.array_equal(fgn_cholesky_factor(g, 0.5), math.sqrt(g.delta) * np.eye(50))

    def test_lag_one_covariance(self):
        cov = fgn_covariance(GridSpec(10, 10.0), 0.7)
        assert cov[3, 4] == pytest.approx(0.5 * (2**1.4 - 2), rel=1e-12)
        assert cov[3, 4] == pytest.approx(0.3195, abs=5e-5)

    @pytest.mark.parametrize("H", [0.3, 0.5, 0.7, 0.9])
    def test_partial_sum_variance(self, H):
        g = GridSpec(40, 1.5)
        cov = fgn_covariance(g, H)
        for k in (1, 7, 40):
            assert cov[:k, :k].sum() == pytest.approx(g.times[k] ** (2 * H), rel=1e-11)

    def test_factor_reproduces_covariance(self):
        g = GridSpec(64)
        L = fgn_cholesky_factor(g, 0.7)
        assert np.allclose(L @ L.T, fgn_covariance(g, 0.7), atol=1e-15)
        assert np.array_equal(np.triu(L, 1), np.zeros_like(L))

    def test_sample_covariance(self):
        g = GridSpec(16)
        N = 40_000
        x = fgn_cholesky(g, 0.7, PathStreams(11).normals(DRIVER_FGN, np.arange(N), g.n))
        cov = fgn_covariance(g, 0.7)
        sd = np.sqrt((np.outer(cov.diagonal(), cov.diagonal()) + cov**2) / N)
        assert np.max(np.abs(x.T @ x / N - cov) / sd) < 4.5

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            fgn_cholesky(GridSpec(8), 0.7, np.zeros((3, 9)))


class TestKernel:
    def test_zero_on_and_above_diagonal(self):
        assert kernel_K(1.0, 1.0, 0.7) == 0.0
        assert kernel_K(1.0, 1.5, 0.7) == 0.0

    @pytest.mark.parametrize("t,s,H", [(1.0, 0.5, 0.7), (1.0, 0.01, 0.7), (2.0, 1.9, 0.6), (1.0, 0.3, 0.9)])
    def test_against_adaptive_oracle(self, t, s, H):
        assert kernel_K(t, s, H) == pytest.approx(K_oracle(t, s, H), rel=1e-10)

    @pytest.mark.parametrize("H", [0.6, 0.7, 0.9])
    def test_isometry_integral(self, H):
        t = 1.0
        val = quad(lambda s: kernel_K(t, s, H) ** 2, 0, t, limit=400, epsrel=1e-10)[0]
        assert val == pytest.approx(t ** (2 * H), rel=1e-6)

    def test_rejects_nonpositive_s(self):
        with pytest.raises(DomainError):
            kernel_K(1.0, 0.0, 0.7)

    def test_rejects_rough_hurst(self):
        with pytest.raises(DomainError):
            kernel_K(1.0, 0.5, 0.4)


class TestKernelTable:
    def test_triangular(self):
        w = KernelTable.build(GridSpec(30), 0.7).weights
        k, j = np.indices(w.shape)
        assert np.all(w[j >= k] == 0.0)
        assert np.all(w[j < k] > 0)
        assert np.all(np.isfinite(w))

    @pytest.mark.parametrize("H", [0.6, 0.7, 0.9])
    def test_isometry_every_row(self, H):
        g = GridSpec(200, 2.0)
        table = KernelTable.build(g, H)
        for k in (1, 10, 100, 200):
            assert table.isometry(k) == pytest.approx(g.times[k] ** (2 * H), rel=5e-3)

    def test_row_matches_table(self):
        g = GridSpec(25)
        assert np.array_equal(kernel_row(g, 0.7, 25), KernelTable.build(g, 0.7).weights[25])

    def test_levels_start_at_zero(self):
        table = KernelTable.build(GridSpec(10), 0.7)
        lv = table.levels(np.ones((2, 10)))
        assert np.all(lv[:, 0] == 0)


class TestCorrelatedDrivers:
    def test_uncorrelated_fast_path(self):
        d = correlated_drivers(GridSpec(50), 0.7, 0.0, PathStreams(1), np.arange(4000))
        assert np.array_equal(d.dW, d.dVtilde)
        corr = np.corrcoef(d.dW.ravel(), d.dV.ravel())[0, 1]
        assert abs(corr) < 4 / math.sqrt(d.dW.size)

    def test_full_correlation(self):
        d = correlated_drivers(GridSpec(20), 0.7, 1.0, PathStreams(1), np.arange(10))
        assert np.array_equal(d.dW, d.dV)

    def test_correlation_identity_bitwise(self):
        rho = -0.35
        d = correlated_drivers(GridSpec(20), 0.7, rho, PathStreams(1), np.arange(10))
        assert np.array_equal(d.dW, rho * d.dV + math.sqrt(1 - rho * rho) * d.dVtilde)

    def test_marginal_variance(self):
        g = GridSpec(25, 0.5)
        d = correlated_drivers(g, 0.7, 0.4, PathStreams(3), np.arange(4000))
        for arr in (d.dV, d.dVtilde, d.dW):
            assert arr.var() == pytest.approx(g.delta, rel=4 * math.sqrt(2 / arr.size))

    def test_cross_covariance_with_price_driver(self):
        H, rho, N = 0.7, 0.6, 40_000
        g = GridSpec(50)
        d = correlated_drivers(g, H, rho, PathStreams(9), np.arange(N))
        B = np.cumsum(d.dBH, axis=1)
        W = np.cumsum(d.dW, axis=1)
        for tk, sk in [(50, 50), (50, 20), (25, 40)]:
            t, s = g.times[tk], g.times[sk]
            exact = rho * quad(lambda u: kernel_K(t, u, H), 0, min(s, t), limit=200)[0]
            prod = B[:, tk - 1] * W[:, sk - 1]
            assert abs(prod.mean() - exact) < 4 * prod.std() / math.sqrt(N)

    def test_volterra_fbm_variance(self):
        g = GridSpec(40)
        d = correlated_drivers(g, 0.7, 0.5, PathStreams(4), np.arange(20_000))
        BT = d.dBH.sum(axis=1)
        assert BT.var() == pytest.approx(1.0, rel=4 * math.sqrt(2 / BT.size))

    def test_determinism(self):
        g = GridSpec(30)
        a = correlated_drivers(g, 0.7, 0.3, PathStreams(5), [3, 4])
        b = correlated_drivers(g, 0.7, 0.3, PathStreams(5), [3, 4])
        for f in ("dV", "dVtilde", "dW", "dBH"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_rho_out_of_range(self):
        with pytest.raises(DomainError):
            correlated_drivers(GridSpec(5), 0.7, 1.5, PathStreams(0), [0])

    def test_coarsen_sums_blocks(self):
        x = np.arange(12.0).reshape(2, 6)
        d = DriverIncrements(x, x, x, x).coarsen(3)
        assert np.array_equal(d.dBH, [[3, 12], [21, 30]])
        with pytest.raises(DomainError):
            DriverIncrements(x, x, x, x).coarsen(4)

    def test_coarsened_fgn_is_exact_fgn(self):
        fine = GridSpec(64)
        N = 40_000
        x = fgn_cholesky(fine, 0.7, PathStreams(8).normals(DRIVER_FGN, np.arange(N), 64))
        coarse = x.reshape(N, 8, 8).sum(axis=2)
        cov = fgn_covariance(GridSpec(8), 0.7)
        sd = np.sqrt((np.outer(cov.diagonal(), cov.diagonal()) + cov**2) / N)
        assert np.max(np.abs(coarse.T @ coarse / N - cov) / sd) < 4.5


@pytest.mark.parametrize("H", [0.5005, 0.6, 0.75, 0.95])
def test_cached_fit_matches_closed_form(H):
    from fheston.drivers import _fast_inner, _inner

    s = np.linspace(1e-4, 2.999, 5001)
    t = np.full_like(s, 3.0)
    assert np.allclose(_fast_inner(t, s, H), _inner(t, s, H), rtol=1e-10, atol=0)


@pytest.mark.parametrize("H", [0.55, 0.7, 0.9])
def test_first_cell_energy_against_adaptive_quadrature(H):
    from fheston.drivers import _cell_energy

    t, delta = 1.0, 0.05
    ref = quad(lambda s: kernel_K(t, s, H) ** 2, 0, delta, limit=400, epsabs=0, epsrel=1e-9)[0]
    assert _cell_energy(t, H, 20, delta)[0] == pytest.approx(ref, rel=1e-8)
