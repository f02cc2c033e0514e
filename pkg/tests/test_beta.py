"""Beta math: special functions, density, gradients, estimators, curves."""

import numpy as np
import pytest
import scipy.integrate
import scipy.special
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from toxprop import beta
from toxprop.errors import DegenerateInput, DomainError, ShapeError

SHAPE_GRID = [0.5, 1.0, 2.0, 5.0, 50.0]


class TestSpecialFunctions:
    def test_log_gamma_known_values(self):
        # Gamma(1) = Gamma(2) = 1, Gamma(0.5) = sqrt(pi)
        assert beta.log_gamma(1.0) == pytest.approx(0.0, abs=1e-12)
        assert beta.log_gamma(2.0) == pytest.approx(0.0, abs=1e-12)
        assert beta.log_gamma(0.5) == pytest.approx(0.5 * np.log(np.pi), rel=1e-12)
        assert beta.log_gamma(5.0) == pytest.approx(np.log(24.0), rel=1e-12)

    def test_digamma_known_values(self):
        # psi(1) = -Euler-Mascheroni, psi(0.5) = -gamma - 2 ln 2
        assert beta.digamma(1.0) == pytest.approx(-0.5772156649015329, rel=1e-12)
        assert beta.digamma(0.5) == pytest.approx(
            -0.5772156649015329 - 2.0 * np.log(2.0), rel=1e-12
        )

    def test_log_gamma_matches_scipy(self):
        x = np.concatenate(
            [
                np.geomspace(1e-3, 1e6, 400),
                np.linspace(0.01, 12.0, 300),
            ]
        )
        ours = beta.log_gamma(x)
        ref = scipy.special.gammaln(x)
        # lnGamma crosses zero at x = 1 and 2, hence the absolute guard.
        np.testing.assert_allclose(ours, ref, rtol=1e-10, atol=1e-12)

    def test_digamma_matches_scipy(self):
        x = np.concatenate(
            [
                np.geomspace(1e-3, 1e6, 400),
                np.linspace(0.01, 12.0, 300),
            ]
        )
        ours = beta.digamma(x)
        ref = scipy.special.psi(x)
        np.testing.assert_allclose(ours, ref, rtol=1e-10, atol=1e-12)

    @given(st.floats(min_value=1e-3, max_value=1e5))
    @settings(max_examples=200, deadline=None)
    def test_log_gamma_recurrence(self, x):
        # lnGamma(x+1) = lnGamma(x) + ln x
        lhs = beta.log_gamma(x + 1.0)
        rhs = beta.log_gamma(x) + np.log(x)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    @given(st.floats(min_value=1e-3, max_value=1e5))
    @settings(max_examples=200, deadline=None)
    def test_digamma_recurrence(self, x):
        # psi(x+1) = psi(x) + 1/x
        lhs = beta.digamma(x + 1.0)
        rhs = beta.digamma(x) + 1.0 / x
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_digamma_is_derivative_of_log_gamma(self):
        for x in [0.3, 1.0, 2.5, 7.0, 40.0]:
            h = 1e-6 * max(1.0, x)
            fd = (beta.log_gamma(x + h) - beta.log_gamma(x - h)) / (2.0 * h)
            assert beta.digamma(x) == pytest.approx(fd, rel=1e-7)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            beta.log_gamma(0.0)
        with pytest.raises(DomainError):
            beta.log_gamma(-1.0)
        with pytest.raises(DomainError):
            beta.digamma(np.array([1.0, -2.0]))
        with pytest.raises(DomainError):
            beta.digamma(np.nan)


class TestLogPdf:
    def test_frozen_value(self):
        # Beta(2,2) at 0.5 has density 1.5
        assert beta.log_pdf(0.5, 2.0, 2.0) == pytest.approx(np.log(1.5), rel=1e-12)

    def test_matches_scipy_over_grid(self):
        ys = np.array([0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99])
        for a in SHAPE_GRID:
            for b in SHAPE_GRID:
                ours = beta.log_pdf(ys, a, b)
                ref = scipy.stats.beta.logpdf(ys, a, b)
                np.testing.assert_allclose(ours, ref, rtol=1e-9, atol=1e-12)

    def test_boundary_labels_finite(self):
        for a in SHAPE_GRID:
            for b in SHAPE_GRID:
                assert np.isfinite(beta.log_pdf(0.0, a, b))
                assert np.isfinite(beta.log_pdf(1.0, a, b))

    def test_out_of_range_label_evaluates_at_clamp(self):
        near_one = beta.log_pdf(1.0 - beta.EPS, 2.0, 5.0)
        assert beta.log_pdf(1.0 + 1e-3, 2.0, 5.0) == pytest.approx(near_one, rel=1e-12)
        near_zero = beta.log_pdf(beta.EPS, 2.0, 5.0)
        assert beta.log_pdf(-0.5, 2.0, 5.0) == pytest.approx(near_zero, rel=1e-12)

    def test_clamped_density_integrates_to_one(self):
        # The clamp moves negligible mass: quadrature over [0,1] of the
        # clamped density stays within 1e-3 of 1 across the shape grid.
        for a in SHAPE_GRID:
            for b in SHAPE_GRID:
                total, _ = scipy.integrate.quad(
                    lambda y: float(np.exp(beta.log_pdf(y, a, b))),
                    0.0,
                    1.0,
                    limit=200,
                    points=[beta.EPS, 1.0 - beta.EPS],
                )
                assert abs(total - 1.0) <= 1e-3, (a, b, total)

    def test_invalid_shapes_raise(self):
        with pytest.raises(DomainError):
            beta.log_pdf(0.5, 0.0, 1.0)
        with pytest.raises(DomainError):
            beta.log_pdf(0.5, 1.0, -3.0)
        with pytest.raises(DomainError):
            beta.BetaParams(np.inf, 1.0)
        with pytest.raises(DomainError):
            beta.BetaParams(1.0, np.nan)


class TestNll:
    def test_mean_of_pointwise_neglog(self):
        y = np.array([0.2, 0.5, 0.8])
        a = np.array([2.0, 3.0, 1.5])
        b = np.array([4.0, 3.0, 1.5])
        expected = float(np.mean(-scipy.stats.beta.logpdf(y, a, b)))
        assert beta.nll(y, a, b) == pytest.approx(expected, rel=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            beta.nll([0.5, 0.5], [2.0], [2.0])

    def test_empty_batch(self):
        with pytest.raises(DegenerateInput):
            beta.nll([], [], [])


class TestGradLogParams:
    def test_frozen_value(self):
        # y=0.5, alpha=beta=1: both partials equal -1 + ln 2
        da, db = beta.grad_nll_logparams(0.5, 1.0, 1.0)
        assert da == pytest.approx(-1.0 + np.log(2.0), rel=1e-12)
        assert db == pytest.approx(-1.0 + np.log(2.0), rel=1e-12)

    @pytest.mark.parametrize("a", SHAPE_GRID)
    @pytest.mark.parametrize("b", SHAPE_GRID)
    def test_matches_finite_differences(self, a, b):
        y = 0.37
        da, db = beta.grad_nll_logparams(y, a, b)
        h = 1e-6

        def f(log_a, log_b):
            return -beta.log_pdf(y, np.exp(log_a), np.exp(log_b))

        la, lb = np.log(a), np.log(b)
        fd_a = (f(la + h, lb) - f(la - h, lb)) / (2.0 * h)
        fd_b = (f(la, lb + h) - f(la, lb - h)) / (2.0 * h)
        assert da == pytest.approx(fd_a, rel=1e-5, abs=1e-8)
        assert db == pytest.approx(fd_b, rel=1e-5, abs=1e-8)

    @given(
        st.floats(min_value=0.05, max_value=0.95),
        st.floats(min_value=0.2, max_value=40.0),
        st.floats(min_value=0.2, max_value=40.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_gradients_finite_everywhere(self, y, a, b):
        da, db = beta.grad_nll_logparams(y, a, b)
        assert np.isfinite(da) and np.isfinite(db)


class TestEstimators:
    def test_mean(self):
        assert beta.mean_estimate(beta.BetaParams(2.0, 6.0)) == pytest.approx(0.25)

    def test_mode_interior(self):
        est, fell_back = beta.mode_estimate(beta.BetaParams(3.0, 5.0))
        assert est == pytest.approx(2.0 / 6.0)
        assert not fell_back

    @pytest.mark.parametrize("a,b", [(1.0, 3.0), (0.5, 2.0), (2.0, 1.0), (0.7, 0.7)])
    def test_mode_fallback_to_mean(self, a, b):
        est, fell_back = beta.mode_estimate(beta.BetaParams(a, b))
        assert fell_back
        assert est == pytest.approx(a / (a + b))

    @given(
        st.floats(min_value=1.001, max_value=100.0),
        st.floats(min_value=1.001, max_value=100.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_mode_is_argmax_of_density(self, a, b):
        est, fell_back = beta.mode_estimate(beta.BetaParams(a, b))
        assert not fell_back
        grid = np.linspace(0.001, 0.999, 999)
        dense = beta.log_pdf(grid, a, b)
        assert beta.log_pdf(est, a, b) >= dense.max() - 1e-9


class TestPdfCurve:
    def test_grid_and_endpoints(self):
        curve = beta.pdf_curve(beta.BetaParams(2.0, 2.0), n_points=5)
        assert curve.y.shape == (5,)
        assert curve.y[0] == pytest.approx(beta.EPS)
        assert curve.y[-1] == pytest.approx(1.0 - beta.EPS)
        assert np.all(np.diff(curve.y) > 0)
        np.testing.assert_allclose(
            curve.density, scipy.stats.beta.pdf(curve.y, 2.0, 2.0), rtol=1e-9, atol=1e-12
        )

    def test_too_few_points(self):
        with pytest.raises(DegenerateInput):
            beta.pdf_curve(beta.BetaParams(2.0, 2.0), n_points=1)

    def test_points_helper(self):
        curve = beta.pdf_curve(beta.BetaParams(2.0, 3.0), n_points=3)
        pts = curve.points()
        assert len(pts) == 3
        assert all(isinstance(p, tuple) and len(p) == 2 for p in pts)


class TestSampling:
    def test_seeded_and_reproducible(self):
        p = beta.BetaParams(2.0, 5.0)
        a = beta.sample(p, np.random.default_rng(123), size=1000)
        b = beta.sample(p, np.random.default_rng(123), size=1000)
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        p = beta.BetaParams(2.0, 5.0)
        draws = beta.sample(p, np.random.default_rng(7), size=200_000)
        mean = 2.0 / 7.0
        var = (2.0 * 5.0) / (7.0**2 * 8.0)
        se = np.sqrt(var / draws.size)
        assert abs(draws.mean() - mean) < 4.0 * se
        assert np.all((draws > 0.0) & (draws < 1.0))
