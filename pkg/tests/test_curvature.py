import math

import numpy as np
import pytest

from acperp.curvature import (
    TangentVector, WarpedMetric, conformal_to_warped, cumulative_gauss, dt_component,
    eigen_derivatives, eigen_table, inner, nabla_ricci, ricci_eigenvalues, scalar_and_shifted,
    shifted_derivatives,
)
from acperp.errors import PoleEvaluation
from acperp.profile import FamilyParams, closed_form_lookup

from conftest import FAMILY_NAMES, slice_curvature_oracle

TH1 = math.tanh(1.0)
SECH2_1 = 1.0 - TH1 * TH1


def tan_metric():
    params = FamilyParams.sphere(3, 2.0, 1)
    return WarpedMetric(params, closed_form_lookup(params))


def closed_tanh_metric():
    params = FamilyParams.sphere(3, -2.0, 1)
    return WarpedMetric(params, closed_form_lookup(params))


class TestEigenvalues:
    def test_tanh_point(self, tanh_metric):
        lam, mu = ricci_eigenvalues(tanh_metric, 1.0)
        assert lam == pytest.approx(6 - 4 * TH1**2, abs=1e-10)
        assert mu == pytest.approx(6 - 6 * TH1**2, abs=1e-10)
        # quoted to six decimals (truncated)
        assert (lam, mu) == pytest.approx((3.679897, 2.519845), abs=2e-6)

    @pytest.mark.parametrize("name", ["compact-eps+1-A-2.5", "compact-eps-1-A0", "tanh-ray"])
    def test_pole_limit(self, families, name):
        metric = families[name]
        lam, mu = ricci_eigenvalues(metric, 0.0)
        limit = -metric.n * metric.params.A
        assert lam == pytest.approx(limit, abs=1e-12) and mu == pytest.approx(limit, abs=1e-12)

    def test_far_pole_limit(self, compact_plus):
        lam, mu = ricci_eigenvalues(compact_plus, compact_plus.profile.domain[1])
        assert lam == pytest.approx(7.5, abs=1e-9) and mu == pytest.approx(7.5, abs=1e-9)

    def test_tanh_end(self, tanh_metric):
        lam, mu = ricci_eigenvalues(tanh_metric, 20.0)
        assert lam == pytest.approx(2.0, abs=1e-10) and mu == pytest.approx(0.0, abs=1e-10)

    def test_pole_continuity(self, compact_plus):
        # lambda - mu = C f^2, so the gap near a pole shrinks like h^2
        for h in (1e-2, 1e-3, 1e-4):
            lam, mu = ricci_eigenvalues(compact_plus, h)
            assert abs(lam - mu) < 4.0 * h * h

    @pytest.mark.parametrize("name", FAMILY_NAMES)
    def test_gap_law(self, families, name):
        metric = families[name]
        t = metric.profile.interior(301)
        lam, mu = ricci_eigenvalues(metric, t)
        f = metric.profile.eval(t)[0]
        assert np.max(np.abs(lam - mu - metric.params.C * f * f)) < 1e-7

    @pytest.mark.parametrize("name", FAMILY_NAMES)
    def test_finite_difference_oracle(self, families, name):
        metric = families[name]
        rng = np.random.default_rng(7)
        t = metric.profile.sample_interior(rng, 20)
        lam, mu = ricci_eigenvalues(metric, t)
        lam_fd, mu_fd = slice_curvature_oracle(metric, t)
        assert np.max(np.abs(lam - lam_fd)) < 1e-5
        assert np.max(np.abs(mu - mu_fd)) < 1e-5

    def test_derivatives_against_difference_quotient(self, compact_minus):
        t, h = 0.9, 1e-5
        dlam, dmu = eigen_derivatives(compact_minus, t)
        lp, mp = ricci_eigenvalues(compact_minus, t + h)
        lm, mm = ricci_eigenvalues(compact_minus, t - h)
        assert dlam == pytest.approx((lp - lm) / (2 * h), abs=1e-6)
        assert dmu == pytest.approx((mp - mm) / (2 * h), abs=1e-6)

    def test_perturbed_pole_rejected(self, compact_plus):
        with pytest.raises(PoleEvaluation):
            ricci_eigenvalues(compact_plus.perturbed(), 0.0)


class TestShifted:
    def test_tanh_mu_S(self, tanh_metric):
        e = scalar_and_shifted(tanh_metric, tanh_metric.profile.interior(101))
        assert np.max(np.abs(e.mu_S + 2.0)) < 1e-9

    def test_tanh_alpha(self, tanh_metric):
        e = scalar_and_shifted(tanh_metric, 1.0)
        assert e.alpha == pytest.approx(2 * math.sqrt(2) * SECH2_1, abs=1e-10)
        assert e.alpha == pytest.approx(1.1878667, abs=2e-7)

    def test_alpha_vanishes_at_equator(self, compact_minus):
        assert abs(scalar_and_shifted(compact_minus, compact_minus.profile.t0).alpha) < 1e-9

    @pytest.mark.parametrize("name", FAMILY_NAMES)
    def test_conformal_field_law(self, families, name):
        # d xi_r / dt = alpha / 2
        metric = families[name]
        t, h = metric.profile.interior(25, trim=0.1), 1e-5
        e = scalar_and_shifted(metric, t)
        dxi = (scalar_and_shifted(metric, t + h).xi_r - scalar_and_shifted(metric, t - h).xi_r) / (2 * h)
        assert np.max(np.abs(dxi - e.alpha / 2)) < 1e-8

    def test_shifted_mu_derivative_zero(self, compact_plus):
        t = compact_plus.profile.interior(51)
        assert np.max(np.abs(shifted_derivatives(compact_plus, t)[1])) < 1e-8

    def test_eigen_table_columns(self, compact_plus):
        cols = eigen_table(compact_plus, np.array([0.5, 1.0]))
        assert list(cols) == ["t", "lambda", "mu", "scal", "lambda_S", "mu_S", "alpha"]


class TestTangentAlgebra:
    def test_inner_products(self):
        metric = tan_metric()
        t = math.atan(2.0)
        assert inner(metric, t, TangentVector.radial(), TangentVector.radial()) == 1.0
        e1 = TangentVector.fiber(1, 0, 0)
        assert inner(metric, t, e1, e1) == pytest.approx(4.0, abs=1e-14)
        X, Y = TangentVector(1.0, (1, 0, 0)), TangentVector(-4.0, (1, 0, 0))
        assert inner(metric, t, X, Y) == pytest.approx(0.0, abs=1e-13)
        assert dt_component(X) == 1.0

    def test_nabla_ricci_radial(self, tanh_metric):
        r = TangentVector.radial()
        val = nabla_ricci(tanh_metric, 1.0, r, r, r)
        assert val == pytest.approx(-12 * TH1 * SECH2_1, abs=1e-10)
        assert val == pytest.approx(-3.838200, abs=1e-6)

    def test_nabla_ricci_zero_direction(self, compact_plus):
        zero = TangentVector(0.0, (0.0, 0.0, 0.0))
        Y, Z = TangentVector(0.3, (1, -2, 0.5)), TangentVector(-1.0, (0.2, 0.1, 0.0))
        assert nabla_ricci(compact_plus, 0.8, zero, Y, Z) == 0.0

    def test_nabla_ricci_symmetric_in_last_pair(self, compact_minus):
        rng = np.random.default_rng(3)
        X, Y, Z = (TangentVector.random(rng) for _ in range(3))
        a = nabla_ricci(compact_minus, 0.7, X, Y, Z)
        b = nabla_ricci(compact_minus, 0.7, X, Z, Y)
        assert a == pytest.approx(b, abs=1e-13)

    def test_inner_at_pole_rejected(self, compact_plus):
        with pytest.raises(PoleEvaluation):
            inner(compact_plus, 0.0, TangentVector.radial(), TangentVector.radial())


class TestConformal:
    def test_identity(self, compact_plus):
        t = compact_plus.profile.interior(41)
        warp = conformal_to_warped(compact_plus, lambda s: (0 * s, 0 * s, 0 * s), t)
        assert np.allclose(warp.sigma, t - t[0], atol=1e-14)
        assert np.allclose(warp.F, compact_plus.profile.eval(t)[0], atol=0)

    def test_cosh_factor_flattens_tanh(self):
        # e^u = cosh t turns tanh t into sinh t with sigma = sinh t, a flat cone-free metric
        metric = closed_tanh_metric()
        t = np.linspace(0.0, 3.0, 61)

        def u(s):
            return np.log(np.cosh(s)), np.tanh(s), 1.0 / np.cosh(s) ** 2

        warp = conformal_to_warped(metric, u, t)
        assert np.allclose(warp.F, np.sinh(t), atol=1e-13)
        assert np.allclose(warp.sigma, np.sinh(t), atol=1e-12)
        keep = warp.F > 1e-3
        with np.errstate(divide="ignore", invalid="ignore"):
            lam, mu = warp.eigenvalues(metric.params)
        assert np.max(np.abs((lam - mu)[keep])) < 1e-7

    def test_inverse_cosh_factor(self):
        metric = closed_tanh_metric()
        t = np.linspace(0.05, 3.0, 61)

        def u(s):
            return -np.log(np.cosh(s)), -np.tanh(s), -1.0 / np.cosh(s) ** 2

        warp = conformal_to_warped(metric, u, t)
        assert np.allclose(warp.F, np.tanh(t) / np.cosh(t), atol=1e-14)
        lam, mu = warp.eigenvalues(metric.params)
        assert np.max(np.abs(lam - mu)) < 1e-7


def test_cumulative_gauss_polynomial():
    knots = np.linspace(0.0, 2.0, 7)
    out = cumulative_gauss(lambda s: 5 * s**4, knots)
    assert np.allclose(out, knots**5, atol=1e-12)
