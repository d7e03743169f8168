import io
import math

import mpmath
import numpy as np
import pytest

from acperp import profile
from acperp.errors import BlowUp, FamilyMismatch, NoRealRoots, OutOfDomain
from acperp.profile import (
    COMPACT, PERIODIC, RAY, FamilyParams, accel_rhs, closed_form_lookup, first_integral_rhs,
    parity_check, pole_series, quartic_roots, solve,
)

TANH = FamilyParams.sphere(3, -2.0, 1)
TAN = FamilyParams.sphere(3, 2.0, 1)
SPHERE_MINUS = FamilyParams.sphere(3, 0.0, -1)
SPHERE_PLUS = FamilyParams.sphere(3, -2.5, 1)
PERIODIC_PARAMS = FamilyParams(n=3, tau=-2.0, A=3.0, C=-2.0)

# independent oracle: int_0^1 dx / sqrt(1 - x^4) at 30 digits
QUARTER_LEMNISCATE = float(mpmath.quad(lambda x: 1 / mpmath.sqrt(1 - x**4), [0, 1]))


def quadratic_roots_in_f2(params):
    # P(f) = c x^2 + A x + tau' with x = f^2
    c, A, tp = params.quartic, params.A, params.tau_reduced
    d = math.sqrt(A * A - 4 * c * tp)
    return sorted([(-A - d) / (2 * c), (-A + d) / (2 * c)])


class TestParams:
    def test_sphere_constructor(self):
        assert TANH == FamilyParams(3, 2.0, -2.0, 2.0)
        assert TANH.m == 4 and TANH.eps == 1 and SPHERE_MINUS.eps == -1

    @pytest.mark.parametrize("kw", [dict(n=1, tau=0.0, A=0.0, C=1.0), dict(n=3, tau=2.0, A=0.0, C=0.0)])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            FamilyParams(**kw)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            FamilyParams.sphere(3, 0.0, 2)


class TestRightHandSides:
    def test_first_integral_values(self):
        assert first_integral_rhs(TANH, 0.5) == pytest.approx(0.5625, abs=1e-15)
        assert first_integral_rhs(SPHERE_MINUS, 1.0) == pytest.approx(0.0, abs=1e-15)
        assert first_integral_rhs(PERIODIC_PARAMS, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_accel_values(self):
        f = math.tanh(1.0)
        assert accel_rhs(TANH, 0.0) == 0.0
        assert accel_rhs(TANH, f) == pytest.approx(-2 * f * (1 - f * f), abs=1e-15)
        assert accel_rhs(TANH, f) == pytest.approx(-0.639700, abs=1e-6)
        assert accel_rhs(PERIODIC_PARAMS, 1.0) == pytest.approx(1.0)


class TestQuarticRoots:
    def test_golden_roots(self):
        a, b = quartic_roots(PERIODIC_PARAMS)
        lo, hi = quadratic_roots_in_f2(PERIODIC_PARAMS)
        assert a == pytest.approx(math.sqrt(lo), abs=1e-14)
        assert b == pytest.approx(math.sqrt(hi), abs=1e-14)
        assert a * a == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-14)
        assert b == pytest.approx(1.6180340, abs=1e-7)

    def test_compact_plus_roots(self):
        a, b = quartic_roots(SPHERE_PLUS)
        assert a == pytest.approx(math.sqrt(0.5), abs=1e-14)
        assert b == pytest.approx(math.sqrt(2.0), abs=1e-14)

    def test_compact_minus_root(self):
        a, b = quartic_roots(SPHERE_MINUS)
        assert a == pytest.approx(1.0, abs=1e-14)

    def test_negative_discriminant(self):
        with pytest.raises(NoRealRoots):
            quartic_roots(FamilyParams(n=3, tau=-2.0, A=1.0, C=-2.0))


class TestPoleSeries:
    def test_matches_tanh_taylor(self):
        # tanh t = t - t^3/3 + 2 t^5/15 - 17 t^7/315 + ...
        a = pole_series(TANH, 9)
        expect = [0, 1, 0, -1 / 3, 0, 2 / 15, 0, -17 / 315, 0, 62 / 2835]
        assert np.allclose(a, expect, atol=1e-15)

    def test_quintic_coefficient_general(self):
        for A, C in [(-2.5, 2.0), (0.7, -2.0), (1.3, 4.0)]:
            p = FamilyParams(3, 2.0, A, C)
            c = p.quartic
            assert pole_series(p, 5)[5] == pytest.approx(A * A / 120 + c / 10, abs=1e-15)

    def test_matches_tan_taylor(self):
        a = pole_series(TAN, 7)
        assert np.allclose(a, [0, 1, 0, 1 / 3, 0, 2 / 15, 0, 17 / 315], atol=1e-15)


class TestClosedForms:
    def test_lookup(self):
        tanh = closed_form_lookup(TANH)
        assert tanh.kind == "ClosedFormTanh"
        f, fp, _ = tanh.eval(np.array([0.0, 20.0]))
        assert fp[0] == 1.0 and f[1] == pytest.approx(1.0)
        tan = closed_form_lookup(TAN)
        t = np.linspace(0.1, 1.4, 9)
        f, _, fpp = tan.eval(t)
        assert np.allclose(fpp, accel_rhs(TAN, f), rtol=1e-13)
        assert closed_form_lookup(SPHERE_MINUS) is None

    def test_eval_tanh_point(self):
        f, fp, fpp = profile.eval(closed_form_lookup(TANH), 1.0)
        th = math.tanh(1.0)
        assert (f, fp) == pytest.approx((0.7615942, 0.4199743), abs=1e-7)
        assert fpp == pytest.approx(-2 * th * (1 - th * th), abs=1e-15)
        assert fpp == pytest.approx(-0.6397000, abs=1e-7)


class TestSolve:
    def test_tanh_ray(self):
        prof = solve(TANH, RAY)
        t = np.linspace(0, 5, 1001)
        f, fp, fpp = prof.eval(t)
        assert np.max(np.abs(f - np.tanh(t))) < 1e-8
        assert np.max(np.abs(fp - 1 / np.cosh(t) ** 2)) < 1e-8

    def test_tan_blowup(self):
        with pytest.raises(BlowUp) as info:
            solve(TAN, RAY)
        assert info.value.t < math.pi / 2
        prof = info.value.profile
        t = np.linspace(1e-3, 1.4, 500)
        assert np.max(np.abs(prof.eval(t)[0] / np.tan(t) - 1)) < 1e-6

    def test_truncate_mode(self):
        prof = solve(TAN, RAY, on_blowup="truncate")
        assert prof.meta["blowup_t"] == pytest.approx(math.pi / 2, abs=1e-5)

    def test_compact_minus(self):
        prof = solve(SPHERE_MINUS, COMPACT)
        assert prof.t0 == pytest.approx(QUARTER_LEMNISCATE, abs=1e-9)
        f, fp, _ = prof.eval(prof.t0)
        assert f == pytest.approx(1.0, abs=1e-10) and abs(fp) < 1e-9
        f, fp, _ = prof.eval(2 * prof.t0)
        assert abs(f) < 1e-9 and fp == pytest.approx(-1.0, abs=1e-9)
        assert prof.meta["reflection_gap"] < 1e-7

    def test_compact_plus_max(self):
        prof = solve(SPHERE_PLUS, COMPACT)
        assert prof.meta["f_max"] == pytest.approx(math.sqrt(0.5), abs=1e-9)
        assert prof.t0 == pytest.approx(prof.meta["t0_quadrature"], abs=1e-9)

    def test_periodic(self):
        prof = solve(PERIODIC_PARAMS, PERIODIC)
        a, b = prof.roots
        t = np.linspace(0, 2 * prof.period, 801)
        f = prof.eval(t)[0]
        assert np.all(f >= a - 1e-9) and np.all(f <= b + 1e-9)
        assert np.max(f) == pytest.approx(b, abs=1e-8)
        assert prof.meta["period_event"] == pytest.approx(prof.period, abs=1e-8)
        assert np.max(np.abs(prof.eval(t + prof.period)[0] - f)) < 1e-6

    def test_period_against_elliptic_k(self):
        # int_0^{pi/2} dq / sqrt(a^2 cos^2 q + b^2 sin^2 q) = K(1 - a^2/b^2) / b
        a, b = quartic_roots(PERIODIC_PARAMS)
        c = abs(PERIODIC_PARAMS.quartic)
        oracle = 2 * mpmath.ellipk(1 - (a / b) ** 2) / (b * mpmath.sqrt(c))
        assert solve(PERIODIC_PARAMS, PERIODIC).period == pytest.approx(float(oracle), abs=1e-10)

    @pytest.mark.parametrize("params,family,exc", [
        (TANH, COMPACT, FamilyMismatch),
        (SPHERE_PLUS, RAY, FamilyMismatch),
        (SPHERE_MINUS, RAY, FamilyMismatch),
        (TANH, PERIODIC, FamilyMismatch),
        (FamilyParams(3, -2.0, 1.0, -2.0), PERIODIC, NoRealRoots),
        (FamilyParams(3, -2.0, 3.0, -2.0), COMPACT, FamilyMismatch),
    ])
    def test_family_errors(self, params, family, exc):
        with pytest.raises(exc):
            solve(params, family)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            solve(TANH, "torus")

    def test_out_of_domain(self, compact_minus):
        lo, hi = compact_minus.profile.domain
        with pytest.raises(OutOfDomain):
            profile.eval(compact_minus.profile, hi + 1)


class TestParity:
    def test_compact_minus_pole(self, compact_minus):
        est = parity_check(compact_minus.profile, 0.0, 2)
        assert all(abs(x) < 1e-5 for x in est)

    def test_tanh_pole(self, tanh_metric):
        assert abs(parity_check(tanh_metric.profile, 0.0, 1)[0]) < 1e-8

    def test_far_pole(self, compact_plus):
        prof = compact_plus.profile
        est = parity_check(prof, 2 * prof.t0, 2)
        assert all(abs(x) < 1e-5 for x in est)

    def test_detects_perturbation(self, compact_minus):
        est = parity_check(compact_minus.perturbed().profile, 0.0, 1)
        assert abs(est[0]) > 1e-2

    def test_interior_point_rejected(self, compact_minus):
        with pytest.raises(OutOfDomain):
            parity_check(compact_minus.profile, 0.5)


def test_csv_round_trip(compact_plus):
    buf = io.StringIO()
    profile.write_csv(compact_plus.profile, buf, num=11)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,f,fp,fpp" and len(lines) == 12
    t, f, fp, fpp = (float(x) for x in lines[5].split(","))
    assert (f, fp, fpp) == tuple(float(v) for v in compact_plus.profile.eval(t))


def test_metadata_fields(compact_plus):
    meta = compact_plus.profile.metadata()
    for key in ("t0", "period", "roots", "domain", "kind"):
        assert key in meta
