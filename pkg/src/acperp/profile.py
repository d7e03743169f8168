"""Warp profiles f(t) for the metrics g = dt^2 + f(t)^2 g_fiber.

Every family solves the second order equation

    f'' = A f + 2 c f^3,        c = C / (n - 1),

whose first integral is (f')^2 = P(f) = tau' + A f^2 + c f^4 with
tau' = tau / (n - 1).  Sphere families start at a pole f(0) = 0, f'(0) = 1;
periodic families oscillate between the two positive roots of P.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import BlowUp, FamilyMismatch, NoRealRoots, OutOfDomain

COMPACT = "compact"
RAY = "ray"
PERIODIC = "periodic"
FAMILIES = (COMPACT, RAY, PERIODIC)

_ROOT_TOL = 1e-12


@dataclass(frozen=True)
class FamilyParams:
    """Fiber dimension ``n``, fiber Einstein constant ``tau``, constants ``A`` and ``C``."""

    n: int
    tau: float
    A: float
    C: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"fiber dimension must be an integer >= 2, got {self.n}")
        if self.C == 0:
            raise ValueError("C must be nonzero")

    @classmethod
    def sphere(cls, n: int, A: float, eps: int) -> "FamilyParams":
        """Round unit-sphere fiber (tau = n - 1) with C = eps (n - 1)."""
        if eps not in (-1, 1):
            raise ValueError(f"eps must be +1 or -1, got {eps}")
        return cls(n=n, tau=float(n - 1), A=float(A), C=float(eps * (n - 1)))

    @property
    def m(self) -> int:
        return self.n + 1

    @property
    def quartic(self) -> float:
        """Coefficient c = C/(n-1) of f^4 in the first integral."""
        return self.C / (self.n - 1)

    @property
    def tau_reduced(self) -> float:
        return self.tau / (self.n - 1)

    @property
    def eps(self) -> Optional[int]:
        c = self.quartic
        if abs(abs(c) - 1.0) < _ROOT_TOL:
            return 1 if c > 0 else -1
        return None

    def to_dict(self) -> dict:
        return {"n": self.n, "tau": self.tau, "A": self.A, "C": self.C}


@dataclass(frozen=True)
class StepControl:
    """Integrator settings.

    ``h_start`` is the offset from a pole where the Taylor seed hands over to
    the integrator, ``ceiling`` the blow-up threshold for rays and ``t_max``
    the integration horizon for rays.
    """

    rtol: float = 1e-12
    atol: float = 1e-14
    h_start: float = 1e-4
    ceiling: float = 1e6
    t_max: float = 20.0
    method: str = "DOP853"


def first_integral_rhs(params: FamilyParams, f_val):
    """P(f) = tau/(n-1) + A f^2 + C/(n-1) f^4."""
    f2 = np.square(f_val)
    return params.tau_reduced + params.A * f2 + params.quartic * f2 * f2


def accel_rhs(params: FamilyParams, f_val):
    """f'' = A f + 2C/(n-1) f^3, i.e. P'(f)/2."""
    return params.A * f_val + 2.0 * params.quartic * f_val**3


def _jerk(params, f_val, fp):
    return (params.A + 6.0 * params.quartic * np.square(f_val)) * fp


def quartic_roots(params: FamilyParams):
    """Oscillation bounds ``(a, b)`` of the quartic first integral.

    For a periodic family (tau < 0, C < 0, A > 0) these are the two positive
    roots with P > 0 between them.  For a pole family (tau = n - 1) ``a`` is
    the maximum of f and ``b`` the companion root, so that
    P = c (a^2 - f^2)(b^2 - f^2) when c > 0 and P = |c| (a^2 - f^2)(b^2 + f^2)
    when c < 0.  With c = +-1 this gives b = 1/a.
    """
    c, A, tp = params.quartic, params.A, params.tau_reduced
    disc = A * A - 4.0 * c * tp
    if disc < -_ROOT_TOL:
        raise NoRealRoots(f"discriminant A^2 - 4 c tau' = {disc:.6g} < 0")
    disc = max(disc, 0.0)
    x1 = (-A + math.sqrt(disc)) / (2.0 * c)
    x2 = (-A - math.sqrt(disc)) / (2.0 * c)
    lo, hi = min(x1, x2), max(x1, x2)
    if c < 0 and tp < 0:
        if A <= 0 or lo <= 0:
            raise NoRealRoots("periodic family needs A > 0 and two positive roots in f^2")
        return math.sqrt(lo), math.sqrt(hi)
    if tp > 0 and c > 0:
        if A >= 0 or lo <= 0:
            raise NoRealRoots("no positive root of P reachable from f = 0")
        return math.sqrt(lo), math.sqrt(hi)
    if tp > 0 and c < 0:
        # one root of each sign in f^2
        return math.sqrt(hi), math.sqrt(-lo)
    raise NoRealRoots(f"no admissible root structure for {params}")


def pole_series(params: FamilyParams, order: int = 9) -> np.ndarray:
    """Taylor coefficients of the solution with f(0) = 0, f'(0) = sqrt(tau').

    Comparing coefficients in f'' = A f + 2c f^3 gives
    (k+2)(k+1) a_{k+2} = A a_k + 2c [t^k] f^3; the even coefficients vanish.
    """
    tp = params.tau_reduced
    if tp <= 0:
        raise FamilyMismatch("a pole start needs tau > 0")
    a = np.zeros(order + 1)
    if order >= 1:
        a[1] = math.sqrt(tp)
    for k in range(order - 1):
        cube = np.convolve(np.convolve(a[: k + 1], a[: k + 1]), a[: k + 1])[k]
        a[k + 2] = (params.A * a[k] + 2.0 * params.quartic * cube) / ((k + 2) * (k + 1))
    return a


def _series_state(coeffs, s):
    poly = np.polynomial.Polynomial(coeffs)
    return poly(s), poly.deriv()(s)


def period_quadrature(params: FamilyParams, a: float, b: float) -> float:
    """Period 2 int_a^b df / sqrt(P(f)) of the oscillation between the roots.

    The substitution f^2 = a^2 cos^2 q + b^2 sin^2 q turns the integrand into
    1 / (sqrt|c| f), which is smooth at both roots.
    """
    c = abs(params.quartic)
    val, _ = quad(
        lambda q: 1.0 / math.sqrt(a * a * math.cos(q) ** 2 + b * b * math.sin(q) ** 2),
        0.0, 0.5 * math.pi, epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return 2.0 * val / math.sqrt(c)


def turning_time_quadrature(params: FamilyParams) -> float:
    """Time from the pole to the maximum, via f = a sin q."""
    a, b = quartic_roots(params)
    c = params.quartic
    sgn = 1.0 if c > 0 else -1.0

    def integrand(q):
        return 1.0 / math.sqrt(b * b - sgn * a * a * math.sin(q) ** 2)

    val, _ = quad(integrand, 0.0, 0.5 * math.pi, epsabs=0.0, epsrel=1e-13, limit=200)
    return val / math.sqrt(abs(c))


class Profile:
    """A warp function on ``domain`` with evaluators for f and its derivatives.

    Subclasses provide :meth:`jet`.  ``poles`` lists the domain ends where
    f vanishes.  ``ode_backed`` is true when f solves the family equation, so
    curvature code may substitute the first integral near poles.
    """

    kind: str = ""
    ode_backed: bool = True
    periodic: bool = False

    def __init__(self, params, domain, *, t0=None, period=None, roots=None,
                 poles=(), meta=None):
        self.params = params
        self.domain = (float(domain[0]), float(domain[1]))
        self.t0 = t0
        self.period = period
        self.roots = roots
        self.poles = tuple(poles)
        self.meta = dict(meta or {})

    def __repr__(self):
        lo, hi = self.domain
        return f"<{type(self).__name__} {self.kind} on [{lo:.6g}, {hi:.6g}]>"

    def jet(self, t):
        """Return ``(f, f', f'', f''')`` at ``t`` (scalar or array)."""
        raise NotImplementedError

    def eval(self, t):
        f, fp, fpp, _ = self.jet(t)
        return f, fp, fpp

    def contains(self, t) -> bool:
        if self.periodic:
            return bool(np.all(np.isfinite(t)))
        lo, hi = self.domain
        slack = 1e-12 * max(1.0, abs(hi - lo))
        t = np.asarray(t)
        return bool(np.all((t >= lo - slack) & (t <= hi + slack)))

    def _check(self, t):
        if not self.contains(t):
            lo, hi = self.domain
            raise OutOfDomain(f"t outside [{lo:.12g}, {hi:.12g}]")

    def grid(self, num: int = 201) -> np.ndarray:
        lo, hi = self.domain
        return np.linspace(lo, hi, num)

    def interior(self, num: int = 201, trim: float = 0.02) -> np.ndarray:
        """Uniform grid with ``trim`` of the span removed at each end."""
        lo, hi = self.domain
        span = hi - lo
        return np.linspace(lo + trim * span, hi - trim * span, num)

    def sample_interior(self, rng, size, trim: float = 0.02) -> np.ndarray:
        lo, hi = self.domain
        span = hi - lo
        return rng.uniform(lo + trim * span, hi - trim * span, size)

    def metadata(self) -> dict:
        out = {
            "kind": self.kind,
            "domain": list(self.domain),
            "t0": self.t0,
            "period": self.period,
            "roots": list(self.roots) if self.roots is not None else None,
        }
        out.update(self.meta)
        return out


class ClosedFormProfile(Profile):
    """tanh or tan, the two closed-form members of the C = n - 1 sphere family."""

    def __init__(self, params, name, t_max):
        if name == "tanh":
            self.kind = "ClosedFormTanh"
            super().__init__(params, (0.0, t_max), roots=(1.0, 1.0), poles=(0.0,))
        elif name == "tan":
            self.kind = "ClosedFormTan"
            super().__init__(params, (0.0, min(t_max, 0.5 * math.pi)), poles=(0.0,))
        else:
            raise ValueError(name)
        self.name = name

    def jet(self, t):
        self._check(t)
        t = np.asarray(t, dtype=float)
        if self.name == "tanh":
            f = np.tanh(t)
            fp = 1.0 - f * f
            fpp = -2.0 * f * fp
            fppp = (-2.0 + 6.0 * f * f) * fp
        else:
            f = np.tan(t)
            fp = 1.0 + f * f
            fpp = 2.0 * f * fp
            fppp = (2.0 + 6.0 * f * f) * fp
        return f, fp, fpp, fppp


def closed_form_lookup(params: FamilyParams, t_max: float = 20.0) -> Optional[ClosedFormProfile]:
    """tanh for (eps=+1, A=-2), tan for (eps=+1, A=2), on a unit-sphere fiber."""
    if params.eps != 1 or abs(params.tau - (params.n - 1)) > _ROOT_TOL:
        return None
    if abs(params.A + 2.0) < _ROOT_TOL:
        return ClosedFormProfile(params, "tanh", t_max)
    if abs(params.A - 2.0) < _ROOT_TOL:
        return ClosedFormProfile(params, "tan", t_max)
    return None


class NumericProfile(Profile):
    """Profile backed by dense integrator output.

    ``state`` maps t (already domain-checked) to ``(f, f')``; the second and
    third derivatives come from the family equation.
    """

    def __init__(self, params, kind, domain, state: Callable, **kw):
        self.kind = kind
        self.periodic = kind == "PeriodicNumeric"
        super().__init__(params, domain, **kw)
        self._state = state

    def jet(self, t):
        self._check(t)
        t = np.asarray(t, dtype=float)
        f, fp = self._state(t)
        return f, fp, accel_rhs(self.params, f), _jerk(self.params, f, fp)


class PerturbedProfile(Profile):
    """f (1 + delta sin(k t)): a non-solution used to test that checks can fail."""

    ode_backed = False

    def __init__(self, base: Profile, delta: float = 0.01, wavenumber: float = 3.0):
        self.kind = f"Perturbed({base.kind})"
        self.periodic = base.periodic
        super().__init__(base.params, base.domain, t0=base.t0, period=base.period,
                         roots=base.roots, poles=base.poles,
                         meta={"perturbation": delta})
        self.base = base
        self.delta = delta
        self.k = wavenumber

    def jet(self, t):
        f, fp, fpp, fppp = self.base.jet(t)
        t = np.asarray(t, dtype=float)
        d, k = self.delta, self.k
        s, co = np.sin(k * t), np.cos(k * t)
        g, g1, g2, g3 = 1 + d * s, d * k * co, -d * k * k * s, -d * k**3 * co
        return (
            f * g,
            fp * g + f * g1,
            fpp * g + 2 * fp * g1 + f * g2,
            fppp * g + 3 * fpp * g1 + 3 * fp * g2 + f * g3,
        )


def _second_order_rhs(params):
    def rhs(t, y):
        return [y[1], accel_rhs(params, y[0])]
    return rhs


def _require_pole_family(params):
    if abs(params.tau_reduced - 1.0) > _ROOT_TOL:
        raise FamilyMismatch("pole families need a unit-sphere fiber, tau = n - 1")


def _solve_compact(params, step):
    _require_pole_family(params)
    c, A = params.quartic, params.A
    if c > 0 and A > -2.0 * math.sqrt(c) - _ROOT_TOL:
        raise FamilyMismatch("C > 0 closes up only for A < -2 sqrt(C/(n-1))")
    a, b = quartic_roots(params)
    h = step.h_start
    coeffs = pole_series(params, 11)
    f_h, fp_h = _series_state(coeffs, h)
    t_guess = turning_time_quadrature(params)

    def turn(t, y):
        return y[1]
    turn.terminal = True
    turn.direction = -1

    rhs = _second_order_rhs(params)
    opts = dict(method=step.method, rtol=step.rtol, atol=step.atol, dense_output=True)
    sol = solve_ivp(rhs, (h, 2.0 * t_guess + 1.0), [f_h, fp_h], events=turn, **opts)
    if not sol.success or len(sol.t_events[0]) == 0:
        raise FamilyMismatch("no turning point f' = 0 found")
    t0 = float(sol.t_events[0][0])
    dense = sol.sol

    def scalar_state(t):
        # same branches as ``state``; geodesic integration calls this per step
        sgn = 1.0
        if t > t0:
            t, sgn = 2.0 * t0 - t, -1.0
        if t < h:
            f, fp = _series_state(coeffs, t)
            return np.float64(f), np.float64(sgn * fp)
        f, fp = dense(min(t, t0))
        if f < 0.5 * a:
            fp = math.sqrt(max(float(first_integral_rhs(params, f)), 0.0))
        return f, sgn * fp

    def state(t):
        if t.ndim == 0:
            return scalar_state(float(t))
        refl = t > t0
        s = np.where(refl, 2.0 * t0 - t, t)
        sgn = np.where(refl, -1.0, 1.0)
        y = dense(np.clip(s, h, t0))
        fs, fps = _series_state(coeffs, s)
        near = s < h
        f = np.where(near, fs, y[0])
        # project onto the first integral where P is well conditioned; curvature
        # near the poles divides f'^2 - P(f) by f^4
        projected = np.sqrt(np.maximum(first_integral_rhs(params, f), 0.0))
        fp = np.where(near, fps, np.where(f < 0.5 * a, projected, y[1])) * sgn
        return f, fp

    # continued integration through the turning point as an independent check
    through = solve_ivp(rhs, (h, 2.0 * t0 - h), [f_h, fp_h], **opts)
    probe = np.linspace(t0, 2.0 * t0 - 0.05 * t0, 64)
    gap = float(np.max(np.abs(through.sol(probe)[0] - state(probe)[0])))

    return NumericProfile(
        params, "CompactNumeric", (0.0, 2.0 * t0), state,
        t0=t0, roots=(a, b), poles=(0.0, 2.0 * t0),
        meta={"reflection_gap": gap, "f_max": float(dense(t0)[0]),
              "t0_quadrature": t_guess, "h_start": h},
    )


def _solve_ray(params, step, on_blowup):
    _require_pole_family(params)
    c, A, tp = params.quartic, params.A, params.tau_reduced
    edge = -2.0 * math.sqrt(c * tp) if c > 0 else math.inf
    if c <= 0 or A < edge - _ROOT_TOL:
        raise FamilyMismatch("rays need C > 0 and A >= -2 sqrt(C/(n-1))")
    boundary = abs(A - edge) < _ROOT_TOL
    if boundary:
        # P = (sqrt(tau') - sqrt(c) f^2)^2; the signed root keeps f below the
        # double root instead of letting rounding push it across.
        sq_c, sq_t = math.sqrt(c), math.sqrt(tp)

        def slope(f):
            return sq_t - sq_c * np.square(f)
    else:
        def slope(f):
            return np.sqrt(np.maximum(first_integral_rhs(params, f), 0.0))

    def rhs(t, y):
        return [slope(y[0])]

    def escape(t, y):
        return y[0] - step.ceiling
    escape.terminal = True
    escape.direction = 1

    sol = solve_ivp(rhs, (0.0, step.t_max), [0.0], method=step.method, rtol=step.rtol,
                    atol=step.atol, dense_output=True, events=escape)
    if not sol.success and sol.status != 1:
        raise FamilyMismatch(f"ray integration failed: {sol.message}")
    dense = sol.sol

    def state(t):
        f = dense(t)[0]
        return f, slope(f)

    blown = len(sol.t_events[0]) > 0
    t_hi = float(sol.t_events[0][0]) if blown else step.t_max
    roots = (1.0 / math.sqrt(math.sqrt(c / tp)),) * 2 if boundary else None
    profile = NumericProfile(params, "RayNumeric", (0.0, t_hi), state, roots=roots,
                             poles=(0.0,), meta={"blowup_t": t_hi if blown else None})
    if blown and on_blowup == "raise":
        raise BlowUp(t_hi, profile)
    return profile


def _solve_periodic(params, step):
    c, tp, A = params.quartic, params.tau_reduced, params.A
    if not (tp < 0 and c < 0):
        raise FamilyMismatch("periodic families need tau < 0 and C < 0")
    if A * A - 4.0 * c * tp <= 0 or A <= 0:
        raise NoRealRoots(f"periodic family needs A > 0 and A^2 > {4.0 * c * tp:.6g}")
    a, b = quartic_roots(params)
    period = period_quadrature(params, a, b)

    def crest(t, y):
        return y[1]
    crest.direction = -1

    sol = solve_ivp(_second_order_rhs(params), (0.0, 2.0 * period + 0.01 * period), [a, 0.0],
                    method=step.method, rtol=step.rtol, atol=step.atol,
                    dense_output=True, events=crest)
    dense = sol.sol
    crests = sol.t_events[0]
    period_event = float(crests[1] - crests[0]) if len(crests) >= 2 else None
    probe = np.linspace(0.0, period, 257)
    gap = float(np.max(np.abs(dense(probe + period)[0] - dense(probe)[0])))

    def state(t):
        y = dense(np.mod(t, period))
        return y[0], y[1]

    return NumericProfile(
        params, "PeriodicNumeric", (0.0, period), state,
        period=period, roots=(a, b),
        meta={"period_event": period_event, "periodicity_gap": gap},
    )


def solve(params: FamilyParams, family: str, step: StepControl = StepControl(),
          on_blowup: str = "raise") -> NumericProfile:
    """Integrate the warp equation for one family kind.

    ``family`` is ``"compact"``, ``"ray"`` or ``"periodic"``.  Compact
    profiles are integrated from a Taylor seed at ``step.h_start`` up to the
    turning point and reflected.  Rays stop at ``step.t_max`` or at the
    ceiling; with ``on_blowup="truncate"`` a blown-up ray is returned instead
    of raising :class:`BlowUp`.
    """
    if family == COMPACT:
        return _solve_compact(params, step)
    if family == RAY:
        return _solve_ray(params, step, on_blowup)
    if family == PERIODIC:
        return _solve_periodic(params, step)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def eval(profile: Profile, t):
    """``(f, f', f'')`` at ``t``; raises :class:`OutOfDomain` outside the profile."""
    return profile.eval(t)


def parity_check(profile: Profile, pole: float, max_order: int = 2,
                 span: float = 0.2, points: int = 21) -> list:
    """Estimates of f^(2k) at a pole for k = 1..max_order.

    Samples of f'' on ``points`` nodes over ``span`` towards the interior are
    oriented to continue the odd extension f(pole - s) = -f(pole + s), fitted
    by a polynomial, and f^(2k)(pole) = (2k-2)! [s^(2k-2)] f''.  Fitting f''
    instead of f keeps the differentiation order two lower, so the estimates
    are limited by integration error rather than stencil amplification.
    """
    lo, hi = profile.domain
    if abs(pole - lo) < 1e-12:
        direction = 1.0
    elif abs(pole - hi) < 1e-12:
        direction = -1.0
    else:
        raise OutOfDomain(f"{pole} is not an end of the domain")
    if span > hi - lo:
        raise OutOfDomain("parity stencil leaves the domain")
    s = np.linspace(0.0, span, points)
    g2 = direction * profile.eval(pole + direction * s)[2]
    deg = min(2 * max_order + 6, points - 1)
    coeffs = np.polynomial.polynomial.polyfit(s, g2, deg)
    return [float(coeffs[2 * k - 2] * math.factorial(2 * k - 2)) for k in range(1, max_order + 1)]


def write_csv(profile: Profile, fh, t=None, num: int = 201):
    """Write ``t,f,fp,fpp`` rows with 17 significant digits."""
    if t is None:
        t = profile.grid(num)
    f, fp, fpp = profile.eval(t)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "f", "fp", "fpp"])
    for row in zip(t, f, fp, fpp):
        writer.writerow([format(float(x), ".17g") for x in row])
