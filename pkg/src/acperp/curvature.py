"""Ricci data of the warped product g = dt^2 + f(t)^2 g_fiber.

Dimensions: the fiber has dimension ``n`` and the total space m = n + 1.
The Ricci endomorphism has the radial eigenvalue mu (multiplicity 1) and the
fiber eigenvalue lambda (multiplicity n):

    mu     = -n f''/f
    lambda = (tau - f f'' - (n-1) f'^2) / f^2

Tangent vectors are modelled pointwise as a radial component plus a fiber
representative; every quantity here depends on fiber vectors only through
Euclidean dot products, so the representative length is unrelated to n.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain, PoleEvaluation
from .profile import FamilyParams, PerturbedProfile, Profile

POLE_F = 1e-3


@dataclass(frozen=True)
class WarpedMetric:
    params: FamilyParams
    profile: Profile

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def m(self) -> int:
        return self.params.n + 1

    def perturbed(self, delta: float = 0.01, wavenumber: float = 3.0) -> "WarpedMetric":
        return WarpedMetric(self.params, PerturbedProfile(self.profile, delta, wavenumber))


@dataclass(frozen=True)
class TangentVector:
    r: float
    v: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def radial(cls, r: float = 1.0) -> "TangentVector":
        return cls(float(r), (0.0, 0.0, 0.0))

    @classmethod
    def fiber(cls, *v) -> "TangentVector":
        return cls(0.0, tuple(float(x) for x in v))

    @classmethod
    def random(cls, rng, dim: int = 3) -> "TangentVector":
        comps = rng.uniform(-1.0, 1.0, dim + 1)
        return cls(float(comps[0]), tuple(float(x) for x in comps[1:]))

    def fiber_dot(self, other: "TangentVector") -> float:
        return float(np.dot(self.v, other.v))


@dataclass
class EigenData:
    """Ricci and Killing-tensor eigenvalues plus the conformal field at t.

    ``lambda_S``/``mu_S`` are the eigenvalues of S = Ric - 2 Scal/(m+2) Id;
    the conformal field is xi = xi_r d/dt with nabla xi = (alpha/2) Id.
    """

    t: object
    lam: object
    mu: object
    scal: object
    lambda_S: object
    mu_S: object
    alpha: object
    xi_r: object


def warped_eigenvalues(n, tau, f, fp, fpp):
    """(lambda, mu) from raw profile data, no pole handling."""
    mu = -n * fpp / f
    lam = (tau - f * fpp - (n - 1) * fp * fp) / (f * f)
    return lam, mu


def _warped_derivatives(n, tau, f, fp, fpp, fppp):
    f2 = f * f
    num = tau - f * fpp - (n - 1) * fp * fp
    dlam = (-fp * fpp - f * fppp - 2 * (n - 1) * fp * fpp) / f2 - 2.0 * fp * num / (f2 * f)
    dmu = -n * (fppp * f - fpp * fp) / f2
    return dlam, dmu


def _near_pole(metric, f):
    return metric.profile.ode_backed and np.any(np.abs(f) < POLE_F)


def _first_integral_eigen(params, f, fp):
    # (f')^2 = P(f) and f'' = A f + 2c f^3 substituted; regular at f = 0
    n, A, c = params.n, params.A, params.quartic
    f2 = f * f
    lam = -n * A - (n + 1) * c * f2
    mu = -n * A - 2 * n * c * f2
    dlam = -2.0 * (n + 1) * c * f * fp
    dmu = -4.0 * n * c * f * fp
    return lam, mu, dlam, dmu


def _pole_safe(metric, t):
    """lambda, mu and their t-derivatives, with the series branch near poles."""
    f, fp, fpp, fppp = metric.profile.jet(t)
    p = metric.params
    if not metric.profile.ode_backed and np.any(f <= 0):
        raise PoleEvaluation("f vanishes; eigenvalues undefined for a non-solution profile")
    with np.errstate(divide="ignore", invalid="ignore"):
        lam, mu = warped_eigenvalues(p.n, p.tau, f, fp, fpp)
        dlam, dmu = _warped_derivatives(p.n, p.tau, f, fp, fpp, fppp)
    if _near_pole(metric, f):
        pl, pm, pdl, pdm = _first_integral_eigen(p, f, fp)
        near = np.abs(f) < POLE_F
        lam, mu = np.where(near, pl, lam), np.where(near, pm, mu)
        dlam, dmu = np.where(near, pdl, dlam), np.where(near, pdm, dmu)
    return (f, fp, fpp), (lam, mu), (dlam, dmu)


def ricci_eigenvalues(metric: WarpedMetric, t):
    """Fiber and radial Ricci eigenvalues ``(lambda, mu)`` at ``t``.

    Near a pole (f < 1e-3) an ODE-backed profile switches to the first
    integral form lambda = -nA - (n+1) c f^2, mu = -nA - 2n c f^2, whose
    limit at the pole is lambda = mu = -nA.
    """
    _, (lam, mu), _ = _pole_safe(metric, t)
    return lam, mu


def eigen_derivatives(metric: WarpedMetric, t):
    """``(dlambda/dt, dmu/dt)`` at ``t``."""
    _, _, (dlam, dmu) = _pole_safe(metric, t)
    return dlam, dmu


def scalar_and_shifted(metric: WarpedMetric, t) -> EigenData:
    (f, fp, _), (lam, mu), _ = _pole_safe(metric, t)
    n, m, C = metric.n, metric.m, metric.params.C
    scal = mu + n * lam
    shift = 2.0 * scal / (m + 2)
    root = np.sqrt(abs(C))
    return EigenData(t=t, lam=lam, mu=mu, scal=scal, lambda_S=lam - shift,
                     mu_S=mu - shift, alpha=2.0 * root * fp, xi_r=root * f)


def shifted_derivatives(metric: WarpedMetric, t):
    """``(dlambda_S/dt, dmu_S/dt)``."""
    dlam, dmu = eigen_derivatives(metric, t)
    dscal = dmu + metric.n * dlam
    shift = 2.0 * dscal / (metric.m + 2)
    return dlam - shift, dmu - shift


def _f_at(metric, t):
    f = metric.profile.eval(t)[0]
    if np.any(f <= 0):
        raise PoleEvaluation(f"f = {float(np.min(f)):.3g} at t = {t}")
    return f


def inner(metric: WarpedMetric, t, X: TangentVector, Y: TangentVector) -> float:
    """<X, Y>_g = X.r Y.r + f(t)^2 X.v . Y.v"""
    f = float(_f_at(metric, t))
    return X.r * Y.r + f * f * X.fiber_dot(Y)


def dt_component(X: TangentVector) -> float:
    return X.r


def _nabla_sym(d_fiber, d_radial, gap, shape, X, Y, Z, inner_xy, inner_xz, inner_yz):
    # tensor a g + (b - a) dt (x) dt with a' = d_fiber, b' = d_radial,
    # gap = b - a and nabla dt = shape (g - dt (x) dt)
    return (d_fiber * X.r * inner_yz
            + (d_radial - d_fiber) * X.r * Y.r * Z.r
            + gap * shape * ((inner_xy - X.r * Y.r) * Z.r + Y.r * (inner_xz - X.r * Z.r)))


def nabla_ricci(metric: WarpedMetric, t, X: TangentVector, Y: TangentVector,
                Z: TangentVector) -> float:
    """(nabla_X rho)(Y, Z) for rho = lambda g + (mu - lambda) dt (x) dt."""
    f = float(_f_at(metric, t))
    (f, fp, _), (lam, mu), (dlam, dmu) = _pole_safe(metric, t)
    f, fp = float(f), float(fp)
    f2 = f * f
    ixy = X.r * Y.r + f2 * X.fiber_dot(Y)
    ixz = X.r * Z.r + f2 * X.fiber_dot(Z)
    iyz = Y.r * Z.r + f2 * Y.fiber_dot(Z)
    return float(_nabla_sym(dlam, dmu, mu - lam, fp / f, X, Y, Z, ixy, ixz, iyz))


def cumulative_gauss(func, knots, nodes: int = 12) -> np.ndarray:
    """int_{knots[0]}^{knots[i]} func, by Gauss-Legendre on each knot interval.

    ``func`` must accept arrays.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.size < 2:
        return np.zeros_like(knots)
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = knots[:-1, None], knots[1:, None]
    half = 0.5 * (b - a)
    vals = func((0.5 * (a + b) + half * x).ravel()).reshape(half.shape[0], nodes)
    pieces = (vals * w).sum(axis=1) * half[:, 0]
    return np.concatenate(([0.0], np.cumsum(pieces)))


@dataclass
class ConformalWarp:
    """Warped data of e^{2u} g = dsigma^2 + F(sigma)^2 g_fiber, sampled at ``t``."""

    t: np.ndarray
    sigma: np.ndarray
    F: np.ndarray
    dF: np.ndarray
    d2F: np.ndarray

    def eigenvalues(self, params: FamilyParams):
        return warped_eigenvalues(params.n, params.tau, self.F, self.dF, self.d2F)


def conformal_to_warped(metric: WarpedMetric, u, t=None) -> ConformalWarp:
    """Rewrite e^{2u(t)} g as a warped product in its own arclength sigma.

    ``u`` maps t to ``(u, u', u'')``.  sigma(t) = int e^u from the first
    sample (the left end of the domain by default), F = e^u f, and by the chain rule
    dF/dsigma = u' f + f', d2F/dsigma2 = e^{-u} (u'' f + u' f' + f'').
    """
    prof = metric.profile
    if t is None:
        t = prof.grid()
    t = np.asarray(t, dtype=float)
    if not prof.contains(t):
        raise OutOfDomain("conformal samples leave the profile domain")
    f, fp, fpp = prof.eval(t)
    uu, du, d2u = u(t)
    w = np.exp(uu)

    sigma = cumulative_gauss(lambda s: np.exp(u(s)[0]), t)
    return ConformalWarp(
        t=t, sigma=sigma, F=w * f, dF=du * f + fp,
        d2F=(d2u * f + du * fp + fpp) / w,
    )


def eigen_table(metric: WarpedMetric, t) -> dict:
    """Columns t, lambda, mu, scal, lambda_S, mu_S, alpha for the eigenvalue CSV."""
    e = scalar_and_shifted(metric, t)
    return {"t": t, "lambda": e.lam, "mu": e.mu, "scal": e.scal,
            "lambda_S": e.lambda_S, "mu_S": e.mu_S, "alpha": e.alpha}
