import numpy as np
import pytest

from acperp.families import CANONICAL, canonical_families

ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def families():
    return canonical_families()


@pytest.fixture(scope="session")
def tanh_metric(families):
    return families["tanh-ray"]


@pytest.fixture(scope="session")
def compact_plus(families):
    return families["compact-eps+1-A-2.5"]


@pytest.fixture(scope="session")
def compact_minus(families):
    return families["compact-eps-1-A0"]


@pytest.fixture(scope="session")
def periodic_metric(families):
    return families["periodic-n3-tau-2-A3"]


FAMILY_NAMES = list(CANONICAL)


def slice_curvature_oracle(metric, t, h=1e-2):
    """Ricci eigenvalues from finite differences of f alone.

    The radial plane dt^2 + f^2 dtheta^2 has Gauss curvature
    K = -(1/(2 sqrt G)) d/dt (G_t / sqrt G) with G = f^2; a plane of two fiber
    directions has curvature (tau/(n-1) - f_t^2)/f^2.  Fourth-order central
    stencils; only f values enter, never the profile's own derivatives.
    """
    def f_at(s):
        return np.asarray(metric.profile.eval(s)[0], dtype=float)

    def d1(fun, s):
        return (fun(s - 2 * h) - 8 * fun(s - h) + 8 * fun(s + h) - fun(s + 2 * h)) / (12 * h)

    def G(s):
        return f_at(s) ** 2

    def flux(s):
        return d1(G, s) / np.sqrt(G(s))

    n, tau = metric.n, metric.params.tau
    K_radial = -d1(flux, t) / (2.0 * np.sqrt(G(t)))
    ft = d1(f_at, t)
    K_fiber = (tau / (n - 1) - ft**2) / f_at(t) ** 2
    mu = n * K_radial
    lam = K_radial + (n - 1) * K_fiber
    return lam, mu


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the summary."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(number, ok, text):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
