"""The four reference families used throughout the checks."""
from __future__ import annotations

from .curvature import WarpedMetric
from .profile import COMPACT, PERIODIC, RAY, FamilyParams, StepControl, solve


def build(params: FamilyParams, family: str, step: StepControl = StepControl(),
          on_blowup: str = "raise") -> WarpedMetric:
    return WarpedMetric(params, solve(params, family, step, on_blowup=on_blowup))


CANONICAL = {
    "tanh-ray": (FamilyParams.sphere(3, -2.0, 1), RAY),
    "compact-eps+1-A-2.5": (FamilyParams.sphere(3, -2.5, 1), COMPACT),
    "compact-eps-1-A0": (FamilyParams.sphere(3, 0.0, -1), COMPACT),
    "periodic-n3-tau-2-A3": (FamilyParams(n=3, tau=-2.0, A=3.0, C=-2.0), PERIODIC),
}


def canonical_families(step: StepControl = StepControl()) -> dict:
    """Name -> solved metric for tanh ray, both compact spheres and the periodic family."""
    return {name: build(p, fam, step) for name, (p, fam) in CANONICAL.items()}
