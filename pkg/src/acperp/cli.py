"""Command line front end: solve, verify, sweep and geodesic subcommands.

Exit codes: 0 when everything passes, 1 when a check fails, 2 on invalid
input.  Every run is determined by its :class:`RunConfig`; ``--config``
loads one from JSON and explicit flags override its values.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geodesics, profile
from .curvature import WarpedMetric, eigen_table
from .errors import AcperpError, BlowUp, FamilyMismatch, NoRealRoots, OutOfDomain
from .profile import COMPACT, FAMILIES, PERIODIC, FamilyParams, StepControl
from .verify import CHECKS, expected_invariants, invariant_values, report_dicts, run_checks

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2
SUBCOMMANDS = ("solve", "verify", "sweep", "geodesic")
ENERGY_TOL = 1e-8
KILLING_TOL = 1e-7


class InvalidInput(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str = "solve"
    # family
    n: int = 3
    tau: Optional[float] = None
    A: float = -2.0
    C: Optional[float] = None
    eps: Optional[int] = None
    family: str = "ray"
    # numerics
    rtol: float = 1e-12
    atol: float = 1e-14
    num: int = 201
    samples: int = 100
    seed: int = 42
    checks: list = field(default_factory=lambda: list(CHECKS))
    perturb: float = 0.0
    expect_no_ew: bool = False
    # sweep
    A_from: Optional[float] = None
    A_to: Optional[float] = None
    steps: int = 10
    jobs: int = 1
    # geodesic
    E: float = 1.0
    L: float = 0.0
    t0: float = 1.0
    dir: int = 1
    duration: float = 10.0
    # outputs; None means stdout for the primary output
    out: Optional[str] = None
    meta: Optional[str] = None
    eigen: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidInput(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def params(self) -> FamilyParams:
        if self.family not in FAMILIES:
            raise InvalidInput(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.C is not None and self.eps is not None:
            raise InvalidInput("give either --C or --eps, not both")
        tau = float(self.n - 1) if self.tau is None else float(self.tau)
        if self.C is not None:
            C = float(self.C)
        else:
            eps = self.eps if self.eps is not None else (-1 if self.family == PERIODIC else 1)
            if eps not in (-1, 1):
                raise InvalidInput(f"eps must be +1 or -1, got {eps}")
            C = float(eps * (self.n - 1))
        try:
            return FamilyParams(n=self.n, tau=tau, A=float(self.A), C=C)
        except ValueError as exc:
            raise InvalidInput(str(exc)) from exc

    def step(self) -> StepControl:
        return StepControl(rtol=self.rtol, atol=self.atol)


def fmt(x) -> str:
    return format(float(x), ".17g")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


@contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _metric(cfg: RunConfig, params: Optional[FamilyParams] = None) -> WarpedMetric:
    params = params or cfg.params()
    prof = profile.solve(params, cfg.family, cfg.step(), on_blowup="truncate")
    metric = WarpedMetric(params, prof)
    return metric.perturbed(cfg.perturb) if cfg.perturb else metric


def family_label(cfg: RunConfig, params: FamilyParams) -> str:
    return f"{cfg.family} n={params.n} tau={params.tau:g} A={params.A:g} C={params.C:g}"


def _invariant_summary(metric: WarpedMetric) -> dict:
    vals = invariant_values(metric, metric.profile.interior(201))
    return {k: float(np.mean(vals[k])) for k in ("C0", "mu_S", "C1")}


def run_solve(cfg: RunConfig) -> int:
    params = cfg.params()
    metric = _metric(cfg, params)
    prof = metric.profile
    meta = prof.metadata()
    meta["params"] = params.to_dict()
    meta.update(_invariant_summary(metric))
    meta["expected"] = expected_invariants(metric)
    with _open_out(cfg.out) as fh:
        profile.write_csv(prof, fh, num=cfg.num)
    if cfg.eigen is not None:
        t = prof.grid(cfg.num)
        cols = eigen_table(metric, t)
        with open(cfg.eigen, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(cols))
            for row in zip(*(np.broadcast_to(v, t.shape) for v in cols.values())):
                writer.writerow([fmt(x) for x in row])
    text = _dump_json(meta)
    if cfg.meta is not None:
        with open(cfg.meta, "w") as fh:
            fh.write(text)
    elif cfg.out is not None:
        sys.stdout.write(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def run_verify(cfg: RunConfig) -> int:
    params = cfg.params()
    unknown = [c for c in cfg.checks if c not in CHECKS]
    if unknown:
        raise InvalidInput(f"unknown checks {', '.join(unknown)}; choose from {', '.join(CHECKS)}")
    metric = _metric(cfg, params)
    reports = run_checks(metric, cfg.checks, samples=cfg.samples, seed=cfg.seed,
                         family=family_label(cfg, params), expect_no_ew=cfg.expect_no_ew)
    with _open_out(cfg.out) as fh:
        fh.write(_dump_json(report_dicts(reports)))
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check_name}: max {r.max_residual:.3e}"
              f" (tol {r.tolerance:.0e})", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


SWEEP_COLUMNS = ["A", "t0_or_period", "C0", "mu_S", "C1", "max_gray_residual", "error"]


def _sweep_row(args):
    cfg, A = args
    row = {"A": fmt(A)}
    try:
        params = dataclasses.replace(cfg.params(), A=float(A))
        metric = _metric(cfg, params)
        prof = metric.profile
        span = prof.t0 if cfg.family == COMPACT else prof.period
        if span is None:
            span = prof.meta.get("blowup_t", prof.domain[1])
        inv = _invariant_summary(metric)
        gray = run_checks(metric, ["gray"], samples=cfg.samples, seed=cfg.seed)[0]
        row.update(t0_or_period=fmt(span), C0=fmt(inv["C0"]), mu_S=fmt(inv["mu_S"]),
                   C1=fmt(inv["C1"]), max_gray_residual=fmt(gray.max_residual), error="")
    except (AcperpError, InvalidInput, ValueError) as exc:
        row.update({k: "" for k in SWEEP_COLUMNS[1:-1]})
        row["error"] = type(exc).__name__
    return row


def run_sweep(cfg: RunConfig) -> int:
    if cfg.steps < 2:
        raise InvalidInput(f"--steps must be at least 2, got {cfg.steps}")
    if cfg.A_from is None or cfg.A_to is None:
        raise InvalidInput("sweep needs --A-from and --A-to")
    cfg.params()
    grid = np.linspace(cfg.A_from, cfg.A_to, cfg.steps)
    jobs = [(cfg, float(A)) for A in grid]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    with _open_out(cfg.out) as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_FAIL if all(r["error"] for r in rows) else EXIT_OK


def run_geodesic(cfg: RunConfig) -> int:
    metric = _metric(cfg)
    try:
        init = geodesics.initial_state(metric, cfg.t0, cfg.L, cfg.E, cfg.dir)
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc
    path = geodesics.integrate_geodesic(metric, init, cfg.duration, num=cfg.num,
                                        rtol=cfg.rtol, atol=cfg.atol)
    track = geodesics.killing_along_geodesic(metric, path)
    with _open_out(cfg.out) as fh:
        geodesics.write_csv(path, track, fh)
    log = sys.stdout if cfg.out is not None else sys.stderr
    print(f"energy drift {fmt(path.energy_drift)}", file=log)
    print(f"killing drift {fmt(track.drift)}", file=log)
    print(f"killing expected {fmt(track.expected)} deviation {fmt(track.deviation)}", file=log)
    if path.pole_hit:
        print(f"PoleHit at time {fmt(path.time[-1])}", file=log)
    if path.left_domain:
        print(f"left the profile domain at time {fmt(path.time[-1])}", file=log)
    ok = path.energy_drift < ENERGY_TOL and track.drift < KILLING_TOL
    return EXIT_OK if ok else EXIT_FAIL


RUNNERS = {"solve": run_solve, "verify": run_verify, "sweep": run_sweep, "geodesic": run_geodesic}


def _checks_arg(text: str) -> list:
    return [c.strip() for c in text.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    # defaults are suppressed so that only flags actually given override the config
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="RunConfig JSON; flags override its values")
    common.add_argument("--save-config", help="write the effective RunConfig JSON here")
    common.add_argument("--n", type=int, help="fiber dimension")
    common.add_argument("--tau", type=float, help="fiber Einstein constant (default n-1)")
    common.add_argument("--A", type=float)
    common.add_argument("--C", type=float)
    common.add_argument("--eps", type=int, help="C = eps (n-1)")
    common.add_argument("--family", choices=FAMILIES)
    common.add_argument("--rtol", type=float)
    common.add_argument("--atol", type=float)
    common.add_argument("--num", type=int, help="output grid size")
    common.add_argument("--perturb", type=float, help="relative size of a sin(3t) perturbation of f")
    common.add_argument("--out", help="primary output path (default stdout)")

    parser = argparse.ArgumentParser(prog="acperp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, text):
        return sub.add_parser(name, parents=[common], argument_default=argparse.SUPPRESS, help=text)

    p = add("solve", "solve a family, write profile CSV")
    p.add_argument("--meta", help="metadata JSON path")
    p.add_argument("--eigen", help="eigenvalue CSV path")

    p = add("verify", "run residual checks, write report JSON")
    p.add_argument("--checks", type=_checks_arg, help=",".join(CHECKS))
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--expect-no-ew", dest="expect_no_ew", action="store_true",
                   help="treat a negative eigenvalue gap as the expected outcome")

    p = add("sweep", "tabulate invariants over a range of A")
    p.add_argument("--A-from", dest="A_from", type=float)
    p.add_argument("--A-to", dest="A_to", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)

    p = add("geodesic", "integrate one geodesic, write CSV")
    p.add_argument("--E", type=float, help="energy")
    p.add_argument("--L", type=float, help="Clairaut constant")
    p.add_argument("--t0", type=float, help="initial radius")
    p.add_argument("--dir", type=int, choices=(-1, 1), help="sign of the initial radial velocity")
    p.add_argument("--duration", type=float)
    return parser


def resolve_config(argv=None) -> tuple:
    args = vars(build_parser().parse_args(argv))
    config_path = args.pop("config", None)
    save_path = args.pop("save_config", None)
    base = {}
    if config_path is not None:
        with open(config_path) as fh:
            base = json.load(fh)
    base.update(args)
    return RunConfig.from_dict(base), save_path


def main(argv=None) -> int:
    try:
        cfg, save_path = resolve_config(argv)
        if cfg.subcommand not in RUNNERS:
            raise InvalidInput(f"unknown subcommand {cfg.subcommand!r}")
        if save_path is not None:
            with open(save_path, "w") as fh:
                fh.write(cfg.to_json())
        return RUNNERS[cfg.subcommand](cfg)
    except (InvalidInput, NoRealRoots, FamilyMismatch, OutOfDomain, BlowUp) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
