"""Batch driver: ``soliton-lab {solve-graph,solve-rotational,verify,sweep} --config run.json``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from . import verify as V
from .domains import make_domain
from .mesh import E3, DensityFrame, PlanarBoundary, TriMesh, read_obj, write_obj
from .rotational import rotational_to_mesh, solve_rotational
from .solver import GraphSolution, SolverConfig, continuation_sweep, solution_to_mesh, solve_graph

log = logging.getLogger("soliton_lab")

MODES = ("solve-graph", "solve-rotational", "verify", "sweep")
EXIT_INVALID_CONFIG = 2
SUMMARY_COLUMNS = ("lambda", "h", "A", "4pi_h", "abs_1p2lambda_A", "bound", "converged",
                   "lambda_bound", "one_sided", "area_estimate", "area_estimate_slicewise",
                   "reflection_symmetry", "contact_angle", "flux_cycle", "flux_identity")
_SUMMARY_CHECKS = {
    "lambda_bound": "lambda_bound",
    "one_sided": "one_sided",
    "area_estimate": "area_estimate",
    "area_estimate_slicewise": "area_estimate.slicewise",
    "reflection_symmetry": "reflection_symmetry",
    "contact_angle": "contact_angle_constancy",
    "flux_cycle": "flux_balance.cycle",
    "flux_identity": "flux_balance.height_laplacian",
}


class RunConfig(BaseModel):
    """Flat run configuration; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    mode: Optional[Literal["solve-graph", "solve-rotational", "verify", "sweep"]] = None
    # domain
    shape: Literal["disk", "ellipse", "annulus", "polygon"] = "disk"
    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    method: Literal["delaunay", "rings"] = "delaunay"
    a: float = 1.0
    b: float = 0.5
    inner_radius: float = 0.5
    outer_radius: float = 1.0
    vertices: Optional[list[tuple[float, float]]] = None
    h: float = 0.05
    boundary_height: Union[float, list[float], dict[str, list[float]]] = 0.0
    jitter: float = 0.0
    # frame
    v: tuple[float, float, float] = (0.0, 0.0, 1.0)
    lam: Optional[float] = None
    lambdas: Optional[list[float]] = None
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None
    lambda_step: Optional[float] = None
    # solver (defaults mirror SolverConfig)
    newton_tolerance: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 0.5
    min_step: float = 1e-6
    continuation_step: float = 0.1
    min_continuation_step: float = 1e-3
    # rotational
    r_max: float = 1.0
    step: float = 1e-3
    n_angular: int = 96
    # verify
    mesh: Optional[str] = None
    # run
    out: Optional[str] = None
    seed: int = 0

    @field_validator("h", "radius", "a", "b", "inner_radius", "outer_radius", "r_max", "step")
    @classmethod
    def _positive(cls, x: float) -> float:
        if not x > 0:
            raise ValueError("must be positive")
        return x

    @field_validator("boundary_height")
    @classmethod
    def _fourier_keys(cls, x):
        if isinstance(x, dict) and set(x) - {"cos", "sin"}:
            raise ValueError("Fourier boundary data takes only 'cos' and 'sin'")
        return x

    @model_validator(mode="after")
    def _consistent(self):
        if abs(math.sqrt(sum(c * c for c in self.v)) - 1.0) > 1e-12:
            raise ValueError("v must be a unit vector")
        if self.shape == "polygon" and not self.vertices:
            raise ValueError("polygon domain needs 'vertices'")
        if self.lambdas is not None and (self.lambda_min is not None or self.lambda_max is not None):
            raise ValueError("give either 'lambdas' or a lambda_min/lambda_max range, not both")
        rng = (self.lambda_min, self.lambda_max, self.lambda_step)
        if any(x is not None for x in rng) and not all(x is not None for x in rng):
            raise ValueError("a lambda range needs lambda_min, lambda_max and lambda_step")
        if self.lambda_step is not None and not self.lambda_step > 0:
            raise ValueError("lambda_step must be positive")
        return self

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.newton_tolerance, self.max_newton_iters, self.damping, self.min_step,
                            self.continuation_step, self.min_continuation_step, self.h)

    def domain_spec(self) -> dict:
        spec = {"shape": self.shape, "h": self.h, "boundary_height": self.boundary_height, "jitter": self.jitter}
        if self.shape == "disk":
            spec.update(radius=self.radius, center=list(self.center), method=self.method)
        elif self.shape == "ellipse":
            spec.update(a=self.a, b=self.b)
        elif self.shape == "annulus":
            spec.update(inner_radius=self.inner_radius, outer_radius=self.outer_radius)
        else:
            spec.update(vertices=[list(p) for p in self.vertices])
        return spec

    def lambda_list(self) -> list[float]:
        if self.lambdas is not None:
            return sorted(float(x) for x in self.lambdas)
        if self.lambda_min is not None:
            n = int(math.floor((self.lambda_max - self.lambda_min) / self.lambda_step + 1e-9))
            return [round(self.lambda_min + k * self.lambda_step, 12) for k in range(n + 1)]
        if self.lam is not None:
            return [self.lam]
        raise ValueError("sweep needs 'lambdas' or lambda_min/lambda_max/lambda_step")


class ConfigError(Exception):
    def __init__(self, details: list[dict]):
        super().__init__(json.dumps(details))
        self.details = details


def load_config(path: str | None, mode: str, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([{"loc": ["config"], "msg": str(exc), "type": "unreadable"}]) from None
        if not isinstance(raw, dict):
            raise ConfigError([{"loc": ["config"], "msg": "top level must be a JSON object", "type": "type_error"}])
    if "lambda" in raw:
        raw["lam"] = raw.pop("lambda")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        details = [{"loc": [str(x) for x in e["loc"]], "msg": e["msg"], "type": e["type"]} for e in exc.errors()]
        raise ConfigError(details) from None
    if cfg.mode is not None and cfg.mode != mode:
        raise ConfigError([{"loc": ["mode"], "msg": f"config is for {cfg.mode!r}, not {mode!r}", "type": "value_error"}])
    if mode in ("solve-graph", "solve-rotational") and cfg.lam is None:
        raise ConfigError([{"loc": ["lambda"], "msg": f"{mode} needs 'lambda'", "type": "missing"}])
    if mode == "sweep":
        try:
            cfg.lambda_list()
        except ValueError as exc:
            raise ConfigError([{"loc": ["lambdas"], "msg": str(exc), "type": "missing"}]) from None
    if mode in ("solve-graph", "sweep") and np.linalg.norm(np.asarray(cfg.v) - E3) > 1e-12:
        raise ConfigError([{"loc": ["v"], "msg": "graph solves use v = (0, 0, 1)", "type": "value_error"}])
    return cfg


# -- outputs --------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "" if not math.isfinite(x) else repr(x)
    return str(x)


def _flag(entries: list[V.ReportEntry], name: str) -> str:
    es = [e for e in entries if e.check == name and e.applicable]
    if not es:
        return "n/a"
    return "pass" if all(e.passed for e in es) else "fail"


def summary_row(sol: GraphSolution, entries: list[V.ReportEntry]) -> dict:
    row = {c: None for c in SUMMARY_COLUMNS}
    row["lambda"] = float(sol.lam)
    row["converged"] = bool(sol.converged)
    dom = sol.domain
    if len(dom.loops) == 1:
        from .solver import solvability_bound

        row["bound"] = solvability_bound(dom.planar_boundary())
    if sol.converged and dom.has_zero_boundary_data:
        u = sol.u
        h = -float(u.min()) if sol.lam > -0.5 else (float(u.max()) if sol.lam < -0.5 else float(np.abs(u).max()))
        A = solution_to_mesh(sol).area
        row.update({"h": h, "A": A, "4pi_h": 4.0 * math.pi * h, "abs_1p2lambda_A": abs(1.0 + 2.0 * sol.lam) * A})
    for col, check in _SUMMARY_CHECKS.items():
        row[col] = _flag(entries, check)
    return row


def write_summary(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])


def solution_record(sol: GraphSolution) -> dict:
    s = sol.stats
    return {
        "lambda": float(sol.lam),
        "converged": bool(sol.converged),
        "status": "converged" if sol.converged else "non-converged",
        "newton_iterations": int(s.iterations),
        "residual_norm": float(s.residual_norm) if math.isfinite(s.residual_norm) else None,
        "continuation_steps": int(s.continuation_steps),
        "last_converged_lambda": s.last_converged_lambda,
        "message": s.message,
        "h": float(sol.domain.h),
        "n_vertices": int(len(sol.domain.points)),
        "n_triangles": int(len(sol.domain.triangles)),
        "height": sol.height,
    }


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _threads() -> int:
    raw = os.environ.get("SOLITON_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring SOLITON_LAB_THREADS=%r", raw)
        return 1


def _lambda_dir(lam: float) -> str:
    return f"lambda_{lam:+.6f}"


# -- modes ----------------------------------------------------------------------

def run_solve_graph(cfg: RunConfig, out: Path) -> int:
    dom = make_domain(cfg.domain_spec(), seed=cfg.seed)
    sol = solve_graph(dom, DensityFrame(E3, cfg.lam), cfg.solver_config())
    rep = V.run_graph_checks(sol)
    write_obj(solution_to_mesh(sol), out / "solution.obj")
    _write_json(solution_record(sol), out / "solution.json")
    rep.write(out / "verification.json")
    write_summary([summary_row(sol, rep.entries)], out / "summary.csv")
    return 0 if rep.all_passed else 1


def run_sweep(cfg: RunConfig, out: Path) -> int:
    dom = make_domain(cfg.domain_spec(), seed=cfg.seed)
    threads = _threads()
    sols = continuation_sweep(dom, cfg.lambda_list(), cfg.solver_config(), max_workers=threads)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        reports = list(ex.map(V.run_graph_checks, sols))
    merged = V.VerificationReport()
    rows = []
    for sol, rep in zip(sols, reports):
        sub = out / _lambda_dir(sol.lam)
        sub.mkdir(parents=True, exist_ok=True)
        write_obj(solution_to_mesh(sol), sub / "solution.obj")
        _write_json(solution_record(sol), sub / "solution.json")
        rep.write(sub / "verification.json")
        merged.extend(rep.entries)
        rows.append(summary_row(sol, rep.entries))
    merged.write(out / "verification.json")
    write_summary(rows, out / "summary.csv")
    return 0 if merged.all_passed else 1


def run_solve_rotational(cfg: RunConfig, out: Path) -> int:
    prof = solve_rotational(cfg.lam, cfg.r_max, cfg.step)
    prof.write_csv(out / "profile.csv")
    rec = {"lambda": float(cfg.lam), "complete": prof.complete, "existence_radius": prof.existence_radius,
           "r_max": prof.r_max, "step": prof.step, "u_edge": float(prof.u[-1]), "du_edge": float(prof.p[-1])}
    _write_json(rec, out / "profile.json")
    rep = V.VerificationReport()
    if prof.complete:
        mesh = rotational_to_mesh(prof.rebased(), cfg.n_angular)
        write_obj(mesh, out / "profile.obj")
        rep.extend(V.check_flux_balance(mesh, V.planar_cap(mesh), DensityFrame(E3, cfg.lam)))
        loop = mesh.vertices[list(mesh.boundary_loops[0])]
        rep.add(V.check_graph_property(mesh, PlanarBoundary.horizontal([loop[:, :2]], z=0.0)))
    rep.write(out / "verification.json")
    return 0 if rep.all_passed else 1


def _shipped_icosphere() -> Path:
    return Path(str(resources.files("soliton_lab").joinpath("data/icosphere.obj")))


def verify_mesh(mesh: TriMesh, lam: float | None, v) -> V.VerificationReport:
    rep = V.VerificationReport()
    v = np.asarray(v, float)
    if mesh.is_closed:
        rep.add(V.check_closed_infeasibility(mesh, v))
        return rep
    loops = mesh.boundary_loops
    if len(loops) == 1:
        pts = mesh.vertices[list(loops[0])]
        vec = 0.5 * np.sum(np.cross(pts, np.roll(pts, -1, axis=0)), axis=0)
        boundary = PlanarBoundary(pts.mean(axis=0), vec, (pts,), tol=1e-6 * mesh.scale, check_simple=False)
        rep.add(V.check_graph_property(mesh, boundary))
        if lam is not None:
            rep.add(V.check_lambda_bound(boundary, lam, v))
            rep.extend(V.check_flux_balance(mesh, V.planar_cap(mesh), DensityFrame(v, lam)))
    elif lam is not None:
        rep.add(V.check_multi_boundary(V.MultiBoundarySpec.from_mesh(mesh, v), lam, v))
    return rep


def run_verify(cfg: RunConfig, out: Path) -> int:
    path = Path(cfg.mesh) if cfg.mesh else _shipped_icosphere()
    rep = verify_mesh(read_obj(path), cfg.lam, cfg.v)
    rep.write(out / "verification.json")
    return 0 if rep.all_passed else 1


RUNNERS = {"solve-graph": run_solve_graph, "solve-rotational": run_solve_rotational,
           "verify": run_verify, "sweep": run_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soliton-lab", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="JSON run config (flat keys)")
        p.add_argument("--out", help="output directory (default: config 'out' or ./out)")
        p.add_argument("--seed", type=int, help="seed for jittered meshes (default 0)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.mode, {"seed": args.seed, "out": args.out})
    except ConfigError as exc:
        print(json.dumps({"error": "invalid-config", "details": exc.details}, sort_keys=True), file=sys.stderr)
        return EXIT_INVALID_CONFIG
    out = Path(cfg.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    try:
        return RUNNERS[args.mode](cfg, out)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": "invalid-input", "details": [{"msg": str(exc)}]}, sort_keys=True), file=sys.stderr)
        return EXIT_INVALID_CONFIG


if __name__ == "__main__":
    sys.exit(main())
