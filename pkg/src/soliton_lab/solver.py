"""Damped Newton solver with continuation in lambda for graph solitons.

Solves ``div(Du / W) = 2 lambda + 1 / W`` with ``W = sqrt(1 + |Du|^2)``
for piecewise-linear ``u`` with Dirichlet data, through the weak form

    int Du.Dw / W + int (2 lambda + 1/W) w = 0   for all interior hats w.

Upward orientation of the lifted graph (``<N, e3> > 0``) is the one for
which this equation is the soliton equation with density vector ``e3``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .domains import DomainMesh
from .mesh import E3, DensityFrame, PlanarBoundary, TriMesh

log = logging.getLogger(__name__)

START_LAMBDA = -0.5


@dataclass(frozen=True)
class SolverConfig:
    newton_tolerance: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 0.5
    min_step: float = 1e-6
    continuation_step: float = 0.1
    min_continuation_step: float = 1e-3
    h: float = 0.05

    def __post_init__(self):
        for name in ("newton_tolerance", "max_newton_iters", "min_step", "continuation_step",
                     "min_continuation_step", "h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")


@dataclass(frozen=True)
class NewtonStats:
    iterations: int = 0
    residual_norm: float = float("nan")
    continuation_steps: int = 0
    last_converged_lambda: float | None = None
    message: str = ""


@dataclass(frozen=True, eq=False)
class GraphSolution:
    domain: DomainMesh
    u: np.ndarray
    lam: float
    stats: NewtonStats = field(default_factory=NewtonStats)
    converged: bool = False

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def height(self) -> float:
        """Largest ``|u|`` (distance from the boundary plane for zero data)."""
        return float(np.max(np.abs(self.u)))


# -- assembly -------------------------------------------------------------

class _Assembler:
    """Precomputed P1 geometry of a planar triangulation."""

    def __init__(self, domain: DomainMesh):
        self.domain = domain
        tri = domain.triangles
        p = domain.points[tri]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.area = 0.5 * det
        # gradients of the three hat functions on each triangle, shape (nt, 3, 2)
        g = np.empty((len(tri), 3, 2))
        g[:, 1, 0], g[:, 1, 1] = e2[:, 1] / det, -e2[:, 0] / det
        g[:, 2, 0], g[:, 2, 1] = -e1[:, 1] / det, e1[:, 0] / det
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.grads = g
        self.tri = tri
        self.n = len(domain.points)
        self.free = domain.interior
        self.rows = np.repeat(tri, 3, axis=1).ravel()
        self.cols = np.tile(tri, (1, 3)).ravel()

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("tk,tkd->td", u[self.tri], self.grads)

    def residual(self, u: np.ndarray, lam: float) -> np.ndarray:
        du = self.gradient(u)
        W = np.sqrt(1.0 + np.einsum("td,td->t", du, du))
        flux = np.einsum("td,tkd->tk", du, self.grads) / W[:, None]
        src = ((2.0 * lam + 1.0 / W) / 3.0)[:, None]
        loc = self.area[:, None] * (flux + src)
        F = np.zeros(self.n)
        np.add.at(F, self.tri, loc)
        return F

    def jacobian(self, u: np.ndarray) -> sparse.csr_matrix:
        du = self.gradient(u)
        W = np.sqrt(1.0 + np.einsum("td,td->t", du, du))
        gdu = np.einsum("td,tkd->tk", du, self.grads)  # Du . grad(phi_k)
        gg = np.einsum("tid,tjd->tij", self.grads, self.grads)
        W3 = W**3
        loc = gg / W[:, None, None] - gdu[:, :, None] * gdu[:, None, :] / W3[:, None, None]
        loc -= (gdu / (3.0 * W3[:, None]))[:, None, :]
        loc *= self.area[:, None, None]
        return sparse.csr_matrix((loc.ravel(), (self.rows, self.cols)), shape=(self.n, self.n))


def residual_norm(domain: DomainMesh, u, lam: float) -> float:
    """2-norm of the discrete weak residual over interior hat functions."""
    asm = _Assembler(domain)
    return float(np.linalg.norm(asm.residual(np.asarray(u, float), lam)[asm.free]))


def _newton(asm: _Assembler, u0: np.ndarray, lam: float, config: SolverConfig) -> tuple[np.ndarray, int, float, bool]:
    u = u0.copy()
    free = asm.free
    F = asm.residual(u, lam)[free]
    r = float(np.linalg.norm(F))
    for it in range(config.max_newton_iters + 1):
        if not np.isfinite(r):
            return u, it, r, False
        if r <= config.newton_tolerance:
            return u, it, r, True
        if it == config.max_newton_iters:
            break
        J = asm.jacobian(u)[free][:, free].tocsc()
        try:
            with np.errstate(all="ignore"):
                delta = spsolve(J, -F)
        except RuntimeError:
            return u, it, r, False
        if not np.all(np.isfinite(delta)):
            return u, it, r, False
        alpha = 1.0
        while True:
            trial = u.copy()
            trial[free] += alpha * delta
            Ft = asm.residual(trial, lam)[free]
            rt = float(np.linalg.norm(Ft))
            if np.isfinite(rt) and rt <= (1.0 - 1e-4 * alpha) * r:
                u, F, r = trial, Ft, rt
                break
            alpha *= config.damping
            if alpha < config.min_step:
                return u, it + 1, r, False
    return u, config.max_newton_iters, r, False


def _initial_guess(domain: DomainMesh, asm: _Assembler) -> np.ndarray:
    """Constant data gives the exact start; otherwise the harmonic extension."""
    c = domain.constant_boundary_value
    if c is not None:
        return np.full(asm.n, c)
    u = domain.boundary_values.copy()
    gg = np.einsum("tid,tjd->tij", asm.grads, asm.grads) * asm.area[:, None, None]
    K = sparse.csr_matrix((gg.ravel(), (asm.rows, asm.cols)), shape=(asm.n, asm.n))
    free = asm.free
    bnd = np.flatnonzero(domain.boundary_mask)
    rhs = -K[free][:, bnd] @ u[bnd]
    u[free] = spsolve(K[free][:, free].tocsc(), rhs)
    return u


def _continue(asm: _Assembler, u_start: np.ndarray, lam_start: float, target: float,
              config: SolverConfig, stats_iters: list[int]) -> tuple[np.ndarray, float, float, bool, int, str]:
    """Follow the solution branch from a converged state at ``lam_start`` to ``target``.

    Returns (u, lambda reached, residual norm, converged, steps, message).
    """
    u, lam = u_start, lam_start
    prev: tuple[np.ndarray, float] | None = None
    step = config.continuation_step
    steps = 0
    resid = float(np.linalg.norm(asm.residual(u, lam)[asm.free]))
    while lam != target:
        direction = np.sign(target - lam)
        nxt = target if abs(target - lam) <= step else lam + direction * step
        guess = u
        if prev is not None and prev[1] != lam:
            # secant predictor along the branch
            guess = u + (u - prev[0]) * (nxt - lam) / (lam - prev[1])
        v, it, r, ok = _newton(asm, guess, nxt, config)
        stats_iters.append(it)
        if not ok and guess is not u:
            v, it, r, ok = _newton(asm, u, nxt, config)
            stats_iters.append(it)
        if ok:
            prev = (u, lam)
            u, lam, resid = v, float(nxt), r
            steps += 1
            step = min(config.continuation_step, 2.0 * step)
        else:
            step *= 0.5
            if step < config.min_continuation_step:
                return u, lam, resid, False, steps, (
                    f"continuation stalled at lambda={float(lam)!r} (step below {config.min_continuation_step})")
    return u, lam, resid, True, steps, "converged"


def solve_graph(domain: DomainMesh, frame: DensityFrame | float, config: SolverConfig | None = None,
                initial: GraphSolution | None = None) -> GraphSolution:
    """Solve for the graph soliton over ``domain`` at ``frame.lam``.

    Starts from the exact constant solution at ``lambda = -1/2`` (or the
    converged ``initial`` solution, when given) and continues in lambda.
    Failure to converge is returned as a result with ``converged=False``
    carrying the last converged iterate.
    """
    config = config or SolverConfig(h=domain.h)
    if not isinstance(frame, DensityFrame):
        frame = DensityFrame(E3, float(frame))
    if np.linalg.norm(frame.v - E3) > 1e-12:
        raise ValueError("graph solver works in coordinates with density vector e3")
    asm = _Assembler(domain)
    iters: list[int] = []
    if initial is not None and initial.converged and initial.domain is domain:
        u0, lam0 = initial.u.copy(), initial.lam
    else:
        u0, lam0 = _initial_guess(domain, asm), START_LAMBDA
        u0, it, r, ok = _newton(asm, u0, lam0, config)
        iters.append(it)
        if not ok:
            stats = NewtonStats(sum(iters), r, 0, None, "no solution at the starting lambda")
            return GraphSolution(domain, u0, frame.lam, stats, False)
    u, lam, r, ok, steps, msg = _continue(asm, u0, lam0, frame.lam, config, iters)
    stats = NewtonStats(sum(iters), r, steps, lam, msg)
    if not ok:
        log.info("solve_graph: %s", msg)
    return GraphSolution(domain, u, frame.lam, stats, ok)


def solvability_bound(boundary: PlanarBoundary, v=E3) -> float:
    """Upper bound on ``|lambda|`` for a compact soliton spanning a planar Jordan curve.

    ``L / (2 |<v, a>| area(D))`` with ``L`` the curve length, ``a`` the
    plane normal and ``D`` the enclosed planar domain.
    """
    if len(boundary.curves) != 1:
        raise ValueError("solvability bound needs a single boundary curve")
    va = abs(float(np.dot(np.asarray(v, float), boundary.plane_normal)))
    if va <= 1e-12:
        raise BoundUndefined("boundary plane is parallel to the density vector")
    return boundary.lengths[0] / (2.0 * va * boundary.areas[0])


def circle_solvability_bound(radius: float, v=E3, a=E3) -> float:
    """Closed form of the bound for a round circle of ``radius`` in the plane with normal ``a``."""
    a = np.asarray(a, float) / np.linalg.norm(a)
    va = abs(float(np.dot(np.asarray(v, float), a)))
    if va <= 1e-12:
        raise BoundUndefined("boundary plane is parallel to the density vector")
    return 1.0 / (va * radius)


class BoundUndefined(ValueError):
    """The boundary plane is parallel to ``v``; no bound on lambda follows."""


def continuation_sweep(domain: DomainMesh, lambda_targets: Sequence[float], config: SolverConfig | None = None,
                       max_workers: int = 1) -> list[GraphSolution]:
    """Solve at each target, walking outward from ``lambda = -1/2`` with warm starts.

    Targets above and below ``-1/2`` form two independent branches, run
    concurrently when ``max_workers > 1``. Once a branch fails, its
    remaining (farther) targets are reported as non-converged without
    further attempts.
    """
    config = config or SolverConfig(h=domain.h)
    targets = [float(t) for t in lambda_targets]
    if targets != sorted(targets):
        raise ValueError("lambda targets must be sorted")
    up = [t for t in targets if t >= START_LAMBDA]
    down = sorted((t for t in targets if t < START_LAMBDA), reverse=True)

    def branch(ts: list[float]) -> dict[float, GraphSolution]:
        out: dict[float, GraphSolution] = {}
        last: GraphSolution | None = None
        failed: GraphSolution | None = None
        for t in ts:
            if failed is not None:
                stats = replace(failed.stats, iterations=0, continuation_steps=0,
                                message=f"skipped: branch failed at lambda={failed.lam!r}")
                out[t] = GraphSolution(domain, failed.u, t, stats, False)
                continue
            sol = solve_graph(domain, t, config, initial=last)
            out[t] = sol
            if sol.converged:
                last = sol
            else:
                failed = sol
        return out

    branches = [b for b in (up, down) if b]
    if max_workers > 1 and len(branches) > 1:
        with ThreadPoolExecutor(max_workers=min(max_workers, len(branches))) as ex:
            parts = list(ex.map(branch, branches))
    else:
        parts = [branch(b) for b in branches]
    merged: dict[float, GraphSolution] = {}
    for p in parts:
        merged.update(p)
    return [merged[t] for t in targets]


def largest_converged_lambda(solutions: Sequence[GraphSolution]) -> float | None:
    lams = [s.lam for s in solutions if s.converged]
    return max(lams) if lams else None


def solution_to_mesh(sol: GraphSolution) -> TriMesh:
    """Lift ``(x, y) -> (x, y, u)``; CCW planar triangles give ``<N, e3> > 0``.

    The lifted mesh uses barycentric lumping, the mass lumping of the weak
    form the solution satisfies.
    """
    pts = sol.domain.points
    return TriMesh(np.column_stack([pts, sol.u]), sol.domain.triangles, lumping="barycentric")


def domain_cap_mesh(domain: DomainMesh, z: float = 0.0) -> TriMesh:
    """The flat domain at height ``z`` with normal ``-e3`` (closes an upward graph into a 2-cycle)."""
    pts = domain.points
    return TriMesh(np.column_stack([pts, np.full(len(pts), z)]), domain.triangles[:, ::-1])
