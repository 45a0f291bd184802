"""Triangulated planar domains with Dirichlet height data."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from matplotlib.path import Path as MplPath
from scipy.spatial import Delaunay, cKDTree

from .mesh import PlanarBoundary, polygon_signed_area
from .shapes import concentric_disk


@dataclass(frozen=True, eq=False)
class DomainMesh:
    """Planar triangulation (CCW triangles) with boundary heights.

    ``loops`` are the boundary vertex cycles; the first one is the outer
    boundary (CCW), the others are holes (CW).
    """

    points: np.ndarray
    triangles: np.ndarray
    loops: tuple[np.ndarray, ...]
    boundary_values: np.ndarray
    h: float
    shape: str = "polygon"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        tri = np.asarray(self.triangles, np.int64)
        p = pts[tri]
        det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        if np.any(det <= 0):
            raise ValueError("inverted or degenerate triangle in domain mesh")
        bv = np.asarray(self.boundary_values, float)
        if bv.shape != (len(pts),):
            raise ValueError("boundary_values must have one entry per vertex")
        for a in (pts, tri, bv):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "triangles", tri)
        object.__setattr__(self, "boundary_values", bv)
        object.__setattr__(self, "loops", tuple(np.asarray(l, np.int64) for l in self.loops))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(len(self.points), dtype=bool)
        for l in self.loops:
            m[l] = True
        return m

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def area(self) -> float:
        p = self.points[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return float(0.5 * np.sum(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]))

    @cached_property
    def centroid(self) -> np.ndarray:
        p = self.points[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        a = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        return (a[:, None] * p.mean(axis=1)).sum(axis=0) / a.sum()

    @property
    def has_zero_boundary_data(self) -> bool:
        return bool(np.all(self.boundary_values[self.boundary_mask] == 0.0))

    @property
    def constant_boundary_value(self) -> float | None:
        b = self.boundary_values[self.boundary_mask]
        return float(b[0]) if np.all(b == b[0]) else None

    def loop_points(self) -> list[np.ndarray]:
        return [self.points[l] for l in self.loops]

    def contains(self, xy: np.ndarray, radius: float = 0.0) -> np.ndarray:
        """Point-in-domain test against the boundary polygons (holes excluded)."""
        xy = np.atleast_2d(xy)
        loops = self.loop_points()
        inside = MplPath(loops[0]).contains_points(xy, radius=radius)
        for hole in loops[1:]:
            inside &= ~MplPath(hole).contains_points(xy, radius=-radius)
        return inside

    def planar_boundary(self, z: float = 0.0) -> PlanarBoundary:
        """The lifted boundary curves, as polylines in the horizontal plane ``z``."""
        curves = [self.points[l] for l in self.loops]
        heights = [self.boundary_values[l] for l in self.loops]
        return PlanarBoundary.horizontal(curves, z=z, boundary_height=heights, check_simple=False)

    def with_boundary_values(self, values) -> "DomainMesh":
        return DomainMesh(self.points, self.triangles, self.loops, _boundary_array(self, values),
                          self.h, self.shape, dict(self.params))


def _boundary_array(dom_like, values) -> np.ndarray:
    pts = dom_like.points
    n = len(pts)
    out = np.zeros(n)
    mask = np.zeros(n, dtype=bool)
    for l in dom_like.loops:
        mask[l] = True
    if values is None:
        return out
    if callable(values):
        out[mask] = np.asarray(values(pts[mask, 0], pts[mask, 1]), float)
    elif np.isscalar(values):
        out[mask] = float(values)
    else:
        arr = np.asarray(values, float).reshape(-1)
        if arr.shape[0] == n:
            out[mask] = arr[mask]
        else:
            order = np.concatenate(dom_like.loops)
            if arr.shape[0] != len(order):
                raise ValueError(f"expected {len(order)} boundary heights, got {arr.shape[0]}")
            out[order] = arr
    return out


def fourier_boundary(cos: Sequence[float] = (), sin: Sequence[float] = (), center=(0.0, 0.0)) -> Callable:
    """Height ``a0 + sum a_k cos(k t) + sum b_k sin(k t)``, ``t`` the polar angle about ``center``.

    ``cos[0]`` is the constant term; ``sin[k-1]`` multiplies ``sin(k t)``.
    """
    cos = list(cos)
    sin = list(sin)

    def f(x, y):
        t = np.arctan2(np.asarray(y) - center[1], np.asarray(x) - center[0])
        val = np.full(np.shape(t), cos[0] if cos else 0.0)
        for k, a in enumerate(cos[1:], 1):
            val = val + a * np.cos(k * t)
        for k, b in enumerate(sin, 1):
            val = val + b * np.sin(k * t)
        return val

    return f


# -- generators ----------------------------------------------------------

def _resample_closed(curve: Callable[[np.ndarray], np.ndarray], h: float, n_fine: int = 4096) -> np.ndarray:
    """Points along a closed parametric curve at (nearly) uniform arc-length spacing ``h``."""
    s = np.linspace(0.0, 1.0, n_fine + 1)
    p = curve(s)
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    arclen = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(8, int(round(arclen[-1] / h)))
    target = np.linspace(0.0, arclen[-1], n + 1)[:-1]
    return curve(np.interp(target, arclen, s))


def _resample_polygon(vertices: np.ndarray, h: float) -> np.ndarray:
    out = []
    for a, b in zip(vertices, np.roll(vertices, -1, axis=0)):
        k = max(1, int(round(np.linalg.norm(b - a) / h)))
        out.extend(a + (b - a) * (np.arange(k) / k)[:, None])
    return np.array(out)


def _seg_distance(points: np.ndarray, loops: list[np.ndarray]) -> np.ndarray:
    d = np.full(len(points), np.inf)
    for loop in loops:
        a = loop
        b = np.roll(loop, -1, axis=0)
        ab = b - a
        for k in range(len(a)):
            ap = points - a[k]
            t = np.clip(ap @ ab[k] / (ab[k] @ ab[k]), 0.0, 1.0)
            d = np.minimum(d, np.linalg.norm(ap - t[:, None] * ab[k], axis=1))
    return d


def triangulate(loops: list[np.ndarray], h: float, *, jitter: float = 0.0, seed: int = 0,
                smooth_iters: int = 8) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Delaunay triangulation of a polygonal region at target edge length ``h``.

    ``loops[0]`` is the outer boundary, the rest are holes. Interior points
    come from a hexagonal lattice, optionally jittered by ``jitter * h``
    with a seeded generator, then relaxed by a few Laplacian passes.
    """
    outer = loops[0]
    if polygon_signed_area(outer) < 0:
        outer = outer[::-1]
    holes = [l if polygon_signed_area(l) < 0 else l[::-1] for l in loops[1:]]
    loops = [outer] + holes
    bpts = np.concatenate(loops)
    lo, hi = outer.min(axis=0), outer.max(axis=0)
    dy = h * np.sqrt(3) / 2
    ys = np.arange(lo[1] + dy / 2, hi[1], dy)
    cand = []
    for k, y in enumerate(ys):
        xs = np.arange(lo[0] + (0.5 * h if k % 2 else 0.0), hi[0], h)
        cand.append(np.column_stack([xs, np.full(len(xs), y)]))
    cand = np.concatenate(cand) if cand else np.zeros((0, 2))
    if jitter > 0:
        rng = np.random.default_rng(seed)
        cand = cand + jitter * h * rng.uniform(-1.0, 1.0, cand.shape)
    inside = MplPath(outer).contains_points(cand)
    for hole in holes:
        inside &= ~MplPath(hole).contains_points(cand)
    cand = cand[inside]
    cand = cand[_seg_distance(cand, loops) > 0.55 * h]
    pts = np.concatenate([bpts, cand])
    nb = len(bpts)

    def build(pts):
        tri = Delaunay(pts).simplices
        c = pts[tri].mean(axis=1)
        keep = MplPath(outer).contains_points(c)
        for hole in holes:
            keep &= ~MplPath(hole).contains_points(c)
        tri = tri[keep]
        p = pts[tri]
        det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        tri = np.where((det < 0)[:, None], tri[:, ::-1], tri)
        return tri

    tri = build(pts)
    for _ in range(smooth_iters):
        nbr_sum = np.zeros_like(pts)
        cnt = np.zeros(len(pts))
        for a, b in ((0, 1), (1, 2), (2, 0)):
            np.add.at(nbr_sum, tri[:, a], pts[tri[:, b]])
            np.add.at(nbr_sum, tri[:, b], pts[tri[:, a]])
            np.add.at(cnt, tri[:, a], 1)
            np.add.at(cnt, tri[:, b], 1)
        new = pts.copy()
        new[nb:] = 0.5 * pts[nb:] + 0.5 * nbr_sum[nb:] / cnt[nb:, None]
        pts = new
        tri = build(pts)
    used = np.zeros(len(pts), dtype=bool)
    used[tri.ravel()] = True
    if not np.all(used[:nb]):
        raise ValueError("triangulation dropped boundary points; refine h")
    if not np.all(used):
        remap = -np.ones(len(pts), dtype=np.int64)
        remap[used] = np.arange(used.sum())
        pts, tri = pts[used], remap[tri]
    starts = np.cumsum([0] + [len(l) for l in loops])
    loop_idx = [np.arange(starts[k], starts[k + 1]) for k in range(len(loops))]
    return pts, tri, loop_idx


def _finish(pts, tri, loops, h, boundary_height, shape, params) -> DomainMesh:
    tmp = DomainMesh(pts, tri, tuple(loops), np.zeros(len(pts)), h, shape, params)
    return tmp.with_boundary_values(boundary_height)


def disk_domain(radius: float = 1.0, h: float = 0.05, boundary_height=0.0, center=(0.0, 0.0),
                method: str = "delaunay", seed: int = 0, jitter: float = 0.0) -> DomainMesh:
    """Disk triangulation; ``method='rings'`` gives the concentric hexagonal mesh."""
    c = np.asarray(center, float)
    params = {"radius": radius, "center": list(map(float, c)), "method": method}
    if method == "rings":
        n_rings = max(1, int(round(radius / h)))
        pts, tri = concentric_disk(n_rings, radius)
        pts = pts + c
        nb = 6 * n_rings
        loop = np.arange(len(pts) - nb, len(pts))
        return _finish(pts, tri, [loop], h, boundary_height, "disk", params)
    circle = lambda s: c + radius * np.column_stack([np.cos(2 * np.pi * s), np.sin(2 * np.pi * s)])  # noqa: E731
    loop = _resample_closed(circle, h)
    pts, tri, loops = triangulate([loop], h, jitter=jitter, seed=seed)
    return _finish(pts, tri, loops, h, boundary_height, "disk", params)


def ellipse_domain(a: float = 1.0, b: float = 0.5, h: float = 0.05, boundary_height=0.0,
                   seed: int = 0, jitter: float = 0.0) -> DomainMesh:
    ell = lambda s: np.column_stack([a * np.cos(2 * np.pi * s), b * np.sin(2 * np.pi * s)])  # noqa: E731
    loop = _resample_closed(ell, h)
    pts, tri, loops = triangulate([loop], h, jitter=jitter, seed=seed)
    return _finish(pts, tri, loops, h, boundary_height, "ellipse", {"a": a, "b": b})


def annulus_domain(inner_radius: float = 0.5, outer_radius: float = 1.0, h: float = 0.05,
                   boundary_height=0.0, seed: int = 0, jitter: float = 0.0) -> DomainMesh:
    if not 0 < inner_radius < outer_radius:
        raise ValueError("annulus needs 0 < inner_radius < outer_radius")
    circ = lambda r: (lambda s: r * np.column_stack([np.cos(2 * np.pi * s), np.sin(2 * np.pi * s)]))  # noqa: E731
    outer = _resample_closed(circ(outer_radius), h)
    inner = _resample_closed(circ(inner_radius), h)[::-1]
    pts, tri, loops = triangulate([outer, inner], h, jitter=jitter, seed=seed)
    return _finish(pts, tri, loops, h, boundary_height, "annulus",
                   {"inner_radius": inner_radius, "outer_radius": outer_radius})


def polygon_domain(vertices, h: float = 0.05, boundary_height=0.0, seed: int = 0, jitter: float = 0.0) -> DomainMesh:
    v = np.asarray(vertices, float).reshape(-1, 2)
    if polygon_signed_area(v) < 0:
        v = v[::-1]
    loop = _resample_polygon(v, h)
    pts, tri, loops = triangulate([loop], h, jitter=jitter, seed=seed)
    return _finish(pts, tri, loops, h, boundary_height, "polygon", {"vertices": v.tolist()})


def make_domain(spec: dict, seed: int = 0) -> DomainMesh:
    """Build a domain from a JSON-style spec ``{"shape": ..., "h": ..., ...}``."""
    spec = dict(spec)
    shape = spec.pop("shape")
    h = float(spec.pop("h", 0.05))
    bh = spec.pop("boundary_height", 0.0)
    jitter = float(spec.pop("jitter", 0.0))
    if isinstance(bh, dict):
        bh = fourier_boundary(cos=bh.get("cos", ()), sin=bh.get("sin", ()), center=spec.get("center", (0.0, 0.0)))
    if shape == "disk":
        return disk_domain(spec.pop("radius", 1.0), h, bh, center=spec.pop("center", (0.0, 0.0)),
                           method=spec.pop("method", "delaunay"), seed=seed, jitter=jitter)
    if shape == "ellipse":
        return ellipse_domain(spec.pop("a", 1.0), spec.pop("b", 0.5), h, bh, seed=seed, jitter=jitter)
    if shape == "annulus":
        return annulus_domain(spec.pop("inner_radius", 0.5), spec.pop("outer_radius", 1.0), h, bh,
                              seed=seed, jitter=jitter)
    if shape == "polygon":
        return polygon_domain(spec.pop("vertices"), h, bh, seed=seed, jitter=jitter)
    raise ValueError(f"unknown domain shape {shape!r}")


def nearest_vertex(domain: DomainMesh, xy) -> int:
    return int(cKDTree(domain.points).query(np.asarray(xy, float))[1])
