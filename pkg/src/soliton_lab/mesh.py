"""Oriented triangle meshes, density frames and planar boundary data."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])


class MeshError(ValueError):
    """Structural problem with a mesh (indices, manifoldness, winding)."""


class DegenerateGeometryError(MeshError):
    """A triangle has (numerically) zero area."""


class EmptyBoundaryError(MeshError):
    """An operation needed a boundary but the mesh is closed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class TriMesh:
    """Immutable oriented triangle mesh.

    Winding is counter-clockwise seen from the side the normal points to,
    so ``N = (b - a) x (c - a) / |...|`` for a triangle ``(a, b, c)``.

    ``lumping`` selects the vertex areas used by pointwise curvature:
    ``"mixed"`` (Voronoi, barycentric fallback on obtuse triangles) suits
    interpolated smooth surfaces; ``"barycentric"`` is the mass lumping of
    the P1 weak form and is the consistent choice on lifted finite-element
    solutions.
    """

    LUMPINGS = ("mixed", "barycentric")

    def __init__(self, vertices, triangles, *, check: bool = True, lumping: str = "mixed"):
        v = np.array(vertices, dtype=float).reshape(-1, 3)
        t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if lumping not in self.LUMPINGS:
            raise ValueError(f"lumping must be one of {self.LUMPINGS}")
        self.vertices = _frozen(v)
        self.triangles = _frozen(t)
        self.lumping = lumping
        if check:
            self._validate()

    def __repr__(self) -> str:
        return f"TriMesh(n_vertices={len(self.vertices)}, n_triangles={len(self.triangles)})"

    # -- validation -----------------------------------------------------
    def _validate(self) -> None:
        v, t = self.vertices, self.triangles
        if len(t) == 0:
            raise MeshError("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshError("triangle index out of range")
        if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]) or np.any(t[:, 0] == t[:, 2]):
            raise MeshError("triangle with repeated vertex")
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinates")

        directed = self._directed_edges()
        keys = directed[:, 0] * len(v) + directed[:, 1]
        uniq, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 1):
            # a directed edge used twice means inconsistent winding or a non-manifold edge
            undirected = np.sort(directed, axis=1)
            _, ucounts = np.unique(undirected[:, 0] * len(v) + undirected[:, 1], return_counts=True)
            if np.any(ucounts > 2):
                raise MeshError("non-manifold edge (shared by more than two triangles)")
            raise MeshError("inconsistent triangle winding")
        undirected = np.sort(directed, axis=1)
        _, ucounts = np.unique(undirected[:, 0] * len(v) + undirected[:, 1], return_counts=True)
        if np.any(ucounts > 2):
            raise MeshError("non-manifold edge (shared by more than two triangles)")

        scale2 = self.scale**2
        if np.any(self.face_areas <= 1e-14 * scale2):
            raise DegenerateGeometryError("degenerate triangle (area below 1e-14 x scale^2)")

    def _directed_edges(self) -> np.ndarray:
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    # -- basic geometry -------------------------------------------------
    @cached_property
    def scale(self) -> float:
        """Bounding-box diagonal."""
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    @cached_property
    def _face_cross(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return _frozen(0.5 * np.linalg.norm(self._face_cross, axis=1))

    @cached_property
    def face_normals(self) -> np.ndarray:
        return _frozen(self._face_cross / (2.0 * self.face_areas[:, None]))

    @cached_property
    def face_centroids(self) -> np.ndarray:
        return _frozen(self.vertices[self.triangles].mean(axis=1))

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident face normals."""
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.triangles[:, k], self._face_cross)
        norm = np.linalg.norm(acc, axis=1)
        norm[norm == 0] = 1.0
        return _frozen(acc / norm[:, None])

    @property
    def area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def mean_edge_length(self) -> float:
        e = np.sort(self._directed_edges(), axis=1)
        e = np.unique(e, axis=0)
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return float(np.linalg.norm(d, axis=1).mean())

    # -- topology -------------------------------------------------------
    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges ``(i, j)`` following triangle winding."""
        d = self._directed_edges()
        n = len(self.vertices)
        fwd = d[:, 0] * n + d[:, 1]
        rev = d[:, 1] * n + d[:, 0]
        mask = ~np.isin(fwd, rev)
        return _frozen(d[mask])

    @cached_property
    def boundary_loops(self) -> tuple[tuple[int, ...], ...]:
        """Ordered vertex cycles of the boundary, in winding order, longest first."""
        nxt = {int(i): int(j) for i, j in self.boundary_edges}
        if len(nxt) != len(self.boundary_edges):
            raise MeshError("boundary vertex with more than one outgoing boundary edge")
        loops = []
        seen: set[int] = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            cur = nxt[start]
            while cur != start:
                if cur in seen or cur not in nxt:
                    raise MeshError("boundary edges do not form simple cycles")
                loop.append(cur)
                seen.add(cur)
                cur = nxt[cur]
            loops.append(tuple(loop))
        loops.sort(key=lambda l: (-len(l), l[0]))
        return tuple(loops)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(len(self.vertices), dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return _frozen(mask)

    @property
    def is_closed(self) -> bool:
        return len(self.boundary_edges) == 0

    # -- derived meshes -------------------------------------------------
    def flipped(self) -> "TriMesh":
        """Same surface with the opposite orientation."""
        return TriMesh(self.vertices, self.triangles[:, ::-1], check=False, lumping=self.lumping)

    def transformed(self, matrix=None, offset=None) -> "TriMesh":
        """Apply ``x -> matrix @ x + offset``; reflections reverse winding to keep N = image of N."""
        m = np.eye(3) if matrix is None else np.asarray(matrix, dtype=float)
        b = np.zeros(3) if offset is None else np.asarray(offset, dtype=float)
        v = self.vertices @ m.T + b
        t = self.triangles if np.linalg.det(m) > 0 else self.triangles[:, ::-1]
        return TriMesh(v, t, check=False, lumping=self.lumping)


@dataclass(frozen=True)
class DensityFrame:
    """Density direction ``v`` (unit) and the constant ``lambda``."""

    v: np.ndarray = field(default_factory=lambda: E3.copy())
    lam: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"density vector must be unit length, got |v|={np.linalg.norm(v)!r}")
        object.__setattr__(self, "v", _frozen(v.copy()))
        object.__setattr__(self, "lam", float(self.lam))


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = normal / np.linalg.norm(normal)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return e1, e2


def polygon_length(points: np.ndarray) -> float:
    d = np.roll(points, -1, axis=0) - points
    return float(np.linalg.norm(d, axis=1).sum())


def polygon_signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _crossings(p, q, a, b) -> np.ndarray:
    """Proper crossings of segment ``pq`` with each segment ``a[k] b[k]``."""
    def orient(u, v, w):
        return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

    d1, d2 = orient(a, b, p), orient(a, b, q)
    d3, d4 = orient(p, q, a), orient(p, q, b)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def _is_simple(xy: np.ndarray) -> bool:
    n = len(xy)
    if n < 3:
        return False
    nxt = np.roll(xy, -1, axis=0)
    for i in range(n - 2):
        j = np.arange(i + 2, n if i else n - 1)
        if np.any(_crossings(xy[i], nxt[i], xy[j], nxt[j])):
            return False
    return True


def _curves_cross(c1: np.ndarray, c2: np.ndarray) -> bool:
    n1, n2 = np.roll(c1, -1, axis=0), np.roll(c2, -1, axis=0)
    return any(np.any(_crossings(c1[k], n1[k], c2, n2)) for k in range(len(c1)))


@dataclass(frozen=True)
class PlanarBoundary:
    """Closed polylines lying in the plane through ``plane_point`` with unit normal ``plane_normal``."""

    plane_point: np.ndarray
    plane_normal: np.ndarray
    curves: tuple[np.ndarray, ...]
    boundary_height: tuple[np.ndarray, ...] | None = None
    tol: float | None = None
    check_simple: bool = True

    def __post_init__(self):
        p0 = np.asarray(self.plane_point, dtype=float).reshape(3)
        a = np.asarray(self.plane_normal, dtype=float).reshape(3)
        if np.linalg.norm(a) == 0:
            raise ValueError("plane normal must be nonzero")
        a = a / np.linalg.norm(a)
        curves = tuple(np.asarray(c, dtype=float).reshape(-1, 3) for c in self.curves)
        if not curves:
            raise ValueError("at least one curve is required")
        allpts = np.concatenate(curves)
        diag = float(np.linalg.norm(allpts.max(axis=0) - allpts.min(axis=0))) or 1.0
        tol = 1e-9 * diag if self.tol is None else float(self.tol)
        for c in curves:
            if len(c) < 3:
                raise ValueError("a closed curve needs at least three vertices")
            off = np.abs((c - p0) @ a)
            if off.max() > tol:
                raise ValueError(f"curve vertex off the plane by {off.max():.3e}")
        object.__setattr__(self, "plane_point", _frozen(p0))
        object.__setattr__(self, "plane_normal", _frozen(a))
        object.__setattr__(self, "curves", tuple(_frozen(c) for c in curves))
        object.__setattr__(self, "tol", tol)
        if self.boundary_height is None:
            heights = tuple(_frozen(np.zeros(len(c))) for c in curves)
        else:
            heights = tuple(_frozen(np.asarray(h, dtype=float).reshape(-1)) for h in self.boundary_height)
            if [len(h) for h in heights] != [len(c) for c in curves]:
                raise ValueError("boundary_height must give one value per curve vertex")
        object.__setattr__(self, "boundary_height", heights)
        if self.check_simple:
            xy = [self.to_plane(c) for c in curves]
            for c in xy:
                if not _is_simple(c):
                    raise ValueError("boundary curve is not simple")
            for i in range(len(xy)):
                for j in range(i + 1, len(xy)):
                    if _curves_cross(xy[i], xy[j]):
                        raise ValueError("boundary curves intersect")

    @classmethod
    def horizontal(cls, curves_xy: Sequence, z: float = 0.0, **kw) -> "PlanarBoundary":
        curves = [np.column_stack([np.asarray(c, float), np.full(len(c), z)]) for c in curves_xy]
        return cls(np.array([0.0, 0.0, z]), E3, tuple(curves), **kw)

    @property
    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        return _plane_basis(self.plane_normal)

    def to_plane(self, points: np.ndarray) -> np.ndarray:
        """In-plane 2D coordinates of 3D points."""
        e1, e2 = self.basis
        d = np.asarray(points, dtype=float) - self.plane_point
        return np.column_stack([d @ e1, d @ e2])

    @property
    def lengths(self) -> list[float]:
        return [polygon_length(c) for c in self.curves]

    @property
    def areas(self) -> list[float]:
        """Area of the planar domain enclosed by each curve."""
        return [abs(polygon_signed_area(self.to_plane(c))) for c in self.curves]

    @property
    def length(self) -> float:
        return sum(self.lengths)


# -- OBJ io --------------------------------------------------------------

def write_obj(mesh: TriMesh, path: str | Path) -> None:
    """Write ``v x y z`` / ``f i j k`` (1-based, CCW = normal side)."""
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path: str | Path) -> TriMesh:
    verts, faces = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            if len(idx) < 3:
                raise MeshError(f"{path}:{lineno}: face with fewer than 3 vertices")
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            # fan-triangulate polygons
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    return TriMesh(verts, faces)
