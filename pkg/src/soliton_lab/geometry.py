"""Discrete differential geometry on oriented triangle meshes.

Sign conventions: ``H = (k1 + k2) / 2`` with respect to the mesh
orientation, so that the Laplace-Beltrami operator of the position is
``2 H N``. The outward unit sphere has ``H = -1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import E3, DensityFrame, EmptyBoundaryError, TriMesh


def _cotangents(mesh: TriMesh) -> np.ndarray:
    """Cotangent of the angle at each corner, shape (n_tri, 3)."""
    p = mesh.vertices[mesh.triangles]
    cots = np.empty((len(p), 3))
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cots[:, k] = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
    return cots


def cotan_laplacian(mesh: TriMesh) -> sparse.csr_matrix:
    """Stiffness-type matrix ``L`` with ``(L x)_i = 1/2 sum_j (cot a + cot b)(x_j - x_i)``."""
    t = mesh.triangles
    cots = _cotangents(mesh)
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j = t[:, (k + 1) % 3], t[:, (k + 2) % 3]
        w = 0.5 * cots[:, k]
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    n = len(mesh.vertices)
    W = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return W - sparse.diags(np.asarray(W.sum(axis=1)).ravel())


def mixed_vertex_areas(mesh: TriMesh) -> np.ndarray:
    """Mixed Voronoi/barycentric vertex areas (Voronoi for non-obtuse triangles)."""
    p = mesh.vertices[mesh.triangles]
    t = mesh.triangles
    area = mesh.face_areas
    cots = _cotangents(mesh)
    l2 = np.stack([np.sum((p[:, (k + 2) % 3] - p[:, (k + 1) % 3]) ** 2, axis=1) for k in range(3)], axis=1)
    obtuse = cots < 0
    any_obtuse = obtuse.any(axis=1)
    out = np.zeros(len(mesh.vertices))
    for k in range(3):
        # Voronoi share of corner k: edges (k,k+1) and (k,k+2), opposite angles k+2 and k+1
        vor = (l2[:, (k + 2) % 3] * cots[:, (k + 2) % 3] + l2[:, (k + 1) % 3] * cots[:, (k + 1) % 3]) / 8.0
        share = np.where(any_obtuse, np.where(obtuse[:, k], area / 2.0, area / 4.0), vor)
        np.add.at(out, t[:, k], share)
    return out


def barycentric_vertex_areas(mesh: TriMesh) -> np.ndarray:
    out = np.zeros(len(mesh.vertices))
    for k in range(3):
        np.add.at(out, mesh.triangles[:, k], mesh.face_areas / 3.0)
    return out


def vertex_areas(mesh: TriMesh) -> np.ndarray:
    """Vertex areas according to ``mesh.lumping``."""
    if mesh.lumping == "barycentric":
        return barycentric_vertex_areas(mesh)
    return mixed_vertex_areas(mesh)


def mean_curvature_vector(mesh: TriMesh) -> np.ndarray:
    """Pointwise ``2 H N`` estimate: cotangent Laplacian of position over vertex area."""
    L = cotan_laplacian(mesh)
    return (L @ mesh.vertices) / vertex_areas(mesh)[:, None]


def mean_curvature(mesh: TriMesh) -> np.ndarray:
    """Per-vertex mean curvature ``H``; boundary vertices are ``nan`` (unreliable)."""
    hn = mean_curvature_vector(mesh)
    H = 0.5 * np.einsum("ij,ij->i", hn, mesh.vertex_normals)
    H[mesh.boundary_vertices] = np.nan
    return H


def soliton_residual(mesh: TriMesh, frame: DensityFrame) -> np.ndarray:
    """``H - lambda - <N, v>/2`` per vertex; ``nan`` on boundary vertices."""
    return mean_curvature(mesh) - frame.lam - 0.5 * (mesh.vertex_normals @ frame.v)


def estimate_lambda(mesh: TriMesh, v=E3) -> float:
    """Median over interior vertices of ``H - <N, v>/2``: the lambda a soliton mesh realises."""
    vals = mean_curvature(mesh) - 0.5 * (mesh.vertex_normals @ np.asarray(v, float))
    return float(np.nanmedian(vals))


def sup_norm(field: np.ndarray) -> float:
    """Max of ``|field|`` over the reliable (non-nan) entries."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(np.nanmax(np.abs(field)))


def flux(mesh: TriMesh, v) -> float:
    """Exact ``integral <N, v> dA`` over the piecewise-flat surface."""
    return float(np.sum(mesh.face_normals @ np.asarray(v, float) * mesh.face_areas))


def normal_square_integral(mesh: TriMesh, v) -> float:
    """``integral <N, v>^2 dA``, exact per flat triangle."""
    return float(np.sum((mesh.face_normals @ np.asarray(v, float)) ** 2 * mesh.face_areas))


def inward_conormals(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Unit inward conormal and length of every boundary edge.

    The conormal lies in the plane of the boundary triangle, is
    perpendicular to the edge and points into that triangle.
    """
    if mesh.is_closed:
        raise EmptyBoundaryError("closed mesh has no boundary")
    be = mesh.boundary_edges
    n = len(mesh.vertices)
    t = mesh.triangles
    lookup = {}
    for k in range(3):
        for f, (i, j) in enumerate(zip(t[:, k], t[:, (k + 1) % 3])):
            lookup[int(i) * n + int(j)] = f
    faces = np.array([lookup[int(i) * n + int(j)] for i, j in be])
    e = mesh.vertices[be[:, 1]] - mesh.vertices[be[:, 0]]
    length = np.linalg.norm(e, axis=1)
    # for CCW winding, N x e points into the triangle
    nu = np.cross(mesh.face_normals[faces], e / length[:, None])
    return nu, length


def conormal_height_integral(mesh: TriMesh, v) -> float:
    """``integral over the boundary of <nu, v> ds`` with ``nu`` the inward conormal."""
    nu, length = inward_conormals(mesh)
    return float(np.sum(nu @ np.asarray(v, float) * length))


def weighted_area(mesh: TriMesh, v) -> float:
    """Area with density ``exp(<p, v>)`` (centroid rule per triangle)."""
    w = np.exp(mesh.face_centroids @ np.asarray(v, float))
    return float(np.sum(w * mesh.face_areas))


def first_variation_check(mesh: TriMesh, frame: DensityFrame, variation, step: float = 1e-5) -> tuple[float, float]:
    """Central-difference derivative of the weighted area vs. ``-2 int H_phi <N, xi> dA_phi``.

    ``variation`` is the normal speed per vertex; it must vanish on the boundary.
    """
    xi = np.asarray(variation, dtype=float).reshape(-1)
    if xi.shape[0] != len(mesh.vertices):
        raise ValueError("variation needs one value per vertex")
    if np.any(xi[mesh.boundary_vertices] != 0):
        raise ValueError("variation must vanish on boundary vertices")
    if not np.any(xi):
        return 0.0, 0.0
    N = mesh.vertex_normals
    disp = xi[:, None] * N

    def moved(s):
        return TriMesh(mesh.vertices + s * disp, mesh.triangles, check=False, lumping=mesh.lumping)

    fd = (weighted_area(moved(step), frame.v) - weighted_area(moved(-step), frame.v)) / (2 * step)
    H = mean_curvature(mesh)
    h_phi = np.where(mesh.boundary_vertices, 0.0, H) - 0.5 * (N @ frame.v)
    dens = np.exp(mesh.vertices @ frame.v)
    analytic = -2.0 * float(np.sum(h_phi * xi * dens * vertex_areas(mesh)))
    return float(fd), analytic


# -- coarea slicing of graphs ------------------------------------------

class DegenerateSlicingWarning(UserWarning):
    """The height function is constant; there is nothing to slice."""


@dataclass(frozen=True)
class SliceData:
    """Level-set measurements of the height of a graph surface.

    ``cumulative_area[k]`` is the surface area of ``{u <= levels[k]}``,
    ``region_area[k]`` the planar area of the same set, ``lengths[k]`` the
    length of the level curve and ``coarea_density[k]`` the integral of
    ``1 / |grad g|`` along it (``g`` the height restricted to the surface).
    """

    levels: np.ndarray
    lengths: np.ndarray
    region_area: np.ndarray
    cumulative_area: np.ndarray
    coarea_density: np.ndarray
    total_area: float
    domain_area: float
    degenerate: bool = False

    def area_derivative(self) -> np.ndarray:
        """Central differences of ``cumulative_area`` at interior levels."""
        A, t = self.cumulative_area, self.levels
        return (A[2:] - A[:-2]) / (t[2:] - t[:-2])


def _clip_below(planar: np.ndarray, p: np.ndarray, z: np.ndarray, level: float):
    """Clip planar triangles to ``{u <= level}``; return per-triangle (area, level-segment length)."""
    below = z <= level
    nb = below.sum(axis=1)
    area = np.where(nb == 3, planar, 0.0)
    seg = np.zeros(len(z))
    cut = np.flatnonzero((nb == 1) | (nb == 2))
    if len(cut):
        b = below[cut]
        # the vertex alone on its side of the level
        lone = np.where(nb[cut] == 1, np.argmax(b, axis=1), np.argmax(~b, axis=1))
        r = np.arange(len(cut))
        o1, o2 = (lone + 1) % 3, (lone + 2) % 3
        zc = z[cut]
        s1 = (level - zc[r, lone]) / (zc[r, o1] - zc[r, lone])
        s2 = (level - zc[r, lone]) / (zc[r, o2] - zc[r, lone])
        pc = p[cut]
        q1 = pc[r, lone] + s1[:, None] * (pc[r, o1] - pc[r, lone])
        q2 = pc[r, lone] + s2[:, None] * (pc[r, o2] - pc[r, lone])
        corner = s1 * s2 * planar[cut]
        area[cut] = np.where(nb[cut] == 1, corner, planar[cut] - corner)
        seg[cut] = np.linalg.norm(q2 - q1, axis=1)
    return area, seg


def coarea_slices(sol, n_levels: int) -> SliceData:
    """Slice the lifted graph of ``sol.u`` over ``sol.domain`` at uniform heights."""
    if n_levels < 2:
        raise ValueError("n_levels must be at least 2")
    xy = np.asarray(sol.domain.points, float)
    tri = np.asarray(sol.domain.triangles)
    u = np.asarray(sol.u, float)
    p = xy[tri]
    zt = u[tri]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    planar = 0.5 * np.abs(det)
    du1, du2 = zt[:, 1] - zt[:, 0], zt[:, 2] - zt[:, 0]
    gx = (du1 * e2[:, 1] - du2 * e1[:, 1]) / det
    gy = (du2 * e1[:, 0] - du1 * e2[:, 0]) / det
    grad2 = gx**2 + gy**2
    stretch = np.sqrt(1.0 + grad2)
    total = float(np.sum(planar * stretch))
    dom_area = float(planar.sum())
    lo, hi = float(u.min()), float(u.max())
    if hi - lo <= 1e-14 * max(1.0, abs(hi)):
        warnings.warn("constant height: degenerate slicing", DegenerateSlicingWarning, stacklevel=2)
        z = np.zeros(1)
        return SliceData(np.array([lo]), z, np.array([dom_area]), np.array([total]), z.copy(),
                         total, dom_area, degenerate=True)
    levels = np.linspace(lo, hi, n_levels)
    lengths = np.zeros(n_levels)
    region = np.zeros(n_levels)
    cumul = np.zeros(n_levels)
    dens = np.zeros(n_levels)
    # |grad of height on the surface| = |Du| / sqrt(1 + |Du|^2)
    inv_surf_grad = np.where(grad2 > 0, stretch / np.sqrt(np.maximum(grad2, 1e-300)), np.inf)
    for k, t in enumerate(levels):
        a, seg = _clip_below(planar, p, zt, t)
        region[k] = a.sum()
        cumul[k] = np.sum(a * stretch)
        lengths[k] = seg.sum()
        dens[k] = np.sum(np.where(seg > 0, seg * inv_surf_grad, 0.0))
    cumul = np.maximum.accumulate(cumul)
    return SliceData(levels, lengths, region, cumul, dens, total, dom_area)
