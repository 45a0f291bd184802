"""Reference surfaces with known geometry (spheres, cylinders, tori, planar patches)."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def icosphere(level: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Subdivided icosahedron projected to the sphere, outward orientation."""
    t = (1.0 + 5.0**0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = [np.array(p, dtype=float) / np.linalg.norm(p) for p in verts]
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = v[i] + v[j]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriMesh(np.array(v) * radius + np.asarray(center, float), faces)


def concentric_disk(n_rings: int, radius: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Points and CCW triangles of a disk: a centre plus rings of 6k points.

    Ring ``k`` sits at radius ``k/n_rings``; the connectivity is that of the
    regular hexagonal lattice bent onto circles.
    """
    pts = [np.zeros(2)]
    ring_start = [0]
    for k in range(1, n_rings + 1):
        ring_start.append(len(pts))
        ang = 2 * np.pi * np.arange(6 * k) / (6 * k)
        r = radius * k / n_rings
        pts.extend(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
    pts = np.array(pts)
    tris = []
    for j in range(6):
        tris.append((0, 1 + j, 1 + (j + 1) % 6))
    for k in range(1, n_rings):
        inner, outer = ring_start[k], ring_start[k + 1]
        ni, no = 6 * k, 6 * (k + 1)
        # merge the two rings by angle, emitting triangles as in a zipper
        i = o = 0
        while i < ni or o < no:
            ai = 2 * np.pi * (i + 0.5) / ni
            ao = 2 * np.pi * (o + 0.5) / no
            if o < no and (i >= ni or ao <= ai):
                tris.append((inner + i % ni, outer + o, outer + (o + 1) % no))
                o += 1
            else:
                tris.append((inner + i % ni, outer + (o % no), inner + (i + 1) % ni))
                i += 1
    return pts, np.array(tris, dtype=np.int64)


def flat_disk(radius: float = 1.0, n_rings: int = 16, z: float = 0.0, upward: bool = True) -> TriMesh:
    xy, tris = concentric_disk(n_rings, radius)
    mesh = TriMesh(np.column_stack([xy, np.full(len(xy), z)]), tris)
    return mesh if upward else mesh.flipped()


def spherical_cap(polar_max: float, n_rings: int = 16, radius: float = 1.0, outward: bool = True) -> TriMesh:
    """Cap ``{polar angle <= polar_max}`` of a sphere centred at the origin."""
    xy, tris = concentric_disk(n_rings, 1.0)
    rho = np.linalg.norm(xy, axis=1)
    theta = rho * polar_max
    phi = np.arctan2(xy[:, 1], xy[:, 0])
    v = radius * np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    mesh = TriMesh(v, tris)
    return mesh if outward else mesh.flipped()


def hemisphere(n_rings: int = 16, radius: float = 1.0, outward: bool = True, lower: bool = False) -> TriMesh:
    """Half sphere over the equator disk in ``z = 0``."""
    mesh = spherical_cap(np.pi / 2, n_rings, radius, outward)
    if lower:
        mesh = mesh.transformed(np.diag([1.0, 1.0, -1.0]))
    return mesh


def cylinder(radius: float = 1.0, height: float = 1.0, n_around: int = 64, n_along: int | None = None,
             outward: bool = True) -> TriMesh:
    """Open cylinder about the z axis, ``0 <= z <= height``; alternate rings staggered."""
    if n_along is None:
        n_along = max(1, int(round(height / (2 * np.pi * radius / n_around * np.sqrt(3) / 2))))
    verts = []
    for j in range(n_along + 1):
        shift = 0.5 * (j % 2)
        ang = 2 * np.pi * (np.arange(n_around) + shift) / n_around
        z = height * j / n_along
        verts.extend(np.column_stack([radius * np.cos(ang), radius * np.sin(ang), np.full(n_around, z)]))
    tris = []
    for j in range(n_along):
        b, t = j * n_around, (j + 1) * n_around
        for i in range(n_around):
            i1 = (i + 1) % n_around
            if j % 2 == 0:
                tris.append((b + i, b + i1, t + i))
                tris.append((b + i1, t + i1, t + i))
            else:
                tris.append((b + i, b + i1, t + i1))
                tris.append((b + i, t + i1, t + i))
    mesh = TriMesh(verts, tris)
    return mesh if outward else mesh.flipped()


def torus(major: float = 2.0, minor: float = 0.5, n_major: int = 96, n_minor: int = 32) -> TriMesh:
    """Torus about the z axis, outward orientation."""
    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    u = 2 * np.pi * i / n_major
    w = 2 * np.pi * j / n_minor
    x = (major + minor * np.cos(w)) * np.cos(u)
    y = (major + minor * np.cos(w)) * np.sin(u)
    z = minor * np.sin(w)
    verts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    idx = lambda a, b: (a % n_major) * n_minor + (b % n_minor)  # noqa: E731
    tris = []
    for a in range(n_major):
        for b in range(n_minor):
            tris.append((idx(a, b), idx(a + 1, b), idx(a + 1, b + 1)))
            tris.append((idx(a, b), idx(a + 1, b + 1), idx(a, b + 1)))
    return TriMesh(verts, tris)


def square_patch(n: int = 8, z: float = 0.0) -> TriMesh:
    """Unit square ``[0,1]^2`` at height ``z``, normal +e3."""
    g = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(g, g, indexing="ij")
    verts = np.column_stack([x.ravel(), y.ravel(), np.full(x.size, z)])
    tris = []
    for a in range(n):
        for b in range(n):
            p = a * (n + 1) + b
            tris.append((p, p + n + 1, p + n + 2))
            tris.append((p, p + n + 2, p + 1))
    return TriMesh(verts, tris)


def vertical_square(n: int = 8) -> TriMesh:
    """Unit square in the plane ``y = 0`` spanning ``z`` in ``[0, 1]``, normal -e2."""
    flat = square_patch(n)
    v = flat.vertices[:, [0, 2, 1]]
    return TriMesh(v, flat.triangles)
