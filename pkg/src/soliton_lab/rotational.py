"""Rotationally symmetric graph solitons about an axis parallel to e3.

In polar form the graph equation reads

    (r p / W)' / r = 2 lambda + 1 / W,   p = u',  W = sqrt(1 + p^2),

which as a first-order system is

    u' = p,
    p' = W^3 (2 lambda + 1/W) - W^2 p / r.

Smoothness at the axis forces ``p(0) = 0`` and ``u''(0) = lambda + 1/2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .mesh import TriMesh

BLOWUP = 1e8
SERIES_STEPS = 10


@dataclass(frozen=True, eq=False)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    p: np.ndarray
    lam: float
    step: float
    r_max: float
    complete: bool = True

    @property
    def existence_radius(self) -> float:
        """Largest radius reached before ``|u'|`` blew up (``r_max`` when complete)."""
        return float(self.r[-1])

    def spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.r, self.u, self.p)

    def __call__(self, r) -> np.ndarray:
        return self.spline()(r)

    def rebased(self, r_edge: float | None = None) -> "RadialProfile":
        """Shift so that ``u(r_edge) = 0`` (default: the last sample)."""
        edge = self.r[-1] if r_edge is None else r_edge
        shift = float(self(edge)) if r_edge is not None else float(self.u[-1])
        return RadialProfile(self.r, self.u - shift, self.p, self.lam, self.step, self.r_max, self.complete)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "u", "du"])
            for row in zip(self.r.tolist(), self.u.tolist(), self.p.tolist()):
                w.writerow([repr(x) for x in row])


def _series(lam: float, r: float) -> tuple[float, float]:
    c = lam + 0.5
    d = 0.5 * c**3 - c**2 / 8.0
    return 0.5 * c * r**2 + 0.25 * d * r**4, c * r + d * r**3


def _rhs(lam: float, r: float, y: np.ndarray) -> np.ndarray:
    p = y[1]
    with np.errstate(over="ignore", invalid="ignore"):
        W2 = 1.0 + p * p
        W = np.sqrt(W2)
        return np.array([p, W2 * W * (2.0 * lam + 1.0 / W) - W2 * p / r])


def solve_rotational(lam: float, r_max: float = 1.0, step: float = 1e-3) -> RadialProfile:
    """Classical RK4 from the axis, with a series start over the first steps.

    The profile is normalised by ``u(0) = 0``. If ``|u'|`` exceeds 1e8 the
    integration stops and ``complete`` is False; ``existence_radius`` then
    reports how far the graph extends.
    """
    if r_max <= 0 or step <= 0:
        raise ValueError("r_max and step must be positive")
    n = int(np.ceil(r_max / step - 1e-9))
    rs = np.linspace(0.0, r_max, n + 1)
    h = rs[1] - rs[0]
    u = np.zeros(n + 1)
    p = np.zeros(n + 1)
    k0 = min(SERIES_STEPS, n)
    for k in range(1, k0 + 1):
        u[k], p[k] = _series(lam, rs[k])
    y = np.array([u[k0], p[k0]])
    last = k0
    complete = True
    for k in range(k0, n):
        r = rs[k]
        k1 = _rhs(lam, r, y)
        k2 = _rhs(lam, r + h / 2, y + h / 2 * k1)
        k3 = _rhs(lam, r + h / 2, y + h / 2 * k2)
        k4 = _rhs(lam, r + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or abs(y[1]) > BLOWUP:
            complete = False
            break
        u[k + 1], p[k + 1] = y
        last = k + 1
    return RadialProfile(rs[: last + 1], u[: last + 1], p[: last + 1], float(lam), h, float(r_max), complete)


def rotational_to_mesh(profile: RadialProfile, n_angular: int = 96) -> TriMesh:
    """Surface of revolution over the disk of radius ``profile.r[-1]``.

    Uses concentric rings with ``6k`` points on ring ``k`` and ``n_angular``
    (rounded to a multiple of 6) on the outer ring; upward orientation.
    """
    if n_angular < 8:
        raise ValueError("n_angular must be at least 8")
    from .shapes import concentric_disk

    n_rings = max(2, int(round(n_angular / 6)))
    R = float(profile.r[-1])
    xy, tris = concentric_disk(n_rings, R)
    rho = np.linalg.norm(xy, axis=1)
    z = profile.spline()(np.minimum(rho, R))
    return TriMesh(np.column_stack([xy, z]), tris)
