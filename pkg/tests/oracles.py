"""Reference values computed independently of the package code paths."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import dblquad, solve_ivp


def sphere_normal_square(radius: float = 1.0) -> float:
    # int_{S^2_R} n_z^2 = R^2 int cos^2(theta) sin(theta) dtheta dphi
    return 4.0 * math.pi * radius**2 / 3.0


def torus_normal_square(major: float, minor: float) -> float:
    """Quadrature of n_z^2 dA over the parametric torus."""
    # x = (R + r cos b) (cos a, sin a), z = r sin b ; n = (cos b cos a, cos b sin a, sin b)
    val, _ = dblquad(lambda b, a: math.sin(b) ** 2 * minor * (major + minor * math.cos(b)),
                     0.0, 2 * math.pi, 0.0, 2 * math.pi, epsabs=1e-12, epsrel=1e-12)
    return val


def hemisphere_height_identity_residual(lam: float) -> float:
    """``|-int <nu,e3> ds - 2 lam int <N,e3> - int <N,e3>^2|`` on the outward upper unit hemisphere."""
    conormal = 2.0 * math.pi          # inward conormal at the equator is +e3
    flux_ = math.pi                   # projected area
    square = 2.0 * math.pi / 3.0
    return abs(-conormal - 2.0 * lam * flux_ - square)


def circle_bound(radius: float) -> float:
    return 2.0 * math.pi * radius / (2.0 * math.pi * radius**2)


def cylinder_mean_curvature(radius: float) -> float:
    # mean of principal curvatures with outward normal, convention Delta x = 2 H N
    return -0.5 / radius


def radial_profile(lam: float, r_max: float = 1.0, r0: float = 1e-6) -> tuple[float, float]:
    """(u(r_max), u'(r_max)) with u(0) = 0 from an adaptive high-order integrator."""
    c = lam + 0.5

    def rhs(r, y):
        p = y[1]
        W = math.sqrt(1.0 + p * p)
        return [p, W**3 * (2.0 * lam + 1.0 / W) - W * W * p / r]

    sol = solve_ivp(rhs, (r0, r_max), [0.5 * c * r0**2, c * r0], method="DOP853", rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def radial_profile_samples(lam: float, rs: np.ndarray, r0: float = 1e-6) -> np.ndarray:
    c = lam + 0.5

    def rhs(r, y):
        p = y[1]
        W = math.sqrt(1.0 + p * p)
        return [p, W**3 * (2.0 * lam + 1.0 / W) - W * W * p / r]

    rs = np.asarray(rs, float)
    sol = solve_ivp(rhs, (r0, float(rs.max())), [0.5 * c * r0**2, c * r0], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    out = sol.sol(np.maximum(rs, r0))[0]
    return np.where(rs < r0, 0.5 * c * rs**2, out)
