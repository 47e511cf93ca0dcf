"""Independent reference implementations used only by the tests.

None of these call into orbitplan; they are written from the textbook
formulas so that agreement is evidence, not tautology.
"""

import math

import numpy as np

MU = 398600.4418
R_EARTH = 6371.0
J2_TILDE = 1.08263e-3
J2 = 1.08263e-3
J3 = -2.53215e-6
SSO_RATE = 1.991063802746144e-7


def perifocal_state(a, e, inc, raan, argp, nu, mu=MU):
    """Position/velocity from elements via the perifocal frame and three explicit rotations."""
    p = a * (1.0 - e * e)
    r_pf = p / (1.0 + e * math.cos(nu)) * np.array([math.cos(nu), math.sin(nu), 0.0])
    v_pf = math.sqrt(mu / p) * np.array([-math.sin(nu), e + math.cos(nu), 0.0])

    def rz(t):
        c, s = math.cos(t), math.sin(t)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def rx(t):
        c, s = math.cos(t), math.sin(t)
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])

    rot = rz(raan) @ rx(inc) @ rz(argp)
    return rot @ r_pf, rot @ v_pf


def _stumpff(z):
    if z > 1e-8:
        s = math.sqrt(z)
        return (1.0 - math.cos(s)) / z, (s - math.sin(s)) / s ** 3
    if z < -1e-8:
        s = math.sqrt(-z)
        return (math.cosh(s) - 1.0) / (-z), (math.sinh(s) - s) / s ** 3
    return 0.5 - z / 24.0, 1.0 / 6.0 - z / 120.0


def kepler_universal(r0, v0, dt, mu=MU, tol=1e-13):
    """Analytic two-body propagation with the universal variable and Lagrange coefficients."""
    r0 = np.asarray(r0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    rn = np.linalg.norm(r0)
    vr = r0 @ v0 / rn
    alpha = 2.0 / rn - v0 @ v0 / mu
    sqmu = math.sqrt(mu)
    chi = sqmu * abs(alpha) * dt
    for _ in range(100):
        z = alpha * chi * chi
        c, s = _stumpff(z)
        f = (rn * vr / sqmu * chi * chi * c + (1.0 - alpha * rn) * chi ** 3 * s
             + rn * chi - sqmu * dt)
        df = (rn * vr / sqmu * chi * (1.0 - z * s) + (1.0 - alpha * rn) * chi * chi * c + rn)
        step = f / df
        chi -= step
        if abs(step) < tol * max(1.0, abs(chi)):
            break
    z = alpha * chi * chi
    c, s = _stumpff(z)
    f = 1.0 - chi * chi / rn * c
    g = dt - chi ** 3 / sqmu * s
    r = f * r0 + g * v0
    r1 = np.linalg.norm(r)
    fdot = sqmu / (r1 * rn) * (alpha * chi ** 3 * s - chi)
    gdot = 1.0 - chi * chi / r1 * c
    return r, fdot * r0 + gdot * v0


def sso_rate(a, e, inc):
    p = a * (1.0 - e * e)
    return -1.5 * J2_TILDE * (R_EARTH / p) ** 2 * math.sqrt(MU / a ** 3) * math.cos(inc)


def sso_inclination_bisection(a, e, target=SSO_RATE, tol=1e-13):
    """Plain bisection on [pi/2, pi], where the rate rises from 0 to its maximum."""
    lo, hi = math.pi / 2, math.pi
    if sso_rate(a, e, hi) < target:
        raise ValueError("no sun-synchronous inclination at this altitude")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sso_rate(a, e, mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def frozen_fixed_point(a, inc, tol=1e-12, max_iter=50):
    """Iterate the implicit frozen-eccentricity relation from zero; returns (e, iterations)."""
    e = 0.0
    for k in range(1, max_iter + 1):
        new = -(J2 / J3) * math.sin(inc) / (2.0 * a * (1.0 - e * e))
        if abs(new - e) < tol:
            return new, k
        e = new
    raise RuntimeError("fixed point did not converge")


def jsum_loops(q):
    """Triple-loop reduction of a (n, m, N, L) tensor over agents and samples."""
    n, m, N, L = q.shape
    out = np.zeros((n, L))
    for i in range(n):
        for l in range(L):
            total = 0.0
            for j in range(m):
                for k in range(N):
                    total += q[i, j, k, l]
            out[i, l] = total
    return out


def circle_segment_clearance(p, q):
    """Closest distance from the origin to segment pq by dense parametric sampling."""
    t = np.linspace(0.0, 1.0, 200001)[:, None]
    pts = (1.0 - t) * np.asarray(p, float) + t * np.asarray(q, float)
    return float(np.linalg.norm(pts, axis=1).min())
