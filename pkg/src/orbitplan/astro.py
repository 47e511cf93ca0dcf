"""Two-body dynamics, Keplerian element algebra and orbit design closed forms.

Units are km, s and rad throughout. Propagation uses a fixed-step RK4
integrator; the unperturbed path runs in a compiled kernel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numba
import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * math.pi
_DEGENERATE = 1e-10


class PropagationError(RuntimeError):
    """Raised when integration produces a non-finite state."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class InfeasibleOrbitError(ValueError):
    pass


@dataclass(frozen=True)
class Constants:
    mu: float = 398600.4418          # km^3/s^2
    r_earth: float = 6371.0          # km
    j2_tilde: float = 1.08263e-3     # used by the nodal precession rate
    j2: float = 1.08263e-3           # used by the frozen-orbit relation
    j3: float = -2.53215e-6
    sso_rate: float = 1.991063802746144e-7  # rad/s

    def __post_init__(self):
        for name in ("mu", "r_earth", "j2_tilde", "j2", "j3", "sso_rate"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"constant {name} must be finite, got {value}")
        if self.mu <= 0 or self.r_earth <= 0 or self.j2_tilde <= 0:
            raise ValueError("mu, r_earth and j2_tilde must be positive")


EARTH = Constants()


@dataclass(frozen=True)
class KeplerianElements:
    """Classical elements; angles in radians.

    ``raan``, ``argp`` and ``nu`` are wrapped into [0, 2*pi) on construction.
    """

    a: float
    e: float
    inc: float
    raan: float
    argp: float
    nu: float

    def __post_init__(self):
        values = (self.a, self.e, self.inc, self.raan, self.argp, self.nu)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite orbital element in {values}")
        if self.a <= 0:
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must lie in [0, 1), got {self.e}")
        if not 0.0 <= self.inc <= math.pi:
            raise ValueError(f"inclination must lie in [0, pi], got {self.inc}")
        for name in ("raan", "argp", "nu"):
            object.__setattr__(self, name, wrap_angle(getattr(self, name)))

    @classmethod
    def from_degrees(cls, a, e, inc_deg, raan_deg, argp_deg, nu_deg) -> "KeplerianElements":
        return cls(a, e, math.radians(inc_deg), math.radians(raan_deg),
                   math.radians(argp_deg), math.radians(nu_deg))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.e, self.inc, self.raan, self.argp, self.nu])


@dataclass(frozen=True)
class StateVector:
    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("state vector components must be finite")
        if np.linalg.norm(r) == 0.0:
            raise ValueError("position magnitude must be positive")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_samples: int

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ValueError("time grid bounds must be finite")
        if self.t_end <= self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples}")

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / (self.n_samples - 1)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.step * np.arange(self.n_samples)


@dataclass(frozen=True)
class Ephemeris:
    """Time-sampled states of one object. Arrays are read-only."""

    grid: TimeGrid
    positions: np.ndarray
    velocities: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        vel = np.array(self.velocities, dtype=float)
        n = self.grid.n_samples
        if pos.shape != (n, 3) or vel.shape != (n, 3):
            raise ValueError(f"expected ({n}, 3) position and velocity arrays, "
                             f"got {pos.shape} and {vel.shape}")
        pos.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    def __len__(self) -> int:
        return self.grid.n_samples

    def state(self, k: int) -> StateVector:
        return StateVector(self.positions[k], self.velocities[k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(["t", "x", "y", "z", "vx", "vy", "vz"])
            for t, r, v in zip(self.grid.times, self.positions, self.velocities):
                writer.writerow([_fmt(t), *(_fmt(x) for x in r), *(_fmt(x) for x in v)])


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def wrap_angle(x: float) -> float:
    y = math.fmod(x, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    # fmod of a tiny negative number can round back up to 2*pi
    return 0.0 if y >= TWO_PI else y


# --- element conversion ---

def _rotation(inc: float, raan: float, argp: float) -> np.ndarray:
    """Perifocal-to-inertial rotation R3(-raan) R1(-inc) R3(-argp)."""
    co, so = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array([
        [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
        [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
        [sw * si, cw * si, ci],
    ])


def kepler_to_state(el: KeplerianElements, c: Constants = EARTH) -> StateVector:
    if el.e >= 1.0:
        raise ValueError("only elliptic orbits (e < 1) are supported")
    p = el.a * (1.0 - el.e * el.e)
    cn, sn = math.cos(el.nu), math.sin(el.nu)
    radius = p / (1.0 + el.e * cn)
    speed = math.sqrt(c.mu / p)
    r_pf = np.array([radius * cn, radius * sn, 0.0])
    v_pf = np.array([-speed * sn, speed * (el.e + cn), 0.0])
    rot = _rotation(el.inc, el.raan, el.argp)
    return StateVector(rot @ r_pf, rot @ v_pf)


def state_to_kepler(sv: StateVector, c: Constants = EARTH) -> KeplerianElements:
    """Convert a bound state to elements.

    Degenerate angles are canonicalized: circular orbits take ``argp = 0``
    with the in-plane angle folded into ``nu``; equatorial orbits take
    ``raan = 0`` with the node measured from the x axis.
    """
    r, v = sv.r, sv.v
    rn = float(np.linalg.norm(r))
    v2 = float(v @ v)
    energy = 0.5 * v2 - c.mu / rn
    if not energy < 0.0:
        raise ValueError(f"orbit is not bound (specific energy {energy:.6g} km^2/s^2)")
    h = np.cross(r, v)
    hn = float(np.linalg.norm(h))
    if hn <= 1e-12 * rn * math.sqrt(v2):
        raise ValueError("zero angular momentum (rectilinear orbit)")
    h_hat = h / hn
    a = -c.mu / (2.0 * energy)
    e_vec = ((v2 - c.mu / rn) * r - float(r @ v) * v) / c.mu
    e = float(np.linalg.norm(e_vec))
    inc = math.atan2(math.hypot(h[0], h[1]), h[2])

    if inc < _DEGENERATE or math.pi - inc < _DEGENERATE:
        raan = 0.0
        node = np.array([1.0, 0.0, 0.0])
    else:
        node = np.array([-h[1], h[0], 0.0])
        node /= np.linalg.norm(node)
        raan = math.atan2(node[1], node[0])
    in_plane = np.cross(h_hat, node)

    def plane_angle(u: np.ndarray) -> float:
        return math.atan2(float(u @ in_plane), float(u @ node))

    arg_lat = plane_angle(r)
    if e < _DEGENERATE:
        e, argp = 0.0, 0.0
    else:
        argp = plane_angle(e_vec)
    return KeplerianElements(a, e, inc, raan, argp, arg_lat - argp)


def specific_energy(r: np.ndarray, v: np.ndarray, c: Constants = EARTH) -> np.ndarray:
    r = np.asarray(r)
    v = np.asarray(v)
    return 0.5 * np.sum(v * v, axis=-1) - c.mu / np.linalg.norm(r, axis=-1)


def angular_momentum(r: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.cross(r, v), axis=-1)


# --- dynamics ---

def two_body_accel(r, d=None, c: Constants = EARTH) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    rn = np.linalg.norm(r)
    if rn == 0.0:
        raise ValueError("acceleration undefined at the origin")
    acc = -c.mu * r / rn**3
    if d is not None:
        acc = acc + np.asarray(d, dtype=float)
    return acc


AccelFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
DisturbanceFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


def rk4_step(sv: StateVector, h: float, accel_fn: AccelFn, t: float = 0.0) -> StateVector:
    """One classical Runge-Kutta step of ``r'' = accel_fn(t, r, v)``."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    r, v = sv.r, sv.v
    k1r, k1v = v, accel_fn(t, r, v)
    k2r = v + 0.5 * h * k1v
    k2v = accel_fn(t + 0.5 * h, r + 0.5 * h * k1r, k2r)
    k3r = v + 0.5 * h * k2v
    k3v = accel_fn(t + 0.5 * h, r + 0.5 * h * k2r, k3r)
    k4r = v + h * k3v
    k4v = accel_fn(t + h, r + h * k3r, k4r)
    r_new = r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    v_new = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return StateVector(r_new, v_new)


@numba.njit(cache=True, nogil=True)
def _rk4_kepler_kernel(x0, mu, ts, n_sub, out):
    """Unperturbed RK4 over ``n_samples - 1`` intervals of ``n_sub`` steps each.

    Returns the sample index at which the state went non-finite, or -1.
    """
    h = ts / n_sub
    x = x0.copy()
    out[0, :] = x
    k = np.empty((4, 6))
    y = np.empty(6)
    n_samples = out.shape[0]
    for s in range(1, n_samples):
        for _ in range(n_sub):
            for stage in range(4):
                if stage == 0:
                    for i in range(6):
                        y[i] = x[i]
                else:
                    f = 0.5 * h if stage < 3 else h
                    for i in range(6):
                        y[i] = x[i] + f * k[stage - 1, i]
                r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
                g = -mu / (r2 * math.sqrt(r2))
                k[stage, 0] = y[3]
                k[stage, 1] = y[4]
                k[stage, 2] = y[5]
                k[stage, 3] = g * y[0]
                k[stage, 4] = g * y[1]
                k[stage, 5] = g * y[2]
            for i in range(6):
                x[i] += h / 6.0 * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
        for i in range(6):
            if not np.isfinite(x[i]):
                return s
            out[s, i] = x[i]
    return -1


def substeps(grid: TimeGrid, max_step: float) -> int:
    """Number of equal RK4 substeps per sample interval so that h <= max_step."""
    if not max_step > 0:
        raise ValueError(f"max_step must be positive, got {max_step}")
    return max(1, int(math.ceil(grid.step / max_step - 1e-12)))


def propagate(
    init: Union[KeplerianElements, StateVector],
    grid: TimeGrid,
    d_fn: Optional[DisturbanceFn] = None,
    c: Constants = EARTH,
    max_step: Optional[float] = None,
    name: str = "",
) -> Ephemeris:
    """Integrate an orbit and sample it on ``grid``.

    ``max_step`` defaults to one two-thousandth of the orbit's own period;
    scenario-level callers pass the smallest period among all objects.
    ``d_fn(t, r, v)`` returns a disturbing acceleration in km/s^2.
    """
    sv = kepler_to_state(init, c) if isinstance(init, KeplerianElements) else init
    if max_step is None:
        el = init if isinstance(init, KeplerianElements) else state_to_kepler(sv, c)
        max_step = orbital_period(el.a, c) / 2000.0
    n_sub = substeps(grid, max_step)
    out = np.empty((grid.n_samples, 6))
    if d_fn is None:
        bad = _rk4_kepler_kernel(sv.as_array(), c.mu, grid.step, n_sub, out)
    else:
        bad = _propagate_python(sv, grid, n_sub, d_fn, c, out)
    if bad >= 0:
        t_bad = grid.t_start + bad * grid.step
        raise PropagationError(f"integration produced a non-finite state by t={t_bad:.6g} s", t_bad)
    return Ephemeris(grid, out[:, :3], out[:, 3:], name=name)


def _propagate_python(sv, grid, n_sub, d_fn, c, out) -> int:
    h = grid.step / n_sub

    def accel(t, r, v):
        return -c.mu * r / np.linalg.norm(r) ** 3 + np.asarray(d_fn(t, r, v), dtype=float)

    out[0] = sv.as_array()
    t = grid.t_start
    state = sv
    for s in range(1, grid.n_samples):
        for _ in range(n_sub):
            try:
                state = rk4_step(state, h, accel, t)
            except ValueError:
                return s
            t += h
        out[s] = state.as_array()
    return -1


def propagate_many(
    inits: Sequence[Union[KeplerianElements, StateVector]],
    grid: TimeGrid,
    c: Constants = EARTH,
    max_step: Optional[float] = None,
    names: Optional[Sequence[str]] = None,
) -> list[Ephemeris]:
    """Propagate several objects with one shared step bound (smallest period / 2000)."""
    elements = [el if isinstance(el, KeplerianElements) else state_to_kepler(el, c) for el in inits]
    if max_step is None:
        max_step = min(orbital_period(el.a, c) for el in elements) / 2000.0
    names = names or [""] * len(inits)
    return [propagate(init, grid, c=c, max_step=max_step, name=nm) for init, nm in zip(inits, names)]


# --- closed forms ---

def orbital_period(a: float, c: Constants = EARTH) -> float:
    if not a > 0:
        raise ValueError(f"semi-major axis must be positive, got {a}")
    return TWO_PI * math.sqrt(a**3 / c.mu)


def sso_precession_rate(a: float, e: float, inc: float, c: Constants = EARTH) -> float:
    """Secular J2 drift of the ascending node, rad/s."""
    p = a * (1.0 - e * e)
    if not p > 0:
        raise ValueError(f"semi-latus rectum must be positive, got {p}")
    return -1.5 * c.j2_tilde * (c.r_earth / p) ** 2 * math.sqrt(c.mu / a**3) * math.cos(inc)


def sso_inclination_for(a: float, e: float, c: Constants = EARTH) -> float:
    """Inclination (rad) whose nodal precession equals ``c.sso_rate``."""
    scale = -1.5 * c.j2_tilde * (c.r_earth / (a * (1.0 - e * e))) ** 2 * math.sqrt(c.mu / a**3)
    if abs(c.sso_rate) > abs(scale):
        raise InfeasibleOrbitError(
            f"no sun-synchronous inclination exists at a={a} km, e={e} "
            f"(required |cos(inc)| = {abs(c.sso_rate / scale):.4g} > 1)")

    def residual(inc):
        return sso_precession_rate(a, e, inc, c) - c.sso_rate

    # the rate is monotone in inc on [0, pi]
    return brentq(residual, 0.0, math.pi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)


FROZEN_FORMS = ("paper", "standard")


def frozen_eccentricity(
    a: float,
    inc: float,
    c: Constants = EARTH,
    form: str = "paper",
    tol: float = 1e-12,
    max_iter: int = 50,
    return_history: bool = False,
):
    """Mean eccentricity of the frozen orbit at (a, inc).

    ``form="paper"`` iterates ``e = -(J2/J3) sin(inc) / (2 a (1 - e^2))``
    from e = 0 with ``a`` in km. ``form="standard"`` evaluates the usual
    first-order result ``e = -J3 R_E sin(inc) / (2 J2 a)``.
    """
    if not a > 0:
        raise ValueError(f"semi-major axis must be positive, got {a}")
    if form not in FROZEN_FORMS:
        raise ValueError(f"unknown frozen-orbit form {form!r}; expected one of {FROZEN_FORMS}")
    s = math.sin(inc)
    if form == "standard":
        e = -c.j3 * c.r_earth * s / (2.0 * c.j2 * a)
        steps = [abs(e)]
    else:
        e = 0.0
        steps = []
        for _ in range(max_iter):
            e_next = -(c.j2 / c.j3) * s / (2.0 * a * (1.0 - e * e))
            steps.append(abs(e_next - e))
            e = e_next
            if not 0.0 <= e < 1.0:
                raise InfeasibleOrbitError(f"frozen eccentricity iterate {e:.6g} left [0, 1)")
            if steps[-1] < tol:
                break
        else:
            raise RuntimeError(f"frozen eccentricity did not converge in {max_iter} iterations "
                               f"(last step {steps[-1]:.3g})")
    if not 0.0 <= e < 1.0:
        raise InfeasibleOrbitError(f"frozen eccentricity {e:.6g} outside [0, 1)")
    return (e, steps) if return_history else e
