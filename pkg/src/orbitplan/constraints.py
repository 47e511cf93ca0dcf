"""Parameter vector layout, scaling, and the mission constraint families.

The optimization vector stacks one block per agent,
``[a_km, e, raan_deg, argp_deg, inc_deg, nu_deg]``. Angles stay in degrees
here and are converted to radians only when building orbital elements.
Agent indices are 0-based.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .astro import (EARTH, Constants, Ephemeris, KeplerianElements, frozen_eccentricity,
                    sso_precession_rate)

BLOCK = 6
A, E, RAAN, ARGP, INC, NU = range(BLOCK)
ELEMENT_NAMES = ("a_km", "e", "raan_deg", "argp_deg", "inc_deg", "nu_deg")
COLLISION_MODES = ("penalty", "constraint")


def n_agents(p) -> int:
    size = len(p)
    if size % BLOCK:
        raise ValueError(f"parameter vector length {size} is not a multiple of {BLOCK}")
    return size // BLOCK


def index(j: int, element: int) -> int:
    return BLOCK * j + element


def blocks(p) -> np.ndarray:
    """View of ``p`` as an (m, 6) array."""
    return np.asarray(p, dtype=float).reshape(n_agents(p), BLOCK)


def block_to_elements(block) -> KeplerianElements:
    a, e, raan, argp, inc, nu = (float(x) for x in block)
    return KeplerianElements.from_degrees(a, e, inc, raan, argp, nu)


def elements_to_block(el: KeplerianElements) -> np.ndarray:
    return np.array([el.a, el.e, math.degrees(el.raan), math.degrees(el.argp),
                     math.degrees(el.inc), math.degrees(el.nu)])


def params_from_elements(elements: Sequence[KeplerianElements]) -> np.ndarray:
    return np.concatenate([elements_to_block(el) for el in elements])


@dataclass(frozen=True)
class Bounds:
    """Elementwise box ``lower <= p <= upper``.

    Elements with ``lower == upper`` are fixed unless an explicit ``fixed``
    mask says otherwise; the scaling of a zero-width free element is undefined.
    """

    lower: np.ndarray
    upper: np.ndarray
    fixed: Optional[np.ndarray] = None

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper bounds must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        bad = np.flatnonzero(lo > hi)
        if bad.size:
            raise ValueError(f"lower bound exceeds upper bound at indices {bad.tolist()}")
        fixed = (hi == lo) if self.fixed is None else np.array(self.fixed, dtype=bool)
        if fixed.shape != lo.shape:
            raise ValueError("fixed mask must match the bounds shape")
        for arr in (lo, hi, fixed):
            arr.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "fixed", fixed)

    def __len__(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def free(self) -> np.ndarray:
        return ~self.fixed

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))


def scale(p, b: Bounds) -> np.ndarray:
    """Map physical parameters to [0, 1]; fixed elements map to 0."""
    p = np.asarray(p, dtype=float)
    zero = (b.width == 0.0) & b.free
    if np.any(zero):
        raise ValueError(f"zero-width bound on free elements {np.flatnonzero(zero).tolist()}")
    width = np.where(b.fixed, 1.0, b.width)
    return np.where(b.fixed, 0.0, (p - b.lower) / width)


def unscale(x, b: Bounds) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(b.fixed, b.lower, x * b.width + b.lower)


# --- linear constraints ---

@dataclass(frozen=True)
class LinearRows:
    """Rows of ``A p = b`` (equality) or ``A p <= b`` (inequality)."""

    A: np.ndarray
    b: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.size == 0:
            A = A.reshape(0, A.shape[-1] if A.ndim == 2 else 0)
        if A.shape[0] != b.size:
            raise ValueError(f"{A.shape[0]} rows but {b.size} right-hand sides")
        labels = tuple(self.labels) or tuple(f"row{r}" for r in range(b.size))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def empty(cls, n: int) -> "LinearRows":
        return cls(np.zeros((0, n)), np.zeros(0), ())

    def __len__(self) -> int:
        return self.b.size

    def residual(self, p) -> np.ndarray:
        return self.A @ np.asarray(p, dtype=float) - self.b

    def __add__(self, other: "LinearRows") -> "LinearRows":
        if self.A.shape[1] != other.A.shape[1]:
            raise ValueError("cannot stack rows over different parameter lengths")
        return LinearRows(np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]),
                          self.labels + other.labels)


def _check_agent(j: int, m: int) -> None:
    if not 0 <= j < m:
        raise IndexError(f"agent index {j} out of range for {m} agents")


def _selector(m: int, j: int, element: int) -> np.ndarray:
    row = np.zeros(BLOCK * m)
    row[index(j, element)] = 1.0
    return row


def co_orbital(j1: int, j2: int, m: int) -> LinearRows:
    """Five rows equating a, e, raan, argp, inc of agents ``j1`` and ``j2``."""
    _check_agent(j1, m)
    _check_agent(j2, m)
    if j1 == j2:
        raise ValueError("co-orbital constraint needs two distinct agents")
    A = np.zeros((5, BLOCK * m))
    for r in range(5):
        A[r, index(j1, r)] = 1.0
        A[r, index(j2, r)] = -1.0
    labels = tuple(f"co_orbital[{j1},{j2}].{ELEMENT_NAMES[r]}" for r in range(5))
    return LinearRows(A, np.zeros(5), labels)


@dataclass(frozen=True)
class TrailingGroup:
    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(j) for j in self.members)
        if len(members) < 2:
            raise ValueError("a trailing group needs at least two agents")
        if len(set(members)) != len(members):
            raise ValueError(f"duplicate agents in trailing group {members}")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)


def trailing_spacing(group: TrailingGroup, m: int) -> tuple[LinearRows, LinearRows]:
    """Equal true-anomaly spacing of ``360 / m_o`` degrees along one orbit.

    Returns ``(equalities, inequalities)``; the single inequality keeps the
    lead agent in ``[0, 360 / m_o]``.
    """
    for j in group.members:
        _check_agent(j, m)
    gap = 360.0 / group.size
    rows, labels = [], []
    for prev, nxt in zip(group.members[:-1], group.members[1:]):
        rows.append(_selector(m, nxt, NU) - _selector(m, prev, NU))
        labels.append(f"trailing.nu[{nxt}]-nu[{prev}]")
    eq = LinearRows(np.array(rows), np.full(len(rows), gap), tuple(labels))
    lead = group.members[0]
    ineq = LinearRows(_selector(m, lead, NU)[None, :], [gap], (f"trailing.nu[{lead}]<=gap",))
    return eq, ineq


ORBIT_FAMILIES = ("equatorial", "polar", "custom")


def orbit_type_equalities(family: Optional[str], j: int, m: int,
                          elements: Optional[dict] = None) -> LinearRows:
    """Selector rows pinning elements of agent ``j`` for a named orbit family.

    ``custom`` takes ``elements`` keyed by the names in ``ELEMENT_NAMES``.
    """
    if family is None:
        return LinearRows.empty(BLOCK * m)
    _check_agent(j, m)
    if family == "equatorial":
        pins = {RAAN: 0.0, INC: 0.0}
    elif family == "polar":
        pins = {INC: 90.0}
    elif family == "custom":
        if not elements:
            raise ValueError("custom orbit type needs at least one pinned element")
        unknown = set(elements) - set(ELEMENT_NAMES)
        if unknown:
            raise ValueError(f"unknown element names {sorted(unknown)}")
        pins = {ELEMENT_NAMES.index(k): float(v) for k, v in elements.items()}
    else:
        raise ValueError(f"unknown orbit family {family!r}; expected one of {ORBIT_FAMILIES}")
    order = sorted(pins)
    A = np.array([_selector(m, j, el) for el in order])
    labels = tuple(f"{family}[{j}].{ELEMENT_NAMES[el]}" for el in order)
    return LinearRows(A, np.array([pins[el] for el in order]), labels)


# --- nonlinear constraints ---

@dataclass(frozen=True)
class NonlinearConstraint:
    """Residual function of the physical parameter vector.

    Equalities drive ``fun(p)`` to zero; inequalities require ``fun(p) <= 0``.
    """

    name: str
    kind: str
    fun: Callable[[np.ndarray], np.ndarray]
    labels: tuple[str, ...]
    agents: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("eq", "ineq"):
            raise ValueError(f"constraint kind must be 'eq' or 'ineq', got {self.kind!r}")

    def residual(self, p) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.fun(np.asarray(p, dtype=float)), dtype=float))

    def __len__(self) -> int:
        return len(self.labels)


def altitude_min(j: int, c_min: float, c: Constants = EARTH) -> NonlinearConstraint:
    """Perigee radius at least ``R_E + c_min``: ``R_E + c_min - a(1 - e) <= 0``."""
    if c_min < 0:
        raise ValueError("altitude bound must be nonnegative")

    def fun(p):
        return np.array([c.r_earth + c_min - p[index(j, A)] * (1.0 - p[index(j, E)])])

    return NonlinearConstraint(f"altitude_min[{j}]", "ineq", fun, (f"altitude_min[{j}]",), (j,))


def altitude_max(j: int, c_max: float, c: Constants = EARTH) -> NonlinearConstraint:
    """Perigee radius at most ``R_E + c_max``."""
    if c_max < 0:
        raise ValueError("altitude bound must be nonnegative")

    def fun(p):
        return np.array([p[index(j, A)] * (1.0 - p[index(j, E)]) - c.r_earth - c_max])

    return NonlinearConstraint(f"altitude_max[{j}]", "ineq", fun, (f"altitude_max[{j}]",), (j,))


def sso_residual(j: int, c: Constants = EARTH) -> NonlinearConstraint:
    """Nodal precession rate mismatch, divided by the target rate."""

    def fun(p):
        a, e, inc = p[index(j, A)], p[index(j, E)], math.radians(p[index(j, INC)])
        return np.array([(sso_precession_rate(a, e, inc, c) - c.sso_rate) / c.sso_rate])

    return NonlinearConstraint(f"sso[{j}]", "eq", fun, (f"sso[{j}]",), (j,))


def frozen_residuals(j: int, c: Constants = EARTH, argp_deg: float = 90.0,
                     form: str = "paper") -> NonlinearConstraint:
    """Argument of perigee pinned to 90 or 270 degrees, eccentricity at its frozen value."""
    if argp_deg not in (90.0, 270.0):
        raise ValueError(f"frozen argument of perigee must be 90 or 270, got {argp_deg}")

    def fun(p):
        a, e, inc = p[index(j, A)], p[index(j, E)], math.radians(p[index(j, INC)])
        return np.array([p[index(j, ARGP)] - argp_deg, e - frozen_eccentricity(a, inc, c, form)])

    labels = (f"frozen[{j}].argp_deg", f"frozen[{j}].e")
    return NonlinearConstraint(f"frozen[{j}]", "eq", fun, labels, (j,))


# --- collision ---

@dataclass(frozen=True)
class CollisionSpec:
    tr_km: float
    mode: str = "constraint"

    def __post_init__(self):
        if not self.tr_km > 0:
            raise ValueError(f"collision threshold must be positive, got {self.tr_km}")
        if self.mode not in COLLISION_MODES:
            raise ValueError(f"collision mode must be one of {COLLISION_MODES}, got {self.mode!r}")


def pair_distances(agents: Sequence, objects: Sequence = ()) -> np.ndarray:
    """Separations (pairs, N) for every agent-agent and agent-object pair.

    Items are Ephemeris objects or (N, 3) position arrays.
    """
    agent_pos = [_positions(a) for a in agents]
    object_pos = [_positions(o) for o in objects]
    if len(agent_pos) + len(object_pos) < 2 or not agent_pos:
        raise ValueError("need at least one agent and two objects in total")
    shape = agent_pos[0].shape
    if any(x.shape != shape for x in agent_pos + object_pos):
        raise ValueError("all ephemerides must share one time grid")
    rows = [np.linalg.norm(x - y, axis=1) for x, y in itertools.combinations(agent_pos, 2)]
    rows += [np.linalg.norm(x - y, axis=1) for x in agent_pos for y in object_pos]
    return np.array(rows)


def _positions(item) -> np.ndarray:
    return item.positions if isinstance(item, Ephemeris) else np.asarray(item, dtype=float)


def min_pairwise_distance(agents: Sequence, objects: Sequence = ()) -> float:
    """Smallest agent-agent or agent-object separation over all samples, km."""
    return float(pair_distances(agents, objects).min())


def softmin_distance(distances, exponent: float = 32.0) -> float:
    """Smooth lower bound of ``min(distances)``: the negative-exponent p-norm."""
    d = np.asarray(distances, dtype=float).ravel()
    dmin = d.min()
    if dmin <= 0.0:
        return 0.0
    return float(dmin * np.sum((d / dmin) ** -exponent) ** (-1.0 / exponent))


def apply_collision_policy(value, d_min: float, tr: float, mode: str):
    """Zero the objective on a close approach in penalty mode; pass through otherwise.

    In constraint mode the caller adds ``tr - d_min <= 0`` to the problem.
    The boundary ``d_min == tr`` is feasible.
    """
    if mode not in COLLISION_MODES:
        raise ValueError(f"collision mode must be one of {COLLISION_MODES}, got {mode!r}")
    if not tr > 0:
        raise ValueError("collision threshold must be positive")
    if mode == "penalty" and d_min < tr:
        return np.zeros_like(value) if isinstance(value, np.ndarray) else 0.0
    return value


# --- assembled set ---

@dataclass(frozen=True)
class ConstraintSet:
    n_params: int
    linear_eq: LinearRows = None
    linear_ineq: LinearRows = None
    nonlinear_eq: tuple[NonlinearConstraint, ...] = ()
    nonlinear_ineq: tuple[NonlinearConstraint, ...] = ()
    collision: Optional[CollisionSpec] = None
    trailing_groups: tuple[TrailingGroup, ...] = field(default=())

    def __post_init__(self):
        n = self.n_params
        for name in ("linear_eq", "linear_ineq"):
            rows = getattr(self, name)
            if rows is None:
                object.__setattr__(self, name, LinearRows.empty(n))
            elif rows.A.shape[1] != n:
                raise ValueError(f"{name} has {rows.A.shape[1]} columns, expected {n}")
        for con in self.nonlinear_eq:
            if con.kind != "eq":
                raise ValueError(f"{con.name} is not an equality")
        for con in self.nonlinear_ineq:
            if con.kind != "ineq":
                raise ValueError(f"{con.name} is not an inequality")
        object.__setattr__(self, "nonlinear_eq", tuple(self.nonlinear_eq))
        object.__setattr__(self, "nonlinear_ineq", tuple(self.nonlinear_ineq))

    def eq_residuals(self, p) -> np.ndarray:
        parts = [self.linear_eq.residual(p)] + [c.residual(p) for c in self.nonlinear_eq]
        return np.concatenate(parts)

    def ineq_residuals(self, p) -> np.ndarray:
        parts = [self.linear_ineq.residual(p)] + [c.residual(p) for c in self.nonlinear_ineq]
        return np.concatenate(parts)

    @property
    def eq_labels(self) -> tuple[str, ...]:
        return self.linear_eq.labels + sum((c.labels for c in self.nonlinear_eq), ())

    @property
    def ineq_labels(self) -> tuple[str, ...]:
        return self.linear_ineq.labels + sum((c.labels for c in self.nonlinear_ineq), ())

    def residual_report(self, p, d_min: Optional[float] = None) -> dict[str, float]:
        """Signed residual per label; the collision entry is ``tr - d_min``."""
        out = dict(zip(self.eq_labels, self.eq_residuals(p).tolist()))
        out.update(zip(self.ineq_labels, self.ineq_residuals(p).tolist()))
        if self.collision is not None and d_min is not None:
            out["collision"] = self.collision.tr_km - d_min
        return out

    def max_violation(self, p, d_min: Optional[float] = None) -> float:
        """Largest violation in original units (km, deg, or dimensionless)."""
        viol = [0.0]
        eq = self.eq_residuals(p)
        if eq.size:
            viol.append(float(np.max(np.abs(eq))))
        ineq = self.ineq_residuals(p)
        if ineq.size:
            viol.append(float(np.max(ineq)))
        if self.collision is not None and self.collision.mode == "constraint" and d_min is not None:
            viol.append(self.collision.tr_km - d_min)
        return max(0.0, max(viol))

    def describe(self) -> str:
        """Human-readable listing of the assembled system."""
        lines = [f"parameters: {self.n_params} ({self.n_params // BLOCK} agents x {BLOCK})"]
        for title, rows, op in (("linear equalities", self.linear_eq, "="),
                                ("linear inequalities", self.linear_ineq, "<=")):
            lines.append(f"{title}: {len(rows)}")
            for label, a, b in zip(rows.labels, rows.A, rows.b):
                terms = " ".join(f"{a[k]:+g}*p[{k}]" for k in np.flatnonzero(a))
                lines.append(f"  {label}: {terms} {op} {b:g}")
        for title, cons, op in (("nonlinear equalities", self.nonlinear_eq, "= 0"),
                                ("nonlinear inequalities", self.nonlinear_ineq, "<= 0")):
            lines.append(f"{title}: {sum(len(c) for c in cons)}")
            for con in cons:
                for label in con.labels:
                    lines.append(f"  {label} {op}")
        if self.collision is not None:
            lines.append(f"collision: tr={self.collision.tr_km:g} km, mode={self.collision.mode}")
        return "\n".join(lines)
