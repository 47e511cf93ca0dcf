"""Scenario files: closed-schema JSON with units in the field names, plus presets.

Loading runs a structural parse, then ``validate``; both report every problem
they find at once. ``save`` writes the canonical form, so a saved scenario
loads back identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .astro import Constants, KeplerianElements, TimeGrid, orbital_period
from .constraints import BLOCK, ELEMENT_NAMES, ORBIT_FAMILIES, COLLISION_MODES
from .astro import FROZEN_FORMS
from .perception import FRAME_MODES, FaceSet, QualityWeights, SensorModel
from .solver import SolverOptions


class ScenarioError(ValueError):
    """Parse or validation failure; ``problems`` lists every issue found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class TargetSpec:
    """One observed object. Elements are kept raw so validation can name bad fields."""

    name: str
    a_km: float
    e: float
    inc_deg: float
    raan_deg: float
    argp_deg: float
    nu_deg: float
    faces: FaceSet

    def elements(self) -> KeplerianElements:
        return KeplerianElements.from_degrees(self.a_km, self.e, self.inc_deg, self.raan_deg,
                                              self.argp_deg, self.nu_deg)


@dataclass(frozen=True)
class AgentSpec:
    sensor: SensorModel
    lower: tuple[float, ...]   # ELEMENT_NAMES order
    upper: tuple[float, ...]


@dataclass(frozen=True)
class ConstraintDecl:
    type: str
    params: dict


@dataclass(frozen=True)
class SolverSettings:
    n_starts: int = 20
    max_iter: int = 500
    max_outer: int = 200
    inner_iter: int = 100
    tol_kkt: float = 1e-6
    tol_feas: float = 1e-8
    fd_step: float = 1e-6
    workers: int = 1

    def options(self) -> SolverOptions:
        return SolverOptions(tol_kkt=self.tol_kkt, tol_feas=self.tol_feas,
                             max_iter=self.max_iter, max_outer=self.max_outer,
                             inner_iter=self.inner_iter, fd_step=self.fd_step)


@dataclass(frozen=True)
class Scenario:
    name: str
    constants: Constants
    grid: TimeGrid
    sun_unit: tuple[float, float, float]
    targets: tuple[TargetSpec, ...]
    agents: tuple[AgentSpec, ...]
    constraints: tuple[ConstraintDecl, ...] = ()
    weights: QualityWeights = QualityWeights()
    solver: SolverSettings = SolverSettings()
    seed: int = 0
    steps_per_period: int = 2000
    description: str = ""

    @property
    def m(self) -> int:
        return len(self.agents)

    @property
    def n(self) -> int:
        return len(self.targets)

    @property
    def n_faces(self) -> int:
        return len(self.targets[0].faces)

    @property
    def sensors(self) -> tuple[SensorModel, ...]:
        return tuple(a.sensor for a in self.agents)

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.concatenate([np.asarray(a.lower, dtype=float) for a in self.agents])
        hi = np.concatenate([np.asarray(a.upper, dtype=float) for a in self.agents])
        return lo, hi

    def with_changes(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)


# --- serialization ---

_CONSTANT_KEYS = {"mu_km3_s2": "mu", "r_earth_km": "r_earth", "j2_tilde": "j2_tilde",
                  "j2": "j2", "j3": "j3", "sso_rate_rad_s": "sso_rate"}
_GRID_KEYS = {"t_start_s": "t_start", "t_end_s": "t_end", "n_samples": "n_samples"}
_SENSOR_KEYS = {"aperture_m": "aperture_d", "wavelength_m": "wavelength",
                "q_lit_min": "q_lit_min", "q_dark": "q_dark"}
_SOLVER_KEYS = ("n_starts", "max_iter", "max_outer", "inner_iter", "tol_kkt", "tol_feas",
                "fd_step", "workers")
_WEIGHT_KEYS = ("resolve", "los", "lum", "lit", "view")
_TOP_KEYS = ("name", "description", "seed", "constants", "time_grid", "steps_per_period",
             "sun_unit", "weights", "targets", "agents", "constraints", "solver")

# type -> (required keys, optional keys with defaults)
_DECLS: dict[str, tuple[tuple[str, ...], dict[str, Any]]] = {
    "co_orbital": (("agents",), {}),
    "trailing": (("agents",), {}),
    "altitude_min": (("agents", "c_km"), {}),
    "altitude_max": (("agents", "c_km"), {}),
    "orbit_type": (("agents", "family"), {"elements": None}),
    "sso": (("agents",), {}),
    "frozen": (("agents",), {"argp_deg": 90.0, "form": "paper"}),
    "collision": (("tr_km",), {"mode": "constraint"}),
}


def _closed(obj: Any, where: str, required, optional, problems: list[str]) -> bool:
    if not isinstance(obj, dict):
        problems.append(f"{where}: expected an object")
        return False
    unknown = sorted(set(obj) - set(required) - set(optional))
    missing = [k for k in required if k not in obj]
    for k in unknown:
        problems.append(f"{where}: unknown field {k!r}")
    for k in missing:
        problems.append(f"{where}: missing field {k!r}")
    return not unknown and not missing


def _number(obj, key, where, problems, integer=False):
    value = obj[key]
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok:
        kind = "an integer" if integer else "a number"
        problems.append(f"{where}.{key}: expected {kind}, got {value!r}")
        return None
    return int(value) if integer else float(value)


def _build(factory, where, problems, **kwargs):
    try:
        return factory(**kwargs)
    except (ValueError, TypeError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def from_dict(d: dict) -> Scenario:
    """Parse a scenario document; raises :class:`ScenarioError` listing every issue."""
    problems: list[str] = []
    required = ("name", "time_grid", "sun_unit", "targets", "agents")
    if not _closed(d, "scenario", required, set(_TOP_KEYS) - set(required), problems):
        raise ScenarioError(problems)

    const_in = d.get("constants", {})
    constants = Constants()
    if _closed(const_in, "constants", (), _CONSTANT_KEYS, problems):
        kwargs = {_CONSTANT_KEYS[k]: _number(const_in, k, "constants", problems) for k in const_in}
        if None not in kwargs.values():
            constants = _build(Constants, "constants", problems, **kwargs)

    grid = None
    if _closed(d["time_grid"], "time_grid", _GRID_KEYS, (), problems):
        g = d["time_grid"]
        kwargs = {"t_start": _number(g, "t_start_s", "time_grid", problems),
                  "t_end": _number(g, "t_end_s", "time_grid", problems),
                  "n_samples": _number(g, "n_samples", "time_grid", problems, integer=True)}
        if None not in kwargs.values():
            grid = _build(TimeGrid, "time_grid", problems, **kwargs)

    sun = d["sun_unit"]
    if not (isinstance(sun, list) and len(sun) == 3
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in sun)):
        problems.append("sun_unit: expected three numbers")
        sun = (1.0, 0.0, 0.0)
    sun = tuple(float(x) for x in sun)

    weights = QualityWeights()
    if "weights" in d and _closed(d["weights"], "weights", (), _WEIGHT_KEYS, problems):
        kwargs = {k: _number(d["weights"], k, "weights", problems) for k in d["weights"]}
        if None not in kwargs.values():
            weights = QualityWeights(**kwargs)

    targets = []
    if not isinstance(d["targets"], list):
        problems.append("targets: expected a list")
    else:
        for i, t in enumerate(d["targets"]):
            where = f"targets[{i}]"
            keys = ("name", "a_km", "e", "inc_deg", "raan_deg", "argp_deg", "nu_deg", "faces")
            if not _closed(t, where, keys, (), problems):
                continue
            nums = {k: _number(t, k, where, problems) for k in keys[1:-1]}
            faces = None
            if _closed(t["faces"], f"{where}.faces", ("frame", "normals"), (), problems):
                faces = _build(FaceSet, f"{where}.faces", problems,
                               normals=t["faces"]["normals"], frame_mode=t["faces"]["frame"])
            if None not in nums.values() and faces is not None:
                targets.append(TargetSpec(name=str(t["name"]), faces=faces, **nums))

    agents = []
    if not isinstance(d["agents"], list):
        problems.append("agents: expected a list")
    else:
        for j, a in enumerate(d["agents"]):
            where = f"agents[{j}]"
            if not _closed(a, where, ("sensor", "bounds"), (), problems):
                continue
            sensor = None
            s = a["sensor"]
            if _closed(s, f"{where}.sensor", (), tuple(_SENSOR_KEYS) + ("resolve_ref_km",), problems):
                kwargs = {_SENSOR_KEYS[k]: _number(s, k, f"{where}.sensor", problems)
                          for k in s if k in _SENSOR_KEYS}
                if "resolve_ref_km" in s:
                    ref = _number(s, "resolve_ref_km", f"{where}.sensor", problems)
                    kwargs["resolve_ref_distance"] = None if ref is None else ref * 1e3
                if None not in kwargs.values():
                    sensor = _build(SensorModel, f"{where}.sensor", problems, **kwargs)
            b = a["bounds"]
            if not _closed(b, f"{where}.bounds", ELEMENT_NAMES, (), problems):
                continue
            lo, hi = [], []
            for k in ELEMENT_NAMES:
                pair = b[k]
                if not (isinstance(pair, list) and len(pair) == 2
                        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
                    problems.append(f"{where}.bounds.{k}: expected [lower, upper]")
                    pair = [math.nan, math.nan]
                lo.append(float(pair[0]))
                hi.append(float(pair[1]))
            if sensor is not None:
                agents.append(AgentSpec(sensor, tuple(lo), tuple(hi)))

    decls = []
    if not isinstance(d.get("constraints", []), list):
        problems.append("constraints: expected a list")
    else:
        for r, c in enumerate(d.get("constraints", [])):
            where = f"constraints[{r}]"
            if not isinstance(c, dict) or c.get("type") not in _DECLS:
                problems.append(f"{where}: unknown constraint type "
                                f"{c.get('type') if isinstance(c, dict) else c!r}; "
                                f"expected one of {sorted(_DECLS)}")
                continue
            req, opt = _DECLS[c["type"]]
            if not _closed(c, where, ("type",) + req, opt, problems):
                continue
            params = {k: v for k, v in opt.items()}
            params.update({k: v for k, v in c.items() if k != "type"})
            decls.append(ConstraintDecl(c["type"], params))

    solver = SolverSettings()
    if "solver" in d and _closed(d["solver"], "solver", (), _SOLVER_KEYS, problems):
        ints = {"n_starts", "max_iter", "max_outer", "inner_iter", "workers"}
        kwargs = {k: _number(d["solver"], k, "solver", problems, integer=k in ints)
                  for k in d["solver"]}
        if None not in kwargs.values():
            solver = SolverSettings(**kwargs)

    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append(f"seed: expected a nonnegative integer, got {seed!r}")
        seed = 0
    spp = d.get("steps_per_period", 2000)
    if isinstance(spp, bool) or not isinstance(spp, int) or spp < 1:
        problems.append(f"steps_per_period: expected a positive integer, got {spp!r}")
        spp = 2000

    if problems or grid is None or constants is None:
        raise ScenarioError(problems or ["scenario could not be parsed"])
    return Scenario(name=str(d["name"]), constants=constants, grid=grid, sun_unit=sun,
                    targets=tuple(targets), agents=tuple(agents), constraints=tuple(decls),
                    weights=weights, solver=solver, seed=seed, steps_per_period=spp,
                    description=str(d.get("description", "")))


def to_dict(s: Scenario) -> dict:
    c = s.constants
    inv_const = {v: k for k, v in _CONSTANT_KEYS.items()}
    out = {
        "name": s.name,
        "description": s.description,
        "seed": s.seed,
        "constants": {inv_const[f]: getattr(c, f) for f in _CONSTANT_KEYS.values()},
        "time_grid": {"t_start_s": s.grid.t_start, "t_end_s": s.grid.t_end,
                      "n_samples": s.grid.n_samples},
        "steps_per_period": s.steps_per_period,
        "sun_unit": list(s.sun_unit),
        "weights": {k: getattr(s.weights, k) for k in _WEIGHT_KEYS},
        "targets": [{
            "name": t.name, "a_km": t.a_km, "e": t.e, "inc_deg": t.inc_deg,
            "raan_deg": t.raan_deg, "argp_deg": t.argp_deg, "nu_deg": t.nu_deg,
            "faces": {"frame": t.faces.frame_mode, "normals": t.faces.normals.tolist()},
        } for t in s.targets],
        "agents": [{
            "sensor": {"aperture_m": a.sensor.aperture_d, "wavelength_m": a.sensor.wavelength,
                       "q_lit_min": a.sensor.q_lit_min, "q_dark": a.sensor.q_dark,
                       "resolve_ref_km": a.sensor.resolve_ref_distance / 1e3},
            "bounds": {k: [lo, hi] for k, lo, hi in zip(ELEMENT_NAMES, a.lower, a.upper)},
        } for a in s.agents],
        "constraints": [{"type": c.type, **{k: _plain(c.params[k]) for k in _decl_order(c)}}
                        for c in s.constraints],
        "solver": {k: getattr(s.solver, k) for k in _SOLVER_KEYS},
    }
    return out


def _decl_order(c: ConstraintDecl) -> list[str]:
    req, opt = _DECLS[c.type]
    return list(req) + [k for k in opt if k in c.params]


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def dumps(s: Scenario) -> str:
    return json.dumps(to_dict(s), indent=2) + "\n"


def save(s: Scenario, path) -> None:
    Path(path).write_text(dumps(s), encoding="utf-8")


def loads(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"])
    s = from_dict(data)
    problems = validate(s)
    if problems:
        raise ScenarioError(problems)
    return s


def load(path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError([f"cannot read {path}: {exc}"])
    return loads(text)


# --- validation ---

def _agent_list(decl: ConstraintDecl, m: int, where: str, problems: list[str]) -> list[int]:
    agents = decl.params.get("agents")
    if not isinstance(agents, list) or not agents or \
            not all(isinstance(j, int) and not isinstance(j, bool) for j in agents):
        problems.append(f"{where}.agents: expected a non-empty list of agent indices")
        return []
    bad = [j for j in agents if not 0 <= j < m]
    if bad:
        problems.append(f"{where}.agents: indices {bad} out of range for {m} agents")
        return []
    return agents


def validate(s: Scenario) -> list[str]:
    """Every violated invariant, as human-readable strings; empty when valid."""
    problems: list[str] = []
    if s.n < 1:
        problems.append("targets: at least one target is required")
    if s.m < 1:
        problems.append("agents: at least one agent is required")
    sun = np.asarray(s.sun_unit, dtype=float)
    if not np.all(np.isfinite(sun)) or abs(np.linalg.norm(sun) - 1.0) > 1e-12:
        problems.append(f"sun_unit: must be a unit vector, got {list(s.sun_unit)}")

    for i, t in enumerate(s.targets):
        where = f"targets[{i}] ({t.name})"
        if not (math.isfinite(t.a_km) and t.a_km > 0):
            problems.append(f"{where}.a_km: must be positive, got {t.a_km}")
        if not (math.isfinite(t.e) and 0.0 <= t.e < 1.0):
            problems.append(f"{where}.e: must lie in [0, 1), got {t.e}")
        if not (math.isfinite(t.inc_deg) and 0.0 <= t.inc_deg <= 180.0):
            problems.append(f"{where}.inc_deg: must lie in [0, 180], got {t.inc_deg}")
        for k in ("raan_deg", "argp_deg", "nu_deg"):
            if not math.isfinite(getattr(t, k)):
                problems.append(f"{where}.{k}: must be finite")
        if math.isfinite(t.a_km) and math.isfinite(t.e) and t.a_km * (1 - t.e) <= s.constants.r_earth \
                and t.a_km > 0:
            problems.append(f"{where}: perigee radius {t.a_km * (1 - t.e):.1f} km lies inside the Earth")
    if len({len(t.faces) for t in s.targets}) > 1:
        problems.append("targets: every target must carry the same number of faces")

    lo, hi = s.bounds_arrays() if s.agents else (np.zeros(0), np.zeros(0))
    for k in range(lo.size):
        j, el = divmod(k, BLOCK)
        name = ELEMENT_NAMES[el]
        if not (math.isfinite(lo[k]) and math.isfinite(hi[k])):
            problems.append(f"bounds p[{k}] (agent {j} {name}): must be finite")
        elif lo[k] > hi[k]:
            problems.append(f"bounds p[{k}] (agent {j} {name}): lower {lo[k]} exceeds upper {hi[k]}")
    for j in range(s.m):
        a_lo, e_lo, e_hi = lo[BLOCK * j], lo[BLOCK * j + 1], hi[BLOCK * j + 1]
        i_lo, i_hi = lo[BLOCK * j + 4], hi[BLOCK * j + 4]
        if not a_lo > 0:
            problems.append(f"bounds agent {j} a_km: lower bound must be positive")
        if not (0.0 <= e_lo and e_hi < 1.0):
            problems.append(f"bounds agent {j} e: must lie within [0, 1)")
        if not (0.0 <= i_lo and i_hi <= 180.0):
            problems.append(f"bounds agent {j} inc_deg: must lie within [0, 180]")

    for r, decl in enumerate(s.constraints):
        where = f"constraints[{r}] ({decl.type})"
        p = decl.params
        if decl.type != "collision":
            agents = _agent_list(decl, s.m, where, problems)
        if decl.type in ("co_orbital", "trailing") and decl.type != "collision":
            if len(set(agents)) != len(agents) or (agents and len(agents) < 2):
                problems.append(f"{where}.agents: need at least two distinct agents")
            if decl.type == "co_orbital" and agents and len(agents) != 2:
                problems.append(f"{where}.agents: co-orbital pairs take exactly two agents")
        if decl.type in ("altitude_min", "altitude_max"):
            if not isinstance(p["c_km"], (int, float)) or isinstance(p["c_km"], bool) or p["c_km"] < 0:
                problems.append(f"{where}.c_km: must be a nonnegative number")
        if decl.type == "orbit_type":
            if p["family"] not in ORBIT_FAMILIES:
                problems.append(f"{where}.family: must be one of {list(ORBIT_FAMILIES)}")
            elif p["family"] == "custom":
                els = p.get("elements")
                if not isinstance(els, dict) or not els or set(els) - set(ELEMENT_NAMES):
                    problems.append(f"{where}.elements: custom family needs element values "
                                    f"keyed by {list(ELEMENT_NAMES)}")
        if decl.type == "frozen":
            if p["argp_deg"] not in (90, 270):
                problems.append(f"{where}.argp_deg: must be 90 or 270")
            if p["form"] not in FROZEN_FORMS:
                problems.append(f"{where}.form: must be one of {list(FROZEN_FORMS)}")
        if decl.type == "collision":
            if not isinstance(p["tr_km"], (int, float)) or isinstance(p["tr_km"], bool) or p["tr_km"] <= 0:
                problems.append(f"{where}.tr_km: must be positive")
            if p["mode"] not in COLLISION_MODES:
                problems.append(f"{where}.mode: must be one of {list(COLLISION_MODES)}")
    if sum(1 for d in s.constraints if d.type == "collision") > 1:
        problems.append("constraints: at most one collision declaration is allowed")

    if not problems:
        problems += _check_linear_feasibility(s)
    return problems


def _check_linear_feasibility(s: Scenario) -> list[str]:
    """Bounds must admit a point satisfying every linear equality and inequality."""
    from scipy.optimize import linprog

    from .problem import build_constraints

    try:
        cs = build_constraints(s)
    except (ValueError, IndexError) as exc:
        return [f"constraints: {exc}"]
    lo, hi = s.bounds_arrays()
    if not len(cs.linear_eq) and not len(cs.linear_ineq):
        return []
    res = linprog(np.zeros(lo.size),
                  A_ub=cs.linear_ineq.A if len(cs.linear_ineq) else None,
                  b_ub=cs.linear_ineq.b if len(cs.linear_ineq) else None,
                  A_eq=cs.linear_eq.A if len(cs.linear_eq) else None,
                  b_eq=cs.linear_eq.b if len(cs.linear_eq) else None,
                  bounds=list(zip(lo, hi)), method="highs")
    if res.status != 0:
        return ["constraints: no point within the bounds satisfies the linear constraints"]
    return []


# --- presets ---

_TWO_FACES = FaceSet(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]), "lvlh")


def _agent(lower, upper, sensor: Optional[SensorModel] = None) -> AgentSpec:
    return AgentSpec(sensor or SensorModel(), tuple(float(x) for x in lower),
                     tuple(float(x) for x in upper))


def _illustrative(free: bool) -> Scenario:
    orbit1 = dict(a_km=8033.72, e=0.126, inc_deg=0.0, raan_deg=0.0, argp_deg=68.02)
    orbit2 = dict(a_km=7898.35, e=0.057, inc_deg=0.0, raan_deg=0.0, argp_deg=225.2)
    # true anomalies are taken as degrees at t = 0
    targets = [TargetSpec(f"rso-{k + 1}", nu_deg=nu, faces=_TWO_FACES, **orbit)
               for k, (orbit, nu) in enumerate([(orbit1, 247.2), (orbit1, 62.2), (orbit1, 237.2),
                                                (orbit2, 280.8), (orbit2, 270.88)])]
    lower = (7898.3, 0.0, 0.0, 0.0, 0.0, 0.0)
    upper = (8033.0, 0.15, 360.0, 360.0, 10.0, 360.0)
    duration = 5.0 * orbital_period(8033.72)
    decls = [ConstraintDecl("altitude_min", {"agents": [0, 1], "c_km": 300.0}),
             ConstraintDecl("orbit_type", {"agents": [0, 1], "family": "equatorial",
                                           "elements": None})]
    if not free:
        decls += [ConstraintDecl("co_orbital", {"agents": [0, 1]}),
                  ConstraintDecl("trailing", {"agents": [0, 1]})]
    decls.append(ConstraintDecl("collision", {"tr_km": 3.0, "mode": "constraint"}))
    return Scenario(
        name="illustrative-2d-free" if free else "illustrative-2d",
        description=("Two equatorial agents observing five RSOs on two orbits over five periods "
                     "of the slowest orbit; " + ("independent agent orbits." if free else
                                                 "agents co-orbital and evenly spaced.")),
        constants=Constants(),
        grid=TimeGrid(0.0, round(duration, 1), 180),
        sun_unit=(1.0, 0.0, 0.0),
        targets=tuple(targets),
        agents=(_agent(lower, upper), _agent(lower, upper)),
        constraints=tuple(decls),
        solver=SolverSettings(n_starts=20),
        seed=0,
    )


# Earth-facing sides of a GEO object, tilted 30 deg fore and aft; the outward
# side of a GEO object can never be seen from LEO
_GEO_FACES = FaceSet(np.array([[-math.sqrt(0.75), 0.5, 0.0], [-math.sqrt(0.75), -0.5, 0.0]]),
                     "lvlh")


def _frozen_sso_reduced() -> Scenario:
    geo = [TargetSpec(f"geo-{k + 1}", 42164.0, 0.0, 0.0, 0.0, 0.0, nu, _GEO_FACES)
           for k, nu in enumerate((0.0, 30.0, 60.0, 180.0, 270.0))]
    leo = [TargetSpec("leo-1", 7000.0, 0.001, 98.0, 20.0, 90.0, 0.0, _TWO_FACES),
           TargetSpec("leo-2", 7300.0, 0.002, 60.0, 200.0, 45.0, 120.0, _TWO_FACES)]
    # semi-major axis spans the 300-1000 km altitude band; argp fixed at 90 deg
    lower = (6671.0, 0.0, 0.0, 90.0, 96.5, 0.0)
    upper = (7371.0, 0.05, 360.0, 90.0, 102.5, 360.0)
    agents = tuple(_agent(lower, upper) for _ in range(5))
    every = [0, 1, 2, 3, 4]
    decls = (ConstraintDecl("altitude_min", {"agents": every, "c_km": 300.0}),
             ConstraintDecl("altitude_max", {"agents": every, "c_km": 1000.0}),
             ConstraintDecl("sso", {"agents": every}),
             ConstraintDecl("frozen", {"agents": every, "argp_deg": 90.0, "form": "paper"}),
             ConstraintDecl("collision", {"tr_km": 3.0, "mode": "constraint"}))
    return Scenario(
        name="frozen-sso-reduced",
        description="Five frozen sun-synchronous agents observing five GEO and two LEO objects.",
        constants=Constants(),
        grid=TimeGrid(0.0, 12000.0, 41),
        sun_unit=(1.0, 0.0, 0.0),
        targets=tuple(geo + leo),
        agents=agents,
        constraints=decls,
        solver=SolverSettings(n_starts=8, max_iter=300),
        seed=0,
    )


def _phasing_toy() -> Scenario:
    """One circular target between two fixed circular equatorial agent orbits.

    Only the two true anomalies are free, so the landscape can be checked by
    brute force. The horizon lets the relative phase drift by about half a
    turn, and the sun sits 60 deg off the orbit plane so the target is never
    eclipsed; both keep the basin of the best phasing wide.
    """
    targets = (TargetSpec("t-1", 8000.0, 0.0, 0.0, 0.0, 0.0, 0.0, _TWO_FACES),)
    inner = (7000.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    outer = (9500.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    agents = (_agent(inner, inner[:5] + (360.0,)), _agent(outer, outer[:5] + (360.0,)))
    return Scenario(
        name="phasing-toy",
        description="Phasing-only design of two agents on fixed circular equatorial orbits.",
        constants=Constants(),
        grid=TimeGrid(0.0, 16000.0, 400),
        sun_unit=(0.5, 0.0, math.sqrt(0.75)),
        targets=targets,
        agents=agents,
        constraints=(),
        solver=SolverSettings(n_starts=20, max_iter=200),
        seed=0,
    )


PRESETS = {
    "illustrative-2d": lambda: _illustrative(free=False),
    "illustrative-2d-free": lambda: _illustrative(free=True),
    "frozen-sso-reduced": _frozen_sso_reduced,
    "phasing-toy": _phasing_toy,
}


def preset(name: str) -> Scenario:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ScenarioError([f"unknown preset {name!r}; available: {sorted(PRESETS)}"])
    return factory()
