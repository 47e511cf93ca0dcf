"""Glue between a scenario and the solver: ephemerides, quality, constraints."""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Optional

import numpy as np

from .astro import Ephemeris, orbital_period, propagate
from .constraints import (BLOCK, NU, Bounds, ConstraintSet, CollisionSpec, LinearRows,
                          TrailingGroup, altitude_max, altitude_min, block_to_elements,
                          co_orbital, frozen_residuals, orbit_type_equalities, pair_distances,
                          softmin_distance, sso_residual, trailing_spacing)
from .perception import QualityTensor, agent_quality, prepare_targets
from .solver import Evaluation, Problem


def build_constraints(scenario, collision_mode: Optional[str] = None,
                      frozen_form: Optional[str] = None) -> ConstraintSet:
    """Assemble the declared constraints; the overrides replace the declared values."""
    m, c = scenario.m, scenario.constants
    n = BLOCK * m
    eq, ineq = LinearRows.empty(n), LinearRows.empty(n)
    nl_eq, nl_ineq, groups = [], [], []
    collision = None
    for decl in scenario.constraints:
        p = decl.params
        agents = p.get("agents", [])
        if decl.type == "co_orbital":
            eq = eq + co_orbital(agents[0], agents[1], m)
        elif decl.type == "trailing":
            group = TrailingGroup(tuple(agents))
            rows_eq, rows_in = trailing_spacing(group, m)
            eq, ineq = eq + rows_eq, ineq + rows_in
            groups.append(group)
        elif decl.type == "orbit_type":
            for j in agents:
                eq = eq + orbit_type_equalities(p["family"], j, m, p.get("elements"))
        elif decl.type == "altitude_min":
            nl_ineq += [altitude_min(j, float(p["c_km"]), c) for j in agents]
        elif decl.type == "altitude_max":
            nl_ineq += [altitude_max(j, float(p["c_km"]), c) for j in agents]
        elif decl.type == "sso":
            nl_eq += [sso_residual(j, c) for j in agents]
        elif decl.type == "frozen":
            form = frozen_form or p["form"]
            nl_eq += [frozen_residuals(j, c, float(p["argp_deg"]), form) for j in agents]
        elif decl.type == "collision":
            collision = CollisionSpec(float(p["tr_km"]), collision_mode or p["mode"])
        else:
            raise ValueError(f"unknown constraint type {decl.type!r}")
    return ConstraintSet(n, eq, ineq, tuple(nl_eq), tuple(nl_ineq), collision, tuple(groups))


class ScenarioModel:
    """Evaluates the cumulative quality of a parameter vector for one scenario.

    Target ephemerides are propagated once. Agent ephemerides and their
    quality contributions are cached per agent, so a finite-difference step
    on one agent re-propagates only that agent.
    """

    def __init__(self, scenario, cache_size: int = 4096):
        self.scenario = scenario
        c = scenario.constants
        lo, _ = scenario.bounds_arrays()
        # the step bound covers the fastest orbit the agents may reach
        periods = [orbital_period(t.a_km, c) for t in scenario.targets]
        periods += [orbital_period(lo[BLOCK * j], c) for j in range(scenario.m)]
        self.max_step = min(periods) / scenario.steps_per_period
        self.targets = [propagate(t.elements(), scenario.grid, c=c, max_step=self.max_step,
                                  name=t.name) for t in scenario.targets]
        self.field = prepare_targets(self.targets, [t.faces for t in scenario.targets],
                                     scenario.sun_unit, c)
        self._ephemeris = lru_cache(maxsize=cache_size)(self._propagate_block)
        self._contribution = lru_cache(maxsize=cache_size)(self._contribute)
        self.n_evaluations = 0

    @property
    def shape(self) -> tuple[int, int]:
        n, _, L = self.field.shape
        return n, L

    def _propagate_block(self, key: bytes) -> Ephemeris:
        block = np.frombuffer(key, dtype=float)
        s = self.scenario
        return propagate(block_to_elements(block), s.grid, c=s.constants, max_step=self.max_step)

    def _contribute(self, j: int, key: bytes) -> np.ndarray:
        eph = self._ephemeris(key)
        s = self.scenario
        q = agent_quality(self.field, eph.positions, s.agents[j].sensor, s.constants, s.weights)
        return q.sum(axis=1)

    @staticmethod
    def _keys(p) -> list[bytes]:
        p = np.ascontiguousarray(p, dtype=float)
        return [p[BLOCK * j: BLOCK * (j + 1)].tobytes() for j in range(p.size // BLOCK)]

    def _check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (BLOCK * self.scenario.m,):
            raise ValueError(f"expected {BLOCK * self.scenario.m} parameters, got shape {p.shape}")
        return p

    def agent_ephemerides(self, p) -> list[Ephemeris]:
        return [self._ephemeris(k) for k in self._keys(self._check(p))]

    def j_sum(self, p) -> np.ndarray:
        """Cumulative quality matrix (n, L)."""
        keys = self._keys(self._check(p))
        return sum(self._contribution(j, k) for j, k in enumerate(keys))

    def tensor(self, p) -> QualityTensor:
        """Full quality tensor indexed (target, agent, sample, face)."""
        s = self.scenario
        slices = [agent_quality(self.field, e.positions, a.sensor, s.constants, s.weights)
                  for e, a in zip(self.agent_ephemerides(p), s.agents)]
        return QualityTensor(np.stack(slices, axis=1))

    def distances(self, p) -> np.ndarray:
        """Separations (pairs, N) for agent-agent and agent-target pairs."""
        return pair_distances(self.agent_ephemerides(p), self.targets)

    def __call__(self, p) -> Evaluation:
        self.n_evaluations += 1
        J = self.j_sum(p)
        d = self.distances(p)
        return Evaluation(J.ravel(), float(d.min()), softmin_distance(d))


def build_problem(scenario, collision_mode: Optional[str] = None,
                  frozen_form: Optional[str] = None) -> tuple[Problem, ScenarioModel]:
    model = ScenarioModel(scenario)
    lo, hi = scenario.bounds_arrays()
    cons = build_constraints(scenario, collision_mode, frozen_form)
    n, L = model.shape
    # components are sums over m agents and N samples of values in [0, 1]
    scale = float(scenario.m * scenario.grid.n_samples)
    prob = Problem(model, Bounds(lo, hi), cons, objective_scale=scale, shape=(n, L))
    return prob, model


def best_arrangement(prob: Problem, p, group: TrailingGroup) -> tuple[np.ndarray, float]:
    """Best assignment of the group's slots to its agents, scored after solving.

    The trailing slots are fixed by the spacing constraint, but which agent
    takes which slot only matters when the agents' sensors differ. Every
    permutation of the slot anomalies is scored; ties keep the given order.
    """
    p = np.asarray(p, dtype=float)
    members = list(group.members)
    slots = [p[BLOCK * j + NU] for j in members]
    best_p, best_val = p, prob.objective(p)
    for perm in itertools.permutations(range(len(members))):
        cand = p.copy()
        for j, s in zip(members, perm):
            cand[BLOCK * j + NU] = slots[s]
        val = prob.objective(cand)
        if val > best_val:
            best_p, best_val = cand, val
    return best_p, best_val
