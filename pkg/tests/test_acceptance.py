"""Acceptance gate: one test per criterion, each at its stated tolerance.

The summary at the end of the pytest run prints a PASS/FAIL line for every
criterion (see conftest.py). The optimization criteria solve the real presets
and take several minutes in total.
"""

import json
import math
import time

import numpy as np
import pytest

from orbitplan import cli
from orbitplan import scenario as sio
from orbitplan.astro import (KeplerianElements, TimeGrid, angular_momentum, frozen_eccentricity,
                             kepler_to_state, orbital_period, propagate, specific_energy,
                             sso_inclination_for, sso_precession_rate, state_to_kepler)
from orbitplan.constraints import BLOCK
from orbitplan.perception import q_lit, q_los, q_lum, q_view
from orbitplan.problem import build_problem
from orbitplan.solver import solve_maxmin

from . import oracles

criterion = pytest.mark.criterion

# start counts for the preset runs; each illustrative start costs up to a minute
ILLUSTRATIVE_STARTS = 8


def _wrap(d):
    return abs((d + math.pi) % (2.0 * math.pi) - math.pi)


@criterion(1, "element round-trip of 1000 random sets, max relative error < 1e-9 in < 1 s")
def test_criterion_01_round_trip(record_property):
    rng = np.random.default_rng(20240501)
    sets = [KeplerianElements(rng.uniform(6600.0, 45000.0), rng.uniform(0.0, 0.9),
                              rng.uniform(0.01, math.pi - 0.01), *rng.uniform(0, 2 * math.pi, 3))
            for _ in range(1000)]
    t0 = time.perf_counter()
    back = [state_to_kepler(kepler_to_state(el)) for el in sets]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for el, b in zip(sets, back):
        worst = max(worst, abs(b.a - el.a) / el.a, abs(b.e - el.e) / el.e,
                    abs(b.inc - el.inc) / el.inc, _wrap(b.raan - el.raan) / el.raan,
                    _wrap(b.argp - el.argp) / el.argp, _wrap(b.nu - el.nu) / el.nu)
    record_property("max_rel_error", f"{worst:.2e}")
    record_property("seconds", f"{elapsed:.2f}")
    assert worst < 1e-9
    assert elapsed < 1.0


@criterion(2, "energy and |h| conserved to 1e-8 over five periods; period within 0.05 s")
def test_criterion_02_conservation(record_property):
    el = KeplerianElements(8033.72, 0.126, 0.0, 0.0, math.radians(68.02), 0.0)
    period = orbital_period(el.a)
    eph = propagate(el, TimeGrid(0.0, 5.0 * period, 1801))
    energy = specific_energy(eph.positions, eph.velocities)
    h = angular_momentum(eph.positions, eph.velocities)
    de = np.max(np.abs(energy / energy[0] - 1.0))
    dh = np.max(np.abs(h / h[0] - 1.0))
    record_property("energy_drift", f"{de:.2e}")
    record_property("h_drift", f"{dh:.2e}")
    record_property("period_s", f"{period:.3f}")
    assert de < 1e-8 and dh < 1e-8
    assert abs(period - 35830.7 / 5.0) < 0.05


@criterion(3, "SSO inclination at a=7171 km is 98.59 +/- 0.05 deg and reproduces the node rate")
def test_criterion_03_sso(record_property):
    inc = sso_inclination_for(7171.0, 0.0)
    ref = oracles.sso_inclination_bisection(7171.0, 0.0)
    rate = sso_precession_rate(7171.0, 0.0, inc)
    record_property("inc_deg", f"{math.degrees(inc):.5f}")
    record_property("oracle_deg", f"{math.degrees(ref):.5f}")
    assert abs(math.degrees(inc) - 98.59) <= 0.05
    assert abs(inc - ref) < 1e-9
    assert abs(rate - 1.9911e-7) <= 1e-10
    assert abs(rate - 1.991063802746144e-7) < 1e-15


@criterion(4, "frozen-eccentricity fixed point converges over the 300-1000 km, 96.5-102.5 deg box")
def test_criterion_04_frozen(record_property):
    c = sio.preset("frozen-sso-reduced").constants
    worst_iters, worst_rel = 0, 0.0
    for alt in np.linspace(300.0, 1000.0, 29):
        a = c.r_earth + alt
        for inc_deg in np.linspace(96.5, 102.5, 25):
            inc = math.radians(inc_deg)
            e, steps = frozen_eccentricity(a, inc, c, return_history=True)
            assert steps[-1] < 1e-12 and len(steps) <= 50
            relation = -(c.j2 / c.j3) * math.sin(inc) / (2.0 * a * (1.0 - e * e))
            worst_rel = max(worst_rel, abs(relation - e))
            worst_iters = max(worst_iters, len(steps))
            ref, _ = oracles.frozen_fixed_point(a, inc)
            assert abs(e - ref) < 1e-12
    record_property("max_iterations", worst_iters)
    record_property("max_relation_residual", f"{worst_rel:.1e}")
    assert worst_rel < 1e-10


@criterion(5, "quality-factor unit identities")
def test_criterion_05_quality_factors():
    for q_min in (0.0, 0.2, 0.5):
        assert abs(q_lit(math.pi / 4, q_min) - 1.0) < 1e-15
        for alpha in (math.pi / 2, 2.0, math.pi):
            assert q_lit(alpha, q_min) == q_min
        assert abs(q_lit(np.nextafter(math.pi / 2, 0.0), q_min) - q_min) < 1e-12
    v = np.array([0.0, 0.6, 0.8])
    assert q_view(v, v) == 1.0
    assert q_view(-v, v) == 0.0
    assert q_view(np.array([1.0, 0.0, 0.0]), v) == 0.0
    assert q_view(np.array([0.5, math.sqrt(0.75), 0.0]), np.array([1.0, 0.0, 0.0])) \
        == pytest.approx(0.5, abs=1e-15)
    assert q_los([8000.0, 0, 0], [-8000.0, 0, 0]) == 0.0
    assert q_los([8000.0, 0, 0], [8000.0, 100.0, 0]) == 1.0
    assert q_los([0.0, 8000.0, 0], [8000.0, 0, 0]) == 0.0
    assert q_los([6500.0, 6500.0, 0], [6500.0, -6500.0, 0]) == 1.0
    sun = np.array([1.0, 0.0, 0.0])
    assert q_lum([-7000.0, 0, 0], sun, q_dark=0.05) == 0.05
    assert q_lum([7000.0, 0, 0], sun, q_dark=0.05) == 1.0
    assert q_lum([-7000.0, 7000.0, 0], sun, q_dark=0.05) == 1.0


@criterion(6, "phasing toy: 20-start solve within 1e-3 of a 100x100 grid oracle, under 2 min")
def test_criterion_06_grid_oracle(record_property):
    s = sio.preset("phasing-toy")
    t0 = time.perf_counter()
    prob, model = build_problem(s)
    lo, _ = s.bounds_arrays()
    nus = np.arange(100) * 3.6
    best_grid = -np.inf
    for nu1 in nus:
        for nu2 in nus:
            p = lo.copy()
            p[5], p[BLOCK + 5] = nu1, nu2
            best_grid = max(best_grid, float(model.j_sum(p).min()))
    t_grid = time.perf_counter() - t0
    rep = solve_maxmin(prob, 20, seed=s.seed, opts=s.solver.options())
    elapsed = time.perf_counter() - t0
    got = rep.best.objective_final
    record_property("solver", f"{got:.6g}")
    record_property("grid", f"{best_grid:.6g}")
    record_property("seconds", f"{elapsed:.0f} (grid {t_grid:.0f})")
    assert best_grid > 0.0
    assert got >= best_grid - 1e-3 * abs(best_grid)
    assert elapsed < 120.0


@pytest.fixture(scope="module")
def illustrative_runs():
    co = sio.preset("illustrative-2d")
    free = sio.preset("illustrative-2d-free")
    co_prob, _ = build_problem(co)
    free_prob, _ = build_problem(free)
    co_rep = solve_maxmin(co_prob, ILLUSTRATIVE_STARTS, seed=co.seed, opts=co.solver.options())
    # the free run's start pool contains the co-orbital optimum
    free_rep = solve_maxmin(free_prob, ILLUSTRATIVE_STARTS, seed=free.seed,
                            opts=free.solver.options(), initial_points=[co_rep.best.p_final])
    return (co_prob, co_rep), (free_prob, free_rep)


@criterion(7, "free-orbit best >= co-orbital best when seeded with the co-orbital optimum")
def test_criterion_07_relaxation(illustrative_runs, record_property):
    (co_prob, co_rep), (free_prob, free_rep) = illustrative_runs
    co_best, free_best = co_rep.best, free_rep.best
    record_property("co_orbital", f"{co_best.objective_final:.6g}")
    record_property("free", f"{free_best.objective_final:.6g}")
    assert co_best.max_violation < 1e-8
    assert abs(co_prob.constraints.linear_eq.residual(co_best.p_final)).max() < 1e-8
    assert free_best.max_violation < 1e-8
    assert free_best.objective_final >= co_best.objective_final - 1e-9


@criterion(8, "every reported illustrative solution keeps exact min distance >= 3 km")
def test_criterion_08_collision(illustrative_runs, record_property):
    worst = np.inf
    for prob, rep in illustrative_runs:
        for r in rep.feasible_results:
            agents = [e.positions for e in prob.evaluate.agent_ephemerides(r.p_final)]
            targets = [e.positions for e in prob.evaluate.targets]
            pairs = [(a, b) for i, a in enumerate(agents) for b in agents[i + 1:] + targets]
            d = min(float(np.linalg.norm(a - b, axis=1).min()) for a, b in pairs)
            assert d == pytest.approx(prob.evaluation(r.p_final).d_min, rel=1e-12)
            worst = min(worst, d)
    record_property("min_distance_km", f"{worst:.4g}")
    assert worst >= 3.0


@criterion(9, "frozen-SSO preset: residuals < 1e-8 and objective >= 1.1 x best sampled start")
def test_criterion_09_frozen_sso(record_property):
    s = sio.preset("frozen-sso-reduced")
    prob, _ = build_problem(s)
    rep = solve_maxmin(prob, s.solver.n_starts, seed=s.seed, opts=s.solver.options())
    best = rep.best
    report = prob.constraints.residual_report(best.p_final, prob.evaluation(best.p_final).d_min)
    eq = [abs(v) for k, v in report.items() if k.startswith(("sso", "frozen"))]
    ineq = [max(0.0, v) for k, v in report.items() if k.startswith(("altitude", "collision"))]
    argp = best.p_final[3::BLOCK]
    start_best = max(r.start_objective for r in rep.results)
    record_property("objective", f"{best.objective_final:.6g}")
    record_property("best_start", f"{start_best:.6g}")
    record_property("max_residual", f"{max(eq + ineq):.1e}")
    assert len(eq) == 3 * s.m and len(ineq) == 2 * s.m + 1
    assert max(eq) < 1e-8 and max(ineq) < 1e-8
    assert np.all(argp == 90.0)
    assert best.objective_final > start_best
    assert best.objective_final >= 1.1 * start_best


@criterion(10, "optimize report.json byte-identical across worker counts")
def test_criterion_10_determinism(tmp_path, record_property):
    s = sio.preset("frozen-sso-reduced").with_changes(
        grid=TimeGrid(0.0, 6000.0, 16),
        solver=sio.SolverSettings(n_starts=3, max_iter=60, max_outer=20, inner_iter=20))
    path = tmp_path / "scenario.json"
    sio.save(s, path)
    outputs = []
    for workers in (1, 3):
        out = tmp_path / f"w{workers}"
        code = cli.main(["optimize", "--scenario", str(path), "--workers", str(workers),
                         "--out", str(out)])
        assert code in (cli.EXIT_OK, cli.EXIT_INFEASIBLE)
        outputs.append(out)
    a, b = ((o / "report.json").read_bytes() for o in outputs)
    record_property("report_bytes", len(a))
    assert a == b
    assert json.loads(a)["n_starts"] == 3
    assert (outputs[0] / "manifest.json").read_bytes() == (outputs[1] / "manifest.json").read_bytes()
