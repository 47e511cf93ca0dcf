"""Command-line entry point: propagate, field, optimize, report, constraints dump.

Exit codes: 0 success, 1 infeasible or failed run, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import scenario as sio
from .astro import PropagationError
from .constraints import ELEMENT_NAMES, BLOCK
from .perception import quality_field
from .problem import best_arrangement, build_constraints, build_problem
from .render import heatmap_svg, trajectories_svg
from .solver import NoFeasibleSolutionError, SolveReport, solve_maxmin

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2
SEED_ENV = "ORBITPLAN_SEED"


class InputError(Exception):
    """Bad flags, files, or scenario content; maps to exit code 2."""


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)


def _g(x: float) -> str:
    return format(float(x), ".17g")


def load_scenario(args) -> sio.Scenario:
    if args.preset:
        s = sio.preset(args.preset)
    else:
        s = sio.load(args.scenario)
    seed = s.seed
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError:
            raise InputError(f"{SEED_ENV} must be an integer, got {env!r}")
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    if seed < 0:
        raise InputError(f"seed must be nonnegative, got {seed}")
    return s.with_changes(seed=seed)


def _scenario_hash(s: sio.Scenario) -> str:
    return hashlib.sha256(sio.dumps(s).encode("utf-8")).hexdigest()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, command: str, s: sio.Scenario, files: list[str],
                   extra: Optional[dict] = None) -> Path:
    manifest = {
        "command": command,
        "scenario": s.name,
        "scenario_sha256": _scenario_hash(s),
        "seed": s.seed,
        "version": __version__,
        "outputs": [{"path": f, "sha256": _sha256(out / f)} for f in files],
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


# --- propagate ---

def cmd_propagate(args) -> int:
    s = load_scenario(args)
    prob, model = build_problem(s)
    out = _out_dir(args)
    sio.save(s, out / "scenario.json")
    files = ["scenario.json"]
    for i, eph in enumerate(model.targets):
        name = f"target-{i}.csv"
        eph.to_csv(out / name)
        files.append(name)
    write_manifest(out, "propagate", s, files)
    print(f"wrote {len(model.targets)} ephemerides to {out}")
    return EXIT_OK


# --- field ---

def _parse_grid(text: Optional[str], s: sio.Scenario) -> tuple[int, int, float]:
    if text is None:
        apo = max(t.a_km * (1 + t.e) for t in s.targets)
        return 81, 81, round(1.25 * apo, 3)
    try:
        nx, ny, extent = text.split(",")
        nx, ny, extent = int(nx), int(ny), float(extent)
    except ValueError:
        raise InputError(f"--grid expects nx,ny,extent_km, got {text!r}")
    if nx < 1 or ny < 1 or not extent > 0:
        raise InputError("--grid needs nx, ny >= 1 and a positive extent")
    return nx, ny, extent


def _axis(n: int, extent: float) -> np.ndarray:
    return np.zeros(1) if n == 1 else np.linspace(-extent, extent, n)


def cmd_field(args) -> int:
    s = load_scenario(args)
    k = args.sample
    if not 0 <= k < s.grid.n_samples:
        raise InputError(f"--sample must lie in [0, {s.grid.n_samples - 1}], got {k}")
    nx, ny, extent = _parse_grid(args.grid, s)
    prob, model = build_problem(s)
    xs, ys = _axis(nx, extent), _axis(ny, extent)
    X, Y = np.meshgrid(xs, ys)
    points = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    pos = np.array([e.positions[k] for e in model.targets])
    vel = np.array([e.velocities[k] for e in model.targets])
    values = quality_field(pos, vel, [t.faces for t in s.targets], s.agents[0].sensor,
                           s.sun_unit, points, s.constants, s.weights)
    out = _out_dir(args)
    stem = f"field-k{k}"
    _write_csv(out / f"{stem}.csv", ["x", "y", "z", "value"],
               ([_g(x), _g(y), _g(z), _g(v)] for (x, y, z), v in zip(points, values)))
    t = s.grid.times[k]
    svg = heatmap_svg(values.reshape(ny, nx), extent, s.constants.r_earth,
                      markers=[tuple(p[:2]) for p in pos],
                      title=f"{s.name}: quality field at k={k} (t={t:.1f} s)")
    (out / f"{stem}.svg").write_text(svg, encoding="utf-8")
    write_manifest(out, "field", s, [f"{stem}.csv", f"{stem}.svg"],
                   {"sample": k, "grid": [nx, ny, extent]})
    print(f"wrote {stem}.csv and {stem}.svg to {out}")
    return EXIT_OK


# --- optimize ---

def _result_summary(r) -> dict:
    return {"start": r.start_index, "objective": r.objective_final,
            "start_objective": r.start_objective, "max_violation": r.max_violation,
            "feasible": r.feasible, "termination": r.termination,
            "iterations": r.iterations, "evaluations": r.n_evaluations}


def _params_table(p) -> list[dict]:
    return [{name: float(p[BLOCK * j + e]) for e, name in enumerate(ELEMENT_NAMES)}
            for j in range(len(p) // BLOCK)]


def build_report(s: sio.Scenario, prob, model, rep: SolveReport, options: dict) -> dict:
    out = {
        "scenario": s.name,
        "scenario_sha256": _scenario_hash(s),
        "seed": rep.seed,
        "n_starts": rep.n_starts,
        "options": options,
        "feasible_starts": len(rep.feasible_results),
        "evaluations": rep.n_evaluations,
        "best_start_objective": max(r.start_objective for r in rep.results),
        "starts": [_result_summary(r) for r in rep.results],
        "best": None,
    }
    b = rep.best
    if b is not None:
        ev = prob.evaluation(b.p_final)
        n, L = model.shape
        jsum = np.asarray(ev.values).reshape(n, L)
        cons = prob.constraints
        out["best"] = {
            **_result_summary(b),
            "parameters": _params_table(b.p_final),
            "parameters_scaled": [float(x) for x in b.x_final],
            "j_sum": jsum.tolist(),
            "min_pairwise_distance_km": ev.d_min,
            "residuals": cons.residual_report(b.p_final, ev.d_min),
        }
        for g in cons.trailing_groups:
            _, score = best_arrangement(prob, b.p_final, g)
            out["best"].setdefault("arrangements", []).append(
                {"agents": list(g.members), "best_permutation_objective": score})
    return out


def _initial_points(paths, m: int) -> list[np.ndarray]:
    points = []
    for path in paths or ():
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            table = data["best"]["parameters"]
            p = np.array([[row[k] for k in ELEMENT_NAMES] for row in table], dtype=float).ravel()
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"--init-from {path}: cannot read best parameters ({exc})")
        if p.size != BLOCK * m:
            raise InputError(f"--init-from {path}: expected {m} agents, found {p.size // BLOCK}")
        points.append(p)
    return points


def cmd_optimize(args) -> int:
    s = load_scenario(args)
    n_starts = args.n_starts if args.n_starts is not None else s.solver.n_starts
    if n_starts < 1:
        raise InputError("--n-starts must be at least 1")
    workers = args.workers if args.workers is not None else s.solver.workers
    if workers < 1:
        raise InputError("--workers must be at least 1")
    inits = _initial_points(args.init_from, s.m)
    prob, model = build_problem(s, args.collision_mode, args.frozen_form)
    out = _out_dir(args)
    options = {"collision_mode": prob.collision_mode, "frozen_form": args.frozen_form,
               "initial_points": len(inits)}
    t0 = time.perf_counter()
    try:
        rep = solve_maxmin(prob, n_starts, s.seed, s.solver.options(), workers, inits)
        status = EXIT_OK
    except NoFeasibleSolutionError as exc:
        rep = exc.report
        status = EXIT_INFEASIBLE
    wall = time.perf_counter() - t0

    sio.save(s, out / "scenario.json")
    report = build_report(s, prob, model, rep, options)
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    rows = ([r.start_index, it, _g(obj), _g(viol)]
            for r in rep.results for it, obj, viol in r.history)
    _write_csv(out / "convergence.csv", ["start", "iter", "objective", "max_violation"], rows)
    files = ["scenario.json", "report.json", "convergence.csv"]
    if rep.best is not None:
        for j, eph in enumerate(model.agent_ephemerides(rep.best.p_final)):
            eph.to_csv(out / f"agent-{j}.csv")
            files.append(f"agent-{j}.csv")
        for i, eph in enumerate(model.targets):
            eph.to_csv(out / f"target-{i}.csv")
            files.append(f"target-{i}.csv")
    write_manifest(out, "optimize", s, files, {"n_starts": n_starts})
    # wall time stays out of the written files so reruns are byte-identical
    print(f"{len(rep.results)} starts in {wall:.1f} s with {workers} worker(s)", file=sys.stderr)
    if status == EXIT_INFEASIBLE:
        print("no feasible solution found; see report.json for per-start diagnostics",
              file=sys.stderr)
        return status
    print(f"best objective {rep.best.objective_final:.6g} (start {rep.best.start_index}), "
          f"max violation {rep.best.max_violation:.3g}")
    return EXIT_OK


# --- report ---

def _read_ephemeris(path: Path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:4]


def cmd_report(args) -> int:
    run = Path(args.run_dir)
    manifest_path = run / "manifest.json"
    if not manifest_path.is_file():
        raise InputError(f"no manifest.json in {run}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        report = json.loads((run / "report.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read run directory {run}: {exc}")
    print(f"scenario {report['scenario']}  seed {report['seed']}  starts {report['n_starts']}  "
          f"feasible {report['feasible_starts']}")
    best = report.get("best")
    if best is None:
        print("no feasible solution in this run")
        return EXIT_INFEASIBLE
    print(f"objective (min J_sum): {best['objective']:.6g}  from start {best['start']} "
          f"({best['termination']})")
    print(f"best sampled start objective: {report['best_start_objective']:.6g}")
    jsum = np.asarray(best["j_sum"])
    print("J_sum (rows: targets, columns: faces)")
    print("  target " + " ".join(f"{'face ' + str(l):>12}" for l in range(jsum.shape[1])))
    for i, row in enumerate(jsum):
        print(f"  {i:>6} " + " ".join(f"{v:12.6g}" for v in row))
    print(f"min pairwise distance: {best['min_pairwise_distance_km']:.6g} km")
    print("agent parameters")
    for j, row in enumerate(best["parameters"]):
        print(f"  {j}: " + "  ".join(f"{k}={v:.8g}" for k, v in row.items()))
    print("constraint residuals")
    for label, value in best["residuals"].items():
        print(f"  {label:<32} {value: .3e}")

    tracks = []
    for entry in manifest["outputs"]:
        name = entry["path"]
        if name.startswith(("agent-", "target-")) and name.endswith(".csv"):
            tracks.append((name[:-4], _read_ephemeris(run / name)))
    if tracks:
        try:
            r_earth = sio.load(run / "scenario.json").constants.r_earth
        except sio.ScenarioError:
            r_earth = 6371.0
        svg = trajectories_svg(tracks, r_earth, title=f"{report['scenario']}: optimized orbits")
        (run / "trajectories.svg").write_text(svg, encoding="utf-8")
        print(f"wrote {run / 'trajectories.svg'}")
    return EXIT_OK


# --- constraints dump ---

def cmd_constraints(args) -> int:
    s = load_scenario(args)
    print(build_constraints(s, args.collision_mode, args.frozen_form).describe())
    return EXIT_OK


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario JSON file")
    src.add_argument("--preset", choices=sorted(sio.PRESETS), help="built-in scenario")
    p.add_argument("--seed", type=int, help=f"override the scenario seed (and {SEED_ENV})")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--collision-mode", choices=("penalty", "constraint"))
    p.add_argument("--frozen-form", choices=("paper", "standard"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitplan",
                                     description="Observer orbit design by max-min perception quality.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="write target ephemerides")
    _add_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("field", help="quality field slice at one sample")
    _add_source(p)
    p.add_argument("--out", required=True)
    p.add_argument("--sample", type=int, default=0, help="0-based sample index k")
    p.add_argument("--grid", help="nx,ny,extent_km (equatorial plane)")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("optimize", help="multi-start max-min orbit design")
    _add_source(p)
    _add_overrides(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-starts", type=int)
    p.add_argument("--workers", type=int, help="threads for the start fan-out")
    p.add_argument("--init-from", action="append", metavar="REPORT",
                   help="add the best point of an earlier report.json as an extra start")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("report", help="summarize an optimize run")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("constraints", help="constraint system tools")
    csub = p.add_subparsers(dest="action", required=True)
    d = csub.add_parser("dump", help="print the assembled constraint system")
    _add_source(d)
    _add_overrides(d)
    d.set_defaults(func=cmd_constraints)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except sio.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PropagationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
