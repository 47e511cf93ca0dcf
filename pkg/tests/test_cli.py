import csv
import json

import numpy as np
import pytest

from orbitplan import cli
from orbitplan import scenario as sio
from orbitplan.astro import TimeGrid
from orbitplan.problem import build_problem

from .oracles import R_EARTH, circle_segment_clearance


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def small_scenario(tmp_path_factory):
    """Phasing toy cut down to a few seconds of solver work, with a collision constraint."""
    s = sio.preset("phasing-toy")
    s = s.with_changes(
        name="phasing-small",
        grid=TimeGrid(0.0, 8000.0, 60),
        constraints=(sio.ConstraintDecl("collision", {"tr_km": 3.0, "mode": "constraint"}),),
        solver=sio.SolverSettings(n_starts=3, max_iter=40, max_outer=20, inner_iter=20),
    )
    path = tmp_path_factory.mktemp("scn") / "small.json"
    sio.save(s, path)
    return path


@pytest.fixture(scope="module")
def optimized(small_scenario, tmp_path_factory):
    out = tmp_path_factory.mktemp("opt")
    assert run("optimize", "--scenario", small_scenario, "--out", out) == cli.EXIT_OK
    return out


# --- propagate ---

def test_propagate_writes_one_csv_per_target(tmp_path):
    assert run("propagate", "--preset", "illustrative-2d", "--out", tmp_path) == 0
    s = sio.preset("illustrative-2d")
    for i in range(5):
        rows = read_csv(tmp_path / f"target-{i}.csv")
        assert rows[0][0] == "t"
        assert len(rows) == s.grid.n_samples + 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "propagate"
    for entry in manifest["outputs"]:
        assert (tmp_path / entry["path"]).is_file()


def test_propagate_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("propagate", "--preset", "illustrative-2d", "--out", a) == 0
    assert run("propagate", "--preset", "illustrative-2d", "--out", b) == 0
    for name in ["scenario.json", "manifest.json"] + [f"target-{i}.csv" for i in range(5)]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_corrupt_scenario_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n "targets": [}\n')
    assert run("propagate", "--scenario", bad, "--out", tmp_path / "o") == cli.EXIT_INPUT
    assert "line 2" in capsys.readouterr().err


def test_invalid_scenario_exits_2(tmp_path, capsys):
    d = json.loads(sio.dumps(sio.preset("illustrative-2d")))
    d["targets"][0]["e"] = 1.2
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    assert run("propagate", "--scenario", path, "--out", tmp_path / "o") == cli.EXIT_INPUT
    assert "rso-1" in capsys.readouterr().err


def test_seed_precedence(monkeypatch, tmp_path):
    path = tmp_path / "s.json"
    sio.save(sio.preset("phasing-toy").with_changes(seed=4), path)
    args = cli.build_parser().parse_args(["propagate", "--scenario", str(path), "--out", "x"])
    assert cli.load_scenario(args).seed == 4
    monkeypatch.setenv(cli.SEED_ENV, "11")
    assert cli.load_scenario(args).seed == 11
    args.seed = 3
    assert cli.load_scenario(args).seed == 3
    monkeypatch.setenv(cli.SEED_ENV, "eleven")
    args.seed = None
    with pytest.raises(cli.InputError):
        cli.load_scenario(args)


# --- field ---

def test_field_shadow_side_bound(tmp_path):
    n, extent = 41, 12000.0
    assert run("field", "--preset", "illustrative-2d", "--sample", 1,
               "--grid", f"{n},{n},{extent}", "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "field-k1.csv")
    assert rows[0] == ["x", "y", "z", "value"] and len(rows) == n * n + 1
    assert (tmp_path / "field-k1.svg").read_text().startswith("<svg")
    data = np.array([[float(v) for v in r] for r in rows[1:]])

    s = sio.preset("illustrative-2d")
    _, model = build_problem(s)
    pos = np.array([e.positions[1] for e in model.targets])
    dark = s.agents[0].sensor.q_dark ** s.weights.lum
    # inside the umbra cylinder: x < 0 and within one Earth radius of the sun line
    in_umbra = (pos[:, 0] < 0) & (np.hypot(pos[:, 1], pos[:, 2]) < R_EARTH)
    behind = (data[:, 0] < -1.05 * R_EARTH) & (np.abs(data[:, 1]) < 0.9 * R_EARTH)
    assert behind.sum() > 10
    for x, y, z, value in data[behind]:
        bound = 0.0
        for r, dark_target in zip(pos, in_umbra):
            visible = circle_segment_clearance((x, y, z), r) >= R_EARTH
            bound += (dark if dark_target else 1.0) if visible else 0.0
        assert value <= bound + 1e-12
    inside = np.hypot(data[:, 0], data[:, 1]) < R_EARTH
    assert np.isnan(data[inside, 3]).all()
    assert not np.isnan(data[~inside, 3]).any()


def test_field_single_point_grid(tmp_path):
    assert run("field", "--preset", "illustrative-2d", "--grid", "1,1,9000",
               "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "field-k0.csv")
    assert len(rows) == 2


def test_field_evolves_between_samples(tmp_path):
    for k in (1, 2):
        assert run("field", "--preset", "illustrative-2d", "--sample", k,
                   "--grid", "21,21,12000", "--out", tmp_path) == 0
    a = read_csv(tmp_path / "field-k1.csv")
    b = read_csv(tmp_path / "field-k2.csv")
    assert a != b


def test_field_rejects_bad_sample(tmp_path):
    assert run("field", "--preset", "illustrative-2d", "--sample", 180,
               "--out", tmp_path) == cli.EXIT_INPUT
    assert run("field", "--preset", "illustrative-2d", "--grid", "0,3,100",
               "--out", tmp_path) == cli.EXIT_INPUT


# --- optimize / report ---

def test_optimize_outputs(optimized):
    report = json.loads((optimized / "report.json").read_text())
    assert report["n_starts"] == 3 and len(report["starts"]) == 3
    best = report["best"]
    assert all(abs(v) < 1e-8 or v <= 0 for v in best["residuals"].values())
    assert best["min_pairwise_distance_km"] >= 3.0
    assert np.asarray(best["j_sum"]).shape == (1, 2)
    rows = read_csv(optimized / "convergence.csv")
    assert rows[0] == ["start", "iter", "objective", "max_violation"]
    assert {r[0] for r in rows[1:]} == {"0", "1", "2"}
    manifest = json.loads((optimized / "manifest.json").read_text())
    names = {e["path"] for e in manifest["outputs"]}
    assert {"report.json", "convergence.csv", "agent-0.csv", "agent-1.csv"} <= names
    assert manifest["n_starts"] == 3


def test_n_starts_flag_recorded(small_scenario, tmp_path):
    assert run("optimize", "--scenario", small_scenario, "--n-starts", 1,
               "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["n_starts"] == 1
    assert json.loads((tmp_path / "manifest.json").read_text())["n_starts"] == 1


def test_init_from_adds_a_start(small_scenario, optimized, tmp_path):
    assert run("optimize", "--scenario", small_scenario, "--n-starts", 1,
               "--init-from", optimized / "report.json", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["starts"]) == 2
    before = json.loads((optimized / "report.json").read_text())["best"]["objective"]
    assert report["best"]["objective"] >= before - 1e-9


def test_rerun_is_byte_identical(small_scenario, optimized, tmp_path):
    assert run("optimize", "--scenario", small_scenario, "--out", tmp_path) == 0
    for name in ("report.json", "convergence.csv", "manifest.json", "agent-0.csv"):
        assert (tmp_path / name).read_bytes() == (optimized / name).read_bytes()


def test_report_summary(optimized, capsys):
    assert run("report", optimized) == 0
    text = capsys.readouterr().out
    assert "min pairwise distance" in text
    table = text.split("J_sum (rows: targets, columns: faces)")[1].splitlines()[1:3]
    assert table[0].split() == ["target", "face", "0", "face", "1"]
    assert table[1].split()[0] == "0" and len(table[1].split()) == 3
    assert (optimized / "trajectories.svg").read_text().startswith("<svg")


def test_report_without_manifest(tmp_path):
    assert run("report", tmp_path) == cli.EXIT_INPUT


def test_infeasible_run_exits_1(tmp_path):
    s = sio.preset("phasing-toy").with_changes(
        grid=TimeGrid(0.0, 4000.0, 20),
        # the inner agent's circular orbit sits below the 1000 km floor
        constraints=(sio.ConstraintDecl("altitude_min", {"agents": [0], "c_km": 1000.0}),),
        solver=sio.SolverSettings(n_starts=1, max_iter=10, max_outer=3, inner_iter=5))
    path = tmp_path / "s.json"
    sio.save(s, path)
    assert run("optimize", "--scenario", path, "--out", tmp_path / "o") == cli.EXIT_INFEASIBLE
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["best"] is None and report["starts"][0]["feasible"] is False


def test_constraints_dump(capsys):
    assert run("constraints", "dump", "--preset", "illustrative-2d") == 0
    text = capsys.readouterr().out
    assert "co_orbital" in text and "collision: tr=3 km" in text
