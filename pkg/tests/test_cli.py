import csv
import json

import pytest

from ddro.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVE,
    RunConfig,
    config_from_args,
    instance_seed,
    main,
    nearest_rank,
    run,
)
from ddro.model import problem_to_json
from ddro.oracle import build_rosat, Cnf3


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")  # metadata header line
    reader = csv.DictReader(lines[1:])
    return list(reader)


def body_without_timings(path):
    rows = read_rows(path)
    for row in rows:
        row["wall_time_s"] = ""
    return rows


def test_nearest_rank():
    values = [4.0, 1.0, 3.0, 2.0]
    assert nearest_rank(values, 50) == 2.0
    assert nearest_rank(values, 25) == 1.0
    assert nearest_rank(values, 75) == 3.0
    assert nearest_rank(values, 100) == 4.0


def test_instance_seed_is_stable():
    assert instance_seed(7, 0, 0) == instance_seed(7, 0, 0)
    assert instance_seed(7, 0, 0) != instance_seed(7, 0, 1)


def test_figure1_run(tmp_path, capsys):
    cfg = RunConfig(experiment="figure1", out_dir=str(tmp_path))
    assert run(cfg) == EXIT_OK
    out = capsys.readouterr().out
    for token in ("95", "127", "97.4", "110.15", "95.3", "108.1"):
        assert token in out
    rows = read_rows(tmp_path / "figure1.csv")
    worst = {r["formulation"]: float(r["objective"]) for r in rows if ":" not in r["formulation"]}
    assert worst["nominal"] == pytest.approx(127.0, abs=1e-6)
    assert worst["robust"] == pytest.approx(110.15, abs=1e-6)
    assert worst["endogenous"] == pytest.approx(108.1, abs=1e-6)


def test_experiment1_rows_and_agreement(tmp_path):
    cfg = RunConfig(
        experiment="1", nodes=8, instances=3, seed=7,
        formulation="all", out_dir=str(tmp_path),
    )
    assert run(cfg) == EXIT_OK
    rows = read_rows(tmp_path / "experiment_1.csv")
    assert len(rows) == 9  # instances x formulations
    by_seed = {}
    for row in rows:
        by_seed.setdefault(row["instance_seed"], []).append(float(row["objective"]))
    for objs in by_seed.values():
        assert max(objs) - min(objs) <= 1e-6 * (1 + abs(objs[0]))
    assert (tmp_path / "exp1_times.dat").exists()


def test_rerun_reproduces_body(tmp_path):
    cfg = dict(experiment="1", nodes=8, instances=2, seed=11, formulation="pibar")
    run(RunConfig(out_dir=str(tmp_path / "a"), **cfg))
    run(RunConfig(out_dir=str(tmp_path / "b"), **cfg))
    rows_a = body_without_timings(tmp_path / "a" / "experiment_1.csv")
    rows_b = body_without_timings(tmp_path / "b" / "experiment_1.csv")
    assert rows_a == rows_b


def test_experiment5_monotone_output(tmp_path):
    cfg = RunConfig(
        experiment="5", nodes=8, instances=2, seed=5,
        formulation="pibar", out_dir=str(tmp_path),
    )
    assert run(cfg) == EXIT_OK
    data = (tmp_path / "exp5_z.dat").read_text().splitlines()[1:]
    medians = [float(line.split()[1]) for line in data]
    assert all(b >= a - 1e-6 for a, b in zip(medians, medians[1:]))


def test_experiment6_rows(tmp_path):
    cfg = RunConfig(
        experiment="6", nodes=7, instances=1, seed=5,
        formulation="pibar", samples=200, out_dir=str(tmp_path),
    )
    assert run(cfg) == EXIT_OK
    rows = read_rows(tmp_path / "experiment_6.csv")
    tags = {r["formulation"] for r in rows}
    for tag in ("ro", "so", "ro-ddu", "so-ddu", "ro:worst", "so-ddu:avg"):
        assert tag in tags
    assert (tmp_path / "exp6_ro_worst.dat").exists()


def test_config_error_exit():
    assert main(["--experiment", "1", "--nodes", "-3"]) == EXIT_CONFIG
    assert main(["--experiment", "single"]) == EXIT_CONFIG


def test_solve_failure_records_error(tmp_path):
    # a one-node limit cannot close any robust solve
    cfg = RunConfig(
        experiment="1", nodes=8, instances=1, seed=13,
        formulation="pibar", node_limit=1, out_dir=str(tmp_path),
    )
    assert run(cfg) == EXIT_SOLVE
    record = json.loads((tmp_path / "error.json").read_text())
    assert record["type"] == "NodeLimitExceeded"
    assert "config" in record


def test_solve_failure_flushes_partial_rows(tmp_path, monkeypatch):
    # first instance solves, second blows up: its rows must still land on disk
    import ddro.cli as cli_mod

    real = cli_mod._task_exp1
    calls = {"n": 0}

    def flaky(payload):
        calls["n"] += 1
        if calls["n"] > 1:
            raise cli_mod.SolveFailure("synthetic failure")
        return real(payload)

    monkeypatch.setitem(cli_mod._TASK_FUNCS, "exp1", flaky)
    cfg = RunConfig(
        experiment="1", nodes=7, instances=2, seed=3,
        formulation="pibar", out_dir=str(tmp_path),
    )
    assert run(cfg) == EXIT_SOLVE
    partial = read_rows(tmp_path / "experiment_1_partial.csv")
    assert len(partial) == 1
    assert (tmp_path / "error.json").exists()


def test_config_file_merging(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"experiment": "figure1", "out_dir": str(tmp_path)}))
    cfg = config_from_args(["--config", str(cfg_path)])
    assert cfg.experiment == "figure1"
    # explicit flags override the file
    cfg2 = config_from_args(["--config", str(cfg_path), "--experiment", "1"])
    assert cfg2.experiment == "1"


def test_single_mode_solves_problem(tmp_path, capsys):
    problem = build_rosat(Cnf3(2, ((1, 2, -1),)))
    path = tmp_path / "problem.json"
    path.write_text(problem_to_json(problem))
    cfg = RunConfig(
        experiment="single", problem=str(path), formulation="bigm",
        out_dir=str(tmp_path), bigm=2.0,
    )
    assert run(cfg) == EXIT_OK
    out = capsys.readouterr().out
    assert "objective:" in out and "audit:" in out and "feasible" in out
    report = json.loads((tmp_path / "single.json").read_text())
    assert report["objective"] == pytest.approx(-1.0, abs=1e-8)
    assert report["audit_feasible"]


def test_single_mode_no_uncertain_rows(tmp_path, capsys):
    from ddro.model import RobustLinearProblem

    problem = RobustLinearProblem(
        c=[1.0, 0.5],
        f=[-1.0],
        rows=[],
        y_lower=[0.0],
        y_upper=[2.0],
    )
    path = tmp_path / "plain.json"
    path.write_text(problem_to_json(problem))
    cfg = RunConfig(
        experiment="single", problem=str(path), formulation="all",
        out_dir=str(tmp_path),
    )
    assert run(cfg) == EXIT_OK
    report = json.loads((tmp_path / "single.json").read_text())
    # classical LP answer: buy nothing, push y to its upper bound
    assert report["objective"] == pytest.approx(-2.0, abs=1e-9)
    assert report["audit_feasible"]


def test_parallel_run_matches_serial(tmp_path):
    base = dict(experiment="1", nodes=7, instances=2, seed=3, formulation="pibar")
    run(RunConfig(out_dir=str(tmp_path / "serial"), threads=1, **base))
    run(RunConfig(out_dir=str(tmp_path / "par"), threads=2, **base))
    rows_a = body_without_timings(tmp_path / "serial" / "experiment_1.csv")
    rows_b = body_without_timings(tmp_path / "par" / "experiment_1.csv")
    assert rows_a == rows_b
