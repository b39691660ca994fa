"""Batch experiment runner and single-instance solver front-end.

Writes one CSV per experiment (schema below) plus gnuplot-style data files
(``x median p25 p75``) for the figure analogues.  Result bodies are
deterministic for a fixed config; wall-clock timings are the one measured
(non-reproducible) column.

CSV schema:
    experiment,cell_params,instance_seed,formulation,objective,
    n_star,n_tilde,price,benefit,nodes_explored,wall_time_s
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .milp import DEFAULT_NODE_LIMIT, solve_milp
from .model import problem_from_json
from .oracle import robust_feasible
from .reformulate import (
    build_bigm_counterpart,
    build_modified_bigm_counterpart,
    build_pibar_counterpart,
    choose_bigm,
    extract_xy,
)
from .spbench import (
    FORMULATIONS,
    SpInstance,
    compute_observables,
    evaluate_solution,
    expected_cost,
    figure1_table,
    generate_graph,
    solve_sp_robust,
    solve_sp_stochastic,
)

EXPERIMENTS = ("1", "2", "3", "4", "5", "6", "figure1", "single")

CSV_COLUMNS = [
    "experiment",
    "cell_params",
    "instance_seed",
    "formulation",
    "objective",
    "n_star",
    "n_tilde",
    "price",
    "benefit",
    "nodes_explored",
    "wall_time_s",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVE = 3


class ConfigError(Exception):
    pass


class SolveFailure(Exception):
    pass


@dataclass
class RunConfig:
    experiment: str = "1"
    nodes: int | None = None
    instances: int | None = None
    seed: int = 20240
    gamma: float = 0.2
    cost: float | None = None
    budget: float | None = None
    formulation: str = "all"
    samples: int = 2000
    out_dir: str = "results"
    node_limit: int = DEFAULT_NODE_LIMIT
    threads: int = 1
    problem: str | None = None
    bigm: float | None = None  # explicit fence for "single" on general sets

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.formulation not in FORMULATIONS + ("all",):
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        for name in ("nodes", "instances", "samples", "node_limit", "threads"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("gamma", "cost", "budget"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.gamma >= 1:
            raise ConfigError("gamma must be below 1")
        if self.experiment == "single" and not self.problem:
            raise ConfigError("experiment 'single' needs --problem <json>")


def _resolved(cfg: RunConfig) -> RunConfig:
    """Fill per-experiment defaults for fields the user left unset."""
    defaults = {"1": 50, "2": 50, "3": 50}
    nodes = cfg.nodes if cfg.nodes is not None else defaults.get(cfg.experiment, 30)
    instances = cfg.instances if cfg.instances is not None else 20
    cost = cfg.cost if cfg.cost is not None else 1.0
    budget = cfg.budget
    if budget is None:
        budget = 12.0 if cfg.experiment == "4" else 2.0
    return replace(cfg, nodes=nodes, instances=instances, cost=cost, budget=budget)


def instance_seed(base_seed: int, cell: int, index: int) -> int:
    """Deterministic 64-bit stream seed for one (cell, instance) pair."""
    ss = np.random.SeedSequence((int(base_seed), int(cell), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def nearest_rank(values, q: float) -> float:
    """Nearest-rank percentile (q in (0, 100])."""
    s = sorted(values)
    if not s:
        raise ValueError("empty sample")
    k = max(1, math.ceil(q / 100.0 * len(s)))
    return float(s[k - 1])


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _write_csv(path: Path, rows, meta: dict):
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])


def _write_plot(path: Path, series):
    """gnuplot-style data: one line per x with median and quartile columns."""
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# x median p25 p75\n")
        for x, values in series:
            fh.write(
                f"{_fmt(float(x))} {_fmt(nearest_rank(values, 50))} "
                f"{_fmt(nearest_rank(values, 25))} {_fmt(nearest_rank(values, 75))}\n"
            )


def _row(cfg, cell_params, seed, formulation, objective=None, sol=None, **extra):
    if objective is None and sol is not None:
        objective = sol.objective
    row = {
        "experiment": cfg.experiment,
        "cell_params": json.dumps(cell_params, sort_keys=True, separators=(",", ":")),
        "instance_seed": seed,
        "formulation": formulation,
        "objective": objective,
    }
    if sol is not None:
        row["n_star"] = sol.n_star
        row["n_tilde"] = sol.n_tilde
        row["nodes_explored"] = sol.nodes_explored
        row["wall_time_s"] = sol.wall_time
    row.update(extra)
    return row


def _single_formulation(cfg) -> str:
    return "pibar" if cfg.formulation == "all" else cfg.formulation


def _assert_agreement(objectives: dict):
    vals = list(objectives.values())
    scale = 1.0 + max(abs(v) for v in vals)
    if max(vals) - min(vals) > 1e-6 * scale:
        raise SolveFailure(f"formulations disagree: {objectives}")


# --- per-instance workers (module-level for the process pool) ---------------


def _task_exp1(payload):
    cfg, cell_idx, idx = payload
    seed = instance_seed(cfg.seed, cell_idx, idx)
    graph = generate_graph(cfg.nodes, seed)
    inst = SpInstance(graph, cfg.budget, cfg.gamma, cfg.cost)
    forms = FORMULATIONS if cfg.formulation == "all" else (cfg.formulation,)
    cell = {"nodes": cfg.nodes, "gamma": cfg.gamma, "cost": cfg.cost, "budget": cfg.budget}
    rows = []
    objectives = {}
    for form in forms:
        sol = solve_sp_robust(inst, form, cfg.node_limit)
        objectives[form] = sol.objective
        rows.append(_row(cfg, cell, seed, form, sol=sol))
    if cfg.formulation == "all":
        _assert_agreement(objectives)
    return rows


def _solve_triplet(cfg, inst, form):
    """Nominal, budget-only robust, and decision-dependent robust solves."""
    g = inst.graph
    nominal = solve_sp_robust(replace(inst, budget=0.0, gamma=np.zeros(g.n_edges)), form, cfg.node_limit)
    robust = solve_sp_robust(replace(inst, gamma=np.zeros(g.n_edges)), form, cfg.node_limit)
    ddu = solve_sp_robust(inst, form, cfg.node_limit)
    return nominal, robust, ddu


def _task_sweep_sizes(payload):
    cfg, cell_idx, idx, nodes = payload
    seed = instance_seed(cfg.seed, cell_idx, idx)
    graph = generate_graph(nodes, seed)
    inst = SpInstance(graph, cfg.budget, cfg.gamma, cfg.cost)
    form = _single_formulation(cfg)
    nominal, robust, ddu = _solve_triplet(cfg, inst, form)
    obs = compute_observables(nominal, robust, ddu)
    cell = {"nodes": nodes, "gamma": cfg.gamma, "cost": cfg.cost, "budget": cfg.budget}
    return [
        _row(cfg, cell, seed, f"{form}:nominal", sol=nominal),
        _row(cfg, cell, seed, f"{form}:robust", sol=robust),
        _row(
            cfg, cell, seed, f"{form}:ddu", sol=ddu,
            price=obs.price_of_robustness, benefit=obs.benefit_of_interaction,
        ),
    ]


def _task_sweep_cost(payload):
    cfg, idx, costs = payload
    seed = instance_seed(cfg.seed, 0, idx)
    graph = generate_graph(cfg.nodes, seed)
    form = _single_formulation(cfg)
    base = SpInstance(graph, cfg.budget, cfg.gamma, 0.0)
    nominal = solve_sp_robust(
        replace(base, budget=0.0, gamma=np.zeros(graph.n_edges)), form, cfg.node_limit
    )
    robust = solve_sp_robust(replace(base, gamma=np.zeros(graph.n_edges)), form, cfg.node_limit)
    rows = []
    for c in costs:
        inst = SpInstance(graph, cfg.budget, cfg.gamma, c)
        ddu = solve_sp_robust(inst, form, cfg.node_limit)
        obs = compute_observables(nominal, robust, ddu)
        cell = {"nodes": cfg.nodes, "gamma": cfg.gamma, "cost": c, "budget": cfg.budget}
        rows.append(
            _row(
                cfg, cell, seed, f"{form}:ddu", sol=ddu,
                price=obs.price_of_robustness, benefit=obs.benefit_of_interaction,
            )
        )
    return rows


def _task_sweep_budget(payload):
    cfg, idx, budgets = payload
    seed = instance_seed(cfg.seed, 0, idx)
    graph = generate_graph(cfg.nodes, seed)
    form = _single_formulation(cfg)
    zeros = np.zeros(graph.n_edges)
    nominal = solve_sp_robust(
        SpInstance(graph, 0.0, zeros, cfg.cost), form, cfg.node_limit
    )
    rows = []
    for budget in budgets:
        robust = solve_sp_robust(SpInstance(graph, budget, zeros, cfg.cost), form, cfg.node_limit)
        ddu = solve_sp_robust(SpInstance(graph, budget, cfg.gamma, cfg.cost), form, cfg.node_limit)
        obs = compute_observables(nominal, robust, ddu)
        cell = {"nodes": cfg.nodes, "gamma": cfg.gamma, "cost": cfg.cost, "budget": budget}
        rows.append(
            _row(
                cfg, cell, seed, f"{form}:ddu", sol=ddu,
                price=obs.price_of_robustness, benefit=obs.benefit_of_interaction,
            )
        )
    return rows


def _task_so_compare(payload):
    cfg, idx, costs = payload
    seed = instance_seed(cfg.seed, 0, idx)
    graph = generate_graph(cfg.nodes, seed)
    form = _single_formulation(cfg)
    zeros = np.zeros(graph.n_edges)
    rows = []
    for c in costs:
        inst = SpInstance(graph, cfg.budget, cfg.gamma, c)
        plain = replace(inst, gamma=zeros)
        solutions = {
            "ro": solve_sp_robust(plain, form, cfg.node_limit),
            "ro-ddu": solve_sp_robust(inst, form, cfg.node_limit),
            "so": solve_sp_stochastic(plain, cfg.node_limit),
            "so-ddu": solve_sp_stochastic(inst, cfg.node_limit),
        }
        cell = {"nodes": cfg.nodes, "gamma": cfg.gamma, "cost": c, "budget": cfg.budget}
        mc_seed = instance_seed(cfg.seed, 1000 + idx, len(rows))
        for tag, sol in solutions.items():
            rows.append(_row(cfg, cell, seed, tag, sol=sol))
            worst = evaluate_solution(sol, inst, mode="worst")
            exact_avg = expected_cost(sol, inst)
            mc_avg = evaluate_solution(sol, inst, mode="average", samples=cfg.samples, seed=mc_seed)
            rows.append(_row(cfg, cell, seed, f"{tag}:worst", objective=worst))
            rows.append(_row(cfg, cell, seed, f"{tag}:avg", objective=exact_avg))
            rows.append(_row(cfg, cell, seed, f"{tag}:avg-mc", objective=mc_avg))
        # Optimality sanity: each solve dominates in its own metric.
        roddu_w = evaluate_solution(solutions["ro-ddu"], inst, mode="worst")
        soddu_w = evaluate_solution(solutions["so-ddu"], inst, mode="worst")
        if roddu_w > soddu_w + 1e-6:
            raise SolveFailure("robust solution beaten in its own worst-case metric")
        if expected_cost(solutions["so-ddu"], inst) > expected_cost(solutions["ro-ddu"], inst) + 1e-6:
            raise SolveFailure("stochastic solution beaten in its own expectation metric")
    return rows


_TASK_FUNCS = {
    "exp1": _task_exp1,
    "sizes": _task_sweep_sizes,
    "cost": _task_sweep_cost,
    "budget": _task_sweep_budget,
    "so": _task_so_compare,
}


def _dispatch(kind, payload):
    return _TASK_FUNCS[kind](payload)


class _PartialFailure(Exception):
    """Carries rows completed before a task failed."""

    def __init__(self, rows, cause):
        self.rows = rows
        self.cause = cause
        super().__init__(str(cause))


def _run_tasks(cfg, tasks):
    """Run (kind, payload) tasks, preserving submission order in the output."""
    rows = []
    try:
        if cfg.threads > 1:
            with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                for chunk in pool.map(_dispatch, *zip(*tasks)):
                    rows.extend(chunk)
        else:
            for kind, payload in tasks:
                rows.extend(_dispatch(kind, payload))
    except Exception as exc:
        raise _PartialFailure(rows, exc) from exc
    return rows


def _collect_series(rows, formulation, x_key, value_key="objective"):
    """Group rows of one formulation tag by a cell parameter."""
    buckets = {}
    for row in rows:
        if row["formulation"] != formulation or row.get(value_key) in (None, ""):
            continue
        x = json.loads(row["cell_params"])[x_key]
        buckets.setdefault(x, []).append(float(row[value_key]))
    return sorted(buckets.items())


def run(cfg: RunConfig) -> int:
    """Execute one experiment; returns a process exit code."""
    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = _resolved(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "generator": "numpy PCG64 seeded by SeedSequence((seed, cell, instance))",
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    rows = []
    try:
        if cfg.experiment == "figure1":
            return _run_figure1(cfg, out, meta)
        if cfg.experiment == "single":
            return _run_single(cfg, out, meta)
        if cfg.experiment == "1":
            tasks = [("exp1", (cfg, 0, i)) for i in range(cfg.instances)]
            rows = _run_tasks(cfg, tasks)
            _write_csv(out / "experiment_1.csv", rows, meta)
            forms = FORMULATIONS if cfg.formulation == "all" else (cfg.formulation,)
            series = []
            for form in forms:
                times = [float(r["wall_time_s"]) for r in rows if r["formulation"] == form]
                series.append((form, times))
            with (out / "exp1_times.dat").open("w", encoding="utf-8") as fh:
                fh.write("# formulation median p25 p75\n")
                for form, times in series:
                    fh.write(
                        f"{form} {_fmt(nearest_rank(times, 50))} "
                        f"{_fmt(nearest_rank(times, 25))} {_fmt(nearest_rank(times, 75))}\n"
                    )
        elif cfg.experiment in ("2", "3"):
            sizes = [n for n in (20, 30, 40, 50) if n <= cfg.nodes] or [cfg.nodes]
            tasks = [
                ("sizes", (cfg, ci, i, n))
                for ci, n in enumerate(sizes)
                for i in range(cfg.instances)
            ]
            rows = _run_tasks(cfg, tasks)
            form = _single_formulation(cfg)
            _write_csv(out / f"experiment_{cfg.experiment}.csv", rows, meta)
            if cfg.experiment == "2":
                _write_plot(out / "exp2_z_robust.dat", _collect_series(rows, f"{form}:robust", "nodes"))
                _write_plot(out / "exp2_z_ddu.dat", _collect_series(rows, f"{form}:ddu", "nodes"))
            else:
                _write_plot(out / "exp3_nstar.dat", _collect_series(rows, f"{form}:ddu", "nodes", "n_star"))
                _write_plot(out / "exp3_ntilde.dat", _collect_series(rows, f"{form}:ddu", "nodes", "n_tilde"))
        elif cfg.experiment == "4":
            costs = [0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0]
            tasks = [("cost", (cfg, i, costs)) for i in range(cfg.instances)]
            rows = _run_tasks(cfg, tasks)
            form = _single_formulation(cfg)
            _write_csv(out / "experiment_4.csv", rows, meta)
            _write_plot(out / "exp4_benefit.dat", _collect_series(rows, f"{form}:ddu", "cost", "benefit"))
            _write_plot(out / "exp4_z.dat", _collect_series(rows, f"{form}:ddu", "cost"))
        elif cfg.experiment == "5":
            budgets = [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0]
            tasks = [("budget", (cfg, i, budgets)) for i in range(cfg.instances)]
            rows = _run_tasks(cfg, tasks)
            form = _single_formulation(cfg)
            _write_csv(out / "experiment_5.csv", rows, meta)
            _write_plot(out / "exp5_z.dat", _collect_series(rows, f"{form}:ddu", "budget"))
            _write_plot(out / "exp5_price.dat", _collect_series(rows, f"{form}:ddu", "budget", "price"))
            _write_plot(out / "exp5_benefit.dat", _collect_series(rows, f"{form}:ddu", "budget", "benefit"))
            _write_plot(out / "exp5_nstar.dat", _collect_series(rows, f"{form}:ddu", "budget", "n_star"))
        elif cfg.experiment == "6":
            costs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
            tasks = [("so", (cfg, i, costs)) for i in range(cfg.instances)]
            rows = _run_tasks(cfg, tasks)
            _write_csv(out / "experiment_6.csv", rows, meta)
            for tag in ("ro", "ro-ddu", "so", "so-ddu"):
                safe = tag.replace("-", "")
                _write_plot(out / f"exp6_{safe}_worst.dat", _collect_series(rows, f"{tag}:worst", "cost"))
                _write_plot(out / f"exp6_{safe}_avg.dat", _collect_series(rows, f"{tag}:avg", "cost"))
    except Exception as exc:  # solve failures: flush partial results, record, exit 3
        if isinstance(exc, _PartialFailure):
            rows = rows or exc.rows
            exc = exc.cause
        if rows:
            _write_csv(out / f"experiment_{cfg.experiment}_partial.csv", rows, meta)
        record = {
            "error": str(exc),
            "type": type(exc).__name__,
            "traceback": traceback.format_exc(),
            "config": meta["config"],
        }
        (out / "error.json").write_text(json.dumps(record, indent=2))
        print(f"solve failure: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    return EXIT_OK


def _run_figure1(cfg, out, meta):
    form = _single_formulation(cfg)
    table = figure1_table(form, cfg.node_limit)
    rows = []
    print(f"{'setting':<12} {'path value':>12} {'worst case':>12}")
    for label, nominal, worst, sol in table:
        print(f"{label:<12} {nominal:>12.6g} {worst:>12.6g}")
        cell = {"network": "figure1"}
        rows.append(_row(cfg, cell, "", f"{label}:nominal", objective=nominal))
        rows.append(
            _row(
                cfg, cell, "", label, objective=worst,
                n_star=sol.n_star, n_tilde=sol.n_tilde,
                nodes_explored=sol.nodes_explored, wall_time_s=sol.wall_time,
            )
        )
    _write_csv(out / "figure1.csv", rows, meta)
    return EXIT_OK


_BUILDERS = {
    "pibar": lambda prob, M: build_pibar_counterpart(prob),
    "bigm": build_bigm_counterpart,
    "modbigm": build_modified_bigm_counterpart,
}


def _run_single(cfg, out, meta):
    problem = problem_from_json(Path(cfg.problem).read_text())
    forms = FORMULATIONS if cfg.formulation == "all" else (cfg.formulation,)
    need_m = any(f in forms for f in ("bigm", "modbigm"))
    M = cfg.bigm if cfg.bigm is not None else (choose_bigm(problem) if need_m else None)
    objectives = {}
    last = None
    for form in forms:
        mip = _BUILDERS[form](problem, M)
        res = solve_milp(mip, node_limit=cfg.node_limit)
        if res.status != "optimal":
            raise SolveFailure(f"{form} counterpart is {res.status}")
        x, y = extract_xy(mip, res.incumbent)
        objectives[form] = res.objective_value
        last = (form, x, y, res)
    if cfg.formulation == "all":
        _assert_agreement(objectives)
    form, x, y, res = last
    feasible, audits = robust_feasible(problem, x, y)
    print(f"formulation: {form}")
    print(f"objective:   {res.objective_value:.10g}")
    print(f"x*:          {np.array2string(x, precision=6)}")
    print(f"y*:          {np.array2string(y, precision=6)}")
    print(f"audit:       {'feasible' if feasible else 'INFEASIBLE'}")
    for audit in audits:
        print(
            f"  row {audit.row}: worst={audit.worst_value:.10g} "
            f"lhs={audit.lhs_total:.10g} bound={audit.bound:.10g} slack={audit.slack:.10g}"
        )
    if not feasible:
        raise SolveFailure("oracle audit failed on the solved problem")
    report = {
        "objective": res.objective_value,
        "objectives": objectives,
        "x": x.tolist(),
        "y": y.tolist(),
        "nodes_explored": res.nodes_explored,
        "audit_feasible": feasible,
    }
    (out / "single.json").write_text(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddro",
        description="Decision-dependent robust shortest-path experiments.",
    )
    parser.add_argument("--experiment", default=None, choices=EXPERIMENTS)
    parser.add_argument("--nodes", type=int, default=None)
    parser.add_argument("--instances", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--cost", type=float, default=None)
    parser.add_argument("--budget", type=float, default=None)
    parser.add_argument("--formulation", default=None, choices=FORMULATIONS + ("all",))
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--out-dir", default=None)
    parser.add_argument("--node-limit", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--problem", default=None, help="problem JSON for --experiment single")
    parser.add_argument(
        "--bigm", type=float, default=None,
        help="explicit linearization constant for --experiment single",
    )
    parser.add_argument("--config", default=None, help="JSON file with RunConfig fields")
    return parser


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}")
    field_names = {f.name for f in fields(RunConfig)}
    unknown = set(values) - field_names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name in field_names:
        arg = getattr(args, name.replace("-", "_"), None)
        if arg is not None:
            values[name] = arg
    return RunConfig(**values)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
