"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.  Tolerances are fixed here, straight from the
criteria.
"""

import itertools
import time

import numpy as np

from ddro.linprog import LE, MIN, OPTIMAL, solve_lp
from ddro.milp import solve_milp
from ddro.model import PiBarUSet
from ddro.oracle import (
    Cnf3,
    hbar_value,
    truth_table_satisfiable,
    worst_case,
    worst_case_value,
)
from ddro.oracle import ROSAT_BIGM, build_rosat
from ddro.reformulate import (
    bigm_size_closed_form,
    build_bigm_counterpart,
    build_modified_bigm_counterpart,
    build_pibar_counterpart,
    formulation_size,
    lc_block_closed_form,
    sp_size_closed_form,
    PiBarBound,
)
from ddro.model import PolyUSet, RobustLinearProblem, UncertainRow
from ddro.spbench import (
    SpInstance,
    build_sp_robust,
    evaluate_solution,
    expected_cost,
    figure1_table,
    generate_graph,
    solve_sp_robust,
    solve_sp_stochastic,
)

import oracles


def report(num, ok, detail):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, detail


def test_criterion_1_introductory_network():
    start = time.perf_counter()
    rows = figure1_table("pibar")
    elapsed = time.perf_counter() - start
    expected = {
        "nominal": (95.0, 127.0),
        "robust": (97.4, 110.15),
        "endogenous": (95.3, 108.1),
    }
    worst_err = 0.0
    for label, nominal, worst, _ in rows:
        nom_e, worst_e = expected[label]
        worst_err = max(worst_err, abs(nominal - nom_e), abs(worst - worst_e))
    ok = worst_err <= 1e-6 and elapsed < 1.0
    report(1, ok, f"max deviation {worst_err:.2e}, runtime {elapsed:.2f}s (< 1s)")


def test_criterion_2_two_block_equivalence():
    rng = np.random.default_rng(12021)
    start = time.perf_counter()
    worst_gap = 0.0
    for _ in range(200):
        p = int(rng.integers(1, 9))
        k = int(rng.integers(0, 5))
        uset = PiBarUSet(
            rng.uniform(0, 1, size=(k, p)),
            rng.uniform(0.5, 3.0, size=k),
            rng.uniform(0, 1, size=p),
            rng.uniform(0, 1, size=p),
        )
        x = rng.integers(0, 2, size=p).astype(float)
        y = rng.uniform(0, 2, size=p)
        pibar = np.full(p, float(y.max()))
        gap = abs(worst_case_value(x, y, uset) - hbar_value(x, y, uset, pibar))
        worst_gap = max(worst_gap, gap)
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-7 and elapsed < 10.0
    report(2, ok, f"max |h - hbar| {worst_gap:.2e} (<= 1e-7), runtime {elapsed:.1f}s (< 10s)")


def test_criterion_3_cross_formulation_agreement():
    rng = np.random.default_rng(333)
    start = time.perf_counter()
    worst_spread = 0.0
    for i in range(100):
        n_nodes = int(rng.integers(10, 31))
        seed = int(rng.integers(0, 2**32))
        graph = generate_graph(n_nodes, seed)
        inst = SpInstance(graph, 2.0, 0.2, 1.0)
        objs = [solve_sp_robust(inst, form).objective for form in ("pibar", "bigm", "modbigm")]
        worst_spread = max(worst_spread, max(objs) - min(objs))
    elapsed = time.perf_counter() - start
    ok = worst_spread <= 1e-6 and elapsed < 300.0
    report(3, ok, f"max spread {worst_spread:.2e} (<= 1e-6), runtime {elapsed:.0f}s (< 300s)")


def _rosat_agrees(cnf):
    problem = build_rosat(cnf)
    res = solve_milp(build_bigm_counterpart(problem, ROSAT_BIGM))
    assert res.status == OPTIMAL
    milp_sat = abs(res.objective_value + cnf.num_clauses) <= 1e-6
    # the optimum can never drop below -m
    assert res.objective_value >= -cnf.num_clauses - 1e-8
    return milp_sat == truth_table_satisfiable(cnf)


def test_criterion_4_satisfiability_reduction():
    start = time.perf_counter()
    failures = 0
    total = 0
    # exhaustive single-clause sweep over all ordered signed literals of
    # three variables
    for lits in itertools.product((1, -1, 2, -2, 3, -3), repeat=3):
        total += 1
        if not _rosat_agrees(Cnf3(3, (lits,))):
            failures += 1
    rng = np.random.default_rng(444)
    for _ in range(50):
        clauses = tuple(
            tuple(int(s) * int(v) for s, v in zip(rng.choice((-1, 1), 3), rng.integers(1, 11, 3)))
            for _ in range(20)
        )
        total += 1
        if not _rosat_agrees(Cnf3(10, clauses)):
            failures += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 120.0
    report(4, ok, f"{failures}/{total} disagreements, runtime {elapsed:.0f}s (< 120s)")


def test_criterion_5_dual_bound_property():
    rng = np.random.default_rng(555)
    worst = -np.inf
    for _ in range(100):
        p = int(rng.integers(1, 8))
        k = int(rng.integers(0, 4))
        uset = PiBarUSet(
            rng.uniform(0, 1, size=(k, p)),
            rng.uniform(0.5, 3.0, size=k),
            rng.uniform(0, 1, size=p),
            rng.uniform(0, 1, size=p),
        )
        x = rng.integers(0, 2, size=p).astype(float)
        y = rng.uniform(0, 2, size=p)
        res = worst_case(x, y, uset)
        worst = max(worst, float(np.max(res.bound_duals - y)))
    ok = worst <= 1e-8
    report(5, ok, f"max (dual - coefficient) {worst:.2e} (<= 1e-8)")


def test_criterion_6_size_accounting():
    rng = np.random.default_rng(666)
    mismatches = []
    shapes = 0
    # generic linearized counterpart, one uncertain row, dense coefficients
    for _ in range(8):
        K = int(rng.integers(1, 6))
        n = int(rng.integers(1, 5))
        p = int(rng.integers(1, 5))
        shapes += 1
        uset = PolyUSet(
            rng.uniform(-1, 1, size=(K, p)),
            rng.uniform(1, 2, size=K),
            rng.uniform(0.1, 1.0, size=(K, n)),
        )
        problem = RobustLinearProblem(
            c=np.ones(n), f=np.ones(p),
            rows=[UncertainRow(np.zeros(n), 10.0, uset)],
            y_lower=np.full(p, -np.inf), y_upper=np.full(p, np.inf),
        )
        got = formulation_size(build_bigm_counterpart(problem, 5.0))
        if got != bigm_size_closed_form(1, K, n, p):
            mismatches.append(("table1", K, n, p))
    # single bound-reduction row, all three formulations
    for _ in range(6):
        k = int(rng.integers(1, 5))
        p = int(rng.integers(1, 6))
        shapes += 1
        uset = PiBarUSet(
            rng.uniform(0, 1, size=(k, p)), rng.uniform(1, 2, size=k),
            rng.uniform(0, 1, size=p), rng.uniform(0.1, 1, size=p),
        )
        problem = RobustLinearProblem(
            c=np.zeros(p), f=np.zeros(p),
            rows=[UncertainRow(np.zeros(p), 10.0, uset)],
            y_lower=np.zeros(p), y_upper=np.ones(p),
        )
        bounds = [PiBarBound(np.ones(p))]
        for name, mip in (
            ("pibar", build_pibar_counterpart(problem, bounds)),
            ("bigm", build_bigm_counterpart(problem, 5.0)),
            ("modbigm", build_modified_bigm_counterpart(problem, 5.0)),
        ):
            got = formulation_size(mip)
            affine, sign = lc_block_closed_form(name, k, p)
            if (got.affine_rows, got.sign_rows) != (affine, sign):
                mismatches.append(("table2", name, k, p))
    # shortest-path counterparts on random graphs
    for _ in range(6):
        n_nodes = int(rng.integers(5, 12))
        shapes += 1
        graph = generate_graph(n_nodes, int(rng.integers(0, 10_000)))
        inst = SpInstance(graph, 2.0, 0.2, 1.0)
        arcs = 2 * graph.n_edges
        for form in ("pibar", "bigm", "modbigm"):
            got = formulation_size(build_sp_robust(inst, form))
            if got != sp_size_closed_form(form, graph.n_nodes, arcs):
                mismatches.append(("table3", form, n_nodes))
    ok = not mismatches and shapes == 20
    report(6, ok, f"{shapes} random shapes, mismatches: {mismatches or 'none'}")


def test_criterion_7a_timing_order():
    times = {f: [] for f in ("pibar", "bigm", "modbigm")}
    for i in range(20):
        graph = generate_graph(75, 7000 + i)
        inst = SpInstance(graph, 2.0, 0.2, 1.0)
        objs = {}
        for form in times:
            sol = solve_sp_robust(inst, form)
            times[form].append(sol.wall_time)
            objs[form] = sol.objective
        assert max(objs.values()) - min(objs.values()) <= 1e-6
    med = {f: float(np.median(ts)) for f, ts in times.items()}
    ok = med["bigm"] >= med["modbigm"] and med["bigm"] >= med["pibar"]
    report(
        "7a", ok,
        f"median seconds: bigm {med['bigm']:.2f} >= modbigm {med['modbigm']:.2f}, "
        f"pibar {med['pibar']:.2f} (|V|=75, 20 instances)",
    )


def test_criterion_7b_budget_plateau():
    rng = np.random.default_rng(777)
    ok = True
    detail = []
    for i in range(6):
        graph = generate_graph(12, int(rng.integers(0, 10_000)))
        n_arcs = 2 * graph.n_edges
        budgets = [0.0, 1.0, 2.0, 4.0, 8.0, float(n_arcs), float(n_arcs) + 5.0]
        zs = [
            solve_sp_robust(SpInstance(graph, b, 0.2, 1.0), "pibar").objective
            for b in budgets
        ]
        monotone = all(b >= a - 1e-6 for a, b in zip(zs, zs[1:]))
        plateau = abs(zs[-1] - zs[-2]) <= 1e-6
        ok = ok and monotone and plateau
        detail.append((monotone, plateau))
    report("7b", ok, f"monotone+plateau per instance: {detail}")


def test_criterion_7c_benefit_decreases_with_cost():
    costs = [0.0, 2.0, 4.0, 8.0, 10.0]
    instances = 8
    benefit = {c: [] for c in costs}
    for i in range(instances):
        graph = generate_graph(30, 7700 + i)
        plain = solve_sp_robust(SpInstance(graph, 12.0, 0.0, 1.0), "pibar")
        for c in costs:
            ddu = solve_sp_robust(SpInstance(graph, 12.0, 0.2, c), "pibar")
            benefit[c].append(plain.objective - ddu.objective)
    medians = [float(np.median(benefit[c])) for c in costs]
    nonincreasing = all(b <= a + 1e-6 for a, b in zip(medians, medians[1:]))
    vanishes = all(m <= 1e-6 for c, m in zip(costs, medians) if c >= 8.0)
    nonnegative = all(min(v) >= -1e-6 for v in benefit.values())
    ok = nonincreasing and vanishes and nonnegative
    report("7c", ok, f"median benefit by cost {dict(zip(costs, medians))}")


def test_criterion_7d_dominance():
    rng = np.random.default_rng(778)
    violations = []
    for i in range(10):
        graph = generate_graph(12, int(rng.integers(0, 10_000)))
        for c in (0.0, 1.0, 2.0):
            inst = SpInstance(graph, 2.0, 0.3, c)
            ro = solve_sp_robust(inst, "pibar")
            so = solve_sp_stochastic(inst)
            ro_w = evaluate_solution(ro, inst, "worst")
            so_w = evaluate_solution(so, inst, "worst")
            if ro_w > so_w + 1e-6:
                violations.append(("worst", i, c, ro_w - so_w))
            if expected_cost(so, inst) > expected_cost(ro, inst) + 1e-6:
                violations.append(("avg", i, c))
    ok = not violations
    report("7d", ok, f"dominance violations: {violations or 'none'}")


def test_criterion_8_solver_foundations():
    rng = np.random.default_rng(888)
    lp_bad = 0
    for _ in range(40):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 9))
        A = rng.uniform(-1, 1, size=(m, n))
        x0 = rng.uniform(0, 1, size=n)
        b = A @ x0 + rng.uniform(0.1, 1.0, size=m)
        c = rng.uniform(-1, 1, size=n)
        from ddro.linprog import LinearProgram

        lp = LinearProgram(MIN, c, A, (LE,) * m, b, np.zeros(n), np.full(n, 5.0))
        res = solve_lp(lp)
        expected = oracles.brute_force_lp(lp)
        if res.status != OPTIMAL or abs(res.objective_value - expected) > 1e-6:
            lp_bad += 1

    milp_bad = 0
    from ddro.milp import MixedIntegerProgram
    from ddro.linprog import LinearProgram

    for _ in range(25):
        n_cont = int(rng.integers(0, 5))
        # exhaustive enumeration stays tractable: up to 15 binaries alone,
        # fewer when each assignment needs its own LP for the continuous part
        n_bin = int(rng.integers(1, 16)) if n_cont == 0 else int(rng.integers(1, 9))
        n = n_bin + n_cont
        m = int(rng.integers(1, 6))
        A = rng.uniform(-1, 1, size=(m, n))
        x0 = rng.uniform(0, 1, size=n)
        b = A @ x0 + rng.uniform(0.05, 0.8, size=m)
        c = rng.uniform(-1, 1, size=n)
        binary = np.array([True] * n_bin + [False] * n_cont)
        upper = np.where(binary, 1.0, 3.0)
        mip = MixedIntegerProgram(
            LinearProgram(MIN, c, A, (LE,) * m, b, np.zeros(n), upper), binary
        )
        res = solve_milp(mip)
        expected = oracles.brute_force_milp(mip)
        if expected is None:
            if res.status != "infeasible":
                milp_bad += 1
        elif res.status != OPTIMAL or abs(res.objective_value - expected) > 1e-6:
            milp_bad += 1

    ok = lp_bad == 0 and milp_bad == 0
    report(8, ok, f"LP violations {lp_bad}/40, MILP violations {milp_bad}/25")
