import numpy as np
import pytest

from ddro.linprog import (
    DUALITY_GAP_TOL,
    EQ,
    GE,
    LE,
    MAX,
    MIN,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    LpStructureError,
    dual_objective,
    infeasibility_certificate,
    primal_violation,
    solve_lp,
    unbounded_ray,
)

from oracles import brute_force_lp


def simple_lp(sense, c, A, senses, b, lower=None, upper=None):
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    return LinearProgram(sense, c, np.atleast_2d(A), senses, b, lower, upper)


def test_max_corner():
    # expected value from enumerating the corners (0,0), (1,0), (0,1)
    lp = simple_lp(MAX, [1, 2], [[1, 1]], (LE,), [1])
    res = solve_lp(lp)
    assert res.status == OPTIMAL
    assert res.objective_value == pytest.approx(2.0, abs=1e-9)
    assert res.primal == pytest.approx([0.0, 1.0], abs=1e-9)
    assert brute_force_lp(lp) == pytest.approx(2.0, abs=1e-12)


def test_contradictory_bounds_infeasible():
    lp = simple_lp(MIN, [0], [[1]], (LE,), [-1])
    assert solve_lp(lp).status == INFEASIBLE


def test_free_ray_unbounded():
    lp = LinearProgram(MAX, [1.0], np.zeros((0, 1)), (), [], [0.0], [np.inf])
    assert solve_lp(lp).status == UNBOUNDED


def test_structure_validation():
    with pytest.raises(LpStructureError):
        simple_lp(MIN, [1, 2], [[1, 1]], (LE, LE), [1])
    with pytest.raises(LpStructureError):
        simple_lp(MIN, [1], [[1]], (LE,), [1], lower=[2.0], upper=[1.0])
    with pytest.raises(LpStructureError):
        simple_lp("maximize", [1], [[1]], (LE,), [1])


def test_equality_rows():
    lp = simple_lp(MIN, [1, 1], [[1, 2]], (EQ,), [4])
    res = solve_lp(lp)
    assert res.status == OPTIMAL
    assert res.objective_value == pytest.approx(2.0, abs=1e-9)
    assert res.primal @ np.array([1.0, 2.0]) == pytest.approx(4.0, abs=1e-9)


def _random_lp(rng):
    n = rng.integers(1, 7)
    m = rng.integers(1, 9)
    A = rng.uniform(-1, 1, size=(m, n))
    # anchor feasibility at a random interior point and keep the box bounded
    x0 = rng.uniform(0, 1, size=n)
    b = A @ x0 + rng.uniform(0.1, 1.0, size=m)
    c = rng.uniform(-1, 1, size=n)
    return simple_lp(MIN, c, A, (LE,) * m, b, lower=np.zeros(n), upper=np.full(n, 5.0))


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(60):
        lp = _random_lp(rng)
        res = solve_lp(lp)
        assert res.status == OPTIMAL
        expected = brute_force_lp(lp)
        assert res.objective_value == pytest.approx(expected, abs=1e-6)
        assert primal_violation(lp, res.primal) <= 1e-7


def test_random_mixed_sense_lps():
    rng = np.random.default_rng(17)
    senses_pool = (LE, GE, EQ)
    count = 0
    while count < 30:
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        A = rng.uniform(-1, 1, size=(m, n))
        x0 = rng.uniform(0, 1, size=n)
        senses = tuple(senses_pool[i] for i in rng.integers(0, 3, size=m))
        slack = rng.uniform(0.05, 0.5, size=m)
        b = A @ x0
        for i, s in enumerate(senses):
            if s == LE:
                b[i] += slack[i]
            elif s == GE:
                b[i] -= slack[i]
        lp = simple_lp(MIN, rng.uniform(-1, 1, size=n), A, senses, b,
                       lower=np.zeros(n), upper=np.full(n, 3.0))
        res = solve_lp(lp)
        assert res.status == OPTIMAL
        expected = brute_force_lp(lp)
        assert res.objective_value == pytest.approx(expected, abs=1e-6)
        gap = abs(res.objective_value - dual_objective(lp, res))
        assert gap <= DUALITY_GAP_TOL * (1 + abs(res.objective_value))
        count += 1


def test_strong_duality_and_dual_feasibility():
    rng = np.random.default_rng(7)
    for _ in range(40):
        lp = _random_lp(rng)
        res = solve_lp(lp)
        assert res.status == OPTIMAL
        gap = abs(res.objective_value - dual_objective(lp, res))
        assert gap <= DUALITY_GAP_TOL * (1 + abs(res.objective_value))
        # stationarity: c - A^T dual - reduced == 0
        resid = lp.objective - lp.constraint_matrix.T @ res.duals - res.reduced_costs
        assert np.max(np.abs(resid)) <= 1e-7
        # sign conventions for a minimization with <= rows
        assert np.all(res.duals <= 1e-9)


def test_row_scaling_scales_duals():
    rng = np.random.default_rng(11)
    lp = _random_lp(rng)
    res = solve_lp(lp)
    lam = 3.5
    scaled = LinearProgram(
        lp.objective_sense,
        lp.objective,
        lam * lp.constraint_matrix,
        lp.senses,
        lam * lp.rhs,
        lp.lower,
        lp.upper,
    )
    res2 = solve_lp(scaled)
    assert res2.objective_value == pytest.approx(res.objective_value, abs=1e-6)
    assert res2.duals == pytest.approx(res.duals / lam, abs=1e-6)


def test_infeasibility_certificate():
    lp = simple_lp(MIN, [0], [[1]], (LE,), [-1])
    y, margin = infeasibility_certificate(lp)
    assert margin > 1e-7
    # eq-row infeasibility as well
    lp2 = simple_lp(MIN, [0.0, 0.0], [[1, 1], [1, 1]], (EQ, LE), [3.0, 1.0])
    y2, margin2 = infeasibility_certificate(lp2)
    assert margin2 > 1e-7


def test_unbounded_ray():
    lp = LinearProgram(MAX, [1.0], np.zeros((0, 1)), (), [], [0.0], [np.inf])
    ray = unbounded_ray(lp)
    assert ray[0] > 1e-7
    lp2 = simple_lp(MIN, [-1.0, 0.0], [[1, -1]], (LE,), [0.0])
    ray2 = unbounded_ray(lp2)
    assert lp2.objective @ ray2 < -1e-7
    assert (lp2.constraint_matrix @ ray2)[0] <= 1e-9
