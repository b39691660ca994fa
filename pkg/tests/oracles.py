"""Independent brute-force oracles used to pin expected values.

These deliberately avoid the library's solve paths: vertex enumeration for
LPs, exhaustive binary enumeration for MILPs, and a greedy fill for the
budgeted worst case.
"""

import itertools

import numpy as np

from ddro.linprog import EQ, GE, LE, MIN, OPTIMAL, LinearProgram, solve_lp


def enumerate_vertices(lp: LinearProgram):
    """All basic feasible points of a small LP (rows + active bounds)."""
    m, n = lp.n_rows, lp.n_cols
    rows = [(lp.constraint_matrix[i], lp.rhs[i]) for i in range(m)]
    for j in range(n):
        ej = np.zeros(n)
        ej[j] = 1.0
        if np.isfinite(lp.lower[j]):
            rows.append((ej, lp.lower[j]))
        if np.isfinite(lp.upper[j]):
            rows.append((ej, lp.upper[j]))
    vertices = []
    for combo in itertools.combinations(range(len(rows)), n):
        A = np.array([rows[i][0] for i in combo])
        b = np.array([rows[i][1] for i in combo])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, b)
        if _feasible(lp, x):
            vertices.append(x)
    return vertices


def _feasible(lp, x, tol=1e-7):
    ax = lp.constraint_matrix @ x
    for i, s in enumerate(lp.senses):
        if s == LE and ax[i] > lp.rhs[i] + tol:
            return False
        if s == GE and ax[i] < lp.rhs[i] - tol:
            return False
        if s == EQ and abs(ax[i] - lp.rhs[i]) > tol:
            return False
    return bool(np.all(x >= lp.lower - tol) and np.all(x <= lp.upper + tol))


def brute_force_lp(lp: LinearProgram):
    """Optimal value by vertex enumeration (bounded feasible LPs only)."""
    vertices = enumerate_vertices(lp)
    if not vertices:
        return None
    values = [float(lp.objective @ v) for v in vertices]
    return min(values) if lp.objective_sense == MIN else max(values)


def brute_force_milp(mip):
    """Optimal value by enumerating binary assignments, one LP solve each.

    Pure-binary programs with inequality rows are enumerated vectorized
    (no LP needed); anything else solves one restricted LP per assignment.
    """
    lp = mip.base
    binaries = np.flatnonzero(mip.binary_mask)
    if (
        len(binaries) == lp.n_cols
        and all(s == LE for s in lp.senses)
        and np.all(lp.lower <= 0)
        and np.all(lp.upper >= 1)
    ):
        bits = np.array(
            list(itertools.product((0.0, 1.0), repeat=len(binaries))), dtype=float
        )
        feasible = np.all(bits @ lp.constraint_matrix.T <= lp.rhs + 1e-9, axis=1)
        if not feasible.any():
            return None
        values = bits[feasible] @ lp.objective
        return float(values.min() if lp.objective_sense == MIN else values.max())
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lower = lp.lower.copy()
        upper = lp.upper.copy()
        skip = False
        for j, val in zip(binaries, bits):
            if val < lp.lower[j] - 1e-9 or val > lp.upper[j] + 1e-9:
                skip = True
                break
            lower[j] = upper[j] = val
        if skip:
            continue
        fixed = LinearProgram(
            lp.objective_sense, lp.objective, lp.constraint_matrix,
            lp.senses, lp.rhs, lower, upper,
        )
        res = solve_lp(fixed)
        if res.status != OPTIMAL:
            continue
        val = res.objective_value
        if best is None:
            best = val
        elif lp.objective_sense == MIN:
            best = min(best, val)
        else:
            best = max(best, val)
    return best


def budget_worst_case(coeff, caps, budget):
    """Greedy exact solution of max coeff@xi s.t. sum(xi)<=budget, 0<=xi<=caps."""
    coeff = np.asarray(coeff, dtype=float)
    caps = np.asarray(caps, dtype=float)
    remaining = float(budget)
    total = 0.0
    for j in sorted(range(len(coeff)), key=lambda j: -coeff[j]):
        if remaining <= 0 or coeff[j] <= 0:
            break
        take = min(caps[j], remaining)
        total += coeff[j] * take
        remaining -= take
    return total
