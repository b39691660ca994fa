"""Independent ground truth for the robust machinery.

Direct inner maximizations over an instantiated uncertainty set (with dual
extraction for the bound rows), the two-block variant used by the
bilinearity-free counterpart, a per-row robust feasibility audit, and an
executable satisfiability reduction: a 3-CNF formula is embedded into a
robust problem whose optimum is ``-m`` exactly when the formula is
satisfiable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .linprog import (
    LE,
    MAX,
    OPTIMAL,
    INFEASIBLE,
    UNBOUNDED,
    LinearProgram,
    solve_lp,
)
from .model import (
    EmptyUncertaintySet,
    ModelError,
    PiBarUSet,
    PolyUSet,
    RobustLinearProblem,
    UncertainRow,
    check_binary,
)

DEFAULT_FEAS_TOL = 1e-6


class WorstCaseUnbounded(ModelError):
    pass


@dataclass
class WorstCaseResult:
    value: float
    xi: np.ndarray
    bound_duals: np.ndarray | None  # duals of the upper-bound rows (PiBarUSet only)


def worst_case(x: np.ndarray, y: np.ndarray, uset) -> WorstCaseResult:
    """Maximize ``y @ xi`` over the set instantiated at binary ``x``.

    For a PiBarUSet the duals of the componentwise upper-bound rows are
    returned alongside the value; they are the quantities the dual-bound
    estimate must dominate.
    """
    x = check_binary(x)
    y = np.asarray(y, dtype=float)
    if isinstance(uset, PiBarUSet):
        p = uset.dim
        if y.shape != (p,) or x.shape != (p,):
            raise ModelError("dimension mismatch in worst-case evaluation")
        k = uset.n_rows
        A = np.vstack([uset.D, np.eye(p)])
        b = np.concatenate([uset.d, uset.v + uset.w * (1.0 - x)])
        lp = LinearProgram(
            MAX, y, A, (LE,) * (k + p), b, np.zeros(p), np.full(p, np.inf)
        )
        res = solve_lp(lp)
        if res.status == INFEASIBLE:
            raise EmptyUncertaintySet("uncertainty set is empty at this x")
        if res.status == UNBOUNDED:
            raise WorstCaseUnbounded("inner maximization is unbounded")
        return WorstCaseResult(res.objective_value, res.primal, res.duals[k:])
    if isinstance(uset, PolyUSet):
        p = uset.dim
        if y.shape != (p,) or x.shape != (uset.influence_dim,):
            raise ModelError("dimension mismatch in worst-case evaluation")
        lp = LinearProgram(
            MAX,
            y,
            uset.D,
            (LE,) * uset.n_rows,
            uset.d + uset.Delta @ x,
            np.full(p, -np.inf),
            np.full(p, np.inf),
        )
        res = solve_lp(lp)
        if res.status == INFEASIBLE:
            raise EmptyUncertaintySet("uncertainty set is empty at this x")
        if res.status == UNBOUNDED:
            raise WorstCaseUnbounded("inner maximization is unbounded")
        return WorstCaseResult(res.objective_value, res.primal, None)
    raise ModelError(f"unsupported set type {type(uset).__name__}")


def worst_case_value(x, y, uset) -> float:
    return worst_case(x, y, uset).value


def hbar_value(x: np.ndarray, y: np.ndarray, uset: PiBarUSet, pibar) -> float:
    """Two-block inner maximization whose optimum matches `worst_case_value`.

    Splits ``xi`` into an incremental part capped by ``w`` (with objective
    penalized by ``pibar * x``) and a floor part capped by ``v``:

        max (y - pibar*x) @ xi + y @ zeta
        s.t. D @ (xi + zeta) <= d,  0 <= xi <= w,  0 <= zeta <= v.
    """
    x = check_binary(x)
    y = np.asarray(y, dtype=float)
    pibar = np.asarray(getattr(pibar, "pibar", pibar), dtype=float)
    p = uset.dim
    if y.shape != (p,) or x.shape != (p,) or pibar.shape != (p,):
        raise ModelError("dimension mismatch in two-block evaluation")
    k = uset.n_rows
    obj = np.concatenate([y - pibar * x, y])
    A = np.hstack([uset.D, uset.D]) if k else np.zeros((0, 2 * p))
    lp = LinearProgram(
        MAX,
        obj,
        A,
        (LE,) * k,
        uset.d,
        np.zeros(2 * p),
        np.concatenate([uset.w, uset.v]),
    )
    res = solve_lp(lp)
    if res.status == INFEASIBLE:
        raise EmptyUncertaintySet("uncertainty set is empty")
    if res.status == UNBOUNDED:
        raise WorstCaseUnbounded("inner maximization is unbounded")
    return res.objective_value


@dataclass
class RowAudit:
    row: int
    worst_value: float
    lhs_total: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.lhs_total


def robust_feasible(
    problem: RobustLinearProblem,
    x: np.ndarray,
    y: np.ndarray,
    tol: float = DEFAULT_FEAS_TOL,
):
    """Audit every robust row at ``(x, y)`` against its worst case.

    Returns ``(feasible, audits)`` where each audit carries the row's worst
    uncertain value and total left-hand side.
    """
    x = check_binary(x)
    y = np.asarray(y, dtype=float)
    audits = []
    feasible = True
    for idx, row in enumerate(problem.rows):
        h = worst_case(x, y, row.uset).value
        lhs = float(row.a @ x) + h
        if row.y_certain is not None:
            lhs += float(row.y_certain @ y)
        audits.append(RowAudit(idx, h, lhs, row.b))
        if lhs > row.b + tol:
            feasible = False
    return feasible, audits


# --- satisfiability reduction -----------------------------------------------


@dataclass(frozen=True)
class Cnf3:
    """CNF with exactly three signed literals per clause (repeats allowed)."""

    num_vars: int
    clauses: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "clauses", tuple(tuple(int(l) for l in cl) for cl in self.clauses)
        )
        for cl in self.clauses:
            if len(cl) != 3:
                raise ModelError("each clause must have exactly 3 literals")
            for lit in cl:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ModelError(f"literal {lit} out of range")

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


def parse_dimacs(text: str) -> Cnf3:
    """Parse DIMACS CNF; clauses shorter than 3 are padded by repetition."""
    num_vars = None
    clauses = []
    current = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ModelError(f"bad problem line {line!r}")
            num_vars = int(parts[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                if not current:
                    raise ModelError("empty clause in DIMACS input")
                while len(current) < 3:
                    current.append(current[-1])
                if len(current) > 3:
                    raise ModelError("clause with more than 3 literals")
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if current:
        raise ModelError("unterminated clause in DIMACS input")
    if num_vars is None:
        num_vars = max((abs(l) for cl in clauses for l in cl), default=0)
    return Cnf3(num_vars, tuple(clauses))


def truth_table_satisfiable(cnf: Cnf3) -> bool:
    """Exhaustive satisfiability check; tractable up to ~20 variables."""
    if cnf.num_vars > 20:
        raise ModelError("truth-table check limited to 20 variables")
    for bits in itertools.product((False, True), repeat=cnf.num_vars):
        ok = True
        for cl in cnf.clauses:
            if not any((bits[abs(l) - 1] if l > 0 else not bits[abs(l) - 1]) for l in cl):
                ok = False
                break
        if ok:
            return True
    return cnf.num_clauses == 0


def build_rosat(cnf: Cnf3) -> RobustLinearProblem:
    """Embed a 3-CNF into a robust problem.

    Decision variables: binary ``x`` (the assignment), ``y`` pinned to 1 (one
    per clause), and a scalar ``z >= 0``.  A single uncertain row encodes
    ``z <= a @ y`` for every ``a`` in the clause polytope
    ``{a | a_i >= lit bounds, a_i <= 1}``: writing ``xi_i = -a_i`` plus a
    component pinned to 1 carrying ``z`` turns this into ``xi @ (y, z) <= 0``.
    The minimum of ``-z`` is ``-m`` iff the formula is satisfiable.
    """
    n = cnf.num_vars
    m = cnf.num_clauses
    p = m + 1  # y components plus z
    d_rows = []
    d_rhs = []
    delta_rows = []

    def add_row(coeff_idx, coeff, rhs, x_idx=None, x_coeff=0.0):
        row = np.zeros(p)
        row[coeff_idx] = coeff
        d_rows.append(row)
        d_rhs.append(rhs)
        delta = np.zeros(n)
        if x_idx is not None:
            delta[x_idx] = x_coeff
        delta_rows.append(delta)

    for i, clause in enumerate(cnf.clauses):
        for lit in clause:
            j = abs(lit) - 1
            if lit > 0:
                add_row(i, 1.0, 0.0, j, -1.0)  # a_i >= x_j
            else:
                add_row(i, 1.0, -1.0, j, 1.0)  # a_i >= 1 - x_j
        add_row(i, -1.0, 1.0)  # a_i <= 1
    add_row(m, 1.0, 1.0)  # pinned component carrying z
    add_row(m, -1.0, -1.0)

    uset = PolyUSet(np.array(d_rows), np.array(d_rhs), np.array(delta_rows))
    f = np.zeros(p)
    f[m] = -1.0
    y_lower = np.concatenate([np.ones(m), [0.0]])
    y_upper = np.concatenate([np.ones(m), [np.inf]])
    return RobustLinearProblem(
        c=np.zeros(n),
        f=f,
        rows=[UncertainRow(np.zeros(n), 0.0, uset)],
        y_lower=y_lower,
        y_upper=y_upper,
    )


#: Valid linearization constant for `build_rosat` problems: every product in
#: the reduction multiplies a clause-row dual bounded by 1.
ROSAT_BIGM = 2.0


def sat_equivalence_check(cnf: Cnf3, node_limit: int = 200_000) -> bool:
    """True iff the reduction's optimum agrees with brute-force SAT.

    Solves the embedded problem through the generic linearized counterpart
    and compares "optimum equals ``-m`` within 1e-6" against the truth table.
    """
    from .milp import solve_milp
    from .reformulate import build_bigm_counterpart

    problem = build_rosat(cnf)
    mip = build_bigm_counterpart(problem, ROSAT_BIGM)
    res = solve_milp(mip, node_limit=node_limit)
    milp_sat = res.status == OPTIMAL and abs(res.objective_value + cnf.num_clauses) <= 1e-6
    return milp_sat == truth_table_satisfiable(cnf)
