"""Dense linear programs with dual extraction.

Solves are delegated to the HiGHS simplex (via scipy.optimize.linprog), which
returns optimal primal/dual pairs at tight tolerances.  Duals follow the
sensitivity convention: ``duals[i]`` is the derivative of the optimal
objective value (in the problem's own sense, min or max) with respect to
``rhs[i]``.  Reduced costs are the analogous sensitivities of the variable
bounds.  Infeasibility and unboundedness certificates are computed on demand
by auxiliary LPs (`infeasibility_certificate`, `unbounded_ray`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.optimize import linprog as _scipy_linprog

MIN = "min"
MAX = "max"
LE = "<="
EQ = "="
GE = ">="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEASIBILITY_TOL = 1e-9
DUALITY_GAP_TOL = 1e-6

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": FEASIBILITY_TOL,
    "dual_feasibility_tolerance": FEASIBILITY_TOL,
}

# HiGHS solves sparse systems regardless; past this size we hand it a CSR
# matrix up front instead of letting scipy densify a copy.
_SPARSE_CUTOFF = 200_000


class LpError(Exception):
    """Base class for LP failures."""


class LpStructureError(LpError):
    """Malformed model: mismatched shapes, bad senses, crossed bounds."""


class LpNumericError(LpError):
    """The backend gave up for numerical reasons."""


@dataclass
class LinearProgram:
    """min/max ``objective @ x`` s.t. ``constraint_matrix @ x (senses) rhs``,
    ``lower <= x <= upper``."""

    objective_sense: str
    objective: np.ndarray
    constraint_matrix: np.ndarray
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.constraint_matrix = np.asarray(self.constraint_matrix, dtype=float)
        if self.constraint_matrix.ndim != 2:
            raise LpStructureError("constraint matrix must be 2-D")
        self.senses = tuple(self.senses)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.validate()

    @property
    def n_rows(self) -> int:
        return self.constraint_matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.objective.shape[0]

    def validate(self):
        m, n = self.constraint_matrix.shape
        if self.objective_sense not in (MIN, MAX):
            raise LpStructureError(f"bad objective sense {self.objective_sense!r}")
        if self.objective.shape != (n,):
            raise LpStructureError("objective length does not match matrix columns")
        if len(self.senses) != m or self.rhs.shape != (m,):
            raise LpStructureError("senses/rhs length does not match matrix rows")
        for s in self.senses:
            if s not in (LE, EQ, GE):
                raise LpStructureError(f"bad row sense {s!r}")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise LpStructureError("bounds length does not match matrix columns")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise LpStructureError(f"crossed bounds on variable {j}")


@dataclass
class LpResult:
    status: str
    primal: np.ndarray | None
    duals: np.ndarray | None
    reduced_costs: np.ndarray | None
    objective_value: float | None


class CompiledLp:
    """Row-split form of a LinearProgram, reusable across bound changes.

    The MILP solver re-solves the same matrix with node-specific variable
    bounds; compiling once avoids re-splitting and re-sparsifying per node.
    """

    def __init__(self, lp: LinearProgram):
        A = lp.constraint_matrix
        senses = np.array(lp.senses)
        le = senses == LE
        ge = senses == GE
        eq = senses == EQ
        rows_ub = np.vstack([A[le], -A[ge]]) if (le.any() or ge.any()) else np.zeros((0, lp.n_cols))
        b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]])
        rows_eq = A[eq]
        b_eq = lp.rhs[eq]
        if A.size > _SPARSE_CUTOFF:
            rows_ub = sparse.csr_matrix(rows_ub)
            rows_eq = sparse.csr_matrix(rows_eq)
        self._A_ub = rows_ub if b_ub.size else None
        self._b_ub = b_ub if b_ub.size else None
        self._A_eq = rows_eq if b_eq.size else None
        self._b_eq = b_eq if b_eq.size else None
        self._sign = 1.0 if lp.objective_sense == MIN else -1.0
        self._c = self._sign * lp.objective
        self._le = le
        self._ge = ge
        self._eq = eq
        self.n_rows = lp.n_rows
        self.n_cols = lp.n_cols

    def solve(self, lower: np.ndarray, upper: np.ndarray) -> LpResult:
        res = _scipy_linprog(
            self._c,
            A_ub=self._A_ub,
            b_ub=self._b_ub,
            A_eq=self._A_eq,
            b_eq=self._b_eq,
            bounds=np.column_stack([lower, upper]),
            method="highs",
            options=_HIGHS_OPTIONS,
        )
        if res.status == 2:
            return LpResult(INFEASIBLE, None, None, None, None)
        if res.status == 3:
            return LpResult(UNBOUNDED, None, None, None, None)
        if res.status != 0:
            raise LpNumericError(f"HiGHS failed: {res.message}")

        duals = np.empty(self.n_rows)
        marg_ub = np.asarray(res.ineqlin.marginals) if self._A_ub is not None else np.zeros(0)
        n_le = int(self._le.sum())
        duals[self._le] = marg_ub[:n_le]
        duals[self._ge] = -marg_ub[n_le:]
        if self._A_eq is not None:
            duals[self._eq] = np.asarray(res.eqlin.marginals)
        reduced = np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals)
        # Marginals are sensitivities of the internal minimization; flip them
        # back to the problem's own sense.
        return LpResult(
            OPTIMAL,
            np.asarray(res.x, dtype=float),
            self._sign * duals,
            self._sign * reduced,
            self._sign * float(res.fun),
        )


def solve_lp(lp: LinearProgram) -> LpResult:
    """Solve a LinearProgram, returning primal, duals, and reduced costs."""
    return CompiledLp(lp).solve(lp.lower, lp.upper)


try:  # scipy >= 1.15 vendors the native HiGHS bindings; used for hot restarts
    from scipy.optimize._highspy import _core as _hcore
except ImportError:  # pragma: no cover - older scipy
    _hcore = None


class IncrementalLp:
    """Persistent LP re-solved under changing variable bounds.

    Keeps one native HiGHS model alive so each re-solve hot-starts from the
    previous basis; branch-and-bound nodes differ only in variable bounds,
    which makes node LPs one to two orders of magnitude cheaper than
    from-scratch solves.  Returns primal solutions only (the search needs no
    duals).  Falls back to `CompiledLp` when the native bindings are absent.
    """

    available = _hcore is not None

    def __init__(self, lp: LinearProgram):
        if _hcore is None:  # pragma: no cover
            raise LpError("native HiGHS bindings are not available")
        self._sign = 1.0 if lp.objective_sense == MIN else -1.0
        m, n = lp.n_rows, lp.n_cols
        row_lower = np.empty(m)
        row_upper = np.empty(m)
        for i, s in enumerate(lp.senses):
            if s == LE:
                row_lower[i], row_upper[i] = -np.inf, lp.rhs[i]
            elif s == GE:
                row_lower[i], row_upper[i] = lp.rhs[i], np.inf
            else:
                row_lower[i] = row_upper[i] = lp.rhs[i]
        A = sparse.csc_matrix(lp.constraint_matrix)
        model = _hcore.HighsLp()
        model.num_col_ = n
        model.num_row_ = m
        model.col_cost_ = self._sign * lp.objective
        model.col_lower_ = lp.lower
        model.col_upper_ = lp.upper
        model.row_lower_ = row_lower
        model.row_upper_ = row_upper
        model.a_matrix_.format_ = _hcore.MatrixFormat.kColwise
        model.a_matrix_.start_ = A.indptr.astype(np.int32)
        model.a_matrix_.index_ = A.indices.astype(np.int32)
        model.a_matrix_.value_ = A.data
        self._h = _hcore._Highs()
        self._h.setOptionValue("output_flag", False)
        self._h.setOptionValue("threads", 1)
        self._h.setOptionValue("random_seed", 0)
        self._h.setOptionValue("primal_feasibility_tolerance", FEASIBILITY_TOL)
        self._h.setOptionValue("dual_feasibility_tolerance", FEASIBILITY_TOL)
        if self._h.passModel(model) != _hcore.HighsStatus.kOk:
            raise LpNumericError("HiGHS rejected the model")

    def set_col_bounds(self, col: int, lower: float, upper: float):
        self._h.changeColBounds(int(col), float(lower), float(upper))

    def solve(self) -> LpResult:
        h = self._h
        h.run()
        status = h.getModelStatus()
        if status == _hcore.HighsModelStatus.kOptimal:
            x = np.asarray(h.getSolution().col_value, dtype=float)
            return LpResult(OPTIMAL, x, None, None, self._sign * h.getObjectiveValue())
        if status == _hcore.HighsModelStatus.kInfeasible:
            return LpResult(INFEASIBLE, None, None, None, None)
        if status in (
            _hcore.HighsModelStatus.kUnbounded,
            _hcore.HighsModelStatus.kUnboundedOrInfeasible,
        ):
            return LpResult(UNBOUNDED, None, None, None, None)
        raise LpNumericError(f"HiGHS failed: {h.modelStatusToString(status)}")


def primal_violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest constraint/bound violation of ``x`` (0 when feasible)."""
    ax = lp.constraint_matrix @ x
    worst = 0.0
    for i, s in enumerate(lp.senses):
        r = ax[i] - lp.rhs[i]
        if s == LE:
            worst = max(worst, r)
        elif s == GE:
            worst = max(worst, -r)
        else:
            worst = max(worst, abs(r))
    worst = max(worst, float(np.max(lp.lower - x, initial=0.0)))
    worst = max(worst, float(np.max(x - lp.upper, initial=0.0)))
    return worst


def dual_objective(lp: LinearProgram, result: LpResult) -> float:
    """Dual objective implied by ``result``'s duals and reduced costs.

    Equals the primal objective at optimality (strong duality).  Bound terms
    use the bound each reduced cost is attached to; a nonzero reduced cost on
    an unbounded side indicates a corrupt result and raises.
    """
    if result.status != OPTIMAL:
        raise LpError("dual objective requires an optimal result")
    total = float(result.duals @ lp.rhs)
    sign = 1.0 if lp.objective_sense == MIN else -1.0
    for j, rc in enumerate(result.reduced_costs):
        if abs(rc) < 1e-12:
            continue
        at_lower = sign * rc > 0
        bound = lp.lower[j] if at_lower else lp.upper[j]
        if not np.isfinite(bound):
            raise LpError(f"reduced cost on infinite bound of variable {j}")
        total += rc * bound
    return total


def infeasibility_certificate(lp: LinearProgram, tol: float = 1e-7):
    """Farkas-style multipliers proving infeasibility.

    Returns ``(y, margin)``: row multipliers with sign matching each row's
    sense and ``margin > 0``, where the aggregated row ``g = y @ A`` satisfies
    ``min_{bounds} g @ x - y @ rhs >= margin``, which no feasible point can do.
    """
    elastic, eq_rows = _elastic_program(lp)
    res = solve_lp(elastic)
    if res.status != OPTIMAL or res.objective_value <= tol:
        raise LpError("program is not provably infeasible")
    y = -res.duals[: lp.n_rows]
    for k, i in enumerate(eq_rows):
        # Equality rows were split in the elastic program; recombine duals.
        y[i] -= res.duals[lp.n_rows + k]
    g = y @ lp.constraint_matrix
    floor = 0.0
    for j in range(lp.n_cols):
        bound = lp.lower[j] if g[j] > 0 else lp.upper[j]
        if g[j] != 0.0:
            if not np.isfinite(bound):
                raise LpError("certificate escapes through an unbounded variable")
            floor += g[j] * bound
    margin = floor - float(y @ lp.rhs)
    if margin <= tol:
        raise LpError("certificate margin not positive")
    return y, margin


def _elastic_program(lp: LinearProgram):
    # One nonnegative violation variable per row, relaxing it in the feasible
    # direction; minimum total violation > 0 proves infeasibility and its row
    # duals aggregate into the Farkas vector.
    m, n = lp.n_rows, lp.n_cols
    A = np.zeros((m, n + m))
    A[:, :n] = lp.constraint_matrix
    for i, s in enumerate(lp.senses):
        A[i, n + i] = -1.0 if s in (LE, EQ) else 1.0
    senses = list(lp.senses)
    extra = np.zeros((0, n + m))
    extra_rhs = np.zeros(0)
    eq_rows = [i for i, s in enumerate(lp.senses) if s == EQ]
    if eq_rows:
        # Equality rows need slack in both directions; add the mirrored rows.
        extra = np.zeros((len(eq_rows), n + m))
        extra_rhs = np.empty(len(eq_rows))
        for k, i in enumerate(eq_rows):
            extra[k, :n] = lp.constraint_matrix[i]
            extra[k, n + i] = 1.0
            extra_rhs[k] = lp.rhs[i]
            senses[i] = LE
        senses.extend([GE] * len(eq_rows))
    program = LinearProgram(
        MIN,
        np.concatenate([np.zeros(n), np.ones(m)]),
        np.vstack([A, extra]),
        tuple(senses),
        np.concatenate([lp.rhs, extra_rhs]),
        np.concatenate([lp.lower, np.zeros(m)]),
        np.concatenate([lp.upper, np.full(m, np.inf)]),
    )
    return program, eq_rows


def unbounded_ray(lp: LinearProgram, tol: float = 1e-7) -> np.ndarray:
    """Recession direction with strictly improving objective.

    Certifies unboundedness: ``x + t*d`` stays feasible for all ``t >= 0``
    and the objective improves linearly along ``d``.
    """
    m, n = lp.n_rows, lp.n_cols
    lo = np.empty(n)
    hi = np.empty(n)
    for j in range(n):
        lo[j] = -1.0 if np.isneginf(lp.lower[j]) else 0.0
        hi[j] = 1.0 if np.isposinf(lp.upper[j]) else 0.0
    hom = LinearProgram(
        lp.objective_sense,
        lp.objective,
        lp.constraint_matrix,
        lp.senses,
        np.zeros(m),
        lo,
        hi,
    )
    res = solve_lp(hom)
    if res.status != OPTIMAL:
        raise LpError("ray subproblem did not solve")
    gain = res.objective_value
    improving = gain < -tol if lp.objective_sense == MIN else gain > tol
    if not improving:
        raise LpError("program is not provably unbounded")
    return res.primal
