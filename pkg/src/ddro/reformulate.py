"""Robust counterparts of decision-dependent problems as MILPs.

Three builders, all exact for binary influence decisions:

* `build_pibar_counterpart` — the bilinearity-free counterpart for
  bound-reduction sets.  Each row gets duals ``t`` (coupling rows), ``s``
  (floor bounds) and ``r`` (incremental bounds); the incremental dual row is
  relaxed by a precomputed componentwise dual bound instead of a product.
* `build_bigm_counterpart` — the generic linearization for polyhedral sets.
  Every product of a set-row dual with an influence variable (scaled by its
  decision coefficient) becomes an auxiliary variable fenced by a large
  constant on three sides.
* `build_modified_bigm_counterpart` — the one-sided variant: with
  nonnegative decision coefficients (after flipping rows, where a row is
  uniformly negative, to the complement ``1 - x``) the upper fences are
  redundant and only the lower fence remains.

`choose_bigm` derives a safe constant from the dual bounds, `estimate_pibar`
computes those bounds, and `formulation_size` reports model dimensions for
the size-accounting checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._assemble import MipBuilder
from .linprog import EQ, GE, LE, MAX, MIN, OPTIMAL, UNBOUNDED, LinearProgram, solve_lp
from .milp import MixedIntegerProgram
from .model import (
    EmptyUncertaintySet,
    ModelError,
    PiBarUSet,
    RobustLinearProblem,
    instantiate,
    pibar_to_poly,
)


class ReformulateError(ModelError):
    pass


class BoundMissingError(ReformulateError):
    pass


class NonnegativityError(ReformulateError):
    pass


class MixedSignDeltaError(ReformulateError):
    pass


class UnboundedDualError(ReformulateError):
    pass


@dataclass
class PiBarBound:
    """Componentwise upper bound on the bound-row duals of one robust row."""

    pibar: np.ndarray

    def __post_init__(self):
        self.pibar = np.asarray(self.pibar, dtype=float)
        if np.any(~np.isfinite(self.pibar)) or np.any(self.pibar < 0):
            raise BoundMissingError("dual bounds must be finite and nonnegative")


@dataclass
class FormulationSize:
    binaries: int
    continuous: int
    affine_rows: int
    sign_rows: int


@dataclass
class _Product:
    """One linearized dual-times-decision product."""

    col: int
    pi_col: int
    x_col: int
    weight: float  # |decision coefficient| scaling the dual
    sign: float  # sign of the decision coefficient in the robust row
    complemented: bool = False  # product pairs with (1 - x) instead of x


@dataclass
class _RowInfo:
    robust_row: int
    a: np.ndarray
    y_certain: np.ndarray | None
    b: float
    d_eff: np.ndarray
    pi_cols: list
    products: list = field(default_factory=list)


@dataclass
class CounterpartMeta:
    kind: str
    x_cols: list
    y_cols: list
    rows: list


def estimate_pibar(problem: RobustLinearProblem, row: int) -> PiBarBound:
    """Bound the duals of a row's componentwise upper-bound constraints.

    Requires the coupling matrix and the uncertain coefficients (the ``y``
    entries) to be nonnegative; under those conditions each bound-row dual is
    dominated by its coefficient, so the bound is the coefficient's maximum
    over the y-domain (structural when the domain is a box, otherwise one LP
    per component).
    """
    uset = problem.rows[row].uset
    if not isinstance(uset, PiBarUSet):
        raise ReformulateError(f"row {row}: dual bounds require a bound-reduction set")
    if uset.n_rows and np.any(uset.D < 0):
        k, j = np.argwhere(uset.D < 0)[0]
        raise NonnegativityError(f"row {row}: D[{k},{j}] = {uset.D[k, j]} is negative")
    if np.any(problem.y_lower < 0):
        j = int(np.argmax(problem.y_lower < 0))
        raise NonnegativityError(
            f"row {row}: uncertain coefficient y[{j}] can be negative "
            f"(lower bound {problem.y_lower[j]})"
        )
    p = problem.p
    upper = np.where(problem.y_binary, np.minimum(problem.y_upper, 1.0), problem.y_upper)
    if problem.y_constraints is None:
        pibar = upper.astype(float)
        if np.any(~np.isfinite(pibar)):
            j = int(np.argmax(~np.isfinite(pibar)))
            raise UnboundedDualError(f"row {row}: y[{j}] has no finite upper bound")
        return PiBarBound(pibar)
    cons = problem.y_constraints
    pibar = np.empty(p)
    for j in range(p):
        obj = np.zeros(p)
        obj[j] = 1.0
        lp = LinearProgram(
            MAX, obj, cons.A, cons.senses, cons.rhs, problem.y_lower, upper
        )
        res = solve_lp(lp)
        if res.status == UNBOUNDED:
            raise UnboundedDualError(f"row {row}: y[{j}] is unbounded over its domain")
        if res.status != OPTIMAL:
            raise ReformulateError(f"row {row}: empty y-domain")
        pibar[j] = res.objective_value
    return PiBarBound(pibar)


def choose_bigm(problem: RobustLinearProblem) -> float:
    """Safe linearization constant: twice the largest dual-times-coefficient
    product any row can produce."""
    worst = 0.0
    for i, row in enumerate(problem.rows):
        uset = row.uset
        if isinstance(uset, PiBarUSet):
            if not np.any(uset.w > 0):
                continue
            pibar = estimate_pibar(problem, i).pibar
            worst = max(worst, float(np.max(pibar * uset.w)))
        else:
            if np.any(uset.Delta != 0):
                raise UnboundedDualError(
                    f"row {i}: no dual bound available for a general polyhedral set"
                )
    return 2.0 * worst


def _start_builder(problem: RobustLinearProblem):
    b = MipBuilder()
    x_cols = [b.add_col(obj=problem.c[j], lb=0.0, ub=1.0, binary=True) for j in range(problem.n)]
    y_cols = [
        b.add_col(
            obj=problem.f[j],
            lb=problem.y_lower[j],
            ub=problem.y_upper[j],
            binary=bool(problem.y_binary[j]),
        )
        for j in range(problem.p)
    ]
    return b, x_cols, y_cols


def _finish_builder(b, problem, x_cols, y_cols, kind, rows_meta) -> MixedIntegerProgram:
    for cons, cols in (
        (problem.x_constraints, x_cols),
        (problem.y_constraints, y_cols),
    ):
        if cons is None:
            continue
        for i in range(cons.n_rows):
            coeffs = {cols[j]: cons.A[i, j] for j in range(len(cols)) if cons.A[i, j] != 0.0}
            b.add_row(coeffs, cons.senses[i], cons.rhs[i])
    mip = b.build(MIN)
    mip.meta = CounterpartMeta(kind, x_cols, y_cols, rows_meta)
    return mip


def _base_row_coeffs(row, x_cols, y_cols):
    coeffs = {}
    for j, col in enumerate(x_cols):
        if row.a[j] != 0.0:
            coeffs[col] = row.a[j]
    if row.y_certain is not None:
        for j, col in enumerate(y_cols):
            if row.y_certain[j] != 0.0:
                coeffs[col] = coeffs.get(col, 0.0) + row.y_certain[j]
    return coeffs


def build_pibar_counterpart(problem: RobustLinearProblem, bounds=None) -> MixedIntegerProgram:
    """Counterpart without products for problems whose rows all use
    bound-reduction sets.

    Per row, with duals ``t`` (coupling), ``s`` (floor), ``r`` (increment):

        a @ x [+ y_certain @ y] + d @ t + v @ s + w @ r <= b
        s_j + (D.T @ t)_j >= y_j
        r_j + (D.T @ t)_j >= y_j - pibar_j * x_j
        r, s, t >= 0
    """
    for i, row in enumerate(problem.rows):
        if not isinstance(row.uset, PiBarUSet):
            raise ReformulateError(f"row {i}: counterpart requires bound-reduction sets")
    if bounds is None:
        bounds = [estimate_pibar(problem, i) for i in range(len(problem.rows))]
    if len(bounds) != len(problem.rows):
        raise BoundMissingError("need one dual bound per uncertain row")
    bounds = [bd if isinstance(bd, PiBarBound) else PiBarBound(bd) for bd in bounds]
    # Emptiness is monotone in x for these sets, so the two extreme decisions
    # certify nonemptiness everywhere.
    for i, row in enumerate(problem.rows):
        for x_probe in (np.zeros(problem.n), np.ones(problem.n)):
            if instantiate(row.uset, x_probe).is_empty():
                raise EmptyUncertaintySet(f"row {i}: set is empty at a binary extreme")

    b, x_cols, y_cols = _start_builder(problem)
    rows_meta = []
    for i, row in enumerate(problem.rows):
        uset = row.uset
        k, p = uset.n_rows, uset.dim
        pibar = bounds[i].pibar
        if pibar.shape != (p,):
            raise BoundMissingError(f"row {i}: dual bound has wrong length")
        t_cols = [b.add_col() for _ in range(k)]
        s_cols = [b.add_col() for _ in range(p)]
        r_cols = [b.add_col() for _ in range(p)]
        coeffs = _base_row_coeffs(row, x_cols, y_cols)
        for kk, col in enumerate(t_cols):
            if uset.d[kk] != 0.0:
                coeffs[col] = uset.d[kk]
        for j in range(p):
            if uset.v[j] != 0.0:
                coeffs[s_cols[j]] = uset.v[j]
            if uset.w[j] != 0.0:
                coeffs[r_cols[j]] = uset.w[j]
        robust_row = b.n_rows
        b.add_row(coeffs, LE, row.b)
        for j in range(p):
            base = {t_cols[kk]: uset.D[kk, j] for kk in range(k) if uset.D[kk, j] != 0.0}
            floor = dict(base)
            floor[s_cols[j]] = floor.get(s_cols[j], 0.0) + 1.0
            floor[y_cols[j]] = floor.get(y_cols[j], 0.0) - 1.0
            b.add_row(floor, GE, 0.0)
            incr = dict(base)
            incr[r_cols[j]] = incr.get(r_cols[j], 0.0) + 1.0
            incr[y_cols[j]] = incr.get(y_cols[j], 0.0) - 1.0
            if pibar[j] != 0.0:
                incr[x_cols[j]] = incr.get(x_cols[j], 0.0) + pibar[j]
            b.add_row(incr, GE, 0.0)
        rows_meta.append(
            _RowInfo(robust_row, row.a, row.y_certain, row.b, uset.d, t_cols + s_cols + r_cols)
        )
    return _finish_builder(b, problem, x_cols, y_cols, "pibar", rows_meta)


def _poly_with_sign_elimination(uset):
    """Convert to polyhedral form and drop pure sign rows.

    A row that is exactly ``-xi_j <= 0`` with no decision part only forces
    the dual equality for column ``j`` into an inequality; returning the kept
    rows plus the set of relaxed columns reproduces that without carrying the
    dual variable.
    """
    poly = pibar_to_poly(uset) if isinstance(uset, PiBarUSet) else uset
    keep = []
    relaxed = set()
    for k in range(poly.n_rows):
        row = poly.D[k]
        nz = np.flatnonzero(row)
        if (
            nz.size == 1
            and row[nz[0]] == -1.0
            and poly.d[k] == 0.0
            and not np.any(poly.Delta[k])
        ):
            relaxed.add(int(nz[0]))
        else:
            keep.append(k)
    return poly, keep, relaxed


def build_bigm_counterpart(problem: RobustLinearProblem, M: float) -> MixedIntegerProgram:
    """Generic linearized counterpart for polyhedral sets (binary influence).

    Per row, with set-row duals ``pi`` and one product variable
    ``u = |Delta_kl| * pi_k * x_l`` per nonzero decision coefficient:

        a @ x [+ y_certain @ y] + d @ pi + sum sign(Delta_kl) * u_kl <= b
        (D.T @ pi)_j = y_j         (>= where a sign row was eliminated)
        u <= M * x_l,  u <= |Delta_kl| * pi_k,  u >= |Delta_kl| * pi_k - M * (1 - x_l)
        pi, u >= 0

    ``M`` must dominate every product ``|Delta_kl| * pi_k``; see `choose_bigm`.
    An undersized ``M`` is not detectable here — recheck incumbents with
    `audit_products`.
    """
    M = float(M)
    b, x_cols, y_cols = _start_builder(problem)
    rows_meta = []
    for i, row in enumerate(problem.rows):
        poly, keep, relaxed = _poly_with_sign_elimination(row.uset)
        pi_cols = {k: b.add_col() for k in keep}
        products = []
        coeffs = _base_row_coeffs(row, x_cols, y_cols)
        for k in keep:
            if poly.d[k] != 0.0:
                coeffs[pi_cols[k]] = poly.d[k]
        for k in keep:
            for l in np.flatnonzero(poly.Delta[k]):
                u = b.add_col()
                delta = poly.Delta[k, int(l)]
                products.append(
                    _Product(u, pi_cols[k], x_cols[int(l)], abs(delta), float(np.sign(delta)))
                )
                coeffs[u] = coeffs.get(u, 0.0) + float(np.sign(delta))
        robust_row = b.n_rows
        b.add_row(coeffs, LE, row.b)
        for j in range(poly.dim):
            dual = {pi_cols[k]: poly.D[k, j] for k in keep if poly.D[k, j] != 0.0}
            dual[y_cols[j]] = dual.get(y_cols[j], 0.0) - 1.0
            b.add_row(dual, GE if j in relaxed else EQ, 0.0)
        for prod in products:
            b.add_row({prod.col: 1.0, prod.x_col: -M}, LE, 0.0)
            b.add_row({prod.col: 1.0, prod.pi_col: -prod.weight}, LE, 0.0)
            b.add_row({prod.pi_col: prod.weight, prod.col: -1.0, prod.x_col: M}, LE, M)
        info = _RowInfo(
            robust_row,
            row.a,
            row.y_certain,
            row.b,
            np.array([poly.d[k] for k in keep]),
            [pi_cols[k] for k in keep],
            products,
        )
        rows_meta.append(info)
    return _finish_builder(b, problem, x_cols, y_cols, "bigm", rows_meta)


def build_modified_bigm_counterpart(problem: RobustLinearProblem, M: float) -> MixedIntegerProgram:
    """One-sided linearization; needs signwise-uniform decision coefficients.

    Rows whose decision coefficients are all nonpositive are rewritten
    against ``1 - x`` (folding the constant shift into the row's rhs), after
    which every product has a nonnegative coefficient and only the lower
    fence ``t >= coeff * pi - M * (inactive)`` is required: the minimization
    presses each ``t`` onto the product's exact value.  Strictly fewer rows
    than `build_bigm_counterpart` whenever products exist.
    """
    M = float(M)
    b, x_cols, y_cols = _start_builder(problem)
    rows_meta = []
    for i, row in enumerate(problem.rows):
        poly, keep, relaxed = _poly_with_sign_elimination(row.uset)
        pi_cols = {k: b.add_col() for k in keep}
        d_eff = {}
        flips = {}
        for k in keep:
            drow = poly.Delta[k]
            has_pos = bool(np.any(drow > 0))
            has_neg = bool(np.any(drow < 0))
            if has_pos and has_neg:
                raise MixedSignDeltaError(
                    f"row {i}: set row {k} mixes decision coefficient signs; "
                    "complement substitution cannot repair it"
                )
            flips[k] = has_neg
            d_eff[k] = poly.d[k] + (drow.sum() if has_neg else 0.0)
        products = []
        coeffs = _base_row_coeffs(row, x_cols, y_cols)
        for k in keep:
            if d_eff[k] != 0.0:
                coeffs[pi_cols[k]] = d_eff[k]
        for k in keep:
            for l in np.flatnonzero(poly.Delta[k]):
                t = b.add_col()
                delta = poly.Delta[k, int(l)]
                products.append(
                    _Product(t, pi_cols[k], x_cols[int(l)], abs(delta), 1.0, flips[k])
                )
                coeffs[t] = coeffs.get(t, 0.0) + 1.0
        robust_row = b.n_rows
        b.add_row(coeffs, LE, row.b)
        for j in range(poly.dim):
            dual = {pi_cols[k]: poly.D[k, j] for k in keep if poly.D[k, j] != 0.0}
            dual[y_cols[j]] = dual.get(y_cols[j], 0.0) - 1.0
            b.add_row(dual, GE if j in relaxed else EQ, 0.0)
        for prod in products:
            if prod.complemented:
                # t >= coeff * pi - M * x
                b.add_row(
                    {prod.pi_col: prod.weight, prod.col: -1.0, prod.x_col: -M}, LE, 0.0
                )
            else:
                # t >= coeff * pi - M * (1 - x)
                b.add_row(
                    {prod.pi_col: prod.weight, prod.col: -1.0, prod.x_col: M}, LE, M
                )
        info = _RowInfo(
            robust_row,
            row.a,
            row.y_certain,
            row.b,
            np.array([d_eff[k] for k in keep]),
            [pi_cols[k] for k in keep],
            products,
        )
        rows_meta.append(info)
    return _finish_builder(b, problem, x_cols, y_cols, "modbigm", rows_meta)


def extract_xy(mip: MixedIntegerProgram, solution: np.ndarray):
    meta = getattr(mip, "meta", None)
    if meta is None:
        raise ReformulateError("model was not produced by a counterpart builder")
    x = np.round(solution[meta.x_cols])
    y = solution[meta.y_cols]
    return x, y


def audit_products(mip: MixedIntegerProgram, solution: np.ndarray) -> float:
    """Re-derive every linearized product exactly and recheck the robust rows.

    Returns the largest row violation after substituting
    ``u = coeff * pi * x`` (or the complement form); a clearly positive value
    convicts an undersized linearization constant.
    """
    meta = getattr(mip, "meta", None)
    if meta is None or meta.kind not in ("bigm", "modbigm"):
        raise ReformulateError("product audit applies to linearized counterparts only")
    worst = -np.inf
    for info in meta.rows:
        lhs = float(info.a @ np.round(solution[meta.x_cols]))
        if info.y_certain is not None:
            lhs += float(info.y_certain @ solution[meta.y_cols])
        for d_k, col in zip(info.d_eff, info.pi_cols):
            lhs += d_k * solution[col]
        for prod in info.products:
            x_val = np.round(solution[prod.x_col])
            active = (1.0 - x_val) if prod.complemented else x_val
            exact = prod.weight * solution[prod.pi_col] * active
            lhs += prod.sign * exact
        worst = max(worst, lhs - info.b)
    return worst


def formulation_size(mip: MixedIntegerProgram) -> FormulationSize:
    """Model dimensions: binaries, continuous variables, affine rows, and
    sign-constrained variables (lower bound 0, no upper bound)."""
    mask = mip.binary_mask
    lower = mip.base.lower
    upper = mip.base.upper
    sign = int(np.sum((~mask) & (lower == 0.0) & np.isposinf(upper)))
    return FormulationSize(
        binaries=int(mask.sum()),
        continuous=int((~mask).sum()),
        affine_rows=mip.base.n_rows,
        sign_rows=sign,
    )


def bigm_size_closed_form(m: int, K: int, n: int, p: int) -> FormulationSize:
    """Closed-form size of the generic linearized counterpart with ``m``
    uncertain rows, ``K`` set rows each, dense decision coefficients, and no
    sign-row elimination."""
    products = m * K * n
    return FormulationSize(
        binaries=n,
        continuous=p + m * K + products,
        affine_rows=m + m * p + 3 * products,
        sign_rows=m * K + products,
    )


def lc_block_closed_form(kind: str, k_rows: int, dim: int):
    """Closed-form (affine, sign) counts for a single bound-reduction row."""
    if kind == "pibar":
        return 1 + 2 * dim, k_rows + 2 * dim
    if kind == "bigm":
        return 1 + 4 * dim, k_rows + 2 * dim
    if kind == "modbigm":
        return 1 + 2 * dim, k_rows + 2 * dim
    raise ReformulateError(f"unknown formulation {kind!r}")


def sp_size_closed_form(kind: str, n_nodes: int, n_arcs: int) -> FormulationSize:
    """Closed-form size of the shortest-path counterparts."""
    if kind == "pibar" or kind == "modbigm":
        affine = n_nodes + 2 * n_arcs
    elif kind == "bigm":
        affine = n_nodes + 4 * n_arcs
    else:
        raise ReformulateError(f"unknown formulation {kind!r}")
    return FormulationSize(
        binaries=2 * n_arcs,
        continuous=2 * n_arcs + 1,
        affine_rows=affine,
        sign_rows=2 * n_arcs + 1,
    )
