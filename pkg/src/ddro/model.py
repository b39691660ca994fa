"""Decision-dependent uncertainty sets and the robust problem container.

Two set families over the uncertain vector ``xi``:

* ``PolyUSet``: ``{xi | D @ xi <= d + Delta @ x}`` with free ``xi``; the
  influence decision ``x`` shifts the right-hand side affinely.
* ``PiBarUSet``: ``{xi | D @ xi <= d, 0 <= xi <= v + w * (1 - x)}`` with
  ``v, w >= 0``; a binary ``x`` component shrinks the matching upper bound
  from ``v + w`` down to ``v``.

A ``RobustLinearProblem`` minimizes ``c @ x + f @ y`` subject to rows
``a_i @ x + xi @ y <= b_i`` that must hold for every ``xi`` in the row's set
instantiated at ``x``.  Rows may carry an extra certain coefficient vector on
``y`` (used for epigraph-style encodings where part of the row is not
uncertain).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linprog import GE, LE, MIN, OPTIMAL, LinearProgram, solve_lp


class ModelError(Exception):
    pass


class DimensionMismatch(ModelError):
    pass


class EmptyUncertaintySet(ModelError):
    pass


@dataclass(frozen=True)
class PolyUSet:
    D: np.ndarray
    d: np.ndarray
    Delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "D", np.atleast_2d(np.asarray(self.D, dtype=float)))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))
        object.__setattr__(self, "Delta", np.atleast_2d(np.asarray(self.Delta, dtype=float)))
        k = self.D.shape[0]
        if self.d.shape != (k,):
            raise DimensionMismatch("d length does not match D rows")
        if self.Delta.shape[0] != k:
            raise DimensionMismatch("Delta rows do not match D rows")

    @property
    def n_rows(self) -> int:
        return self.D.shape[0]

    @property
    def dim(self) -> int:
        return self.D.shape[1]

    @property
    def influence_dim(self) -> int:
        return self.Delta.shape[1]


@dataclass(frozen=True)
class PiBarUSet:
    D: np.ndarray
    d: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        w = np.asarray(self.w, dtype=float)
        D = np.asarray(self.D, dtype=float)
        if D.size == 0:
            D = D.reshape(0, v.shape[0])
        D = np.atleast_2d(D)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        if self.d.shape != (self.D.shape[0],):
            raise DimensionMismatch("d length does not match D rows")
        if v.shape != (self.dim,) or w.shape != (self.dim,):
            raise DimensionMismatch("v/w length does not match D columns")
        if np.any(v < 0) or np.any(w < 0):
            raise ModelError("v and w must be componentwise nonnegative")

    @property
    def n_rows(self) -> int:
        return self.D.shape[0]

    @property
    def dim(self) -> int:
        return self.D.shape[1]

    @property
    def influence_dim(self) -> int:
        return self.dim


def pibar_to_poly(uset: PiBarUSet) -> PolyUSet:
    """Rewrite a PiBarUSet as PolyUSet rows.

    Row order: original D rows, then the upper-bound rows (identity block,
    rhs ``v + w``, decision part ``-diag(w)``), then the sign rows ``-I``.
    """
    p = uset.dim
    k = uset.n_rows
    eye = np.eye(p)
    D = np.vstack([uset.D, eye, -eye])
    d = np.concatenate([uset.d, uset.v + uset.w, np.zeros(p)])
    Delta = np.vstack([np.zeros((k, p)), -np.diag(uset.w), np.zeros((p, p))])
    return PolyUSet(D, d, Delta)


@dataclass
class Polyhedron:
    """Feasible region ``{xi | A @ xi <= b}`` with free ``xi``."""

    A: np.ndarray
    b: np.ndarray

    def contains(self, xi: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(self.A @ np.asarray(xi, dtype=float) <= self.b + tol))

    def is_empty(self, tol: float = 1e-9) -> bool:
        n = self.A.shape[1]
        lp = LinearProgram(
            MIN,
            np.zeros(n),
            self.A,
            (LE,) * self.A.shape[0],
            self.b,
            np.full(n, -np.inf),
            np.full(n, np.inf),
        )
        return solve_lp(lp).status != OPTIMAL


def check_binary(x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.minimum(np.abs(x), np.abs(1.0 - x)) > tol):
        raise ModelError("influence vector is not binary")
    return np.round(x)


def instantiate(uset, x: np.ndarray) -> Polyhedron:
    """Polyhedron over ``xi`` obtained by fixing the influence decision."""
    x = check_binary(x)
    if isinstance(uset, PolyUSet):
        if x.shape != (uset.influence_dim,):
            raise DimensionMismatch("x length does not match Delta columns")
        return Polyhedron(uset.D.copy(), uset.d + uset.Delta @ x)
    if isinstance(uset, PiBarUSet):
        if x.shape != (uset.dim,):
            raise DimensionMismatch("x length does not match set dimension")
        poly = pibar_to_poly(uset)
        return Polyhedron(poly.D.copy(), poly.d + poly.Delta @ x)
    raise ModelError(f"unsupported set type {type(uset).__name__}")


@dataclass
class LinearConstraints:
    """Side constraints ``A @ z (senses) rhs`` on a variable block."""

    A: np.ndarray
    senses: tuple
    rhs: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.senses = tuple(self.senses)
        self.rhs = np.asarray(self.rhs, dtype=float)
        if len(self.senses) != self.A.shape[0] or self.rhs.shape != (self.A.shape[0],):
            raise DimensionMismatch("senses/rhs length does not match rows")
        for s in self.senses:
            if s not in (LE, GE, "="):
                raise ModelError(f"bad sense {s!r}")

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class UncertainRow:
    """One robust row ``a @ x + y_certain @ y + xi @ y <= b`` for all xi."""

    a: np.ndarray
    b: float
    uset: object
    y_certain: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = float(self.b)
        if self.y_certain is not None:
            self.y_certain = np.asarray(self.y_certain, dtype=float)


@dataclass
class RobustLinearProblem:
    """min ``c @ x + f @ y`` over binary x and the y-domain, s.t. robust rows."""

    c: np.ndarray
    f: np.ndarray
    rows: list
    y_lower: np.ndarray
    y_upper: np.ndarray
    y_binary: np.ndarray = None
    x_constraints: LinearConstraints | None = None
    y_constraints: LinearConstraints | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.y_lower = np.asarray(self.y_lower, dtype=float)
        self.y_upper = np.asarray(self.y_upper, dtype=float)
        if self.y_binary is None:
            self.y_binary = np.zeros(self.p, dtype=bool)
        self.y_binary = np.asarray(self.y_binary, dtype=bool)
        self.validate()

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def p(self) -> int:
        return self.f.shape[0]

    def validate(self):
        if self.y_lower.shape != (self.p,) or self.y_upper.shape != (self.p,):
            raise DimensionMismatch("y bounds length does not match f")
        if self.y_binary.shape != (self.p,):
            raise DimensionMismatch("y binary mask length does not match f")
        for idx, row in enumerate(self.rows):
            if row.a.shape != (self.n,):
                raise DimensionMismatch(f"row {idx}: a length does not match c")
            if row.uset.dim != self.p:
                raise DimensionMismatch(f"row {idx}: set dimension does not match y")
            if row.uset.influence_dim != self.n:
                raise DimensionMismatch(f"row {idx}: set influence does not match x")
            if row.y_certain is not None and row.y_certain.shape != (self.p,):
                raise DimensionMismatch(f"row {idx}: y_certain length does not match y")
        if self.x_constraints is not None and self.x_constraints.A.shape[1] != self.n:
            raise DimensionMismatch("x side constraints width does not match x")
        if self.y_constraints is not None and self.y_constraints.A.shape[1] != self.p:
            raise DimensionMismatch("y side constraints width does not match y")


# --- JSON serialization -----------------------------------------------------
#
# Schema (version 1): all matrices are dense row-major nested lists; infinite
# bounds are the strings "inf" / "-inf".
#
# {
#   "version": 1,
#   "c": [...], "f": [...],
#   "y_lower": [...], "y_upper": [...], "y_binary": [...],
#   "rows": [
#     {"a": [...], "b": float, "y_certain": [...] | null,
#      "set": {"type": "poly", "D": [[...]], "d": [...], "Delta": [[...]]}
#           | {"type": "pibar", "D": [[...]], "d": [...], "v": [...], "w": [...]}}
#   ],
#   "x_constraints": {"A": [[...]], "senses": [...], "rhs": [...]} | null,
#   "y_constraints": {...} | null
# }


def _encode_bound(value: float):
    if np.isposinf(value):
        return "inf"
    if np.isneginf(value):
        return "-inf"
    return float(value)


def _decode_bounds(values):
    return np.array([float(v) for v in values])


def _encode_constraints(cons: LinearConstraints | None):
    if cons is None:
        return None
    return {"A": cons.A.tolist(), "senses": list(cons.senses), "rhs": cons.rhs.tolist()}


def _decode_constraints(obj):
    if obj is None:
        return None
    return LinearConstraints(np.array(obj["A"]), tuple(obj["senses"]), np.array(obj["rhs"]))


def problem_to_json(problem: RobustLinearProblem) -> str:
    rows = []
    for row in problem.rows:
        if isinstance(row.uset, PolyUSet):
            uset = {
                "type": "poly",
                "D": row.uset.D.tolist(),
                "d": row.uset.d.tolist(),
                "Delta": row.uset.Delta.tolist(),
            }
        else:
            uset = {
                "type": "pibar",
                "D": row.uset.D.tolist(),
                "d": row.uset.d.tolist(),
                "v": row.uset.v.tolist(),
                "w": row.uset.w.tolist(),
            }
        rows.append(
            {
                "a": row.a.tolist(),
                "b": row.b,
                "y_certain": None if row.y_certain is None else row.y_certain.tolist(),
                "set": uset,
            }
        )
    doc = {
        "version": 1,
        "c": problem.c.tolist(),
        "f": problem.f.tolist(),
        "y_lower": [_encode_bound(v) for v in problem.y_lower],
        "y_upper": [_encode_bound(v) for v in problem.y_upper],
        "y_binary": problem.y_binary.astype(int).tolist(),
        "rows": rows,
        "x_constraints": _encode_constraints(problem.x_constraints),
        "y_constraints": _encode_constraints(problem.y_constraints),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def problem_from_json(text: str) -> RobustLinearProblem:
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise ModelError(f"unsupported schema version {doc.get('version')!r}")
    rows = []
    for entry in doc["rows"]:
        spec = entry["set"]
        if spec["type"] == "poly":
            uset = PolyUSet(np.array(spec["D"]), np.array(spec["d"]), np.array(spec["Delta"]))
        elif spec["type"] == "pibar":
            uset = PiBarUSet(
                np.array(spec["D"]), np.array(spec["d"]), np.array(spec["v"]), np.array(spec["w"])
            )
        else:
            raise ModelError(f"unknown set type {spec['type']!r}")
        y_certain = entry.get("y_certain")
        rows.append(
            UncertainRow(
                np.array(entry["a"]),
                entry["b"],
                uset,
                None if y_certain is None else np.array(y_certain),
            )
        )
    return RobustLinearProblem(
        c=np.array(doc["c"]),
        f=np.array(doc["f"]),
        rows=rows,
        y_lower=_decode_bounds(doc["y_lower"]),
        y_upper=_decode_bounds(doc["y_upper"]),
        y_binary=np.array(doc["y_binary"], dtype=bool),
        x_constraints=_decode_constraints(doc.get("x_constraints")),
        y_constraints=_decode_constraints(doc.get("y_constraints")),
    )
