"""Shortest-path benchmark with purchasable uncertainty reduction.

Random Euclidean graphs: points drawn on a 100x100 square, complete graph
pruned to the 40% shortest edges, source/target the two mutually furthest
nodes.  Arc lengths inflate to ``(1 + xi/2) * length`` with ``xi`` in a
budgeted set whose per-edge caps shrink from 1 to ``1 - gamma`` wherever the
reduction decision is bought at cost ``c``.

Models are built on the bidirected arc expansion (each edge yields two
opposite arcs carrying their own binary routing/reduction variables), which
is what the formulation size accounting is stated for; solutions are
reported on undirected edges.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ._assemble import MipBuilder
from .linprog import EQ, LE, MIN
from .milp import DEFAULT_NODE_LIMIT, MixedIntegerProgram, solve_milp
from .model import LinearConstraints, ModelError, PiBarUSet
from .oracle import worst_case

FORMULATIONS = ("pibar", "bigm", "modbigm")


class BenchmarkError(ModelError):
    pass


@dataclass(frozen=True)
class Graph:
    edges: tuple  # (u, v) with u < v
    lengths: np.ndarray
    source: int
    target: int
    n_nodes: int
    coords: np.ndarray | None = None
    seed: int | None = None  # seed that actually produced the graph
    requested_seed: int | None = None  # seed asked for (differs after retries)

    def __post_init__(self):
        object.__setattr__(self, "lengths", np.asarray(self.lengths, dtype=float))
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _connected(n, edges, source, target):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {source}
    stack = [source]
    while stack:
        u = stack.pop()
        if u == target:
            return True
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def generate_graph(n: int, seed: int) -> Graph:
    """Deterministic random Euclidean graph (PCG64 stream per seed).

    Keeps the ``ceil(0.4 * n*(n-1)/2)`` shortest edges of the complete graph;
    if that disconnects the two furthest nodes, the whole draw is retried
    with ``seed + 1`` (the retry is recorded in the graph's provenance).
    """
    if n < 2:
        raise BenchmarkError("need at least two nodes")
    attempt = int(seed)
    while True:
        rng = np.random.default_rng(attempt)
        coords = rng.uniform(0.0, 100.0, size=(n, 2))
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        dists = np.array([np.linalg.norm(coords[u] - coords[v]) for u, v in pairs])
        order = sorted(range(len(pairs)), key=lambda i: (dists[i], pairs[i]))
        keep = int(np.ceil(0.4 * n * (n - 1) / 2))
        kept = sorted(order[:keep], key=lambda i: pairs[i])
        edges = [pairs[i] for i in kept]
        lengths = dists[kept]
        far = max(range(len(pairs)), key=lambda i: (dists[i], pairs[i]))
        source, target = pairs[far]
        if _connected(n, edges, source, target):
            return Graph(
                tuple(edges), lengths, source, target, n,
                coords=coords, seed=attempt, requested_seed=int(seed),
            )
        attempt += 1


@dataclass
class SpInstance:
    graph: Graph
    budget: float
    gamma: np.ndarray  # per edge, in [0, 1)
    cost: np.ndarray  # per edge, >= 0
    x_constraints: LinearConstraints | None = None  # over per-edge reductions

    def __post_init__(self):
        e = self.graph.n_edges
        self.budget = float(self.budget)
        self.gamma = np.broadcast_to(np.asarray(self.gamma, dtype=float), (e,)).copy()
        self.cost = np.broadcast_to(np.asarray(self.cost, dtype=float), (e,)).copy()
        if self.budget < 0:
            raise BenchmarkError("budget must be nonnegative")
        if np.any(self.gamma < 0) or np.any(self.gamma >= 1):
            raise BenchmarkError("gamma must lie in [0, 1)")
        if np.any(self.cost < 0):
            raise BenchmarkError("costs must be nonnegative")
        if self.x_constraints is not None and self.x_constraints.A.shape[1] != e:
            raise BenchmarkError("x constraints width does not match edge count")


def uncertainty_set(inst: SpInstance) -> PiBarUSet:
    """The per-edge budgeted set: caps 1 - gamma*x, total deviation <= budget."""
    e = inst.graph.n_edges
    return PiBarUSet(
        np.ones((1, e)), np.array([inst.budget]), 1.0 - inst.gamma, inst.gamma.copy()
    )


@dataclass
class SpSolution:
    x: np.ndarray  # per edge, 0/1
    y: np.ndarray  # per edge, 0/1 (on the path)
    objective: float
    formulation: str
    nodes_explored: int
    wall_time: float
    path: tuple = ()  # node sequence source..target

    @property
    def n_star(self) -> int:
        return int(self.y.sum())

    @property
    def n_tilde(self) -> int:
        return int((self.x * self.y).sum())


@dataclass
class SpModelInfo:
    kind: str
    arcs: tuple
    arc_edge: np.ndarray
    x_cols: np.ndarray
    y_cols: np.ndarray
    p_col: int
    q_cols: np.ndarray
    r_cols: np.ndarray


def _arc_expansion(graph: Graph):
    arcs = []
    arc_edge = []
    for e, (u, v) in enumerate(graph.edges):
        arcs.append((u, v))
        arcs.append((v, u))
        arc_edge.extend([e, e])
    return tuple(arcs), np.array(arc_edge)


def sp_bigm_constant(inst: SpInstance) -> float:
    """Safe fence for the linearized products: twice the largest
    gamma * (length/2) any arc can contribute."""
    return float(np.max(inst.gamma * inst.graph.lengths, initial=0.0))


def build_sp_robust(inst: SpInstance, formulation: str, M: float | None = None) -> MixedIntegerProgram:
    """Robust shortest-path counterpart on the bidirected expansion.

    All three formulations share the routing block (binary arc flows with
    node conservation) and the scalar budget dual ``p``; they differ in how
    the per-arc bound duals meet the reduction decision.
    """
    if formulation not in FORMULATIONS:
        raise BenchmarkError(f"unknown formulation {formulation!r}")
    g = inst.graph
    if not _connected(g.n_nodes, g.edges, g.source, g.target):
        raise BenchmarkError("graph has no source-target path")
    arcs, arc_edge = _arc_expansion(g)
    n_arcs = len(arcs)
    lengths = g.lengths[arc_edge]
    gamma = inst.gamma[arc_edge]
    cost = inst.cost[arc_edge]
    half = lengths / 2.0
    if M is None:
        M = sp_bigm_constant(inst)
    M = float(M)

    b = MipBuilder()
    x_cols = np.array([b.add_col(obj=cost[a], lb=0, ub=1, binary=True) for a in range(n_arcs)])
    y_cols = np.array([b.add_col(obj=lengths[a], lb=0, ub=1, binary=True) for a in range(n_arcs)])
    p_col = b.add_col(obj=inst.budget)
    if formulation == "pibar":
        q_obj = gamma
        r_obj = 1.0 - gamma
    elif formulation == "bigm":
        q_obj = np.ones(n_arcs)
        r_obj = -np.ones(n_arcs)
    else:
        q_obj = 1.0 - gamma
        r_obj = np.ones(n_arcs)
    q_cols = np.array([b.add_col(obj=q_obj[a]) for a in range(n_arcs)])
    r_cols = np.array([b.add_col(obj=r_obj[a]) for a in range(n_arcs)])

    for node in range(g.n_nodes):
        coeffs = {}
        for a, (u, v) in enumerate(arcs):
            if u == node:
                coeffs[y_cols[a]] = 1.0
            elif v == node:
                coeffs[y_cols[a]] = -1.0
        rhs = 1.0 if node == g.source else (-1.0 if node == g.target else 0.0)
        b.add_row(coeffs, EQ, rhs)

    if inst.x_constraints is not None:
        cons = inst.x_constraints
        for i in range(cons.n_rows):
            coeffs = {}
            for e in np.flatnonzero(cons.A[i]):
                coeffs[x_cols[2 * e]] = cons.A[i, e]
                coeffs[x_cols[2 * e + 1]] = cons.A[i, e]
            b.add_row(coeffs, cons.senses[i], cons.rhs[i])

    for a in range(n_arcs):
        if formulation == "pibar":
            # increment dual: p + q >= half*(y - x); floor dual: p + r >= half*y
            b.add_row(
                {y_cols[a]: half[a], x_cols[a]: -half[a], p_col: -1.0, q_cols[a]: -1.0},
                LE,
                0.0,
            )
            b.add_row({y_cols[a]: half[a], p_col: -1.0, r_cols[a]: -1.0}, LE, 0.0)
        elif formulation == "bigm":
            # bound dual row plus three fences for u = gamma * q * x
            b.add_row({y_cols[a]: half[a], p_col: -1.0, q_cols[a]: -1.0}, LE, 0.0)
            b.add_row({r_cols[a]: 1.0, x_cols[a]: -M}, LE, 0.0)
            b.add_row({r_cols[a]: 1.0, q_cols[a]: -gamma[a]}, LE, 0.0)
            b.add_row({q_cols[a]: gamma[a], r_cols[a]: -1.0, x_cols[a]: M}, LE, M)
        else:
            # bound dual row plus the single lower fence t >= gamma*q - M*x
            b.add_row({y_cols[a]: half[a], p_col: -1.0, q_cols[a]: -1.0}, LE, 0.0)
            b.add_row({q_cols[a]: gamma[a], r_cols[a]: -1.0, x_cols[a]: -M}, LE, 0.0)

    mip = b.build(MIN)
    mip.meta = SpModelInfo(
        formulation, arcs, arc_edge, x_cols, y_cols, p_col, q_cols, r_cols
    )
    return mip


def build_sp_stochastic(inst: SpInstance) -> MixedIntegerProgram:
    """Expected-cost counterpart under per-edge uniform deviations.

    A reduced arc's deviation is uniform on ``[0, 1 - gamma]``, an unreduced
    one on ``[0, 1]``; the expectation linearizes with one product variable
    ``w = x*y`` per arc.
    """
    g = inst.graph
    arcs, arc_edge = _arc_expansion(g)
    n_arcs = len(arcs)
    lengths = g.lengths[arc_edge]
    gamma = inst.gamma[arc_edge]
    cost = inst.cost[arc_edge]

    b = MipBuilder()
    x_cols = [b.add_col(obj=cost[a], lb=0, ub=1, binary=True) for a in range(n_arcs)]
    y_cols = [b.add_col(obj=1.25 * lengths[a], lb=0, ub=1, binary=True) for a in range(n_arcs)]
    w_cols = [b.add_col(obj=-gamma[a] * lengths[a] / 4.0, lb=0, ub=1) for a in range(n_arcs)]

    for node in range(g.n_nodes):
        coeffs = {}
        for a, (u, v) in enumerate(arcs):
            if u == node:
                coeffs[y_cols[a]] = 1.0
            elif v == node:
                coeffs[y_cols[a]] = -1.0
        rhs = 1.0 if node == g.source else (-1.0 if node == g.target else 0.0)
        b.add_row(coeffs, EQ, rhs)

    if inst.x_constraints is not None:
        cons = inst.x_constraints
        for i in range(cons.n_rows):
            coeffs = {}
            for e in np.flatnonzero(cons.A[i]):
                coeffs[x_cols[2 * e]] = cons.A[i, e]
                coeffs[x_cols[2 * e + 1]] = cons.A[i, e]
            b.add_row(coeffs, cons.senses[i], cons.rhs[i])

    for a in range(n_arcs):
        b.add_row({x_cols[a]: 1.0, y_cols[a]: 1.0, w_cols[a]: -1.0}, LE, 1.0)
        b.add_row({w_cols[a]: 1.0, x_cols[a]: -1.0}, LE, 0.0)
        b.add_row({w_cols[a]: 1.0, y_cols[a]: -1.0}, LE, 0.0)

    mip = b.build(MIN)
    mip.meta = SpModelInfo(
        "stochastic", arcs, arc_edge,
        np.array(x_cols), np.array(y_cols), -1, np.array(w_cols), np.zeros(0, dtype=int),
    )
    return mip


def _extract_solution(inst, mip, res, formulation) -> SpSolution:
    meta = mip.meta
    g = inst.graph
    z = res.incumbent
    y_arcs = np.round(z[meta.y_cols]).astype(int)
    x_arcs = np.round(z[meta.x_cols]).astype(int)
    path = _walk_path(g, meta.arcs, y_arcs)

    n_edges = g.n_edges
    y_edges = np.zeros(n_edges, dtype=int)
    x_edges = np.zeros(n_edges, dtype=int)
    for e in range(n_edges):
        fwd, bwd = 2 * e, 2 * e + 1
        if y_arcs[fwd] and y_arcs[bwd]:
            raise BenchmarkError("both orientations of an edge carry flow")
        if y_arcs[fwd] or y_arcs[bwd]:
            y_edges[e] = 1
            x_edges[e] = x_arcs[fwd] if y_arcs[fwd] else x_arcs[bwd]
        else:
            x_edges[e] = max(x_arcs[fwd], x_arcs[bwd])
    if inst.budget == 0.0 or not np.any(inst.gamma > 0):
        # Reduction has no effect; report the canonical no-purchase decision.
        x_edges[:] = 0
    return SpSolution(
        x_edges, y_edges, res.objective_value, formulation,
        res.nodes_explored, res.wall_time, path,
    )


def _walk_path(g, arcs, y_arcs):
    outgoing = {}
    for a in np.flatnonzero(y_arcs):
        u, v = arcs[a]
        if u in outgoing:
            raise BenchmarkError(f"node {u} has two outgoing path arcs")
        outgoing[u] = v
    node = g.source
    path = [node]
    seen = {node}
    while node != g.target:
        if node not in outgoing:
            raise BenchmarkError(f"path stalls at node {node}")
        node = outgoing[node]
        if node in seen:
            raise BenchmarkError("path revisits a node")
        seen.add(node)
        path.append(node)
    if len(path) - 1 != int(y_arcs.sum()):
        raise BenchmarkError("routing solution contains arcs off the path")
    return tuple(path)


def _branching_guidance(inst, mip):
    # Branch the path structure before the reduction purchases, and inside
    # the routing class weight fractionality by arc length: fixing the long,
    # contested arcs first collapses the tree for every formulation alike.
    prio = np.zeros(mip.base.n_cols, dtype=int)
    prio[mip.meta.y_cols] = 1
    weight = np.ones(mip.base.n_cols)
    weight[mip.meta.y_cols] = inst.graph.lengths[mip.meta.arc_edge]
    return prio, weight


def solve_sp_robust(
    inst: SpInstance,
    formulation: str,
    node_limit: int = DEFAULT_NODE_LIMIT,
    M: float | None = None,
) -> SpSolution:
    mip = build_sp_robust(inst, formulation, M=M)
    prio, weight = _branching_guidance(inst, mip)
    start = time.perf_counter()
    res = solve_milp(
        mip, node_limit=node_limit, branch_priority=prio, branch_weight=weight
    )
    wall = time.perf_counter() - start
    if res.status != "optimal":
        raise BenchmarkError(f"robust model is {res.status}")
    sol = _extract_solution(inst, mip, res, formulation)
    sol.wall_time = wall
    return sol


def solve_sp_stochastic(inst: SpInstance, node_limit: int = DEFAULT_NODE_LIMIT) -> SpSolution:
    mip = build_sp_stochastic(inst)
    prio, weight = _branching_guidance(inst, mip)
    start = time.perf_counter()
    res = solve_milp(
        mip, node_limit=node_limit, branch_priority=prio, branch_weight=weight
    )
    wall = time.perf_counter() - start
    if res.status != "optimal":
        raise BenchmarkError(f"stochastic model is {res.status}")
    sol = _extract_solution(inst, mip, res, "stochastic")
    sol.wall_time = wall
    return sol


def nominal_value(sol: SpSolution, inst: SpInstance) -> float:
    g = inst.graph
    return float(inst.cost @ sol.x + g.lengths @ sol.y)


def evaluate_solution(
    sol: SpSolution, inst: SpInstance, mode: str = "worst",
    samples: int = 0, seed: int = 0,
) -> float:
    """Out-of-model cost of a fixed (x, y).

    ``worst``: nominal cost plus the exact inner maximization over the
    instantiated set.  ``average``: Monte Carlo mean under independent
    uniform deviations on ``[0, 1 - gamma*x]`` (deterministic per seed).
    """
    g = inst.graph
    x = np.asarray(sol.x, dtype=float)
    y = np.asarray(sol.y, dtype=float)
    if x.shape != (g.n_edges,) or y.shape != (g.n_edges,):
        raise BenchmarkError("solution does not match the instance's edges")
    base = float(inst.cost @ x + g.lengths @ y)
    if mode == "worst":
        coeff = g.lengths * y / 2.0
        return base + worst_case(x, coeff, uncertainty_set(inst)).value
    if mode == "average":
        if samples <= 0:
            raise BenchmarkError("average mode needs a positive sample count")
        rng = np.random.default_rng(seed)
        caps = 1.0 - inst.gamma * x
        draws = rng.uniform(0.0, 1.0, size=(int(samples), g.n_edges)) * caps
        extra = draws @ (g.lengths * y / 2.0)
        return base + float(extra.mean())
    raise BenchmarkError(f"unknown evaluation mode {mode!r}")


def expected_cost(sol: SpSolution, inst: SpInstance) -> float:
    """Closed-form expectation under the uniform deviation model."""
    g = inst.graph
    x = np.asarray(sol.x, dtype=float)
    y = np.asarray(sol.y, dtype=float)
    return float(inst.cost @ x + np.sum(g.lengths * y * (5.0 - inst.gamma * x) / 4.0))


@dataclass
class Observables:
    n_star: int
    n_tilde: int
    z_star: float
    price_of_robustness: float
    benefit_of_interaction: float

    def __post_init__(self):
        if self.n_tilde > self.n_star:
            raise BenchmarkError("more reduced arcs than path arcs")
        if self.benefit_of_interaction < -1e-6:
            raise BenchmarkError("negative benefit of interaction")


def compute_observables(
    nominal_sol: SpSolution, robust_sol: SpSolution, ddu_sol: SpSolution
) -> Observables:
    """Price of robustness and benefit of interaction from the three solves
    (no uncertainty / budgeted without reduction / budgeted with reduction)."""
    return Observables(
        n_star=ddu_sol.n_star,
        n_tilde=ddu_sol.n_tilde,
        z_star=ddu_sol.objective,
        price_of_robustness=robust_sol.objective - nominal_sol.objective,
        benefit_of_interaction=robust_sol.objective - ddu_sol.objective,
    )


# --- introductory network fixture -------------------------------------------

_FIG1_NODES = {"A": 0, "B": 1, "C": 2, "E": 3, "F": 4, "G": 5, "H": 6}
_FIG1_EDGES = [
    ("A", "C", 31.0),
    ("B", "C", 64.0),
    ("A", "E", 15.3),
    ("C", "E", 16.0),
    ("E", "F", 23.0),
    ("F", "G", 20.6),
    ("G", "H", 25.5),
    ("B", "H", 13.0),
]


def figure1_graph() -> Graph:
    edges = []
    lengths = []
    for a, bb, length in _FIG1_EDGES:
        u, v = sorted((_FIG1_NODES[a], _FIG1_NODES[bb]))
        edges.append((u, v))
        lengths.append(length)
    order = sorted(range(len(edges)), key=lambda i: edges[i])
    return Graph(
        tuple(edges[i] for i in order),
        np.array([lengths[i] for i in order]),
        source=_FIG1_NODES["A"],
        target=_FIG1_NODES["B"],
        n_nodes=7,
    )


def figure1_instance() -> SpInstance:
    """Introductory network: budget 1, reduction fraction 0.8, free reduction
    on at most one edge."""
    g = figure1_graph()
    ones = np.ones((1, g.n_edges))
    return SpInstance(
        g,
        budget=1.0,
        gamma=0.8,
        cost=0.0,
        x_constraints=LinearConstraints(ones, (LE,), np.array([1.0])),
    )


def figure1_table(formulation: str = "pibar", node_limit: int = DEFAULT_NODE_LIMIT):
    """The three benchmark rows: (label, nominal value, worst-case value)."""
    inst = figure1_instance()
    nominal_inst = replace(inst, budget=0.0)
    plain_inst = replace(inst, gamma=np.zeros(inst.graph.n_edges))

    sol_nom = solve_sp_robust(nominal_inst, formulation, node_limit)
    sol_rob = solve_sp_robust(plain_inst, formulation, node_limit)
    sol_ddu = solve_sp_robust(inst, formulation, node_limit)

    rows = []
    for label, sol in (("nominal", sol_nom), ("robust", sol_rob), ("endogenous", sol_ddu)):
        worst = evaluate_solution(sol, inst, mode="worst")
        rows.append((label, nominal_value(sol, inst), worst, sol))
    return rows
