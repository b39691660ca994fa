"""Robust linear optimization under decision-dependent polyhedral uncertainty.

Submodules:

* ``linprog`` / ``milp`` — dense LP solving with duals and a deterministic
  branch-and-bound over binary variables.
* ``model`` — the two decision-dependent set families, the robust problem
  container, and its JSON form.
* ``reformulate`` — the three exact counterparts (dual-bound based, generic
  linearized, one-sided linearized) plus size accounting.
* ``oracle`` — independent worst-case evaluation, feasibility audits, and the
  executable satisfiability reduction.
* ``spbench`` — the random Euclidean shortest-path benchmark with
  purchasable uncertainty reduction, plus the stochastic counterpart.
* ``cli`` — the experiment runner (``ddro`` console script).
"""

from .linprog import (
    EQ,
    GE,
    LE,
    MAX,
    MIN,
    LinearProgram,
    LpResult,
    solve_lp,
)
from .milp import MilpResult, MixedIntegerProgram, NodeLimitExceeded, solve_milp
from .model import (
    LinearConstraints,
    PiBarUSet,
    PolyUSet,
    RobustLinearProblem,
    UncertainRow,
    instantiate,
    pibar_to_poly,
    problem_from_json,
    problem_to_json,
)
from .oracle import (
    Cnf3,
    build_rosat,
    hbar_value,
    parse_dimacs,
    robust_feasible,
    sat_equivalence_check,
    truth_table_satisfiable,
    worst_case,
    worst_case_value,
)
from .reformulate import (
    FormulationSize,
    PiBarBound,
    build_bigm_counterpart,
    build_modified_bigm_counterpart,
    build_pibar_counterpart,
    choose_bigm,
    estimate_pibar,
    formulation_size,
)
from .spbench import (
    Graph,
    Observables,
    SpInstance,
    SpSolution,
    build_sp_robust,
    build_sp_stochastic,
    compute_observables,
    evaluate_solution,
    expected_cost,
    figure1_instance,
    generate_graph,
    solve_sp_robust,
    solve_sp_stochastic,
)

__version__ = "0.1.0"
