"""Primal solver: expected utility of consumption with labor income and
no-borrowing from the stopping region onward.

The wealth process follows the self-financing recursion with income
q_t * e * dkappa and consumption c * dkappa; admissibility is the node-wise
requirement that wealth stays nonnegative on the constrained region (which
always includes the leaves).  The solver is a log-barrier Newton method on
(consumption, holdings) with barriers on c >= 0 and on the constrained
wealth slacks; holdings enter linearly so their Hessian block carries a
1e-10 diagonal regularization, which also selects a small-norm holdings
representative when redundant assets make the optimizer non-unique.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import solve_barrier
from .errors import DegenerateValue, InfeasibleProblem
from .lp import EQ, GE, LinearProgram, solve_lp
from .scenario import Scenario, as_income_profile, cumulative_income
from .tree import EventTree

BOUNDARY_TOL = 1e-9
BOUNDARY_QUALITY = 1e-6
MU_CAP = 5e-8  # keeps KKT complementarity residuals below 1e-7


@dataclass
class PrimalPlan:
    c: dict[str, float]
    H: dict[tuple[str, int], float]
    V: dict[str, float]
    value: float
    multipliers: dict[str, float]
    boundary: bool = False
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    strategy: dict | None = None
    violated_node: str | None = None


def holdings_vars(scenario: Scenario) -> list[tuple[str, int]]:
    tree = scenario.tree
    return [(nid, i) for nid in tree.order if tree.children[nid]
            for i in range(scenario.assets)]


def wealth_process(scenario: Scenario, x: float, q, H, c) -> dict[str, float]:
    """Exact wealth recursion for given consumption and holdings."""
    qp = as_income_profile(q)
    tree = scenario.tree
    V: dict[str, float] = {}
    for nid in tree.order:
        par = tree.parent(nid)
        if par is None:
            base = float(x)
        else:
            delta = scenario.price_delta(nid)
            gains = sum(H.get((par, i), 0.0) * delta[i] for i in range(scenario.assets))
            base = V[par] + gains
        flow = (qp.at(tree.time(nid)) * scenario.e[nid] - c.get(nid, 0.0)) \
            * scenario.dkappa[nid]
        V[nid] = base + flow
    return V


def _path_gain_coefs(scenario: Scenario, nid: str, hidx) -> list[tuple[int, float]]:
    tree = scenario.tree
    out = []
    path = tree.path_to(nid)
    for a, b in zip(path, path[1:]):
        delta = scenario.price_delta(b)
        for i in range(scenario.assets):
            if delta[i] != 0.0:
                out.append((hidx[(a, i)], delta[i]))
    return out


def max_slack_strategy(scenario: Scenario, x: float, qp):
    """Best uniform wealth slack achievable with zero consumption.

    Returns (slack, holdings dict).  The slack is positive exactly when
    (x, q) sits strictly inside the financeable cone, and the holdings
    realize it.
    """
    tree = scenario.tree
    region = scenario.region()
    cum = cumulative_income(scenario, qp)
    hv = holdings_vars(scenario)
    if not hv:
        slack = min(x + cum[nid] for nid in tree.order if nid in region)
        return slack, {}
    hidx = {key: k for k, key in enumerate(hv)}
    n = len(hv) + 1  # holdings + slack variable
    rows = []
    for nid in tree.order:
        if nid not in region:
            continue
        coefs = [0.0] * n
        for k, val in _path_gain_coefs(scenario, nid, hidx):
            coefs[k] += val
        coefs[-1] = -1.0
        rows.append((coefs, GE, -(x + cum[nid])))
    objective = [0.0] * len(hv) + [1.0]
    out = solve_lp(LinearProgram(
        objective=objective, rows=rows, bounds=[(None, None)] * n))
    if not out.optimal:
        raise InfeasibleProblem("wealth slack LP failed")  # cannot happen: slack is free
    H = {key: float(out.x[hidx[key]]) for key in hv}
    return float(out.value), H


def admissibility_check(scenario: Scenario, x: float, q, c) -> Admissibility:
    """Can the consumption plan c be financed from (x, q)?

    Searches holdings keeping wealth nonnegative on the constrained region;
    on failure reports the first region node (in tree order) whose prefix of
    constraints is already unsatisfiable.
    """
    qp = as_income_profile(q)
    tree = scenario.tree
    region = scenario.region()
    region_order = [nid for nid in tree.order if nid in region]

    if scenario.assets == 0:
        V = wealth_process(scenario, x, qp, {}, c)
        for nid in region_order:
            if V[nid] < -BOUNDARY_TOL:
                return Admissibility(False, violated_node=nid)
        return Admissibility(True, strategy={})

    cum = cumulative_income(scenario, qp)
    hv = holdings_vars(scenario)
    hidx = {key: k for k, key in enumerate(hv)}
    consumed = {}
    for nid in tree.order:
        par = tree.parent(nid)
        spent = c.get(nid, 0.0) * scenario.dkappa[nid]
        consumed[nid] = spent if par is None else consumed[par] + spent

    def rows_for(prefix):
        rows = []
        for nid in prefix:
            coefs = [0.0] * len(hv)
            for k, val in _path_gain_coefs(scenario, nid, hidx):
                coefs[k] += val
            rows.append((coefs, GE, -(x + cum[nid] - consumed[nid])))
        return rows

    out = solve_lp(LinearProgram(
        objective=[0.0] * len(hv), rows=rows_for(region_order),
        bounds=[(None, None)] * len(hv)))
    if out.optimal:
        return Admissibility(True, strategy={k: float(out.x[hidx[k]]) for k in hv})
    for j in range(1, len(region_order) + 1):
        probe = solve_lp(LinearProgram(
            objective=[0.0] * len(hv), rows=rows_for(region_order[:j]),
            bounds=[(None, None)] * len(hv)))
        if not probe.optimal:
            return Admissibility(False, violated_node=region_order[j - 1])
    return Admissibility(False, violated_node=region_order[-1])


def _utility_is_unbounded_below(scenario: Scenario) -> bool:
    u = scenario.utility
    return u.family == "log" or u.rra >= 1.0


def solve_primal(scenario: Scenario, x: float, q=None, tol: float = 1e-9) -> PrimalPlan:
    """Maximize expected utility of consumption over financeable plans.

    Needs strictly positive superreplication slack; boundary instances are
    solved through a shrinking wealth homotopy and flagged with the looser
    boundary tolerance.  Raises InfeasibleProblem when (x, q) cannot be
    financed at all and DegenerateValue when optimal consumption is forced
    to zero on clock mass while the utility is unbounded below there.
    """
    qp = as_income_profile(q if q is not None else scenario.q)
    tree = scenario.tree
    region = scenario.region()
    clock_nodes = scenario.clock_nodes()
    cum = cumulative_income(scenario, qp)

    # Cheap strictly-feasible probe: zero trading.
    region_order = [nid for nid in tree.order if nid in region]
    slack0 = min(x + cum[nid] for nid in region_order)
    H0: dict[tuple[str, int], float] = {}
    slack = slack0
    if slack0 <= BOUNDARY_TOL and scenario.assets > 0:
        slack, H0 = max_slack_strategy(scenario, x, qp)
    if slack < -BOUNDARY_TOL:
        raise InfeasibleProblem(
            f"initial wealth {x} cannot finance the income profile "
            f"(slack {slack:.3e})"
        )
    if slack <= BOUNDARY_TOL:
        return _solve_boundary(scenario, x, qp, tol)

    eps = min(0.25 * slack / max(scenario.clock_bound, 1e-12), 1.0)
    c0 = {nid: eps for nid in clock_nodes}
    return _solve_interior(scenario, x, qp, c0, H0, tol)


def _solve_boundary(scenario: Scenario, x: float, qp, tol: float) -> PrimalPlan:
    if _utility_is_unbounded_below(scenario):
        if _consumption_forced_to_zero(scenario, x, qp):
            raise DegenerateValue(
                "optimal consumption forced to zero on positive clock mass; "
                "value is -inf"
            )
    scale = 1.0 + abs(x)
    plan = None
    for k in (3, 5, 7):
        plan = solve_primal(scenario, x + scale * 10.0 ** (-k), qp, tol=tol)
    plan.boundary = True
    plan.info["boundary_tolerance"] = BOUNDARY_QUALITY
    return plan


def _consumption_forced_to_zero(scenario: Scenario, x: float, qp) -> bool:
    """Max uniform consumption floor LP; zero means some node is pinned."""
    tree = scenario.tree
    region = scenario.region()
    clock_nodes = scenario.clock_nodes()
    cum = cumulative_income(scenario, qp)
    hv = holdings_vars(scenario)
    n = len(clock_nodes) + len(hv) + 1
    cpos = {nid: j for j, nid in enumerate(clock_nodes)}
    hidx = {key: len(clock_nodes) + k for k, key in enumerate(hv)}
    rows = []
    for nid in tree.order:
        if nid not in region:
            continue
        coefs = [0.0] * n
        for k, val in _path_gain_coefs(scenario, nid, hidx):
            coefs[k] += val
        for m in tree.path_to(nid):
            if m in cpos:
                coefs[cpos[m]] -= scenario.dkappa[m]
        rows.append((coefs, GE, -(x + cum[nid])))
    for nid in clock_nodes:  # c(n) >= floor
        coefs = [0.0] * n
        coefs[cpos[nid]] = 1.0
        coefs[-1] = -1.0
        rows.append((coefs, GE, 0.0))
    bounds = [(0.0, None)] * len(clock_nodes) + [(None, None)] * len(hv) + [(0.0, None)]
    out = solve_lp(LinearProgram(
        objective=[0.0] * (n - 1) + [1.0], rows=rows, bounds=bounds))
    return (not out.optimal) or out.value <= BOUNDARY_TOL


def _solve_interior(scenario: Scenario, x: float, qp, c0, H0, tol) -> PrimalPlan:
    tree = scenario.tree
    region = scenario.region()
    region_order = [nid for nid in tree.order if nid in region]
    clock_nodes = scenario.clock_nodes()
    cum = cumulative_income(scenario, qp)
    hv = holdings_vars(scenario)
    util = scenario.utility

    n_c = len(clock_nodes)
    n = n_c + len(hv)
    cpos = {nid: j for j, nid in enumerate(clock_nodes)}
    hidx = {key: n_c + k for k, key in enumerate(hv)}
    weights = np.array(
        [tree.path_prob[nid] * scenario.dkappa[nid] for nid in clock_nodes]
    )

    # Barrier rows: consumption positivity then constrained wealth slacks.
    m_b = n_c + len(region_order)
    G = np.zeros((m_b, n))
    g = np.zeros(m_b)
    for j in range(n_c):
        G[j, j] = 1.0
    for r, nid in enumerate(region_order):
        row = n_c + r
        for k, val in _path_gain_coefs(scenario, nid, hidx):
            G[row, k] += val
        for m in tree.path_to(nid):
            if m in cpos:
                G[row, cpos[m]] -= scenario.dkappa[m]
        g[row] = x + cum[nid]

    reg = np.zeros(n)
    reg[n_c:] = 1e-10

    from .utility import utility_bundle

    evaluate = utility_bundle(util, clock_nodes)

    def smooth(z):
        vals, grads, curvs = evaluate(z[:n_c])
        val = -float(weights @ vals)
        grad = np.zeros(n)
        grad[:n_c] = -weights * grads
        curv = np.zeros(n)
        curv[:n_c] = -weights * curvs
        return val, grad, curv

    z0 = np.zeros(n)
    for nid, j in cpos.items():
        z0[j] = c0[nid]
    for key, k in hidx.items():
        z0[k] = H0.get(key, 0.0)

    res = solve_barrier(smooth, z0, G, g, tol=tol, mu_cap=MU_CAP)

    c = {nid: float(res.z[cpos[nid]]) for nid in clock_nodes}
    H = {key: float(res.z[hidx[key]]) for key in hv}
    V = wealth_process(scenario, x, qp, H, c)
    multipliers = {
        nid: float(res.barrier_multipliers[n_c + r])
        for r, nid in enumerate(region_order)
    }
    return PrimalPlan(
        c=c,
        H=H,
        V=V,
        value=-res.value,
        multipliers=multipliers,
        info={
            "newton_steps": res.newton_steps,
            "mu": res.mu,
            "surrogate_gap": res.surrogate_gap,
        },
    )
