"""Dual solver over the deflator cone and the multiplicative decomposition.

The composite dual objective couples the conjugate utility of the deflator
with the initial-wealth and income pairings induced by the deflator itself:

    Phi(xi) = E[ sum_n V(t, xi_n) dkappa_n ] + x * xi_root + <q, r^xi>_dK.

Because the income functional is linear in xi and the deflator cone is
polyhedral, minimizing Phi over the cone reaches the biconjugate value
directly, with the optimal pair (y, r) read off the minimizer.  The same
barrier engine as the primal runs here, with equality rows for asset
neutrality and for the martingale property before the stopping region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import solve_barrier
from .cones import (
    Deflator,
    DualPair,
    cone_rows,
    find_martingale_density,
    income_functional,
    node_index,
    reduce_equalities,
)
from .errors import (
    DomainError,
    ExtensionFailure,
    InfeasibleProblem,
)
from .lp import EQ, GE, LinearProgram, solve_lp
from .primal import MU_CAP, PrimalPlan, max_slack_strategy
from .scenario import Scenario, as_income_profile, deterministic_clock
from .tree import EventTree

FACE_TOL = 1e-10


@dataclass
class DualSolution:
    deflator: Deflator
    value: float            # composite objective at the minimizer
    pair: DualPair
    y: float
    Z: dict[str, float]
    D: dict[str, float]
    info: dict = field(default_factory=dict)


def _dual_constraints(scenario: Scenario):
    """Equality matrix and barrier rows for the deflator cone over xi."""
    tree = scenario.tree
    idx = node_index(tree)
    nn = len(tree.order)
    rows, kinds = cone_rows(scenario)
    eq_rows, eq_rhs = [], []
    slack_rows = []  # (row array, origin node) for region supermartingale slack
    for (coefs, rel, rhs), kind in zip(rows, kinds):
        if rel == EQ:
            eq_rows.append(coefs)
            eq_rhs.append(rhs)
        else:  # '<=' : mean - xi(n) <= 0, barrier on xi(n) - mean >= 0
            slack_rows.append(([-v for v in coefs], kind))
    m_b = nn + len(slack_rows)
    G = np.zeros((m_b, nn))
    g = np.zeros(m_b)
    for j in range(nn):
        G[j, j] = 1.0
    for r, (coefs, _) in enumerate(slack_rows):
        G[nn + r, :] = coefs
    A = np.asarray(eq_rows, dtype=float) if eq_rows else np.zeros((0, nn))
    b = np.asarray(eq_rhs, dtype=float)
    drop_nodes = [kind for _, kind in slack_rows]
    return G, g, A, b, drop_nodes


def _strictly_feasible_start(scenario: Scenario, z_ref: Deflator, shrink: float = 0.8):
    """Reference density damped after every constrained node: martingale
    equalities hold exactly, region supermartingale slacks are strict."""
    tree = scenario.tree
    region = scenario.region()
    d0 = {tree.root: 1.0}
    for nid in tree.order:
        for c in tree.children[nid]:
            d0[c] = d0[nid] * (shrink if nid in region else 1.0)
    return {nid: z_ref.xi[nid] * d0[nid] for nid in tree.order}


def solve_composite_dual(
    scenario: Scenario, x: float, q=None, tol: float = 1e-9,
    assume_interior: bool = False,
) -> DualSolution:
    """Minimize the composite dual objective over the deflator cone."""
    qp = as_income_profile(q if q is not None else scenario.q)
    if not assume_interior:
        slack, _ = max_slack_strategy(scenario, x, qp)
        if slack <= 0.0:
            raise InfeasibleProblem(
                "(x, q) is not strictly financeable; composite dual is unbounded"
            )

    tree = scenario.tree
    idx = node_index(tree)
    nn = len(tree.order)
    clock_mask = np.zeros(nn, dtype=bool)
    omega = np.zeros(nn)
    lin = np.zeros(nn)
    for nid in tree.order:
        j = idx[nid]
        w = tree.path_prob[nid] * scenario.dkappa[nid]
        omega[j] = w
        if w > 0.0:
            clock_mask[j] = True
        lin[j] = w * qp.at(tree.time(nid)) * scenario.e[nid]
    lin[idx[tree.root]] += x

    from .utility import conjugate_bundle

    clock_idx = np.nonzero(clock_mask)[0]
    clock_list = [tree.order[j] for j in clock_idx]
    w_clock = omega[clock_idx]
    evaluate = conjugate_bundle(scenario.utility, clock_list)

    def smooth(z):
        vals, grads, curvs = evaluate(z[clock_idx])
        val = float(lin @ z) + float(w_clock @ vals)
        grad = lin.copy()
        grad[clock_idx] += w_clock * grads
        curv = np.zeros(nn)
        curv[clock_idx] = w_clock * curvs
        return val, grad, curv

    G, g, A, b, drop_nodes = _dual_constraints(scenario)
    A, b = reduce_equalities(A, b)
    reg = np.where(clock_mask, 0.0, 1e-10)

    z_ref = find_martingale_density(scenario)
    start = _strictly_feasible_start(scenario, z_ref)
    z0 = np.array([start[nid] for nid in tree.order])

    res = solve_barrier(smooth, z0, G, g, A=A, b=b, reg=reg, tol=tol, mu_cap=MU_CAP)

    xi = Deflator(xi={nid: float(res.z[idx[nid]]) for nid in tree.order})
    pair = income_functional(scenario, xi)
    y, Z, D, dec_info = multiplicative_decomposition(scenario, xi, reference=z_ref)
    return DualSolution(
        deflator=xi,
        value=res.value,
        pair=pair,
        y=y,
        Z=Z,
        D=D,
        info={
            "newton_steps": res.newton_steps,
            "mu": res.mu,
            "surrogate_gap": res.surrogate_gap,
            "decomposition": dec_info,
        },
    )


def multiplicative_decomposition(
    scenario: Scenario, xi: Deflator, reference: Deflator | None = None
):
    """Split a deflator into (root value, density, drop process).

    Along edges where the conditional deflator mass survives, the density
    picks up the conditional ratios and the drop process the supermartingale
    leakage; where the mass fully stops, the drop hits zero and the density
    continues with the reference martingale density (recorded in the info
    dict for reproducibility).
    """
    tree = scenario.tree
    y = xi.xi[tree.root]
    if y <= 0.0:
        raise DomainError("decomposition needs a strictly positive root value")
    if reference is None:
        reference = find_martingale_density(scenario)
    Z = {tree.root: 1.0}
    D = {tree.root: 1.0}
    filled: list[str] = []
    for nid in tree.order:
        kids = tree.children[nid]
        if not kids:
            continue
        mean = sum(tree.nodes[c].p * xi.xi[c] for c in kids)
        if xi.xi[nid] > 0.0 and mean > 0.0 and D[nid] > 0.0:
            for c in kids:
                Z[c] = Z[nid] * xi.xi[c] / mean
                D[c] = D[nid] * mean / xi.xi[nid]
        else:
            filled.append(nid)
            for c in kids:
                Z[c] = Z[nid] * reference.xi[c] / reference.xi[nid]
                D[c] = 0.0
    info = {"stopped_fill": "reference-density", "filled_below": filled}
    return y, Z, D, info


def extend_deflator(scenario: Scenario, yhat: dict[str, float], plan: PrimalPlan,
                    tol: float = 1e-7) -> Deflator:
    """Extend marginal utilities from clock nodes to a full deflator.

    Zero-clock nodes receive the stationarity values of the primal solve:
    the cumulated wealth multipliers divided by the path probability, which
    is exactly what the budget and holdings optimality conditions force.
    Raises ExtensionFailure when the assembled process misses the cone
    invariants, which signals a non-converged primal solve.
    """
    from .cones import deflator_residuals

    tree = scenario.tree
    lam_cum: dict[str, float] = {}
    for nid in reversed(tree.order):
        acc = plan.multipliers.get(nid, 0.0)
        for c in tree.children[nid]:
            acc += lam_cum[c]
        lam_cum[nid] = acc

    xi: dict[str, float] = {}
    mismatch = 0.0
    for nid in tree.order:
        stationary = lam_cum[nid] / tree.path_prob[nid]
        if nid in yhat:
            xi[nid] = float(yhat[nid])
            mismatch = max(
                mismatch, abs(stationary - xi[nid]) / (1.0 + abs(xi[nid]))
            )
        else:
            xi[nid] = stationary
    out = Deflator(xi=xi)
    resid = deflator_residuals(scenario, out)
    scale = 1.0 + max(abs(v) for v in xi.values())
    worst = max(max(resid.values()) / scale, mismatch)
    if worst > tol:
        raise ExtensionFailure(
            f"deflator extension residual {worst:.3e} exceeds {tol:.1e}"
        )
    return out


def solve_dual_at(scenario: Scenario, y: float, r: dict[int, float],
                  tol: float = 1e-9):
    """Minimize the conjugate functional over the (y, r) deflator slice.

    Exact at pairs produced by the composite dual; elsewhere it is an upper
    bound for the abstract dual value (the slice may be a strict subset of
    the full dual domain), which callers must treat as such.

    Returns (deflator, value).  Raises DomainError when the slice pins a
    clock-support coordinate to zero (conjugate blows up, the pair sits
    outside the effective domain) and InfeasibleProblem when the slice is
    empty, contradicting polar membership.
    """
    if y <= 0.0:
        raise DomainError(
            "dual slice needs y > 0; the conjugate is infinite along y = 0"
        )
    tree = scenario.tree
    idx = node_index(tree)
    nn = len(tree.order)
    clock = deterministic_clock(scenario)

    rows, kinds = cone_rows(scenario)
    eq_rows, eq_rhs = [], []
    ineq_rows = []  # rows in "slack >= 0" orientation
    for (coefs, rel, rhs), kind in zip(rows, kinds):
        if rel == EQ:
            eq_rows.append((coefs, rhs))
        else:
            ineq_rows.append([-v for v in coefs])
    root_row = [0.0] * nn
    root_row[idx[tree.root]] = 1.0
    eq_rows.append((root_row, float(y)))
    for t in clock.support:
        coefs = [0.0] * nn
        for nid in tree.nodes_at(t):
            coefs[idx[nid]] = (
                tree.path_prob[nid] * scenario.e[nid] * scenario.dkappa[nid]
            )
        eq_rows.append((coefs, float(r.get(t, 0.0)) * clock.dK[t]))
    nonneg_rows = []
    for nid in tree.order:
        coefs = [0.0] * nn
        coefs[idx[nid]] = 1.0
        nonneg_rows.append(coefs)
    ineq_all = nonneg_rows + ineq_rows

    feasible, z_face, active = _facial_interior(eq_rows, ineq_all, nn)
    if not feasible:
        raise InfeasibleProblem(
            "(y, r) slice is empty: pair is not polar-representable"
        )
    for j in active:
        if j < nn:
            nid = tree.order[j]
            if scenario.dkappa[nid] > 0.0:
                raise DomainError(
                    f"slice pins clock node {nid!r} to zero; pair outside the "
                    "effective dual domain"
                )

    eq_mat = [row for row, _ in eq_rows] + [ineq_all[j] for j in active]
    eq_vec = [rhs for _, rhs in eq_rows] + [0.0] * len(active)
    live = [j for j in range(len(ineq_all)) if j not in active]
    G = np.asarray([ineq_all[j] for j in live], dtype=float) if live \
        else np.zeros((0, nn))
    g = np.zeros(G.shape[0])
    A, b = reduce_equalities(
        np.asarray(eq_mat, dtype=float), np.asarray(eq_vec, dtype=float)
    )

    from .utility import conjugate_bundle

    omega = np.array(
        [tree.path_prob[nid] * scenario.dkappa[nid] for nid in tree.order]
    )
    clock_mask = omega > 0.0
    clock_idx = np.nonzero(clock_mask)[0]
    clock_list = [tree.order[j] for j in clock_idx]
    w_clock = omega[clock_idx]
    evaluate = conjugate_bundle(scenario.utility, clock_list)

    def smooth(z):
        vals, grads, curvs = evaluate(z[clock_idx])
        val = float(w_clock @ vals)
        grad = np.zeros(nn)
        grad[clock_idx] = w_clock * grads
        curv = np.zeros(nn)
        curv[clock_idx] = w_clock * curvs
        return val, grad, curv

    reg = np.where(clock_mask, 0.0, 1e-10)
    res = solve_barrier(smooth, z_face, G, g, A=A, b=b, reg=reg, tol=tol,
                        mu_cap=MU_CAP)
    xi = Deflator(xi={nid: float(res.z[idx[nid]]) for nid in tree.order})
    return xi, float(res.value)


def _facial_interior(eq_rows, ineq_rows, nn):
    """Feasible point of the slice interior after promoting implicit
    equalities: inequality rows whose slack cannot leave zero."""
    def max_slack(active):
        n = nn + 1
        rows = []
        for coefs, rhs in eq_rows:
            rows.append((list(coefs) + [0.0], EQ, rhs))
        for j in active:
            rows.append((list(ineq_rows[j]) + [0.0], EQ, 0.0))
        for j in range(len(ineq_rows)):
            if j not in active:
                rows.append((list(ineq_rows[j]) + [-1.0], GE, 0.0))
        out = solve_lp(LinearProgram(
            objective=[0.0] * nn + [1.0], rows=rows,
            bounds=[(None, None)] * nn + [(0.0, 1.0)]))
        return out

    active: set[int] = set()
    for _ in range(len(ineq_rows) + 1):
        out = max_slack(active)
        if not out.optimal:
            return False, None, active
        if out.value > FACE_TOL:
            return True, np.asarray(out.x[:nn], dtype=float), active
        # Promote rows individually stuck at zero.
        promoted = False
        for j in range(len(ineq_rows)):
            if j in active:
                continue
            probe_rows = [(list(c) + [0.0], EQ, rhs) for c, rhs in eq_rows]
            for k in active:
                probe_rows.append((list(ineq_rows[k]) + [0.0], EQ, 0.0))
            for k in range(len(ineq_rows)):
                if k not in active:
                    probe_rows.append((list(ineq_rows[k]) + [0.0], GE, 0.0))
            probe_obj = list(ineq_rows[j]) + [0.0]
            probe = solve_lp(LinearProgram(
                objective=probe_obj, rows=probe_rows,
                bounds=[(None, None)] * nn + [(0.0, 1.0)]))
            if probe.optimal and probe.value <= FACE_TOL:
                active.add(j)
                promoted = True
        if not promoted:
            # All remaining rows can individually leave zero but not jointly
            # above FACE_TOL; accept the max-slack point as the interior.
            return True, np.asarray(out.x[:nn], dtype=float), active
    return False, None, active
