"""Brute-force ground truth for small instances and finite differences.

The consumption grid is exhaustive while holdings feasibility is exact (an
LP per grid point, or a direct wealth check when there are no assets), so
the oracle is blind to solver internals: it can only undershoot the true
optimum, never overshoot it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridGuard
from .primal import admissibility_check, wealth_process
from .scenario import Scenario, as_income_profile, cumulative_income

MAX_CONSUMPTION_VARS = 4


@dataclass(frozen=True)
class GridSpec:
    points: int = 21          # grid resolution per consumption variable
    rounds: int = 2           # refinement rounds around the incumbent
    max_points: float = 1e7   # guard on total evaluations


def finite_difference(f, point: float, h: float) -> float:
    """Central difference (f(x+h) - f(x-h)) / 2h.

    Second-order accurate for equal step sizes on both sides; mismatched
    steps would degrade the estimate to first order.
    """
    return (f(point + h) - f(point - h)) / (2.0 * h)


def brute_force_primal(scenario: Scenario, x: float, q=None,
                       spec: GridSpec = GridSpec()) -> float:
    """Exhaustive consumption grid with exact financing checks."""
    qp = as_income_profile(q if q is not None else scenario.q)
    clock_nodes = scenario.clock_nodes()
    nv = len(clock_nodes)
    if nv > MAX_CONSUMPTION_VARS:
        raise GridGuard(
            f"{nv} consumption variables exceed the oracle limit of "
            f"{MAX_CONSUMPTION_VARS}"
        )
    total = (spec.rounds + 1) * spec.points**nv
    if total > spec.max_points:
        raise GridGuard(f"grid would evaluate {total:.3g} points")

    ubs = np.array([_upper_bound(scenario, x, qp, nid) for nid in clock_nodes])
    if np.any(ubs < 0.0):
        ubs = np.maximum(ubs, 0.0)

    lo = np.zeros(nv)
    hi = ubs.copy()
    best_val = -math.inf
    best_c = np.zeros(nv)
    for _ in range(spec.rounds + 1):
        axes = [np.linspace(lo[i], hi[i], spec.points) for i in range(nv)]
        val, c = _best_on_grid(scenario, x, qp, clock_nodes, axes)
        if val > best_val:
            best_val, best_c = val, c
        spacing = (hi - lo) / (spec.points - 1)
        lo = np.maximum(best_c - spacing, 0.0)
        hi = np.minimum(best_c + spacing, ubs)
    return best_val


def _upper_bound(scenario: Scenario, x: float, qp, nid: str) -> float:
    """Largest feasible consumption at one node with zero elsewhere."""
    tree = scenario.tree
    region = scenario.region()
    cum = cumulative_income(scenario, qp)
    dk = scenario.dkappa[nid]
    if scenario.assets == 0:
        caps = [
            (x + cum[m]) / dk
            for m in tree.descendants(nid)
            if m in region
        ]
        return max(min(caps), 0.0) if caps else 0.0
    # LP: maximize consumption at this node, zero elsewhere, wealth financed.
    from .lp import GE, LinearProgram, solve_lp
    from .primal import _path_gain_coefs, holdings_vars

    hv = holdings_vars(scenario)
    hidx = {key: 1 + k for k, key in enumerate(hv)}
    rows = []
    for m in tree.order:
        if m not in region:
            continue
        coefs = [0.0] * (1 + len(hv))
        if nid in tree.path_to(m):
            coefs[0] = -dk
        for k, val in _path_gain_coefs(scenario, m, hidx):
            coefs[k] += val
        rows.append((coefs, GE, -(x + cum[m])))
    out = solve_lp(LinearProgram(
        objective=[1.0] + [0.0] * len(hv),
        rows=rows,
        bounds=[(0.0, None)] + [(None, None)] * len(hv),
    ))
    if out.status == "unbounded":  # cannot happen without arbitrage
        return 1e6
    if not out.optimal:
        return 0.0
    return float(out.value)


def _utility_on_grid(scenario: Scenario, nid: str, arr: np.ndarray) -> np.ndarray:
    util = scenario.utility
    w = util.weight(nid)
    with np.errstate(divide="ignore"):
        if util.family == "log":
            return w * np.log(arr)
        R = util.rra
        if R < 1.0:
            return w * arr ** (1.0 - R) / (1.0 - R)
        out = np.full_like(arr, -np.inf)
        pos = arr > 0.0
        out[pos] = w * arr[pos] ** (1.0 - R) / (1.0 - R)
        return out


def _best_on_grid(scenario: Scenario, x: float, qp, clock_nodes, axes):
    tree = scenario.tree
    nv = len(clock_nodes)
    mesh = np.meshgrid(*axes, indexing="ij") if nv else []
    cols = [m.reshape(-1) for m in mesh]
    npts = cols[0].size if cols else 1
    weights = [tree.path_prob[nid] * scenario.dkappa[nid] for nid in clock_nodes]
    values = np.zeros(npts)
    for i, nid in enumerate(clock_nodes):
        values += weights[i] * _utility_on_grid(scenario, nid, cols[i])

    if scenario.assets == 0:
        region = scenario.region()
        cum = cumulative_income(scenario, qp)
        feasible = np.ones(npts, dtype=bool)
        for m in tree.order:
            if m not in region:
                continue
            wealth = np.full(npts, x + cum[m])
            path = set(tree.path_to(m))
            for i, nid in enumerate(clock_nodes):
                if nid in path:
                    wealth -= scenario.dkappa[nid] * cols[i]
            feasible &= wealth >= -1e-9
        values = np.where(feasible, values, -np.inf)
        j = int(np.argmax(values))
        return float(values[j]), np.array([cols[i][j] for i in range(nv)])

    # With assets: LP feasibility per point, best-first to prune -inf tails.
    order = np.argsort(-values)
    for j in order:
        if not math.isfinite(values[j]):
            break
        c = {nid: float(cols[i][j]) for i, nid in enumerate(clock_nodes)}
        if admissibility_check(scenario, x, qp, c).admissible:
            return float(values[j]), np.array([cols[i][j] for i in range(nv)])
    return -math.inf, np.zeros(nv)
