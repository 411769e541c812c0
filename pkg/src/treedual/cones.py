"""Polyhedral cone geometry: deflators, income functionals, memberships.

The deflator cone consists of nonnegative processes xi that price every
asset neutrally (conditional expectation of xi * price-increment vanishes),
are conditional supermartingales, and keep the martingale property strictly
before the stopping region (drops are only legal on edges leaving
constrained nodes).  Deflators are stored as the product process directly;
the multiplicative split into a density and a drop process lives in the
dual module.

Membership oracles for the primal cone (initial wealth, income profile)
and its polar (price of wealth, income price density) are exact linear
programs on finite trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoArbitrageViolation
from .lp import EQ, GE, LE, LinearProgram, solve_lp
from .scenario import Scenario, as_income_profile, deterministic_clock
from .tree import EventTree

MEMBER_TOL = 1e-9


@dataclass(frozen=True)
class Deflator:
    """Nonnegative adapted process in the deflator cone."""

    xi: dict[str, float]

    def __getitem__(self, nid: str) -> float:
        return self.xi[nid]

    def root_value(self, tree: EventTree) -> float:
        return self.xi[tree.root]


@dataclass(frozen=True)
class DualPair:
    """(y, r): marginal price of wealth and income price density by date."""

    y: float
    r: dict[int, float]


@dataclass(frozen=True)
class Membership:
    member: bool
    certificate: object = None


# ---------------------------------------------------------------------------
# Cone constraint assembly


def node_index(tree: EventTree) -> dict[str, int]:
    return {nid: i for i, nid in enumerate(tree.order)}


def cone_rows(scenario: Scenario, martingale_everywhere: bool = False):
    """Linear rows defining the deflator cone over xi variables.

    Returns (rows, kinds) where each row is an lp-style triple over the
    node-indexed xi vector and kinds tags the originating node for the
    supermartingale rows ('' for neutrality rows).
    """
    tree = scenario.tree
    idx = node_index(tree)
    region = scenario.region()
    rows: list[tuple[list[float], str, float]] = []
    kinds: list[str] = []
    nn = len(tree.order)
    for nid in tree.order:
        kids = tree.children[nid]
        if not kids:
            continue
        for i in range(scenario.assets):
            coefs = [0.0] * nn
            for c in kids:
                coefs[idx[c]] = tree.nodes[c].p * scenario.price_delta(c)[i]
            rows.append((coefs, EQ, 0.0))
            kinds.append("")
        coefs = [0.0] * nn
        for c in kids:
            coefs[idx[c]] = tree.nodes[c].p
        coefs[idx[nid]] = -1.0
        drop_legal = (nid in region) and not martingale_everywhere
        rows.append((coefs, LE if drop_legal else EQ, 0.0))
        kinds.append(nid)
    return rows, kinds


def slice_bounds(scenario: Scenario, y: float):
    """Box 0 <= xi(n) <= y / P(n) valid on the xi(root) = y slice.

    The supermartingale recursion gives P(n) xi(n) <= xi(root), so the box
    is implied; imposing it keeps every slice LP visibly compact.
    """
    tree = scenario.tree
    return [(0.0, y / tree.path_prob[nid]) for nid in tree.order]


def deflator_residuals(scenario: Scenario, deflator: Deflator) -> dict[str, float]:
    """Max violation of each cone constraint family; all ~0 for members."""
    tree = scenario.tree
    region = scenario.region()
    neg = max((-deflator.xi[nid] for nid in tree.order), default=0.0)
    neutrality = 0.0
    supermart = 0.0
    mart_before = 0.0
    for nid in tree.order:
        kids = tree.children[nid]
        if not kids:
            continue
        for i in range(scenario.assets):
            resid = sum(
                tree.nodes[c].p * deflator.xi[c] * scenario.price_delta(c)[i]
                for c in kids
            )
            neutrality = max(neutrality, abs(resid))
        mean = sum(tree.nodes[c].p * deflator.xi[c] for c in kids)
        slack = deflator.xi[nid] - mean
        supermart = max(supermart, -slack)
        if nid not in region:
            mart_before = max(mart_before, abs(slack))
    return {
        "nonnegativity": max(neg, 0.0),
        "neutrality": neutrality,
        "supermartingale": max(supermart, 0.0),
        "martingale_before_stop": mart_before,
    }


# ---------------------------------------------------------------------------
# Operations


def find_martingale_density(scenario: Scenario) -> Deflator:
    """Strictly positive martingale density via a max-min LP.

    Maximizes the minimum node value of xi subject to xi(root) = 1,
    neutrality, and the supermartingale constraint holding with equality
    everywhere.  Raises NoArbitrageViolation (with the LP evidence) when
    the best attainable minimum is not strictly positive.
    """
    tree = scenario.tree
    nn = len(tree.order)
    idx = node_index(tree)
    rows, _ = cone_rows(scenario, martingale_everywhere=True)
    rows = [(coefs + [0.0], rel, rhs) for coefs, rel, rhs in rows]
    root_row = [0.0] * (nn + 1)
    root_row[idx[tree.root]] = 1.0
    rows.append((root_row, EQ, 1.0))
    for nid in tree.order:  # xi(n) - m >= 0
        coefs = [0.0] * (nn + 1)
        coefs[idx[nid]] = 1.0
        coefs[nn] = -1.0
        rows.append((coefs, GE, 0.0))
    objective = [0.0] * nn + [1.0]
    lp = LinearProgram(
        objective=objective,
        rows=rows,
        bounds=[(None, None)] * (nn + 1),
        sense="max",
    )
    out = solve_lp(lp)
    if not out.optimal or out.value <= MEMBER_TOL:
        cert = {
            "min_xi": None if not out.optimal else out.value,
            "xi": None if not out.optimal else
                 {nid: float(out.x[idx[nid]]) for nid in tree.order},
            "row_duals": None if not out.optimal else
                         [float(v) for v in out.duals],
        }
        raise NoArbitrageViolation(
            "no strictly positive martingale density exists", certificate=cert
        )
    return Deflator(xi={nid: float(out.x[idx[nid]]) for nid in tree.order})


def income_functional(scenario: Scenario, deflator: Deflator) -> DualPair:
    """Induced pair: y at the root, income price density r on the support.

    r_t integrates the deflated income rate against the clock at each date,
    normalized by the deterministic clock increment.
    """
    tree = scenario.tree
    clock = deterministic_clock(scenario)
    r: dict[int, float] = {}
    for t in clock.support:
        num = sum(
            tree.path_prob[nid] * deflator.xi[nid] * scenario.e[nid]
            * scenario.dkappa[nid]
            for nid in tree.nodes_at(t)
        )
        r[t] = num / clock.dK[t]
    return DualPair(y=deflator.xi[tree.root], r=r)


def _income_weight(scenario: Scenario, nid: str) -> float:
    return (
        scenario.tree.path_prob[nid] * scenario.e[nid] * scenario.dkappa[nid]
    )


def superreplication_price(scenario: Scenario, q) -> float:
    """Minimal initial wealth financing the income profile q.

    Computed as the max over normalized deflators of the negated deflated
    income value; the primal cone is exactly {x >= price(q)}.
    """
    qp = as_income_profile(q)
    out = _superreplication_lp(scenario, qp)
    return float(out.value)


def _superreplication_lp(scenario: Scenario, qp):
    tree = scenario.tree
    idx = node_index(tree)
    nn = len(tree.order)
    rows, _ = cone_rows(scenario)
    root_row = [0.0] * nn
    root_row[idx[tree.root]] = 1.0
    rows.append((root_row, EQ, 1.0))
    objective = [0.0] * nn
    for nid in tree.order:
        objective[idx[nid]] = -qp.at(tree.time(nid)) * _income_weight(scenario, nid)
    lp = LinearProgram(
        objective=objective,
        rows=rows,
        bounds=slice_bounds(scenario, 1.0),
        sense="max",
    )
    out = solve_lp(lp)
    if not out.optimal:
        raise NoArbitrageViolation(
            "superreplication slice is empty; scenario admits no deflator"
        )
    return out


def financing_strategy(scenario: Scenario, x: float, q) -> dict | None:
    """A holdings plan keeping wealth nonnegative on the constrained region
    with zero consumption, or None if none exists."""
    qp = as_income_profile(q)
    tree = scenario.tree
    region = scenario.region()
    hvars = [(nid, i) for nid in tree.order if tree.children[nid]
             for i in range(scenario.assets)]
    hidx = {key: k for k, key in enumerate(hvars)}
    rows = []
    from .scenario import cumulative_income

    cum = cumulative_income(scenario, qp)
    for nid in tree.order:
        if nid not in region:
            continue
        coefs = [0.0] * len(hvars)
        path = tree.path_to(nid)
        for a, bnode in zip(path, path[1:]):
            delta = scenario.price_delta(bnode)
            for i in range(scenario.assets):
                coefs[hidx[(a, i)]] += delta[i]
        rows.append((coefs, GE, -(x + cum[nid])))
    lp = LinearProgram(
        objective=[0.0] * len(hvars),
        rows=rows,
        bounds=[(None, None)] * len(hvars),
        sense="max",
    )
    out = solve_lp(lp)
    if not out.optimal:
        return None
    return {key: float(out.x[hidx[key]]) for key in hvars}


def k_membership(scenario: Scenario, x: float, q) -> Membership:
    """Does initial wealth x finance income profile q?

    Member iff x >= superreplication price - tol.  The certificate is a
    financing strategy when member, else the separating deflator achieving
    the price.
    """
    qp = as_income_profile(q)
    out = _superreplication_lp(scenario, qp)
    price = float(out.value)
    tree = scenario.tree
    idx = node_index(tree)
    if x >= price - MEMBER_TOL:
        strategy = financing_strategy(scenario, x, qp)
        return Membership(member=True, certificate={"strategy": strategy, "price": price})
    xi = Deflator(xi={nid: float(out.x[idx[nid]]) for nid in tree.order})
    return Membership(member=False, certificate={"deflator": xi, "price": price})


def l_membership(scenario: Scenario, y: float, r: dict[int, float]) -> Membership:
    """Is (y, r) in the polar cone?

    For y > 0 this is exact representability: some deflator with root value
    y induces r on the clock support.  For y = 0 only r = 0 (on the
    support) qualifies; negative y never does.  Non-membership certificates
    are primal pairs violating the polar inequality, read off the Farkas
    multipliers of the representability system.
    """
    clock = deterministic_clock(scenario)
    if y < 0.0:
        return Membership(member=False, certificate={"x": 1.0, "q": {}})
    if y == 0.0:
        off = {t: r.get(t, 0.0) for t in clock.support if abs(r.get(t, 0.0)) > MEMBER_TOL}
        if not off:
            return Membership(
                member=True,
                certificate=Deflator(xi={nid: 0.0 for nid in scenario.tree.order}),
            )
        t0, rt0 = next(iter(off.items()))
        q = {t: 0.0 for t in clock.support}
        q[t0] = -1.0 if rt0 > 0 else 1.0
        x = superreplication_price(scenario, q)
        return Membership(member=False, certificate={"x": x, "q": q})

    tree = scenario.tree
    idx = node_index(tree)
    nn = len(tree.order)
    rows, _ = cone_rows(scenario)
    n_cone = len(rows)
    root_row = [0.0] * nn
    root_row[idx[tree.root]] = 1.0
    rows.append((root_row, EQ, float(y)))
    support = list(clock.support)
    for t in support:
        coefs = [0.0] * nn
        for nid in tree.nodes_at(t):
            coefs[idx[nid]] = _income_weight(scenario, nid)
        rows.append((coefs, EQ, float(r.get(t, 0.0)) * clock.dK[t]))
    lp = LinearProgram(
        objective=[0.0] * nn,
        rows=rows,
        bounds=slice_bounds(scenario, float(y)),
        sense="max",
    )
    out = solve_lp(lp)
    if out.optimal:
        xi = Deflator(xi={nid: float(out.x[idx[nid]]) for nid in tree.order})
        return Membership(member=True, certificate=xi)

    lam = out.farkas
    x_cert = float(lam[n_cone])
    q_cert = {t: float(lam[n_cone + 1 + j]) for j, t in enumerate(support)}
    pairing = x_cert * y + sum(q_cert[t] * float(r.get(t, 0.0)) * clock.dK[t]
                               for t in support)
    if pairing > 0.0:
        x_cert = -x_cert
        q_cert = {t: -v for t, v in q_cert.items()}
    return Membership(member=False, certificate={"x": x_cert, "q": q_cert})


def dual_membership(scenario: Scenario, Y, y: float, r: dict[int, float]) -> bool:
    """Exact polar test of a candidate dual process against (y, r).

    Maximizes deflated-consumption value minus the pairing over admissible
    plans on the unit box |x| <= 1, |q_t| <= 1; positive homogeneity makes
    the bounded slice decisive, so membership is optimum <= tol.
    """
    tree = scenario.tree
    region = scenario.region()
    clock = deterministic_clock(scenario)
    yproc = Y.xi if isinstance(Y, Deflator) else dict(Y)
    if min(yproc.values()) < -MEMBER_TOL:
        raise ValueError("candidate dual process must be nonnegative")

    support = list(clock.support)
    clock_nodes = scenario.clock_nodes()
    hvars = [(nid, i) for nid in tree.order if tree.children[nid]
             for i in range(scenario.assets)]
    # Layout: [x, q_t..., c_n..., H...]
    n_q = len(support)
    n_c = len(clock_nodes)
    n = 1 + n_q + n_c + len(hvars)
    qpos = {t: 1 + j for j, t in enumerate(support)}
    cpos = {nid: 1 + n_q + j for j, nid in enumerate(clock_nodes)}
    hpos = {key: 1 + n_q + n_c + k for k, key in enumerate(hvars)}

    objective = [0.0] * n
    objective[0] = -float(y)
    for t in support:
        objective[qpos[t]] = -float(r.get(t, 0.0)) * clock.dK[t]
    for nid in clock_nodes:
        objective[cpos[nid]] = (
            tree.path_prob[nid] * yproc[nid] * scenario.dkappa[nid]
        )

    rows = []
    for nid in tree.order:
        if nid not in region:
            continue
        coefs = [0.0] * n
        coefs[0] = 1.0
        path = tree.path_to(nid)
        for m in path:
            t = tree.time(m)
            w = scenario.e[m] * scenario.dkappa[m]
            if w != 0.0 and t in qpos:
                coefs[qpos[t]] += w
            if m in cpos:
                coefs[cpos[m]] -= scenario.dkappa[m]
        for a, bnode in zip(path, path[1:]):
            delta = scenario.price_delta(bnode)
            for i in range(scenario.assets):
                coefs[hpos[(a, i)]] += delta[i]
        rows.append((coefs, GE, 0.0))

    bounds = [(-1.0, 1.0)] * (1 + n_q) + [(0.0, None)] * n_c \
        + [(None, None)] * len(hvars)
    out = solve_lp(LinearProgram(objective=objective, rows=rows, bounds=bounds))
    if not out.optimal:
        raise NoArbitrageViolation("polar test LP unbounded; scenario admits arbitrage")
    return out.value <= MEMBER_TOL


def reduce_equalities(A: np.ndarray, b: np.ndarray):
    """Maximal independent subset of consistent equality rows (Gram-Schmidt)."""
    if A.shape[0] == 0:
        return A, b
    kept: list[int] = []
    basis: list[np.ndarray] = []
    for i in range(A.shape[0]):
        row = A[i].astype(float)
        resid = row.copy()
        for q_vec in basis:
            resid -= (resid @ q_vec) * q_vec
        norm = np.linalg.norm(resid)
        if norm > 1e-11 * (1.0 + np.linalg.norm(row)):
            basis.append(resid / norm)
            kept.append(i)
    return A[kept], b[kept]


def enumerate_slice_vertices(scenario: Scenario, max_nodes: int = 9) -> list[Deflator]:
    """All vertices of the normalized deflator slice {xi(root) = 1}.

    Brute-force active-set enumeration; intended for tiny trees where the
    vertex list doubles as an independent oracle for superreplication
    prices and polar membership.
    """
    import itertools

    tree = scenario.tree
    nn = len(tree.order)
    if nn > max_nodes:
        raise ValueError(f"vertex enumeration limited to {max_nodes} nodes")
    idx = node_index(tree)
    rows, _ = cone_rows(scenario)
    eqs: list[tuple[list[float], float]] = []
    ineqs: list[tuple[list[float], float]] = []  # a.xi <= rhs orientation
    for coefs, rel, rhs in rows:
        if rel == EQ:
            eqs.append((coefs, rhs))
        else:
            ineqs.append((coefs, rhs))
    root_row = [0.0] * nn
    root_row[idx[tree.root]] = 1.0
    eqs.append((root_row, 1.0))
    eq_mat, eq_rhs = reduce_equalities(
        np.array([c for c, _ in eqs], dtype=float),
        np.array([r for _, r in eqs], dtype=float),
    )
    eqs = [(list(eq_mat[i]), float(eq_rhs[i])) for i in range(eq_mat.shape[0])]
    for j, nid in enumerate(tree.order):
        low = [0.0] * nn
        low[j] = -1.0
        ineqs.append((low, 0.0))  # -xi <= 0
        up = [0.0] * nn
        up[j] = 1.0
        ineqs.append((up, 1.0 / tree.path_prob[nid]))

    n_free = nn - len(eqs)
    seen = {}
    if n_free < 0:
        return []
    for combo in itertools.combinations(range(len(ineqs)), n_free):
        M = np.array([c for c, _ in eqs] + [ineqs[j][0] for j in combo])
        v = np.array([r for _, r in eqs] + [ineqs[j][1] for j in combo])
        if M.shape[0] != nn:
            continue
        try:
            xi = np.linalg.solve(M, v)
        except np.linalg.LinAlgError:
            continue
        ok = all(
            float(np.dot(a, xi)) <= rhs + 1e-9 for a, rhs in ineqs
        )
        if ok:
            key = tuple(np.round(xi, 9))
            seen[key] = xi
    return [
        Deflator(xi={nid: float(x[idx[nid]]) for nid in tree.order})
        for x in seen.values()
    ]


def sample_deflator(scenario: Scenario, rng, y: float = 1.0) -> Deflator:
    """Random vertex of the normalized deflator slice (LP with random cost)."""
    tree = scenario.tree
    idx = node_index(tree)
    nn = len(tree.order)
    rows, _ = cone_rows(scenario)
    root_row = [0.0] * nn
    root_row[idx[tree.root]] = 1.0
    rows.append((root_row, EQ, float(y)))
    objective = [float(rng.uniform(-1.0, 1.0)) for _ in range(nn)]
    out = solve_lp(
        LinearProgram(
            objective=objective,
            rows=rows,
            bounds=slice_bounds(scenario, float(y)),
        )
    )
    if not out.optimal:
        raise NoArbitrageViolation("deflator slice is empty")
    return Deflator(xi={nid: float(out.x[idx[nid]]) for nid in tree.order})
