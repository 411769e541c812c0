"""Problem instances: market data, stochastic clock, income, stopping region.

A Scenario bundles an event tree with asset prices S, an income rate e,
nonnegative clock increments (one per node, zero at the root), the stopping
region from which no-borrowing binds, the clock bound, and the utility
field.  ``validate`` reports every semantic condition instead of raising, so
the CLI can surface all failures at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .tree import EventTree, StoppingRegion, build_tree, constrained_region
from .utility import UtilityField


@dataclass(frozen=True)
class IncomeProfile:
    """Deterministic units of income rate held, by time index t >= 1.

    Values at times carrying no clock mass are ignored everywhere (profiles
    equal on the clock support are interchangeable).  ``default`` fills
    times absent from the map, so a constant profile is
    ``IncomeProfile({}, default=value)``.
    """

    q: dict[int, float]
    default: float = 0.0

    def at(self, t: int) -> float:
        return float(self.q.get(t, self.default))


def as_income_profile(q) -> IncomeProfile:
    if isinstance(q, IncomeProfile):
        return q
    if isinstance(q, dict):
        return IncomeProfile({int(t): float(v) for t, v in q.items()})
    return IncomeProfile({}, default=float(q))


@dataclass(frozen=True)
class ClockProfile:
    """Deterministic clock increments by time, plus their support set."""

    dK: dict[int, float]
    support: tuple[int, ...]

    def total(self) -> float:
        return sum(self.dK.values())


@dataclass(frozen=True)
class Scenario:
    tree: EventTree
    assets: int
    S: dict[str, tuple[float, ...]]
    e: dict[str, float]
    dkappa: dict[str, float]
    theta0: StoppingRegion
    clock_bound: float
    utility: UtilityField
    q: IncomeProfile = field(default_factory=lambda: IncomeProfile({}))
    name: str = ""

    def with_q(self, q) -> "Scenario":
        return replace(self, q=as_income_profile(q))

    def region(self) -> set[str]:
        return constrained_region(self.tree, self.theta0)

    def clock_nodes(self) -> list[str]:
        return [nid for nid in self.tree.order if self.dkappa[nid] > 0.0]

    def price_delta(self, nid: str) -> tuple[float, ...]:
        """S(n) - S(parent(n)) componentwise; zeros at the root."""
        par = self.tree.parent(nid)
        if par is None:
            return (0.0,) * self.assets
        return tuple(a - b for a, b in zip(self.S[nid], self.S[par]))


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[tuple[str, bool, str], ...]

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def failures(self) -> list[str]:
        return [f"{name}: {detail}" for name, passed, detail in self.checks if not passed]


def deterministic_clock(scenario: Scenario) -> ClockProfile:
    """Expected clock increment per time: dK_t = sum over t-nodes of P * dkappa."""
    tree = scenario.tree
    dK = {t: 0.0 for t in range(tree.horizon + 1)}
    for nid in tree.order:
        dK[tree.time(nid)] += tree.path_prob[nid] * scenario.dkappa[nid]
    support = tuple(t for t in sorted(dK) if dK[t] > 0.0)
    return ClockProfile(dK={t: dK[t] for t in sorted(dK)}, support=support)


def validate(scenario: Scenario) -> ValidationReport:
    """Check every structural condition; never raises for semantic failures."""
    tree = scenario.tree
    checks: list[tuple[str, bool, str]] = []

    root_mass = scenario.dkappa[tree.root]
    checks.append(
        ("clock starts at zero", root_mass == 0.0,
         "" if root_mass == 0.0 else f"root clock increment is {root_mass}, so kappa_0 = 0 violated")
    )

    neg = [nid for nid in tree.order if scenario.dkappa[nid] < 0.0]
    checks.append(("clock increments nonnegative", not neg, f"negative at {neg}" if neg else ""))

    worst = 0.0
    for leaf in tree.leaves:
        worst = max(worst, sum(scenario.dkappa[nid] for nid in tree.path_to(leaf)))
    ok_bound = worst <= scenario.clock_bound + 1e-12
    checks.append(
        ("clock bounded along paths", ok_bound,
         "" if ok_bound else f"path clock total {worst:.12g} exceeds bound {scenario.clock_bound}")
    )

    clock = deterministic_clock(scenario)
    checks.append(
        ("clock has positive total mass", clock.total() > 0.0,
         "" if clock.total() > 0.0 else "no time carries clock mass")
    )

    density_ok, detail = True, ""
    bounds = {}
    for t in clock.support:
        ratios = [scenario.dkappa[nid] / clock.dK[t] for nid in tree.nodes_at(t)]
        lo, hi = min(ratios), max(ratios)
        bounds[t] = (lo, hi)
        if lo <= 0.0:
            density_ok = False
            detail = f"time {t}: clock density hits zero while dK_t > 0"
            break
    checks.append(
        ("clock density bounded away from 0 and infinity", density_ok,
         detail if not density_ok else f"per-time (min,max) ratios: {bounds}")
    )

    try:
        scenario.theta0.validate(tree)
        checks.append(("stopping region valid", True, ""))
    except Exception as exc:  # MalformedTree carries the reason
        checks.append(("stopping region valid", False, str(exc)))

    bad_dim = [nid for nid in tree.order if len(scenario.S[nid]) != scenario.assets]
    checks.append(
        ("price dimensionality", not bad_dim,
         f"nodes with wrong S length: {bad_dim}" if bad_dim else "")
    )

    return ValidationReport(checks=tuple(checks))


def dK_pairing(q, r: dict[int, float], clock: ClockProfile) -> float:
    """Bilinear pairing sum_t q_t r_t dK_t over the clock support."""
    qp = as_income_profile(q)
    return sum(qp.at(t) * float(r.get(t, 0.0)) * clock.dK[t] for t in clock.support)


def cumulative_income(scenario: Scenario, q) -> dict[str, float]:
    """Node-by-node cumulative income process sum_{m <= n} q_t(m) e(m) dkappa(m)."""
    qp = as_income_profile(q)
    tree = scenario.tree
    out: dict[str, float] = {}
    for nid in tree.order:
        par = tree.parent(nid)
        inc = qp.at(tree.time(nid)) * scenario.e[nid] * scenario.dkappa[nid]
        out[nid] = inc if par is None else out[par] + inc
    return out


# ---------------------------------------------------------------------------
# Canonical fixtures


def fix_bin1(theta0: str = "root") -> Scenario:
    """One-period binomial: S moves 1 -> {2, 0.5} with p = 1/2 each, unit
    clock mass at both leaves, no income."""
    tree = build_tree([("root", None, 1.0), ("u", "root", 0.5), ("d", "root", 0.5)])
    stops = frozenset({"root"}) if theta0 == "root" else frozenset({"u", "d"})
    return Scenario(
        tree=tree,
        assets=1,
        S={"root": (1.0,), "u": (2.0,), "d": (0.5,)},
        e={"root": 0.0, "u": 0.0, "d": 0.0},
        dkappa={"root": 0.0, "u": 1.0, "d": 1.0},
        theta0=StoppingRegion(stops),
        clock_bound=1.0,
        utility=UtilityField(family="log"),
        q=IncomeProfile({}),
        name="FIX-BIN1",
    )


def fix_det2(theta0: str = "root") -> Scenario:
    """Deterministic three-date path, no assets, unit clock mass at t=1,2,
    one unit of income rate at t=2 only.  Utility 2*sqrt(x)."""
    tree = build_tree([("t0", None, 1.0), ("t1", "t0", 1.0), ("t2", "t1", 1.0)])
    stops = frozenset({"t0"}) if theta0 == "root" else frozenset({"t2"})
    return Scenario(
        tree=tree,
        assets=0,
        S={"t0": (), "t1": (), "t2": ()},
        e={"t0": 0.0, "t1": 0.0, "t2": 1.0},
        dkappa={"t0": 0.0, "t1": 1.0, "t2": 1.0},
        theta0=StoppingRegion(stops),
        clock_bound=2.0,
        utility=UtilityField(family="power", rra=0.5),
        q=IncomeProfile({1: 1.0, 2: 1.0}),
        name="FIX-DET2",
    )


def fix_trinomial() -> Scenario:
    """One-period trinomial S in {2, 1, 0.5} from 1, p = 1/3 each; the
    smallest genuinely incomplete market."""
    tree = build_tree(
        [("root", None, 1.0), ("a", "root", 1 / 3), ("b", "root", 1 / 3), ("c", "root", 1 / 3)]
    )
    return Scenario(
        tree=tree,
        assets=1,
        S={"root": (1.0,), "a": (2.0,), "b": (1.0,), "c": (0.5,)},
        e={"root": 0.0, "a": 1.0, "b": 0.5, "c": 0.0},
        dkappa={"root": 0.0, "a": 1.0, "b": 1.0, "c": 1.0},
        theta0=StoppingRegion(frozenset({"root"})),
        clock_bound=1.0,
        utility=UtilityField(family="log"),
        q=IncomeProfile({}),
        name="FIX-TRI1",
    )


def fix_bin2_terminal() -> Scenario:
    """Depth-2 binomial, no assets, clock mass only at the four leaves;
    four consumption variables for the brute-force oracle."""
    tree = build_tree(
        [
            ("r", None, 1.0),
            ("u", "r", 0.5), ("d", "r", 0.5),
            ("uu", "u", 0.5), ("ud", "u", 0.5),
            ("du", "d", 0.5), ("dd", "d", 0.5),
        ]
    )
    e = {"r": 0.0, "u": 0.0, "d": 0.0, "uu": 1.0, "ud": 0.5, "du": 0.5, "dd": 0.0}
    dk = {"r": 0.0, "u": 0.0, "d": 0.0, "uu": 1.0, "ud": 1.0, "du": 1.0, "dd": 1.0}
    return Scenario(
        tree=tree,
        assets=0,
        S={nid: () for nid in tree.order},
        e=e,
        dkappa=dk,
        theta0=StoppingRegion(frozenset({"r"})),
        clock_bound=1.0,
        utility=UtilityField(family="log"),
        q=IncomeProfile({2: 1.0}),
        name="FIX-BIN2T",
    )
