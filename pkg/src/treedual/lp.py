"""Dense two-phase simplex kernel.

Small, deterministic, and certificate-producing: every outcome carries the
evidence downstream cone oracles need (optimal point + row duals, Farkas
multipliers on infeasibility, an improving ray on unboundedness).  Bland's
rule is used for both pivot choices, so the method cannot cycle; problem
sizes here are tiny and robustness beats speed.

Rows are scaled to unit infinity-norm before solving; the 1e-9 feasibility
tolerance applies after scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10
EVICT_TOL = 1e-8
MAX_ITER = 50_000

LE, EQ, GE = "<=", "=", ">="


@dataclass
class LinearProgram:
    objective: list[float]
    rows: list[tuple[list[float], str, float]] = field(default_factory=list)
    bounds: list[tuple[float | None, float | None]] | None = None  # default (0, inf)
    sense: str = "max"

    def n(self) -> int:
        return len(self.objective)


@dataclass
class LpOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None
    duals: np.ndarray | None = None    # per user row, optimal only
    farkas: np.ndarray | None = None   # per user row, infeasible only
    ray: np.ndarray | None = None      # user-space improving direction

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve_lp(lp: LinearProgram) -> LpOutcome:
    n = lp.n()
    sense = 1.0 if lp.sense == "min" else -1.0
    c_user = sense * np.asarray(lp.objective, dtype=float)
    bounds = lp.bounds if lp.bounds is not None else [(0.0, None)] * n
    if len(bounds) != n:
        raise ValueError("bounds length does not match objective length")
    for coefs, rel, _ in lp.rows:
        if len(coefs) != n:
            raise ValueError("row length does not match objective length")
        if rel not in (LE, EQ, GE):
            raise ValueError(f"unknown relation {rel!r}")

    # Variable transform x_j = shift_j + sum_k sgn * z_k with z >= 0.
    shift = np.zeros(n)
    terms: list[list[tuple[int, float]]] = []
    bound_rows: list[tuple[int, float]] = []  # (z index, upper bound)
    nz = 0
    for j, (lo, hi) in enumerate(bounds):
        if lo is not None:
            shift[j] = lo
            terms.append([(nz, 1.0)])
            if hi is not None:
                bound_rows.append((nz, float(hi) - float(lo)))
            nz += 1
        elif hi is not None:
            shift[j] = hi
            terms.append([(nz, -1.0)])
            nz += 1
        else:
            terms.append([(nz, 1.0), (nz + 1, -1.0)])
            nz += 2

    def to_z_row(coefs) -> np.ndarray:
        out = np.zeros(nz)
        for j, a in enumerate(coefs):
            if a != 0.0:
                for k, sgn in terms[j]:
                    out[k] += a * sgn
        return out

    m_user = len(lp.rows)
    scales = np.ones(m_user)
    z_rows: list[np.ndarray] = []
    rels: list[str] = []
    rhs: list[float] = []
    for i, (coefs, rel, b) in enumerate(lp.rows):
        arr = np.asarray(coefs, dtype=float)
        s = float(np.max(np.abs(arr))) if arr.size and np.max(np.abs(arr)) > 0 else 1.0
        scales[i] = s
        z_rows.append(to_z_row(arr / s))
        rels.append(rel)
        rhs.append((float(b) - float(arr @ shift)) / s)
    for k, ub in bound_rows:
        row = np.zeros(nz)
        row[k] = 1.0
        z_rows.append(row)
        rels.append(LE)
        rhs.append(ub)

    m = len(z_rows)
    if m == 0:
        cz = to_z_row(c_user)
        neg = cz < -PIVOT_TOL
        if np.any(neg):
            return LpOutcome("unbounded", ray=_z_to_x(neg.astype(float), terms, n))
        x = shift.copy()
        return LpOutcome("optimal", x=x, value=float(np.asarray(lp.objective) @ x),
                         duals=np.zeros(0))

    A = np.vstack(z_rows) if nz else np.zeros((m, 0))
    b = np.asarray(rhs, dtype=float)
    flip = np.ones(m)
    for i in range(m):
        if b[i] < 0.0:
            A[i] *= -1.0
            b[i] *= -1.0
            flip[i] = -1.0
            rels[i] = {LE: GE, GE: LE, EQ: EQ}[rels[i]]

    # Slack/surplus columns, then artificials for rows lacking a basic slack.
    cols = [A]
    slack_of_row = [-1] * m
    k = nz
    for i in range(m):
        if rels[i] == LE:
            col = np.zeros((m, 1)); col[i, 0] = 1.0
            cols.append(col); slack_of_row[i] = k; k += 1
        elif rels[i] == GE:
            col = np.zeros((m, 1)); col[i, 0] = -1.0
            cols.append(col); k += 1
    art_of_row = [-1] * m
    basis = [0] * m
    for i in range(m):
        if slack_of_row[i] >= 0:
            basis[i] = slack_of_row[i]
        else:
            col = np.zeros((m, 1)); col[i, 0] = 1.0
            cols.append(col)
            art_of_row[i] = k
            basis[i] = k
            k += 1
    A_std = np.hstack(cols)
    n_all = k
    is_artificial = np.zeros(n_all, dtype=bool)
    for i in range(m):
        if art_of_row[i] >= 0:
            is_artificial[art_of_row[i]] = True

    cz = np.zeros(n_all)
    if nz:
        cz[:nz] = to_z_row(c_user)

    state = _SimplexState(A_std, b, basis)

    if any(a >= 0 for a in art_of_row):
        c1 = is_artificial.astype(float)
        if state.run(c1, allow_enter=~is_artificial) == "iteration-cap":
            raise NumericalFailure("simplex iteration cap hit in phase 1")
        phase1_val = float(c1[state.basis] @ state.T[:, -1])
        if phase1_val > FEAS_TOL:
            y = _row_duals(A_std, state.basis, c1)
            return LpOutcome("infeasible", farkas=(flip * y / scales_pad(scales, m))[:m_user])
        state.evict_artificials(is_artificial)

    status = state.run(cz, allow_enter=~is_artificial)
    if status == "iteration-cap":
        raise NumericalFailure("simplex iteration cap hit in phase 2")
    if status == "unbounded":
        return LpOutcome("unbounded", ray=_z_to_x(state.ray[:nz], terms, n))

    z = np.zeros(n_all)
    z[state.basis] = np.maximum(state.T[:, -1], 0.0)
    x = shift + _z_to_x(z[:nz], terms, n)
    value = float(np.asarray(lp.objective, dtype=float) @ x)
    y = _row_duals(A_std, state.basis, cz)
    duals = (sense * flip * y / scales_pad(scales, m))[:m_user]
    return LpOutcome("optimal", x=x, value=value, duals=duals)


def scales_pad(scales: np.ndarray, m: int) -> np.ndarray:
    out = np.ones(m)
    out[: len(scales)] = scales
    return out


def _z_to_x(z_part: np.ndarray, terms, n: int) -> np.ndarray:
    x = np.zeros(n)
    for j in range(n):
        for k, sgn in terms[j]:
            if k < len(z_part):
                x[j] += sgn * z_part[k]
    return x


def _row_duals(A_std: np.ndarray, basis: list[int], costs: np.ndarray) -> np.ndarray:
    B = A_std[:, basis]
    try:
        return np.linalg.solve(B.T, costs[basis])
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(B.T, costs[basis], rcond=None)[0]


class _SimplexState:
    """Tableau simplex with Bland's rule on entering and leaving variables.

    The reduced-cost row is rebuilt from the current basis at the start of
    each ``run`` (phase switch) and maintained by pivots afterwards.
    """

    def __init__(self, A_std: np.ndarray, b: np.ndarray, basis: list[int]):
        self.T = np.hstack([A_std, b.reshape(-1, 1)]).astype(float)
        self.A0 = A_std
        self.basis = basis
        self.n_all = A_std.shape[1]
        self.in_basis = np.zeros(self.n_all, dtype=bool)
        self.in_basis[basis] = True
        self.ray: np.ndarray | None = None

    def run(self, c: np.ndarray, allow_enter: np.ndarray) -> str:
        y = _row_duals(self.A0, self.basis, c)
        obj = np.empty(self.n_all + 1)
        obj[: self.n_all] = c - y @ self.A0
        obj[-1] = -float(c[self.basis] @ self.T[:, -1])
        T, basis = self.T, self.basis
        for _ in range(MAX_ITER):
            enter = -1
            for j in range(self.n_all):
                if allow_enter[j] and not self.in_basis[j] and obj[j] < -PIVOT_TOL:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            col = T[:, enter]
            leave, best = -1, np.inf
            for i in range(len(basis)):
                if col[i] > PIVOT_TOL:
                    ratio = max(T[i, -1], 0.0) / col[i]
                    if ratio < best - PIVOT_TOL or (
                        ratio <= best + PIVOT_TOL
                        and (leave < 0 or basis[i] < basis[leave])
                    ):
                        if ratio < best:
                            best = ratio
                        leave = i
            if leave < 0:
                dz = np.zeros(self.n_all)
                dz[enter] = 1.0
                for i in range(len(basis)):
                    dz[basis[i]] = -col[i]
                self.ray = dz
                return "unbounded"
            self._pivot(leave, enter, obj)
        return "iteration-cap"

    def _pivot(self, row: int, col: int, obj: np.ndarray | None = None):
        T = self.T
        T[row] /= T[row, col]
        for i in range(T.shape[0]):
            if i != row and T[i, col] != 0.0:
                T[i] -= T[i, col] * T[row]
        if obj is not None and obj[col] != 0.0:
            obj -= obj[col] * T[row]
        self.in_basis[self.basis[row]] = False
        self.in_basis[col] = True
        self.basis[row] = col

    def evict_artificials(self, is_artificial: np.ndarray):
        """Pivot zero-level artificials out of the basis where possible;
        rows that stay artificial-basic are redundant constraints."""
        for i in range(len(self.basis)):
            if is_artificial[self.basis[i]]:
                for j in range(self.n_all):
                    if not is_artificial[j] and not self.in_basis[j] \
                            and abs(self.T[i, j]) > EVICT_TOL:
                        self._pivot(i, j)
                        break
