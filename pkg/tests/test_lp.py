import itertools
import random

import numpy as np
import pytest

from treedual.lp import LE, EQ, GE, LinearProgram, solve_lp


def test_toy_optimal():
    out = solve_lp(LinearProgram(objective=[1.0], rows=[([1.0], LE, 1.0)]))
    assert out.optimal
    assert out.value == pytest.approx(1.0, abs=1e-9)
    assert out.x[0] == pytest.approx(1.0, abs=1e-9)


def test_toy_infeasible():
    out = solve_lp(LinearProgram(objective=[1.0], rows=[([1.0], LE, -1.0)]))
    assert out.status == "infeasible"
    assert out.farkas is not None


def test_two_constraint_vertex():
    # max x+y s.t. x+2y <= 4, 3x+y <= 6, x,y >= 0.
    # Vertex enumeration by hand: (0,0)->0, (2,0)->2, (0,2)->2,
    # intersection (1.6, 1.2)->2.8; the stated optimum is the interior vertex.
    out = solve_lp(
        LinearProgram(
            objective=[1.0, 1.0],
            rows=[([1.0, 2.0], LE, 4.0), ([3.0, 1.0], LE, 6.0)],
        )
    )
    assert out.optimal
    assert out.value == pytest.approx(2.8, abs=1e-9)
    assert out.x == pytest.approx([1.6, 1.2], abs=1e-9)


def test_unbounded_ray():
    out = solve_lp(LinearProgram(objective=[1.0, 0.0], rows=[([0.0, 1.0], LE, 1.0)]))
    assert out.status == "unbounded"
    assert out.ray is not None
    assert out.ray[0] > 0  # improving direction for max x


def test_equality_and_free_variables():
    # min x - y with x free, x + y = 3, y <= 2  ->  x = 1, y = 2.
    out = solve_lp(
        LinearProgram(
            objective=[1.0, -1.0],
            rows=[([1.0, 1.0], EQ, 3.0)],
            bounds=[(None, None), (0.0, 2.0)],
            sense="min",
        )
    )
    assert out.optimal
    assert out.x == pytest.approx([1.0, 2.0], abs=1e-9)
    assert out.value == pytest.approx(-1.0, abs=1e-9)


def test_ge_rows_and_negative_rhs():
    # max -x s.t. x >= 2  ->  x = 2.
    out = solve_lp(LinearProgram(objective=[-1.0], rows=[([1.0], GE, 2.0)]))
    assert out.optimal
    assert out.x[0] == pytest.approx(2.0, abs=1e-9)


def test_strong_duality_on_default_bounds():
    # max c'x, Ax <= b, x >= 0: optimal duals satisfy y'b == value.
    rng = random.Random(2)
    for _ in range(20):
        n, m = rng.randint(1, 4), rng.randint(1, 4)
        A = [[rng.uniform(0.2, 2.0) for _ in range(n)] for _ in range(m)]
        b = [rng.uniform(0.5, 3.0) for _ in range(m)]
        c = [rng.uniform(0.1, 1.0) for _ in range(n)]
        out = solve_lp(
            LinearProgram(objective=c, rows=[(row, LE, bi) for row, bi in zip(A, b)])
        )
        assert out.optimal
        assert float(np.dot(out.duals, b)) == pytest.approx(out.value, abs=1e-7)
        assert np.all(out.duals >= -1e-9)


def _vertex_enumeration_value(c, A, b):
    """Brute-force optimum of max c'x s.t. Ax <= b, x >= 0 (small dense)."""
    n = len(c)
    rows = [np.asarray(r, dtype=float) for r in A] + [None] * n
    rhs = list(b) + [0.0] * n
    for i in range(n):
        e = np.zeros(n)
        e[i] = -1.0
        rows[len(A) + i] = e
    best = None
    for idx in itertools.combinations(range(len(rows)), n):
        M = np.array([rows[i] for i in idx])
        v = np.array([rhs[i] for i in idx])
        try:
            x = np.linalg.solve(M, v)
        except np.linalg.LinAlgError:
            continue
        feas = all(float(np.dot(rows[i], x)) <= rhs[i] + 1e-9 for i in range(len(rows)))
        if feas:
            val = float(np.dot(c, x))
            if best is None or val > best:
                best = val
    return best


def test_random_lps_match_vertex_enumeration():
    rng = random.Random(13)
    for _ in range(40):
        n = rng.randint(1, 4)
        m = rng.randint(1, 5)
        A = [[rng.uniform(0.05, 1.5) for _ in range(n)] for _ in range(m)]
        b = [rng.uniform(0.3, 2.5) for _ in range(m)]
        c = [rng.uniform(-0.5, 1.5) for _ in range(n)]
        out = solve_lp(
            LinearProgram(objective=c, rows=[(row, LE, bi) for row, bi in zip(A, b)])
        )
        ref = _vertex_enumeration_value(c, A, b)
        assert out.optimal and ref is not None
        assert out.value == pytest.approx(ref, abs=1e-8)


def test_farkas_certificate_contradicts_rows():
    # x >= 0, x <= 1, x >= 2 is infeasible; the certificate combines the
    # rows into an impossible inequality for every x >= 0.
    lp = LinearProgram(
        objective=[0.0],
        rows=[([1.0], LE, 1.0), ([1.0], GE, 2.0)],
    )
    out = solve_lp(lp)
    assert out.status == "infeasible"
    lam = out.farkas
    # Evaluate the certificate's aggregated slack at a few feasible-for-one-row
    # points; it must be bounded away from zero on the full system's behalf:
    # sum_r lam_r * (a_r x - b_r) has one sign for all x >= 0.
    vals = []
    for x in (0.0, 0.5, 1.0, 2.0, 5.0):
        vals.append(sum(l * (a * x - bb) for l, (av, rel, bb) in zip(lam, lp.rows)
                        for a in [av[0]]))
    assert all(v > 1e-10 for v in vals) or all(v < -1e-10 for v in vals)


def test_degenerate_lp_terminates():
    # Many redundant rows through the same vertex; Bland's rule must not cycle.
    rows = [([1.0, 1.0], LE, 1.0)] * 6 + [([1.0, 0.0], LE, 1.0), ([0.0, 1.0], LE, 1.0)]
    out = solve_lp(LinearProgram(objective=[1.0, 1.0], rows=rows))
    assert out.optimal
    assert out.value == pytest.approx(1.0, abs=1e-9)


def test_zero_variable_feasibility():
    out = solve_lp(LinearProgram(objective=[], rows=[([], LE, 1.0)]))
    assert out.optimal
    bad = solve_lp(LinearProgram(objective=[], rows=[([], GE, 1.0)]))
    assert bad.status == "infeasible"
