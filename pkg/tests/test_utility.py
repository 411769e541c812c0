import math
import random

import pytest

from treedual.errors import DomainError
from treedual.utility import UtilityField, conjugate_numeric


def test_log_marginals():
    f = UtilityField(family="log")
    assert f.u_prime(None, 2.0) == pytest.approx(0.5)
    assert f.u_prime_inv(None, 0.5) == pytest.approx(2.0)
    assert f.u(None, 0.0) == -math.inf


def test_sqrt_utility_marginal():
    f = UtilityField(family="power", rra=0.5)  # u(x) = 2 sqrt(x)
    assert f.u(None, 4.0) == pytest.approx(4.0)
    assert f.u_prime(None, 0.1) == pytest.approx(3.16228, abs=5e-6)
    assert f.u(None, 0.0) == 0.0


def test_power_rra2_continuity_at_zero():
    f = UtilityField(family="power", rra=2.0)
    assert f.u(None, 0.0) == -math.inf
    assert f.u(None, 1.0) == pytest.approx(-1.0)


def test_domain_errors():
    f = UtilityField(family="log")
    with pytest.raises(DomainError):
        f.u(None, -1.0)
    with pytest.raises(DomainError):
        f.u_prime(None, 0.0)
    with pytest.raises(DomainError):
        f.u_prime_inv(None, 0.0)
    with pytest.raises(DomainError):
        f.v(None, 0.0)
    with pytest.raises(DomainError):
        UtilityField(family="power", rra=1.0)
    with pytest.raises(DomainError):
        UtilityField(family="nope")


def test_conjugate_closed_forms():
    log = UtilityField(family="log")
    assert log.v(None, 1.0) == pytest.approx(-1.0)
    sqrt = UtilityField(family="power", rra=0.5)  # v(y) = 1/y
    assert sqrt.v(None, 3.16228) == pytest.approx(0.31623, abs=5e-6)
    assert sqrt.v(None, 2.0) == pytest.approx(0.5)


def test_marginal_inverse_roundtrip():
    rng = random.Random(5)
    fields = [
        UtilityField(family="log"),
        UtilityField(family="power", rra=0.5),
        UtilityField(family="power", rra=2.0),
        UtilityField(family="log", weights={"n": 1.7}),
    ]
    for f in fields:
        for _ in range(20):
            x = rng.uniform(1e-3, 50.0)
            assert f.u_prime_inv("n", f.u_prime("n", x)) == pytest.approx(x, rel=1e-12)


def test_fenchel_young_grid():
    rng = random.Random(9)
    fields = [
        UtilityField(family="log"),
        UtilityField(family="power", rra=0.5),
        UtilityField(family="power", rra=3.0),
        UtilityField(family="power", rra=0.5, weights={"n": 0.7}),
    ]
    for f in fields:
        for _ in range(40):
            x = rng.uniform(1e-2, 20.0)
            y = rng.uniform(1e-2, 20.0)
            assert f.u("n", x) <= f.v("n", y) + x * y + 1e-12
        for _ in range(20):
            x = rng.uniform(1e-2, 20.0)
            y = f.u_prime("n", x)
            gap = f.v("n", y) + x * y - f.u("n", x)
            assert abs(gap) < 1e-10


def test_conjugate_matches_numeric_sup():
    fields = [
        UtilityField(family="log"),
        UtilityField(family="power", rra=0.5),
        UtilityField(family="power", rra=2.0),
        UtilityField(family="log", weights={"n": 2.5}),
    ]
    for f in fields:
        for y in (0.1, 0.7, 1.0, 3.0, 17.0):
            closed = f.v("n", y)
            numeric = conjugate_numeric(f, "n", y)
            assert numeric == pytest.approx(closed, rel=1e-6, abs=1e-9)
            assert numeric <= closed + 1e-9  # grid sup never beats the true sup


def test_u_prime_strictly_decreasing():
    for f in (UtilityField(family="log"), UtilityField(family="power", rra=2.0)):
        xs = [0.01 * 1.5**k for k in range(25)]
        vals = [f.u_prime(None, x) for x in xs]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_conjugate_field_view_convex_decreasing():
    conj = UtilityField(family="power", rra=0.5).conjugate()
    ys = [0.05 * 1.4**k for k in range(20)]
    vals = [conj.v("n", y) for y in ys]
    assert all(a > b for a, b in zip(vals, vals[1:]))  # decreasing
    for a, b in zip(ys, ys[2:]):  # midpoint convexity on the sampled grid
        mid = 0.5 * (a + b)
        assert conj.v("n", mid) <= 0.5 * (conj.v("n", a) + conj.v("n", b)) + 1e-12
