import math
import random

import pytest

from treedual.scenario import (
    IncomeProfile,
    cumulative_income,
    dK_pairing,
    deterministic_clock,
    fix_bin1,
    fix_det2,
    validate,
)
from treedual.tree import expectation


def test_fix_bin1_validates_clean():
    rep = validate(fix_bin1())
    assert rep.ok, rep.failures()
    clock = deterministic_clock(fix_bin1())
    assert clock.dK[1] == pytest.approx(1.0, abs=1e-12)
    assert clock.support == (1,)


def test_root_clock_mass_fails_validation():
    s = fix_bin1()
    bad = s.__class__(**{**s.__dict__, "dkappa": {**s.dkappa, "root": 0.5}})
    rep = validate(bad)
    assert not rep.ok
    assert any("kappa_0 = 0 violated" in f for f in rep.failures())


def test_zero_density_node_fails_validation():
    s = fix_bin1()
    bad = s.__class__(**{**s.__dict__, "dkappa": {"root": 0.0, "u": 0.0, "d": 1.0}})
    rep = validate(bad)
    assert not rep.ok
    assert any("density" in f for f in rep.failures())


def test_clock_bound_violation_detected():
    s = fix_det2()
    bad = s.__class__(**{**s.__dict__, "clock_bound": 1.5})
    rep = validate(bad)
    assert not rep.ok


def test_det2_deterministic_clock():
    clock = deterministic_clock(fix_det2())
    assert clock.dK[1] == pytest.approx(1.0)
    assert clock.dK[2] == pytest.approx(1.0)
    assert clock.support == (1, 2)


def test_clock_total_matches_expectation():
    for s in (fix_bin1(), fix_det2()):
        clock = deterministic_clock(s)
        assert clock.total() == pytest.approx(
            expectation(s.tree, 1.0, s.dkappa), abs=1e-12
        )


def test_dk_pairing_examples():
    clock = deterministic_clock(fix_det2())
    assert dK_pairing(0.0, {1: 5.0, 2: -3.0}, clock) == 0.0
    assert dK_pairing(1.0, {1: 0.0, 2: 1.0}, clock) == pytest.approx(1.0)
    base = dK_pairing({1: 0.3, 2: 0.7}, {1: 1.0, 2: 2.0}, clock)
    doubled = dK_pairing({1: 0.6, 2: 1.4}, {1: 1.0, 2: 2.0}, clock)
    assert doubled == pytest.approx(2 * base, abs=1e-12)


def test_dk_pairing_bilinear_random():
    rng = random.Random(11)
    clock = deterministic_clock(fix_det2())
    for _ in range(30):
        q1 = {t: rng.uniform(-2, 2) for t in (1, 2)}
        q2 = {t: rng.uniform(-2, 2) for t in (1, 2)}
        r1 = {t: rng.uniform(-2, 2) for t in (1, 2)}
        r2 = {t: rng.uniform(-2, 2) for t in (1, 2)}
        a, bcoef = rng.uniform(-2, 2), rng.uniform(-2, 2)
        qmix = {t: a * q1[t] + bcoef * q2[t] for t in (1, 2)}
        rmix = {t: a * r1[t] + bcoef * r2[t] for t in (1, 2)}
        assert dK_pairing(qmix, r1, clock) == pytest.approx(
            a * dK_pairing(q1, r1, clock) + bcoef * dK_pairing(q2, r1, clock), abs=1e-10
        )
        assert dK_pairing(q1, rmix, clock) == pytest.approx(
            a * dK_pairing(q1, r1, clock) + bcoef * dK_pairing(q1, r2, clock), abs=1e-10
        )


def test_profiles_equal_on_support_are_indistinguishable():
    s = fix_det2()
    clock = deterministic_clock(s)
    assert clock.support == (1, 2)
    q1 = IncomeProfile({1: 0.4, 2: 0.9})
    q2 = IncomeProfile({1: 0.4, 2: 0.9, 3: 123.0, 0: -7.0})  # off-support junk
    c1 = cumulative_income(s, q1)
    c2 = cumulative_income(s, q2)
    for nid in s.tree.order:
        assert c1[nid] == pytest.approx(c2[nid], abs=1e-15)


def test_income_profile_defaults():
    q = IncomeProfile({}, default=1.0)
    assert q.at(1) == 1.0
    assert q.at(7) == 1.0
    assert IncomeProfile({1: 2.0}).at(2) == 0.0


def test_fixture_shapes():
    s1, s2 = fix_bin1(), fix_det2()
    assert s1.assets == 1 and s2.assets == 0
    assert s1.S["u"] == (2.0,) and s1.S["d"] == (0.5,)
    assert s2.e["t2"] == 1.0 and s2.e["t1"] == 0.0
    assert validate(s2).ok
