import numpy as np
import pytest
from hypothesis import given, strategies as st

from sgf.baselines import (BaselineKind, adaptive_tp, fixed_tp, parse_policy,
                           state_dependent_tp)


def test_adaptive():
    assert adaptive_tp(2, 4) == 0.5
    assert adaptive_tp(7, 4) == 1.0
    assert adaptive_tp(0, 4) == 0.0


def test_state_dependent():
    assert state_dependent_tp(5, 2) == pytest.approx(1 / 3)
    assert state_dependent_tp(5, 4) == 1.0
    assert state_dependent_tp(5, 5) == 0.0
    with pytest.raises(ValueError):
        state_dependent_tp(5, 6)


def test_fixed_extremes_and_frequency():
    rng = np.random.default_rng(0)
    assert not (rng.random(1000) < fixed_tp(0.0)).any()
    assert (rng.random(1000) < fixed_tp(1.0)).all()
    assert abs(np.mean(rng.random(1_000_000) < fixed_tp(0.3)) - 0.3) < 0.002
    with pytest.raises(ValueError):
        fixed_tp(1.5)


@given(l1=st.integers(0, 100), l2=st.integers(0, 100), m1=st.integers(1, 50), m2=st.integers(1, 50))
def test_adaptive_monotone(l1, l2, m1, m2):
    lo, hi = sorted((l1, l2))
    assert adaptive_tp(lo, m1) <= adaptive_tp(hi, m1)
    small, big = sorted((m1, m2))
    assert adaptive_tp(l1, big) <= adaptive_tp(l1, small)
    assert 0.0 <= adaptive_tp(l1, m1) <= 1.0


@given(m=st.integers(1, 50), data=st.data())
def test_state_dependent_monotone(m, data):
    j1 = data.draw(st.integers(0, m - 1))
    j2 = data.draw(st.integers(j1, m - 1))
    assert 0.0 <= state_dependent_tp(m, j1) <= state_dependent_tp(m, j2) <= 1.0


def test_parse_policy():
    assert parse_policy("fixed:0.2") == BaselineKind("fixed", p=0.2)
    assert parse_policy("adaptive").kind == "adaptive"
    assert parse_policy("state_dependent").kind == "state-dependent"
    assert parse_policy("learned:ck.npz").checkpoint == "ck.npz"
    for bad in ("fixed:x", "fixed:2", "greedy"):
        with pytest.raises(ValueError):
            parse_policy(bad)


def test_policy_probability_dispatch():
    assert parse_policy("fixed:0.2").probability(9, 5, 0) == 0.2
    assert parse_policy("adaptive").probability(2, 4, 0) == 0.5
    assert parse_policy("state-dependent").probability(0, 5, 2) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        parse_policy("learned:x").probability(1, 1, 0)
