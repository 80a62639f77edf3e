import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgf import channel as ch
from sgf.config import RadioConfig


def test_place_users_empty(rng):
    assert ch.place_users(0, 1.5, rng) == []


def test_place_users_deterministic():
    a = ch.place_users(5, 1.5, np.random.default_rng(7))
    b = ch.place_users(5, 1.5, np.random.default_rng(7))
    assert a == b


def test_place_users_spread(rng):
    xy = ch.place_users_array(100_000, 1.5, rng)
    assert abs(xy[:, 0].std() - 1.5) < 0.02


def test_place_users_rejects_bad_std(rng):
    with pytest.raises(ValueError):
        ch.place_users(3, 0.0, rng)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), std=st.floats(0.01, 3.0), count=st.integers(1, 50))
def test_no_position_inside_minimum_distance(seed, std, count):
    rng = np.random.default_rng(seed)
    xy = ch.place_users_array(count, std, rng, d_min_km=0.05)
    assert np.all(np.hypot(xy[:, 0], xy[:, 1]) >= 0.05)
    moved = ch.step_mobility(xy, rng, 0.05, 0.05)
    assert np.all(np.hypot(moved[:, 0], moved[:, 1]) >= 0.05)


def test_zero_step_leaves_positions(rng):
    xy = ch.place_users_array(4, 1.5, rng)
    assert np.array_equal(ch.step_mobility(xy, rng, 0.0), xy)


def test_mobility_reproducible():
    xy = np.array([[1.0, 0.5], [0.2, -0.7]])
    a = ch.step_mobility(xy, np.random.default_rng(3), 0.05)
    b = ch.step_mobility(xy, np.random.default_rng(3), 0.05)
    assert np.array_equal(a, b)


def test_mobility_step_spread(rng):
    start = np.tile([[0.06, 0.0]], (100_000, 1))
    moved = ch.step_mobility(start, rng, 0.05, d_min_km=0.05)
    # Steps from just outside d_min are redrawn when they land inside, which
    # shrinks the spread; measure from a start far away instead.
    far = np.tile([[2.0, 0.0]], (100_000, 1))
    steps = ch.step_mobility(far, rng, 0.05, d_min_km=0.05) - far
    assert abs(steps.std() / 0.05 - 1.0) < 0.02
    assert np.all(np.hypot(moved[:, 0], moved[:, 1]) >= 0.05)


def test_los_limit_is_deterministic(rng):
    radio = RadioConfig(rician_factor=1e9)
    h1 = ch.sample_channel((0.8, 0.3), radio, rng)
    h2 = ch.sample_channel((0.8, 0.3), radio, rng)
    assert np.linalg.norm(h1 - h2) / np.linalg.norm(h1) < 1e-3


@pytest.mark.parametrize("factor", [0.0, 1.0, 10.0])
def test_mean_power_matches_path_gain(rng, factor):
    radio = RadioConfig(rician_factor=factor)
    pos = np.tile([[0.6, -0.4]], (100_000, 1))
    h = ch.sample_channels(pos, radio, rng)
    g = ch.path_gain(np.hypot(0.6, 0.4), radio)
    # per-entry power and the total E|h|^2 = A g(d)
    assert abs(np.mean(np.abs(h) ** 2) / g - 1.0) < 0.02
    assert abs(np.mean(np.sum(np.abs(h) ** 2, axis=1)) / (radio.num_antennas * g) - 1.0) < 0.02


@pytest.mark.parametrize("antennas", [1, 2, 3, 8])
def test_channel_length(rng, antennas):
    radio = RadioConfig(num_antennas=antennas)
    assert ch.sample_channel(ch.UserPosition(1.0, 1.0), radio, rng).shape == (antennas,)


def test_path_gain_reference(radio):
    assert ch.path_gain(1.0, radio) == pytest.approx(radio.pathloss_ref_gain)
    assert ch.path_gain(2.0, radio) == pytest.approx(radio.pathloss_ref_gain / 8.0)


def test_steering_vector_unit_modulus():
    a = ch.steering_vector(np.array([0.1, 1.2, -2.0]), 4)
    assert a.shape == (3, 4)
    assert np.allclose(np.abs(a), 1.0)


def test_zero_forcing_nulls_and_normalises(rng, radio):
    for _ in range(100):
        h = ch.sample_channels(ch.place_users_array(3, 1.5, rng), radio, rng)
        v = ch.zero_forcing_combiner(h)
        assert np.allclose(np.linalg.norm(v, axis=0), 1.0, atol=1e-9)
        g = np.abs(h @ v) ** 2
        off = g[~np.eye(3, dtype=bool)].reshape(3, 2).sum(axis=1)
        assert np.all(off / np.sum(np.abs(h) ** 2, axis=1) < 1e-9)


def test_zero_forcing_needs_enough_antennas(rng, radio):
    h = ch.sample_channels(ch.place_users_array(4, 1.5, rng), radio, rng)
    with pytest.raises(ValueError):
        ch.zero_forcing_combiner(h)


def test_normalize_columns_handles_zero():
    v = np.array([[0.0, 3.0], [0.0, 4.0]])
    out = ch.normalize_columns(v)
    assert np.allclose(np.linalg.norm(out, axis=0), 1.0)
    assert np.allclose(out[:, 1], [0.6, 0.8])
