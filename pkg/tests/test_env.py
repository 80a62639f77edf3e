import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgf.config import ExperimentConfig
from sgf.env import SgfEnv, action_to_combiner, combiner_to_action


def rollout(cfg, seed, p, slots=None):
    env = SgfEnv(cfg, seed)
    env.reset()
    out = []
    while not env.done and (slots is None or len(out) < slots):
        env.prepare(env.zf_combiner())
        out.append(env.transmit(p))
    return env, out


def test_same_seed_same_trajectory():
    cfg = ExperimentConfig(horizon=40)
    _, a = rollout(cfg, 5, 0.6)
    _, b = rollout(cfg, 5, 0.6)
    assert [s.throughput for s in a] == [s.throughput for s in b]
    assert [s.mean_age for s in a] == [s.mean_age for s in b]


def test_gbu_process_independent_of_gfu_count():
    envs = []
    for m in (3, 9):
        env = SgfEnv(ExperimentConfig(num_gfus=m), 11)
        env.reset()
        for _ in range(5):
            env.prepare(env.zf_combiner())
            env.transmit(0.5)
        envs.append(env)
    assert np.array_equal(envs[0].snapshot.gbu_channels, envs[1].snapshot.gbu_channels)


def test_transmit_requires_prepare():
    env = SgfEnv(ExperimentConfig(), 0)
    env.reset()
    with pytest.raises(RuntimeError):
        env.transmit(0.5)


def test_never_transmit_sawtooth():
    cfg = ExperimentConfig(generation_period=3, horizon=30)
    _, steps = rollout(cfg, 0, 0.0)
    assert all(s.throughput == pytest.approx(sum(s.outcome.gbu_rates)) for s in steps)
    assert all(not s.outcome.successes for s in steps)
    assert [s.mean_age for s in steps[:6]] == [2.0, 3.0, 4.0, 2.0, 3.0, 4.0]


def test_served_gfus_stay_silent():
    cfg = ExperimentConfig(horizon=100, fixed_levels=6)
    env = SgfEnv(cfg, 2)
    env.reset()
    while not env.done:
        env.prepare(env.zf_combiner())
        waiting = set(env.tracker.waiting_ids().tolist())
        step = env.transmit(0.7)
        assert step.outcome.attempts <= waiting


def test_fixed_levels_supply():
    cfg = ExperimentConfig(fixed_levels=3)
    env = SgfEnv(cfg, 0)
    env.reset()
    plan = env.prepare(env.zf_combiner())
    assert plan.total_levels == 3 and plan.levels_per_gbu == [1, 1, 1]


def test_observation_shapes():
    cfg = ExperimentConfig(num_gbus=3, antennas=3, num_gfus=5)
    env = SgfEnv(cfg, 0)
    env.reset()
    assert env.csi_state().shape == (18,)
    assert np.all(np.isfinite(env.csi_state()))
    assert env.age_state().shape == (5,)


def test_penalty_counts_gbu_shortfall():
    cfg = ExperimentConfig(horizon=50)
    _, steps = rollout(cfg, 4, 0.5)
    for s in steps:
        short = np.maximum(0.0, cfg.target_rate - s.outcome.gbu_rates).sum()
        assert s.penalty == pytest.approx(cfg.penalty * short)


@settings(max_examples=100, deadline=None)
@given(action=st.lists(st.floats(-1, 1), min_size=18, max_size=18))
def test_action_to_combiner_unit_columns(action):
    v = action_to_combiner(np.array(action), 3, 3)
    assert v.shape == (3, 3)
    assert np.allclose(np.linalg.norm(v, axis=0), 1.0, atol=1e-9)


def test_combiner_action_round_trip(rng):
    v = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    v /= np.linalg.norm(v, axis=0)
    assert np.allclose(action_to_combiner(combiner_to_action(v), 3, 3), v)
