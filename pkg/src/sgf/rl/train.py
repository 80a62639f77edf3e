"""Training and evaluation loops for the two agents.

The lower agent observes the per-GFU ages and picks one transmission
probability for all waiting GFUs.  The upper agent observes the GBU channels
and emits the detection matrix.  Both act every slot and update on their own
periods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..baselines import BaselineKind
from ..config import ExperimentConfig
from ..env import SgfEnv, action_to_combiner
from .ppo import PpoAgent, PpoConfig, Squash, Transition

LOWER_SQUASH = Squash(0.0, 1.0)
UPPER_SQUASH = Squash(-1.0, 1.0)


def ppo_config(cfg: ExperimentConfig, level: str) -> PpoConfig:
    period = cfg.lower_update_period if level == "lower" else cfg.upper_update_period
    return PpoConfig(
        clip_ratio=cfg.clip_ratio, gamma=cfg.gamma, actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr, epochs=cfg.epochs, update_period=period,
        minibatch_size=cfg.minibatch_size, hidden=cfg.hidden,
        init_log_std=cfg.init_log_std, min_log_std=cfg.min_log_std,
        normalize_advantages=cfg.normalize_advantages,
    )


def agent_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    lower_seq, upper_seq = np.random.SeedSequence([seed, 7919]).spawn(2)
    return np.random.default_rng(lower_seq), np.random.default_rng(upper_seq)


def make_lower_agent(cfg: ExperimentConfig, rng: np.random.Generator) -> PpoAgent:
    return PpoAgent(cfg.num_gfus, 1, ppo_config(cfg, "lower"), rng, LOWER_SQUASH)


def make_upper_agent(cfg: ExperimentConfig, rng: np.random.Generator) -> PpoAgent:
    dim = 2 * cfg.num_gbus * cfg.antennas
    return PpoAgent(dim, dim, ppo_config(cfg, "upper"), rng, UPPER_SQUASH)


@dataclass
class EpisodeMetrics:
    episode: int
    mean_aoi: float
    throughput: float
    upper_loss: float = math.nan
    lower_loss: float = math.nan
    clip_fraction: float = math.nan
    penalty: float = 0.0

    def csv_row(self) -> dict:
        return {"episode": self.episode, "mean_aoi": self.mean_aoi,
                "throughput": self.throughput, "upper_loss": self.upper_loss,
                "lower_loss": self.lower_loss, "clip_fraction": self.clip_fraction}


METRIC_FIELDS = ("episode", "mean_aoi", "throughput", "upper_loss", "lower_loss",
                 "clip_fraction")

EpisodeCallback = Callable[[EpisodeMetrics], None]


@dataclass
class TrainResult:
    lower: PpoAgent | None
    upper: PpoAgent | None
    metrics: list[EpisodeMetrics] = field(default_factory=list)

    def final_mean_aoi(self, window: int = 100) -> float:
        return float(np.mean([m.mean_aoi for m in self.metrics[-window:]]))


class _LowerRecorder:
    """Completes a lower transition once the next decision state is known."""

    def __init__(self, agent: PpoAgent):
        self.agent = agent
        self.pending: Transition | None = None

    def observe(self, state: np.ndarray) -> None:
        if self.pending is not None:
            self.pending.next_state = state
            self.agent.store(self.pending)
            self.pending = None
            if self.agent.ready:
                self.agent.update()

    def record(self, state, raw, log_prob, reward) -> None:
        self.pending = Transition(state, raw, reward, None, log_prob)


def _upper_action(upper: PpoAgent | None, env: SgfEnv, deterministic: bool):
    if upper is None:
        return env.zf_combiner(), None
    x = env.csi_state()
    action, raw, lp = upper.act(x, deterministic)
    v = action_to_combiner(action, env.num_gbus, env.cfg.antennas)
    return v, (x, raw, lp)


def train_lower(cfg: ExperimentConfig, episodes: int | None = None, seed: int | None = None,
                on_episode: EpisodeCallback | None = None,
                agent: PpoAgent | None = None) -> TrainResult:
    """Train the transmission-probability agent with ZF detection held fixed."""
    episodes = cfg.episodes if episodes is None else episodes
    seed = cfg.seed if seed is None else seed
    env = SgfEnv(cfg, seed)
    if agent is None:
        agent = make_lower_agent(cfg, agent_rngs(seed)[0])
    result = TrainResult(agent, None)
    rec = _LowerRecorder(agent)
    for ep in range(episodes):
        env.reset()
        ages, thr = [], []
        while not env.done:
            env.prepare(env.zf_combiner())
            obs = env.age_state()
            rec.observe(obs)
            p, raw, lp = agent.act(obs)
            step = env.transmit(p[0])
            rec.record(obs, raw, lp, step.lower_reward)
            ages.append(step.mean_age)
            thr.append(step.throughput)
        rec.observe(env.age_state())
        m = EpisodeMetrics(ep, float(np.mean(ages)), float(np.mean(thr)),
                           lower_loss=agent.last_stats.critic_loss,
                           clip_fraction=agent.last_stats.clip_fraction)
        result.metrics.append(m)
        if on_episode:
            on_episode(m)
    return result


def train_hierarchical(cfg: ExperimentConfig, episodes: int | None = None,
                       seed: int | None = None, on_episode: EpisodeCallback | None = None,
                       lower: PpoAgent | None = None,
                       upper: PpoAgent | None = None) -> TrainResult:
    """Train both agents jointly on the full environment."""
    episodes = cfg.episodes if episodes is None else episodes
    seed = cfg.seed if seed is None else seed
    env = SgfEnv(cfg, seed)
    lower_rng, upper_rng = agent_rngs(seed)
    lower = lower or make_lower_agent(cfg, lower_rng)
    upper = upper or make_upper_agent(cfg, upper_rng)
    result = TrainResult(lower, upper)
    rec = _LowerRecorder(lower)
    for ep in range(episodes):
        env.reset()
        ages, thr, pen = [], [], []
        while not env.done:
            v, (x, raw_u, lp_u) = _upper_action(upper, env, False)
            env.prepare(v)
            obs = env.age_state()
            rec.observe(obs)
            p, raw_l, lp_l = lower.act(obs)
            step = env.transmit(p[0])
            rec.record(obs, raw_l, lp_l, step.lower_reward)
            upper.store(Transition(x, raw_u, step.throughput - step.penalty,
                                   env.csi_state(), lp_u))
            if upper.ready:
                upper.update()
            ages.append(step.mean_age)
            thr.append(step.throughput)
            pen.append(step.penalty)
        rec.observe(env.age_state())
        m = EpisodeMetrics(ep, float(np.mean(ages)), float(np.mean(thr)),
                           upper_loss=upper.last_stats.critic_loss,
                           lower_loss=lower.last_stats.critic_loss,
                           clip_fraction=upper.last_stats.clip_fraction,
                           penalty=float(np.mean(pen)))
        result.metrics.append(m)
        if on_episode:
            on_episode(m)
    return result


# ----- evaluation --------------------------------------------------------------

@dataclass
class EvalResult:
    mean_aoi: float
    throughput: float
    penalty: float
    per_seed_aoi: list[float]
    per_seed_throughput: list[float]
    seeds: list[int] = field(default_factory=list)


def evaluate(cfg: ExperimentConfig, seeds, lower: PpoAgent | BaselineKind,
             upper: PpoAgent | None = None, episodes_per_seed: int | None = None,
             slot_log: list | None = None) -> EvalResult:
    """Run deterministic (mean-action) policies on fixed seeds.

    ``upper=None`` uses ZF detection.  ``lower`` is either a trained agent or
    a baseline rule.  When ``slot_log`` is a list, one dict per slot is
    appended to it.
    """
    episodes_per_seed = cfg.eval_episodes if episodes_per_seed is None else episodes_per_seed
    aoi_s, thr_s, pen_all = [], [], []
    for seed in seeds:
        env = SgfEnv(cfg, int(seed))
        ages, thr = [], []
        for ep in range(episodes_per_seed):
            env.reset()
            while not env.done:
                v, _ = _upper_action(upper, env, True)
                env.prepare(v)
                if isinstance(lower, BaselineKind):
                    p = env.baseline_probability(lower)
                else:
                    p = float(lower.act(env.age_state(), deterministic=True)[0][0])
                slot = env.t
                step = env.transmit(p)
                ages.append(step.mean_age)
                thr.append(step.throughput)
                pen_all.append(step.penalty)
                if slot_log is not None:
                    row = {"seed": int(seed), "episode": ep}
                    row.update(step.outcome.csv_row(slot))
                    row.update({"mean_age": step.mean_age, "probability": p})
                    slot_log.append(row)
        aoi_s.append(float(np.mean(ages)))
        thr_s.append(float(np.mean(thr)))
    return EvalResult(float(np.mean(aoi_s)), float(np.mean(thr_s)), float(np.mean(pen_all)),
                      aoi_s, thr_s, [int(s) for s in seeds])
