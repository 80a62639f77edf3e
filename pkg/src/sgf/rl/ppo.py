"""Clipped-surrogate actor-critic with a squashed Gaussian policy.

The actor network outputs the mean of a Gaussian over a pre-squash variable
``u``; the log standard deviation is a learned vector that does not depend on
the state.  Actions are ``low + (high - low) * sigmoid(u)``.  Transitions keep
``u`` itself so log-probabilities can be re-evaluated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .mlp import MlpParams

LOG_2PI = math.log(2.0 * math.pi)


class NumericalError(RuntimeError):
    """A loss or parameter became non-finite during training."""


@dataclass(frozen=True)
class PpoConfig:
    clip_ratio: float = 0.1
    gamma: float = 0.99
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    epochs: int = 5
    update_period: int = 64
    minibatch_size: int = 64
    hidden: int = 64
    init_log_std: float = math.log(0.5)
    min_log_std: float = math.log(0.01)
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip_ratio must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if min(self.epochs, self.update_period, self.minibatch_size, self.hidden) < 1:
            raise ValueError("epochs, periods, minibatch size and width must be >= 1")

    @property
    def batch_capacity(self) -> int:
        return self.update_period


@dataclass(frozen=True)
class Squash:
    """Affine sigmoid map from the real line onto ``(low, high)``."""

    low: float = 0.0
    high: float = 1.0

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.low + (self.high - self.low) * _sigmoid(u)

    def log_jacobian(self, u: np.ndarray) -> np.ndarray:
        """``sum log |d action / d u|`` over the last axis."""
        # log sigmoid(u) + log sigmoid(-u), written to stay finite for large |u|
        per = math.log(self.high - self.low) - np.logaddexp(0.0, -u) - np.logaddexp(0.0, u)
        return per.sum(axis=-1)


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(u)))


@dataclass
class ActorParams:
    net: MlpParams
    log_std: np.ndarray

    def copy(self) -> "ActorParams":
        return ActorParams(self.net.copy(), self.log_std.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.net.flat(), self.log_std])

    def set_flat(self, vec: np.ndarray) -> None:
        n = self.net.size
        self.net.set_flat(vec[:n])
        self.log_std[...] = vec[n:]

    @property
    def size(self) -> int:
        return self.net.size + self.log_std.size

    def all_finite(self) -> bool:
        return self.net.all_finite() and bool(np.all(np.isfinite(self.log_std)))


def init_actor(state_dim: int, action_dim: int, rng: np.random.Generator,
               hidden: int = 64, init_log_std: float = math.log(0.5)) -> ActorParams:
    # A small last layer starts every mean near zero.
    net = mlp.init_mlp((state_dim, hidden, hidden, action_dim), rng, out_scale=0.01)
    return ActorParams(net, np.full(action_dim, float(init_log_std)))


def init_critic(state_dim: int, rng: np.random.Generator, hidden: int = 64) -> MlpParams:
    return mlp.init_mlp((state_dim, hidden, hidden, 1), rng)


# ----- forward passes ----------------------------------------------------------

def gaussian_log_prob(raw: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (raw - mean) * np.exp(-log_std)
    return (-0.5 * z ** 2 - log_std - 0.5 * LOG_2PI).sum(axis=-1)


def log_prob(params: ActorParams, states: np.ndarray, raw: np.ndarray,
             squash: Squash = Squash()) -> np.ndarray:
    """Log-density of the squashed actions that came from pre-squash ``raw``."""
    mean, _ = mlp.forward(params.net, states)
    return gaussian_log_prob(np.atleast_2d(raw), mean, params.log_std) \
        - squash.log_jacobian(np.atleast_2d(raw))


def actor_sample(params: ActorParams, state: np.ndarray, rng: np.random.Generator,
                 squash: Squash = Squash(), deterministic: bool = False):
    """Returns ``(action, log_prob, raw)`` for a single state."""
    mean = mlp.forward(params.net, state)[0][0]
    if deterministic:
        raw = mean
    else:
        raw = mean + np.exp(params.log_std) * rng.standard_normal(mean.shape)
    lp = float(gaussian_log_prob(raw, mean, params.log_std) - squash.log_jacobian(raw))
    return squash.apply(raw), lp, raw


def actor_forward(params: ActorParams, state: np.ndarray, rng: np.random.Generator,
                  squash: Squash = Squash()) -> tuple[np.ndarray, float]:
    action, lp, _ = actor_sample(params, state, rng, squash)
    return action, lp


def critic_forward(params: MlpParams, state: np.ndarray) -> np.ndarray | float:
    """State value; a float for one state, an array for a batch."""
    out = mlp.forward(params, state)[0][:, 0]
    return float(out[0]) if np.ndim(state) == 1 else out


def advantage(reward, value, next_value, gamma: float):
    """One-step temporal-difference advantage ``r + gamma V(s') - V(s)``."""
    return np.asarray(reward) + gamma * np.asarray(next_value) - np.asarray(value)


# ----- batches -----------------------------------------------------------------

@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray        # pre-squash sample
    reward: float
    next_state: np.ndarray
    log_prob_old: float


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    log_prob_old: np.ndarray
    advantages: np.ndarray | None = None

    @classmethod
    def from_transitions(cls, transitions: list[Transition]) -> "Batch":
        if not transitions:
            raise ValueError("empty batch")
        return cls(
            states=np.array([t.state for t in transitions], dtype=float),
            actions=np.array([np.atleast_1d(t.action) for t in transitions], dtype=float),
            rewards=np.array([t.reward for t in transitions], dtype=float),
            next_states=np.array([t.next_state for t in transitions], dtype=float),
            log_prob_old=np.array([t.log_prob_old for t in transitions], dtype=float),
        )

    def __len__(self) -> int:
        return len(self.rewards)

    def subset(self, idx) -> "Batch":
        adv = None if self.advantages is None else self.advantages[idx]
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.log_prob_old[idx], adv)


# ----- losses ------------------------------------------------------------------

def clip_objective(batch: Batch, params: ActorParams, clip_ratio: float,
                   squash: Squash = Squash()) -> tuple[float, ActorParams, float]:
    """Clipped surrogate, its gradient and the fraction of clipped samples."""
    if batch.advantages is None:
        raise ValueError("batch advantages must be set before the policy loss")
    adv = batch.advantages
    n = len(batch)
    mean, cache = mlp.forward(params.net, batch.states)
    lp = gaussian_log_prob(batch.actions, mean, params.log_std) - squash.log_jacobian(batch.actions)
    ratio = np.exp(lp - batch.log_prob_old)
    clipped = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    unclipped_obj, clipped_obj = ratio * adv, clipped * adv
    objective = float(np.minimum(unclipped_obj, clipped_obj).mean())

    # The gradient flows only where the unclipped term is the minimum.
    active = unclipped_obj <= clipped_obj
    coef = np.where(active, ratio * adv, 0.0) / n
    inv_var = np.exp(-2.0 * params.log_std)
    diff = batch.actions - mean
    g_mean = coef[:, None] * diff * inv_var
    g_log_std = (coef[:, None] * (diff ** 2 * inv_var - 1.0)).sum(axis=0)
    g_net = mlp.backward(params.net, cache, g_mean)
    frac = float(np.mean(np.abs(ratio - 1.0) > clip_ratio))
    return objective, ActorParams(g_net, g_log_std), frac


def ppo_clip_loss(batch: Batch, params: ActorParams, params_old: ActorParams | None,
                  clip_ratio: float, squash: Squash = Squash()) -> tuple[float, ActorParams]:
    """Mean clipped surrogate (to be maximised) and its gradient.

    ``batch.log_prob_old`` is used when present; otherwise it is evaluated
    under ``params_old``.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    if batch.log_prob_old is None:
        batch = Batch(batch.states, batch.actions, batch.rewards, batch.next_states,
                      log_prob(params_old, batch.states, batch.actions, squash), batch.advantages)
    obj, grad, _ = clip_objective(batch, params, clip_ratio, squash)
    return obj, grad


def critic_loss(batch: Batch, params: MlpParams, gamma: float = 0.99) -> tuple[float, MlpParams]:
    """Mean squared one-step advantage, differentiated through V(s) and V(s')."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    n = len(batch)
    v, cache = mlp.forward(params, batch.states)
    v_next, cache_next = mlp.forward(params, batch.next_states)
    adv = advantage(batch.rewards, v[:, 0], v_next[:, 0], gamma)
    loss = float(np.mean(adv ** 2))
    g = 2.0 * adv / n
    grad = mlp.backward(params, cache, -g[:, None])
    grad_next = mlp.backward(params, cache_next, gamma * g[:, None])
    for a, b in zip(grad.arrays(), grad_next.arrays()):
        a += b
    return loss, grad


# ----- optimisation ------------------------------------------------------------

@dataclass
class Adam:
    """Per-parameter moment-based steps on a flat parameter vector."""

    size: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)

    def step(self, theta: np.ndarray, grad: np.ndarray, ascend: bool = False) -> np.ndarray:
        g = -grad if ascend else grad
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class UpdateStats:
    policy_objective: float = float("nan")
    critic_loss: float = float("nan")
    clip_fraction: float = float("nan")
    first_ratio_max_dev: float = float("nan")


class PpoAgent:
    """Actor, critic, their optimisers and the transition buffer of one level."""

    def __init__(self, state_dim: int, action_dim: int, cfg: PpoConfig,
                 rng: np.random.Generator, squash: Squash = Squash()):
        self.state_dim, self.action_dim = state_dim, action_dim
        self.cfg = cfg
        self.rng = rng
        self.squash = squash
        self.actor = init_actor(state_dim, action_dim, rng, cfg.hidden, cfg.init_log_std)
        self.critic = init_critic(state_dim, rng, cfg.hidden)
        self.actor_opt = Adam(self.actor.size, cfg.actor_lr)
        self.critic_opt = Adam(self.critic.size, cfg.critic_lr)
        self.buffer: list[Transition] = []
        self.updates = 0
        self.last_stats = UpdateStats()

    def act(self, state: np.ndarray, deterministic: bool = False):
        """Returns ``(action, raw, log_prob)``."""
        action, lp, raw = actor_sample(self.actor, np.asarray(state, dtype=float), self.rng,
                                       self.squash, deterministic)
        return action, raw, lp

    def store(self, transition: Transition) -> None:
        self.buffer.append(transition)

    @property
    def ready(self) -> bool:
        return len(self.buffer) >= self.cfg.update_period

    def update(self) -> UpdateStats:
        cfg = self.cfg
        batch = Batch.from_transitions(self.buffer)
        self.buffer = []
        v = critic_forward(self.critic, batch.states)
        v_next = critic_forward(self.critic, batch.next_states)
        adv = advantage(batch.rewards, v, v_next, cfg.gamma)
        if cfg.normalize_advantages and len(adv) > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        batch.advantages = adv

        objs, losses, fracs = [], [], []
        first_dev = float("nan")
        n = len(batch)
        for epoch in range(cfg.epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, cfg.minibatch_size):
                mb = batch.subset(order[start:start + cfg.minibatch_size])
                if epoch == 0 and start == 0:
                    lp = log_prob(self.actor, mb.states, mb.actions, self.squash)
                    first_dev = float(np.max(np.abs(np.exp(lp - mb.log_prob_old) - 1.0)))
                obj, g_actor, frac = clip_objective(mb, self.actor, cfg.clip_ratio, self.squash)
                loss, g_critic = critic_loss(mb, self.critic, cfg.gamma)
                if not (math.isfinite(obj) and math.isfinite(loss)):
                    raise NumericalError(
                        f"non-finite loss after {self.updates} updates "
                        f"(policy objective {obj}, critic loss {loss})")
                self.actor.set_flat(self.actor_opt.step(self.actor.flat(), g_actor.flat(), ascend=True))
                np.maximum(self.actor.log_std, cfg.min_log_std, out=self.actor.log_std)
                self.critic.set_flat(self.critic_opt.step(self.critic.flat(), g_critic.flat()))
                objs.append(obj)
                losses.append(loss)
                fracs.append(frac)
        if not (self.actor.all_finite() and self.critic.all_finite()):
            raise NumericalError(f"non-finite parameters after update {self.updates + 1}")
        self.updates += 1
        self.last_stats = UpdateStats(float(np.mean(objs)), float(np.mean(losses)),
                                      float(np.mean(fracs)), first_dev)
        return self.last_stats
