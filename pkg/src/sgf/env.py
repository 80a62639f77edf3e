"""Slot-level simulation of the NOMA-assisted semi-grant-free uplink.

One slot runs in three calls, mirroring the two decision points:

    v = upper(env.csi_state())           # detection matrix for the GBUs
    env.prepare(v)                       # budgets, SNR levels, GAR generation
    p = lower(env.age_state())           # transmission probability
    step = env.transmit(p)               # contention, SIC, AoI, rates

GBU channels, GFU channels and access decisions each draw from their own
stream derived from one seed, so two policies run on the same seed see the
same channels, and the GBU channels do not depend on the number of GFUs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel as ch
from . import mac
from .aoi import AoiTracker
from .config import ExperimentConfig, RadioConfig


@dataclass
class StepResult:
    outcome: mac.SlotOutcome
    mean_age: float
    throughput: float
    penalty: float
    probability: float
    n_levels: int
    generated: bool
    ages: np.ndarray

    @property
    def lower_reward(self) -> float:
        return -self.mean_age


class SgfEnv:
    def __init__(self, cfg: ExperimentConfig, seed: int = 0):
        self.cfg = cfg
        self.radio: RadioConfig = cfg.radio()
        self.num_gbus = cfg.num_gbus
        self.num_gfus = cfg.num_gfus
        self.horizon = cfg.horizon
        self.tracker = AoiTracker(cfg.num_gfus, cfg.generation_period)
        self._csi_scale = np.sqrt(self.radio.gbu_power / self.radio.noise_power)
        self.seed(seed)

    # ----- lifecycle -----------------------------------------------------

    def seed(self, seed: int) -> None:
        # GBU and GFU randomness live on separate streams so that the GBU
        # process is identical whatever the number of GFUs.
        gbu_seq, gfu_seq, access_seq = np.random.SeedSequence(seed).spawn(3)
        self.gbu_rng = np.random.default_rng(gbu_seq)
        self.gfu_rng = np.random.default_rng(gfu_seq)
        self.access_rng = np.random.default_rng(access_seq)

    def reset(self) -> None:
        cfg, radio = self.cfg, self.radio
        self.t = 0
        self.gbu_pos = ch.place_users_array(cfg.num_gbus, cfg.placement_std_km,
                                            self.gbu_rng, radio.d_min_km)
        self.gfu_pos = ch.place_users_array(cfg.num_gfus, cfg.placement_std_km,
                                            self.gfu_rng, radio.d_min_km)
        self.tracker.reset()
        self._draw_snapshot()

    def _draw_snapshot(self) -> None:
        self.snapshot = ch.ChannelSnapshot(
            ch.sample_channels(self.gbu_pos, self.radio, self.gbu_rng),
            ch.sample_channels(self.gfu_pos, self.radio, self.gfu_rng),
            self.t, self.gbu_pos, self.gfu_pos)
        self._prepared = False

    @property
    def done(self) -> bool:
        return self.t >= self.horizon

    # ----- observations --------------------------------------------------

    def csi_state(self) -> np.ndarray:
        """GBU channels as a real vector of length ``2 K A``.

        Each channel keeps its direction while its norm is replaced by
        ``log(1 + SNR) / 3``, which keeps the inputs O(1) across the very wide
        range of path gains.
        """
        x = self.snapshot.gbu_channels * self._csi_scale
        norm = np.linalg.norm(x, axis=1, keepdims=True)
        z = x / norm * (np.log1p(norm ** 2) / 3.0)
        return np.concatenate([z.real.ravel(), z.imag.ravel()])

    def age_state(self) -> np.ndarray:
        return self.tracker.ages.astype(float)

    # ----- slot mechanics ------------------------------------------------

    def zf_combiner(self) -> np.ndarray:
        return ch.zero_forcing_combiner(self.snapshot.gbu_channels)

    def prepare(self, v: np.ndarray) -> mac.SnrLevelPlan:
        """Fix the detection matrix, derive the GF budget and SNR levels, and
        run the GAR generation for this slot."""
        v = np.asarray(v)
        self.v = v
        self.gains = mac.combiner_gains(self.snapshot.gbu_channels, v)
        self.budget = mac.interference_budget(self.snapshot.gbu_channels, v, self.radio)
        if self.cfg.fixed_levels > 0:
            self.plan = mac.fixed_level_plan(self.cfg.fixed_levels, self.num_gbus,
                                             self.radio.target_rate, self.cfg.cascade_mode)
        else:
            self.plan = mac.plan_levels(self.budget, self.radio, self.cfg.cascade_mode)
        self.generated = self.tracker.maybe_generate(self.t)
        self._prepared = True
        return self.plan

    def transmit(self, probability: float) -> StepResult:
        if not self._prepared:
            raise RuntimeError("prepare() must be called before transmit()")
        p = float(np.clip(probability, 0.0, 1.0))
        waiting = self.tracker.waiting_ids()
        draws = self.access_rng.random(len(waiting))
        attempts = waiting[draws < p]
        outcome = mac.resolve_slot(self.plan, attempts, self.snapshot, self.v, self.radio,
                                   self.access_rng, literal_eq13=self.cfg.literal_eq13,
                                   budget=self.budget, gains=self.gains)
        self.tracker.apply(outcome.successes)
        shortfall = np.maximum(0.0, self.radio.target_rate - outcome.gbu_rates)
        result = StepResult(
            outcome=outcome,
            mean_age=self.tracker.mean_age(),
            throughput=mac.slot_throughput(outcome),
            penalty=float(self.cfg.penalty * shortfall.sum()),
            probability=p,
            n_levels=outcome.n_levels,
            generated=self.generated,
            ages=self.tracker.ages.copy(),
        )
        self.t += 1
        step_km = self.cfg.mobility_std_m / 1000.0
        self.gbu_pos = ch.step_mobility(self.gbu_pos, self.gbu_rng, step_km, self.radio.d_min_km)
        self.gfu_pos = ch.step_mobility(self.gfu_pos, self.gfu_rng, step_km, self.radio.d_min_km)
        self._draw_snapshot()
        return result

    def baseline_probability(self, policy) -> float:
        return policy.probability(self.plan.total_levels, self.num_gfus, self.tracker.num_served)


def action_to_combiner(action: np.ndarray, num_gbus: int, num_antennas: int) -> np.ndarray:
    """Map ``2 K A`` reals to a column-normalised ``(A, K)`` complex matrix.

    The first half holds real parts, the second imaginary parts, both in
    ``(K, A)`` row-major order; column ``k`` is GBU ``k``'s combiner.
    """
    half = num_gbus * num_antennas
    a = np.asarray(action, dtype=float)
    m = (a[:half] + 1j * a[half:]).reshape(num_gbus, num_antennas).T
    return ch.normalize_columns(m)


def combiner_to_action(v: np.ndarray) -> np.ndarray:
    m = np.asarray(v).T
    return np.concatenate([m.real.ravel(), m.imag.ravel()])
