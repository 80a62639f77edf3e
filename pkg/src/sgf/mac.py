"""Per-slot semi-grant-free mechanics.

GBU ``k`` is detected with unit-norm combiner ``V[:, k]``.  Whatever
interference it can absorb beyond its target-rate requirement and the leakage
from other GBUs becomes a budget for grant-free users, which the BS splits into
a cascade of receive-SNR levels.  Waiting GFUs contend for those levels; a
matched GFU succeeds if it can reach its level's SNR within its power limit.

All powers are linear (watts), SNR levels are dimensionless receive SNRs
relative to the noise power ``n0``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSnapshot
from .config import RadioConfig

CASCADE_MODES = ("paper-literal", "full-sum")

# Below this target rate the tolerable interference is treated as unbounded.
RATE_EPS = 1e-9
MAX_LEVELS = 64


@dataclass
class InterferenceBudget:
    per_gbu_max: np.ndarray
    per_gbu_gb: np.ndarray
    per_gbu_gf: np.ndarray


@dataclass
class SnrLevelPlan:
    """Per-GBU SNR levels, each row sorted from the largest level down."""

    per_gbu_levels: list[np.ndarray]
    cascade_mode: str = "paper-literal"

    @property
    def total_levels(self) -> int:
        return sum(len(row) for row in self.per_gbu_levels)

    @property
    def levels_per_gbu(self) -> list[int]:
        return [len(row) for row in self.per_gbu_levels]

    def slots(self) -> list[tuple[int, int]]:
        """Every ``(gbu, level_index)`` pair in a fixed order."""
        return [(k, n) for k, row in enumerate(self.per_gbu_levels) for n in range(len(row))]


@dataclass
class SlotOutcome:
    attempts: frozenset
    admissions: dict
    successes: frozenset
    collision_flag: bool
    gbu_rates: np.ndarray
    gfu_rates: np.ndarray
    failed_sic: frozenset = field(default_factory=frozenset)
    collided: frozenset = field(default_factory=frozenset)
    n_levels: int = 0
    gf_interference: np.ndarray | None = None

    @property
    def throughput(self) -> float:
        return slot_throughput(self)

    def csv_row(self, slot: int) -> dict:
        return {
            "slot": slot,
            "n_levels": self.n_levels,
            "n_attempts": len(self.attempts),
            "n_success": len(self.successes),
            "collision": int(self.collision_flag),
            "sum_gbu_rate": float(np.sum(self.gbu_rates)),
            "sum_gfu_rate": float(np.sum(self.gfu_rates)),
        }


SLOT_CSV_FIELDS = ("slot", "n_levels", "n_attempts", "n_success", "collision",
                   "sum_gbu_rate", "sum_gfu_rate")


# ----- interference tolerance ------------------------------------------------

def combiner_gains(gbu_channels: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``G[k, j] = |h_k v_j|^2`` for all GBU/combiner pairs."""
    return np.abs(np.asarray(gbu_channels) @ np.asarray(v)) ** 2


def _off_diagonal_sum(g: np.ndarray) -> np.ndarray:
    """Row sums without the diagonal, summed directly so that tiny leakage is
    not lost to cancellation against the own-signal term."""
    return np.where(np.eye(len(g), g.shape[1], dtype=bool), 0.0, g).sum(axis=1)


def _channels(snapshot) -> np.ndarray:
    return snapshot.gbu_channels if isinstance(snapshot, ChannelSnapshot) else np.asarray(snapshot)


def max_tolerable_interference(gbu_index: int, snapshot, v: np.ndarray,
                               radio: RadioConfig) -> float:
    """Largest interference GBU ``k`` can take and still reach its target rate.

    Negative when the GBU misses the target even without interference.
    """
    if radio.target_rate < RATE_EPS:
        return math.inf
    h = _channels(snapshot)[gbu_index]
    signal = radio.gbu_power * abs(h @ v[:, gbu_index]) ** 2
    return signal / radio.sinr_threshold - radio.noise_power


def gb_interference(gbu_index: int, snapshot, v: np.ndarray, radio: RadioConfig) -> float:
    """Leakage ``sum_{j != k} P_j |h_k v_j|^2`` seen by GBU ``k``."""
    h = _channels(snapshot)[gbu_index]
    leak = np.abs(h @ v) ** 2
    return float(radio.gbu_power * (np.delete(leak, gbu_index).sum()))


def gf_budget(i_max: float, i_gb: float) -> float:
    return max(0.0, i_max - i_gb)


def interference_budget(snapshot, v: np.ndarray, radio: RadioConfig) -> InterferenceBudget:
    g = combiner_gains(_channels(snapshot), v)
    p = radio.gbu_power
    own = np.diag(g)
    i_gb = p * _off_diagonal_sum(g)
    if radio.target_rate < RATE_EPS:
        i_max = np.full(len(own), np.inf)
    else:
        i_max = p * own / radio.sinr_threshold - radio.noise_power
    return InterferenceBudget(i_max, i_gb, np.maximum(0.0, i_max - i_gb))


# ----- SNR level cascade -----------------------------------------------------

@lru_cache(maxsize=64)
def _ladder(eps: float, cascade_mode: str, max_levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Levels from the lowest upwards and their running sums."""
    levels, sums = [], []
    total = prev = 0.0
    for i in range(max_levels):
        if cascade_mode == "paper-literal":
            nxt = eps * (1.0 + prev) if i else eps
        else:
            nxt = eps * (1.0 + total)
        total += nxt
        prev = nxt
        levels.append(nxt)
        sums.append(total)
    return np.array(levels), np.array(sums)


def configure_snr_levels(target_rate: float, gf_budget_linear: float, radio_or_noise,
                         cascade_mode: str = "paper-literal",
                         max_levels: int = MAX_LEVELS) -> np.ndarray:
    """Largest cascade of SNR levels whose sum fits the GF budget.

    Levels are built from the lowest one (``2**R - 1``) upwards, so the first
    ``N`` levels do not depend on how many more would fit.  Returns them sorted
    largest first; empty when not even the lowest level fits.
    """
    if cascade_mode not in CASCADE_MODES:
        raise ValueError(f"unknown cascade mode {cascade_mode!r}")
    noise = getattr(radio_or_noise, "noise_power", radio_or_noise)
    eps = 2.0 ** target_rate - 1.0
    if eps <= 0.0:
        return np.empty(0)
    levels, sums = _ladder(float(eps), cascade_mode, int(max_levels))
    n = int(np.searchsorted(sums, gf_budget_linear / noise, side="right"))
    return levels[:n][::-1].copy()


def cascade_levels(target_rate: float, count: int,
                   cascade_mode: str = "paper-literal") -> np.ndarray:
    """The ``count`` lowest cascade levels, largest first."""
    if count < 0 or count > MAX_LEVELS:
        raise ValueError(f"level count must lie in [0, {MAX_LEVELS}]")
    if cascade_mode not in CASCADE_MODES:
        raise ValueError(f"unknown cascade mode {cascade_mode!r}")
    eps = 2.0 ** target_rate - 1.0
    if eps <= 0.0 or count == 0:
        return np.empty(0)
    return _ladder(float(eps), cascade_mode, MAX_LEVELS)[0][:count][::-1].copy()


def fixed_level_plan(total_levels: int, num_gbus: int, target_rate: float,
                     cascade_mode: str = "paper-literal") -> SnrLevelPlan:
    """An exogenous supply of ``total_levels`` levels dealt round-robin over
    the GBUs, independent of their interference budgets."""
    counts = [total_levels // num_gbus + (k < total_levels % num_gbus) for k in range(num_gbus)]
    return SnrLevelPlan([cascade_levels(target_rate, c, cascade_mode) for c in counts],
                        cascade_mode)


def plan_levels(budget: InterferenceBudget, radio: RadioConfig,
                cascade_mode: str = "paper-literal") -> SnrLevelPlan:
    rows = [configure_snr_levels(radio.target_rate, b, radio, cascade_mode)
            for b in budget.per_gbu_gf]
    return SnrLevelPlan(rows, cascade_mode)


def sic_feasible(level_snr: float, gfu_channel: np.ndarray, v_k: np.ndarray,
                 radio: RadioConfig) -> bool:
    """Whether a GFU can scale its power to land exactly on ``level_snr``.

    The required transmit power ``level * n0 / |h v|^2`` must not exceed the
    GFU's maximum, ``gfu_max_snr * n0``.
    """
    gain = abs(np.asarray(gfu_channel) @ np.asarray(v_k)) ** 2
    return _reachable(level_snr, gain, radio)


def _reachable(level_snr: float, gain: float, radio: RadioConfig) -> bool:
    if gain <= 0.0:
        return False
    return bool(level_snr * radio.noise_power / gain <= radio.gfu_max_snr * radio.noise_power)


# ----- rates -----------------------------------------------------------------

def gbu_rate(gbu_index: int, realized_gf_interference: float, snapshot, v: np.ndarray,
             radio: RadioConfig) -> float:
    h = _channels(snapshot)[gbu_index]
    leak = np.abs(h @ v) ** 2
    signal = radio.gbu_power * leak[gbu_index]
    i_gb = radio.gbu_power * np.delete(leak, gbu_index).sum()
    return float(np.log2(1.0 + signal / (i_gb + realized_gf_interference + radio.noise_power)))


def gfu_rate(level_index: int, plan_row, admitted=None) -> float:
    """Rate of the GFU on ``plan_row[level_index]``.

    Levels are decoded largest first, so the GFU sees the admitted levels
    below it as interference.  ``admitted`` defaults to every level.
    """
    row = np.asarray(plan_row, dtype=float)
    if admitted is None:
        later = row[level_index + 1:].sum()
    else:
        later = sum(row[m] for m in admitted if m > level_index)
    return float(np.log2(1.0 + row[level_index] / (1.0 + later)))


def slot_throughput(outcome: SlotOutcome) -> float:
    return float(np.sum(outcome.gbu_rates) + np.sum(outcome.gfu_rates))


# ----- contention ------------------------------------------------------------

def match_attempts(num_attempts: int, num_levels: int,
                   rng: np.random.Generator) -> np.ndarray | None:
    """Level index for each attempt, or ``None`` when they collide.

    More attempts than levels is a collision.  Otherwise attempts take
    distinct levels uniformly at random.
    """
    if num_attempts > num_levels:
        return None
    if num_attempts == 0:
        return np.empty(0, dtype=np.int64)
    return rng.permutation(num_levels)[:num_attempts]


def resolve_slot(plan: SnrLevelPlan, attempting_gfus, snapshot: ChannelSnapshot,
                 v: np.ndarray, radio: RadioConfig, rng: np.random.Generator,
                 literal_eq13: bool = False, budget: InterferenceBudget | None = None,
                 gains: np.ndarray | None = None) -> SlotOutcome:
    """Contention, SIC check and rate accounting for one slot.

    More attempts than levels collide and nobody gets through.  Otherwise the
    attempts are matched to distinct levels uniformly at random and each
    matched GFU succeeds when its level is SIC-feasible.

    ``gains`` (``|h_k v_j|^2``) and ``budget`` may be passed in when the caller
    has already computed them for the same ``v``.
    """
    attempts = [int(a) for a in attempting_gfus]
    num_gbus = len(plan.per_gbu_levels)
    num_gfus = len(snapshot.gfu_channels)
    slots = plan.slots()
    n_levels = len(slots)

    admissions: dict[int, tuple[int, int]] = {}
    successes: list[int] = []
    failed: list[int] = []
    collided: frozenset = frozenset()
    picks = match_attempts(len(attempts), n_levels, rng)
    collision = picks is None
    if collision:
        collided = frozenset(attempts)
    elif attempts:
        gfu_gain = np.abs(snapshot.gfu_channels[attempts] @ v) ** 2
        for i, (gfu, pick) in enumerate(zip(attempts, picks)):
            k, n = slots[pick]
            admissions[gfu] = (k, n)
            level = plan.per_gbu_levels[k][n]
            if _reachable(level, gfu_gain[i, k], radio):
                successes.append(gfu)
            else:
                failed.append(gfu)

    gfu_rates = np.zeros(num_gfus)
    served_levels: list[list[int]] = [[] for _ in range(num_gbus)]
    for gfu in successes:
        k, n = admissions[gfu]
        served_levels[k].append(n)
    realized = np.zeros(num_gbus)
    for gfu in successes:
        k, n = admissions[gfu]
        gfu_rates[gfu] = gfu_rate(n, plan.per_gbu_levels[k], served_levels[k])
    for k in range(num_gbus):
        if served_levels[k]:
            realized[k] = radio.noise_power * plan.per_gbu_levels[k][served_levels[k]].sum()

    if gains is None:
        gains = combiner_gains(snapshot.gbu_channels, v)
    p = radio.gbu_power
    own = np.diag(gains)
    i_gb = p * _off_diagonal_sum(gains)
    if literal_eq13:
        if budget is None:
            budget = interference_budget(snapshot, v, radio)
        i_gf = np.where(np.isfinite(budget.per_gbu_gf), budget.per_gbu_gf, 0.0)
    else:
        i_gf = realized
    gbu_rates = np.log2(1.0 + p * own / (i_gb + i_gf + radio.noise_power))

    return SlotOutcome(
        attempts=frozenset(attempts),
        admissions=admissions,
        successes=frozenset(successes),
        collision_flag=collision,
        gbu_rates=gbu_rates,
        gfu_rates=gfu_rates,
        failed_sic=frozenset(failed),
        collided=collided,
        n_levels=n_levels,
        gf_interference=realized,
    )
