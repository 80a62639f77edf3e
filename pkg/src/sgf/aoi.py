"""Age of information of grant-free users under Generate-at-Request.

Every ``f`` slots all GFUs generate a fresh update and become *waiting*.  A
waiting GFU keeps contending until one attempt succeeds; it then stays silent
until the next generation.  Ages follow these rules:

* generation: the new update starts at age 1 and the GFU becomes waiting;
* waiting GFU, success: age drops to 1 and the GFU is served;
* waiting GFU, failure: age grows by one slot;
* served GFU: untouched until the next generation.

The tracked age is therefore the age of the freshest *generated* update as
seen at the receiver, and a GFU that never gets through traces a sawtooth of
period ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class GfuAoiState:
    age: int = 1
    generation_time: int = 0
    waiting: bool = True


@dataclass(frozen=True)
class GarConfig:
    generation_period: int = 3
    horizon: int = 100

    def __post_init__(self):
        if self.generation_period < 1 or self.horizon < 1:
            raise ValueError("generation_period and horizon must be >= 1")


def is_generation_slot(t: int, generation_period: int) -> bool:
    return t % generation_period == 0


def maybe_generate(t: int, states: list[GfuAoiState], gar: GarConfig) -> list[GfuAoiState]:
    if t < 0:
        raise ValueError("slot index must be non-negative")
    if not is_generation_slot(t, gar.generation_period):
        return list(states)
    return [GfuAoiState(age=1, generation_time=t, waiting=True) for _ in states]


def update_aoi(state: GfuAoiState, succeeded: bool) -> GfuAoiState:
    if succeeded:
        return replace(state, age=1, waiting=False)
    return replace(state, age=state.age + 1)


def average_aoi(states) -> float:
    ages = [s.age for s in states] if states and isinstance(states[0], GfuAoiState) else states
    if len(ages) == 0:
        raise ValueError("average AoI of an empty population")
    return float(np.mean(ages))


class AoiTracker:
    """Array-backed tracker for a whole GFU population (the simulation path)."""

    def __init__(self, num_gfus: int, generation_period: int):
        if num_gfus < 1:
            raise ValueError("need at least one GFU")
        if generation_period < 1:
            raise ValueError("generation_period must be >= 1")
        self.num_gfus = num_gfus
        self.generation_period = generation_period
        self.reset()

    def reset(self) -> None:
        self.ages = np.ones(self.num_gfus, dtype=np.int64)
        self.generation_time = np.zeros(self.num_gfus, dtype=np.int64)
        self.waiting = np.ones(self.num_gfus, dtype=bool)

    def maybe_generate(self, t: int) -> bool:
        if t % self.generation_period:
            return False
        self.ages[:] = 1
        self.generation_time[:] = t
        self.waiting[:] = True
        return True

    def waiting_ids(self) -> np.ndarray:
        return np.flatnonzero(self.waiting)

    @property
    def num_waiting(self) -> int:
        return int(self.waiting.sum())

    @property
    def num_served(self) -> int:
        return self.num_gfus - self.num_waiting

    def apply(self, successes) -> None:
        """Advance one slot given the set of GFUs that got through."""
        ok = np.zeros(self.num_gfus, dtype=bool)
        ok[np.fromiter(successes, dtype=np.intp)] = True
        if (ok & ~self.waiting).any():
            raise ValueError("a served GFU cannot succeed before its next generation")
        failing = self.waiting & ~ok
        self.ages[failing] += 1
        self.ages[ok] = 1
        self.waiting[ok] = False

    def states(self) -> list[GfuAoiState]:
        return [GfuAoiState(int(a), int(g), bool(w))
                for a, g, w in zip(self.ages, self.generation_time, self.waiting)]

    def mean_age(self) -> float:
        return float(self.ages.mean())

    def csv_row(self, slot: int) -> dict:
        return {
            "slot": slot,
            "mean_age": self.mean_age(),
            "max_age": int(self.ages.max()),
            "n_waiting": self.num_waiting,
        }


AOI_CSV_FIELDS = ("slot", "mean_age", "max_age", "n_waiting")
