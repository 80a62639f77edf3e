"""Exact expected AoI for small contention systems, and the simulator it checks.

The abstract system has ``K'`` GFUs sharing ``N_tot`` always-decodable levels
and a transmission rule that is either a fixed probability or the
state-dependent ``1 / (M - j)`` rule.  Its joint state (slot phase, ages,
waiting flags) is small enough to enumerate, so the per-slot mean age can be
computed exactly by propagating the state distribution.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from ..aoi import AoiTracker
from ..baselines import BaselineKind
from ..mac import match_attempts

MAX_STATES = 100_000


class StateSpaceOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleSpec:
    num_gfus: int
    total_levels: int
    policy: BaselineKind
    generation_period: int = 3
    age_cap: int = 50
    tol: float = 1e-10
    max_cycles: int = 10_000

    def __post_init__(self):
        if not 1 <= self.num_gfus <= 3:
            raise ValueError("the oracle handles 1 to 3 GFUs")
        if self.total_levels < 0:
            raise ValueError("total_levels must be >= 0")
        if self.policy.kind not in ("fixed", "state-dependent"):
            raise ValueError("the oracle supports fixed and state-dependent policies")
        if self.generation_period < 1 or self.age_cap < 2:
            raise ValueError("generation_period must be >= 1 and age_cap >= 2")

    @property
    def label(self) -> str:
        return (f"K'={self.num_gfus} N_tot={self.total_levels} "
                f"{self.policy.label} f={self.generation_period}")

    def probability(self, num_served: int) -> float:
        return self.policy.probability(self.total_levels, self.num_gfus, num_served)


@dataclass
class OracleResult:
    mean_aoi: float
    cycles: int
    num_states: int
    mass_at_cap: float


# ----- exact propagation ---------------------------------------------------------

def _attempt_outcomes(waiting: tuple[int, ...], p: float, total_levels: int,
                      partial_success: bool = False):
    """Every attempt subset with its probability and the GFUs that succeed."""
    w = len(waiting)
    for mask in itertools.product((False, True), repeat=w):
        k = sum(mask)
        prob = p ** k * (1.0 - p) ** (w - k)
        if prob == 0.0:
            continue
        attempted = [g for g, m in zip(waiting, mask) if m]
        if k <= total_levels:
            yield prob, frozenset(attempted)
        elif partial_success:
            # Negative-control rule: a random N_tot of the attempts get through.
            subsets = list(itertools.combinations(attempted, total_levels))
            for sub in subsets:
                yield prob / len(subsets), frozenset(sub)
        else:
            yield prob, frozenset()


def _step(state, spec: OracleSpec, partial_success: bool):
    phase, ages, waiting = state
    m = spec.num_gfus
    if phase == 0:
        ages = (1,) * m
        waiting = (True,) * m
    waiting_ids = tuple(i for i in range(m) if waiting[i])
    p = spec.probability(m - len(waiting_ids))
    nxt_phase = (phase + 1) % spec.generation_period
    for prob, ok in _attempt_outcomes(waiting_ids, p, spec.total_levels, partial_success):
        new_ages = list(ages)
        new_wait = list(waiting)
        for i in waiting_ids:
            if i in ok:
                new_ages[i] = 1
                new_wait[i] = False
            else:
                new_ages[i] = min(new_ages[i] + 1, spec.age_cap)
        yield prob, (nxt_phase, tuple(new_ages), tuple(new_wait))


def markov_oracle_expected_aoi(spec: OracleSpec, partial_success: bool = False) -> OracleResult:
    """Stationary per-slot mean AoI, computed by exact distribution propagation.

    The distribution is pushed forward one generation cycle at a time until
    the total-variation change between consecutive cycle starts drops below
    ``spec.tol``; the result averages the expected mean age over the slots of
    the last cycle.
    """
    m = spec.num_gfus
    dist = {(0, (1,) * m, (True,) * m): 1.0}
    seen: set = set(dist)
    cap_mass = 0.0
    for cycle in range(1, spec.max_cycles + 1):
        start = dist
        slot_means = []
        for _ in range(spec.generation_period):
            nxt: dict = {}
            for state, mass in dist.items():
                for prob, s2 in _step(state, spec, partial_success):
                    nxt[s2] = nxt.get(s2, 0.0) + mass * prob
            dist = nxt
            seen.update(dist)
            if len(seen) > MAX_STATES:
                raise StateSpaceOverflow(f"more than {MAX_STATES} states for {spec.label}")
            slot_means.append(sum(mass * sum(ages) / m for (_, ages, _), mass in dist.items()))
            cap_mass = max(cap_mass, sum(mass for (_, ages, _), mass in dist.items()
                                         if max(ages) >= spec.age_cap))
        keys = set(start) | set(dist)
        tv = 0.5 * sum(abs(start.get(k, 0.0) - dist.get(k, 0.0)) for k in keys)
        if tv < spec.tol:
            return OracleResult(float(np.mean(slot_means)), cycles=cycle,
                                num_states=len(seen), mass_at_cap=cap_mass)
    raise RuntimeError(f"oracle did not converge within {spec.max_cycles} cycles")


def single_gfu_closed_form(p: float, generation_period: int) -> float:
    """Per-slot mean AoI of one GFU that attempts with probability ``p``
    against at least one level."""
    f = generation_period
    return 1.0 + sum((i + 1) * (1.0 - p) ** (i + 1) for i in range(f)) / f


# ----- simulation ------------------------------------------------------------------

@dataclass
class SimEstimate:
    mean: float
    stderr: float


def simulate_aoi(spec: OracleSpec, slots: int, rng: np.random.Generator,
                 partial_success: bool = False) -> SimEstimate:
    """Monte-Carlo per-slot mean AoI using the simulator's tracker and
    contention rule (every matched level is decodable).

    The standard error comes from batch means over blocks of whole
    generation cycles, which are independent under synchronized generation.
    """
    tracker = AoiTracker(spec.num_gfus, spec.generation_period)
    per_slot = np.empty(slots)
    uniforms = rng.random((slots, spec.num_gfus))
    for t in range(slots):
        tracker.maybe_generate(t)
        waiting = tracker.waiting_ids()
        p = spec.probability(spec.num_gfus - len(waiting))
        attempts = waiting[uniforms[t, :len(waiting)] < p]
        picks = match_attempts(len(attempts), spec.total_levels, rng)
        if picks is not None:
            successes = attempts
        elif partial_success:
            successes = rng.choice(attempts, size=spec.total_levels, replace=False)
        else:
            successes = attempts[:0]
        tracker.apply(successes)
        per_slot[t] = tracker.ages.sum()
    per_slot /= spec.num_gfus
    block = spec.generation_period * max(1, 1000 // spec.generation_period)
    n_blocks = slots // block
    if n_blocks >= 2:
        means = per_slot[:n_blocks * block].reshape(n_blocks, block).mean(axis=1)
        stderr = float(means.std(ddof=1) / np.sqrt(n_blocks))
    else:
        stderr = float("nan")
    return SimEstimate(float(per_slot.mean()), stderr)


def simulate_mean_aoi(spec: OracleSpec, slots: int, rng: np.random.Generator,
                      partial_success: bool = False) -> float:
    return simulate_aoi(spec, slots, rng, partial_success).mean


@dataclass
class Comparison:
    spec: OracleSpec
    oracle: float
    simulated: float
    stderr: float
    slots: int
    seconds: float

    @property
    def rel_error(self) -> float:
        return abs(self.simulated - self.oracle) / self.oracle

    def within_sigma(self, k: float = 3.0) -> bool:
        """Deviation inside ``k`` standard errors (exact match when the
        simulation has no spread)."""
        dev = abs(self.simulated - self.oracle)
        return dev <= k * self.stderr or dev < 1e-12

    def csv_row(self) -> dict:
        return {"spec": self.spec.label, "oracle": self.oracle, "simulated": self.simulated,
                "rel_error": self.rel_error, "stderr": self.stderr,
                "within_3sigma": int(self.within_sigma(3.0)), "slots": self.slots,
                "seconds": self.seconds}


def compare_sim_to_oracle(spec: OracleSpec, slots: int = 1_000_000, seed: int = 0,
                          partial_success_sim: bool = False) -> Comparison:
    start = time.perf_counter()
    exact = markov_oracle_expected_aoi(spec).mean_aoi
    sim = simulate_aoi(spec, slots, np.random.default_rng(seed), partial_success_sim)
    return Comparison(spec, exact, sim.mean, sim.stderr, slots, time.perf_counter() - start)


def oracle_suite(fixed_p: float = 0.5, generation_period: int = 3) -> list[OracleSpec]:
    """K' in {1, 2}, N_tot in {1, 2}, fixed and state-dependent rules."""
    policies = [BaselineKind("fixed", p=fixed_p), BaselineKind("state-dependent")]
    return [OracleSpec(m, n, pol, generation_period)
            for m in (1, 2) for n in (1, 2) for pol in policies]

