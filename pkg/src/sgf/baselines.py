"""Reference transmission-probability rules for waiting GFUs."""

from __future__ import annotations

from dataclasses import dataclass


def fixed_tp(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"transmission probability must lie in [0, 1], got {p}")
    return float(p)


def adaptive_tp(num_levels: int, num_gfus: int) -> float:
    """``min(1, L / M)`` with ``L`` available SNR levels and ``M`` GFUs."""
    if num_gfus < 1:
        raise ValueError("num_gfus must be >= 1")
    return min(1.0, max(0, num_levels) / num_gfus)


def state_dependent_tp(num_gfus: int, num_served: int) -> float:
    """``1 / (M - j)`` where ``j`` GFUs already delivered this cycle.

    With everyone served no GFU consults the value, so 0 is returned.
    """
    if not 0 <= num_served <= num_gfus:
        raise ValueError("num_served must lie in [0, num_gfus]")
    if num_served == num_gfus:
        return 0.0
    return 1.0 / (num_gfus - num_served)


@dataclass(frozen=True)
class BaselineKind:
    """Parsed ``--policy`` value.

    ``kind`` is one of ``fixed``, ``adaptive``, ``state-dependent`` or
    ``learned``; ``p`` is used by ``fixed`` and ``checkpoint`` by ``learned``.
    """

    kind: str
    p: float = 0.0
    checkpoint: str | None = None

    @property
    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.p:g}"
        return self.kind

    def probability(self, num_levels: int, num_gfus: int, num_served: int) -> float:
        if self.kind == "fixed":
            return self.p
        if self.kind == "adaptive":
            return adaptive_tp(num_levels, num_gfus)
        if self.kind == "state-dependent":
            return state_dependent_tp(num_gfus, num_served)
        raise ValueError("a learned policy has no closed-form probability")


def parse_policy(text: str) -> BaselineKind:
    name, _, arg = text.strip().partition(":")
    name = name.replace("_", "-").lower()
    if name == "fixed":
        try:
            p = float(arg)
        except ValueError:
            raise ValueError(f"fixed policy needs a probability, got {text!r}") from None
        return BaselineKind("fixed", p=fixed_tp(p))
    if name in ("adaptive", "state-dependent"):
        return BaselineKind(name)
    if name == "learned":
        return BaselineKind("learned", checkpoint=arg or None)
    raise ValueError(f"unknown policy {text!r}")
