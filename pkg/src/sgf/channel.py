"""User geometry, mobility and Rician-faded multi-antenna channels.

Positions are in km with the BS at the origin.  Channels are row vectors of
length ``num_antennas``; the received component of user ``u`` on combiner
``v`` is ``h_u @ v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RadioConfig


@dataclass(frozen=True)
class UserPosition:
    x: float
    y: float

    @property
    def distance(self) -> float:
        return float(np.hypot(self.x, self.y))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.y, self.x))


@dataclass
class ChannelSnapshot:
    """Channels of every user for one slot.

    ``gbu_channels`` has shape ``(K, A)`` and ``gfu_channels`` ``(K', A)``.
    """

    gbu_channels: np.ndarray
    gfu_channels: np.ndarray
    slot_index: int = 0
    gbu_positions: np.ndarray | None = None
    gfu_positions: np.ndarray | None = None

    @property
    def num_antennas(self) -> int:
        return self.gbu_channels.shape[1]


def _redraw_close(xy: np.ndarray, std_km: float, d_min_km: float,
                  rng: np.random.Generator) -> np.ndarray:
    bad = np.hypot(xy[:, 0], xy[:, 1]) < d_min_km
    while bad.any():
        xy[bad] = rng.normal(0.0, std_km, size=(int(bad.sum()), 2))
        bad = np.hypot(xy[:, 0], xy[:, 1]) < d_min_km
    return xy


def place_users_array(count: int, std_km: float, rng: np.random.Generator,
                      d_min_km: float = 0.05) -> np.ndarray:
    """Vectorised form of :func:`place_users`; returns an ``(count, 2)`` array."""
    if std_km <= 0:
        raise ValueError("std_km must be positive")
    xy = rng.normal(0.0, std_km, size=(count, 2))
    return _redraw_close(xy, std_km, d_min_km, rng)


def place_users(count: int, std_km: float, rng: np.random.Generator,
                d_min_km: float = 0.05) -> list[UserPosition]:
    """Draw ``count`` positions with i.i.d. zero-mean normal coordinates.

    Points closer than ``d_min_km`` to the BS are redrawn from the same law.
    """
    xy = place_users_array(count, std_km, rng, d_min_km)
    return [UserPosition(float(x), float(y)) for x, y in xy]


def step_mobility(positions: np.ndarray, rng: np.random.Generator,
                  step_std_km: float = 0.05, d_min_km: float = 0.05) -> np.ndarray:
    """Random-walk every user by an independent normal step.

    A step that lands inside ``d_min_km`` is redrawn from the user's previous
    position, so the geometry invariant holds after every slot.
    """
    positions = np.asarray(positions, dtype=float)
    if step_std_km == 0:
        return positions.copy()
    moved = positions + rng.normal(0.0, step_std_km, size=positions.shape)
    bad = np.hypot(moved[:, 0], moved[:, 1]) < d_min_km
    while bad.any():
        moved[bad] = positions[bad] + rng.normal(0.0, step_std_km, size=(int(bad.sum()), 2))
        bad = np.hypot(moved[:, 0], moved[:, 1]) < d_min_km
    return moved


def path_gain(distance_km, radio: RadioConfig):
    """Log-distance large-scale gain ``g0 * (d / d0) ** -alpha`` (linear)."""
    d = np.maximum(np.asarray(distance_km, dtype=float), radio.d_min_km)
    return radio.pathloss_ref_gain * (d / radio.pathloss_ref_km) ** (-radio.pathloss_alpha)


def steering_vector(angle, num_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response; unit-modulus entries.

    ``angle`` may be an array, in which case rows are stacked.
    """
    n = np.arange(num_antennas)
    phase = np.pi * np.multiply.outer(np.sin(angle), n)
    return np.exp(1j * phase)


def sample_channels(positions: np.ndarray, radio: RadioConfig,
                    rng: np.random.Generator) -> np.ndarray:
    """Draw one Rician channel row per position; shape ``(len(positions), A)``."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    count, a = positions.shape[0], radio.num_antennas
    r = radio.rician_factor
    los = steering_vector(np.arctan2(positions[:, 1], positions[:, 0]), a)
    nlos = (rng.standard_normal((count, a)) + 1j * rng.standard_normal((count, a))) / np.sqrt(2.0)
    fading = np.sqrt(r / (r + 1.0)) * los + np.sqrt(1.0 / (r + 1.0)) * nlos
    gain = path_gain(np.hypot(positions[:, 0], positions[:, 1]), radio)
    return np.sqrt(gain)[:, None] * fading


def sample_channel(position, radio: RadioConfig, rng: np.random.Generator) -> np.ndarray:
    """Channel vector of a single user at ``position``."""
    if isinstance(position, UserPosition):
        position = (position.x, position.y)
    return sample_channels(np.asarray(position, dtype=float), radio, rng)[0]


def sample_snapshot(gbu_positions: np.ndarray, gfu_positions: np.ndarray,
                    radio: RadioConfig, rng: np.random.Generator,
                    slot_index: int = 0) -> ChannelSnapshot:
    both = np.vstack([gbu_positions, gfu_positions])
    h = sample_channels(both, radio, rng)
    k = len(gbu_positions)
    return ChannelSnapshot(h[:k], h[k:], slot_index, gbu_positions, gfu_positions)


def zero_forcing_combiner(gbu_channels: np.ndarray) -> np.ndarray:
    """Unit-norm ZF columns: ``h_k @ v_j = 0`` for ``j != k``.

    Requires ``K <= A``; returns an ``(A, K)`` matrix.
    """
    h = np.asarray(gbu_channels)
    k, a = h.shape
    if k > a:
        raise ValueError(f"zero forcing needs K <= A (got K={k}, A={a})")
    # Right inverse H^H (H H^H)^-1 via a Gram solve; much cheaper than an SVD
    # for the small K x A matrices used here.
    v = np.linalg.solve(h @ h.conj().T, h).conj().T
    return v / np.linalg.norm(v, axis=0, keepdims=True)


def matched_filter_combiner(gbu_channels: np.ndarray) -> np.ndarray:
    """Maximum-ratio columns ``v_k = conj(h_k) / |h_k|``."""
    h = np.asarray(gbu_channels)
    v = h.conj().T
    return v / np.linalg.norm(v, axis=0, keepdims=True)


def normalize_columns(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=0, keepdims=True)
    # An all-zero column carries no direction; fall back to the first antenna.
    zero = norms[0] < 1e-300
    if zero.any():
        v = v.copy()
        v[:, zero] = 0.0
        v[0, zero] = 1.0
        norms = np.linalg.norm(v, axis=0, keepdims=True)
    return v / norms
