"""Small fully connected network with tanh hidden layers and manual backprop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MlpParams:
    """Weights ``W[i]`` of shape ``(fan_in, fan_out)`` and biases ``b[i]``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, vec: np.ndarray) -> None:
        i = 0
        for a in self.arrays():
            a[...] = vec[i:i + a.size].reshape(a.shape)
            i += a.size

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_mlp(sizes, rng: np.random.Generator, out_scale: float = 1.0) -> MlpParams:
    """Glorot-uniform hidden layers; the last layer is additionally scaled."""
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_in, n_out))
        if i == len(sizes) - 2:
            w *= out_scale
        weights.append(w)
        biases.append(np.zeros(n_out))
    return MlpParams(weights, biases)


def zero_mlp(sizes) -> MlpParams:
    return MlpParams([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                     [np.zeros(b) for b in sizes[1:]])


def forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward pass; ``x`` is ``(n, in)``.  Returns output and the
    per-layer inputs needed by :func:`backward`."""
    h = np.atleast_2d(x)
    cache = [h]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
        cache.append(h)
    return h, cache


def backward(params: MlpParams, cache: list[np.ndarray], grad_out: np.ndarray) -> MlpParams:
    """Gradient of ``sum(grad_out * output)`` with respect to every parameter."""
    g = np.atleast_2d(grad_out)
    gw, gb = [None] * len(params.weights), [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = cache[i].T @ g
        gb[i] = g.sum(axis=0)
        if i > 0:
            # cache[i] holds tanh activations of layer i-1
            g = (g @ params.weights[i].T) * (1.0 - cache[i] ** 2)
    return MlpParams(gw, gb)
