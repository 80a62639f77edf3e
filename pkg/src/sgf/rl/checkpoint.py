"""Versioned on-disk container for trained agents.

A checkpoint is an ``.npz`` archive.  Every weight and optimiser moment is
stored as a float64 array under ``<agent>/<name>``; a JSON document under
``meta`` carries the format version, one architecture descriptor per agent,
the config digest, optimiser step counters and the agents' RNG states.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mlp import MlpParams
from .ppo import ActorParams, PpoAgent

FORMAT_VERSION = 1
AGENT_NAMES = ("lower", "upper")


class CheckpointError(ValueError):
    """Unreadable checkpoint or one that does not fit the requested agents."""


def architecture(agent: PpoAgent) -> dict:
    return {
        "state_dim": agent.state_dim,
        "action_dim": agent.action_dim,
        "actor_sizes": list(agent.actor.net.sizes),
        "critic_sizes": list(agent.critic.sizes),
        "activation": "tanh",
        "squash": [agent.squash.low, agent.squash.high],
    }


def _put_mlp(arrays: dict, prefix: str, params: MlpParams) -> None:
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"{prefix}/W{i}"] = np.asarray(w, dtype=np.float64)
        arrays[f"{prefix}/b{i}"] = np.asarray(b, dtype=np.float64)


def _get_mlp(data, prefix: str, sizes) -> MlpParams:
    n = len(sizes) - 1
    return MlpParams([data[f"{prefix}/W{i}"].copy() for i in range(n)],
                     [data[f"{prefix}/b{i}"].copy() for i in range(n)])


def save_checkpoint(path, agents: dict[str, PpoAgent], config_digest: str = "",
                    extra: dict | None = None) -> Path:
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {}
    meta = {"format_version": FORMAT_VERSION, "config_digest": config_digest,
            "agents": {}, "extra": extra or {}}
    for name, agent in agents.items():
        if name not in AGENT_NAMES:
            raise CheckpointError(f"unknown agent name {name!r}")
        _put_mlp(arrays, f"{name}/actor", agent.actor.net)
        arrays[f"{name}/log_std"] = agent.actor.log_std.astype(np.float64)
        _put_mlp(arrays, f"{name}/critic", agent.critic)
        for opt_name, opt in (("actor_opt", agent.actor_opt), ("critic_opt", agent.critic_opt)):
            arrays[f"{name}/{opt_name}/m"] = opt.m
            arrays[f"{name}/{opt_name}/v"] = opt.v
        meta["agents"][name] = {
            "architecture": architecture(agent),
            "actor_opt_t": agent.actor_opt.t,
            "critic_opt_t": agent.critic_opt.t,
            "updates": agent.updates,
            "rng_state": agent.rng.bit_generator.state,
        }
    arrays["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def read_meta(path) -> dict:
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format {meta.get('format_version')} is not supported "
            f"(expected {FORMAT_VERSION})")
    return meta


def load_into(path, agents: dict[str, PpoAgent]) -> dict:
    """Overwrite the given agents' state from ``path``.

    Each agent's architecture must match the stored descriptor exactly.
    Returns the checkpoint metadata.
    """
    meta = read_meta(path)
    with np.load(path, allow_pickle=False) as data:
        for name, agent in agents.items():
            stored = meta["agents"].get(name)
            if stored is None:
                raise CheckpointError(f"checkpoint {path} has no {name!r} agent")
            if stored["architecture"] != json.loads(json.dumps(architecture(agent))):
                raise CheckpointError(
                    f"architecture mismatch for {name!r} agent: checkpoint has "
                    f"{stored['architecture']}, expected {architecture(agent)}")
            arch = stored["architecture"]
            agent.actor = ActorParams(_get_mlp(data, f"{name}/actor", arch["actor_sizes"]),
                                      data[f"{name}/log_std"].copy())
            agent.critic = _get_mlp(data, f"{name}/critic", arch["critic_sizes"])
            agent.actor_opt.m = data[f"{name}/actor_opt/m"].copy()
            agent.actor_opt.v = data[f"{name}/actor_opt/v"].copy()
            agent.actor_opt.t = int(stored["actor_opt_t"])
            agent.critic_opt.m = data[f"{name}/critic_opt/m"].copy()
            agent.critic_opt.v = data[f"{name}/critic_opt/v"].copy()
            agent.critic_opt.t = int(stored["critic_opt_t"])
            agent.updates = int(stored["updates"])
            agent.rng.bit_generator.state = stored["rng_state"]
    return meta
