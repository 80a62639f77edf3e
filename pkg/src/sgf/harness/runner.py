"""Experiment modes and their on-disk artifacts.

Every run writes into ``<output_dir>/<run-id>/``::

    config.echo      resolved configuration, one key=value per line
    metrics.csv      per-episode training log (training modes)
    slots.csv        per-slot log of the evaluation pass
    checkpoints/     trained agents
    plots/           SVG charts

plus a mode-specific summary CSV (``eval.csv``, ``sweep.csv``, ``oracle.csv``
or ``scale.csv``).  Nothing time-dependent is written, so the same config and
seed reproduce the same files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import BaselineKind, parse_policy
from ..config import ConfigError, ExperimentConfig
from ..rl import checkpoint as ckpt
from ..rl.ppo import PpoAgent
from ..rl.train import (METRIC_FIELDS, EpisodeMetrics, agent_rngs, evaluate,
                        make_lower_agent, make_upper_agent, train_hierarchical,
                        train_lower)
from . import oracle, plots

MODES = ("train-lower", "train-hier", "eval", "sweep", "oracle", "scale")

SLOT_FIELDS = ("seed", "episode", "slot", "n_levels", "n_attempts", "n_success",
               "collision", "sum_gbu_rate", "sum_gfu_rate", "mean_age", "probability")
EVAL_FIELDS = ("config", "seed", "mean_aoi", "throughput")
SCALE_FIELDS = ("num_gfus", "throughput", "mean_aoi", "gain_vs_first",
                "zf_adaptive_throughput", "train_final_aoi")


@dataclass
class RunResult:
    mode: str
    directory: Path
    summary: dict = field(default_factory=dict)


def run_id(mode: str, cfg: ExperimentConfig) -> str:
    return f"{mode}-s{cfg.seed}-{cfg.digest()[:8]}"


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path: Path, fields, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return path


class _MetricWriter:
    """Streams per-episode metrics to CSV as training progresses."""

    def __init__(self, path: Path):
        self.fh = open(path, "w", newline="")
        self.writer = csv.DictWriter(self.fh, fieldnames=list(METRIC_FIELDS),
                                     lineterminator="\n")
        self.writer.writeheader()

    def __call__(self, m: EpisodeMetrics) -> None:
        self.writer.writerow({k: _fmt(v) for k, v in m.csv_row().items()})

    def close(self) -> None:
        self.fh.close()


def prepare_run_dir(mode: str, cfg: ExperimentConfig) -> Path:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    directory = Path(cfg.output_dir) / run_id(mode, cfg)
    try:
        (directory / "checkpoints").mkdir(parents=True, exist_ok=True)
        (directory / "plots").mkdir(exist_ok=True)
        (directory / "config.echo").write_text(cfg.to_text())
    except OSError as exc:
        raise ConfigError(f"cannot write to {directory}: {exc}") from exc
    return directory


def run(mode: str, cfg: ExperimentConfig) -> RunResult:
    cfg.validate()
    directory = prepare_run_dir(mode, cfg)
    handler = {
        "train-lower": _train_lower,
        "train-hier": _train_hier,
        "eval": _eval,
        "sweep": _sweep,
        "oracle": _oracle,
        "scale": _scale,
    }[mode]
    return RunResult(mode, directory, handler(cfg, directory))


# ----- helpers ---------------------------------------------------------------------

def _eval_rows(label: str, res) -> list[dict]:
    return [{"config": label, "seed": s, "mean_aoi": a, "throughput": t}
            for s, a, t in zip(res.seeds, res.per_seed_aoi, res.per_seed_throughput)]


def _evaluate(cfg, lower, upper=None, slot_log=None):
    return evaluate(cfg, cfg.eval_seeds, lower, upper, slot_log=slot_log)


def _slot_plot(slot_rows: list[dict], directory: Path, title: str) -> None:
    if not slot_rows:
        return
    first = [r for r in slot_rows if r["seed"] == slot_rows[0]["seed"] and r["episode"] == 0]
    first = first[:min(len(first), 30)]
    plots.write_chart(directory / "plots" / "aoi_slots.svg",
                      {"mean AoI": ([r["slot"] for r in first], [r["mean_age"] for r in first])},
                      title, "slot", "mean AoI (slots)", markers=True)


def load_agents(cfg: ExperimentConfig, path) -> tuple[PpoAgent, PpoAgent | None]:
    """Lower agent and, when present, upper agent from a checkpoint."""
    meta = ckpt.read_meta(path)
    lower_rng, upper_rng = agent_rngs(cfg.seed)
    agents = {"lower": make_lower_agent(cfg, lower_rng)}
    if "upper" in meta["agents"]:
        agents["upper"] = make_upper_agent(cfg, upper_rng)
    ckpt.load_into(path, agents)
    return agents["lower"], agents.get("upper")


# ----- modes -----------------------------------------------------------------------

def _train_lower(cfg: ExperimentConfig, directory: Path) -> dict:
    writer = _MetricWriter(directory / "metrics.csv")
    try:
        result = train_lower(cfg, on_episode=writer)
    finally:
        writer.close()
    ckpt.save_checkpoint(directory / "checkpoints" / "lower.npz", {"lower": result.lower},
                         cfg.digest())
    plots.training_curves(result.metrics, directory / "plots")
    slot_rows: list[dict] = []
    learned = _evaluate(cfg, result.lower, None, slot_rows)
    rows = _eval_rows("learned", learned)
    summary = {"final_100_mean_aoi": result.final_mean_aoi() if result.metrics else float("nan"),
               "learned_eval_aoi": learned.mean_aoi}
    for name in ("adaptive", "state-dependent"):
        res = _evaluate(cfg, parse_policy(name))
        rows += _eval_rows(name, res)
        summary[f"{name}_eval_aoi"] = res.mean_aoi
    write_csv(directory / "eval.csv", EVAL_FIELDS, rows)
    write_csv(directory / "slots.csv", SLOT_FIELDS, slot_rows)
    _slot_plot(slot_rows, directory, "Learned policy, first evaluation episode")
    return summary


def _train_hier(cfg: ExperimentConfig, directory: Path) -> dict:
    writer = _MetricWriter(directory / "metrics.csv")
    try:
        result = train_hierarchical(cfg, on_episode=writer)
    finally:
        writer.close()
    ckpt.save_checkpoint(directory / "checkpoints" / "hier.npz",
                         {"lower": result.lower, "upper": result.upper}, cfg.digest())
    plots.training_curves(result.metrics, directory / "plots")
    slot_rows: list[dict] = []
    hier = _evaluate(cfg, result.lower, result.upper, slot_rows)
    zf = _evaluate(cfg, result.lower, None)
    write_csv(directory / "eval.csv", EVAL_FIELDS,
              _eval_rows("hierarchical", hier) + _eval_rows("zf+learned-lower", zf))
    write_csv(directory / "slots.csv", SLOT_FIELDS, slot_rows)
    _slot_plot(slot_rows, directory, "Hierarchical policy, first evaluation episode")
    return {"final_100_mean_aoi": result.final_mean_aoi() if result.metrics else float("nan"),
            "hier_eval_aoi": hier.mean_aoi, "hier_eval_throughput": hier.throughput,
            "zf_eval_throughput": zf.throughput,
            "throughput_ratio": hier.throughput / zf.throughput}


def _eval(cfg: ExperimentConfig, directory: Path) -> dict:
    policy = parse_policy(cfg.policy)
    upper = None
    if policy.kind == "learned":
        if not policy.checkpoint:
            raise ConfigError("eval with a learned policy needs learned:<checkpoint path>")
        lower, upper = load_agents(cfg, policy.checkpoint)
        label = "learned"
    else:
        lower, label = policy, policy.label
    slot_rows: list[dict] = []
    res = _evaluate(cfg, lower, upper, slot_rows)
    write_csv(directory / "eval.csv", EVAL_FIELDS, _eval_rows(label, res))
    write_csv(directory / "slots.csv", SLOT_FIELDS, slot_rows)
    _slot_plot(slot_rows, directory, f"{label}, first evaluation episode")
    gf = float(sum(r["sum_gfu_rate"] for r in slot_rows))
    return {"mean_aoi": res.mean_aoi, "throughput": res.throughput, "gf_rate_sum": gf,
            "successes": int(sum(r["n_success"] for r in slot_rows))}


def _sweep(cfg: ExperimentConfig, directory: Path) -> dict:
    rows, summary, series = [], {}, {}
    for text in cfg.sweep_policies:
        pol: BaselineKind = parse_policy(text)
        if pol.kind == "learned":
            raise ConfigError("the baseline sweep takes closed-form policies only")
        res = _evaluate(cfg, pol)
        rows += _eval_rows(pol.label, res)
        summary[pol.label] = res.mean_aoi
        series[pol.label] = (list(cfg.eval_seeds), res.per_seed_aoi)
    write_csv(directory / "sweep.csv", EVAL_FIELDS, rows)
    plots.write_chart(directory / "plots" / "sweep.svg", series, "Baseline sweep",
                      "seed", "mean AoI (slots)", markers=True)
    return summary


def _oracle(cfg: ExperimentConfig, directory: Path) -> dict:
    rows, summary = [], {}
    for i, spec in enumerate(oracle.oracle_suite(cfg.oracle_fixed_p, cfg.generation_period)):
        comp = oracle.compare_sim_to_oracle(spec, cfg.oracle_slots, cfg.seed + i)
        row = comp.csv_row()
        row["control"] = 0
        rows.append(row)
        summary[spec.label] = comp.rel_error
    # The exact oracle against a simulator with a deliberately wrong contention rule.
    control = oracle.OracleSpec(2, 1, BaselineKind("fixed", p=0.9), cfg.generation_period)
    comp = oracle.compare_sim_to_oracle(control, cfg.oracle_slots, cfg.seed,
                                        partial_success_sim=True)
    row = comp.csv_row()
    row["control"] = 1
    rows.append(row)
    summary["negative_control"] = comp.rel_error
    write_csv(directory / "oracle.csv", ("spec", "control", "oracle", "simulated", "rel_error",
                                         "stderr", "within_3sigma", "slots", "seconds"), rows)
    return summary


def scale_study(cfg: ExperimentConfig, directory: Path | None = None,
                on_episode=None) -> list[dict]:
    """Train and evaluate the hierarchical system for each ``K' = factor * K``."""
    rows = []
    for factor in cfg.scale_factors:
        sub = cfg.replace(num_gfus=factor * cfg.num_gbus)
        writer = None
        if directory is not None:
            writer = _MetricWriter(directory / f"metrics_k{sub.num_gfus}.csv")
        callback = writer or on_episode
        try:
            result = train_hierarchical(sub, on_episode=callback)
        finally:
            if writer:
                writer.close()
        if directory is not None:
            ckpt.save_checkpoint(directory / "checkpoints" / f"hier_k{sub.num_gfus}.npz",
                                 {"lower": result.lower, "upper": result.upper}, sub.digest())
        res = evaluate(sub, sub.eval_seeds, result.lower, result.upper)
        ref = evaluate(sub, sub.eval_seeds, parse_policy("adaptive"), None)
        rows.append({"num_gfus": sub.num_gfus, "throughput": res.throughput,
                     "mean_aoi": res.mean_aoi, "zf_adaptive_throughput": ref.throughput,
                     "train_final_aoi": result.final_mean_aoi() if result.metrics else float("nan")})
    base = rows[0]["throughput"]
    for row in rows:
        row["gain_vs_first"] = row["throughput"] / base - 1.0
    return rows


def _scale(cfg: ExperimentConfig, directory: Path) -> dict:
    rows = scale_study(cfg, directory)
    write_csv(directory / "scale.csv", SCALE_FIELDS, rows)
    k = [r["num_gfus"] for r in rows]
    plots.write_chart(directory / "plots" / "scale.svg",
                      {"trained system": (k, [r["throughput"] for r in rows]),
                       "ZF + adaptive": (k, [r["zf_adaptive_throughput"] for r in rows])},
                      "Throughput against number of GFUs", "number of GFUs",
                      "throughput (bit/s/Hz per slot)", markers=True)
    thr = [r["throughput"] for r in rows]
    return {"throughputs": thr, "gain": rows[-1]["gain_vs_first"],
            "monotone": bool(np.all(np.diff(thr) >= 0))}
