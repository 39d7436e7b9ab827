"""Benchmark harness: run several training configs on one dataset, compare
per-epoch wall time and reward trajectories, and write CSV reports.

Config files are INI-style key/value text::

    [bench]
    version = 1
    data = prepared/          ; output of ``fastopl prepare``
    index = index.bin         ; output of ``fastopl index``
    seed = 0                  ; shared by every run
    baseline = reinforce      ; run name used as the speedup reference
    ; budget_seconds = 60     ; optional fixed-time mode

    [run reinforce]
    method = reinforce
    samples = 1000
    epochs = 5

    [run snis-0.8]
    method = snis
    epsilon = 0.8
    topk = 256
    samples = 1000
    epochs = 5
"""
from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .core import ConfigurationError
from .trainer import RunReport, TrainConfig, train

CONFIG_VERSION = 1
CSV_HEADER = ["epoch", "method", "epsilon", "topk", "samples", "reward_test", "wall_seconds", "ess_mean"]
_TYPES = {f.name: f.type for f in fields(TrainConfig)}


@dataclass
class BenchSpec:
    runs: dict[str, TrainConfig]
    data: str | None = None
    index: str | None = None
    seed: int = 0
    baseline: str | None = None
    budget_seconds: float | None = None


@dataclass
class BenchReport:
    reports: dict[str, RunReport]
    baseline: str
    summary: list[dict] = field(default_factory=list)

    def speedup(self, name: str) -> float:
        return next(row["speedup"] for row in self.summary if row["name"] == name)


def _coerce(key: str, raw: str):
    kind = str(_TYPES[key])
    if raw.strip().lower() in ("none", ""):
        return None
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw.strip()


def parse_bench_config(text: str) -> BenchSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    if "bench" not in cp:
        raise ConfigurationError("bench config needs a [bench] section")
    head = cp["bench"]
    version = head.getint("version", fallback=None)
    if version != CONFIG_VERSION:
        raise ConfigurationError(f"unsupported bench config version {version} (expected {CONFIG_VERSION})")
    seed = head.getint("seed", fallback=0)
    budget = head.getfloat("budget_seconds", fallback=None)
    runs = {}
    for section in cp.sections():
        if not section.startswith("run "):
            continue
        name = section[4:].strip()
        values = {}
        for key, raw in cp[section].items():
            if key not in _TYPES:
                raise ConfigurationError(f"[{section}]: unknown key {key!r}")
            if key == "seed":
                raise ConfigurationError(f"[{section}]: runs share the [bench] seed")
            values[key] = _coerce(key, raw)
        runs[name] = TrainConfig(**values, seed=seed, budget_seconds=budget)
    if len(runs) < 2:
        raise ConfigurationError("a benchmark needs at least two [run ...] sections")
    return BenchSpec(runs, head.get("data"), head.get("index"), seed, head.get("baseline"), budget)


def benchmark(configs: dict[str, TrainConfig], train_data, beta, index=None, test=None,
              baseline: str | None = None) -> BenchReport:
    """Run every config; speedup = baseline mean epoch time / run mean epoch time."""
    if len(configs) < 2:
        raise ConfigurationError("need at least two configs to compare")
    seeds = {c.seed for c in configs.values()}
    if len(seeds) != 1:
        raise ConfigurationError("benchmarked configs must share their seed")
    if baseline is None:
        baseline = next((n for n, c in configs.items() if c.method == "reinforce"), next(iter(configs)))
    if baseline not in configs:
        raise ConfigurationError(f"baseline {baseline!r} is not one of the runs")
    reports = {}
    for name, cfg in configs.items():
        _, reports[name] = train(cfg, train_data, beta, index, test)
    out = BenchReport(reports, baseline)
    base_time = mean_epoch_seconds(reports[baseline])
    for name, rep in reports.items():
        t = mean_epoch_seconds(rep)
        out.summary.append({
            "name": name, "method": rep.config.method, "epsilon": rep.config.epsilon, "topk": rep.config.topk,
            "samples": rep.config.samples, "epochs": len(rep.records), "mean_epoch_seconds": t,
            "speedup": base_time / t if t > 0 else float("inf"), "final_reward_test": rep.final_reward,
        })
    return out


def mean_epoch_seconds(report: RunReport) -> float:
    secs = report.epoch_seconds()
    return float(np.mean(secs)) if len(secs) else float("nan")


def write_report_csv(path, reports: dict[str, RunReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for rep in reports.values():
            c = rep.config
            for r in rep.records:
                w.writerow([r.epoch, c.method, c.epsilon, c.topk, c.samples,
                            f"{r.reward_test:.6f}", f"{r.wall_seconds:.6f}", f"{r.ess_mean:.4f}"])


def write_summary_csv(path, report: BenchReport) -> None:
    keys = list(report.summary[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(report.summary)


def read_report_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def with_overrides(cfg: TrainConfig, **kw) -> TrainConfig:
    return replace(cfg, **kw)


def summary_path(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.stem + ".summary.csv")
