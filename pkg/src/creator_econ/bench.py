"""Experiment orchestration: configs, seed-replicated runs, summaries, slope fits."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .economy import EconomyInstance, RejectedInput, load_instance
from .environment import RegretTrace
from .fullreco import run_full_feature_learner, run_full_return_learner
from .learners import run_alg1, run_alg2

log = logging.getLogger(__name__)

ALGORITHMS = ("alg1", "alg2", "full_return", "full_feature")
CONFIG_FIELDS = ("algorithm", "instance_path", "horizons", "delta", "seeds", "output_dir")
SUMMARY_HEADER = ("T", "mean_final_regret", "std_final_regret", "n_seeds")
DEFAULT_DELTA = 0.05
MIN_FIT_HORIZONS = 3


class ConfigError(RejectedInput):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field `{field_name}`: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    instance_path: Path
    horizons: tuple
    delta: float = DEFAULT_DELTA
    seeds: tuple = ()
    output_dir: Path = Path("results")

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"must be one of {ALGORITHMS}, got {self.algorithm!r}")
        hs = self.horizons
        if not isinstance(hs, (list, tuple)) or not all(isinstance(h, int) and not isinstance(h, bool) and h > 0 for h in hs):
            raise ConfigError("horizons", "must be a list of positive integers")
        if not hs:
            raise ConfigError("horizons", "must not be empty")
        if list(hs) != sorted(hs) or len(set(hs)) != len(hs):
            raise ConfigError("horizons", "must be strictly ascending")
        if isinstance(self.delta, bool) or not isinstance(self.delta, (int, float)) or not (0 < self.delta < 1):
            raise ConfigError("delta", f"must lie in (0, 1), got {self.delta!r}")
        ss = self.seeds
        if not isinstance(ss, (list, tuple)) or not ss or not all(isinstance(s, int) and not isinstance(s, bool) for s in ss):
            raise ConfigError("seeds", "must be a non-empty list of integers")
        if len(set(ss)) != len(ss):
            raise ConfigError("seeds", "seeds must be distinct")
        object.__setattr__(self, "horizons", tuple(hs))
        object.__setattr__(self, "seeds", tuple(ss))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "instance_path", Path(self.instance_path))
        object.__setattr__(self, "output_dir", Path(self.output_dir))


def config_from_dict(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a config document.  Documents need >= 3 horizons so the run can
    be slope-fitted; programmatic configs may use fewer."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = set(doc) - set(CONFIG_FIELDS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    for name in ("algorithm", "instance_path", "horizons", "seeds"):
        if name not in doc:
            raise ConfigError(name, "missing required field")
    for name in ("instance_path", "output_dir"):
        if name in doc and not isinstance(doc[name], str):
            raise ConfigError(name, "must be a path string")
    hs = doc["horizons"]
    if isinstance(hs, list) and len(hs) < MIN_FIT_HORIZONS:
        raise ConfigError("horizons", f"need at least {MIN_FIT_HORIZONS} horizons for slope fitting, got {len(hs)}")
    base = base_dir or Path(".")
    inst = Path(doc["instance_path"])
    if not (base / inst).is_file():
        raise ConfigError("instance_path", f"instance file {base / inst} does not exist")
    out = Path(doc.get("output_dir", "results"))
    return ExperimentConfig(
        algorithm=doc["algorithm"],
        instance_path=inst if inst.is_absolute() else base / inst,
        horizons=doc["horizons"],
        delta=doc.get("delta", DEFAULT_DELTA),
        seeds=doc["seeds"],
        output_dir=out if out.is_absolute() else base / out,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment config.

    Relative ``instance_path`` / ``output_dir`` resolve against the config's
    directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("<file>", f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"malformed JSON in {path}: {exc}") from None
    return config_from_dict(doc, path.parent)


def run_learner(algorithm: str, instance: EconomyInstance, T: int, delta: float, seed: int) -> RegretTrace:
    if algorithm == "alg1":
        return run_alg1(instance, T, delta, seed)[1]
    if algorithm == "alg2":
        return run_alg2(instance, T, delta, seed)[1]
    if algorithm == "full_return":
        return run_full_return_learner(instance, T, delta, seed)
    if algorithm == "full_feature":
        return run_full_feature_learner(instance, T, delta, seed)
    raise RejectedInput(f"unknown algorithm {algorithm!r}")


def trace_name(config: ExperimentConfig, T: int, seed: int) -> str:
    return f"{config.algorithm}_{config.instance_path.stem}_T{T}_seed{seed}.csv"


@dataclass
class ExperimentResult:
    trace_paths: list = field(default_factory=list)
    summary_path: Path | None = None
    summary: dict = field(default_factory=dict)  # T -> (mean, std, n)


def thread_count() -> int:
    raw = os.environ.get("CREATOR_ECON_THREADS", "")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise RejectedInput(f"CREATOR_ECON_THREADS must be an integer, got {raw!r}") from None


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    instance = load_instance(config.instance_path)
    trace_dir = config.output_dir / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    cells = [(T, s) for T in config.horizons for s in config.seeds]

    def run_cell(cell):
        T, seed = cell
        try:
            trace = run_learner(config.algorithm, instance, T, config.delta, seed)
        except RejectedInput as exc:
            raise RejectedInput(f"(T={T}, seed={seed}): {exc}") from exc
        path = trace_dir / trace_name(config, T, seed)
        trace.to_csv(path)
        log.info("wrote %s (final regret %.3f)", path, trace.final_regret)
        return path, trace.final_regret

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run_cell, cells))
    else:
        outputs = [run_cell(c) for c in cells]

    result = ExperimentResult(trace_paths=[p for p, _ in outputs])
    finals = {}
    for (T, _), (_, final) in zip(cells, outputs):
        finals.setdefault(T, []).append(final)
    for T in config.horizons:
        vals = np.array(finals[T])
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        result.summary[T] = (float(np.mean(vals)), std, len(vals))
    result.summary_path = config.output_dir / "summary.csv"
    write_summary(result.summary, result.summary_path)
    return result


def write_summary(summary: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for T in sorted(summary):
            mean, std, n = summary[T]
            w.writerow((T, repr(mean), repr(std), n))


def read_summary(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise RejectedInput(f"summary file {path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SUMMARY_HEADER:
            raise RejectedInput(f"{path}: expected header {','.join(SUMMARY_HEADER)}")
        return {
            int(r["T"]): (float(r["mean_final_regret"]), float(r["std_final_regret"]), int(r["n_seeds"]))
            for r in reader
        }


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple


def fit_regret_slope(summary: dict, horizons=None) -> SlopeFit:
    """Least squares of ln(mean final regret) on ln(T).

    ``summary`` maps T to either a mean regret or a ``(mean, std, n)`` row.
    """
    horizons = sorted(summary) if horizons is None else list(horizons)
    if len(horizons) < MIN_FIT_HORIZONS:
        raise RejectedInput(f"need at least {MIN_FIT_HORIZONS} horizons for a slope fit")
    pts = []
    for T in horizons:
        row = summary[T]
        mean = row[0] if isinstance(row, (tuple, list)) else row
        if not mean > 0:
            raise RejectedInput(f"mean regret at horizon T={T} is {mean}; cannot take logs")
        pts.append((math.log(T), math.log(mean)))
    x, y = np.array(pts).T
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise RejectedInput("horizons must not all be equal")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    syy = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if syy == 0 else max(0.0, 1.0 - float(resid @ resid) / syy)
    return SlopeFit(slope, intercept, r2, tuple(pts))
