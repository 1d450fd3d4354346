"""Experiment orchestration: configuration, per-seed runs, reports and ranking."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import platform
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.stats import rankdata

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import classifiers, samplers
from .classifiers import ClassifierSpec
from .data import DataError, Dataset, RawTable, SplitDataset, load_csv, prepare_split
from .metrics import METRICS
from .nn import save_params
from .search import SearchConfig, SearchResult, random_search, substream, train_search
from .toy import ToyGeometry, make_toy

logger = logging.getLogger(__name__)

METHODS = ("autosmote", "random_search", "smote", "random_over", "random_under", "none")
SEARCH_METHODS = ("autosmote", "random_search")
OUTPUT_ENV = "AUTOSMOTE_OUTPUT_DIR"
REPORT_FORMAT = "autosmote-report"
REPORT_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    dataset: str
    label_column: str = "label"
    target_ir: float | None = None
    classifier: dict = field(default_factory=lambda: {"kind": "decision_tree"})
    metric: str = "macro_f1"
    method: str = "autosmote"
    method_params: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0])
    actors: int | None = None
    output_dir: str = "runs"
    name: str | None = None
    fractions: list[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])
    schema: dict = field(default_factory=dict)
    toy: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if not self.seeds or not all(isinstance(s, int) for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of integers")
        if self.target_ir is not None and self.target_ir <= 1:
            raise ConfigError("target_ir must exceed 1")
        if self.actors is not None and self.actors < 1:
            raise ConfigError("actors must be positive")
        try:
            self.classifier_spec(0)
            self.search_config()
            self.baseline_params()
            self.toy_geometry()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in raw:
            raise ConfigError("config needs a 'dataset' entry (CSV path or 'toy')")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            if path.suffix == ".toml":
                raw = tomllib.loads(text)
            else:
                raw = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        config = cls.from_dict(raw)
        if not Path(config.dataset).is_absolute() and config.dataset != "toy":
            candidate = path.parent / config.dataset
            if candidate.exists():
                config.dataset = str(candidate)
        return config

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def classifier_spec(self, seed: int) -> ClassifierSpec:
        unknown = set(self.classifier) - {"kind", "hyperparameters"}
        if unknown:
            raise ConfigError(f"unknown classifier keys: {sorted(unknown)}")
        return ClassifierSpec(self.classifier.get("kind", "decision_tree"),
                              dict(self.classifier.get("hyperparameters", {})), seed)

    def search_config(self) -> SearchConfig | None:
        if self.method not in SEARCH_METHODS:
            return None
        params = dict(self.method_params)
        if "actors" in params:
            raise ConfigError("set 'actors' at the top level, not in method_params")
        actors = self.actors if self.actors is not None else min(40, os.cpu_count() or 1)
        fields = {f.name for f in dataclasses.fields(SearchConfig)}
        unknown = set(params) - fields
        if unknown:
            raise ConfigError(f"unknown {self.method} parameters: {sorted(unknown)}")
        return SearchConfig(**params, actors=actors)

    def baseline_params(self) -> dict:
        if self.method in SEARCH_METHODS:
            return {}
        allowed = {"grid", "k"} if self.method in samplers.SAMPLER_KINDS else set()
        unknown = set(self.method_params) - allowed
        if unknown:
            raise ConfigError(f"unknown {self.method} parameters: {sorted(unknown)}")
        params = {"grid": list(samplers.RATIO_GRID), "k": 5, **self.method_params}
        if not params["grid"] or not all(0 < r <= 1 for r in params["grid"]):
            raise ConfigError("ratio grid must be a non-empty list of values in (0, 1]")
        return params

    def toy_geometry(self) -> ToyGeometry:
        params = {k: v for k, v in self.toy.items() if k not in ("seed", "ir")}
        return ToyGeometry(**params)

    @property
    def dataset_name(self) -> str:
        if self.name:
            return self.name
        return "toy" if self.dataset == "toy" else Path(self.dataset).stem


class TestAudit:
    """Counts evaluations on test partitions, keyed by (method, seed)."""

    __test__ = False  # not a pytest class

    def __init__(self):
        self.counts: dict[tuple[str, int], int] = {}

    def evaluate(self, model: classifiers.TrainedClassifier, test: Dataset, metric: str,
                 method: str, seed: int) -> float:
        key = (method, seed)
        self.counts[key] = self.counts.get(key, 0) + 1
        return classifiers.evaluate(model, test, metric)


@dataclass
class MethodOutcome:
    validation_score: float
    train: Dataset
    chosen: dict
    search: SearchResult | None = None
    synthetic: samplers.SyntheticSet | None = None


def run_method(method: str, split: SplitDataset, spec: ClassifierSpec, metric: str, seed: int,
               search_config: SearchConfig | None = None, baseline: dict | None = None) -> MethodOutcome:
    """Select a resampled training set using train and validation only."""
    sealed = split.sealed()
    if method == "none":
        model = classifiers.fit(spec, sealed.train)
        return MethodOutcome(classifiers.evaluate(model, sealed.validation, metric), sealed.train, {})
    if method in samplers.SAMPLER_KINDS:
        baseline = baseline or {"grid": list(samplers.RATIO_GRID), "k": 5}
        sampler_seed = int(substream(seed, "baseline").integers(2**32))
        res = samplers.grid_search_ratio(method, sealed, spec, metric, baseline["grid"], sampler_seed,
                                         baseline["k"])
        chosen = {"ratio": res.ratio, "n_fits": res.n_fits, "grid_scores": {str(k): v for k, v in res.scores.items()}}
        return MethodOutcome(res.validation_score, res.train, chosen, synthetic=res.synthetic)
    if method in SEARCH_METHODS:
        search_fn = train_search if method == "autosmote" else random_search
        res = search_fn(sealed, spec, metric, search_config or SearchConfig(), seed)
        train = sealed.train.with_extra_minority(res.best_synthetic.samples)
        chosen = {"n_synthetic": len(res.best_synthetic), "best_iteration": res.best_iteration,
                  "G1": res.G1, "updates": res.updates}
        return MethodOutcome(res.best_score, train, chosen, search=res, synthetic=res.best_synthetic)
    raise ConfigError(f"unknown method {method!r}")


def environment_fingerprint() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "cpu_count": os.cpu_count(),
    }


def _load_table(config: ExperimentConfig) -> RawTable:
    if config.dataset == "toy":
        ds = make_toy(config.toy_geometry(), config.toy.get("ir"), int(config.toy.get("seed", 0)))
        return RawTable.from_arrays(ds.features, ds.labels, ["x0", "x1"], ds.label_values)
    schema = config.schema or None
    return load_csv(config.dataset, config.label_column, schema)


def output_root(config: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or config.output_dir)


def run(config: ExperimentConfig, write: bool = True, audit: TestAudit | None = None) -> dict:
    """Run ``config.method`` for every seed and return the report dictionary.

    Each seed re-imbalances and re-splits the data, selects a training set on
    validation, then evaluates the selected model on the test partition
    exactly once.
    """
    audit = audit or TestAudit()
    table = _load_table(config)
    search_config = config.search_config()
    baseline = config.baseline_params()
    out_dir = output_root(config) / f"{config.dataset_name}-{config.method}"
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)

    per_seed = []
    started = time.perf_counter()
    for seed in config.seeds:
        t0 = time.perf_counter()
        split = prepare_split(table, config.target_ir, config.fractions,
                              substream(seed, "imbalance"), substream(seed, "split"))
        spec = config.classifier_spec(seed)
        outcome = run_method(config.method, split, spec, config.metric, seed, search_config, baseline)
        model = classifiers.fit(spec, outcome.train)
        test_score = audit.evaluate(model, split.test, config.metric, config.method, seed)
        entry = {
            "seed": seed,
            "validation_score": outcome.validation_score,
            "test_score": test_score,
            "n_train": split.train.n_rows,
            "n_train_minority": split.train.n_minority,
            "n_resampled": outcome.train.n_rows,
            "chosen": outcome.chosen,
            "wall_clock": time.perf_counter() - t0,
        }
        if outcome.search is not None:
            entry["history"] = outcome.search.history
        per_seed.append(entry)
        logger.info("%s seed %d: validation %.4f test %.4f", config.method, seed,
                    outcome.validation_score, test_score)
        if write:
            if outcome.synthetic is not None:
                outcome.synthetic.to_csv(out_dir / f"synthetic_seed{seed}.csv")
            if outcome.search is not None and outcome.search.bundle is not None:
                save_params(out_dir / f"policy_seed{seed}.json", outcome.search.bundle.snapshot(),
                            {"seed": seed, "G1": outcome.search.G1})

    val_scores = [e["validation_score"] for e in per_seed]
    test_scores = [e["test_score"] for e in per_seed]
    report = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "method": config.method,
        "cell": {
            "dataset": config.dataset_name,
            "classifier": config.classifier_spec(0).kind,
            "target_ir": config.target_ir,
            "metric": config.metric,
        },
        "config": config.to_dict(),
        "seeds": per_seed,
        "mean_validation_score": statistics.fmean(val_scores),
        "mean_test_score": statistics.fmean(test_scores),
        "median_test_score": statistics.median(test_scores),
        "std_test_score": statistics.pstdev(test_scores),
        "test_evaluations": {str(seed): audit.counts.get((config.method, seed), 0) for seed in config.seeds},
        "wall_clock": time.perf_counter() - started,
        "environment": environment_fingerprint(),
    }
    if write:
        (out_dir / "report.json").write_text(json.dumps(report, indent=2))
        report["path"] = str(out_dir / "report.json")
    return report


SCORE_FIELDS = ("validation_score", "test_score")


def score_fields(report: dict) -> dict:
    """The reproducible part of a report: per-seed and aggregate scores."""
    return {
        "seeds": [{k: e[k] for k in ("seed", *SCORE_FIELDS)} for e in report["seeds"]],
        "mean_validation_score": report["mean_validation_score"],
        "mean_test_score": report["mean_test_score"],
    }


def _cell_key(report: dict) -> tuple:
    cell = report["cell"]
    return (cell["dataset"], cell["classifier"], cell["target_ir"], cell["metric"])


def compare(reports: Sequence[dict], score: str = "mean_test_score") -> dict[str, Any]:
    """Average rank per method across cells (1 = best; ties share the mean rank)."""
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    cells: dict[tuple, dict[str, float]] = {}
    for rep in reports:
        methods = cells.setdefault(_cell_key(rep), {})
        if rep["method"] in methods:
            raise ValueError(f"duplicate report for {rep['method']} in cell {_cell_key(rep)}")
        methods[rep["method"]] = rep[score]
    method_sets = {frozenset(m) for m in cells.values()}
    if len(method_sets) != 1:
        raise ValueError("reports do not cover identical cells for every method")
    methods = sorted(next(iter(method_sets)))
    if len(methods) < 2:
        raise ValueError("need at least two methods per cell")
    per_cell = {}
    for key, scores in sorted(cells.items(), key=lambda kv: str(kv[0])):
        ranks = rankdata([-scores[m] for m in methods], method="average")
        per_cell[key] = dict(zip(methods, (float(r) for r in ranks)))
    average = {m: statistics.fmean(r[m] for r in per_cell.values()) for m in methods}
    return {"methods": methods, "average_rank": average, "cells": per_cell}


def format_rank_table(table: dict) -> str:
    lines = [f"{'method':<16}{'avg rank':>10}"]
    for method in sorted(table["methods"], key=lambda m: table["average_rank"][m]):
        lines.append(f"{method:<16}{table['average_rank'][method]:>10.3f}")
    return "\n".join(lines)


def load_report(path: str | Path) -> dict:
    report = json.loads(Path(path).read_text())
    if report.get("format") != REPORT_FORMAT:
        raise DataError(f"{path} is not a run report")
    return report
