"""Tabular data handling: CSV ingestion, preprocessing, imbalance construction
and stratified splitting.

Labels are always binary with ``0`` for the majority class and ``1`` for the
minority class. The original label values are kept on the objects for
reporting.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "?", "na", "nan", "null", "none"})
CACHE_FORMAT = "autosmote-dataset"
CACHE_VERSION = 1


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary labels (1 = minority).

    ``synthetic`` marks rows that were added by a resampler (duplicated or
    interpolated); it is ``None`` for untouched data.
    """

    features: np.ndarray
    labels: np.ndarray
    label_values: tuple[str, str] = ("0", "1")
    synthetic: np.ndarray | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {features.shape}")
        labels = np.asarray(self.labels).astype(np.int64)
        if labels.shape != (features.shape[0],):
            raise DataError("labels must be a vector with one entry per row")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DataError("labels must be 0 (majority) or 1 (minority)")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if self.synthetic is not None:
            flag = np.asarray(self.synthetic, dtype=bool)
            flag.setflags(write=False)
            object.__setattr__(self, "synthetic", flag)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_minority(self) -> int:
        return int(self.labels.sum())

    @property
    def n_majority(self) -> int:
        return self.n_rows - self.n_minority

    @property
    def imbalance_ratio(self) -> float:
        if self.n_minority == 0:
            return math.inf
        return self.n_majority / self.n_minority

    @property
    def minority(self) -> np.ndarray:
        return self.features[self.labels == 1]

    @property
    def majority(self) -> np.ndarray:
        return self.features[self.labels == 0]

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        synthetic = None if self.synthetic is None else self.synthetic[rows]
        return Dataset(self.features[rows], self.labels[rows], self.label_values, synthetic)

    def with_extra_minority(self, rows: np.ndarray) -> "Dataset":
        """Append minority rows, flagging them as synthetic."""
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, self.n_features)
        base_flag = np.zeros(self.n_rows, bool) if self.synthetic is None else self.synthetic
        return Dataset(
            np.vstack([self.features, rows]),
            np.concatenate([self.labels, np.ones(len(rows), np.int64)]),
            self.label_values,
            np.concatenate([base_flag, np.ones(len(rows), bool)]),
        )


class _SealedPartition:
    """Stand-in for a test partition that must not be read during search."""

    def __getattr__(self, name):
        raise RuntimeError("the test partition is sealed during search")

    def __repr__(self):
        return "<sealed test partition>"


@dataclass(frozen=True)
class SplitDataset:
    train: Dataset
    validation: Dataset
    test: Dataset

    def sealed(self) -> "SplitDataset":
        """Copy whose test partition raises on any access."""
        return replace(self, test=_SealedPartition())


# ---------------------------------------------------------------------------
# Raw tables and CSV ingestion
# ---------------------------------------------------------------------------


@dataclass
class RawTable:
    """Column-oriented table before preprocessing.

    Numeric columns are float arrays with ``nan`` for missing cells,
    categorical columns are object arrays with ``None`` for missing cells.
    """

    names: list[str]
    columns: list[np.ndarray]
    labels: np.ndarray
    label_values: tuple[str, str]

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def take(self, rows: np.ndarray) -> "RawTable":
        rows = np.asarray(rows, dtype=np.int64)
        return RawTable(self.names, [c[rows] for c in self.columns], self.labels[rows], self.label_values)

    @classmethod
    def from_arrays(cls, features: np.ndarray, labels: np.ndarray, names: Sequence[str] | None = None,
                    label_values: tuple[str, str] = ("0", "1")) -> "RawTable":
        features = np.asarray(features, dtype=np.float64)
        names = list(names) if names is not None else [f"x{j}" for j in range(features.shape[1])]
        return cls(names, [features[:, j].copy() for j in range(features.shape[1])],
                   np.asarray(labels, dtype=np.int64), label_values)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path: str | Path, label_column: str,
             schema: Mapping[str, str] | None = None) -> RawTable:
    """Read a headed CSV file with a binary label column.

    The rarer label value becomes the minority class (label 1). On an exact
    tie the value that sorts last is taken as minority. ``schema`` maps column
    names to ``"numeric"`` or ``"categorical"``; columns without a hint are
    numeric when every non-missing cell parses as a float.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path} has a header but no data rows")
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not in header {header}")
    width = len(header)
    for lineno, row in enumerate(rows, start=2):
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")

    label_idx = header.index(label_column)
    raw_labels = [row[label_idx].strip() for row in rows]
    values, counts = np.unique(raw_labels, return_counts=True)
    if len(values) != 2:
        raise DataError(f"label column must hold exactly two values, found {len(values)}: {list(values)[:5]}")
    minority_pos = 1 if counts[1] <= counts[0] else 0
    minority_value = str(values[minority_pos])
    majority_value = str(values[1 - minority_pos])
    labels = np.array([v == minority_value for v in raw_labels], dtype=np.int64)

    schema = dict(schema or {})
    unknown = set(schema) - set(header)
    if unknown:
        raise DataError(f"schema names unknown columns: {sorted(unknown)}")
    names, columns = [], []
    for j, name in enumerate(header):
        if j == label_idx:
            continue
        cells = [row[j] for row in rows]
        kind = schema.get(name)
        if kind is None:
            kind = "numeric" if all(_is_missing(c) or _parses_as_float(c) for c in cells) else "categorical"
        if kind == "numeric":
            try:
                col = np.array([np.nan if _is_missing(c) else float(c) for c in cells], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"column {name!r} declared numeric: {exc}") from None
        elif kind == "categorical":
            col = np.array([None if _is_missing(c) else c.strip() for c in cells], dtype=object)
        else:
            raise DataError(f"unknown column kind {kind!r} for {name!r}")
        names.append(name)
        columns.append(col)
    return RawTable(names, columns, labels, (majority_value, minority_value))


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------


@dataclass
class PreprocessSpec:
    numeric_columns: list[int]
    categorical_columns: list[int]
    means: list[float]
    stddevs: list[float]
    category_vocabularies: list[list[str]]
    unseen_categories: int = field(default=0, compare=False)

    @property
    def output_dim(self) -> int:
        return len(self.numeric_columns) + sum(len(v) for v in self.category_vocabularies)


def fit_preprocess(table: RawTable, rows: np.ndarray | None = None) -> PreprocessSpec:
    """Fit scaling and one-hot vocabularies, optionally on a subset of rows.

    Means and population standard deviations use observed values only; a
    column with zero variance (or no observed values) gets stddev 1.
    """
    if rows is not None:
        table = table.take(rows)
    numeric, categorical, means, stds, vocabs = [], [], [], [], []
    for j, col in enumerate(table.columns):
        if col.dtype == object:
            categorical.append(j)
            vocabs.append(sorted({v for v in col if v is not None}))
        else:
            numeric.append(j)
            observed = col[~np.isnan(col)]
            mean = float(observed.mean()) if observed.size else 0.0
            std = float(observed.std()) if observed.size else 0.0
            means.append(mean)
            stds.append(std if std > 0.0 else 1.0)
    return PreprocessSpec(numeric, categorical, means, stds, vocabs)


def preprocess(table: RawTable, spec: PreprocessSpec | None = None) -> Dataset:
    """Standardize numerics, one-hot encode categoricals and impute zeros.

    Without ``spec`` the parameters are fitted on ``table`` itself. Categories
    not in the fitted vocabulary encode as all-zeros and are counted in
    ``spec.unseen_categories``.
    """
    if spec is None:
        spec = fit_preprocess(table)
    blocks = []
    for j, mean, std in zip(spec.numeric_columns, spec.means, spec.stddevs):
        z = (table.columns[j] - mean) / std
        blocks.append(np.nan_to_num(z, nan=0.0)[:, None])
    for j, vocab in zip(spec.categorical_columns, spec.category_vocabularies):
        col = table.columns[j]
        onehot = np.zeros((table.n_rows, len(vocab)))
        lookup = {v: k for k, v in enumerate(vocab)}
        for i, value in enumerate(col):
            if value is None:
                continue
            k = lookup.get(value)
            if k is None:
                spec.unseen_categories += 1
            else:
                onehot[i, k] = 1.0
        blocks.append(onehot)
    if spec.unseen_categories:
        logger.warning("%d unseen categorical values encoded as zeros", spec.unseen_categories)
    features = np.hstack(blocks) if blocks else np.zeros((table.n_rows, 0))
    return Dataset(features, table.labels, table.label_values)


# ---------------------------------------------------------------------------
# Imbalance construction and splitting
# ---------------------------------------------------------------------------


def imbalance_rows(labels: np.ndarray, target_ir: float, rng: np.random.Generator) -> np.ndarray:
    """Row indices (ascending) kept after subsampling minority to ``target_ir``."""
    labels = np.asarray(labels)
    maj = np.flatnonzero(labels == 0)
    mino = np.flatnonzero(labels == 1)
    if target_ir <= 0:
        raise DataError("target imbalance ratio must be positive")
    current = len(maj) / len(mino) if len(mino) else math.inf
    if target_ir < current * (1 - 1e-9):
        raise DataError(f"target IR {target_ir} is below the current IR {current:.4g}")
    keep = min(len(mino), math.floor(len(maj) / target_ir + 1e-9))
    if keep < 2:
        raise DataError(f"IR {target_ir} would leave {keep} minority instances (need at least 2)")
    if keep == len(mino):
        return np.arange(len(labels))
    kept_min = rng.choice(mino, size=keep, replace=False)
    return np.sort(np.concatenate([maj, kept_min]))


def make_imbalanced(ds: Dataset, target_ir: float, seed: int | np.random.Generator) -> Dataset:
    rows = imbalance_rows(ds.labels, target_ir, np.random.default_rng(seed))
    if len(rows) == ds.n_rows:
        return ds
    return ds.subset(rows)


def _part_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    n_val = max(1, math.floor(fractions[1] * n + 0.5))
    n_test = max(1, math.floor(fractions[2] * n + 0.5))
    return n - n_val - n_test, n_val, n_test


def split_rows(labels: np.ndarray, fractions: Sequence[float] = (0.6, 0.2, 0.2),
               rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified train/validation/test row indices, each sorted ascending."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    rng = rng if rng is not None else np.random.default_rng(0)
    parts: tuple[list, list, list] = ([], [], [])
    for cls in (0, 1):
        idx = np.flatnonzero(np.asarray(labels) == cls)
        if len(idx) < 3:
            raise DataError(f"class {cls} has {len(idx)} instances; need at least 3 to cover every split")
        n_train, n_val, _ = _part_sizes(len(idx), fractions)
        if n_train < 1:
            raise DataError(f"class {cls} too small for fractions {fractions}")
        perm = rng.permutation(idx)
        parts[0].append(perm[:n_train])
        parts[1].append(perm[n_train:n_train + n_val])
        parts[2].append(perm[n_train + n_val:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def split(ds: Dataset, fractions: Sequence[float] = (0.6, 0.2, 0.2),
          seed: int | np.random.Generator = 0) -> SplitDataset:
    train, val, test = split_rows(ds.labels, fractions, np.random.default_rng(seed))
    return SplitDataset(ds.subset(train), ds.subset(val), ds.subset(test))


def prepare_split(table: RawTable, target_ir: float | None, fractions: Sequence[float],
                  imbalance_rng: np.random.Generator, split_rng: np.random.Generator) -> SplitDataset:
    """Imbalance, split, then fit preprocessing on the training rows only."""
    rows = np.arange(table.n_rows)
    if target_ir is not None:
        rows = imbalance_rows(table.labels, target_ir, imbalance_rng)
    table = table.take(rows)
    train, val, test = split_rows(table.labels, fractions, split_rng)
    spec = fit_preprocess(table, train)
    return SplitDataset(*(preprocess(table.take(r), spec) for r in (train, val, test)))


# ---------------------------------------------------------------------------
# Cache sidecar
# ---------------------------------------------------------------------------


def save_dataset(ds: Dataset, path: str | Path) -> None:
    payload = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "label_values": list(ds.label_values),
        "shape": list(ds.features.shape),
        "features": ds.features.ravel().tolist(),
        "labels": ds.labels.tolist(),
        "synthetic": None if ds.synthetic is None else ds.synthetic.astype(int).tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def load_dataset(path: str | Path) -> Dataset:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CACHE_FORMAT:
        raise DataError(f"{path} is not a dataset cache file")
    if payload.get("version") != CACHE_VERSION:
        raise DataError(f"unsupported dataset cache version {payload.get('version')}")
    features = np.array(payload["features"], dtype=np.float64).reshape(payload["shape"])
    synthetic = payload["synthetic"]
    return Dataset(features, np.array(payload["labels"]), tuple(payload["label_values"]),
                   None if synthetic is None else np.array(synthetic, bool))
