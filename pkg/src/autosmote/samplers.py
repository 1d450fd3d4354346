"""Baseline resamplers, minority k-NN and the interpolation primitive."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import classifiers
from .classifiers import ClassifierSpec
from .data import Dataset, SplitDataset

logger = logging.getLogger(__name__)

RATIO_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))
SAMPLER_KINDS = ("smote", "random_over", "random_under")


@dataclass(frozen=True)
class NeighborIndex:
    """For each minority row, its nearest minority neighbours by ascending distance.

    Indices refer to rows of the minority matrix the index was built from.
    """

    k: int
    table: np.ndarray

    @property
    def width(self) -> int:
        return self.table.shape[1]


def pairwise_sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)


def knn_minority(train: Dataset | np.ndarray, K: int) -> NeighborIndex:
    """Exact Euclidean K-NN among minority rows, excluding the row itself.

    Distance ties are broken by the lower row index. Rows hold
    ``min(K, N_min - 1)`` neighbours.
    """
    X = train.minority if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 minority instances for neighbours, got {n}")
    if K < 1:
        raise ValueError("K must be positive")
    d = pairwise_sq_distances(X, X)
    np.fill_diagonal(d, np.inf)
    width = min(K, n - 1)
    table = np.argsort(d, axis=1, kind="stable")[:, :width]
    table.setflags(write=False)
    return NeighborIndex(K, table)


def interpolate(source: np.ndarray, neighbor: np.ndarray, lam: float) -> np.ndarray:
    source = np.asarray(source, dtype=np.float64)
    neighbor = np.asarray(neighbor, dtype=np.float64)
    if source.shape != neighbor.shape:
        raise ValueError(f"dimension mismatch: {source.shape} vs {neighbor.shape}")
    return source + lam * (neighbor - source)


@dataclass(frozen=True)
class SyntheticSet:
    """Synthetic minority rows with their interpolation provenance.

    ``source`` and ``neighbor`` index the training minority matrix; a row is
    ``minority[source] + lam * (minority[neighbor] - minority[source])``.
    """

    samples: np.ndarray
    source: np.ndarray
    neighbor: np.ndarray
    lam: np.ndarray

    def __len__(self) -> int:
        return self.samples.shape[0]

    @classmethod
    def empty(cls, dim: int) -> "SyntheticSet":
        return cls(np.zeros((0, dim)), np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))

    @classmethod
    def from_provenance(cls, minority: np.ndarray, source, neighbor, lam) -> "SyntheticSet":
        source = np.asarray(source, dtype=np.int64)
        neighbor = np.asarray(neighbor, dtype=np.int64)
        lam = np.asarray(lam, dtype=np.float64)
        if source.size == 0:
            return cls.empty(minority.shape[1])
        a = minority[source]
        samples = a + lam[:, None] * (minority[neighbor] - a)
        return cls(samples, source, neighbor, lam)

    def reconstruction_error(self, minority: np.ndarray) -> float:
        if len(self) == 0:
            return 0.0
        rebuilt = SyntheticSet.from_provenance(minority, self.source, self.neighbor, self.lam).samples
        return float(np.max(np.abs(rebuilt - self.samples)))

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        dim = self.samples.shape[1]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j}" for j in range(dim)] + ["source_idx", "neighbor_idx", "lambda"])
            for row, s, nb, lam in zip(self.samples, self.source, self.neighbor, self.lam):
                writer.writerow([repr(float(v)) for v in row] + [int(s), int(nb), repr(float(lam))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "SyntheticSet":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        dim = len(header) - 3
        if not rows:
            return cls.empty(dim)
        arr = np.array(rows, dtype=np.float64)
        return cls(arr[:, :dim], arr[:, dim].astype(np.int64), arr[:, dim + 1].astype(np.int64), arr[:, dim + 2])


def smote(train: Dataset, n_new: int, k: int = 5,
          seed: int | np.random.Generator = 0,
          neighbors: NeighborIndex | None = None) -> SyntheticSet:
    """Classic SMOTE: random source, random one of its k neighbours, λ ~ U[0, 1]."""
    if n_new < 0:
        raise ValueError("n_new must be non-negative")
    minority = train.minority
    if neighbors is None:
        neighbors = knn_minority(minority, k)
    rng = np.random.default_rng(seed)
    if n_new == 0:
        return SyntheticSet.empty(train.n_features)
    source = rng.integers(0, minority.shape[0], size=n_new)
    slot = rng.integers(0, neighbors.width, size=n_new)
    lam = rng.random(n_new)
    return SyntheticSet.from_provenance(minority, source, neighbors.table[source, slot], lam)


def _target_minority(train: Dataset, target_ratio: float) -> int:
    return int(np.floor(target_ratio * train.n_majority + 0.5))


def _check_ratio(target_ratio: float):
    if not 0 < target_ratio <= 1:
        raise ValueError(f"target ratio must be in (0, 1], got {target_ratio}")


def smote_to_ratio(train: Dataset, target_ratio: float, k: int = 5,
                   seed: int | np.random.Generator = 0) -> tuple[Dataset, SyntheticSet]:
    _check_ratio(target_ratio)
    n_new = _target_minority(train, target_ratio) - train.n_minority
    if n_new < 0:
        raise ValueError(f"ratio {target_ratio} is below the current minority/majority ratio")
    syn = smote(train, n_new, k, seed)
    return train.with_extra_minority(syn.samples), syn


def random_oversample(train: Dataset, target_ratio: float,
                      seed: int | np.random.Generator = 0) -> Dataset:
    """Duplicate minority rows (with replacement) up to ``target_ratio``."""
    _check_ratio(target_ratio)
    n_new = _target_minority(train, target_ratio) - train.n_minority
    if n_new < 0:
        raise ValueError(f"ratio {target_ratio} is below the current minority/majority ratio")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, train.n_minority, size=n_new)
    return train.with_extra_minority(train.minority[picks])


def random_undersample(train: Dataset, target_ratio: float,
                       seed: int | np.random.Generator = 0) -> Dataset:
    """Drop majority rows uniformly until minority/majority reaches ``target_ratio``."""
    _check_ratio(target_ratio)
    keep = int(np.floor(train.n_minority / target_ratio + 0.5))
    if keep > train.n_majority:
        raise ValueError(f"ratio {target_ratio} unreachable by removing majority rows")
    keep = max(keep, 1)
    rng = np.random.default_rng(seed)
    maj = np.flatnonzero(train.labels == 0)
    kept = rng.choice(maj, size=keep, replace=False)
    rows = np.sort(np.concatenate([kept, np.flatnonzero(train.labels == 1)]))
    return train.subset(rows)


def resample(kind: str, train: Dataset, target_ratio: float, seed: int | np.random.Generator,
             k: int = 5) -> tuple[Dataset, SyntheticSet | None]:
    if kind == "smote":
        return smote_to_ratio(train, target_ratio, k, seed)
    if kind == "random_over":
        return random_oversample(train, target_ratio, seed), None
    if kind == "random_under":
        return random_undersample(train, target_ratio, seed), None
    raise ValueError(f"unknown sampler {kind!r}; expected one of {SAMPLER_KINDS}")


@dataclass
class GridSearchResult:
    ratio: float
    validation_score: float
    train: Dataset
    synthetic: SyntheticSet | None
    scores: dict[float, float]
    n_fits: int


def grid_search_ratio(kind: str, split: SplitDataset, spec: ClassifierSpec, metric: str,
                      grid: Sequence[float] = RATIO_GRID, seed: int = 0, k: int = 5,
                      fit_fn: Callable = classifiers.fit) -> GridSearchResult:
    """Pick the resampling ratio with the best validation score.

    Ratios the sampler cannot reach on this training set are skipped. Equal
    scores go to the smaller ratio.
    """
    if not grid:
        raise ValueError("ratio grid is empty")
    best = None
    scores: dict[float, float] = {}
    n_fits = 0
    for ratio in sorted(grid):
        try:
            resampled, syn = resample(kind, split.train, ratio, np.random.default_rng(seed), k)
        except ValueError as exc:
            logger.info("skipping ratio %s for %s: %s", ratio, kind, exc)
            continue
        model = fit_fn(spec, resampled)
        n_fits += 1
        value = classifiers.evaluate(model, split.validation, metric)
        scores[ratio] = value
        if best is None or value > best.validation_score:
            best = GridSearchResult(ratio, value, resampled, syn, scores, 0)
    if best is None:
        raise ValueError(f"no ratio in {list(grid)} is reachable for {kind}")
    best.n_fits = n_fits
    return best
