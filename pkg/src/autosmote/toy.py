"""Two-dimensional toy problem: a majority blob flanked by two minority clusters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class ToyGeometry:
    n_majority: int = 450
    n_minority: int = 35
    majority_std: float = 1.0
    minority_offset: float = 4.5
    minority_std: float = 0.5

    def __post_init__(self):
        if self.n_majority < 1 or self.n_minority < 2:
            raise ValueError("need at least 1 majority and 2 minority instances")
        if self.majority_std <= 0 or self.minority_std <= 0:
            raise ValueError("cluster spreads must be positive")


def make_toy(geometry: ToyGeometry | None = None, ir: float | None = None, seed: int = 0) -> Dataset:
    """Majority Gaussian at the origin, minority split between (±offset, 0).

    ``ir`` overrides the minority count with ``floor(n_majority / ir)``; the
    majority is never affected by it.
    """
    g = geometry or ToyGeometry()
    n_min = g.n_minority
    if ir is not None:
        if ir <= 0:
            raise ValueError("ir must be positive")
        n_min = math.floor(g.n_majority / ir + 1e-9)
        if n_min < 2:
            raise ValueError(f"ir {ir} leaves fewer than 2 minority instances")
    rng = np.random.default_rng(seed)
    majority = rng.normal(0.0, g.majority_std, size=(g.n_majority, 2))
    side = np.where(np.arange(n_min) % 2 == 0, -1.0, 1.0)
    centers = np.column_stack([side * g.minority_offset, np.zeros(n_min)])
    minority = centers + rng.normal(0.0, g.minority_std, size=(n_min, 2))
    features = np.vstack([majority, minority])
    labels = np.concatenate([np.zeros(g.n_majority, np.int64), np.ones(n_min, np.int64)])
    return Dataset(features, labels, ("majority", "minority"))
