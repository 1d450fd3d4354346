"""Binary classification metrics with the minority class (1) as positive."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METRICS = ("macro_f1", "mcc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> ConfusionCounts:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("cannot score an empty label vector")
    if not (np.isin(y_true, (0, 1)).all() and np.isin(y_pred, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    t = y_true == 1
    p = y_pred == 1
    return ConfusionCounts(
        tp=int(np.sum(t & p)),
        fp=int(np.sum(~t & p)),
        tn=int(np.sum(~t & ~p)),
        fn=int(np.sum(t & ~p)),
    )


def _f1(tp: int, fp: int, fn: int) -> float:
    # 2tp / (2tp + fp + fn); zero when precision and recall are both undefined or zero
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom and tp else 0.0


def macro_f1(c: ConfusionCounts) -> float:
    if c.total <= 0:
        raise ValueError("macro_f1 needs at least one instance")
    return (_f1(c.tp, c.fp, c.fn) + _f1(c.tn, c.fn, c.fp)) / 2


def mcc(c: ConfusionCounts) -> float:
    if c.total <= 0:
        raise ValueError("mcc needs at least one instance")
    factors = (c.tp + c.fp, c.tp + c.fn, c.tn + c.fp, c.tn + c.fn)
    if 0 in factors:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(math.prod(factors))


def score(metric: str, y_true, y_pred) -> float:
    """Evaluate ``metric`` ("macro_f1" or "mcc") from raw label vectors."""
    if metric == "macro_f1":
        return macro_f1(confusion(y_true, y_pred))
    if metric == "mcc":
        return mcc(confusion(y_true, y_pred))
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
