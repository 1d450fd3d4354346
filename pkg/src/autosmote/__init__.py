"""Learned SMOTE-space over-sampling for binary imbalanced classification."""

from .classifiers import ClassifierSpec, TrainedClassifier
from .data import Dataset, SplitDataset, load_csv, make_imbalanced, preprocess, split
from .metrics import ConfusionCounts, confusion, macro_f1, mcc
from .samplers import NeighborIndex, SyntheticSet, interpolate, knn_minority, smote
from .search import SearchConfig, SearchResult, generate, random_search, train_search
from .toy import make_toy
from .vtrace import Trajectory, impala_loss, vtrace_targets

__version__ = "0.1.0"

__all__ = [
    "ClassifierSpec", "TrainedClassifier", "Dataset", "SplitDataset", "load_csv", "make_imbalanced",
    "preprocess", "split", "ConfusionCounts", "confusion", "macro_f1", "mcc", "NeighborIndex",
    "SyntheticSet", "interpolate", "knn_minority", "smote", "SearchConfig", "SearchResult", "generate",
    "random_search", "train_search", "make_toy", "Trajectory", "impala_loss", "vtrace_targets",
]
