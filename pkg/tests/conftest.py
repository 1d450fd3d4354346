import numpy as np
import pytest

from autosmote.data import Dataset, RawTable, SplitDataset, prepare_split
from autosmote.search import substream
from autosmote.toy import make_toy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_split() -> SplitDataset:
    ds = make_toy(seed=0)
    table = RawTable.from_arrays(ds.features, ds.labels)
    return prepare_split(table, None, (0.6, 0.2, 0.2), substream(0, "imbalance"), substream(0, "split"))


def blobs(n_maj=40, n_min=8, dim=2, gap=4.0, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n_maj, dim)), rng.normal(gap, 1, (n_min, dim))])
    y = np.r_[np.zeros(n_maj, int), np.ones(n_min, int)]
    return Dataset(X, y)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
