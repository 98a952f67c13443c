import numpy as np
import pytest

from rctree.dataset import Dataset

ACCEPTANCE_LINES: list[str] = []


def logistic_data(n=200, p=2, seed=0, scale=1.0, round_to=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if round_to is not None:
        X = np.round(X, round_to)
    eta = scale * (0.1 + X[:, 0] - X[:, 1 % p])
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(np.int8)
    return Dataset(X, y)


@pytest.fixture
def data200():
    return logistic_data(200, 2, seed=1)


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
