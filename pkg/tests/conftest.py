import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from underreport import FitOptions, fit, ingest_csv, viterbi  # noqa: E402
from underreport.reports import data_path  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cantabria():
    return ingest_csv(data_path("cantabria.csv"))


@pytest.fixture(scope="session")
def cantabria_fit(cantabria):
    return fit(cantabria, options=FitOptions(restarts=3))


@pytest.fixture(scope="session")
def cantabria_path(cantabria, cantabria_fit):
    f = cantabria_fit
    return viterbi(cantabria, f.params, f.truncation, f.initial)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
