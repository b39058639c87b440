import os
from pathlib import Path

import numpy as np
import pytest

from blackspot.dataset import load_csv, load_schema, simulate

ROOT = Path(__file__).resolve().parents[1]

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def bsng_csv_path():
    """Published BSNG CSV: $BSNG_CSV, else data/BSNG.csv in the repo root."""
    env = os.environ.get("BSNG_CSV")
    path = Path(env) if env else ROOT / "data" / "BSNG.csv"
    return path if path.is_file() else None


@pytest.fixture(scope="session")
def schema():
    return load_schema()


@pytest.fixture(scope="session")
def sim_ds(schema):
    """Stand-in with the published row and positive counts."""
    return simulate(schema, 1811, 142, seed=11)


@pytest.fixture(scope="session")
def small_ds(schema):
    return simulate(schema, 240, 40, seed=5, signal=1.0)


@pytest.fixture(scope="session")
def bsng(schema):
    path = bsng_csv_path()
    if path is None:
        return None
    return load_csv(path, schema)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
