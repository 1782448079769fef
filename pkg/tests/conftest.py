import numpy as np
import pytest

from psyadv.audio_io import build_keyword_dataset
from psyadv.oracle import train_toy


@pytest.fixture(scope="session")
def keyword_data():
    return build_keyword_dataset(4, 25, seed=0)


@pytest.fixture(scope="session")
def toy_model(keyword_data):
    return train_toy(keyword_data, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number, name, ok, detail):
        status = "PASS" if ok else "FAIL"
        request.config.stash[_ACCEPTANCE].append(f"criterion {number} {status}: {name} ({detail})")
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_ACCEPTANCE]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
