import numpy as np
import pytest

from cccharts.systems import get_system


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def euclidean2():
    return get_system("euclidean2")


@pytest.fixture(scope="session")
def euclidean3():
    return get_system("euclidean3")


@pytest.fixture(scope="session")
def heisenberg():
    return get_system("heisenberg")


@pytest.fixture(scope="session")
def grushin():
    return get_system("grushin")


@pytest.fixture(scope="session")
def quadratic_line():
    return get_system("quadratic-line")


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Keep a developer's .env and CCCHARTS_* variables out of the tests."""
    for name in ("CCCHARTS_THREADS", "CCCHARTS_LOG_LEVEL", "CCCHARTS_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("CCCHARTS_OUTPUT_DIR", str(tmp_path / "default_out"))
