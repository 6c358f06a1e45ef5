import pytest

from src.potential import potential_from_kv


@pytest.fixture(scope="session")
def well3():
    return potential_from_kv("kind=square_well depth=-3 width=1")


@pytest.fixture(scope="session")
def well4():
    return potential_from_kv("kind=square_well depth=-4 width=1")


@pytest.fixture(scope="session")
def barrier2():
    return potential_from_kv("kind=square_well depth=2 width=1")


@pytest.fixture(scope="session")
def free():
    return potential_from_kv("kind=zero")


@pytest.fixture(scope="session")
def osc():
    return potential_from_kv("kind=oscillatory_decay c=0.5 a=1.5 b=0.6")


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Run with an empty working directory so no config.json or ledger leaks in."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("HALFWAVE_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("HALFWAVE_THREADS", raising=False)
    return tmp_path
