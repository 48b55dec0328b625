import pytest

from fsl.config import operator_from_config, space_from_config
from fsl.sampling import random_fields


@pytest.fixture(scope="session")
def sp1():
    return space_from_config("grid1d")


@pytest.fixture(scope="session")
def op1(sp1):
    return operator_from_config(sp1)


@pytest.fixture(scope="session")
def sp2():
    return space_from_config("grid2d")


@pytest.fixture(scope="session")
def op2(sp2):
    return operator_from_config(sp2)


@pytest.fixture(scope="session")
def fields1(op1):
    return random_fields(op1, 100, 7)


@pytest.fixture(autouse=True)
def _isolated_baselines(tmp_path, monkeypatch):
    # never touch the user's store from tests
    monkeypatch.setenv("FSL_BASELINE_DIR", str(tmp_path / "baselines"))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
