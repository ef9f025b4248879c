from importlib.resources import files

import pytest
from hypothesis import HealthCheck, settings

from acpc_synth.formats import parse_hoa, parse_model

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = files("acpc_synth") / "data"

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def case_model_text():
    return (DATA / "case_study_model.json").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def case_hoa_text():
    return (DATA / "case_study.hoa").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def case_model(case_model_text):
    return parse_model(case_model_text)


@pytest.fixture(scope="session")
def case_dra(case_hoa_text):
    return parse_hoa(case_hoa_text)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
