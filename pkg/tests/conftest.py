import pytest

from skillguard.phonetics import learn_cost_matrix, load_dict, parse_dict

SMALL_DICT = """\
;;; tiny CMU-format fixture
BIT  B IH1 T
FIT  F IH1 T
READ  R IY1 D
READ(2)  R EH1 D
"""


@pytest.fixture(scope="session")
def cmu():
    return load_dict()


@pytest.fixture(scope="session")
def cmu_costs(cmu):
    return learn_cost_matrix(cmu)


@pytest.fixture
def small_dict():
    return parse_dict(SMALL_DICT)


@pytest.fixture
def small_dict_file(tmp_path):
    path = tmp_path / "tiny.dict"
    path.write_text(SMALL_DICT)
    return path


# acceptance lines collected by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
