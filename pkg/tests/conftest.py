import pytest

from inof import GenModel, GenSpec, SeedAssignment, generate

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def gadget():
    return generate(GenSpec(GenModel.GADGET))


@pytest.fixture
def star():
    return generate(GenSpec(GenModel.STAR, leaves=2))


@pytest.fixture
def two_seeds():
    return SeedAssignment([0], [1])


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome for the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        _CRITERIA[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
