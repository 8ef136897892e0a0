import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


class ScriptedRng:
    """Stand-in for ``np.random.Generator`` that replays fixed draws."""

    def __init__(self, randoms=(), integers=()):
        self._randoms = list(randoms)
        self._integers = list(integers)

    def random(self):
        return self._randoms.pop(0)

    def integers(self, *args, **kwargs):
        return self._integers.pop(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_image(rng):
    def make(h=32, w=32, c=3):
        return rng.integers(0, 256, size=(h, w, c), dtype=np.uint8)
    return make


@pytest.fixture
def acceptance_report():
    def report(criterion: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
