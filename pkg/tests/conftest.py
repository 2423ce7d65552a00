import pytest

from finslerprod.scene import load_scene

BASE_METRICS = ("line", "plane", "sphere", "riem", "randers", "flat_randers", "square", "funk")

# lines reported by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def demo():
    return load_scene("demo.json")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
