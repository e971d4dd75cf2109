import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

from banshee_sim.geometry import Geometry  # noqa: E402


@pytest.fixture
def small_geo():
    # 16 sets x 4 ways of 4 KiB pages, 4 MCs.
    return Geometry(cache_capacity=16 * 4 * 4096, ways=4, num_mcs=4)


# Acceptance criteria register a one-line verdict here; printed after the run.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
