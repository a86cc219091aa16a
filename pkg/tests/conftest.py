import pytest

from iabplan import rng
from iabplan.planning import graph_from_scenario, plan_connected_topology
from iabplan.scenario import Region, sample_scenario


@pytest.fixture(scope="session")
def default_layout():
    """Default 1 km^2 layout with 5 MBSs, 80 SBSs and 1000 UEs."""
    return sample_scenario(Region(), 5, 80, 1000, 7)


@pytest.fixture(scope="session")
def default_plan(default_layout):
    ring = graph_from_scenario(default_layout)
    design = plan_connected_topology(ring, rng.substream(default_layout.seed, rng.DESIGN_ORDER))
    return ring, design


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.REPORT, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
