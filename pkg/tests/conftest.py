from pathlib import Path

import pytest

from tpmon.thermal import REFERENCE_TARGETS, CalibrationTargets, build_network, calibrate
from tpmon.topology import Floorplan

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ref_targets():
    return CalibrationTargets(**REFERENCE_TARGETS)


@pytest.fixture(scope="session")
def calibrated(ref_targets):
    return calibrate(ref_targets, g_amb_scale=0.1, tau=5e-3)


@pytest.fixture(scope="session")
def chip_net(calibrated):
    return build_network(Floorplan(), calibrated[0])


@pytest.fixture(scope="session")
def tile_net(calibrated):
    return build_network(Floorplan(n_tiles=1), calibrated[0])


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(tag, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
