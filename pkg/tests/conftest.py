import numpy as np
import pytest

from nessgeo import build_liouvillian, build_tlm, fig2_spec, naive_protocols, propagate, steady_state
from nessgeo.geometry import geodesic_arclength
from nessgeo.models import FIG2_BETA1_END, FIG2_BETA1_START, FIG2_DURATION, ThreeLevelMaserSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])


@pytest.fixture(scope="session")
def spec():
    return fig2_spec()


@pytest.fixture(scope="session")
def tlm(spec):
    return build_tlm(spec)


@pytest.fixture(scope="session")
def tlm2():
    return build_tlm(ThreeLevelMaserSpec(controls=("beta1", "beta2")))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def start_state(model, protocol):
    return steady_state(build_liouvillian(model, protocol.start)).data


@pytest.fixture(scope="session")
def fig2_protocols(tlm):
    lin, sin2 = naive_protocols([FIG2_BETA1_START], [FIG2_BETA1_END], FIG2_DURATION)
    geo = geodesic_arclength(tlm, FIG2_BETA1_START, FIG2_BETA1_END, FIG2_DURATION).protocol
    return {"geodesic": geo, "linear": lin, "sin2": sin2}


@pytest.fixture(scope="session")
def fig2_trajectories(tlm, fig2_protocols):
    return {k: propagate(tlm, p, start_state(tlm, p), 20000) for k, p in fig2_protocols.items()}
