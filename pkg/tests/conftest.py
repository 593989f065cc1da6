import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ncentre.glue import ChainSolver, EndpointChain, GlueOptions, assemble
from ncentre.model import isolating_partition, normalized_problem

settings.register_profile(
    "ncentre",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ncentre"))

# converged chain of the three-centre cluster for symbols (Q1, Q2) with delta = R / 2
SOLVED_DEGREES = [75.23221969, 72.3724691, 263.35858705, 243.59096712]


@pytest.fixture(scope="session")
def cluster():
    return normalized_problem([[0.008, 0.002], [-0.006, 0.006], [-0.003, -0.009]], [2.0, 2.0, 2.0], 1.5)


@pytest.fixture(scope="session")
def cluster_symbols():
    return (isolating_partition(0, 3), isolating_partition(1, 3))


@pytest.fixture(scope="session")
def half_radius_options():
    return GlueOptions(delta_fraction=0.5)


@pytest.fixture(scope="session")
def chain_solver(cluster, cluster_symbols, half_radius_options):
    return ChainSolver(cluster, cluster_symbols, half_radius_options)


@pytest.fixture(scope="session")
def solved_orbit(cluster, cluster_symbols, half_radius_options, chain_solver):
    """The cluster orbit assembled from its frozen chain, without re-running the minimizer."""
    chain = EndpointChain(np.radians(SOLVED_DEGREES), cluster_symbols)
    return assemble(chain, cluster, half_radius_options, chain_solver)


# one line per acceptance criterion, repeated after the run so it lands in the log
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
