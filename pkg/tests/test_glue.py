import math

import numpy as np
import pytest

from ncentre.glue import (
    CertificateError,
    EndpointChain,
    _collision_symmetry_ok,
    junction_gradient,
    verify_structure,
)
from ncentre.model import OrbitArc, isolating_partition

from conftest import SOLVED_DEGREES


def test_solved_chain_glues_smoothly(solved_orbit):
    rep = solved_orbit.junction_report
    assert rep["max_position_mismatch"] < 1e-9
    assert rep["max_velocity_mismatch"] < 1e-6
    assert solved_orbit.energy_residual() < 1e-8


def test_solved_chain_is_critical(chain_solver):
    assert np.max(np.abs(chain_solver.grad(np.radians(SOLVED_DEGREES)))) < 1e-8


def test_gradient_matches_finite_differences_of_total_length(chain_solver):
    a = np.radians(SOLVED_DEGREES) + np.array([0.01, -0.01, 0.005, 0.0])
    g = chain_solver.grad(a)
    h = 1e-4
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        fd = (chain_solver.F(a + e) - chain_solver.F(a - e)) / (2 * h)
        assert fd == pytest.approx(g[k], abs=1e-7)


def test_certificate_accepts_the_requested_symbols(solved_orbit, cluster_symbols, half_radius_options):
    delta_bar = 2 * half_radius_options.delta_fraction * solved_orbit.problem.radius_R
    cert = verify_structure(solved_orbit, cluster_symbols, delta_bar=delta_bar)
    assert cert["passed"]
    assert cert["partitions"] == ["Q1", "Q2"]


def test_certificate_rejects_swapped_symbols(solved_orbit, cluster_symbols):
    with pytest.raises(CertificateError, match="leg 1"):
        verify_structure(solved_orbit, cluster_symbols[::-1], delta_bar=solved_orbit.problem.radius_R)


def test_certificate_rejects_a_wrong_symbol_count(solved_orbit, cluster_symbols):
    with pytest.raises(CertificateError):
        verify_structure(solved_orbit, cluster_symbols[:1], delta_bar=solved_orbit.problem.radius_R)


def test_certificate_rejects_outer_endpoints_beyond_delta_bar(solved_orbit, cluster_symbols):
    with pytest.raises(CertificateError, match="outer endpoints"):
        verify_structure(solved_orbit, cluster_symbols, delta_bar=0.01 * solved_orbit.problem.radius_R)


def test_period_is_the_sum_of_leg_durations(solved_orbit):
    assert solved_orbit.period == pytest.approx(sum(leg.arc.duration for leg in solved_orbit.arcs), rel=1e-14)
    t, x, v = solved_orbit.samples()
    assert t[-1] == pytest.approx(solved_orbit.period, rel=1e-14)
    assert np.allclose(x[0], x[-1], atol=1e-9)


def test_chain_reversal_reverses_symbols():
    q = [isolating_partition(j, 3) for j in range(3)]
    chain = EndpointChain(np.arange(6.0), tuple(q))
    back = chain.reversed()
    assert np.array_equal(back.angles, np.arange(6.0)[::-1])
    assert back.reversed().symbols == chain.symbols


def test_chain_needs_two_angles_per_symbol():
    with pytest.raises(ValueError):
        EndpointChain(np.zeros(3), (isolating_partition(0, 2),))


def test_outer_separation_domain():
    chain = EndpointChain(np.array([0.0, 0.04, 1.0, 1.03]), (isolating_partition(0, 2), isolating_partition(1, 2)))
    sep = chain.outer_separations(1.0)
    assert sep == pytest.approx([2 * math.sin(0.02), 2 * math.sin(0.015)], rel=1e-14)
    assert chain.in_domain(1.0, 0.05)
    assert not chain.in_domain(1.0, 0.035)


@pytest.mark.parametrize(
    "word, symmetric",
    [((0, 1), True), ((0, 0, 1), True), ((0, 1, 2), False), ((0, 1, 0, 2), True), ((0, 0, 1, 2), False)],
)
def test_collision_orbits_need_palindromic_symbol_cycles(word, symmetric):
    assert _collision_symmetry_ok([isolating_partition(j, 3) for j in word]) == symmetric


def test_junction_gradient_is_the_tangential_velocity_jump():
    class Leg:
        def __init__(self, v_start, v_end):
            self.arc = OrbitArc(np.array([0.0, 1.0]), np.zeros((2, 2)), np.array([v_start, v_end], float))

    legs = [Leg([0.0, 0.0], [0.0, 1.0]), Leg([0.0, 3.0], [0.0, 0.0])]
    g = junction_gradient(legs, np.array([0.0, 0.0]), 2.0)
    # at angle 0 the tangent is +y: v_in - v_out is -2 at junction 1 and 0 - 0 at junction 0
    assert g == pytest.approx([0.0, 2.0 / math.sqrt(2.0) * -2.0], abs=1e-15)
