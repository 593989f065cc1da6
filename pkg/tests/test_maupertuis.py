import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncentre.maupertuis import (
    PathGrid,
    closing_arc_span,
    derivative_matrix,
    el_residual,
    equalize_parametrization,
    functional_report,
    has_self_intersection,
    jacobi_length,
    maupertuis_value,
    omega_of,
    parity_class,
    path_from_function,
    physical_duration,
    quadrature_weights,
    separates_according_to,
    to_physical_solution,
    winding_number,
    winding_number_of_nodes,
)
from ncentre.model import ConfigError, Partition, WindingVector, normalized_problem

from path_oracles import counterclockwise_closure, random_polygon_path, random_smooth_path, ray_crossing_winding

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def kepler():
    # one centre, alpha = 1, M = 2: the interaction circle is the unit circle
    return normalized_problem([[0.0, 0.0]], [2.0], 1.0)


def unit_circle(K=128):
    return path_from_function(lambda s: np.column_stack([np.cos(TWO_PI * s), np.sin(TWO_PI * s)]), K, 1.0)


def test_quadrature_is_exact_on_low_degree_polynomials():
    K = 40
    s = np.linspace(0.0, 1.0, K + 1)
    w = quadrature_weights(K)
    assert np.all(w > 0)
    for d in range(8):
        assert w @ s**d == pytest.approx(1.0 / (d + 1), abs=1e-14)


def test_derivative_matrix_is_exact_on_degree_eight():
    K = 32
    s = np.linspace(0.0, 1.0, K + 1)
    assert np.allclose(derivative_matrix(K) @ s**8, 8 * s**7, atol=1e-9)


def test_unit_circle_functionals(kepler):
    rep = functional_report(unit_circle(), kepler)
    assert rep.kinetic_integral == pytest.approx(4 * math.pi**2, rel=1e-12)
    assert rep.potential_integral == pytest.approx(1.0, rel=1e-12)
    assert rep.maupertuis_value == pytest.approx(2 * math.pi**2, rel=1e-12)
    assert jacobi_length(unit_circle(), kepler) == pytest.approx(TWO_PI, rel=1e-12)
    assert omega_of(unit_circle(), kepler) ** 2 == pytest.approx(1.0 / (2 * math.pi**2), rel=1e-12)
    assert abs(rep.gap) < 1e-9


def test_unit_circle_physical_duration_is_the_kepler_period(kepler):
    # 2 pi / sqrt(M / R^3) with M = 2, R = 1
    assert physical_duration(unit_circle(), kepler) == pytest.approx(math.pi * math.sqrt(2.0), rel=1e-12)
    arc = to_physical_solution(unit_circle(), kepler)
    assert arc.duration == pytest.approx(math.pi * math.sqrt(2.0), rel=1e-9)
    assert np.allclose(np.hypot(arc.positions[:, 0], arc.positions[:, 1]), 1.0, atol=1e-8)


def test_length_is_invariant_under_quadratic_reparametrization(kepler):
    warped = path_from_function(lambda s: np.column_stack([np.cos(TWO_PI * s**2), np.sin(TWO_PI * s**2)]), 512, 1.0)
    assert jacobi_length(warped, kepler) == pytest.approx(TWO_PI, abs=1e-3)
    assert 2 * maupertuis_value(warped, kepler) > jacobi_length(warped, kepler) ** 2


def test_maupertuis_value_refines_with_the_grid(cluster):
    R = cluster.radius_R

    def curve(s):
        return np.column_stack([R * np.cos(0.3 + 2.0 * s) * (1 - 0.3 * np.sin(np.pi * s)),
                                R * np.sin(0.3 + 2.0 * s) * (1 - 0.3 * np.sin(np.pi * s))])

    values = [maupertuis_value(path_from_function(curve, K, R), cluster) for K in (64, 128, 256)]
    assert abs(values[1] - values[2]) <= abs(values[0] - values[1]) + 1e-12
    assert abs(values[1] - values[2]) < 1e-6 * values[2]


def test_equalized_circle_is_a_fixed_point(kepler):
    path = unit_circle()
    assert np.allclose(equalize_parametrization(path, kepler).nodes, path.nodes, atol=1e-10)


def test_equalizing_a_radial_segment_keeps_its_length(cluster):
    R = cluster.radius_R
    # vertical chord at x = 0.3 R run at a non-uniform but smooth pace
    half = R * math.sqrt(1 - 0.09)
    path = path_from_function(lambda s: np.column_stack([0.3 * R + 0 * s, half * (2 * (s + 0.3 * s * (1 - s)) - 1)]),
                              256, R)
    eq = equalize_parametrization(path, cluster)
    assert jacobi_length(eq, cluster) == pytest.approx(jacobi_length(path, cluster), abs=1e-8)
    assert abs(functional_report(eq, cluster).gap) < 1e-8 < functional_report(path, cluster).gap


@given(seed=st.integers(0, 2**32 - 1))
def test_cauchy_schwarz_gap_and_equalization(seed, cluster):
    path = random_smooth_path(np.random.default_rng(seed), cluster)
    before = functional_report(path, cluster)
    assert before.gap >= -1e-9
    after = functional_report(equalize_parametrization(path, cluster), cluster)
    assert abs(after.gap) <= 1e-8
    assert after.jacobi_length == pytest.approx(before.jacobi_length, abs=1e-8)


def test_el_residual_vanishes_on_the_circular_orbit(kepler):
    assert np.max(np.abs(el_residual(unit_circle(), kepler))) < 1e-9


def test_full_circle_winds_once(kepler):
    assert winding_number(unit_circle(), 0, kepler) == 1


def test_chord_does_not_wind_around_centres_on_its_far_side():
    p = normalized_problem([[0.01, 0.0], [-0.01, 0.0]], [1.0, 1.0], 1.5)
    R = p.radius_R
    # vertical chord at x = 0.5 R, traversed downward, closed counterclockwise through the right
    y = R * math.sqrt(1 - 0.25)
    path = path_from_function(lambda s: np.column_stack([0.5 * R + 0 * s, y * (1 - 2 * s)]), 32, R)
    assert winding_number(path, 0, p) == 0
    assert winding_number(path, 1, p) == 0
    assert parity_class(path, p) == WindingVector((0, 0))
    assert separates_according_to(path, p) is None


def test_chord_between_two_centres_separates_them():
    p = normalized_problem([[0.01, 0.0], [-0.01, 0.0]], [1.0, 1.0], 1.5)
    R = p.radius_R
    path = path_from_function(lambda s: np.column_stack([0 * s, R * (1 - 2 * s)]), 32, R)
    assert separates_according_to(path, p) == Partition((0,), (1,))


def test_arc_over_the_cluster_has_all_odd_parities(cluster):
    R = cluster.radius_R
    # upper half ellipse from angle 0 to angle pi; the closing arc runs through the bottom
    path = path_from_function(lambda s: np.column_stack([R * np.cos(np.pi * s), 0.5 * R * np.sin(np.pi * s)]), 128, R)
    assert parity_class(path, cluster) == WindingVector((1, 1, 1))
    assert [winding_number(path, i, cluster) for i in range(3)] == [1, 1, 1]


def test_extra_loop_around_one_centre_flips_its_parity():
    # once round c1 on a small circle, then once round both centres
    p = normalized_problem([[-0.03, 0.0], [0.03, 0.0]], [1.0, 1.0], 1.0)
    R = p.radius_R
    start = np.array([R, 0.0])
    c1 = np.array([-0.03, 0.0])
    below_c1 = c1 + [0.0, -0.02]
    below_origin = np.array([0.0, -0.2 * R])

    def leg(a, b, u):
        return a + u[:, None] * (b - a)

    def ring(centre, radius, u):
        a = -np.pi / 2 + 2 * np.pi * u
        return centre + radius * np.column_stack([np.cos(a), np.sin(a)])

    u = np.linspace(0.0, 1.0, 400, endpoint=False)
    nodes = np.vstack([
        leg(start, below_c1, u),
        ring(c1, 0.02, u),
        leg(below_c1, below_origin, u),
        ring(np.zeros(2), 0.2 * R, u),
        leg(below_origin, start, np.linspace(0.0, 1.0, 401)),
    ])
    path = PathGrid(nodes, R)
    loop = counterclockwise_closure(nodes, R)
    assert winding_number(path, 0, p) == ray_crossing_winding(loop, c1) == 2
    assert winding_number(path, 1, p) == ray_crossing_winding(loop, (0.03, 0.0)) == 1
    assert parity_class(path, p) == WindingVector((0, 1))
    assert separates_according_to(path, p) is None


@given(seed=st.integers(0, 2**32 - 1))
def test_winding_matches_ray_crossings(seed):
    rng = np.random.default_rng(seed)
    R = 1.0
    nodes = random_polygon_path(rng, R)
    centre = rng.uniform(-0.9, 0.9, 2)
    loop = counterclockwise_closure(nodes, R)
    assert winding_number_of_nodes(nodes, R, centre) == ray_crossing_winding(loop, centre)


def test_figure_eight_is_self_intersecting():
    # starts and ends on the crossing branch, so the crossing is between two segment interiors
    s = np.linspace(0.05, 1.05, 200)
    eight = np.column_stack([np.sin(TWO_PI * s), np.sin(2 * TWO_PI * s) / 2])
    assert has_self_intersection(eight)
    assert not has_self_intersection(np.column_stack([s, s**2]))


def test_closing_arc_span():
    assert closing_arc_span(1.0, 1.0) == 0.0
    assert closing_arc_span(1.0, 0.5) == pytest.approx(0.5)
    assert closing_arc_span(0.5, 1.0) == pytest.approx(TWO_PI - 0.5)


def test_path_endpoints_must_lie_on_the_circle():
    with pytest.raises(ConfigError):
        PathGrid(np.zeros((20, 2)), 1.0)
