import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncentre.model import (
    ConfigError,
    EnergyTooLargeError,
    OrbitArc,
    Partition,
    ProblemConfig,
    WindingVector,
    config_from_dict,
    enumerate_partitions,
    grad_potential,
    interaction_radius,
    isolating_partition,
    map_solution_back,
    map_solution_forward,
    normalized_problem,
    parse_partition,
    potential,
    rescale_to_normalized,
    winding_to_partition,
)
from ncentre import dynamics


def test_potential_single_unit_mass_at_unit_distance():
    p = normalized_problem([[0.0, 0.0]], [1.0], 1.0)
    assert potential(p, np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-15)


def test_potential_mass_two_at_distance_two():
    p = normalized_problem([[0.0, 0.0]], [2.0], 1.0)
    assert potential(p, np.array([0.0, 2.0])) == pytest.approx(1.0, abs=1e-15)


def test_potential_equidistant_from_two_equal_masses():
    p = normalized_problem([[0.01, 0.0], [-0.01, 0.0]], [1.0, 1.0], 1.5)
    d = math.hypot(0.01, 0.3)
    assert potential(p, np.array([0.0, 0.3])) == pytest.approx(2.0 / (1.5 * d**1.5), rel=1e-14)


def test_gradient_vanishes_at_midpoint_of_equal_masses():
    p = normalized_problem([[0.01, 0.0], [-0.01, 0.0]], [1.0, 1.0], 1.5)
    assert np.allclose(grad_potential(p, np.zeros(2)), 0.0, atol=1e-12)


def test_gradient_of_unit_kepler_potential():
    p = normalized_problem([[0.0, 0.0]], [1.0], 1.0)
    assert np.allclose(grad_potential(p, np.array([1.0, 0.0])), [-1.0, 0.0], atol=1e-15)


@given(
    x=st.floats(-0.6, 0.6),
    y=st.floats(-0.6, 0.6),
    alpha=st.sampled_from([1.0, 1.3, 1.5, 1.9]),
)
def test_gradient_matches_central_differences(x, y, alpha):
    p = normalized_problem([[0.01, 0.0], [-0.006, 0.008], [0.0, -0.009]], [1.0, 2.0, 0.5], alpha)
    pt = np.array([x, y])
    if np.min(np.hypot(*(p.scaled_centres - pt).T)) < 0.05:
        return
    h = 1e-6
    fd = np.array([
        (potential(p, pt + h * e) - potential(p, pt - h * e)) / (2 * h) for e in np.eye(2)
    ])
    g = grad_potential(p, pt)
    assert np.max(np.abs(fd - g)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_interaction_radius_closed_forms():
    assert interaction_radius(1.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert interaction_radius(1.0, 4.0) == pytest.approx(2.0, abs=1e-15)


def test_circular_orbit_at_interaction_radius_keeps_its_radius():
    # alpha-Kepler circle of radius R: v^2 = M / R^alpha, and energy -1 fixes R
    p = normalized_problem([[0.0, 0.0]], [2.0], 1.5)
    R = p.radius_R
    speed = math.sqrt(2.0 * (2.0 / (1.5 * R**1.5) - 1.0))
    assert speed**2 == pytest.approx(2.0 / R**1.5, rel=1e-12)
    period = 2.0 * math.pi * R / speed
    tr = dynamics.propagate(p, np.array([R, 0.0]), np.array([0.0, speed]), t_max=period)
    r = np.hypot(tr.positions[:, 0], tr.positions[:, 1])
    assert np.max(np.abs(r - R)) <= 1e-8


def test_rescale_identity_at_unit_energy():
    cfg = ProblemConfig(((0.01, 0.0), (-0.01, 0.0)), (1.0, 1.0), 1.5, -1.0)
    p = rescale_to_normalized(cfg)
    assert np.array_equal(p.scaled_centres, cfg.centre_array)


def test_rescale_quarter_energy_kepler():
    cfg = ProblemConfig(((2.0, 0.0),), (50.0,), 1.0, -0.25)
    p = rescale_to_normalized(cfg)
    assert np.allclose(p.scaled_centres, [[0.5, 0.0]], atol=1e-15)
    assert p.epsilon == pytest.approx(0.5, abs=1e-15)


def test_map_back_dilation_factors_for_kepler_quarter_energy():
    arc = OrbitArc(np.array([0.0, 1.0]), np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    back = map_solution_back(arc, -0.25, 1.0)
    assert np.allclose(back.positions, 4.0 * arc.positions, atol=1e-14)
    assert np.allclose(back.times, 8.0 * arc.times, atol=1e-14)
    assert np.allclose(back.velocities, 0.5 * arc.velocities, atol=1e-14)


def test_map_back_at_unit_energy_is_identity():
    arc = OrbitArc(np.array([0.0, 0.5]), np.ones((2, 2)), np.ones((2, 2)))
    back = map_solution_back(arc, -1.0, 1.5)
    assert np.array_equal(back.times, arc.times)
    assert np.array_equal(back.positions, arc.positions)


@given(h=st.floats(-10.0, -1e-3), alpha=st.sampled_from([1.0, 1.25, 1.5, 1.75]))
def test_map_back_then_forward_round_trip(h, alpha):
    rng = np.random.default_rng(0)
    arc = OrbitArc(np.sort(rng.random(5)), rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
    again = map_solution_forward(map_solution_back(arc, h, alpha), h, alpha)
    assert np.allclose(again.positions, arc.positions, rtol=1e-12, atol=1e-12)
    assert np.allclose(again.times, arc.times, rtol=1e-12, atol=1e-12)


def test_mapped_arc_has_the_original_energy():
    cfg = ProblemConfig(((0.03, 0.0), (-0.02, 0.02)), (1.0, 1.5), 1.5, -0.1)
    p = rescale_to_normalized(cfg)
    x0 = np.array([0.0, p.radius_R])
    # a chord that stays far from the centres, so integration error is negligible
    v0 = dynamics.launch_velocity(p, x0, -math.pi / 2 + 1.2)
    tr = dynamics.propagate(p, x0, v0, t_max=0.5)
    back = map_solution_back(tr.to_arc("test"), cfg.energy, cfg.alpha)
    e = 0.5 * np.sum(back.velocities**2, axis=1) - potential(cfg, back.positions)
    assert np.max(np.abs(e - cfg.energy)) <= 1e-9


def test_energy_too_large_is_reported():
    cfg = ProblemConfig(((0.01, 0.0), (-0.01, 0.0)), (1.0, 1.0), 1.5, -1e6)
    with pytest.raises(EnergyTooLargeError, match="energy too large"):
        rescale_to_normalized(cfg)


@pytest.mark.parametrize("n, total, isolating", [(2, 1, 1), (3, 3, 3), (4, 7, 4)])
def test_partition_counts(n, total, isolating):
    parts = enumerate_partitions(n)
    assert len(parts) == total == 2 ** (n - 1) - 1
    assert sum(p.isolated_centre is not None for p in parts) == isolating
    assert len(set(parts)) == total


def test_four_centre_partitions_against_exhaustive_subsets():
    # every subset S containing centre 0 with a non-empty complement, once
    seen = set()
    for mask in range(1, 16):
        side = frozenset(i for i in range(4) if mask >> i & 1)
        if 0 in side and len(side) < 4:
            seen.add(side)
    assert {frozenset(p.side_a) for p in enumerate_partitions(4)} == seen


def test_partition_sides_are_unordered():
    assert Partition((0, 1), (2,)) == Partition((2,), (1, 0))


def test_winding_vectors_and_partitions():
    assert winding_to_partition(WindingVector((0, 1))) == winding_to_partition(WindingVector((1, 0)))
    assert winding_to_partition((0, 0, 1)) == isolating_partition(2, 3)
    with pytest.raises(ConfigError):
        winding_to_partition((0, 0))


def test_partition_labels_parse_back():
    for p in enumerate_partitions(4):
        assert parse_partition(p.label(), 4) == p
    with pytest.raises(ConfigError):
        parse_partition("Q4", 3)


@pytest.mark.parametrize(
    "data",
    [
        {"alpha": 1.5, "energy": -1.0, "centres": [[0, 0], [0, 0]], "masses": [1, 1]},
        {"alpha": 2.0, "energy": -1.0, "centres": [[0, 0]], "masses": [1]},
        {"alpha": 1.5, "energy": 0.5, "centres": [[0, 0]], "masses": [1]},
        {"alpha": 1.5, "energy": -1.0, "centres": [[0, 0]], "masses": [-1]},
        {"alpha": 1.5, "energy": -1.0, "centres": [[0, 0]], "masses": [1], "extra": 1},
    ],
)
def test_bad_configs_are_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)
