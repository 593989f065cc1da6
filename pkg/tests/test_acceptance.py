"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a single PASS/FAIL line with the measured numbers; the
lines are repeated in the terminal summary.
"""

import contextlib
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from ncentre import dynamics
from ncentre.flow import check_semiconjugacy, first_return, PhaseState
from ncentre.glue import ChainSolver, GlueOptions, minimize_chain, verify_structure
from ncentre.inner import (
    COLLISION_FRACTION,
    best_inner_for_partition,
    blowup_angle_bound,
    build_ejection_collision,
    near_collision_diagnostics,
    reflection_residual,
)
from ncentre.maupertuis import (
    equalize_parametrization,
    functional_report,
    has_self_intersection,
    path_from_function,
    to_physical_solution,
    winding_number_of_nodes,
)
from ncentre.model import (
    OrbitArc,
    Partition,
    config_energy_residual,
    isolating_partition,
    map_solution_back,
    normalized_problem,
    rescale_to_normalized,
    scaled_config,
    space_factor,
    winding_to_partition,
    WindingVector,
)
from ncentre.outer import brake_reference, brake_time

from conftest import ACCEPTANCE_LINES
from path_oracles import counterclockwise_closure, random_polygon_path, random_smooth_path, ray_crossing_winding

# outer endpoints may lie up to half the interaction radius apart; with the default
# 0.05 R both gluing fixtures end on the constraint boundary (see the decision log)
GLUE_DELTA_FRACTION = 0.5


class Checks:
    def __init__(self):
        self.items = []

    def add(self, text, ok):
        self.items.append((text, bool(ok)))

    def at_most(self, name, value, bound):
        self.add(f"{name} {value:.2e} <= {bound:.0e}", value <= bound)


@contextlib.contextmanager
def criterion(number, title, time_limit=None):
    checks = Checks()
    start = time.perf_counter()
    try:
        yield checks
    except Exception as exc:
        checks.add(f"raised {type(exc).__name__}: {exc}", False)
        _record(number, title, checks, time.perf_counter() - start)
        raise
    elapsed = time.perf_counter() - start
    if time_limit is not None:
        checks.add(f"runtime {elapsed:.1f} s < {time_limit:g} s", elapsed < time_limit)
    _record(number, title, checks, elapsed)
    failed = [text for text, ok in checks.items if not ok]
    assert not failed, "; ".join(failed)


def _record(number, title, checks, elapsed):
    ok = all(flag for _, flag in checks.items)
    detail = "; ".join(text for text, _ in checks.items)
    line = f"criterion {number} {'PASS' if ok else 'FAIL'} {title}: {detail} [{elapsed:.1f} s]"
    ACCEPTANCE_LINES.append(line)
    print(line)


def cluster_problem():
    return normalized_problem([[0.008, 0.002], [-0.006, 0.006], [-0.003, -0.009]], [2.0, 2.0, 2.0], 1.5)


@pytest.fixture(scope="module")
def glued():
    """The (Q1, Q2) orbit of the three-centre cluster, solved once for criteria 5, 6, 8 and 10."""
    problem = cluster_problem()
    symbols = (isolating_partition(0, 3), isolating_partition(1, 3))
    options = GlueOptions(delta_fraction=GLUE_DELTA_FRACTION)
    start = time.perf_counter()
    try:
        orbit = minimize_chain(symbols, problem, options)
    except Exception as exc:
        return {"error": exc, "elapsed": time.perf_counter() - start}
    return {"orbit": orbit, "symbols": symbols, "options": options, "elapsed": time.perf_counter() - start}


def solved(glued):
    if "error" in glued:
        raise glued["error"]
    return glued["orbit"]


def test_criterion_1_kepler_oracle():
    with criterion(1, "Kepler oracle", time_limit=5) as c:
        p = normalized_problem([[0.0, 0.0]], [2.0], 1.0)
        circle = path_from_function(lambda s: np.column_stack([np.cos(2 * np.pi * s), np.sin(2 * np.pi * s)]), 256, 1.0)
        arc = to_physical_solution(circle, p)
        c.at_most("circle period error", abs(arc.duration - math.pi * math.sqrt(2.0)), 1e-6)
        ref = brake_reference(np.array([1.0, 0.0]), p)
        apex, _ = dynamics.flow_map(p, ref.start, ref.start_velocity, ref.duration / 2, regularize=False)
        c.at_most("brake apoapsis error", abs(np.hypot(*apex) - 2.0), 1e-8)
        c.at_most("brake time quadrature vs ODE", abs(brake_time(1.0, 2.0, 1.0) - ref.duration), 1e-6)


def test_criterion_2_functional_identities():
    with criterion(2, "functional identities", time_limit=30) as c:
        problem = cluster_problem()
        rng = np.random.default_rng(20240611)
        worst_gap_before = math.inf
        worst_gap_after = 0.0
        worst_drift = 0.0
        for _ in range(1000):
            path = random_smooth_path(rng, problem)
            before = functional_report(path, problem)
            after = functional_report(equalize_parametrization(path, problem), problem)
            worst_gap_before = min(worst_gap_before, before.gap)
            worst_gap_after = max(worst_gap_after, abs(after.gap))
            worst_drift = max(worst_drift, abs(after.jacobi_length - before.jacobi_length))
        c.add(f"min 2M - L^2 {worst_gap_before:.2e} >= -1e-09", worst_gap_before >= -1e-9)
        c.at_most("max gap after equalizing", worst_gap_after, 1e-8)
        c.at_most("max L drift", worst_drift, 1e-8)


def test_criterion_3_winding_oracle():
    with criterion(3, "winding oracle") as c:
        problem = cluster_problem()
        R = problem.radius_R
        rng = np.random.default_rng(7)
        mismatches = 0
        points = 0
        for _ in range(200):
            nodes = random_polygon_path(rng, R)
            loop = counterclockwise_closure(nodes, R)
            for centre in list(problem.scaled_centres) + [rng.uniform(-0.7 * R, 0.7 * R, 2)]:
                points += 1
                if winding_number_of_nodes(nodes, R, centre) != ray_crossing_winding(loop, centre):
                    mismatches += 1
        c.add(f"{mismatches} mismatches over {points} path/point pairs", mismatches == 0)


def test_criterion_4_inner_solver():
    with criterion(4, "inner solver", time_limit=60) as c:
        p = normalized_problem([[0.01, 0.0], [-0.01, 0.0]], [1.0, 1.0], 1.5)
        R = p.radius_R
        unique = Partition((0,), (1,))
        for a, b in [(90.0, 270.0), (60.0, 250.0), (20.0, 160.0)]:
            p1 = R * np.array([math.cos(math.radians(a)), math.sin(math.radians(a))])
            p2 = R * np.array([math.cos(math.radians(b)), math.sin(math.radians(b))])
            leg = best_inner_for_partition(p1, p2, unique, p)
            tag = f"{a:g}->{b:g}"
            c.add(f"{tag} {leg.outcome}, min distance {leg.min_distance / R:.2e} R > 1e-04 R",
                  leg.outcome == "collision-free" and leg.min_distance > 1e-4 * R)
            c.at_most(f"{tag} EL residual", leg.el_residual, 1e-4)
            c.add(f"{tag} certificate {leg.partition.label()}", leg.partition == unique)


def test_criterion_5_gluing(glued):
    with criterion(5, "gluing (Q1,Q2)") as c:
        orbit = solved(glued)
        # the solve itself happens in the module fixture
        c.add(f"minimize_chain runtime {glued['elapsed']:.1f} s < 600 s", glued["elapsed"] < 600)
        c.at_most("max junction velocity mismatch", orbit.junction_report["max_velocity_mismatch"], 1e-6)
        c.at_most("energy residual", orbit.energy_residual(), 1e-6)
        R = orbit.problem.radius_R
        cert = verify_structure(orbit, glued["symbols"], delta_bar=2 * GLUE_DELTA_FRACTION * R)
        c.add(f"verify_structure passed {cert['partitions']}", cert["passed"])


def test_criterion_6_gradient_of_total_length(glued):
    with criterion(6, "grad_F vs finite differences") as c:
        orbit = solved(glued)
        problem = orbit.problem
        R = problem.radius_R
        delta = GLUE_DELTA_FRACTION * R
        rng = np.random.default_rng(11)
        worst = 0.0
        chains = 0
        while chains < 20:
            angles = orbit.chain.angles + rng.uniform(-0.1, 0.1, orbit.chain.angles.size)
            if not orbit.chain.with_angles(angles).in_domain(R, delta):
                continue
            solver = ChainSolver(problem, glued["symbols"], glued["options"])
            g = solver.grad(angles)
            h = 1e-4
            for k in range(angles.size):
                e = np.zeros(angles.size)
                e[k] = h
                fd = (solver.F(angles + e) - solver.F(angles - e)) / (2 * h)
                worst = max(worst, abs(fd - g[k]))
            chains += 1
        c.at_most(f"max |FD - grad| over {chains} chains", worst, 1e-4)


def test_criterion_7_alpha_one_regularization():
    with criterion(7, "alpha = 1 regularization (Q1)") as c:
        # mirror symmetric about the x axis; Q1 isolates the centre on the axis
        problem = normalized_problem([[0.008, 0.0], [-0.004, 0.005], [-0.004, -0.005]], [1.0, 1.0, 1.0], 1.0)
        symbols = (isolating_partition(0, 3),)
        orbit = minimize_chain(symbols, problem, GlueOptions(delta_fraction=GLUE_DELTA_FRACTION))
        R = problem.radius_R
        verify_structure(orbit, symbols, delta_bar=2 * GLUE_DELTA_FRACTION * R)
        for leg in orbit.arcs[1::2]:
            if leg.outcome == "collision-free":
                c.add(f"collision-free, min distance {leg.min_distance / R:.2e} R > {COLLISION_FRACTION:.0e} R",
                      leg.min_distance > COLLISION_FRACTION * R)
            else:
                c.add("ejection-collision", True)
                c.at_most("reflection residual", reflection_residual(leg.arc), 1e-6)
                c.at_most("LC energy drift", leg.diagnostics["lc_energy_drift"], 1e-9)
        c.at_most("junction velocity mismatch", orbit.junction_report["max_velocity_mismatch"], 1e-6)
        # the collision branch on the same configuration, built directly (informational)
        bounce = build_ejection_collision(np.array([R, 0.0]), 0, problem)
        c.add(f"direct ejection-collision arc: reflection {bounce.diagnostics['reflection_residual']:.1e}, "
              f"LC drift {bounce.diagnostics['lc_energy_drift']:.1e}", True)


def test_criterion_8_symbolic_semiconjugacy(glued):
    with criterion(8, "symbolic semiconjugacy") as c:
        orbit = solved(glued)
        rep = check_semiconjugacy(orbit, 3, orbit.problem)
        c.add(f"max shift distance {rep['max_distance']:g} at m0 = 3", rep["max_distance"] == 0.0)
        start = PhaseState(*orbit.section_states()[0])
        cur = start
        for _ in range(len(orbit.symbols)):
            cur, _ = first_return(cur, orbit.problem)
        c.at_most("return error after n returns", float(np.max(np.abs(cur.as_array() - start.as_array()))), 1e-5)


def test_criterion_9_blowup_bounds():
    with criterion(9, "blow-up bounds") as c:
        for text, k in [("1", 2), ("1.5", 4), ("1.9", 20)]:
            alpha = float(text)
            value = blowup_angle_bound(alpha)
            # 1.9 is not a double: the input itself moves 2 - alpha by this relative amount
            input_error = float(abs(Fraction(alpha) - Fraction(text)) / (2 - Fraction(text)))
            rel = abs(value - k * math.pi) / (k * math.pi)
            c.add(f"alpha {text}: |value / {k} pi - 1| {rel:.1e} <= input rounding {input_error:.1e} + 2 eps",
                  rel <= input_error + 2 * 2.0**-52)
        for alpha in (1.0, 1.5):
            p = normalized_problem([[0.0, 0.0]], [2.0], alpha)
            rho = 1e-3
            x0 = np.array([rho, 0.0])
            v0 = dynamics.launch_velocity(p, x0, math.pi / 2)
            span = 5 * rho ** ((alpha + 2) / 2)
            fwd = dynamics.propagate(p, x0, v0, t_max=span)
            back = dynamics.propagate(p, x0, -v0, t_max=span)
            pos = np.vstack([back.positions[::-1], fwd.positions[1:]])
            vel = np.vstack([-back.velocities[::-1], fwd.velocities[1:]])
            t = np.concatenate([-back.times[::-1], fwd.times[1:]])
            d = near_collision_diagnostics(pos, vel, t, 0, p)
            c.at_most(f"alpha {alpha:g} grazing momentum relative error", d["relative_error"], 0.1)


def test_criterion_10_rescaling_round_trip(glued):
    with criterion(10, "rescaling round trip to h = -0.1") as c:
        orbit = solved(glued)
        problem = orbit.problem
        config = scaled_config(problem, -0.1)
        again = rescale_to_normalized(config)
        c.at_most("centre round trip", float(np.max(np.abs(again.scaled_centres - problem.scaled_centres))), 1e-15)
        t, x, v = orbit.samples()
        back = map_solution_back(OrbitArc(t, x, v), config.energy, config.alpha)
        c.at_most("energy residual at h = -0.1", float(np.max(np.abs(config_energy_residual(config, back)))), 1e-6)
        # classify every inner passage again in the original coordinates
        radius = problem.radius_R / space_factor(config.energy, config.alpha)
        centres = config.centre_array
        passages = []
        for leg in orbit.arcs[1::2]:
            arc = map_solution_back(leg.arc, config.energy, config.alpha)
            if has_self_intersection(arc.positions):
                passages.append(None)
                continue
            parities = tuple(winding_number_of_nodes(arc.positions, radius, cj) % 2 for cj in centres)
            passages.append(winding_to_partition(WindingVector(parities)).label())
        expected = [s.label() for s in orbit.symbols]
        c.add(f"certificate {passages} == {expected}", passages == expected)
