"""Arcs outside the interaction disk that leave and re-enter it near one point.

Outside the disk the centres look like a single mass, so every such arc is a
small perturbation of the radial brake orbit of the merged Kepler problem.
Arcs are found by Newton shooting on the pair (initial angular velocity,
return time), seeded from the brake orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import dynamics
from .model import NormalizedProblem, OrbitArc, normalized_problem, potential

DEFAULT_DELTA_FRACTION = 0.05
MAX_ITER = 50
TOL = 1e-10


class OuterError(RuntimeError):
    pass


class EndpointsTooFarError(OuterError):
    """Shooting failed or the endpoints are farther apart than ``2 delta``."""


class ShootingParameterError(OuterError):
    """The requested angular velocity leaves no radial speed on the circle."""


@dataclass(frozen=True, eq=False)
class OuterArc:
    start: np.ndarray
    end: np.ndarray
    theta_dot0: float
    duration: float
    arc: OrbitArc
    iterations: int = 0
    residual: float = 0.0
    sensitivity: np.ndarray | None = field(default=None)

    @property
    def jacobi_length(self) -> float:
        return self.arc.jacobi_length

    @property
    def start_velocity(self) -> np.ndarray:
        return self.arc.velocities[0]

    @property
    def end_velocity(self) -> np.ndarray:
        return self.arc.velocities[-1]


def merged_problem(problem: NormalizedProblem) -> NormalizedProblem:
    """The unperturbed problem: all mass at the origin."""
    return normalized_problem([[0.0, 0.0]], [problem.total_mass], problem.alpha)


def brake_time(alpha: float, total_mass: float, radius: float) -> float:
    """Duration of the radial arc from ``radius`` to the Hill boundary and back."""
    r_max = (total_mass / alpha) ** (1.0 / alpha)

    # r = r_max - w^2 removes the inverse square-root singularity at r_max
    def integrand(w):
        r = r_max - w * w
        g = total_mass / (alpha * r**alpha) - 1.0
        if g > 0.0:
            return 2.0 * w / math.sqrt(2.0 * g)
        return math.sqrt(2.0 * r_max ** (alpha + 1.0) / total_mass)

    w_max = math.sqrt(r_max - radius)
    val, _ = quad(integrand, 0.0, w_max, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * val


def brake_reference(p0, problem: NormalizedProblem) -> OuterArc:
    """Radial arc of the merged problem from ``p0`` to the Hill boundary and back."""
    p0 = np.asarray(p0, float)
    merged = merged_problem(problem)
    T = brake_time(problem.alpha, problem.total_mass, problem.radius_R)
    v0 = dynamics.shell_speed(merged, p0) * p0 / np.hypot(*p0)
    tr = dynamics.propagate(merged, p0, v0, t_max=1.5 * T, stop="enter", regularize=False)
    arc = tr.to_arc("brake")
    return OuterArc(p0, arc.end, 0.0, arc.duration, arc)


def _radial_speed(problem: NormalizedProblem, p0, theta_dot0: float) -> float:
    R = float(np.hypot(*p0))
    s2 = 2.0 * (float(potential(problem, p0)) - 1.0) - R * R * theta_dot0 * theta_dot0
    if s2 < 0.0:
        raise ShootingParameterError("angular velocity too large for the energy shell")
    return math.sqrt(s2)


def initial_velocity(problem: NormalizedProblem, p0, theta_dot0: float) -> np.ndarray:
    p0 = np.asarray(p0, float)
    R = float(np.hypot(*p0))
    e = p0 / R
    return _radial_speed(problem, p0, theta_dot0) * e + R * theta_dot0 * np.array([-e[1], e[0]])


def shoot_outer(p0, theta_dot0: float, problem: NormalizedProblem, *, t_cap: float | None = None, record: bool = False):
    """Integrate outward from ``p0`` until the first return to the circle.

    Returns ``(endpoint, duration, final_velocity)``.
    """
    p0 = np.asarray(p0, float)
    if t_cap is None:
        t_cap = 10.0 * brake_time(problem.alpha, problem.total_mass, problem.radius_R)
    v0 = initial_velocity(problem, p0, theta_dot0)
    tr = dynamics.propagate(problem, p0, v0, t_max=t_cap, stop="enter", radius=float(np.hypot(*p0)), record=record)
    return tr.final_position.copy(), tr.final_time, tr.final_velocity.copy()


def _endpoint_at(problem, p0, theta_dot0, T):
    v0 = initial_velocity(problem, p0, theta_dot0)
    tr = dynamics.propagate(problem, p0, v0, t_max=T, record=False)
    return tr.final_position, tr.final_velocity


def solve_outer(
    p0,
    p1,
    problem: NormalizedProblem,
    *,
    delta: float | None = None,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
    seed: tuple[float, float] | None = None,
) -> OuterArc:
    """Outer arc from ``p0`` to ``p1`` by Newton iteration on ``(theta_dot0, T)``."""
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    R = problem.radius_R
    if delta is None:
        delta = DEFAULT_DELTA_FRACTION * R
    if np.hypot(*(p1 - p0)) >= 2.0 * delta:
        raise EndpointsTooFarError(
            f"endpoints {np.hypot(*(p1 - p0)):.3e} apart, beyond 2*delta = {2 * delta:.3e}"
        )
    T_bar = brake_time(problem.alpha, problem.total_mass, R)
    w, T = seed if seed is not None else (0.0, T_bar)
    fd = 1e-7
    res_norm = math.inf
    for it in range(1, max_iter + 1):
        try:
            xT, vT = _endpoint_at(problem, p0, w, T)
        except ShootingParameterError as exc:
            raise EndpointsTooFarError("shooting left the admissible angular velocities") from exc
        r = xT - p1
        res_norm = float(np.hypot(*r))
        if res_norm < tol:
            break
        xa, _ = _endpoint_at(problem, p0, w + fd, T)
        xb, _ = _endpoint_at(problem, p0, w - fd, T)
        J = np.column_stack([(xa - xb) / (2.0 * fd), vT])
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            try:
                xn, _ = _endpoint_at(problem, p0, w + lam * step[0], T + lam * step[1])
                if np.hypot(*(xn - p1)) < res_norm:
                    break
            except (ShootingParameterError, dynamics.IntegrationError):
                pass
            lam *= 0.5
            if lam < 1e-6:
                raise EndpointsTooFarError("Newton iteration stalled (endpoints beyond the shooting basin)")
        w += lam * step[0]
        T += lam * step[1]
        if T <= 0.0 or T > 10.0 * T_bar:
            raise EndpointsTooFarError("return time left the admissible window")
    else:
        raise EndpointsTooFarError(f"no convergence in {max_iter} iterations (residual {res_norm:.3e})")
    v0 = initial_velocity(problem, p0, w)
    tr = dynamics.propagate(problem, p0, v0, t_max=T)
    arc = tr.to_arc("outer")
    radii = np.hypot(arc.positions[:, 0], arc.positions[:, 1])
    if np.min(radii[1:-1], initial=np.inf) < R - 1e-8:
        raise EndpointsTooFarError("shooting solution dips into the interaction disk")
    return OuterArc(p0, arc.end.copy(), w, T, arc, it, res_norm)


def outer_sensitivity(arc: OuterArc, problem: NormalizedProblem, *, step: float = 1e-6) -> np.ndarray:
    """Derivatives of (tangential end velocity, duration) with respect to the endpoint angles.

    Rows: end tangential velocity, duration.  Columns: start angle, end angle.
    Central differences with one Richardson extrapolation.
    """
    R = problem.radius_R
    th0 = math.atan2(arc.start[1], arc.start[0])
    th1 = math.atan2(arc.end[1], arc.end[0])

    def data(a0, a1):
        p0 = R * np.array([math.cos(a0), math.sin(a0)])
        p1 = R * np.array([math.cos(a1), math.sin(a1)])
        o = solve_outer(p0, p1, problem, seed=(arc.theta_dot0, arc.duration), delta=max(1.0, R))
        e = np.array([-math.sin(a1), math.cos(a1)])
        return np.array([o.end_velocity @ e, o.duration])

    out = np.zeros((2, 2))
    for col in range(2):
        def cd(h):
            d = np.zeros(2)
            d[col] = h
            return (data(th0 + d[0], th1 + d[1]) - data(th0 - d[0], th1 - d[1])) / (2.0 * h)

        out[:, col] = (4.0 * cd(step / 2.0) - cd(step)) / 3.0
    return out


def with_sensitivity(arc: OuterArc, problem: NormalizedProblem) -> OuterArc:
    return OuterArc(arc.start, arc.end, arc.theta_dot0, arc.duration, arc.arc, arc.iterations, arc.residual,
                    outer_sensitivity(arc, problem))
