"""Trajectory integration on the energy -1 shell of a normalized problem.

Thin Python layer over the compiled integrator in ``_kernels``: it switches to
the Levi-Civita chart of a centre (``alpha = 1`` only) when the motion enters a
small guard disk, stops on crossings of a circle, and returns recorded samples
as plain arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .model import NormalizedProblem, OrbitArc, potential

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-13
MAX_STEPS = 400_000
# closest approaches below this fraction of the cluster radius count as collisions
COLLISION_RADIUS = 1e-9


class IntegrationError(RuntimeError):
    """The integrator could not reach the requested stopping condition."""


class EscapeError(IntegrationError):
    """No stopping event before the time cap, or the motion left the computational domain."""


@dataclass
class Trajectory:
    """Recorded samples of one integration; ``lengths`` is the cumulative Jacobi length."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    lengths: np.ndarray
    stopped: bool
    collisions: list = field(default_factory=list)  # (time, centre index)
    lc_passages: list = field(default_factory=list)  # (t_in, t_out, centre index)

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_position(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def final_velocity(self) -> np.ndarray:
        return self.velocities[-1]

    @property
    def jacobi_length(self) -> float:
        return float(self.lengths[-1] - self.lengths[0])

    def to_arc(self, kind: str = "arc") -> OrbitArc:
        return OrbitArc(
            self.times - self.times[0],
            self.positions,
            self.velocities,
            kind,
            self.jacobi_length,
            tuple(t - self.times[0] for t, _ in self.collisions),
        )


def shell_speed(problem: NormalizedProblem, x) -> float:
    g = float(potential(problem, np.asarray(x, float))) - 1.0
    if g < 0.0:
        raise ValueError("point outside the Hill region")
    return math.sqrt(2.0 * g)


def project_to_shell(problem: NormalizedProblem, x, v) -> np.ndarray:
    """Rescale ``v`` so that ``|v|^2/2 - V(x) = -1``."""
    v = np.asarray(v, float)
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        return v.copy()
    return v * (shell_speed(problem, x) / n)


def default_guard(problem: NormalizedProblem) -> float:
    if problem.epsilon > 0.0:
        return 0.05 * problem.epsilon
    return 1e-3 * problem.radius_R


def _to_lc(x, v, centre):
    z = complex(x[0] - centre[0], x[1] - centre[1])
    q = np.sqrt(z)
    w = complex(v[0], v[1])
    qp = w * q.conjugate()
    return q, qp


def _from_lc(states: np.ndarray, centre) -> tuple[np.ndarray, np.ndarray]:
    q = states[:, 0] + 1j * states[:, 1]
    qp = states[:, 2] + 1j * states[:, 3]
    z = q * q
    pos = np.column_stack([z.real + centre[0], z.imag + centre[1]])
    qq = np.abs(q) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = q * qp / qq
    vel = np.column_stack([w.real, w.imag])
    bad = qq == 0.0
    if np.any(bad):
        vel[bad] = np.nan
    return pos, vel


def _nearest_centre(problem: NormalizedProblem, x) -> tuple[int, float]:
    d = np.hypot(problem.scaled_centres[:, 0] - x[0], problem.scaled_centres[:, 1] - x[1])
    j = int(np.argmin(d))
    return j, float(d[j])


def propagate(
    problem: NormalizedProblem,
    x0,
    v0,
    *,
    t_max: float,
    stop: str | None = None,
    radius: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    regularize: bool | None = None,
    guard: float | None = None,
    record: bool = True,
    domain_radius: float | None = None,
    max_steps: int = MAX_STEPS,
) -> Trajectory:
    """Integrate ``x'' = grad V(x)`` forward in time from ``(x0, v0)``.

    ``stop`` is ``None`` (run for ``t_max``), ``"exit"`` (first outward crossing
    of ``|x| = radius``) or ``"enter"`` (first inward crossing).  With
    ``regularize`` (default: ``alpha == 1``) passages within ``guard`` of a
    centre are integrated in its Levi-Civita chart, which carries collisions
    through as reflections.
    """
    cx, cy, m, alpha = problem.kernel_args
    if regularize is None:
        regularize = problem.alpha == 1.0
    if regularize and problem.alpha != 1.0:
        raise ValueError("the Levi-Civita chart is available only for alpha = 1")
    guard = default_guard(problem) if guard is None else guard
    radius = problem.radius_R if radius is None else radius
    if domain_radius is None:
        domain_radius = 4.0 * problem.hill_radius
    if stop not in (None, "exit", "enter"):
        raise ValueError(f"unknown stop condition {stop!r}")
    circle_kind = kern.EV_NONE if stop is None else kern.EV_CIRCLE
    circle_dir = 1 if stop == "exit" else -1

    x = np.asarray(x0, float).copy()
    v = np.asarray(v0, float).copy()
    t = 0.0
    length = 0.0
    ts, xs, vs, ls = [np.array([0.0])], [x[None, :]], [v[None, :]], [np.array([0.0])]
    collisions: list = []
    passages: list = []
    stopped = False

    j, d = _nearest_centre(problem, x)
    in_lc = bool(regularize and d < guard)
    for _ in range(10_000):
        if t >= t_max:
            break
        if not in_lc:
            s0 = np.array([x[0], x[1], v[0], v[1], t, length])
            status, _, sf, tt, yy = kern.integrate(
                kern.CARTESIAN, s0, t_max - t, cx, cy, m, alpha, 0,
                circle_kind, radius, circle_dir,
                kern.EV_GUARD if regularize else kern.EV_NONE, guard, -1,
                rtol, atol, max_steps, record,
            )
            pos, vel = yy[1:, :2], yy[1:, 2:4]
            ts.append(yy[1:, 4])
            xs.append(pos)
            vs.append(vel)
            ls.append(yy[1:, 5])
            x, v, t, length = sf[:2].copy(), sf[2:4].copy(), float(sf[4]), float(sf[5])
            if status == kern.ST_EVENT_A:
                stopped = True
                break
            if status == kern.ST_EVENT_B:
                j, _ = _nearest_centre(problem, x)
                in_lc = True
                continue
            if status == kern.ST_END:
                break
            raise IntegrationError(f"integrator failed with status {status} at t={t:.6g}")
        else:
            centre = problem.scaled_centres[j]
            q, qp = _to_lc(x, project_to_shell(problem, x, v), centre)
            s0 = np.array([q.real, q.imag, qp.real, qp.imag, t, length])
            # a passage through the guard disk takes a bounded fictitious time
            s_span = 50.0 * math.sqrt(guard) / math.sqrt(2.0 * m[j]) + 10.0
            status, _, sf, tt, yy = kern.integrate(
                kern.LEVI_CIVITA, s0, s_span, cx, cy, m, alpha, j,
                kern.EV_TIME, t_max, 1,
                kern.EV_LC_EXIT, guard * 1.000001, 1,
                rtol, atol, max_steps, record,
            )
            pos, vel = _from_lc(yy, centre)
            approach = _closest_lc_approach(tt, yy)
            if approach is not None and approach[0] < COLLISION_RADIUS * max(problem.epsilon, problem.radius_R * 1e-2):
                collisions.append((approach[1], j))
            keep = np.isfinite(vel[:, 0])
            keep[0] = False
            ts.append(yy[keep, 4])
            xs.append(pos[keep])
            vs.append(vel[keep])
            ls.append(yy[keep, 5])
            t_in = t
            sfx, sfv = _from_lc(sf[None, :], centre)
            x, v, t, length = sfx[0], sfv[0], float(sf[4]), float(sf[5])
            passages.append((t_in, t, j))
            if status == kern.ST_EVENT_B:
                v = project_to_shell(problem, x, v)
                in_lc = False
                continue
            if status == kern.ST_EVENT_A:
                break
            raise IntegrationError(f"Levi-Civita passage did not leave the guard disk (status {status})")
        if np.hypot(x[0], x[1]) > domain_radius:
            raise EscapeError("motion left the computational domain")
    times = np.concatenate(ts)
    positions = np.vstack(xs)
    velocities = np.vstack(vs)
    lengths = np.concatenate(ls)
    if stop is not None and not stopped:
        raise EscapeError(f"no {stop} crossing of |x| = {radius:.6g} before t = {t_max:.6g}")
    return Trajectory(times, positions, velocities, lengths, stopped, collisions, passages)


def _closest_lc_approach(ss: np.ndarray, yy: np.ndarray):
    """Smallest ``|x - c_j| = |q|^2`` along an LC passage and the time it occurs.

    ``q`` is interpolated by cubic Hermite pieces in the fictitious time, and
    the minimum of ``|q|^2`` is refined by Newton's method on the piece
    containing the smallest sample.
    """
    if yy.shape[0] < 2:
        return None
    q2 = yy[:, 0] ** 2 + yy[:, 1] ** 2
    k = int(np.argmin(q2))
    best = (float(q2[k]), float(yy[k, 4]))
    for a in (k - 1, k):
        if a < 0 or a + 1 >= yy.shape[0]:
            continue
        h = ss[a + 1] - ss[a]
        if h == 0.0:
            continue
        q0 = yy[a, :2]
        q1 = yy[a + 1, :2]
        d0 = yy[a, 2:4] * h
        d1 = yy[a + 1, 2:4] * h

        def herm(u):
            h00 = 2 * u**3 - 3 * u**2 + 1
            h10 = u**3 - 2 * u**2 + u
            h01 = -2 * u**3 + 3 * u**2
            h11 = u**3 - u**2
            return h00 * q0 + h10 * d0 + h01 * q1 + h11 * d1

        def dherm(u):
            return (6 * u**2 - 6 * u) * q0 + (3 * u**2 - 4 * u + 1) * d0 + (-6 * u**2 + 6 * u) * q1 + (3 * u**2 - 2 * u) * d1

        def ddherm(u):
            return (12 * u - 6) * q0 + (6 * u - 4) * d0 + (-12 * u + 6) * q1 + (6 * u - 2) * d1

        u = 0.5
        for _ in range(30):
            qv, dq, ddq = herm(u), dherm(u), ddherm(u)
            g = 2 * qv @ dq
            gp = 2 * (dq @ dq + qv @ ddq)
            if gp <= 0:
                break
            u_new = min(max(u - g / gp, 0.0), 1.0)
            if abs(u_new - u) < 1e-15:
                u = u_new
                break
            u = u_new
        val = float(herm(u) @ herm(u))
        if val < best[0]:
            # physical time: integrate dt/ds = 2|q|^2 over the piece by Simpson on the cubic
            us = np.linspace(0.0, u, 9)
            rate = np.array([2.0 * herm(x) @ herm(x) for x in us])
            dt = float(np.sum((rate[:-1] + rate[1:]) * 0.5) * (us[1] - us[0]) * h)
            best = (val, float(yy[a, 4]) + dt)
    return best


def propagate_backward(problem: NormalizedProblem, x0, v0, **kw) -> Trajectory:
    """Backward-in-time integration via the reversibility ``(x, v, t) -> (x, -v, -t)``."""
    tr = propagate(problem, x0, -np.asarray(v0, float), **kw)
    return Trajectory(
        -tr.times, tr.positions, -tr.velocities, -tr.lengths, tr.stopped,
        [(-t, j) for t, j in tr.collisions], [(-b, -a, j) for a, b, j in tr.lc_passages],
    )


def flow_map(problem: NormalizedProblem, x0, v0, t: float, **kw) -> tuple[np.ndarray, np.ndarray]:
    """State after time ``t`` (either sign)."""
    if t == 0.0:
        return np.asarray(x0, float).copy(), np.asarray(v0, float).copy()
    if t > 0:
        tr = propagate(problem, x0, v0, t_max=t, record=False, **kw)
    else:
        tr = propagate_backward(problem, x0, v0, t_max=-t, record=False, **kw)
    return tr.final_position.copy(), tr.final_velocity.copy()


def launch_velocity(problem: NormalizedProblem, p, angle: float) -> np.ndarray:
    """Shell velocity at ``p`` pointing in direction ``angle`` (absolute)."""
    s = shell_speed(problem, p)
    return s * np.array([math.cos(angle), math.sin(angle)])


def energy_residual_of(problem: NormalizedProblem, positions, velocities) -> np.ndarray:
    return 0.5 * np.sum(np.asarray(velocities) ** 2, axis=-1) - potential(problem, positions) + 1.0


def resample(tr_times, positions, velocities, n: int, problem: NormalizedProblem | None = None):
    """Cubic Hermite interpolation of recorded samples at ``n`` uniform times."""
    from scipy.interpolate import CubicHermiteSpline

    t = np.asarray(tr_times)
    keep = np.concatenate([[True], np.diff(t) > 0])
    t, positions, velocities = t[keep], positions[keep], velocities[keep]
    tt = np.linspace(t[0], t[-1], n)
    if problem is None:
        raise ValueError("problem required for accelerations")
    spl = CubicHermiteSpline(t, positions, velocities)
    return tt, spl(tt), spl.derivative()(tt)


def connect(
    problem: NormalizedProblem,
    start,
    target,
    angle: float,
    duration: float,
    *,
    rtol: float = DEFAULT_RTOL,
    tol: float = 1e-10,
    max_iter: int = 30,
    kind: str = "arc",
) -> OrbitArc:
    """Solve the two-point problem ``x(0) = start``, ``x(T) = target`` on the shell.

    Newton iteration on the launch direction and the duration, seeded by
    ``(angle, duration)``.
    """
    start = np.asarray(start, float)
    target = np.asarray(target, float)

    def endpoint(a, T):
        tr = propagate(problem, start, launch_velocity(problem, start, a), t_max=T, rtol=rtol, record=False)
        return tr.final_position, tr.final_velocity

    a, T = angle, duration
    for _ in range(max_iter):
        xT, vT = endpoint(a, T)
        r = xT - target
        if np.hypot(*r) < tol:
            break
        h = 1e-7
        xa, _ = endpoint(a + h, T)
        xb, _ = endpoint(a - h, T)
        J = np.column_stack([(xa - xb) / (2 * h), vT])
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise IntegrationError("singular two-point Jacobian") from exc
        lam = 1.0
        base = np.hypot(*r)
        while lam > 1e-4:
            xn, _ = endpoint(a + lam * step[0], T + lam * step[1])
            if np.hypot(*(xn - target)) < base:
                break
            lam *= 0.5
        a += lam * step[0]
        T += lam * step[1]
    else:
        raise IntegrationError("two-point shooting did not converge")
    tr = propagate(problem, start, launch_velocity(problem, start, a), t_max=T, rtol=rtol)
    return tr.to_arc(kind)
