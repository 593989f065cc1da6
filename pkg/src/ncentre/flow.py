"""Phase flow on the energy shell, circle sections, first returns and symbol coding.

A state on the outward section (``|x| = R``, ``<x, v> > 0``) is coded by the
partitions realized by its successive inner passages.  Forward symbols come
from iterating the first-return map; backward symbols from the time-reversed
flow ``(x, v) -> (x, -v)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import dynamics
from .maupertuis import separates_nodes
from .model import NormalizedProblem, Partition, isolating_partition, potential
from .outer import brake_time

ON_SHELL_TOL = 1e-8
TANGENCY_TOL = 1e-10
CROSSING_TIME_TOL = 1e-10


class FlowError(RuntimeError):
    pass


class NonReturningError(FlowError):
    """The state does not come back to the outward section within the time cap."""


class DecodeError(FlowError):
    """An inner passage could not be classified by a partition."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class TangencyWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PhaseState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, float).reshape(2).copy())
        object.__setattr__(self, "velocity", np.asarray(self.velocity, float).reshape(2).copy())

    def energy_residual(self, problem: NormalizedProblem) -> float:
        return float(0.5 * self.velocity @ self.velocity - potential(problem, self.position) + 1.0)

    def on_shell(self, problem: NormalizedProblem, tol: float = ON_SHELL_TOL) -> bool:
        return abs(self.energy_residual(problem)) <= tol

    def reversed(self) -> "PhaseState":
        return PhaseState(self.position, -self.velocity)

    def radial_velocity(self) -> float:
        return float(self.position @ self.velocity / np.hypot(*self.position))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


@dataclass(frozen=True)
class SymbolSequence:
    """Decoded symbols at offsets ``-m0 .. m0`` (offset 0 is the next inner passage)."""

    window: dict

    def __post_init__(self):
        keys = sorted(self.window)
        if not keys:
            raise ValueError("empty symbol window")
        if keys != list(range(keys[0], keys[-1] + 1)):
            raise ValueError("symbol window has gaps")

    @property
    def offsets(self) -> range:
        keys = sorted(self.window)
        return range(keys[0], keys[-1] + 1)

    def __getitem__(self, m: int) -> Partition:
        return self.window[m]

    def left_shift(self) -> "SymbolSequence":
        """``(T s)_m = s_{m+1}``; the window loses its leftmost offset."""
        return SymbolSequence({m - 1: s for m, s in self.window.items() if m - 1 >= min(self.window)})

    def restricted(self, offsets) -> "SymbolSequence":
        return SymbolSequence({m: self.window[m] for m in offsets})

    def labels(self) -> dict:
        return {m: s.label() for m, s in sorted(self.window.items())}


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


def _as_state(state) -> PhaseState:
    if isinstance(state, PhaseState):
        return state
    x, v = state
    return PhaseState(x, v)


def integrate_flow(state, t: float, problem: NormalizedProblem, **kw) -> PhaseState:
    """``phi^t(state)`` for either sign of ``t``; collisions (``alpha = 1``) continue as reflections."""
    s = _as_state(state)
    if t == 0.0:
        return s
    x, v = dynamics.flow_map(problem, s.position, s.velocity, t, **kw)
    return PhaseState(x, v)


def flow_trajectory(state, t: float, problem: NormalizedProblem, **kw) -> dynamics.Trajectory:
    s = _as_state(state)
    if t >= 0.0:
        return dynamics.propagate(problem, s.position, s.velocity, t_max=t, **kw)
    return dynamics.propagate_backward(problem, s.position, s.velocity, t_max=-t, **kw)


def refined_samples(times, positions, velocities, per_step: int = 8):
    """Insert ``per_step - 1`` cubic Hermite points inside every recorded step."""
    t = np.asarray(times, float)
    keep = np.concatenate([[True], np.diff(t) != 0.0])
    t, x, v = t[keep], np.asarray(positions)[keep], np.asarray(velocities)[keep]
    if t.size < 2:
        return t, x, v
    if t[-1] < t[0]:
        t, x, v = t[::-1], x[::-1], v[::-1]
        flip = True
    else:
        flip = False
    spl = CubicHermiteSpline(t, x, v)
    u = np.linspace(0.0, 1.0, per_step + 1)[:-1]
    tt = np.concatenate([(t[:-1, None] + u[None, :] * np.diff(t)[:, None]).ravel(), t[-1:]])
    xx, vv = spl(tt), spl.derivative()(tt)
    xx[0], xx[-1] = x[0], x[-1]
    if flip:
        return tt[::-1], xx[::-1], vv[::-1]
    return tt, xx, vv


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------


def _refine_crossing(problem, t_a, x_a, v_a, radius, first_step=0.0):
    """Newton on ``|x(t)| = radius`` by short integrations from the recorded sample ``(t_a, x_a, v_a)``.

    ``first_step`` is the interpolated estimate of the crossing time after ``t_a``.
    """
    x, v = dynamics.flow_map(problem, x_a, v_a, first_step, regularize=False)
    t = t_a + first_step
    for _ in range(20):
        r = float(np.hypot(*x))
        rdot = float(x @ v) / r
        dt = -(r - radius) / rdot
        if abs(dt) < CROSSING_TIME_TOL:
            return t + dt, x + dt * v, v
        x, v = dynamics.flow_map(problem, x, v, dt, regularize=False)
        t += dt
    return t, x, v


def detect_section_crossing(trajectory, radius: float, problem: NormalizedProblem | None = None,
                            *, endpoint_tol: float = 1e-9) -> list:
    """All crossings of ``|x| = radius`` as ``(time, PhaseState, sign)``; ``sign`` is +1 outward.

    Sign changes of ``|x| - radius`` between samples are located by cubic
    Hermite interpolation and, when ``problem`` is given, polished by Newton
    integration.  Samples lying on the circle (a trajectory started or stopped
    there) count as crossings.  Tangential crossings are skipped with a
    :class:`TangencyWarning`.
    """
    t = np.asarray(trajectory.times, float)
    x = np.asarray(trajectory.positions, float)
    v = np.asarray(trajectory.velocities, float)
    f = np.hypot(x[:, 0], x[:, 1]) - radius
    on = np.abs(f) <= endpoint_tol
    out = []

    def emit(tc, xc, vc):
        rdot = float(xc @ vc) / float(np.hypot(*xc))
        if abs(rdot) < TANGENCY_TOL:
            warnings.warn(f"tangential crossing at t = {tc:.6g} skipped", TangencyWarning, stacklevel=3)
            return
        if out and abs(out[-1][0] - tc) < 1e-9:
            return
        out.append((float(tc), PhaseState(xc, vc), 1 if rdot > 0 else -1))

    for k in range(len(t)):
        if on[k]:
            emit(t[k], x[k], v[k])
            continue
        if k + 1 < len(t) and not on[k + 1] and f[k] * f[k + 1] < 0.0:
            h = t[k + 1] - t[k]
            spl = CubicHermiteSpline([0.0, h], x[k:k + 2], v[k:k + 2])
            # bisection on the interpolant, then Newton on the true flow
            a, b = 0.0, h
            for _ in range(200):
                c = 0.5 * (a + b)
                fc = float(np.hypot(*spl(c))) - radius
                if (fc < 0.0) == (f[k] < 0.0):
                    a = c
                else:
                    b = c
                if abs(b - a) < 1e-15 * max(1.0, abs(h)):
                    break
            c = 0.5 * (a + b)
            tc, xc, vc = t[k] + c, spl(c), spl.derivative()(c)
            if problem is not None:
                tc, xc, vc = _refine_crossing(problem, t[k], x[k], v[k], radius, c)
            emit(tc, xc, vc)
    return out


def _default_cap(problem: NormalizedProblem) -> float:
    return 4.0 * brake_time(problem.alpha, problem.total_mass, problem.radius_R) + 20.0


def _passage(problem, s: PhaseState, stop: str, radius: float, t_cap: float, record: bool):
    try:
        return dynamics.propagate(problem, s.position, s.velocity, t_max=t_cap, stop=stop, radius=radius,
                                  record=record)
    except dynamics.IntegrationError as exc:
        raise NonReturningError(f"no {stop} crossing within t = {t_cap:.4g}: {exc}") from exc


def first_return(state, problem: NormalizedProblem, *, radius: float | None = None,
                 t_cap: float | None = None) -> tuple[PhaseState, float]:
    """Next outward crossing of the circle after an outer excursion and an inner passage."""
    s = _as_state(state)
    radius = problem.radius_R if radius is None else radius
    t_cap = _default_cap(problem) if t_cap is None else t_cap
    if s.radial_velocity() <= 0.0:
        raise ValueError("first_return needs an outward section state")
    out_leg = _passage(problem, s, "enter", radius, t_cap, False)
    mid = PhaseState(out_leg.final_position, out_leg.final_velocity)
    in_leg = _passage(problem, mid, "exit", radius, t_cap - out_leg.final_time, False)
    end = PhaseState(in_leg.final_position, in_leg.final_velocity)
    return end, out_leg.final_time + in_leg.final_time


def _classify_passage(problem, tr: dynamics.Trajectory, radius: float) -> Partition:
    if tr.collisions:
        js = {j for _, j in tr.collisions}
        if len(js) != 1 or len(tr.collisions) != 1:
            raise DecodeError(f"inner passage collides {len(tr.collisions)} times")
        return isolating_partition(js.pop(), problem.n_centres)
    _, pts, _ = refined_samples(tr.times, tr.positions, tr.velocities)
    part = separates_nodes(pts, radius, problem)
    if part is None:
        raise DecodeError("inner passage self-intersects or does not split the centres")
    return part


def _inner_passage_from(problem, s: PhaseState, radius, t_cap):
    """Trajectory of the inner passage that begins at the inward state ``s``."""
    return _passage(problem, s, "exit", radius, t_cap, True)


def decode_symbol(state, problem: NormalizedProblem, *, radius: float | None = None,
                  t_cap: float | None = None) -> Partition:
    """Partition realized by the next inner passage of an outward section state."""
    s = _as_state(state)
    radius = problem.radius_R if radius is None else radius
    t_cap = _default_cap(problem) if t_cap is None else t_cap
    try:
        out_leg = _passage(problem, s, "enter", radius, t_cap, False)
        mid = PhaseState(out_leg.final_position, out_leg.final_velocity)
        tr = _inner_passage_from(problem, mid, radius, t_cap)
    except NonReturningError as exc:
        raise DecodeError(str(exc)) from exc
    return _classify_passage(problem, tr, radius)


def symbol_window(state, m0: int, problem: NormalizedProblem, *, radius: float | None = None,
                  t_cap: float | None = None) -> SymbolSequence:
    """Symbols at offsets ``-m0 .. m0`` around an outward section state."""
    if m0 < 0:
        raise ValueError("m0 must be non-negative")
    s = _as_state(state)
    radius = problem.radius_R if radius is None else radius
    t_cap = _default_cap(problem) if t_cap is None else t_cap
    window = {}
    cur = s
    for m in range(0, m0 + 1):
        try:
            window[m] = decode_symbol(cur, problem, radius=radius, t_cap=t_cap)
            if m < m0:
                cur, _ = first_return(cur, problem, radius=radius, t_cap=t_cap)
        except FlowError as exc:
            raise DecodeError(f"decode failed at offset {m}: {exc}", m) from exc
    if m0 > 0:
        # the passage that ended at ``s``, traversed backwards
        try:
            tr = _inner_passage_from(problem, s.reversed(), radius, t_cap)
            window[-1] = _classify_passage(problem, tr, radius)
            back = PhaseState(tr.final_position, tr.final_velocity)
            for m in range(2, m0 + 1):
                window[-m] = decode_symbol(back, problem, radius=radius, t_cap=t_cap)
                if m < m0:
                    back, _ = first_return(back, problem, radius=radius, t_cap=t_cap)
        except FlowError as exc:
            m = min(window) - 1
            raise DecodeError(f"decode failed at offset {m}: {exc}", m) from exc
    return SymbolSequence(window)


def shift_distance(a: SymbolSequence, b: SymbolSequence) -> float:
    """``sum_m 2^{-|m|} [a_m != b_m]`` over the (equal) window."""
    if set(a.window) != set(b.window):
        raise ValueError("symbol windows differ")
    return float(sum(2.0 ** -abs(m) for m in a.window if a.window[m] != b.window[m]))


def check_semiconjugacy(orbit, m0: int, problem: NormalizedProblem | None = None, *,
                        decoder=None) -> dict:
    """Compare the coding of ``R(s)`` with the shifted coding of ``s`` for every section state.

    ``decoder`` replaces :func:`symbol_window` (used to test the check itself).
    """
    problem = orbit.problem if problem is None else problem
    decoder = decoder or symbol_window
    states = [PhaseState(x, v) for x, v in orbit.section_states()]
    n = len(states)
    rows = []
    worst = 0.0
    for k, s in enumerate(states):
        w = decoder(s, m0, problem)
        r, t_ret = first_return(s, problem)
        w_next = decoder(r, m0, problem)
        common = [m for m in w_next.offsets if m + 1 in w.window]
        shifted = w.left_shift().restricted(common)
        d = shift_distance(w_next.restricted(common), shifted)
        worst = max(worst, d)
        rows.append({
            "state": k,
            "window": w.labels(),
            "return_time": t_ret,
            "distance": d,
        })
    # periodicity: n returns from the first section state
    cur = states[0]
    for _ in range(n):
        cur, _ = first_return(cur, problem)
    return_error = float(np.max(np.abs(cur.as_array() - states[0].as_array())))
    return {
        "m0": m0,
        "states": rows,
        "max_distance": worst,
        "return_error": return_error,
        "requested": [s.label() for s in orbit.symbols],
    }


def trajectory_csv_rows(times, positions, velocities) -> list[tuple[float, float, float, float, float]]:
    return [(float(t), float(x[0]), float(x[1]), float(v[0]), float(v[1]))
            for t, x, v in zip(times, positions, velocities)]


def lc_passage_count(trajectory: dynamics.Trajectory) -> int:
    """Number of chart switches into a Levi-Civita disk (collisions are not capped)."""
    return len(trajectory.lc_passages)


def time_reversal_error(state, t: float, problem: NormalizedProblem) -> float:
    """``|phi^{-t}(phi^t(s)) - s|`` in phase space."""
    s = _as_state(state)
    there = integrate_flow(s, t, problem)
    back = integrate_flow(there, -t, problem)
    return float(np.linalg.norm(back.as_array() - s.as_array()))
