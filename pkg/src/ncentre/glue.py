"""Periodic orbits glued from alternating outer and inner arcs.

A chain of ``2n`` points on the interaction circle fixes the orbit: outer arc
``j`` runs from ``p_{2j}`` to ``p_{2j+1}`` and inner arc ``j`` from ``p_{2j+1}``
to ``p_{2j+2}`` (indices mod ``2n``) in the class of the ``j``-th symbol.  The
total Jacobi length ``F`` of the legs is minimized over the chain; at an
interior critical point the velocities match at every junction and the
concatenation is a smooth periodic solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .inner import (
    InnerArc,
    InnerError,
    InnerOptions,
    ShootingError,
    inward_angle,
    min_centre_distance,
    minimize_inner,
    polish_launch,
    reflection_residual,
    seed_path,
    minimize_path,
    build_ejection_collision,
    _angle_diff,
)
from .maupertuis import jacobi_length as path_jacobi_length, separates_nodes
from .model import (
    EnergyTooLargeError,
    NormalizedProblem,
    OrbitArc,
    Partition,
    WindingVector,
    partition_to_winding,
    potential,
)
from .outer import (
    DEFAULT_DELTA_FRACTION,
    EndpointsTooFarError,
    OuterArc,
    brake_time,
    solve_outer,
)


class GlueError(RuntimeError):
    def __init__(self, message: str, leg: int | None = None):
        super().__init__(message if leg is None else f"leg {leg}: {message}")
        self.leg = leg


class ChainConstraintError(EnergyTooLargeError):
    """The minimizer sits on the boundary of the admissible chain set."""


class CertificateError(RuntimeError):
    def __init__(self, message: str, leg: int | None = None):
        super().__init__(message if leg is None else f"leg {leg}: {message}")
        self.leg = leg


@dataclass(frozen=True)
class GlueOptions:
    delta_fraction: float = DEFAULT_DELTA_FRACTION
    delta_bar_factor: float = 2.0
    tol_grad: float = 1e-9
    tol_junction: float = 1e-6
    max_iter: int = 60
    K: int = 256
    scan_points: int = 16
    scan_K: int = 128
    starts: int = 2
    jitter_deg: float = 10.0
    seed: int = 0
    # largest change of any chain angle (radians) in one Newton step
    trust_radius: float = 0.05


@dataclass(frozen=True, eq=False)
class EndpointChain:
    angles: np.ndarray
    symbols: tuple[Partition, ...]

    def __post_init__(self):
        a = np.array(self.angles, dtype=float)
        if a.shape != (2 * len(self.symbols),):
            raise ValueError("a chain needs two angles per symbol")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "symbols", tuple(self.symbols))

    @property
    def n(self) -> int:
        return len(self.symbols)

    def points(self, radius: float) -> np.ndarray:
        return radius * np.column_stack([np.cos(self.angles), np.sin(self.angles)])

    def outer_separations(self, radius: float) -> np.ndarray:
        p = self.points(radius)
        return np.hypot(*(p[1::2] - p[0::2]).T)

    def in_domain(self, radius: float, delta: float) -> bool:
        return bool(np.all(self.outer_separations(radius) <= delta * (1 + 1e-12)))

    def reversed(self) -> "EndpointChain":
        """Chain of the time-reversed orbit: points and symbols in reverse order."""
        n = self.n
        return EndpointChain(self.angles[::-1], tuple(self.symbols[(n - 2 - j) % n] for j in range(n)))

    def with_angles(self, angles) -> "EndpointChain":
        return EndpointChain(np.asarray(angles, float), self.symbols)


@dataclass(eq=False)
class PeriodicOrbit:
    chain: EndpointChain
    arcs: list
    junction_times: np.ndarray
    period: float
    junction_report: dict
    symbol_certificate: list
    total_length: float
    problem: NormalizedProblem = field(repr=False)

    def samples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenated ``(t, x, v)`` over one period (junction points appear once)."""
        ts, xs, vs = [], [], []
        t0 = 0.0
        for k, leg in enumerate(self.arcs):
            arc = leg.arc
            sl = slice(0, None) if k == 0 else slice(1, None)
            ts.append(arc.times[sl] - arc.times[0] + t0)
            xs.append(arc.positions[sl])
            vs.append(arc.velocities[sl])
            t0 += arc.duration
        return np.concatenate(ts), np.vstack(xs), np.vstack(vs)

    def energy_residual(self) -> float:
        t, x, v = self.samples()
        return float(np.max(np.abs(0.5 * np.sum(v * v, axis=1) - potential(self.problem, x) + 1.0)))

    @property
    def symbols(self) -> tuple[Partition, ...]:
        return self.chain.symbols

    def section_states(self, radius: float | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        """States at the starts of the outer legs (outward crossings of the circle)."""
        return [(leg.arc.positions[0].copy(), leg.arc.velocities[0].copy()) for leg in self.arcs[0::2]]


# ---------------------------------------------------------------------------
# leg evaluation
# ---------------------------------------------------------------------------


class ChainSolver:
    """Evaluates legs, ``F`` and its gradient for chains with fixed symbols.

    Inner legs are continued by shooting from the launch angle found at the
    previous chain, keeping each leg in the winding class it started in.
    """

    def __init__(self, problem: NormalizedProblem, symbols, options: GlueOptions | None = None):
        self.problem = problem
        self.symbols = tuple(symbols)
        self.options = options or GlueOptions()
        self.R = problem.radius_R
        self.delta = self.options.delta_fraction * self.R
        self.classes: list[WindingVector | None] = [None] * len(self.symbols)
        self.launch: list[float | None] = [None] * len(self.symbols)
        self.outer_seed: list[tuple[float, float] | None] = [None] * len(self.symbols)
        self._cache: dict = {}
        self.evaluations = 0

    @property
    def max_angle_gap(self) -> float:
        return 2.0 * math.asin(min(1.0, self.delta / (2.0 * self.R)))

    def point(self, angle: float) -> np.ndarray:
        return self.R * np.array([math.cos(angle), math.sin(angle)])

    def outer_leg(self, j: int, a0: float, a1: float) -> OuterArc:
        try:
            arc = solve_outer(self.point(a0), self.point(a1), self.problem, delta=self.delta * 1.000001,
                              seed=self.outer_seed[j])
        except EndpointsTooFarError:
            if self.outer_seed[j] is None:
                raise
            arc = solve_outer(self.point(a0), self.point(a1), self.problem, delta=self.delta * 1.000001)
        self.outer_seed[j] = (arc.theta_dot0, arc.duration)
        return arc

    def inner_leg(self, j: int, a0: float, a1: float) -> InnerArc:
        p1, p2 = self.point(a0), self.point(a1)
        l = self.classes[j]
        if l is not None and self.launch[j] is not None:
            try:
                phi, tr = polish_launch(self.problem, p1, p2, self.launch[j], l, window=0.01, samples=21)
                arc = _inner_from_trajectory(tr, p2, l, phi, self.problem)
                self.launch[j] = phi
                return arc
            except (ShootingError, InnerError, dynamics.IntegrationError):
                pass
        opts = InnerOptions(K=self.options.K, seed=self.options.seed)
        if l is None:
            candidates = [partition_to_winding(self.symbols[j])]
            candidates.append(candidates[0].complement())
        else:
            candidates = [l]
        best = None
        err: Exception | None = None
        for cls in candidates:
            try:
                res = minimize_inner(p1, p2, cls, self.problem, opts)
            except InnerError as exc:
                err = exc
                continue
            if best is None or res.jacobi_length < best.jacobi_length:
                best = res
        if best is None:
            raise GlueError(f"inner minimization failed: {err}", 2 * j + 1)
        self.classes[j] = best.winding
        self.launch[j] = best.launch_angle
        return best

    def legs(self, angles) -> list:
        key = tuple(np.round(np.asarray(angles, float), 15))
        if key in self._cache:
            return self._cache[key]
        angles = np.asarray(angles, float)
        n = len(self.symbols)
        out = []
        for j in range(n):
            a0, a1, a2 = angles[2 * j], angles[2 * j + 1], angles[(2 * j + 2) % (2 * n)]
            try:
                out.append(self.outer_leg(j, a0, a1))
            except (EndpointsTooFarError, dynamics.IntegrationError) as exc:
                raise GlueError(str(exc), 2 * j) from exc
            out.append(self.inner_leg(j, a1, a2))
        self.evaluations += 1
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = out
        return out

    def F(self, angles) -> float:
        return float(sum(leg.jacobi_length for leg in self.legs(angles)))

    def grad(self, angles) -> np.ndarray:
        angles = np.asarray(angles, float)
        legs = self.legs(angles)
        return junction_gradient(legs, angles, self.R)


def _inner_from_trajectory(tr, p2, l, phi, problem) -> InnerArc:
    arc = tr.to_arc("inner")
    pos = arc.positions.copy()
    pos[-1] = p2
    arc = OrbitArc(arc.times, pos, arc.velocities, arc.kind, arc.jacobi_length, arc.collision_times)
    part = separates_nodes(arc.positions, problem.radius_R, problem)
    if part is None:
        raise InnerError("continued inner arc does not separate the centres cleanly")
    dmin = min_centre_distance(arc.positions, problem)
    return InnerArc(
        path=None,
        arc=arc,
        winding=l,
        partition=part,
        duration=arc.duration,
        outcome="collision-free",
        launch_angle=phi,
        min_distance=dmin,
    )


def junction_gradient(legs, angles, radius: float) -> np.ndarray:
    """``dF/dtheta_k = (R / sqrt 2) <v_{k-1}(end) - v_k(start), i e^{i theta_k}>``."""
    m = len(legs)
    g = np.empty(m)
    for k in range(m):
        tangent = np.array([-math.sin(angles[k]), math.cos(angles[k])])
        v_in = legs[k - 1].arc.velocities[-1]
        v_out = legs[k].arc.velocities[0]
        g[k] = radius / math.sqrt(2.0) * float((v_in - v_out) @ tangent)
    return g


def total_length_F(chain: EndpointChain, problem: NormalizedProblem, options: GlueOptions | None = None) -> float:
    return ChainSolver(problem, chain.symbols, options).F(chain.angles)


def grad_F(chain: EndpointChain, problem: NormalizedProblem, options: GlueOptions | None = None) -> np.ndarray:
    return ChainSolver(problem, chain.symbols, options).grad(chain.angles)


# ---------------------------------------------------------------------------
# assembly and verification
# ---------------------------------------------------------------------------


def assemble(chain: EndpointChain, problem: NormalizedProblem, options: GlueOptions | None = None,
             solver: ChainSolver | None = None) -> PeriodicOrbit:
    """Solve every leg of ``chain`` and concatenate them with junction bookkeeping."""
    options = options or GlueOptions()
    solver = solver or ChainSolver(problem, chain.symbols, options)
    legs = solver.legs(chain.angles)
    durations = np.array([leg.arc.duration for leg in legs])
    junction_times = np.concatenate([[0.0], np.cumsum(durations)])
    certificate = [leg.partition if leg.outcome == "collision-free" else f"collision:{leg.partition.label()}"
                   for leg in legs[1::2]]
    orbit = PeriodicOrbit(
        chain=chain,
        arcs=legs,
        junction_times=junction_times,
        period=float(junction_times[-1]),
        junction_report={},
        symbol_certificate=certificate,
        total_length=float(sum(leg.jacobi_length for leg in legs)),
        problem=problem,
    )
    orbit.junction_report = verify_junctions(orbit)
    return orbit


def verify_junctions(orbit: PeriodicOrbit) -> dict:
    """Position, velocity, speed and acceleration mismatches at every junction."""
    legs = orbit.arcs
    m = len(legs)
    pos, vel, speed, acc = [], [], [], []
    for k in range(m):
        a = legs[k - 1].arc
        b = legs[k].arc
        pos.append(float(np.hypot(*(a.positions[-1] - b.positions[0]))))
        vel.append(float(np.hypot(*(a.velocities[-1] - b.velocities[0]))))
        speed.append(abs(float(np.hypot(*a.velocities[-1]) - np.hypot(*b.velocities[0]))))
        from .model import grad_potential

        acc.append(float(np.hypot(*(grad_potential(orbit.problem, a.positions[-1])
                                      - grad_potential(orbit.problem, b.positions[0])))))
    return {
        "position_mismatch": pos,
        "velocity_mismatch": vel,
        "speed_mismatch": speed,
        "acceleration_mismatch": acc,
        "max_position_mismatch": max(pos),
        "max_velocity_mismatch": max(vel),
        "max_speed_mismatch": max(speed),
        "max_acceleration_mismatch": max(acc),
    }


def verify_structure(orbit: PeriodicOrbit, symbols=None, *, delta_bar: float | None = None) -> dict:
    """Check alternation, outer proximity and the per-passage partitions.

    Returns the certificate on success and raises :class:`CertificateError`
    naming the first failing leg otherwise.
    """
    problem = orbit.problem
    symbols = tuple(symbols) if symbols is not None else orbit.symbols
    R = problem.radius_R
    if delta_bar is None:
        delta_bar = 2.0 * DEFAULT_DELTA_FRACTION * R
    if len(symbols) != len(orbit.arcs) // 2:
        raise CertificateError("number of symbols differs from the number of inner passages")
    tol = 1e-8
    for k, leg in enumerate(orbit.arcs):
        r = np.hypot(leg.arc.positions[1:-1, 0], leg.arc.positions[1:-1, 1])
        if k % 2 == 0:
            if r.size and np.min(r) < R - tol:
                raise CertificateError("outer leg enters the interaction disk", k)
            sep = float(np.hypot(*(leg.arc.positions[-1] - leg.arc.positions[0])))
            if sep >= delta_bar:
                raise CertificateError(f"outer endpoints {sep:.3e} apart, not within {delta_bar:.3e}", k)
        else:
            if r.size and np.max(r) > R + tol:
                raise CertificateError("inner leg leaves the interaction disk", k)
            want = symbols[k // 2]
            if leg.outcome == "collision-free":
                got = separates_nodes(leg.arc.positions, R, problem)
                if got != want:
                    shown = got.label() if got is not None else "no clean partition"
                    raise CertificateError(f"passage separates as {shown}, expected {want.label()}", k)
            else:
                if want.isolated_centre != leg.collision_centre:
                    raise CertificateError("collision with a centre that the symbol does not isolate", k)
                if reflection_residual(leg.arc) > 1e-6:
                    raise CertificateError("ejection-collision arc fails the reflection identity", k)
    collisions = [leg for leg in orbit.arcs[1::2] if leg.outcome != "collision-free"]
    if collisions and not _collision_symmetry_ok(symbols):
        raise CertificateError("collision orbit with a symbol tuple that is not symmetric")
    return {
        "alternation": True,
        "outer_proximity": True,
        "partitions": [s.label() for s in symbols],
        "delta_bar": delta_bar,
        "passed": True,
    }


def _collision_symmetry_ok(symbols) -> bool:
    """A bouncing orbit retraces itself, so its symbol cycle reads the same backwards."""
    n = len(symbols)
    seq = list(symbols)
    rev = seq[::-1]
    return any(rev == seq[k:] + seq[:k] for k in range(n))


# ---------------------------------------------------------------------------
# minimization
# ---------------------------------------------------------------------------


def _project(angles: np.ndarray, max_gap: float) -> np.ndarray:
    a = angles.copy()
    for j in range(0, a.size, 2):
        d = _angle_diff(a[j + 1], a[j])
        if abs(d) > max_gap:
            mid = a[j] + 0.5 * d
            d = math.copysign(max_gap, d)
            a[j] = mid - 0.5 * d
            a[j + 1] = mid + 0.5 * d
    return a


def initial_chain(problem: NormalizedProblem, symbols, options: GlueOptions | None = None) -> list[np.ndarray]:
    """Candidate chains with zero-length outer legs, best first.

    Every inner leg is minimized between all pairs of a coarse grid of circle
    points; a cyclic dynamic programme then picks the grid angles that minimize
    the summed inner lengths.
    """
    options = options or GlueOptions()
    symbols = tuple(symbols)
    n = len(symbols)
    m = options.scan_points
    R = problem.radius_R
    ang = 2.0 * math.pi * np.arange(m) / m
    pts = R * np.column_stack([np.cos(ang), np.sin(ang)])
    tables: dict = {}
    for sym in set(symbols):
        l = partition_to_winding(sym)
        C = np.full((m, m), np.inf)
        for a in range(m):
            for b in range(a, m):
                best = np.inf
                for cls in (l, l.complement()):
                    try:
                        path = seed_path(pts[a], pts[b], cls, problem, K=options.scan_K)
                        res, _ = minimize_path(path, problem, tol_grad=1e-8, max_iter=200)
                        best = min(best, path_jacobi_length(res, problem))
                    except (InnerError, ValueError):
                        continue
                C[a, b] = C[b, a] = best
        tables[sym] = C
    costs = [tables[s] for s in symbols]
    results = []
    for start in range(m):
        # legs run x_0 -> x_1 -> ... -> x_{n-1} -> x_0; value[b] is the cheapest
        # way to reach x_j = b from x_0 = start
        if n == 1:
            results.append((float(costs[0][start, start]), [float(ang[start])]))
            continue
        value = np.full(m, np.inf)
        value[start] = 0.0
        backs = []
        for j in range(n - 1):
            tot = value[:, None] + costs[j]
            backs.append(np.argmin(tot, axis=0))
            value = np.min(tot, axis=0)
        tot = value + costs[n - 1][:, start]
        seq = [int(np.argmin(tot))]
        total = float(tot[seq[0]])
        for bk in reversed(backs[1:]):
            seq.append(int(bk[seq[-1]]))
        seq.append(start)
        seq = seq[::-1]
        if np.isfinite(total):
            results.append((total, [float(ang[i]) for i in seq]))
    if not results:
        raise GlueError("no inner leg could be minimized on the scan grid")
    results.sort(key=lambda r: r[0])
    chains = []
    seen = set()
    for total, xs in results:
        key = tuple(round(x, 6) for x in xs)
        if key in seen:
            continue
        seen.add(key)
        chains.append(np.repeat(np.array(xs), 2))
    return chains


def _fd_hessian(solver: ChainSolver, a: np.ndarray, h: float) -> np.ndarray | None:
    m = a.size
    H = np.empty((m, m))
    try:
        for k in range(m):
            e = np.zeros(m)
            e[k] = h
            H[:, k] = (solver.grad(a + e) - solver.grad(a - e)) / (2.0 * h)
    except (GlueError, InnerError, dynamics.IntegrationError):
        return None
    return 0.5 * (H + H.T)


_LEG_FAILURES = (GlueError, InnerError, dynamics.IntegrationError)


def _newton_chain(solver: ChainSolver, angles: np.ndarray, options: GlueOptions, log: list) -> np.ndarray:
    """Damped Newton iteration on the stationarity condition, with projection onto the chain domain.

    Steps are capped by a trust radius in angle; a trial chain whose legs cannot
    be solved counts as a rejected step.
    """
    max_gap = solver.max_angle_gap
    a = _project(angles, max_gap)
    F = solver.F(a)
    g = solver.grad(a)
    mu = 1e-2
    radius = options.trust_radius
    for it in range(options.max_iter):
        gnorm = float(np.max(np.abs(g)))
        log.append({"iteration": it, "F": F, "grad": gnorm})
        if gnorm <= options.tol_grad:
            break
        m = a.size
        H = _fd_hessian(solver, a, 1e-6)
        if H is None:
            H = np.eye(m) * max(1.0, float(np.abs(g).max()) / radius)
        w = np.linalg.eigvalsh(H)
        accepted = False
        for _ in range(30):
            shift = max(0.0, -float(w.min())) + mu * max(1.0, float(np.abs(w).max()))
            step = -np.linalg.solve(H + shift * np.eye(m), g)
            big = float(np.max(np.abs(step)))
            if big > radius:
                step *= radius / big
            trial = _project(a + step, max_gap)
            if np.max(np.abs(trial - a)) < 1e-14:
                break
            try:
                F_new = solver.F(trial)
            except _LEG_FAILURES:
                mu *= 10.0
                radius *= 0.5
                continue
            if F_new <= F - 1e-4 * abs(float(g @ (trial - a))) or (F_new <= F + 1e-13 and gnorm < 1e-6):
                try:
                    g_new = solver.grad(trial)
                except _LEG_FAILURES:
                    mu *= 10.0
                    radius *= 0.5
                    continue
                a, F, g = trial, F_new, g_new
                accepted = True
                mu = max(mu / 10.0, 1e-12)
                radius = min(2.0 * radius, options.trust_radius)
                break
            mu *= 10.0
        if not accepted:
            break
    return a


def minimize_chain(symbols, problem: NormalizedProblem, options: GlueOptions | None = None) -> PeriodicOrbit:
    """Chain of minimal total Jacobi length for ``symbols`` and its glued orbit."""
    options = options or GlueOptions()
    symbols = tuple(symbols)
    if not symbols:
        raise GlueError("empty symbol sequence")
    for s in symbols:
        if s.n_centres != problem.n_centres:
            raise GlueError(f"symbol {s.label()} refers to {s.n_centres} centres, problem has {problem.n_centres}")
    rng = np.random.default_rng(options.seed)
    starts = initial_chain(problem, symbols, options)
    tried = list(starts[: max(1, options.starts)])
    results = []
    errors = []
    for k, a0 in enumerate(tried):
        if k > 0:
            a0 = a0 + np.repeat(np.radians(rng.uniform(-options.jitter_deg, options.jitter_deg, len(symbols))), 2)
        solver = ChainSolver(problem, symbols, options)
        log: list = []
        try:
            a = _newton_chain(solver, a0, options, log)
            F = solver.F(a)
            g = solver.grad(a)
        except (GlueError, InnerError, dynamics.IntegrationError) as exc:
            errors.append(exc)
            continue
        results.append((F, a, g, solver, log))
    if not results:
        raise errors[0] if errors else GlueError("chain minimization failed")
    results.sort(key=lambda r: r[0])
    F, a, g, solver, log = results[0]
    chain = EndpointChain(a, symbols)
    gaps = np.abs([_angle_diff(a[2 * j + 1], a[2 * j]) for j in range(len(symbols))])
    active = gaps >= solver.max_angle_gap * (1 - 1e-9)
    if np.any(active) and float(np.max(np.abs(g))) > options.tol_grad:
        raise ChainConstraintError(
            "energy too large: the minimizing chain presses against the outer-leg proximity bound "
            f"(chain angles {np.round(np.degrees(a), 3).tolist()} deg, |grad F| = {float(np.max(np.abs(g))):.2e})"
        )
    orbit = assemble(chain, problem, options, solver)
    orbit.junction_report["descent_log"] = log
    orbit.junction_report["grad_inf"] = float(np.max(np.abs(g)))
    verify_structure(orbit, symbols, delta_bar=options.delta_bar_factor * solver.delta)
    if orbit.junction_report["max_velocity_mismatch"] > options.tol_junction:
        raise CertificateError(
            f"junction velocity mismatch {orbit.junction_report['max_velocity_mismatch']:.3e} "
            f"exceeds {options.tol_junction:.1e}"
        )
    return orbit


def leg_time_bounds(problem: NormalizedProblem, *, samples: int = 6, options: GlueOptions | None = None,
                    rng_seed: int = 0) -> dict:
    """Empirical ranges of inner and outer leg durations over sampled endpoints."""
    from .model import enumerate_partitions

    options = options or GlueOptions()
    rng = np.random.default_rng(rng_seed)
    R = problem.radius_R
    delta = options.delta_fraction * R
    inner_t, outer_t = [], []
    for part in enumerate_partitions(problem.n_centres):
        for _ in range(samples):
            a = rng.uniform(0.0, 2.0 * math.pi)
            b = a + math.pi + rng.uniform(-0.5, 0.5)
            p1 = R * np.array([math.cos(a), math.sin(a)])
            p2 = R * np.array([math.cos(b), math.sin(b)])
            try:
                leg = minimize_inner(p1, p2, partition_to_winding(part), problem, InnerOptions(K=options.scan_K))
                inner_t.append(leg.duration)
            except InnerError:
                continue
    for _ in range(samples):
        a = rng.uniform(0.0, 2.0 * math.pi)
        d = rng.uniform(-1.0, 1.0) * 2.0 * math.asin(0.5 * delta / R) * 0.9
        p0 = R * np.array([math.cos(a), math.sin(a)])
        p1 = R * np.array([math.cos(a + d), math.sin(a + d)])
        outer_t.append(solve_outer(p0, p1, problem).duration)
    return {
        "inner": (min(inner_t), max(inner_t)) if inner_t else (float("nan"), float("nan")),
        "outer": (min(outer_t), max(outer_t)),
        "C1": min(inner_t + outer_t),
        "C2": max(inner_t + outer_t),
        "brake_time": brake_time(problem.alpha, problem.total_mass, R),
    }
