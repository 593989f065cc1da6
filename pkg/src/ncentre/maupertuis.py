"""Discrete Maupertuis and Jacobi-length functionals on uniformly sampled paths.

Paths are sampled on the uniform parameter grid ``s_k = k/K`` of ``[0, 1]``.
Derivatives use eighth-order finite differences (one-sided near the ends) and
integrals use Gregory-corrected trapezoid weights, so that both functionals
and every reparametrization are accurate far beyond the tolerances the
solvers check.  With positive quadrature weights the discrete Cauchy-Schwarz
inequality ``L^2 <= 2 M`` holds exactly, with equality precisely when the
sampled speed is proportional to ``sqrt(V - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import bernoulli

from .model import (
    ConfigError,
    NormalizedProblem,
    OrbitArc,
    Partition,
    WindingVector,
    grad_potential,
    potential,
    winding_to_partition,
)

FD_ORDER = 8
GREGORY_ORDER = 8
TWO_PI = 2.0 * math.pi


class DegenerateMetricError(ValueError):
    """A path leaves the Hill region, where the Jacobi metric vanishes."""


class AmbiguousWindingError(ValueError):
    """A path passes (numerically) through a centre."""


class NotCriticalError(ValueError):
    """A path is too far from a critical point to be turned into a solution."""


# ---------------------------------------------------------------------------
# grid operators
# ---------------------------------------------------------------------------


def _fd_weights(offsets: np.ndarray, order: int = 1) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0 (Fornberg)."""
    n = offsets.size
    c1 = 1.0
    c4 = offsets[0]
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = offsets[i]
        for j in range(i):
            c3 = offsets[i] - offsets[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


@lru_cache(maxsize=32)
def derivative_matrix(K: int) -> np.ndarray:
    """Dense ``(K+1, K+1)`` first-derivative matrix on the grid ``k/K``."""
    if K < FD_ORDER:
        raise ConfigError(f"grid needs at least {FD_ORDER} intervals")
    n = K + 1
    half = FD_ORDER // 2
    D = np.zeros((n, n))
    for k in range(n):
        lo = min(max(k - half, 0), n - FD_ORDER - 1)
        idx = np.arange(lo, lo + FD_ORDER + 1)
        D[k, idx] = _fd_weights((idx - k).astype(float)) * K
    D.setflags(write=False)
    return D


@lru_cache(maxsize=32)
def quadrature_weights(K: int) -> np.ndarray:
    """Gregory end-corrected trapezoid weights on the grid ``k/K`` (all positive)."""
    if K < 2 * GREGORY_ORDER:
        raise ConfigError(f"grid needs at least {2 * GREGORY_ORDER} intervals")
    m = GREGORY_ORDER
    # corrections c_0..c_{m-1} to the unit weights cancel the Euler-Maclaurin
    # end terms f(0)/2 - sum_j B_2j/(2j)! f^(2j-1)(0) for every polynomial of
    # degree < m; the right end is the mirror image
    B = bernoulli(m + 1)
    rhs = np.zeros(m)
    rhs[0] = -0.5
    for d in range(1, m, 2):
        rhs[d] = B[d + 1] / (d + 1)
    A = np.vander(np.arange(m, dtype=float), m, increasing=True).T
    c = np.linalg.solve(A, rhs)
    w = np.ones(K + 1)
    w[:m] += c
    w[K - m + 1 :] += c[::-1]
    w /= K
    w.setflags(write=False)
    return w


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Samples ``u(k/K)``, ``k = 0..K``, of a path between two points of the circle ``|x| = R``."""

    nodes: np.ndarray
    radius: float
    inner: bool = True
    endpoint_tol: float = 1e-10

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 9:
            raise ConfigError("a path needs at least 9 nodes in the plane")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        r = np.hypot(nodes[:, 0], nodes[:, 1])
        tol = self.endpoint_tol * max(1.0, self.radius)
        if abs(r[0] - self.radius) > tol or abs(r[-1] - self.radius) > tol:
            raise ConfigError("path endpoints must lie on the interaction circle")
        if self.inner and np.any(r > self.radius + tol):
            raise ConfigError("inner path leaves the interaction disk")

    @property
    def K(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def theta1(self) -> float:
        return math.atan2(self.nodes[0, 1], self.nodes[0, 0]) % TWO_PI

    @property
    def theta2(self) -> float:
        return math.atan2(self.nodes[-1, 1], self.nodes[-1, 0]) % TWO_PI

    @property
    def parameter(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.K + 1)

    def velocities(self) -> np.ndarray:
        return derivative_matrix(self.K) @ self.nodes

    def with_nodes(self, nodes: np.ndarray) -> "PathGrid":
        return PathGrid(nodes, self.radius, self.inner, self.endpoint_tol)

    def reversed(self) -> "PathGrid":
        return self.with_nodes(self.nodes[::-1].copy())


def path_from_function(fn, K: int, radius: float, inner: bool = True) -> PathGrid:
    """Sample ``fn(s)`` (returning ``(len(s), 2)``) on the uniform grid."""
    s = np.linspace(0.0, 1.0, K + 1)
    return PathGrid(np.asarray(fn(s), dtype=float), radius, inner)


@dataclass(frozen=True)
class FunctionalReport:
    maupertuis_value: float
    jacobi_length: float
    omega_squared: float
    kinetic_integral: float
    potential_integral: float
    gap: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _metric(path: PathGrid, problem: NormalizedProblem) -> np.ndarray:
    g = potential(problem, path.nodes) - 1.0
    return g


def functional_report(path: PathGrid, problem: NormalizedProblem) -> FunctionalReport:
    """All Maupertuis/Jacobi quantities of ``path`` in one pass."""
    w = quadrature_weights(path.K)
    du = path.velocities()
    speed2 = np.sum(du * du, axis=1)
    g = _metric(path, problem)
    kinetic = float(w @ speed2)
    pot = float(w @ g)
    if np.any(g < 0.0):
        jac = float("nan")
    else:
        jac = float(w @ np.sqrt(speed2 * g))
    value = 0.5 * kinetic * pot
    omega2 = pot / (0.5 * kinetic) if kinetic > 0.0 else float("inf")
    return FunctionalReport(value, jac, omega2, kinetic, pot, 2.0 * value - jac * jac)


def maupertuis_value(path: PathGrid, problem: NormalizedProblem) -> float:
    """``M(u) = 1/2 int |u'|^2 * int (V(u) - 1)``."""
    return functional_report(path, problem).maupertuis_value


def jacobi_length(path: PathGrid, problem: NormalizedProblem) -> float:
    """``L(u) = int sqrt(|u'|^2 (V(u) - 1))``; needs ``V >= 1`` on the path."""
    g = _metric(path, problem)
    if np.any(g < 0.0):
        raise DegenerateMetricError("path leaves the Hill region {V >= 1}")
    w = quadrature_weights(path.K)
    du = path.velocities()
    return float(w @ np.sqrt(np.sum(du * du, axis=1) * g))


def omega_of(path: PathGrid, problem: NormalizedProblem) -> float:
    """``omega`` with ``omega^2 = int (V - 1) / (1/2 int |u'|^2)``."""
    rep = functional_report(path, problem)
    if not (rep.kinetic_integral > 0.0 and rep.potential_integral > 0.0):
        raise ValueError("Maupertuis value is not positive; omega undefined")
    return math.sqrt(rep.omega_squared)


def el_residual(path: PathGrid, problem: NormalizedProblem) -> np.ndarray:
    """Discrete Euler-Lagrange residual ``grad V(u_k) - omega^2 u''_k`` at interior nodes.

    ``u''`` is ``D (D u)`` with the same one-sided stencils as the kinetic term.
    The weak form ``D^T W D`` would match the discrete functional exactly but its
    boundary rows are not a consistent second derivative, so it is not used here.
    """
    D = derivative_matrix(path.K)
    rep = functional_report(path, problem)
    acc = D @ (D @ path.nodes)
    res = grad_potential(problem, path.nodes) - rep.omega_squared * acc
    return res[1:-1]


# ---------------------------------------------------------------------------
# reparametrization
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _reparametrize(path: PathGrid, problem: NormalizedProblem, density, iterations: int = 50) -> PathGrid:
    """Resample so that ``density(|u'|, V - 1) ds`` is uniform in the new parameter."""
    K = path.K
    s = path.parameter
    spline = make_interp_spline(s, path.nodes, k=7)
    dspline = spline.derivative()

    def rate(t):
        t = np.asarray(t)
        du = dspline(t)
        g = potential(problem, spline(t)) - 1.0
        if np.any(g <= 0.0):
            raise DegenerateMetricError("path touches the Hill boundary")
        return density(np.hypot(du[..., 0], du[..., 1]), g)

    h = 1.0 / K
    xs = s[:-1, None] + 0.5 * h * (_GL_X[None, :] + 1.0)
    cell = 0.5 * h * (rate(xs) @ _GL_W)
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    total = cum[-1]
    target = np.linspace(0.0, total, K + 1)[1:-1]

    # monotone initial guess, then Newton on the exact cumulative integral
    t = np.interp(target, cum, s)
    for _ in range(iterations):
        i = np.clip(np.floor(t * K).astype(int), 0, K - 1)
        a = s[i]
        half = 0.5 * (t - a)
        pts = a[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
        partial = cum[i] + half * (rate(pts) @ _GL_W)
        f = partial - target
        step = f / rate(t)
        t = np.clip(t - step, 0.0, 1.0)
        if np.max(np.abs(step)) < 1e-15:
            break
    new = np.empty_like(path.nodes)
    new[0] = path.nodes[0]
    new[-1] = path.nodes[-1]
    new[1:-1] = spline(t)
    if path.inner:
        r = np.hypot(new[:, 0], new[:, 1])
        over = r > path.radius
        new[over] *= (path.radius / r[over])[:, None]
    return path.with_nodes(new)


def equalize_parametrization(path: PathGrid, problem: NormalizedProblem) -> PathGrid:
    """Reparametrize so that ``|u'|^2`` is proportional to ``V(u) - 1``.

    This is the equality case of ``L^2 <= 2 M``: afterwards the gap vanishes
    to quadrature accuracy while the Jacobi length (a geometric quantity) is
    unchanged.  The new parameter is proportional to physical time.
    """
    return _reparametrize(path, problem, lambda speed, g: speed / np.sqrt(g))


def jacobi_parametrization(path: PathGrid, problem: NormalizedProblem) -> PathGrid:
    """Reparametrize to constant Jacobi speed ``|u'| sqrt(V - 1)``."""
    return _reparametrize(path, problem, lambda speed, g: speed * np.sqrt(g))


def physical_duration(path: PathGrid, problem: NormalizedProblem) -> float:
    """Time ``int |u'| / sqrt(2 (V - 1)) ds`` needed to run the path at energy -1."""
    g = _metric(path, problem)
    if np.any(g <= 0.0):
        raise DegenerateMetricError("path touches the Hill boundary")
    du = path.velocities()
    w = quadrature_weights(path.K)
    return float(w @ (np.hypot(du[:, 0], du[:, 1]) / np.sqrt(2.0 * g)))


def to_physical_solution(
    path: PathGrid,
    problem: NormalizedProblem,
    *,
    residual_tol: float = 1e-3,
    rtol: float = 1e-13,
) -> OrbitArc:
    """Turn a (near-)critical path into a solution of ``x'' = grad V`` at energy -1.

    The path is first brought to physical time, ``x(t) = u(omega t)`` on
    ``[0, 1/omega]``.  The arc is then regenerated by integrating the equation
    of motion from ``u(0)`` and, when the end point misses ``u(1)``, refined by a
    Newton correction of launch direction and duration.  A path whose relative
    Euler-Lagrange residual exceeds ``residual_tol`` is rejected.
    """
    from . import dynamics

    phys = equalize_parametrization(path, problem)
    rel = relative_el_residual(phys, problem)
    if rel > residual_tol:
        raise NotCriticalError(f"relative Euler-Lagrange residual {rel:.3e} exceeds {residual_tol:.1e}")
    omega = omega_of(phys, problem)
    duration = 1.0 / omega
    vel0 = phys.velocities()[0] * omega
    angle = math.atan2(vel0[1], vel0[0])
    target = phys.nodes[-1]
    arc = dynamics.connect(problem, phys.nodes[0], target, angle, duration, rtol=rtol)
    return arc


def relative_el_residual(path: PathGrid, problem: NormalizedProblem) -> float:
    """``max |grad V - omega^2 a| / max |grad V|`` over interior nodes."""
    res = el_residual(path, problem)
    gv = grad_potential(problem, path.nodes[1:-1])
    scale = max(1.0, float(np.max(np.hypot(gv[:, 0], gv[:, 1]))))
    return float(np.max(np.hypot(res[:, 0], res[:, 1]))) / scale


# ---------------------------------------------------------------------------
# winding numbers and classes
# ---------------------------------------------------------------------------


def closing_arc_span(theta1: float, theta2: float) -> float:
    """Counterclockwise angle from ``p2`` back to ``p1`` (zero when they coincide)."""
    theta1 %= TWO_PI
    theta2 %= TWO_PI
    if theta1 > theta2:
        return theta1 - theta2
    if theta1 < theta2:
        return theta1 + TWO_PI - theta2
    return 0.0


def _subtended_angles(points: np.ndarray, centre: np.ndarray) -> np.ndarray:
    a = points[:-1] - centre
    b = points[1:] - centre
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    return np.arctan2(cross, dot)


def _segment_distance(points: np.ndarray, centre: np.ndarray) -> float:
    a = points[:-1]
    d = points[1:] - a
    L2 = np.sum(d * d, axis=1)
    t = np.where(L2 > 0, np.sum((centre - a) * d, axis=1) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * d
    return float(np.min(np.hypot(proj[:, 0] - centre[0], proj[:, 1] - centre[1])))


def closed_loop(nodes: np.ndarray, radius: float) -> np.ndarray:
    """Polyline of the path followed by the counterclockwise arc of ``|x| = R`` back to its start."""
    th1 = math.atan2(nodes[0, 1], nodes[0, 0])
    th2 = math.atan2(nodes[-1, 1], nodes[-1, 0])
    if np.allclose(nodes[0], nodes[-1], rtol=0.0, atol=1e-12 * max(1.0, radius)):
        return nodes
    span = closing_arc_span(th1, th2)
    n = max(8, int(math.ceil(span / 0.01)))
    phi = th2 + np.linspace(0.0, span, n + 1)
    arc = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    arc[-1] = nodes[0]
    return np.vstack([nodes, arc[1:]])


def winding_number_of_nodes(nodes: np.ndarray, radius: float, centre) -> int:
    centre = np.asarray(centre, float)
    loop = closed_loop(np.asarray(nodes, float), radius)
    if _segment_distance(loop, centre) < 1e-12 * max(1.0, radius):
        raise AmbiguousWindingError("closed path passes through a centre")
    total = float(np.sum(_subtended_angles(loop, centre)))
    return int(round(total / TWO_PI))


def winding_number(path: PathGrid, centre_index: int, problem: NormalizedProblem) -> int:
    """Index of the path, closed by the counterclockwise boundary arc, around centre ``j``."""
    return winding_number_of_nodes(path.nodes, path.radius, problem.scaled_centres[centre_index])


def parity_of_nodes(nodes: np.ndarray, radius: float, problem: NormalizedProblem) -> WindingVector:
    return WindingVector(
        tuple(winding_number_of_nodes(nodes, radius, c) % 2 for c in problem.scaled_centres)
    )


def parity_class(path: PathGrid, problem: NormalizedProblem) -> WindingVector:
    return parity_of_nodes(path.nodes, path.radius, problem)


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def has_self_intersection(nodes: np.ndarray, chunk: int = 512) -> bool:
    """True when two non-adjacent segments of the polyline cross transversally."""
    p = np.asarray(nodes, float)
    a = p[:-1]
    b = p[1:]
    n = a.shape[0]
    if n < 3:
        return False
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        i = np.arange(sl.start, sl.stop)[:, None]
        j = np.arange(n)[None, :]
        mask = j > i + 1
        # bounding-box prefilter
        mask &= (lo[sl, None, 0] <= hi[None, :, 0]) & (lo[None, :, 0] <= hi[sl, None, 0])
        mask &= (lo[sl, None, 1] <= hi[None, :, 1]) & (lo[None, :, 1] <= hi[sl, None, 1])
        if not mask.any():
            continue
        ii, jj = np.nonzero(mask)
        ii = ii + sl.start
        A, B, C, D = a[ii], b[ii], a[jj], b[jj]
        o1 = _orient(A[:, 0], A[:, 1], B[:, 0], B[:, 1], C[:, 0], C[:, 1])
        o2 = _orient(A[:, 0], A[:, 1], B[:, 0], B[:, 1], D[:, 0], D[:, 1])
        o3 = _orient(C[:, 0], C[:, 1], D[:, 0], D[:, 1], A[:, 0], A[:, 1])
        o4 = _orient(C[:, 0], C[:, 1], D[:, 0], D[:, 1], B[:, 0], B[:, 1])
        cross = (o1 * o2 < 0) & (o3 * o4 < 0)
        # the first and last segments of a closed-up path share the end point
        if np.any(cross):
            return True
    return False


def separates_nodes(nodes: np.ndarray, radius: float, problem: NormalizedProblem) -> Partition | None:
    if has_self_intersection(nodes):
        return None
    l = parity_of_nodes(nodes, radius, problem)
    if not l.admissible:
        return None
    return winding_to_partition(l)


def separates_according_to(path: PathGrid, problem: NormalizedProblem) -> Partition | None:
    """Partition realized by a self-intersection-free path with admissible parities, else ``None``."""
    return separates_nodes(path.nodes, path.radius, problem)


def path_to_csv_rows(path: PathGrid) -> list[tuple[float, float, float]]:
    return [(float(t), float(x), float(y)) for t, (x, y) in zip(path.parameter, path.nodes)]
