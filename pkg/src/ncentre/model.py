"""Problem data for the planar N-centre problem and its normalization to energy -1.

The equation of motion is ``x'' = grad V(x)`` with

    V(x) = sum_j m_j / (alpha |x - c_j|^alpha),   1 <= alpha < 2,

and the energy relation ``|x'|^2 / 2 - V(x) = h`` with ``h < 0``.  Every
solver in this package works on the rescaled problem at energy ``-1``; results
are mapped back with :func:`map_solution_back`.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels


class ConfigError(ValueError):
    """Invalid problem data or request."""


class SingularPointError(ValueError):
    """Evaluation of the potential at a centre."""

    def __init__(self, centre_index: int):
        super().__init__(f"potential evaluated at centre {centre_index + 1}")
        self.centre_index = centre_index


class EnergyTooLargeError(ConfigError):
    """The normalized geometry does not fit inside the interaction circle."""


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemConfig:
    """Centres, masses, homogeneity degree and energy of an N-centre problem."""

    centres: tuple[tuple[float, float], ...]
    masses: tuple[float, ...]
    alpha: float
    energy: float

    def __post_init__(self):
        centres = tuple((float(c[0]), float(c[1])) for c in self.centres)
        masses = tuple(float(m) for m in self.masses)
        object.__setattr__(self, "centres", centres)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "energy", float(self.energy))
        if len(centres) < 1:
            raise ConfigError("at least one centre is required")
        if len(masses) != len(centres):
            raise ConfigError("centres and masses differ in length")
        if any(not math.isfinite(v) for c in centres for v in c):
            raise ConfigError("centre coordinates must be finite")
        if any(not (m > 0.0 and math.isfinite(m)) for m in masses):
            raise ConfigError("masses must be strictly positive")
        if not (1.0 <= self.alpha < 2.0):
            raise ConfigError("alpha must lie in [1, 2)")
        if not (self.energy < 0.0 and math.isfinite(self.energy)):
            raise ConfigError("energy must be strictly negative")
        for a, b in itertools.combinations(range(len(centres)), 2):
            if centres[a] == centres[b]:
                raise ConfigError(f"centres {a + 1} and {b + 1} coincide")

    @property
    def n_centres(self) -> int:
        return len(self.centres)

    @property
    def centre_array(self) -> np.ndarray:
        return np.array(self.centres, dtype=float)

    @property
    def mass_array(self) -> np.ndarray:
        return np.array(self.masses, dtype=float)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "energy": self.energy,
            "centres": [list(c) for c in self.centres],
            "masses": list(self.masses),
        }


_CONFIG_FIELDS = {"alpha", "energy", "centres", "masses"}


def config_from_dict(data: dict) -> ProblemConfig:
    if not isinstance(data, dict):
        raise ConfigError("problem config must be a JSON object")
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    missing = _CONFIG_FIELDS - set(data)
    if missing:
        raise ConfigError(f"missing config fields: {sorted(missing)}")
    centres = data["centres"]
    if not isinstance(centres, list) or any(
        not isinstance(c, (list, tuple)) or len(c) != 2 for c in centres
    ):
        raise ConfigError("centres must be a list of [x, y] pairs")
    try:
        return ProblemConfig(
            centres=tuple(tuple(c) for c in centres),
            masses=tuple(data["masses"]),
            alpha=data["alpha"],
            energy=data["energy"],
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ProblemConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)


@dataclass(frozen=True, eq=False)
class NormalizedProblem:
    """The rescaled problem at energy -1 together with its interaction circle.

    ``source`` keeps the original configuration so that solutions can be
    mapped back to its energy level.
    """

    scaled_centres: np.ndarray
    masses: np.ndarray
    alpha: float
    epsilon: float
    total_mass: float
    radius_R: float
    source: ProblemConfig | None = None
    _cx: np.ndarray = field(init=False, repr=False)
    _cy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        centres = np.array(self.scaled_centres, dtype=float).reshape(-1, 2)
        centres.setflags(write=False)
        masses = np.array(self.masses, dtype=float)
        masses.setflags(write=False)
        object.__setattr__(self, "scaled_centres", centres)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "_cx", np.ascontiguousarray(centres[:, 0]))
        object.__setattr__(self, "_cy", np.ascontiguousarray(centres[:, 1]))

    @property
    def n_centres(self) -> int:
        return self.scaled_centres.shape[0]

    @property
    def energy(self) -> float:
        return -1.0

    @property
    def hill_radius(self) -> float:
        """Radius where the merged-centre potential equals 1, ``(M/alpha)^(1/alpha)``."""
        return (self.total_mass / self.alpha) ** (1.0 / self.alpha)

    @property
    def kernel_args(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        return self._cx, self._cy, self.masses, self.alpha


def interaction_radius(alpha: float, total_mass: float) -> float:
    """Radius of the circular energy -1 orbit of the alpha-Kepler problem of mass M."""
    if not (1.0 <= alpha < 2.0):
        raise ConfigError("alpha must lie in [1, 2)")
    if total_mass <= 0.0:
        raise ConfigError("total mass must be positive")
    return ((2.0 - alpha) * total_mass / (2.0 * alpha)) ** (1.0 / alpha)


def check_geometry(epsilon: float, radius: float, alpha: float, total_mass: float) -> None:
    """Raise :class:`EnergyTooLargeError` unless ``eps < R/2 < R < (M/alpha)^(1/alpha) - eps``."""
    outer = (total_mass / alpha) ** (1.0 / alpha) - epsilon
    if not epsilon < radius / 2.0:
        raise EnergyTooLargeError(
            f"energy too large: centres reach radius {epsilon:.6g} >= R/2 = {radius / 2.0:.6g}"
        )
    if not radius < outer:
        raise EnergyTooLargeError(
            f"energy too large: R = {radius:.6g} is not below (M/alpha)^(1/alpha) - eps = {outer:.6g}"
        )


def space_factor(energy: float, alpha: float) -> float:
    """Dilation ``(-h)^(1/alpha)`` taking original positions to normalized ones."""
    return (-energy) ** (1.0 / alpha)


def time_factor(energy: float, alpha: float) -> float:
    """Factor ``(-h)^((alpha+2)/(2 alpha))`` taking original times to normalized ones."""
    return (-energy) ** ((alpha + 2.0) / (2.0 * alpha))


def rescale_to_normalized(config: ProblemConfig) -> NormalizedProblem:
    lam = space_factor(config.energy, config.alpha)
    centres = lam * config.centre_array
    masses = config.mass_array
    total = float(masses.sum())
    eps = float(np.max(np.hypot(centres[:, 0], centres[:, 1])))
    radius = interaction_radius(config.alpha, total)
    check_geometry(eps, radius, config.alpha, total)
    return NormalizedProblem(
        scaled_centres=centres,
        masses=masses,
        alpha=config.alpha,
        epsilon=eps,
        total_mass=total,
        radius_R=radius,
        source=config,
    )


def normalized_problem(centres, masses, alpha: float) -> NormalizedProblem:
    """Build a normalized problem directly from energy -1 data."""
    config = ProblemConfig(
        centres=tuple(tuple(c) for c in np.asarray(centres, float)),
        masses=tuple(np.asarray(masses, float)),
        alpha=alpha,
        energy=-1.0,
    )
    return rescale_to_normalized(config)


def scaled_config(problem: NormalizedProblem, energy: float) -> ProblemConfig:
    """The original-coordinates configuration at ``energy`` whose normalization is ``problem``."""
    lam = space_factor(energy, problem.alpha)
    centres = problem.scaled_centres / lam
    return ProblemConfig(
        centres=tuple(tuple(c) for c in centres),
        masses=tuple(problem.masses),
        alpha=problem.alpha,
        energy=energy,
    )


# ---------------------------------------------------------------------------
# potential
# ---------------------------------------------------------------------------


def _centres_masses(problem) -> tuple[np.ndarray, np.ndarray, float]:
    if isinstance(problem, NormalizedProblem):
        return problem.scaled_centres, problem.masses, problem.alpha
    return problem.centre_array, problem.mass_array, problem.alpha


def _check_regular(x: np.ndarray, centres: np.ndarray) -> np.ndarray:
    d = x[..., None, :] - centres
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0.0):
        idx = np.argwhere(r == 0.0)[0]
        raise SingularPointError(int(idx[-1]))
    return r


def potential(problem, x) -> np.ndarray | float:
    """``V(x)``; ``x`` may be a single point or an array of points ``(..., 2)``."""
    centres, masses, alpha = _centres_masses(problem)
    x = np.asarray(x, dtype=float)
    r = _check_regular(x, centres)
    v = np.sum(masses / (alpha * r**alpha), axis=-1)
    return float(v) if v.ndim == 0 else v


def grad_potential(problem, x) -> np.ndarray:
    """``grad V(x) = -sum_j m_j (x - c_j) / |x - c_j|^(alpha + 2)``."""
    centres, masses, alpha = _centres_masses(problem)
    x = np.asarray(x, dtype=float)
    r = _check_regular(x, centres)
    d = x[..., None, :] - centres
    w = masses / r ** (alpha + 2.0)
    return -np.sum(w[..., None] * d, axis=-2)


def hessian_potential(problem, x) -> np.ndarray:
    """Second derivatives of ``V`` at points ``x`` (shape ``(..., 2, 2)``)."""
    centres, masses, alpha = _centres_masses(problem)
    x = np.asarray(x, dtype=float)
    r = _check_regular(x, centres)
    d = x[..., None, :] - centres
    a = masses / r ** (alpha + 2.0)
    b = (alpha + 2.0) * masses / r ** (alpha + 4.0)
    eye = np.eye(2)
    outer = d[..., :, None] * d[..., None, :]
    h = -a[..., None, None] * eye + b[..., None, None] * outer
    return np.sum(h, axis=-3)


def energy_residual(problem: NormalizedProblem, positions, velocities) -> np.ndarray:
    """``|v|^2/2 - V(x) + 1`` sample by sample (zero on the energy -1 shell)."""
    positions = np.asarray(positions, float)
    velocities = np.asarray(velocities, float)
    return 0.5 * np.sum(velocities**2, axis=-1) - potential(problem, positions) + 1.0


# ---------------------------------------------------------------------------
# partitions and winding classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """An unordered splitting of the centre indices (0-based) into two non-empty sets.

    The canonical form lists the side containing centre 0 first, each side sorted.
    """

    side_a: tuple[int, ...]
    side_b: tuple[int, ...]

    def __post_init__(self):
        a = tuple(sorted(set(int(i) for i in self.side_a)))
        b = tuple(sorted(set(int(i) for i in self.side_b)))
        if not a or not b:
            raise ConfigError("both sides of a partition must be non-empty")
        if set(a) & set(b):
            raise ConfigError("partition sides overlap")
        if set(a) | set(b) != set(range(len(a) + len(b))):
            raise ConfigError("partition sides must cover 0..N-1")
        if 0 in b:
            a, b = b, a
        object.__setattr__(self, "side_a", a)
        object.__setattr__(self, "side_b", b)

    @property
    def n_centres(self) -> int:
        return len(self.side_a) + len(self.side_b)

    @property
    def isolated_centre(self) -> int | None:
        """Index ``j`` when this partition is ``Q_j`` (one centre alone), else ``None``."""
        if len(self.side_b) == 1:
            return self.side_b[0]
        if len(self.side_a) == 1:
            return self.side_a[0]
        return None

    @property
    def canonical_form(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return (self.side_a, self.side_b)

    def label(self) -> str:
        """``Qj`` (1-based) for single-centre partitions, else ``{1,2}|{3,4}``."""
        j = self.isolated_centre
        if j is not None and not (self.n_centres == 2 and j == 1):
            return f"Q{j + 1}"
        if self.n_centres == 2:
            return "Q1"
        fmt = lambda s: "{" + ",".join(str(i + 1) for i in s) + "}"
        return f"{fmt(self.side_a)}|{fmt(self.side_b)}"

    def to_parities(self) -> tuple[int, ...]:
        out = [0] * self.n_centres
        for i in self.side_b:
            out[i] = 1
        return tuple(out)


def isolating_partition(j: int, n_centres: int) -> Partition:
    """``Q_j``: centre ``j`` (0-based) against all the others."""
    if n_centres < 2:
        raise ConfigError("partitions need at least two centres")
    if not 0 <= j < n_centres:
        raise ConfigError(f"centre index {j + 1} out of range 1..{n_centres}")
    return Partition((i for i in range(n_centres) if i != j), (j,))


def parse_partition(label: str, n_centres: int) -> Partition:
    """Parse ``Q3`` or ``{1,2}|{3}`` (1-based indices)."""
    text = label.strip()
    if text.upper().startswith("Q") and text[1:].isdigit():
        return isolating_partition(int(text[1:]) - 1, n_centres)
    if "|" in text:
        try:
            sides = [
                tuple(int(t) - 1 for t in part.strip().strip("{}").split(",") if t.strip())
                for part in text.split("|")
            ]
        except ValueError as exc:
            raise ConfigError(f"cannot parse partition {label!r}") from exc
        if len(sides) == 2:
            p = Partition(*sides)
            if p.n_centres != n_centres:
                raise ConfigError(f"partition {label!r} does not cover {n_centres} centres")
            return p
    raise ConfigError(f"cannot parse partition {label!r}")


def enumerate_partitions(n_centres: int) -> list[Partition]:
    """All ``2^(N-1) - 1`` two-set partitions in canonical form."""
    if n_centres < 2:
        raise ConfigError("partitions need at least two centres")
    out = []
    rest = list(range(1, n_centres))
    for size in range(0, n_centres - 1):
        for extra in itertools.combinations(rest, size):
            side_a = (0,) + extra
            side_b = tuple(i for i in rest if i not in extra)
            out.append(Partition(side_a, side_b))
    return out


@dataclass(frozen=True)
class WindingVector:
    """Parities of the winding numbers of a path around each centre."""

    parities: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "parities", tuple(int(p) % 2 for p in self.parities))

    @property
    def admissible(self) -> bool:
        return len(set(self.parities)) > 1

    def complement(self) -> "WindingVector":
        return WindingVector(tuple(1 - p for p in self.parities))

    def canonical(self) -> "WindingVector":
        return self.complement() if self.parities[0] == 1 else self


def winding_to_partition(l: WindingVector | Sequence[int]) -> Partition:
    if not isinstance(l, WindingVector):
        l = WindingVector(tuple(l))
    if not l.admissible:
        raise ConfigError(f"winding vector {l.parities} is not admissible")
    zeros = tuple(i for i, p in enumerate(l.parities) if p == 0)
    ones = tuple(i for i, p in enumerate(l.parities) if p == 1)
    return Partition(zeros, ones)


def partition_to_winding(p: Partition) -> WindingVector:
    return WindingVector(p.to_parities())


# ---------------------------------------------------------------------------
# time-parametrized arcs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrbitArc:
    """Samples ``(t, x, v)`` of a solution segment; ``t`` starts at ``t0``."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    kind: str = "arc"
    jacobi_length: float = float("nan")
    collision_times: tuple[float, ...] = ()

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def start(self) -> np.ndarray:
        return self.positions[0]

    @property
    def end(self) -> np.ndarray:
        return self.positions[-1]

    def shifted(self, dt: float) -> "OrbitArc":
        return OrbitArc(
            self.times + dt,
            self.positions,
            self.velocities,
            self.kind,
            self.jacobi_length,
            tuple(t + dt for t in self.collision_times),
        )

    def reversed(self) -> "OrbitArc":
        """Time-reversed arc: ``t -> T - t`` and ``v -> -v``."""
        t_end = self.times[-1]
        t0 = self.times[0]
        return OrbitArc(
            (t_end - self.times[::-1]) + t0,
            self.positions[::-1].copy(),
            -self.velocities[::-1].copy(),
            self.kind,
            self.jacobi_length,
            tuple(sorted(t_end - t + t0 for t in self.collision_times)),
        )


def map_solution_back(arc: OrbitArc, energy: float, alpha: float) -> OrbitArc:
    """Map an energy -1 arc to energy ``h``: ``x(t) = (-h)^(-1/alpha) y((-h)^((alpha+2)/(2 alpha)) t)``."""
    if not energy < 0.0:
        raise ConfigError("energy must be strictly negative")
    lam = space_factor(energy, alpha)
    tau = time_factor(energy, alpha)
    return OrbitArc(
        arc.times / tau,
        arc.positions / lam,
        arc.velocities * tau / lam,
        arc.kind,
        arc.jacobi_length * (lam ** (alpha / 2.0 - 1.0)) if math.isfinite(arc.jacobi_length) else arc.jacobi_length,
        tuple(t / tau for t in arc.collision_times),
    )


def map_solution_forward(arc: OrbitArc, energy: float, alpha: float) -> OrbitArc:
    """Inverse of :func:`map_solution_back`."""
    lam = space_factor(energy, alpha)
    tau = time_factor(energy, alpha)
    return OrbitArc(
        arc.times * tau,
        arc.positions * lam,
        arc.velocities * lam / tau,
        arc.kind,
        arc.jacobi_length / (lam ** (alpha / 2.0 - 1.0)) if math.isfinite(arc.jacobi_length) else arc.jacobi_length,
        tuple(t * tau for t in arc.collision_times),
    )


def config_energy_residual(config: ProblemConfig, arc: OrbitArc) -> np.ndarray:
    """``|v|^2/2 - V(x) - h`` along an arc in original coordinates."""
    return 0.5 * np.sum(arc.velocities**2, axis=-1) - potential(config, arc.positions) - config.energy


def circle_point(radius: float, angle: float) -> np.ndarray:
    return radius * np.array([math.cos(angle), math.sin(angle)])


def kernel_potential(problem: NormalizedProblem, x: float, y: float) -> float:
    cx, cy, m, a = problem.kernel_args
    return _kernels.potential_xy(x, y, cx, cy, m, a)


__all__ = [
    "ConfigError",
    "EnergyTooLargeError",
    "NormalizedProblem",
    "OrbitArc",
    "Partition",
    "ProblemConfig",
    "SingularPointError",
    "WindingVector",
    "circle_point",
    "config_from_dict",
    "enumerate_partitions",
    "grad_potential",
    "interaction_radius",
    "isolating_partition",
    "load_config",
    "map_solution_back",
    "normalized_problem",
    "parse_partition",
    "potential",
    "rescale_to_normalized",
    "winding_to_partition",
]
