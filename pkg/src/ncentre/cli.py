"""Command-line entry point: solve, inner, outer, decode and plot.

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 certificate
failure.  Every file is written with a canonical JSON encoding (sorted keys,
floats with 17 significant digits) so that an archive re-serializes to the
same bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import dynamics, flow, glue, inner, outer, plot
from .model import (
    ConfigError,
    NormalizedProblem,
    OrbitArc,
    ProblemConfig,
    circle_point,
    config_from_dict,
    load_config,
    map_solution_back,
    map_solution_forward,
    parse_partition,
    rescale_to_normalized,
    space_factor,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CERTIFICATE = 3

ARCHIVE_NAME = "archive.json"
TRAJECTORY_NAME = "trajectory.csv"
PLOT_NAME = "orbit.svg"

_SYMBOL_TOKEN = re.compile(r"\{[^}]*\}\s*\|\s*\{[^}]*\}|[^,]+")


class ArchiveError(ConfigError):
    pass


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------


def _float_text(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot be archived")
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _encode(obj) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float_text(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic text for ``obj``; ``canonical_json(json.loads(s)) == s`` for its own output."""
    return _encode(obj) + "\n"


def write_json(path: Path, obj) -> None:
    path.write_text(canonical_json(obj), encoding="utf-8")


def read_archive(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise ArchiveError(f"{path}: cannot read archive ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path}: archive is not valid JSON ({exc})") from exc
    required = {"problem", "symbols", "chain_angles", "period", "samples", "junction_report", "certificate"}
    if not isinstance(data, dict) or not required <= set(data):
        missing = sorted(required - set(data)) if isinstance(data, dict) else sorted(required)
        raise ArchiveError(f"{path}: archive lacks fields {missing}")
    samples = np.asarray(data["samples"], dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 5 or samples.shape[0] < 2:
        raise ArchiveError(f"{path}: samples must be rows of [t, x, y, vx, vy]")
    return data


# ---------------------------------------------------------------------------
# archives
# ---------------------------------------------------------------------------


def _arc_rows(arc: OrbitArc) -> list:
    return [[t, x[0], x[1], v[0], v[1]] for t, x, v in zip(arc.times, arc.positions, arc.velocities)]


def _to_original(arc: OrbitArc, config: ProblemConfig) -> OrbitArc:
    return map_solution_back(arc, config.energy, config.alpha)


def orbit_archive(orbit: glue.PeriodicOrbit, config: ProblemConfig, certificate: dict, options: glue.GlueOptions) -> dict:
    """Archive of a glued orbit; samples are in the original coordinates at energy ``h``."""
    t, x, v = orbit.samples()
    back = _to_original(OrbitArc(t, x, v), config)
    # first sample index of every leg, so section states can be rebuilt from the samples
    starts, k = [], 0
    for i, leg in enumerate(orbit.arcs):
        starts.append(k)
        k += leg.arc.times.size - 1
    report = {key: val for key, val in orbit.junction_report.items() if key != "descent_log"}
    report["leg_start_indices"] = starts
    return {
        "problem": config.to_dict(),
        "symbols": [s.label() for s in orbit.symbols],
        "chain_angles": list(orbit.chain.angles),
        "period": back.duration,
        "samples": _arc_rows(back),
        "junction_report": report,
        "certificate": {
            **certificate,
            "passages": [p if isinstance(p, str) else p.label() for p in orbit.symbol_certificate],
            "delta_fraction": options.delta_fraction,
            "energy_residual": orbit.energy_residual(),
        },
    }


class ArchivedOrbit:
    """Enough of a periodic orbit, rebuilt from an archive, to run the symbolic checks."""

    def __init__(self, data: dict):
        self.config = config_from_dict(data["problem"])
        self.problem = rescale_to_normalized(self.config)
        n = self.problem.n_centres
        self.symbols = tuple(parse_partition(s, n) for s in data["symbols"])
        rows = np.asarray(data["samples"], dtype=float)
        arc = map_solution_forward(OrbitArc(rows[:, 0], rows[:, 1:3], rows[:, 3:5]), self.config.energy,
                                   self.config.alpha)
        self.arc = arc
        starts = data["junction_report"].get("leg_start_indices")
        if not starts or len(starts) != 2 * len(self.symbols):
            raise ArchiveError("archive lacks leg start indices for every leg")
        self.outer_starts = [int(i) for i in starts[0::2]]

    def section_states(self, radius=None):
        return [(self.arc.positions[i].copy(), self.arc.velocities[i].copy()) for i in self.outer_starts]


def write_csv(path: Path, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "vx", "vy"])
        for r in rows:
            w.writerow([_float_text(float(v)) for v in r])


def _svg_for(positions_list, config: ProblemConfig, problem: NormalizedProblem) -> str:
    lam = space_factor(config.energy, config.alpha)
    return plot.orbit_svg(positions_list, config.centre_array, radius=problem.radius_R / lam)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _load(args) -> tuple[ProblemConfig, NormalizedProblem]:
    if not args.config:
        raise ConfigError("--config is required")
    config = load_config(args.config)
    return config, rescale_to_normalized(config)


def _symbols(text: str | None, n: int):
    if not text:
        raise ConfigError("--symbols is required")
    # commas separate symbols except inside the braces of a "{1,2}|{3}" label
    return tuple(parse_partition(s, n) for s in _SYMBOL_TOKEN.findall(text) if s.strip())


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_positive(name, value):
    if value is not None and not value > 0:
        raise ConfigError(f"{name} must be positive")


def cmd_solve(args) -> int:
    config, problem = _load(args)
    symbols = _symbols(args.symbols, problem.n_centres)
    _check_positive("--tol-junction", args.tol_junction)
    _check_positive("--delta", args.delta)
    options = glue.GlueOptions(
        delta_fraction=args.delta,
        tol_junction=args.tol_junction,
        K=args.grid,
        seed=args.seed,
    )
    orbit = glue.minimize_chain(symbols, problem, options)
    certificate = glue.verify_structure(orbit, symbols, delta_bar=options.delta_bar_factor * options.delta_fraction
                                        * problem.radius_R)
    archive = orbit_archive(orbit, config, certificate, options)
    out = _out_dir(args)
    write_json(out / ARCHIVE_NAME, archive)
    write_csv(out / TRAJECTORY_NAME, archive["samples"])
    rows = np.asarray(archive["samples"])
    (out / PLOT_NAME).write_text(_svg_for([rows[:, 1:3]], config, problem), encoding="utf-8")
    print(f"orbit {','.join(archive['symbols'])}: period {archive['period']:.10g}, "
          f"junction mismatch {orbit.junction_report['max_velocity_mismatch']:.2e}, certificate pass")
    return EXIT_OK


def _endpoints(args, problem):
    if args.from_deg is None or args.to_deg is None:
        raise ConfigError("--from and --to (degrees on the interaction circle) are required")
    R = problem.radius_R
    return circle_point(R, math.radians(args.from_deg)), circle_point(R, math.radians(args.to_deg))


def cmd_inner(args) -> int:
    config, problem = _load(args)
    syms = _symbols(args.symbols, problem.n_centres)
    if len(syms) != 1:
        raise ConfigError("inner takes exactly one symbol")
    sym = syms[0]
    p1, p2 = _endpoints(args, problem)
    leg = inner.best_inner_for_partition(p1, p2, sym, problem, inner.InnerOptions(K=args.grid, seed=args.seed))
    report = inner.arc_functional_report(leg.arc, problem).to_dict()
    back = _to_original(leg.arc, config)
    data = {
        "problem": config.to_dict(),
        "symbol": sym.label(),
        "outcome": leg.outcome,
        "certificate": leg.partition.label(),
        "duration": back.duration,
        "launch_angle": leg.launch_angle,
        "min_centre_distance": leg.min_distance,
        "functional_report": report,
        "samples": _arc_rows(back),
    }
    out = _out_dir(args)
    write_json(out / "inner.json", data)
    write_csv(out / "inner.csv", data["samples"])
    print(f"inner leg {sym.label()} ({leg.outcome}): duration {back.duration:.10g}, gap {report.get('gap', float('nan')):.2e}")
    return EXIT_OK


def cmd_outer(args) -> int:
    config, problem = _load(args)
    p0, p1 = _endpoints(args, problem)
    _check_positive("--delta", args.delta)
    leg = outer.solve_outer(p0, p1, problem, delta=args.delta * problem.radius_R)
    back = _to_original(leg.arc, config)
    data = {
        "problem": config.to_dict(),
        "duration": back.duration,
        "angular_velocity": leg.theta_dot0,
        "residual": leg.residual,
        "samples": _arc_rows(back),
    }
    out = _out_dir(args)
    write_json(out / "outer.json", data)
    write_csv(out / "outer.csv", data["samples"])
    print(f"outer leg: duration {back.duration:.10g}, {leg.iterations} Newton steps")
    return EXIT_OK


def cmd_decode(args) -> int:
    if not args.config:
        raise ConfigError("--config (an orbit archive) is required")
    orbit = ArchivedOrbit(read_archive(args.config))
    if args.m0 < 0:
        raise ConfigError("--m0 must be non-negative")
    report = flow.check_semiconjugacy(orbit, args.m0, orbit.problem)
    for row in report["states"]:
        window = " ".join(f"{m:+d}:{lab}" for m, lab in row["window"].items())
        print(f"state {row['state']}: {window}  distance {row['distance']:g}")
    print(f"return error after {len(orbit.symbols)} returns: {report['return_error']:.2e}")
    out = _out_dir(args)
    write_json(out / "decode.json", report)
    return EXIT_OK if report["max_distance"] == 0.0 else EXIT_CERTIFICATE


def cmd_plot(args) -> int:
    if not args.config:
        raise ConfigError("--config (an orbit archive) is required")
    data = read_archive(args.config)
    config = config_from_dict(data["problem"])
    rows = np.asarray(data["samples"], dtype=float)
    out = _out_dir(args)
    (out / PLOT_NAME).write_text(_svg_for([rows[:, 1:3]], config, rescale_to_normalized(config)), encoding="utf-8")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "inner": cmd_inner, "outer": cmd_outer, "decode": cmd_decode, "plot": cmd_plot}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncentre", description="Periodic orbits of the planar N-centre problem.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="problem JSON (solve, inner, outer) or orbit archive (decode, plot)")
    p.add_argument("--symbols", help='comma-separated partitions, e.g. "Q1,Q2" or "{1,2}|{3}"')
    p.add_argument("--grid", type=int, default=256, help="nodes per inner path")
    p.add_argument("--tol-junction", type=float, default=1e-6)
    p.add_argument("--delta", type=float, default=outer.DEFAULT_DELTA_FRACTION,
                   help="outer endpoint proximity bound as a fraction of the interaction radius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--m0", type=int, default=3)
    p.add_argument("--from", dest="from_deg", type=float, help="start angle on the circle, degrees")
    p.add_argument("--to", dest="to_deg", type=float, help="end angle on the circle, degrees")
    return p


def _apply_thread_cap() -> None:
    raw = os.environ.get("NCENTRE_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"NCENTRE_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"NCENTRE_THREADS must be a positive integer, got {raw!r}")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_cap()
        if args.grid < 16:
            raise ConfigError("--grid must be at least 16")
        return COMMANDS[args.command](args)
    except (glue.ChainConstraintError, glue.GlueError, inner.InnerError, outer.OuterError,
            dynamics.IntegrationError, flow.FlowError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except glue.CertificateError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
