"""Single-centre sanity checks with closed-form answers.

One centre of mass 2 with alpha = 1 at energy -1 is the Kepler problem with
semi-major axis 1, so the circle r = 1 is an orbit of period pi sqrt(2) and a
radial orbit launched outward from r = 1 turns around at r = 2.
"""

import math

import numpy as np

from ncentre import dynamics
from ncentre.maupertuis import functional_report, path_from_function, to_physical_solution
from ncentre.model import normalized_problem
from ncentre.outer import brake_reference, brake_time


def main():
    kepler = normalized_problem([[0.0, 0.0]], [2.0], 1.0)
    circle = path_from_function(lambda s: np.column_stack([np.cos(2 * np.pi * s), np.sin(2 * np.pi * s)]), 256, 1.0)

    rep = functional_report(circle, kepler)
    print(f"circle: L = {rep.jacobi_length:.12f} (2 pi = {2 * math.pi:.12f}), 2M - L^2 = {rep.gap:.2e}")
    arc = to_physical_solution(circle, kepler)
    print(f"circle: period {arc.duration:.12f} vs pi sqrt(2) = {math.pi * math.sqrt(2):.12f}")

    ref = brake_reference(np.array([1.0, 0.0]), kepler)
    apex, _ = dynamics.flow_map(kepler, ref.start, ref.start_velocity, ref.duration / 2, regularize=False)
    print(f"brake orbit: apex radius {np.hypot(*apex):.12f}, duration {ref.duration:.12f}")
    print(f"brake orbit: quadrature duration {brake_time(1.0, 2.0, 1.0):.12f}")


if __name__ == "__main__":
    main()
