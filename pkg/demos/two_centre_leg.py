"""Inner legs of a close binary: the same endpoints, both homotopy classes.

With two centres there is one partition, but two parity vectors realise it,
and they are different homotopy classes with different lengths. The
minimizer for the partition keeps the shorter one.
"""

import math

import numpy as np

from ncentre.inner import best_inner_for_partition, minimize_inner
from ncentre.model import Partition, WindingVector, normalized_problem


def on_circle(radius, degrees):
    a = math.radians(degrees)
    return radius * np.array([math.cos(a), math.sin(a)])


def main():
    binary = normalized_problem([[0.01, 0.0], [-0.01, 0.0]], [1.0, 1.0], 1.5)
    R = binary.radius_R
    p1, p2 = on_circle(R, 90.0), on_circle(R, 270.0)

    for parities in [(1, 0), (0, 1)]:
        leg = minimize_inner(p1, p2, WindingVector(parities), binary)
        print(f"class {parities}: length {leg.jacobi_length:.8f}, closest approach {leg.min_distance / R:.3e} R")

    best = best_inner_for_partition(p1, p2, Partition((0,), (1,)), binary)
    print(f"best leg: {best.partition.label()}, {best.outcome}, duration {best.arc.duration:.6f}, "
          f"EL residual {best.el_residual:.1e}")


if __name__ == "__main__":
    main()
