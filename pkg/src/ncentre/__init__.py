"""Periodic orbits of the planar N-centre problem at small negative energy."""

from .model import (
    ConfigError,
    EnergyTooLargeError,
    NormalizedProblem,
    OrbitArc,
    Partition,
    ProblemConfig,
    SingularPointError,
    WindingVector,
    enumerate_partitions,
    grad_potential,
    interaction_radius,
    load_config,
    map_solution_back,
    normalized_problem,
    potential,
    rescale_to_normalized,
    winding_to_partition,
)

__version__ = "0.1.0"
