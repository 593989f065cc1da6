"""Independent oracles and random path generators shared by the test modules."""

import math

import numpy as np

from ncentre.maupertuis import PathGrid


def random_smooth_path(rng, problem, K=256, amplitude=0.1, clearance=0.3, min_speed_ratio=0.5):
    """Chord between random circle points, warped in parameter and bent by three sine modes.

    Draws are rejected until the path stays inside the disk, keeps ``clearance * R``
    away from every centre and never slows below ``min_speed_ratio`` of its mean
    parameter speed (so the grid resolves it).
    """
    R = problem.radius_R
    s = np.linspace(0.0, 1.0, K + 1)[:, None]
    while True:
        a, b = rng.uniform(0.0, 2.0 * math.pi, 2)
        p1 = R * np.array([math.cos(a), math.sin(a)])
        p2 = R * np.array([math.cos(b), math.sin(b)])
        warp = s + 0.25 * rng.uniform(-1.0, 1.0) * np.sin(math.pi * s) / math.pi
        x = (1.0 - warp) * p1 + warp * p2
        for k in range(1, 4):
            x = x + rng.normal(scale=amplitude * R / k, size=2) * np.sin(k * math.pi * s)
        r = np.hypot(x[:, 0], x[:, 1])
        d = np.hypot(x[:, None, 0] - problem.scaled_centres[None, :, 0], x[:, None, 1] - problem.scaled_centres[None, :, 1])
        speed = np.hypot(*np.gradient(x, axis=0).T)
        if np.all(r[1:-1] < R) and d.min() > clearance * R and speed.min() > min_speed_ratio * speed.mean():
            x[0], x[-1] = p1, p2
            return PathGrid(x, R)


def random_polygon_path(rng, radius, vertices=12):
    """Polygonal path with random interior vertices and both end points on the circle."""
    a, b = rng.uniform(0.0, 2.0 * math.pi, 2)
    r = radius * np.sqrt(rng.uniform(0.0, 0.98, vertices - 2))
    t = rng.uniform(0.0, 2.0 * math.pi, vertices - 2)
    inner = np.column_stack([r * np.cos(t), r * np.sin(t)])
    return np.vstack([radius * np.array([[math.cos(a), math.sin(a)]]), inner, radius * np.array([[math.cos(b), math.sin(b)]])])


def counterclockwise_closure(nodes, radius, samples=4000):
    """Append the counterclockwise circle arc from the last node back to the first."""
    t1 = math.atan2(nodes[0, 1], nodes[0, 0])
    t2 = math.atan2(nodes[-1, 1], nodes[-1, 0])
    span = (t1 - t2) % (2.0 * math.pi)
    phi = t2 + np.linspace(0.0, span, samples)
    arc = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    return np.vstack([nodes, arc[1:-1], nodes[:1]])


def ray_crossing_winding(loop, point):
    """Signed count of crossings of the rightward horizontal ray from ``point`` by a closed polyline."""
    px, py = point
    w = 0
    for (ax, ay), (bx, by) in zip(loop[:-1], loop[1:]):
        if ay <= py < by or by <= py < ay:
            x = ax + (py - ay) * (bx - ax) / (by - ay)
            if x > px:
                w += 1 if by > ay else -1
    return w
