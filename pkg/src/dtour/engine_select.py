"""Point-in-polygon test for lasso selection."""

import numpy as np


def point_in_polygon(points, polygon):
    """Even-odd (crossing parity) containment test, vectorized over points.

    Self-intersecting lassos behave predictably: a region is inside when
    a ray from it crosses the boundary an odd number of times.
    """
    x = points[:, 0].astype(np.float64)
    y = points[:, 1].astype(np.float64)
    inside = np.zeros(len(points), dtype=bool)
    n = len(polygon)
    j = n - 1
    for i in range(n):
        xi, yi = polygon[i]
        xj, yj = polygon[j]
        straddles = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            cross_x = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= straddles & (x < cross_x)
        j = i
    return inside
