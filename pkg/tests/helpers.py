"""Small builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from ttmap.gridmap import ElevationGridMap, GridSpec


def map_from_heights(z: np.ndarray, res: float = 0.2, stamp: float = 0.0,
                     max_heights: int = 10) -> ElevationGridMap:
    """Map whose populated cells hold exactly ``z`` (NaN = leave the cell empty)."""
    W, H = z.shape
    m = ElevationGridMap(GridSpec((0.0, 0.0), W, H, res), max_heights)
    i, j = np.nonzero(~np.isnan(z))
    if len(i):
        x, y = m.spec.cell_center(i, j)
        m.insert_points(np.column_stack([np.full(len(i), stamp), x, y, z[i, j]]))
    return m


def plane_heights(W: int, H: int, res: float, slope_deg: float, direction_deg: float = 0.0
                  ) -> np.ndarray:
    """Cell-center heights of a plane rising at ``slope_deg`` toward ``direction_deg``."""
    i, j = np.meshgrid(np.arange(W), np.arange(H), indexing="ij")
    x, y = (i + 0.5) * res, (j + 0.5) * res
    a = np.radians(direction_deg)
    return np.tan(np.radians(slope_deg)) * (x * np.cos(a) + y * np.sin(a))
