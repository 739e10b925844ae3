"""Semantic-geometric fusion into the final traversability layer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import GeoThresholds, Neighborhoods, compute_geometry, geometric_traversability_grid
from .gridmap import ElevationGridMap
from .semantics import SemanticClass, majority_labels

FORBIDDEN = frozenset({SemanticClass.ROCK_PILE, SemanticClass.EXCAVATOR,
                       SemanticClass.OBSTACLE, SemanticClass.WATER})
_FORBIDDEN_IDX = np.array(sorted(int(c) for c in FORBIDDEN))


class Source(Enum):
    SEMANTIC_FORBIDDEN = "semantic-forbidden"
    SEMANTIC_FLAT = "semantic-flat"
    GEOMETRIC = "geometric"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TraversabilityScore:
    value: float | None
    source: Source

    def __post_init__(self):
        if self.value is not None and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"traversability {self.value} outside [0, 1]")
        if self.source is Source.SEMANTIC_FORBIDDEN and self.value != 0.0:
            raise ValueError("forbidden cells must score 0")
        if self.source is Source.SEMANTIC_FLAT and self.value != 1.0:
            raise ValueError("flat cells must score 1")


def fuse(c_sem: SemanticClass | None, t_geo: float | None) -> TraversabilityScore:
    if t_geo is not None and math.isnan(t_geo):
        t_geo = None
    if c_sem is not None:
        c_sem = SemanticClass(c_sem)
    if c_sem in FORBIDDEN:
        return TraversabilityScore(0.0, Source.SEMANTIC_FORBIDDEN)
    if c_sem is SemanticClass.FLAT and t_geo is not None and t_geo > 0:
        return TraversabilityScore(1.0, Source.SEMANTIC_FLAT)
    if t_geo is None:
        return TraversabilityScore(None, Source.UNKNOWN)
    return TraversabilityScore(float(t_geo), Source.GEOMETRIC)


def fuse_grid(labels: np.ndarray, t_geo: np.ndarray) -> np.ndarray:
    """Vectorized :func:`fuse` on a majority-label layer (-1 = no label)."""
    out = np.array(t_geo, dtype=float, copy=True)
    with np.errstate(invalid="ignore"):
        out[(labels == int(SemanticClass.FLAT)) & (t_geo > 0)] = 1.0
    out[np.isin(labels, _FORBIDDEN_IDX)] = 0.0
    return out


@dataclass(frozen=True)
class LayerUpdate:
    cells_updated: int
    cells_with_geometry: int


def update_traversability_layer(gridmap: ElevationGridMap, thresholds: GeoThresholds,
                                now: float, dt: float,
                                hoods: Neighborhoods = Neighborhoods(),
                                use_semantics: bool = True) -> LayerUpdate:
    """Recompute geometry, T_geo and fused T for every cell inside the time window.

    Cells outside the window keep their previous values.
    """
    view = gridmap.windowed_view(now, dt)
    win = view.present
    geo = compute_geometry(view, hoods)
    gridmap.slope[win] = geo.slope[win]
    gridmap.step_height[win] = geo.step[win]
    gridmap.roughness[win] = geo.roughness[win]
    t_geo = geometric_traversability_grid(geo.slope, geo.step, thresholds)
    gridmap.t_geo[win] = t_geo[win]
    if use_semantics:
        labels = np.full(win.shape, -1)
        labels[win] = majority_labels(gridmap.label_hist[win])
        fused = fuse_grid(labels, t_geo)
    else:
        fused = t_geo
    gridmap.traversability[win] = fused[win]
    return LayerUpdate(int(win.sum()), int(np.count_nonzero(win & ~np.isnan(t_geo))))


def traversability_rgb(t: np.ndarray) -> np.ndarray:
    """Green (T=1) to grey (T=0) color ramp; absent cells are white.

    Input is a ``(width, height)`` layer; output is an image with row 0 at max y.
    """
    green = np.array([40, 170, 60], dtype=float)
    grey = np.array([120, 120, 120], dtype=float)
    tt = np.clip(np.nan_to_num(t, nan=0.0), 0, 1)[..., None]
    rgb = grey + (green - grey) * tt
    rgb[np.isnan(t)] = 255
    return np.flipud(np.transpose(rgb, (1, 0, 2))).astype(np.uint8)
