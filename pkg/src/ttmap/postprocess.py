"""Small-region cleanup of the traversability layer and occupancy conversion."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .gridmap import ElevationGridMap, GridSpec
from .semantics import read_pgm, write_pgm

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass
class Region:
    cells: np.ndarray  # (n, 2) integer cell indices
    mean_traversability: float
    relative_height: float
    span_x: float
    span_y: float

    def __len__(self):
        return len(self.cells)


def find_regions(traversability: np.ndarray, heights: np.ndarray, resolution: float,
                 t_occ: float) -> list[Region]:
    """8-connected components of cells with traversability present and below ``t_occ``.

    ``relative_height`` is the region's highest cell minus the mean height of
    the traversable cells bordering it (inf when no such border exists).
    Spans are axis-aligned bounding-box extents in meters.
    """
    if not 0 < t_occ < 1:
        raise ValueError("t_occ must lie in (0, 1)")
    t = traversability
    with np.errstate(invalid="ignore"):
        low = ~np.isnan(t) & (t < t_occ)
        free = ~np.isnan(t) & (t >= t_occ) & ~np.isnan(heights)
    lab, n = ndimage.label(low, structure=EIGHT_CONNECTED)
    if n == 0:
        return []

    # border statistics: every (region, traversable neighbor) pair counted once
    W, H = t.shape
    lp = np.pad(lab, 1)
    pairs = []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = lp[1 + di:1 + di + W, 1 + dj:1 + dj + H]
            m = free & (nb > 0)
            pairs.append(nb[m].astype(np.int64) * (W * H) + np.flatnonzero(m))
    pairs = np.unique(np.concatenate(pairs))
    reg = pairs // (W * H)
    cell = pairs % (W * H)
    bsum = np.bincount(reg, weights=heights.reshape(-1)[cell], minlength=n + 1)
    bcnt = np.bincount(reg, minlength=n + 1)

    idx = np.arange(1, n + 1)
    mean_t = ndimage.mean(t, lab, idx)
    hz = np.where(np.isnan(heights), -np.inf, heights)
    max_h = ndimage.maximum(hz, lab, idx)
    slices = ndimage.find_objects(lab)
    order = np.argsort(lab.reshape(-1), kind="stable")
    counts = np.bincount(lab.reshape(-1), minlength=n + 1)
    starts = np.concatenate([[0], np.cumsum(counts)])
    regions = []
    for k in range(n):
        flat = order[starts[k + 1]:starts[k + 2]]
        cells = np.column_stack(np.unravel_index(flat, t.shape))
        sx, sy = slices[k]
        if bcnt[k + 1] > 0 and np.isfinite(max_h[k]):
            rel = float(max_h[k] - bsum[k + 1] / bcnt[k + 1])
        else:
            rel = float("inf")
        regions.append(Region(cells, float(mean_t[k]), rel,
                              (sx.stop - sx.start) * resolution,
                              (sy.stop - sy.start) * resolution))
    return regions


def find_nontraversable_regions(gridmap: ElevationGridMap, t_occ: float) -> list[Region]:
    return find_regions(gridmap.traversability, gridmap.mean_height,
                        gridmap.spec.resolution, t_occ)


def is_removable(region: Region, h_cri: float, d_track: float, t_occ: float) -> bool:
    half = d_track / 2
    return (region.mean_traversability < t_occ
            and region.relative_height < h_cri
            and region.span_x < half and region.span_y < half)


def remove_small_regions(gridmap: ElevationGridMap | np.ndarray, regions: list[Region],
                         h_cri: float, d_track: float, t_occ: float) -> int:
    """Promote removable regions to ``t_occ`` in place. Returns cells promoted.

    Accepts a map or a bare traversability array.
    """
    t = gridmap.traversability if isinstance(gridmap, ElevationGridMap) else gridmap
    promoted = 0
    for region in regions:
        if is_removable(region, h_cri, d_track, t_occ):
            t[region.cells[:, 0], region.cells[:, 1]] = t_occ
            promoted += len(region)
    return promoted


def postprocess(gridmap: ElevationGridMap, h_cri: float, d_track: float, t_occ: float) -> int:
    regions = find_nontraversable_regions(gridmap, t_occ)
    return remove_small_regions(gridmap, regions, h_cri, d_track, t_occ)


# --- occupancy ---------------------------------------------------------------------

class CellState(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


class UnknownPolicy(str, Enum):
    OCCUPIED = "occupied"
    FREE = "free"
    UNKNOWN = "unknown"


PGM_VALUES = {CellState.FREE: 254, CellState.OCCUPIED: 0, CellState.UNKNOWN: 205}


@dataclass
class OccupancyGrid:
    spec: GridSpec
    state: np.ndarray  # (width, height) uint8 of CellState

    def __post_init__(self):
        if self.state.shape != self.spec.shape:
            raise ValueError(f"state shape {self.state.shape} does not match grid {self.spec.shape}")

    def blocked(self, unknown_blocks: bool = True) -> np.ndarray:
        b = self.state == CellState.OCCUPIED
        if unknown_blocks:
            b |= self.state == CellState.UNKNOWN
        return b

    def save(self, pgm_path) -> Path:
        """Write ``<name>.pgm`` (row 0 = highest y) and a ``<name>.json`` sidecar."""
        pgm_path = Path(pgm_path)
        img = np.zeros(self.state.shape, dtype=np.uint8)
        for st, val in PGM_VALUES.items():
            img[self.state == st] = val
        write_pgm(pgm_path, np.flipud(img.T))
        meta = {"image": pgm_path.name, "resolution": self.spec.resolution,
                "origin": list(self.spec.origin), "width": self.spec.width,
                "height": self.spec.height,
                "free": 254, "occupied": 0, "unknown": 205}
        sidecar = pgm_path.with_suffix(".json")
        sidecar.write_text(json.dumps(meta, indent=2))
        return sidecar

    @classmethod
    def load(cls, path) -> "OccupancyGrid":
        """Load from either the PGM or its JSON sidecar."""
        path = Path(path)
        sidecar = path if path.suffix == ".json" else path.with_suffix(".json")
        meta = json.loads(sidecar.read_text())
        img, _ = read_pgm(sidecar.parent / meta.get("image", path.with_suffix(".pgm").name))
        arr = np.flipud(img).T
        state = np.full(arr.shape, CellState.UNKNOWN, dtype=np.uint8)
        state[arr >= 250] = CellState.FREE
        state[arr <= 50] = CellState.OCCUPIED
        spec = GridSpec(tuple(meta["origin"]), arr.shape[0], arr.shape[1], float(meta["resolution"]))
        return cls(spec, state)


def to_occupancy(gridmap: ElevationGridMap | np.ndarray, t_occ: float,
                 unknown_policy: UnknownPolicy | str = UnknownPolicy.OCCUPIED,
                 spec: GridSpec | None = None) -> OccupancyGrid:
    if not 0 < t_occ < 1:
        raise ValueError("t_occ must lie in (0, 1)")
    if isinstance(gridmap, ElevationGridMap):
        t, spec = gridmap.traversability, gridmap.spec
    else:
        t = gridmap
    policy = UnknownPolicy(unknown_policy)
    state = np.empty(t.shape, dtype=np.uint8)
    absent = np.isnan(t)
    with np.errstate(invalid="ignore"):
        state[t >= t_occ] = CellState.FREE
        state[t < t_occ] = CellState.OCCUPIED
    state[absent] = {UnknownPolicy.OCCUPIED: CellState.OCCUPIED,
                     UnknownPolicy.FREE: CellState.FREE,
                     UnknownPolicy.UNKNOWN: CellState.UNKNOWN}[policy]
    return OccupancyGrid(spec, state)
