"""Rolling elevation grid map: cell storage, point insertion and time windows.

Cells are stored densely. Index ``(i, j)`` addresses the cell whose x-range is
``[x0 + i*res, x0 + (i+1)*res)`` and whose y-range is the analogous y interval,
so every per-cell layer is an array of shape ``(width, height)``.
Absent layer values are NaN.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

NUM_CLASSES = 7
LAYER_NAMES = ("height", "slope", "step", "roughness", "traversability")


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float] = (0.0, 0.0)
    width: int = 250
    height: int = 250
    resolution: float = 0.2

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must have at least one cell, got {self.width}x{self.height}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) in meters."""
        x0, y0 = self.origin
        return (x0, x0 + self.width * self.resolution, y0, y0 + self.height * self.resolution)

    def cell_center(self, i, j):
        x0, y0 = self.origin
        return (x0 + (np.asarray(i) + 0.5) * self.resolution,
                y0 + (np.asarray(j) + 0.5) * self.resolution)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["origin"] = list(self.origin)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(origin=tuple(d.get("origin", (0.0, 0.0))),
                   width=int(d.get("width", 250)),
                   height=int(d.get("height", 250)),
                   resolution=float(d.get("resolution", 0.2)))


def world_to_index(spec: GridSpec, xy) -> tuple[int, int] | None:
    """Cell index containing world point ``xy``, or None when outside the map."""
    i = math.floor((xy[0] - spec.origin[0]) / spec.resolution)
    j = math.floor((xy[1] - spec.origin[1]) / spec.resolution)
    if 0 <= i < spec.width and 0 <= j < spec.height:
        return (i, j)
    return None


def world_to_indices(spec: GridSpec, xy: np.ndarray):
    """Vectorized :func:`world_to_index`. Returns ``(i, j, inside)`` arrays."""
    xy = np.asarray(xy, dtype=float)
    i = np.floor((xy[..., 0] - spec.origin[0]) / spec.resolution).astype(np.int64)
    j = np.floor((xy[..., 1] - spec.origin[1]) / spec.resolution).astype(np.int64)
    inside = (i >= 0) & (i < spec.width) & (j >= 0) & (j < spec.height)
    return i, j, inside


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)  # x, y, z, w
    stamp: float = 0.0

    def __post_init__(self):
        norm = math.sqrt(sum(q * q for q in self.orientation))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"orientation quaternion must be unit length, norm={norm!r}")

    @classmethod
    def from_xyyaw(cls, x: float, y: float, z: float, yaw: float, stamp: float = 0.0) -> "Pose":
        return cls((x, y, z), (0.0, 0.0, math.sin(yaw / 2), math.cos(yaw / 2)), stamp)

    def rotation_matrix(self) -> np.ndarray:
        x, y, z, w = self.orientation
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])

    def matrix(self) -> np.ndarray:
        """Homogeneous body-to-world transform."""
        T = np.eye(4)
        T[:3, :3] = self.rotation_matrix()
        T[:3, 3] = self.position
        return T


@dataclass
class Cell:
    """Snapshot of one grid cell. Heights are ordered oldest to newest."""

    heights: tuple[float, ...]
    mean_height: float | None
    last_update: float | None
    slope: float | None
    step_height: float | None
    roughness: float | None
    label_histogram: dict = field(default_factory=dict)
    traversability: float | None = None


@dataclass(frozen=True)
class InsertSummary:
    cells_touched: int
    points_inserted: int
    points_skipped: int


def _opt(v) -> float | None:
    v = float(v)
    return None if math.isnan(v) else v


class ElevationGridMap:
    """Dense elevation grid holding the latest ``max_heights`` point heights per cell.

    Single-writer: one pipeline mutates the map; readers take a
    :class:`WindowedView` or :meth:`cell` snapshots.
    """

    def __init__(self, spec: GridSpec, max_heights: int = 10):
        if max_heights < 1:
            raise ValueError("max_heights must be >= 1")
        self.spec = spec
        self.max_heights = int(max_heights)
        shape = spec.shape
        self._ring = np.zeros(shape + (self.max_heights,))
        self._head = np.zeros(shape, dtype=np.int64)
        self.count = np.zeros(shape, dtype=np.int64)
        self.mean_height = np.full(shape, np.nan)
        self.last_update = np.full(shape, -np.inf)
        self.slope = np.full(shape, np.nan)
        self.step_height = np.full(shape, np.nan)
        self.roughness = np.full(shape, np.nan)
        self.t_geo = np.full(shape, np.nan)
        self.traversability = np.full(shape, np.nan)
        self.label_hist = np.zeros(shape + (NUM_CLASSES,))

    def cell(self, i: int, j: int) -> Cell:
        n = int(self.count[i, j])
        head = int(self._head[i, j])
        N = self.max_heights
        order = [(head - n + k) % N for k in range(n)]
        hist = {c: float(v) for c, v in enumerate(self.label_hist[i, j]) if v > 0}
        lu = float(self.last_update[i, j])
        return Cell(
            heights=tuple(float(self._ring[i, j, k]) for k in order),
            mean_height=_opt(self.mean_height[i, j]),
            last_update=None if lu == -np.inf else lu,
            slope=_opt(self.slope[i, j]),
            step_height=_opt(self.step_height[i, j]),
            roughness=_opt(self.roughness[i, j]),
            label_histogram=hist,
            traversability=_opt(self.traversability[i, j]),
        )

    def insert_points(self, points) -> InsertSummary:
        """Append point heights to their cells' FIFOs.

        ``points`` is an ``(M, 4)`` array of ``t, x, y, z`` rows with
        non-decreasing timestamps.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 4)
        if len(pts) == 0:
            return InsertSummary(0, 0, 0)
        i, j, inside = world_to_indices(self.spec, pts[:, 1:3])
        skipped = int(np.count_nonzero(~inside))
        t = pts[inside, 0]
        z = pts[inside, 3]
        if len(z) == 0:
            return InsertSummary(0, 0, skipped)
        flat = i[inside] * self.spec.height + j[inside]

        # stable sort keeps arrival order within each cell
        order = np.argsort(flat, kind="stable")
        flat, t, z = flat[order], t[order], z[order]
        start = np.flatnonzero(np.r_[True, flat[1:] != flat[:-1]])
        cells = flat[start]
        counts = np.diff(np.r_[start, len(flat)])
        group_end = np.repeat(start + counts, counts)
        rank = np.arange(len(flat)) - np.repeat(start, counts)

        N = self.max_heights
        head = self._head.reshape(-1)
        ring = self._ring.reshape(-1, N)
        # only the newest N points of a batch can survive in a cell
        keep = (group_end - np.arange(len(flat))) <= N
        slot = (np.repeat(head[cells], counts) + rank) % N
        ring[flat[keep], slot[keep]] = z[keep]

        head[cells] = (head[cells] + counts) % N
        cnt = self.count.reshape(-1)
        cnt[cells] = np.minimum(cnt[cells] + counts, N)
        # unused slots hold 0 until the ring first fills
        self.mean_height.reshape(-1)[cells] = ring[cells].sum(axis=1) / cnt[cells]
        last_t = t[start + counts - 1]
        lu = self.last_update.reshape(-1)
        lu[cells] = np.maximum(lu[cells], last_t)
        return InsertSummary(len(cells), len(z), skipped)

    def windowed_view(self, now: float, dt: float) -> "WindowedView":
        if not dt > 0:
            raise ValueError(f"window length must be positive, got {dt}")
        present = (self.count > 0) & (self.last_update >= now - dt)
        return WindowedView(self, present)

    def full_view(self) -> "WindowedView":
        return WindowedView(self, self.count > 0)

    def majority_labels(self) -> np.ndarray:
        from .semantics import majority_labels
        return majority_labels(self.label_hist)

    def layer(self, name: str) -> np.ndarray:
        return {
            "height": self.mean_height,
            "slope": self.slope,
            "step": self.step_height,
            "roughness": self.roughness,
            "traversability": self.traversability,
            "t_geo": self.t_geo,
        }[name]

    def dump(self, directory, layers=LAYER_NAMES) -> Path:
        """Write one CSV per layer plus ``gridmap.json`` describing the grid.

        CSV row ``j`` holds cells with y-index ``j`` (row 0 is the lowest y);
        column ``i`` is the x-index. Absent values are written as ``nan``.
        """
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for name in layers:
            np.savetxt(out / f"{name}.csv", self.layer(name).T, delimiter=",", fmt="%.6f")
        labels = self.majority_labels()
        np.savetxt(out / "label.csv", labels.T, delimiter=",", fmt="%d")
        meta = {"grid": self.spec.to_dict(), "max_heights": self.max_heights,
                "layers": list(layers) + ["label"]}
        (out / "gridmap.json").write_text(json.dumps(meta, indent=2))
        return out


def load_dump(directory) -> tuple[GridSpec, dict[str, np.ndarray]]:
    """Read a map dump back as ``(spec, {layer: (width, height) array})``."""
    d = Path(directory)
    meta = json.loads((d / "gridmap.json").read_text())
    spec = GridSpec.from_dict(meta["grid"])
    layers = {}
    for name in meta["layers"]:
        arr = np.loadtxt(d / f"{name}.csv", delimiter=",", ndmin=2)
        layers[name] = arr.T
    return spec, layers


class WindowedView:
    """Read-only window over a map exposing only recently updated cells."""

    def __init__(self, gridmap: ElevationGridMap, present: np.ndarray):
        self.map = gridmap
        self.spec = gridmap.spec
        self.present = present
        self.present.flags.writeable = False
        heights = np.where(present, gridmap.mean_height, np.nan)
        heights.flags.writeable = False
        self.heights = heights

    def __contains__(self, ij) -> bool:
        i, j = ij
        return 0 <= i < self.spec.width and 0 <= j < self.spec.height and bool(self.present[i, j])

    def height(self, i: int, j: int) -> float | None:
        if (i, j) not in self:
            return None
        return float(self.heights[i, j])

    def cell(self, i: int, j: int) -> Cell | None:
        if (i, j) not in self:
            return None
        return self.map.cell(i, j)

    def cells(self):
        return [tuple(ij) for ij in np.argwhere(self.present)]


class PointFileError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def read_point_file(path) -> np.ndarray:
    """Parse an ASCII ``t x y z`` point file into an ``(M, 4)`` array.

    Blank lines and ``#`` comments are ignored.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            parts = s.split()
            if len(parts) != 4:
                raise PointFileError(path, lineno, f"expected 4 fields 't x y z', got {len(parts)}")
            try:
                row = [float(p) for p in parts]
            except ValueError:
                raise PointFileError(path, lineno, f"non-numeric field in {s!r}") from None
            if not all(math.isfinite(v) for v in row):
                raise PointFileError(path, lineno, "non-finite value")
            rows.append(row)
    return np.array(rows, dtype=float).reshape(-1, 4)


def write_point_file(path, points) -> None:
    np.savetxt(path, np.asarray(points).reshape(-1, 4), fmt="%.6f")


def read_pose_file(path) -> list[Pose]:
    """Parse ``t x y z qx qy qz qw`` lines into poses sorted by stamp."""
    poses = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            parts = s.split()
            if len(parts) != 8:
                raise PointFileError(path, lineno, f"expected 8 fields 't x y z qx qy qz qw', "
                                                   f"got {len(parts)}")
            try:
                t, x, y, z, qx, qy, qz, qw = (float(p) for p in parts)
            except ValueError:
                raise PointFileError(path, lineno, f"non-numeric field in {s!r}") from None
            try:
                poses.append(Pose((x, y, z), (qx, qy, qz, qw), t))
            except ValueError as exc:
                raise PointFileError(path, lineno, str(exc)) from None
    return sorted(poses, key=lambda p: p.stamp)


def write_pose_file(path, poses) -> None:
    with open(path, "w") as fh:
        for p in poses:
            vals = (p.stamp, *p.position, *p.orientation)
            fh.write(" ".join(f"{v:.17g}" for v in vals) + "\n")
