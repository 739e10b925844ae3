"""Hybrid A* over an occupancy grid with a rectangular vehicle footprint."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .postprocess import OccupancyGrid

TWO_PI = 2.0 * math.pi
# worst-case ratio of 8-connected grid distance to straight-line distance (at 22.5 deg)
OCTILE_STRETCH = math.sqrt(4.0 - 2.0 * math.sqrt(2.0))


class NoPath(RuntimeError):
    pass


class InvalidStart(ValueError):
    pass


class GoalOccupied(ValueError):
    pass


@dataclass(frozen=True)
class VehicleFootprint:
    """Rectangle centered on the base pose, long side along the heading."""

    length: float
    width: float
    min_turn_radius: float = 0.0
    allow_reverse: bool = True

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError("footprint length and width must be positive")
        if self.min_turn_radius < 0:
            raise ValueError("min_turn_radius must be >= 0")

    def inflated(self, margin: float) -> "VehicleFootprint":
        if margin == 0:
            return self
        return replace(self, length=self.length + 2 * margin, width=self.width + 2 * margin)

    def corners(self, x: float, y: float, theta: float) -> np.ndarray:
        c, s = math.cos(theta), math.sin(theta)
        hl, hw = self.length / 2, self.width / 2
        local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
        return local @ np.array([[c, s], [-s, c]]) + (x, y)


@dataclass(frozen=True)
class PlannerConfig:
    heading_bins: int = 72
    step_factor: float = 1.5
    reverse_cost: float = 2.0
    position_tol: float = 0.5
    heading_tol_deg: float = 15.0
    max_expansions: int = 200_000
    unknown_blocks: bool = True
    footprint_margin: float = 0.0
    heuristic_weight: float = 1.0  # > 1 trades optimality for fewer expansions

    def __post_init__(self):
        if self.heading_bins < 4 or self.step_factor <= 0 or self.reverse_cost < 1:
            raise ValueError("need heading_bins >= 4, step_factor > 0, reverse_cost >= 1")
        if self.position_tol <= 0 or self.heading_tol_deg <= 0 or self.max_expansions < 1:
            raise ValueError("tolerances and max_expansions must be positive")
        if self.footprint_margin < 0 or self.heuristic_weight < 1:
            raise ValueError("need footprint_margin >= 0 and heuristic_weight >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def wrap_angle(a: float) -> float:
    return (a + math.pi) % TWO_PI - math.pi


class CollisionChecker:
    """Exact rotated-rectangle versus blocked-cell overlap test.

    Cells outside the map count as blocked. A clearance lookup settles most
    queries without touching individual cells.
    """

    def __init__(self, grid: OccupancyGrid, footprint: VehicleFootprint, unknown_blocks: bool = True):
        self.spec = grid.spec
        self.footprint = footprint
        self.res = grid.spec.resolution
        self.x0, self.y0 = grid.spec.origin
        self.W, self.H = grid.spec.shape
        self.blocked = grid.blocked(unknown_blocks)
        sat = np.zeros((self.W + 1, self.H + 1), dtype=np.int64)
        sat[1:, 1:] = self.blocked.cumsum(0).cumsum(1)
        self._sat = sat
        padded = np.pad(self.blocked, 1, constant_values=True)
        # distance from each cell center to the nearest blocked cell center
        self.clearance = ndimage.distance_transform_edt(~padded)[1:-1, 1:-1] * self.res
        self._clear_rows = self.clearance.tolist()
        self.hl, self.hw = footprint.length / 2, footprint.width / 2
        self._free_radius = math.hypot(self.hl, self.hw) + math.sqrt(2) * self.res
        # a blocked cell center this close lies inside the inscribed circle
        self._hit_radius = min(self.hl, self.hw) - math.sqrt(0.5) * self.res

    def center_blocked(self) -> np.ndarray:
        """Cells where every pose with its center in the cell must collide."""
        return self.clearance < self._hit_radius

    def collides(self, x: float, y: float, theta: float) -> bool:
        i = int((x - self.x0) // self.res)
        j = int((y - self.y0) // self.res)
        if 0 <= i < self.W and 0 <= j < self.H:
            c = self._clear_rows[i][j]
            if c > self._free_radius:
                return False
            if c < self._hit_radius:
                return True
        return self._exact(x, y, theta)

    def _exact(self, x: float, y: float, theta: float) -> bool:
        c, s = math.cos(theta), math.sin(theta)
        ac, as_ = abs(c), abs(s)
        ex = self.hl * ac + self.hw * as_
        ey = self.hl * as_ + self.hw * ac
        res = self.res
        xmin, xmax = x - ex - self.x0, x + ex - self.x0
        ymin, ymax = y - ey - self.y0, y + ey - self.y0
        if xmin < -1e-9 or ymin < -1e-9 or xmax > self.W * res + 1e-9 or ymax > self.H * res + 1e-9:
            return True
        i0, i1 = max(int(xmin // res), 0), min(int(xmax // res), self.W - 1)
        j0, j1 = max(int(ymin // res), 0), min(int(ymax // res), self.H - 1)
        sat = self._sat
        if sat[i1 + 1, j1 + 1] - sat[i0, j1 + 1] - sat[i1 + 1, j0] + sat[i0, j0] == 0:
            return False
        bi, bj = np.nonzero(self.blocked[i0:i1 + 1, j0:j1 + 1])
        dx = self.x0 + (bi + i0 + 0.5) * res - x
        dy = self.y0 + (bj + j0 + 0.5) * res - y
        h = res / 2
        hp = h * (ac + as_)
        eps = 1e-9
        hit = ((np.abs(dx) < ex + h - eps) & (np.abs(dy) < ey + h - eps)
               & (np.abs(dx * c + dy * s) < self.hl + hp - eps)
               & (np.abs(-dx * s + dy * c) < self.hw + hp - eps))
        return bool(hit.any())


def collision_check(pose, footprint: VehicleFootprint, grid: OccupancyGrid,
                    unknown_blocks: bool = True) -> bool:
    return CollisionChecker(grid, footprint, unknown_blocks).collides(*pose)


def _lattice(n_fine: int, extent: float, n_coarse: int) -> tuple[np.ndarray, np.ndarray]:
    """Fine offsets (cell-centred) along one side and a coarse interior subset."""
    fine = (np.arange(n_fine) + 0.5) / n_fine * extent - extent / 2
    coarse = (np.arange(n_coarse) + 0.5) / n_coarse * extent - extent / 2
    return fine, coarse


def raster_collides(pose, footprint: VehicleFootprint, blocked: np.ndarray, spec,
                    samples_per_cell: int = 8) -> bool:
    """Independent slow check: sample the rectangle on a lattice.

    The outermost ring is sampled every ``resolution / samples_per_cell`` and
    the interior every half cell, which is enough to hit any blocked cell lying
    wholly inside. Can miss overlaps thinner than the ring spacing, never
    reports a spurious one.
    """
    x, y, th = pose
    res = spec.resolution
    L, W = footprint.length, footprint.width
    step = res / samples_per_cell
    u, uc = _lattice(max(1, math.ceil(L / step)), L, max(1, math.ceil(2 * L / res)))
    v, vc = _lattice(max(1, math.ceil(W / step)), W, max(1, math.ceil(2 * W / res)))
    uu, vv = np.meshgrid(uc, vc, indexing="ij")
    pu = np.concatenate([u, u, np.full(len(v), u[0]), np.full(len(v), u[-1]), uu.ravel()])
    pv = np.concatenate([np.full(len(u), v[0]), np.full(len(u), v[-1]), v, v, vv.ravel()])
    c, s = math.cos(th), math.sin(th)
    i = np.floor((x + pu * c - pv * s - spec.origin[0]) / res).astype(int)
    j = np.floor((y + pu * s + pv * c - spec.origin[1]) / res).astype(int)
    outside = (i < 0) | (i >= spec.width) | (j < 0) | (j >= spec.height)
    if outside.any():
        return True
    return bool(blocked[i, j].any())


def holonomic_heuristic(grid: OccupancyGrid, goal, unknown_blocks: bool = True,
                        blocked: np.ndarray | None = None) -> np.ndarray:
    """8-connected shortest distance (m) from every cell to the cell holding ``goal``.

    ``blocked`` overrides the mask derived from ``grid``. Blocked and
    unreachable cells get ``inf``. Diagonal moves may not cut between two
    blocked cells.
    """
    spec = grid.spec
    if blocked is None:
        blocked = grid.blocked(unknown_blocks)
    W, H = blocked.shape
    gi = int(math.floor((goal[0] - spec.origin[0]) / spec.resolution))
    gj = int(math.floor((goal[1] - spec.origin[1]) / spec.resolution))
    if not (0 <= gi < W and 0 <= gj < H) or blocked[gi, gj]:
        raise GoalOccupied(f"goal cell ({gi}, {gj}) is not free")
    res = spec.resolution
    free = ~blocked
    fp = np.pad(free, 1)

    def shifted(di, dj):
        return fp[1 + di:1 + di + W, 1 + dj:1 + dj + H]

    idx = np.arange(W * H).reshape(W, H)
    rows, cols, wts = [], [], []
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        ok = free & shifted(di, dj)
        if di and dj:
            ok &= shifted(di, 0) & shifted(0, dj)
        ia = idx[ok]
        rows.append(ia)
        cols.append(ia + di * H + dj)
        wts.append(np.full(len(ia), res * (math.sqrt(2) if di and dj else 1.0)))
    r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)
    g = csr_matrix((w, (r, c)), shape=(W * H, W * H))
    dist = dijkstra(g, directed=False, indices=gi * H + gj).reshape(W, H)
    dist[blocked] = np.inf
    return dist


@dataclass
class PlannedPath:
    poses: np.ndarray            # (M, 3) x, y, theta at primitive boundaries
    segments: list = field(default_factory=list)  # (direction, curvature, length) per step
    total_length: float = 0.0
    cost: float = 0.0
    expansions: int = 0

    def interpolate(self, spacing: float) -> np.ndarray:
        """Dense poses along the exact arcs with at most ``spacing`` between samples."""
        out = [self.poses[0]]
        for (x, y, th), (d, kappa, L) in zip(self.poses[:-1], self.segments):
            n = max(1, int(math.ceil(L / spacing)))
            for k in range(1, n + 1):
                dx, dy, dth = _arc(d, kappa, L * k / n)
                out.append((x + dx * math.cos(th) - dy * math.sin(th),
                            y + dx * math.sin(th) + dy * math.cos(th), wrap_angle(th + dth)))
        return np.array(out, dtype=float)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.poses, fmt="%.6f", delimiter=" ")


def read_path_csv(path) -> np.ndarray:
    return np.loadtxt(path, ndmin=2)


def _arc(direction: int, kappa: float, s: float):
    """Body-frame displacement after arc length ``s`` (m)."""
    if kappa == 0:
        return direction * s, 0.0, 0.0
    phi = direction * s * kappa
    return math.sin(phi) / kappa, (1 - math.cos(phi)) / kappa, phi


def plan(grid: OccupancyGrid, start, goal, footprint: VehicleFootprint,
         config: PlannerConfig = PlannerConfig()) -> PlannedPath:
    """Search a collision-free path from ``start`` to within tolerance of ``goal``.

    Poses are ``(x, y, theta)``. Raises :class:`InvalidStart` when the start
    collides and :class:`NoPath` when the search fails or is exhausted.
    """
    fp = footprint.inflated(config.footprint_margin)
    checker = CollisionChecker(grid, fp, config.unknown_blocks)
    sx, sy, sth = map(float, start)
    gx, gy, gth = map(float, goal)
    if checker.collides(sx, sy, sth):
        raise InvalidStart(f"start pose {tuple(start)} is in collision")
    if checker.collides(gx, gy, gth):
        raise NoPath(f"goal pose {tuple(goal)} is in collision")

    spec = grid.spec
    res = spec.resolution
    x0, y0 = spec.origin
    W, H = spec.shape
    try:
        holo = holonomic_heuristic(grid, (gx, gy), blocked=checker.center_blocked())
    except GoalOccupied as exc:
        raise NoPath(str(exc)) from None
    # shrink the grid field into a lower bound on continuous path length; the
    # start and goal may each sit anywhere inside their cells
    holo_rows = (holo / OCTILE_STRETCH - math.sqrt(2.0) * res).tolist()

    pos_tol = config.position_tol
    head_tol = math.radians(config.heading_tol_deg)
    bins = config.heading_bins
    bin_width = TWO_PI / bins

    def heuristic(x, y):
        i = int((x - x0) // res)
        j = int((y - y0) // res)
        hv = holo_rows[i][j] if 0 <= i < W and 0 <= j < H else math.inf
        return max(hv, math.hypot(gx - x, gy - y)) - pos_tol

    h0 = heuristic(sx, sy)
    if math.isinf(h0):
        raise NoPath("goal unreachable from start")

    L = config.step_factor * res
    radius = footprint.min_turn_radius if footprint.min_turn_radius > 0 else L / bin_width
    kappas = (-1.0 / radius, 0.0, 1.0 / radius)
    directions = (1, -1) if footprint.allow_reverse else (1,)
    n_sub = max(1, int(math.ceil(L / (res / 2))))
    primitives = []
    for d in directions:
        for k in kappas:
            subs = [_arc(d, k, L * m / n_sub) for m in range(1, n_sub + 1)]
            primitives.append((d, k, L * (config.reverse_cost if d < 0 else 1.0), subs))

    def key(x, y, th):
        return (int((x - x0) // res), int((y - y0) // res), int(round(th / bin_width)) % bins)

    xs, ys, ths, gs, parents, prims = [sx], [sy], [sth], [0.0], [-1], [None]
    best = {key(sx, sy, sth): 0.0}
    closed = set()
    counter = 0
    w = config.heuristic_weight
    heap = [(w * max(h0, 0.0), 0, 0)]
    expansions = 0
    collides = checker.collides
    while heap:
        _, _, nid = heapq.heappop(heap)
        x, y, th, g = xs[nid], ys[nid], ths[nid], gs[nid]
        k = key(x, y, th)
        if k in closed:
            continue
        closed.add(k)
        if math.hypot(gx - x, gy - y) <= pos_tol and abs(wrap_angle(th - gth)) <= head_tol:
            path = _reconstruct(nid, xs, ys, ths, gs, parents, prims, L, expansions)
            return _trim_to_goal(path, gx, gy, checker, footprint.allow_reverse,
                                 config.reverse_cost, res / 2)
        expansions += 1
        if expansions > config.max_expansions:
            break
        c, s = math.cos(th), math.sin(th)
        for d, kappa, cost, subs in primitives:
            hit = False
            for dx, dy, dth in subs:
                if collides(x + dx * c - dy * s, y + dx * s + dy * c, th + dth):
                    hit = True
                    break
            if hit:
                continue
            dx, dy, dth = subs[-1]
            nx, ny, nth = x + dx * c - dy * s, y + dx * s + dy * c, wrap_angle(th + dth)
            nk = key(nx, ny, nth)
            if nk in closed:
                continue
            ng = g + cost
            if ng >= best.get(nk, math.inf):
                continue
            hn = heuristic(nx, ny)
            if math.isinf(hn):
                continue
            best[nk] = ng
            xs.append(nx); ys.append(ny); ths.append(nth); gs.append(ng)
            parents.append(nid); prims.append((d, kappa))
            counter += 1
            heapq.heappush(heap, (ng + w * max(hn, 0.0), counter, len(xs) - 1))
    raise NoPath(f"search exhausted after {expansions} expansions")


def _reconstruct(nid, xs, ys, ths, gs, parents, prims, L, expansions) -> PlannedPath:
    chain = []
    while nid != -1:
        chain.append(nid)
        nid = parents[nid]
    chain.reverse()
    poses = np.array([(xs[n], ys[n], ths[n]) for n in chain])
    segments = [(prims[n][0], prims[n][1], L) for n in chain[1:]]
    return PlannedPath(poses, segments, L * len(segments), gs[chain[-1]], expansions)


def _trim_to_goal(path: PlannedPath, gx, gy, checker, allow_reverse, reverse_cost, spacing):
    """Append a straight segment to the point on the final heading nearest the goal."""
    x, y, th = path.poses[-1]
    c, s = math.cos(th), math.sin(th)
    along = (gx - x) * c + (gy - y) * s
    if abs(along) < 1e-9 or (along < 0 and not allow_reverse):
        return path
    n = max(1, int(math.ceil(abs(along) / spacing)))
    for m in range(1, n + 1):
        t = along * m / n
        if checker.collides(x + t * c, y + t * s, th):
            return path
    d = 1 if along > 0 else -1
    path.poses = np.vstack([path.poses, (x + along * c, y + along * s, th)])
    path.segments.append((d, 0.0, abs(along)))
    path.total_length += abs(along)
    path.cost += abs(along) * (1.0 if d > 0 else reverse_cost)
    return path


def path_collides(path: PlannedPath, grid: OccupancyGrid, footprint: VehicleFootprint,
                  spacing: float | None = None, unknown_blocks: bool = True,
                  samples_per_cell: int = 8) -> bool:
    """Dense re-check of a path with the raster sampler."""
    spacing = grid.spec.resolution / 2 if spacing is None else spacing
    blocked = grid.blocked(unknown_blocks)
    return any(raster_collides(p, footprint, blocked, grid.spec, samples_per_cell)
               for p in path.interpolate(spacing))
