"""Virtual LiDAR and semantic camera over a :class:`World`.

Both sensors cast rays into the heightfield with a fixed-step march and a
bisection refinement, so points behind a wall are not returned and label
pixels show the first surface along each ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..gridmap import Pose
from ..semantics import UNLABELED, CameraModel
from .world import World


@dataclass(frozen=True)
class SensorConfig:
    lidar_points: int = 20000
    lidar_fov_deg: float = 100.0
    lidar_min_range: float = 1.5
    lidar_max_range: float = 18.0
    lidar_mount: float = 2.5
    noise_sigma: float = 0.02
    image_width: int = 320
    image_height: int = 180
    hfov_deg: float = 56.8
    camera_mount: float = 3.0
    camera_pitch_deg: float = 20.0
    camera_range: float = 30.0
    march_step: float = 0.1

    def __post_init__(self):
        if self.lidar_points < 0 or self.noise_sigma < 0:
            raise ValueError("lidar_points and noise_sigma must be non-negative")
        if not 0 < self.lidar_min_range < self.lidar_max_range:
            raise ValueError("need 0 < lidar_min_range < lidar_max_range")
        if not 0 < self.lidar_fov_deg <= 360 or not 0 < self.hfov_deg < 180:
            raise ValueError("fields of view out of range")
        if self.march_step <= 0:
            raise ValueError("march_step must be positive")


@dataclass
class SensorFrame:
    stamp: float
    points: np.ndarray       # (M, 4) rows of t, x, y, z in the world frame
    label_image: np.ndarray  # (H, W) uint8 class indices, UNLABELED for sky
    camera: CameraModel      # maps world points into label_image
    pose: Pose


def body_to_camera(cfg: SensorConfig) -> np.ndarray:
    """Extrinsic from the vehicle body (x forward, z up) to the optical frame."""
    phi = math.radians(cfg.camera_pitch_deg)
    s, c = math.sin(phi), math.cos(phi)
    R = np.array([[0.0, -1.0, 0.0], [-s, 0.0, -c], [c, 0.0, -s]])
    E = np.eye(4)
    E[:3, :3] = R
    E[:3, 3] = -R @ np.array([0.0, 0.0, cfg.camera_mount])
    return E


def raycast(world: World, origin, dirs: np.ndarray, t_max, step: float = 0.1,
            refine: int = 10) -> np.ndarray:
    """Distance along each unit ray to the first heightfield crossing (inf on a miss)."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(dirs, dtype=float).reshape(-1, 3)
    n = len(d)
    t_max = np.broadcast_to(np.asarray(t_max, dtype=float), (n,)).copy()
    W, H = world.extent
    # leave the world's xy box
    for axis, hi in ((0, W), (1, H)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = np.where(d[:, axis] > 0, (hi - o[axis]) / d[:, axis],
                          np.where(d[:, axis] < 0, -o[axis] / d[:, axis], np.inf))
        t_max = np.minimum(t_max, ta)
    zmax, zmin = float(world.height.max()), float(world.height.min())
    with np.errstate(divide="ignore"):
        t0 = np.where(o[2] <= zmax, 0.0, np.where(d[:, 2] < 0, (o[2] - zmax) / -d[:, 2], np.inf))
        t1 = np.where(d[:, 2] < 0, (o[2] - zmin) / -d[:, 2], np.inf)
    t_max = np.minimum(t_max, t1 + step)

    lo_t = np.full(n, np.nan)
    hi_t = np.full(n, np.inf)
    active = np.flatnonzero(t0 < t_max)
    t = t0[active]
    prev = t.copy()
    levels = [world.max_height_field(r) for r in (1.0, 4.0)]
    # parameter distance per meter of horizontal travel
    per_m = 1.0 / np.maximum(np.hypot(d[:, 0], d[:, 1]), 1e-9)
    while len(active):
        da = d[active]
        p = o + t[:, None] * da
        below = p[:, 2] <= world.height_at(p[:, 0], p[:, 1])
        if below.any():
            lo_t[active[below]] = prev[below]
            hi_t[active[below]] = t[below]
        keep = ~below
        active, t, p, da = active[keep], t[keep], p[keep], da[keep]
        # stride over ground known to stay below the ray (max-height fields within reach)
        i, j = world.texel_index(p[:, 0], p[:, 1])
        adv = np.zeros(len(active))
        for hmax, reach in levels:
            big = reach * per_m[active]
            clear = p[:, 2] - hmax[i, j]
            with np.errstate(divide="ignore", invalid="ignore"):
                a = np.where(da[:, 2] < 0, clear / -da[:, 2], big)
            adv = np.maximum(adv, np.where(clear > 0, np.minimum(a, big), 0.0))
        prev = t
        tm = t_max[active]
        t = np.minimum(t + np.maximum(adv, step), tm)
        more = prev < tm
        active, t, prev = active[more], t[more], prev[more]

    # refine every crossing at once
    idx = np.flatnonzero(np.isfinite(hi_t))
    lo, hi, dd = lo_t[idx], hi_t[idx], d[idx]
    for _ in range(refine):
        mid = 0.5 * (lo + hi)
        q = o + mid[:, None] * dd
        under = q[:, 2] <= world.height_at(q[:, 0], q[:, 1])
        hi = np.where(under, mid, hi)
        lo = np.where(under, lo, mid)
    hit = np.full(n, np.inf)
    hit[idx] = hi
    return hit


class Sensors:
    """Co-mounted LiDAR and camera on a body pose ``(x, y, yaw)``."""

    def __init__(self, world: World, cfg: SensorConfig = SensorConfig()):
        self.world = world
        self.cfg = cfg
        self.camera = CameraModel.from_fov(cfg.image_width, cfg.image_height, cfg.hfov_deg,
                                           body_to_camera(cfg))
        # unit pixel rays in the camera frame, pixel centers at (u + 0.5, v + 0.5)
        u, v = np.meshgrid(np.arange(cfg.image_width) + 0.5, np.arange(cfg.image_height) + 0.5)
        pix = np.stack([u.ravel(), v.ravel(), np.ones(u.size)], axis=1)
        rays = np.linalg.solve(self.camera.K, pix.T).T
        self._cam_rays = rays / np.linalg.norm(rays, axis=1, keepdims=True)

    def pose(self, x: float, y: float, yaw: float, stamp: float = 0.0) -> Pose:
        z = float(self.world.height_at(x, y))
        return Pose.from_xyyaw(x, y, z, yaw, stamp)

    def lidar(self, pose: Pose, rng: np.random.Generator) -> np.ndarray:
        """Hit points as ``(M, 3)``; targets are area-uniform over the forward sector."""
        cfg = self.cfg
        x, y, z = pose.position
        yaw = 2 * math.atan2(pose.orientation[2], pose.orientation[3])
        n = cfg.lidar_points
        r = np.sqrt(rng.uniform(cfg.lidar_min_range ** 2, cfg.lidar_max_range ** 2, n))
        a = yaw + np.radians(cfg.lidar_fov_deg) * (rng.random(n) - 0.5)
        tx, ty = x + r * np.cos(a), y + r * np.sin(a)
        W, H = self.world.extent
        ok = (tx > 0) & (tx < W) & (ty > 0) & (ty < H)
        tx, ty = tx[ok], ty[ok]
        origin = np.array([x, y, z + cfg.lidar_mount])
        target = np.column_stack([tx, ty, self.world.height_at(tx, ty)])
        vec = target - origin
        dist = np.linalg.norm(vec, axis=1)
        dirs = vec / dist[:, None]
        t = raycast(self.world, origin, dirs, dist * 1.5 + 1.0, self.cfg.march_step)
        hit = np.isfinite(t)
        pts = origin + t[hit, None] * dirs[hit]
        # snap onto the surface so noiseless returns are exact
        pts[:, 2] = self.world.height_at(pts[:, 0], pts[:, 1])
        return pts

    def label_image(self, pose: Pose) -> tuple[np.ndarray, CameraModel]:
        cfg = self.cfg
        cam = self.camera.at_pose(pose.matrix())
        R_cw = cam.E[:3, :3].T
        origin = -R_cw @ cam.E[:3, 3]
        dirs = self._cam_rays @ R_cw.T
        t = raycast(self.world, origin, dirs, cfg.camera_range, cfg.march_step)
        img = np.full(len(dirs), UNLABELED, dtype=np.uint8)
        hit = np.isfinite(t)
        p = origin + t[hit, None] * dirs[hit]
        img[hit] = self.world.label_at(p[:, 0], p[:, 1])
        return img.reshape(cfg.image_height, cfg.image_width), cam

    def sense(self, x: float, y: float, yaw: float, stamp: float,
              rng: np.random.Generator) -> SensorFrame:
        pose = self.pose(x, y, yaw, stamp)
        pts = self.lidar(pose, rng)
        if self.cfg.noise_sigma > 0:
            pts[:, 2] += rng.normal(0.0, self.cfg.noise_sigma, len(pts))
        img, cam = self.label_image(pose)
        cloud = np.column_stack([np.full(len(pts), stamp), pts])
        return SensorFrame(stamp, cloud, img, cam, pose)


def sense(world: World, pose, cfg: SensorConfig = SensorConfig(), seed: int = 0,
          stamp: float = 0.0) -> SensorFrame:
    """One LiDAR sweep and label image from ``pose = (x, y, yaw)``."""
    x, y, yaw = pose
    W, H = world.extent
    if not (0 <= x <= W and 0 <= y <= H):
        raise ValueError(f"pose {pose} outside the world")
    return Sensors(world, cfg).sense(x, y, yaw, stamp, np.random.default_rng(seed))
