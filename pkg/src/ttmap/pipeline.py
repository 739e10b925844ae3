"""One mapping update cycle: label points, insert heights, refresh the layer."""

from __future__ import annotations

import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .fusion import update_traversability_layer
from .gridmap import ElevationGridMap
from .postprocess import OccupancyGrid, postprocess, to_occupancy
from .semantics import CameraModel, accumulate_labels, label_cloud

STAGES = ("segmentation", "projection", "t_geo")


@dataclass
class FrameReport:
    stamp: float
    points: int
    cells_touched: int
    labeled_points: int
    cells_updated: int


class StageTimer:
    def __init__(self):
        self.samples = defaultdict(list)

    @contextmanager
    def __call__(self, stage: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.samples[stage].append(time.perf_counter() - t0)

    def summary(self) -> dict[str, dict[str, float]]:
        """Per stage max/min/mean in milliseconds."""
        out = {}
        for stage in STAGES + tuple(s for s in self.samples if s not in STAGES):
            xs = np.array(self.samples.get(stage, []), dtype=float) * 1e3
            if len(xs):
                out[stage] = {"max": float(xs.max()), "min": float(xs.min()),
                              "mean": float(xs.mean()), "n": int(len(xs))}
        return out

    def format(self) -> str:
        lines = [f"{'Run-time (ms)':<14}{'Max':>9}{'Min':>9}{'Mean':>9}"]
        for stage, st in self.summary().items():
            lines.append(f"{stage:<14}{st['max']:>9.1f}{st['min']:>9.1f}{st['mean']:>9.1f}")
        return "\n".join(lines)


class MappingPipeline:
    """Owns an elevation map and applies sensor frames to it in order."""

    def __init__(self, config: PipelineConfig = PipelineConfig(), use_semantics: bool = True):
        self.config = config
        self.use_semantics = use_semantics
        self.map = ElevationGridMap(config.grid, config.heights_per_cell)
        self.thresholds = config.thresholds()
        self.hoods = config.neighborhoods()
        self.timer = StageTimer()

    def process(self, points: np.ndarray, label_image: np.ndarray | None = None,
                camera: CameraModel | None = None, now: float | None = None) -> FrameReport:
        """Apply one cloud (``(M, 4)`` rows of ``t x y z``) and its optional label image.

        ``camera`` must already map world points into the image.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 4)
        stamp = float(pts[:, 0].max()) if now is None and len(pts) else (now or 0.0)
        labels = None
        labeled = 0
        if self.use_semantics and label_image is not None and camera is not None:
            with self.timer("projection"):
                labels = label_cloud(pts[:, 1:4], label_image, camera)
                labeled = int(np.count_nonzero(labels < 7))
        with self.timer("t_geo"):
            summary = self.map.insert_points(pts)
            if labels is not None:
                accumulate_labels(self.map, pts[:, 1:4], labels, self.config.label_decay)
            upd = update_traversability_layer(self.map, self.thresholds, stamp,
                                              self.config.window_s, self.hoods,
                                              use_semantics=self.use_semantics)
        return FrameReport(stamp, len(pts), summary.cells_touched, labeled, upd.cells_updated)

    def occupancy(self, unknown_policy: str | None = None, apply_postprocess: bool | None = None
                  ) -> OccupancyGrid:
        """Occupancy from a post-processed copy of the traversability layer."""
        cfg = self.config
        do_post = cfg.postprocess if apply_postprocess is None else apply_postprocess
        saved = self.map.traversability.copy()
        try:
            if do_post:
                postprocess(self.map, self.thresholds.h_cri, cfg.machine.track_separation, cfg.t_occ)
            return to_occupancy(self.map, cfg.t_occ, unknown_policy or cfg.unknown_policy)
        finally:
            self.map.traversability[...] = saved
