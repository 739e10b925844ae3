import numpy as np
import pytest

from ttmap.config import PipelineConfig
from ttmap.gridmap import GridSpec
from ttmap.pipeline import STAGES, MappingPipeline, StageTimer
from ttmap.postprocess import CellState
from ttmap.semantics import CameraModel, SemanticClass


def down_camera(x, y, z, W=64, H=64):
    """Camera at (x, y, z) looking straight down, image u along +x and v along -y."""
    E = np.eye(4)
    E[:3, :3] = np.array([[1.0, 0, 0], [0, -1, 0], [0, 0, -1]])
    E[:3, 3] = -E[:3, :3] @ np.array([x, y, z])
    return CameraModel.from_fov(W, H, 90.0, E)


def flat_cloud(n=4000, stamp=0.0, size=4.0, seed=0):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0, size, (n, 2))
    return np.column_stack([np.full(n, stamp), xy, np.zeros(n)])


@pytest.fixture
def cfg():
    return PipelineConfig().replace(grid=GridSpec((0, 0), 20, 20, 0.2))


def test_flat_labeled_frame(cfg):
    pipe = MappingPipeline(cfg)
    cam = down_camera(2.0, 2.0, 10.0)
    img = np.full((64, 64), int(SemanticClass.FLAT), dtype=np.uint8)
    rep = pipe.process(flat_cloud(), img, cam)
    assert rep.labeled_points == rep.points == 4000
    t = pipe.map.traversability
    assert np.nanmin(t) == 1.0


def test_water_only_visible_in_fused_mode(cfg):
    cam = down_camera(2.0, 2.0, 10.0)
    img = np.full((64, 64), int(SemanticClass.FLAT), dtype=np.uint8)
    img[:, 32:] = int(SemanticClass.WATER)  # x > 2 m
    cloud = flat_cloud()
    fused, geo = MappingPipeline(cfg), MappingPipeline(cfg, use_semantics=False)
    fused.process(cloud, img, cam)
    geo.process(cloud, img, cam)
    assert np.nanmin(geo.map.traversability) == 1.0
    assert fused.map.traversability[15, 10] == 0.0 and fused.map.traversability[4, 10] == 1.0
    occ = fused.occupancy()
    assert occ.state[15, 10] == CellState.OCCUPIED and occ.state[4, 10] == CellState.FREE


def test_heights_only_without_image(cfg):
    pipe = MappingPipeline(cfg)
    rep = pipe.process(flat_cloud())
    assert rep.labeled_points == 0
    assert pipe.map.label_hist.sum() == 0
    assert np.nanmin(pipe.map.traversability) == 1.0


def test_window_excludes_old_cells(cfg):
    pipe = MappingPipeline(cfg)
    pipe.process(flat_cloud(stamp=0.0))
    rep = pipe.process(np.array([[10.0, 1.0, 1.0, 0.0]]))
    assert rep.cells_updated == 1


def test_occupancy_does_not_mutate_layer(cfg):
    pipe = MappingPipeline(cfg)
    pipe.process(flat_cloud())
    pipe.map.traversability[5, 5] = 0.1  # a tiny hole that post-processing would free
    before = pipe.map.traversability.copy()
    occ = pipe.occupancy()
    assert occ.state[5, 5] == CellState.FREE
    assert np.array_equal(before, pipe.map.traversability, equal_nan=True)
    assert pipe.occupancy(apply_postprocess=False).state[5, 5] == CellState.OCCUPIED


def test_unknown_policy_override(cfg):
    pipe = MappingPipeline(cfg)
    assert np.all(pipe.occupancy().state == CellState.OCCUPIED)
    assert np.all(pipe.occupancy("unknown").state == CellState.UNKNOWN)


def test_timer_reports_stages(cfg):
    pipe = MappingPipeline(cfg)
    cam = down_camera(2.0, 2.0, 10.0)
    for k in range(3):
        with pipe.timer("segmentation"):
            img = np.zeros((64, 64), dtype=np.uint8)
        pipe.process(flat_cloud(stamp=k * 0.1, seed=k), img, cam)
    summary = pipe.timer.summary()
    assert list(summary) == list(STAGES)
    for st in summary.values():
        assert st["n"] == 3 and st["min"] <= st["mean"] <= st["max"]
    text = pipe.timer.format()
    assert text.splitlines()[0].split()[-3:] == ["Max", "Min", "Mean"]


def test_timer_empty():
    assert StageTimer().summary() == {}
