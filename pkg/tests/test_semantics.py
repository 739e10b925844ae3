import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttmap.gridmap import ElevationGridMap, GridSpec
from ttmap.semantics import (DANGER_ORDER, UNLABELED, CameraModel, DimensionMismatch, PGMError,
                             SemanticClass, accumulate_labels, back_project, label_cloud,
                             load_calibration, majority_label, majority_labels, nearest_stamp,
                             project_point, project_points, read_label_image, read_pgm,
                             save_calibration, write_pgm)

K = np.array([[500.0, 0, 320], [0, 500, 240], [0, 0, 1]])
CAM = CameraModel(K, np.eye(4), 640, 480)


def rigid(yaw, pitch, t):
    cy, sy, cp, sp = np.cos(yaw), np.sin(yaw), np.cos(pitch), np.sin(pitch)
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    Rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    E = np.eye(4)
    E[:3, :3] = Rz @ Rx
    E[:3, 3] = t
    return E


class TestClasses:
    def test_seven_classes(self):
        assert len(SemanticClass) == 7
        assert UNLABELED not in [int(c) for c in SemanticClass]

    def test_danger_order(self):
        assert DANGER_ORDER[0] is SemanticClass.OBSTACLE
        assert DANGER_ORDER[-1] is SemanticClass.FLAT
        assert len(set(DANGER_ORDER)) == 7


class TestCamera:
    def test_rejects_non_rigid(self):
        E = np.eye(4)
        E[0, 0] = 2
        with pytest.raises(ValueError):
            CameraModel(K, E, 640, 480)

    def test_rejects_lower_triangular_k(self):
        bad = K.copy()
        bad[1, 0] = 1
        with pytest.raises(ValueError):
            CameraModel(bad, np.eye(4), 640, 480)

    def test_calibration_round_trip(self, tmp_path):
        cam = CameraModel(K, rigid(0.3, -0.2, (1, 2, 3)), 640, 480)
        save_calibration(tmp_path / "c.json", cam)
        back = load_calibration(tmp_path / "c.json")
        assert np.allclose(back.K, cam.K) and np.allclose(back.E, cam.E)
        assert (back.width, back.height) == (640, 480)

    def test_from_fov(self):
        cam = CameraModel.from_fov(640, 360, 90.0)
        assert cam.K[0, 0] == pytest.approx(320.0)


class TestProjection:
    def test_principal_point(self):
        assert project_point((0, 0, 5), CAM) == (320.0, 240.0)

    def test_behind(self):
        assert project_point((0, 0, -1), CAM) is None

    def test_hand_computed_pixel(self):
        assert project_point((1, 0, 2), CAM) == (570.0, 240.0)

    def test_outside_image(self):
        assert project_point((10, 0, 1), CAM) is None

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        cam = CameraModel(K, rigid(0.7, 0.4, (-3, 2, 5)), 640, 480)
        pc = np.column_stack([rng.uniform(-3, 3, 3000), rng.uniform(-2, 2, 3000),
                              rng.uniform(0.5, 30, 3000)])
        world = (pc - cam.E[:3, 3]) @ cam.E[:3, :3]
        uv, depth, vis = project_points(world, cam)
        back = back_project(uv[vis], depth[vis], cam)
        assert vis.sum() > 1000
        assert np.abs(back - world[vis]).max() < 1e-6


class TestLabelCloud:
    def test_uniform_image(self):
        img = np.full((480, 640), int(SemanticClass.FLAT), dtype=np.uint8)
        p = np.array([[0, 0, 2.0], [0.5, 0.5, 3.0]])
        assert (label_cloud(p, img, CAM) == SemanticClass.FLAT).all()

    def test_empty(self):
        img = np.zeros((480, 640), dtype=np.uint8)
        assert label_cloud(np.zeros((0, 3)), img, CAM).shape == (0,)

    def test_points_behind_unlabeled(self):
        rng = np.random.default_rng(0)
        p = np.column_stack([rng.uniform(-0.1, 0.1, 100), rng.uniform(-0.1, 0.1, 100),
                             rng.uniform(1, 5, 100) * rng.choice([-1, 1], 100)])
        img = np.full((480, 640), int(SemanticClass.WATER), dtype=np.uint8)
        lab = label_cloud(p, img, CAM)
        assert np.array_equal(lab == UNLABELED, p[:, 2] < 0)

    def test_pixel_lookup_row_column(self):
        img = np.zeros((480, 640), dtype=np.uint8)
        img[240, 570] = int(SemanticClass.ROCK_PILE)
        assert label_cloud(np.array([[1.0, 0, 2]]), img, CAM)[0] == SemanticClass.ROCK_PILE

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            label_cloud(np.zeros((1, 3)), np.zeros((10, 10), dtype=np.uint8), CAM)


class TestAccumulate:
    def grid(self):
        return ElevationGridMap(GridSpec((0, 0), 4, 4, 0.2))

    def test_histogram(self):
        m = self.grid()
        p = np.tile([0.1, 0.1, 0.0], (4, 1))
        lab = np.array([0, 0, 0, int(SemanticClass.ROCK_PILE)])
        assert accumulate_labels(m, p, lab) == 1
        assert m.cell(0, 0).label_histogram == {0: 3.0, int(SemanticClass.ROCK_PILE): 1.0}

    def test_unlabeled_ignored(self):
        m = self.grid()
        assert accumulate_labels(m, np.zeros((3, 3)) + 0.1, np.full(3, UNLABELED)) == 0
        assert m.label_hist.sum() == 0

    def test_additive(self):
        m = self.grid()
        rng = np.random.default_rng(1)
        p = np.column_stack([rng.uniform(0, 0.8, (50, 2)), np.zeros(50)])
        lab = rng.integers(0, 7, 50)
        accumulate_labels(m, p, lab)
        once = m.label_hist.copy()
        accumulate_labels(m, p, lab)
        assert np.array_equal(m.label_hist, 2 * once)
        assert once.sum() == 50  # conservation

    def test_decay(self):
        m = self.grid()
        p = np.array([[0.1, 0.1, 0.0]])
        accumulate_labels(m, p, [1])
        accumulate_labels(m, p, [1], decay=0.5)
        assert m.label_hist[0, 0, 1] == 1.5


class TestMajority:
    def test_plain(self):
        assert majority_label({0: 5, 1: 2}) is SemanticClass.FLAT

    def test_empty(self):
        assert majority_label({}) is None

    def test_tie_goes_dangerous(self):
        assert majority_label({int(SemanticClass.WATER): 3, 0: 3}) is SemanticClass.WATER

    @given(st.lists(st.integers(0, 5), min_size=7, max_size=7), st.integers(1, 20))
    def test_scale_invariant(self, h, k):
        assert majority_label(h) == majority_label([k * v for v in h])

    @given(st.lists(st.integers(0, 3), min_size=7, max_size=7))
    def test_vectorized_matches_scalar(self, h):
        ref = majority_label(h)
        got = int(majority_labels(np.array([h], dtype=float))[0])
        assert got == (-1 if ref is None else int(ref))


class TestStamps:
    def test_nearest_within(self):
        assert nearest_stamp([0.0, 1.0, 2.0], 1.05) == 1

    def test_outside_tolerance(self):
        assert nearest_stamp([0.0, 1.0], 1.2) is None
        assert nearest_stamp([], 0.0) is None


class TestPGM:
    def test_round_trip_with_comment(self, tmp_path):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4) % 7
        write_pgm(tmp_path / "a.pgm", img, {"stamp": "1.25"})
        back, comments = read_pgm(tmp_path / "a.pgm")
        assert np.array_equal(back, img) and comments["stamp"] == "1.25"
        lab, stamp = read_label_image(tmp_path / "a.pgm")
        assert stamp == 1.25

    def test_stamp_from_stem(self, tmp_path):
        write_pgm(tmp_path / "3.5.pgm", np.zeros((2, 2), dtype=np.uint8))
        assert read_label_image(tmp_path / "3.5.pgm")[1] == 3.5

    def test_bad_label_value(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.full((2, 2), 9, dtype=np.uint8))
        with pytest.raises(PGMError):
            read_label_image(tmp_path / "a.pgm")

    def test_not_pgm(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(PGMError):
            read_pgm(tmp_path / "a.pgm")

    def test_truncated(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(PGMError):
            read_pgm(tmp_path / "a.pgm")
