import json

import numpy as np
import pytest
from PIL import Image

from ttmap.cli import EXIT_INVALID, EXIT_NO_PATH, EXIT_OK, main
from ttmap.gridmap import GridSpec, write_point_file
from ttmap.planner import read_path_csv
from ttmap.postprocess import CellState, OccupancyGrid
from ttmap.semantics import read_pgm


def write_grid(path, blocked=None, W=100, H=50):
    state = np.zeros((W, H), np.uint8)
    if blocked is not None:
        state[blocked] = CellState.OCCUPIED
    OccupancyGrid(GridSpec((0.0, 0.0), W, H, 0.2), state).save(path)
    return path


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "config.json"
    p.write_text(json.dumps({"grid": {"origin": [0, 0], "width": 20, "height": 20,
                                      "resolution": 0.2}}))
    return p


class TestMap:
    def test_single_cloud(self, tmp_path, small_config, capsys):
        rng = np.random.default_rng(0)
        pts = np.column_stack([np.zeros(500), rng.uniform(0, 4, (500, 2)), np.zeros(500)])
        write_point_file(tmp_path / "0.txt", pts)
        out = tmp_path / "dump"
        assert main(["map", "--config", str(small_config), "--cloud", str(tmp_path / "0.txt"),
                     "--out", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert int(text.split()[1]) >= 1
        assert "t_geo" in text
        for name in ("occupancy.pgm", "occupancy.json", "traversability.png"):
            assert (out / name).exists()

    def test_malformed_line_names_the_line(self, tmp_path, capsys):
        (tmp_path / "bad.txt").write_text("0 1 2 3\n0 1 two 3\n")
        code = main(["map", "--cloud", str(tmp_path / "bad.txt"), "--out", str(tmp_path / "o")])
        assert code == EXIT_INVALID
        assert "bad.txt:2:" in capsys.readouterr().err

    def test_decreasing_stamps(self, tmp_path):
        (tmp_path / "c.txt").write_text("1 1 1 0\n0 1 1 0\n")
        assert main(["map", "--cloud", str(tmp_path / "c.txt"), "--out",
                     str(tmp_path / "o")]) == EXIT_INVALID

    def test_labels_without_camera(self, tmp_path):
        (tmp_path / "c.txt").write_text("0 1 1 0\n")
        Image.new("L", (4, 4)).save(tmp_path / "0.pgm")
        assert main(["map", "--cloud", str(tmp_path / "c.txt"), "--labels",
                     str(tmp_path / "0.pgm"), "--out", str(tmp_path / "o")]) == EXIT_INVALID

    def test_missing_file(self, tmp_path):
        assert main(["map", "--cloud", str(tmp_path / "nope.txt"), "--out",
                     str(tmp_path / "o")]) == EXIT_INVALID


class TestPlan:
    def test_straight_on_empty_map(self, tmp_path):
        g = write_grid(tmp_path / "g.pgm")
        out = tmp_path / "p.csv"
        assert main(["plan", "--grid", str(g), "--start", "4,5,0", "--goal", "16,5,0",
                     "--out", str(out)]) == EXIT_OK
        poses = read_path_csv(out)
        assert np.hypot(*np.diff(poses[:, :2], axis=0).T).sum() == pytest.approx(12.0, abs=0.2)

    def test_loads_from_sidecar(self, tmp_path):
        write_grid(tmp_path / "g.pgm")
        assert main(["plan", "--grid", str(tmp_path / "g.json"), "--start", "4,5,0",
                     "--goal", "16,5,0", "--out", str(tmp_path / "p.csv")]) == EXIT_OK

    def test_goal_in_obstacle(self, tmp_path):
        b = np.zeros((100, 50), bool)
        b[80, 25] = True
        g = write_grid(tmp_path / "g.pgm", b)
        assert main(["plan", "--grid", str(g), "--start", "4,5,0", "--goal", "16,5,0",
                     "--out", str(tmp_path / "p.csv")]) == EXIT_NO_PATH

    def test_start_in_collision(self, tmp_path):
        b = np.zeros((100, 50), bool)
        b[20, 25] = True
        g = write_grid(tmp_path / "g.pgm", b)
        assert main(["plan", "--grid", str(g), "--start", "4,5,0", "--goal", "16,5,0",
                     "--out", str(tmp_path / "p.csv")]) == EXIT_INVALID

    def test_footprint_override(self, tmp_path):
        # a 2 m corridor is too narrow for the default machine but fits a 1 m one
        b = np.ones((100, 50), bool)
        b[:, 20:30] = False
        g = write_grid(tmp_path / "g.pgm", b)
        args = ["plan", "--grid", str(g), "--start", "4,5,0", "--goal", "16,5,0",
                "--out", str(tmp_path / "p.csv")]
        assert main(args) == EXIT_INVALID
        assert main(args + ["--length", "2", "--width", "1", "--turn-radius", "1.5"]) == EXIT_OK

    @pytest.mark.parametrize("pose", ["1,2", "a,b,c", "1,2,3,4"])
    def test_bad_pose(self, tmp_path, pose):
        g = write_grid(tmp_path / "g.pgm")
        assert main(["plan", "--grid", str(g), "--start", pose, "--goal", "16,5,0"]) == EXIT_INVALID

    def test_missing_grid(self, tmp_path):
        assert main(["plan", "--grid", str(tmp_path / "x.pgm"), "--start", "1,1,0",
                     "--goal", "2,2,0"]) == EXIT_INVALID


class TestBench:
    @pytest.mark.parametrize("n", ["0", "9"])
    def test_too_few_trials(self, tmp_path, n):
        assert main(["bench", "--trials", n, "--out", str(tmp_path)]) == EXIT_INVALID

    def test_bad_suite(self, tmp_path):
        (tmp_path / "s.json").write_text('{"scenarios": [{"name": "x", "oops": 1}]}')
        assert main(["bench", "--suite", str(tmp_path / "s.json"),
                     "--out", str(tmp_path)]) == EXIT_INVALID


def test_no_subcommand():
    assert main([]) == EXIT_INVALID


def test_unknown_scenario(tmp_path):
    assert main(["simulate", "--scenario", "nope", "--out", str(tmp_path)]) == EXIT_INVALID


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--scenario", "s1-water", "--stations", "2", "--headings", "2",
                 "--points", "3000", "--image-width", "64", "--image-height", "36",
                 "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def mapped(simulated):
    dump = simulated / "dump"
    clouds = sorted(str(p) for p in (simulated / "clouds").glob("*.txt"))
    labels = sorted(str(p) for p in (simulated / "labels").glob("*.pgm"))
    assert main(["map", "--config", str(simulated / "config.json"), "--cloud", *clouds,
                 "--labels", *labels, "--poses", str(simulated / "poses.txt"),
                 "--out", str(dump)]) == EXIT_OK
    return dump


class TestEndToEnd:
    def test_simulate_outputs(self, simulated):
        for name in ("scenario.json", "height.npy", "texture.pgm", "poses.txt",
                     "calibration.json", "config.json"):
            assert (simulated / name).exists()
        assert len(list((simulated / "clouds").glob("*.txt"))) == 8
        _, meta = read_pgm(sorted((simulated / "labels").glob("*.pgm"))[0])
        assert "stamp" in meta

    def test_map_has_free_and_occupied_cells(self, mapped):
        occ = OccupancyGrid.load(mapped / "occupancy.json")
        assert np.count_nonzero(occ.state == CellState.FREE) > 100
        assert np.count_nonzero(occ.state == CellState.OCCUPIED) > 0

    @pytest.mark.parametrize("layer,fmt", [("traversability", "png"), ("slope", "png"),
                                           ("height", "pgm")])
    def test_export_layer(self, mapped, tmp_path, layer, fmt):
        out = tmp_path / f"{layer}.{fmt}"
        assert main(["export", "--dump", str(mapped), "--layer", layer, "--format", fmt,
                     "--out", str(out)]) == EXIT_OK
        img = np.asarray(Image.open(out))
        assert img.shape[:2] == (200, 200)  # the simulated config's grid

    def test_export_occupancy(self, mapped, tmp_path):
        assert main(["export", "--dump", str(mapped), "--layer", "occupancy", "--unknown",
                     "unknown", "--out", str(tmp_path / "occ")]) == EXIT_OK
        img, _ = read_pgm(tmp_path / "occ.pgm")
        assert set(np.unique(img)) <= {0, 205, 254} and 205 in img

    def test_export_missing_layer(self, mapped, tmp_path):
        assert main(["export", "--dump", str(mapped), "--layer", "colour",
                     "--out", str(tmp_path / "x.png")]) == EXIT_INVALID
