import math

import numpy as np
import pytest

from ttmap.config import PipelineConfig
from ttmap.geometry import compute_geometry
from ttmap.semantics import SemanticClass, project_points
from ttmap.simulator import (InvalidSpec, Result, ScenarioSpec, SensorConfig, SurveyConfig,
                             bench_pipeline_config, benchmark, build_map, collect_frames,
                             default_suite, flat_suite, generate_world, load_scenarios, raycast,
                             run_trial, save_scenarios, sense, survey_route)
from ttmap.simulator.harness import GroundTruth, sample_goal

FAST = SensorConfig(image_width=160, image_height=90, lidar_points=10000)


def gap_world(gap_label=None, bar=False):
    """20 x 20 m site: a wall at y 9-11 whose only gap (x 4-12) may hold water or a bar."""
    feats = [{"type": "box", "x0": 0.0, "y0": 9.0, "x1": 4.0, "y1": 11.0, "height": 1.2},
             {"type": "box", "x0": 12.0, "y0": 9.0, "x1": 20.0, "y1": 11.0, "height": 1.2}]
    if gap_label:
        feats.append({"type": "patch", "x0": 3.5, "y0": 8.5, "x1": 12.5, "y1": 11.5,
                      "label": gap_label})
    if bar:
        feats.append({"type": "box", "x0": 4.0, "y0": 9.8, "x1": 12.0, "y1": 10.2,
                      "height": 0.06})
    return ScenarioSpec("gap", seed=3, extent=(20.0, 20.0), features=feats,
                        start=(8.0, 3.5, math.pi / 2), goal_region=(6.0, 15.0, 10.0, 17.0),
                        ground_amplitude=0.0)


class TestSpec:
    def test_unknown_feature(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec("x", features=[{"type": "volcano"}])

    def test_missing_field(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec("x", features=[{"type": "hill", "cx": 1, "cy": 1, "radius": 1}])

    def test_outside_extent(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec("x", features=[{"type": "patch", "x0": 30, "y0": 0, "x1": 50, "y1": 5,
                                         "label": "water"}])

    def test_unknown_label(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec("x", features=[{"type": "patch", "x0": 0, "y0": 0, "x1": 5, "y1": 5,
                                         "label": "lava"}])

    def test_unknown_key(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec.from_dict({"name": "x", "colour": "red"})

    def test_suite_round_trip(self, tmp_path):
        suite = default_suite()
        save_scenarios(tmp_path / "s.json", suite)
        assert load_scenarios(tmp_path / "s.json") == suite

    def test_empty_suite_file(self, tmp_path):
        (tmp_path / "s.json").write_text('{"scenarios": []}')
        with pytest.raises(InvalidSpec):
            load_scenarios(tmp_path / "s.json")

    def test_default_suite_shape(self):
        suite = default_suite()
        assert len(suite) == 9
        assert sum(s.difficult_terrain for s in suite) == 6
        assert sum(s.obstacles for s in suite) == 7
        assert len({s.name for s in suite}) == 9


class TestWorld:
    def test_ramp_slope(self):
        spec = ScenarioSpec("r", ground_amplitude=0.0, features=[
            {"type": "ramp", "x0": 10, "y0": 10, "x1": 20, "y1": 20, "slope_deg": 30.0,
             "direction_deg": 0.0}])
        w = generate_world(spec)
        s = w.true_slope_deg()
        i, j = w.texel_index(np.array([12.0, 15.0, 18.0]), np.array([12.0, 15.0, 18.0]))
        assert np.allclose(s[i, j], 30.0, atol=0.5)

    def test_deterministic(self):
        a, b = generate_world(default_suite()[3]), generate_world(default_suite()[3])
        assert np.array_equal(a.height, b.height) and np.array_equal(a.texture, b.texture)

    def test_water_patch(self):
        w = generate_world(gap_world("water"))
        assert w.label_at(8.0, 10.0) == SemanticClass.WATER
        assert w.label_at(8.0, 5.0) == SemanticClass.FLAT
        assert w.label_at(2.0, 10.0) == SemanticClass.OBSTACLE

    def test_box_is_flat_topped(self):
        w = generate_world(gap_world())
        assert w.surface_at(2.0, 10.0) == pytest.approx(1.2)

    def test_hazard_mask(self):
        w = generate_world(gap_world("water"))
        hz = w.hazard_mask(30.0)
        i, j = w.texel_index(np.array([8.0, 8.0]), np.array([10.0, 5.0]))
        assert list(hz[i, j]) == [True, False]


class TestSensing:
    def test_raycast_flat(self):
        w = generate_world(ScenarioSpec("f", ground_amplitude=0.0))
        d = np.array([[math.cos(-0.3), 0, math.sin(-0.3)]])
        t = raycast(w, (5.0, 5.0, 2.0), d, 30.0)
        assert t[0] == pytest.approx(2.0 / math.sin(0.3), abs=1e-3)

    def test_raycast_occluded_by_wall(self):
        w = generate_world(gap_world())
        origin = np.array([2.0, 5.0, 2.5])
        target = np.array([2.0, 15.0, 0.0])
        d = (target - origin) / np.linalg.norm(target - origin)
        t = raycast(w, origin, d[None], 30.0)[0]
        hit = origin + t * d
        # the ray clears the front face (z 1.5 at y 9) and lands on the 1.2 m top
        assert hit[1] == pytest.approx(10.2, abs=0.05) and hit[2] == pytest.approx(1.2, abs=0.01)

    def test_flat_noiseless(self):
        w = generate_world(ScenarioSpec("f", ground_amplitude=0.0))
        f = sense(w, (10, 10, 0.0), SensorConfig(noise_sigma=0.0, image_width=64,
                                                 image_height=36), seed=1)
        assert len(f.points) > 1000
        assert np.all(f.points[:, 3] == 0.0)

    def test_noise_statistics(self):
        w = generate_world(ScenarioSpec("f", ground_amplitude=0.0, extent=(60.0, 60.0)))
        f = sense(w, (30, 30, 0.0), SensorConfig(lidar_points=10000, image_width=32,
                                                 image_height=18), seed=2)
        assert len(f.points) == 10000
        assert np.std(f.points[:, 3]) == pytest.approx(0.02, abs=0.002)

    def test_obstacle_points_and_pixels(self):
        w = generate_world(gap_world())
        f = sense(w, (2.0, 5.0, math.pi / 2), FAST, seed=0)
        on_wall = (f.points[:, 2] >= 9.0) & (f.points[:, 2] <= 11.0) & (f.points[:, 1] < 4.0)
        assert on_wall.sum() > 50
        # most returns land on the top; a few strike the front face
        assert np.median(f.points[on_wall, 3]) == pytest.approx(1.2, abs=0.05)
        assert np.count_nonzero(f.label_image == SemanticClass.OBSTACLE) > 100

    def test_label_image_consistent_with_projection(self):
        w = generate_world(gap_world("water"))
        f = sense(w, (8.0, 5.0, math.pi / 2), SensorConfig(noise_sigma=0.0, image_width=160,
                                                          image_height=90), seed=0)
        uv, _, vis = project_points(f.points[:, 1:], f.camera)
        truth = w.label_at(f.points[vis, 1], f.points[vis, 2])
        seen = f.label_image[uv[vis, 1].astype(int), uv[vis, 0].astype(int)]
        assert np.mean(seen == truth) > 0.95

    def test_deterministic(self):
        w = generate_world(gap_world())
        a, b = sense(w, (8, 5, 1.0), FAST, seed=4), sense(w, (8, 5, 1.0), FAST, seed=4)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.label_image, b.label_image)

    def test_outside_world(self):
        with pytest.raises(ValueError):
            sense(generate_world(gap_world()), (30, 5, 0.0))


class TestMappedFidelity:
    def test_ramp_slope_after_aggregation(self):
        spec = ScenarioSpec("ramp", ground_amplitude=0.0, extent=(30.0, 30.0),
                            goal_region=(2.0, 20.0, 8.0, 28.0), features=[
            {"type": "ramp", "x0": 10, "y0": 5, "x1": 25, "y1": 25, "slope_deg": 20.0,
             "direction_deg": 0.0}])
        w = generate_world(spec)
        cfg = bench_pipeline_config(spec).replace(window_s=1e9)
        frames = collect_frames(w, SensorConfig(noise_sigma=0.0, image_width=32, image_height=18,
                                                lidar_points=30000),
                                SurveyConfig(stations_per_axis=2, headings=4), seed=0)
        pipe = build_map(frames, cfg, "geometric")
        geo = compute_geometry(pipe.map.full_view())
        i, j = np.meshgrid(np.arange(55, 120), np.arange(30, 120), indexing="ij")
        s = geo.slope[i, j]
        s = s[~np.isnan(s)]
        assert len(s) > 1000
        assert np.median(s) == pytest.approx(20.0, abs=1.5)


@pytest.fixture(scope="module")
def gap_frames():
    out = {}
    for key, kw in {"water": {"gap_label": "water"}, "bar": {"bar": True},
                    "open": {}}.items():
        spec = gap_world(**kw)
        w = generate_world(spec)
        out[key] = (w, collect_frames(w, FAST, SurveyConfig(stations_per_axis=2, headings=4)))
    return out


class TestTrials:
    GOAL = (8.0, 16.0, math.pi / 2)

    def outcome(self, gap_frames, key, mode):
        w, frames = gap_frames[key]
        return run_trial(w, w.spec.start, self.GOAL, mode=mode, frames=frames)

    def test_open_gap_both_succeed(self, gap_frames):
        for mode in ("geometric", "fused"):
            assert self.outcome(gap_frames, "open", mode).result is Result.SUCCESS

    def test_water_gap(self, gap_frames):
        assert self.outcome(gap_frames, "water", "geometric").result is Result.COLLISION
        assert self.outcome(gap_frames, "water", "fused").result in (Result.NO_PATH, Result.SUCCESS)

    def test_steel_bar(self, gap_frames):
        assert self.outcome(gap_frames, "bar", "geometric").result is Result.COLLISION
        assert self.outcome(gap_frames, "bar", "fused").result is not Result.COLLISION

    def test_unsafe_start(self, gap_frames):
        from ttmap.planner import InvalidStart
        w, frames = gap_frames["open"]
        with pytest.raises(InvalidStart):
            run_trial(w, (2.0, 10.0, 0.0), self.GOAL, frames=frames)

    def test_goal_sampling_is_safe(self, gap_frames):
        w, _ = gap_frames["water"]
        truth = GroundTruth(w, bench_pipeline_config(w.spec))
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = sample_goal(w.spec, truth, rng)
            assert truth.pose_safe(*g)
            x0, y0, x1, y1 = w.spec.goal_region
            assert x0 <= g[0] <= x1 and y0 <= g[1] <= y1

    def test_survey_skips_hazards(self, gap_frames):
        w, _ = gap_frames["water"]
        route = survey_route(w, SurveyConfig(stations_per_axis=5, margin_frac=0.1, headings=1))
        hz = w.hazard_mask(30.0)
        for x, y, _ in route:
            assert not hz[w.texel_index(x, y)]


class TestBenchmark:
    def test_rejects_few_trials(self):
        with pytest.raises(ValueError):
            benchmark(flat_suite(1), trials=0)
        with pytest.raises(ValueError):
            benchmark(flat_suite(1), trials=9)

    def test_flat_suite_all_succeed(self):
        r = benchmark(flat_suite(1), trials=10, sensor_cfg=FAST,
                      survey=SurveyConfig(stations_per_axis=2, headings=3))
        assert r.rate("geometric") == 100.0 and r.rate("fused") == 100.0
        log = r.trial_log_csv().splitlines()
        assert len(log) == 11
        summary = r.summary_csv().splitlines()
        assert summary[-1].startswith("overall") and len(summary) == 3
        assert "Geometric" in r.format_table() and "TTM" in r.format_table()

    def test_config_is_bench_specific(self):
        cfg = bench_pipeline_config(default_suite()[0], PipelineConfig())
        assert cfg.unknown_policy == "free"
        assert cfg.grid.width == cfg.grid.height == 200
        assert cfg.planner.footprint_margin == 0.3
