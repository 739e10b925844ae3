"""Survey-then-plan trials and the two-mode success-rate benchmark."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ..config import PipelineConfig
from ..gridmap import GridSpec
from ..pipeline import MappingPipeline
from ..planner import CollisionChecker, InvalidStart, NoPath, PlannedPath, PlannerConfig, plan
from ..postprocess import CellState, OccupancyGrid
from .sensing import SensorConfig, SensorFrame, Sensors
from .world import ScenarioSpec, World, generate_world

MODES = ("geometric", "fused")


class Result(str, Enum):
    SUCCESS = "success"
    NO_PATH = "no-path"
    COLLISION = "collision-on-replay"


@dataclass(frozen=True)
class TrialOutcome:
    scenario: str
    trial: int
    mode: str
    result: Result
    path_length: float | None = None

    def __post_init__(self):
        if self.result is Result.COLLISION and self.path_length is None:
            raise ValueError("collision-on-replay requires a returned path")


@dataclass(frozen=True)
class SurveyConfig:
    """Stop-and-look survey: a lattice of stations, several headings at each."""

    stations_per_axis: int = 3
    margin_frac: float = 0.2
    headings: int = 6
    frame_dt: float = 0.1

    def __post_init__(self):
        if self.stations_per_axis < 1 or self.headings < 1 or self.frame_dt <= 0:
            raise ValueError("survey needs >= 1 station, >= 1 heading and frame_dt > 0")
        if not 0 <= self.margin_frac < 0.5:
            raise ValueError("margin_frac must lie in [0, 0.5)")


def bench_pipeline_config(spec: ScenarioSpec, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Grid exactly covering the world; unknown cells plannable for long-range goals."""
    res = base.grid.resolution
    W, H = spec.extent
    grid = GridSpec((0.0, 0.0), int(round(W / res)), int(round(H / res)), res)
    planner = base.planner
    if planner == PlannerConfig():
        planner = replace(planner, footprint_margin=0.3, heuristic_weight=3.0,
                          max_expansions=60_000)
    return base.replace(grid=grid, unknown_policy="free", planner=planner)


def survey_route(world: World, survey: SurveyConfig = SurveyConfig(),
                 s_cri_deg: float = 30.0) -> list[tuple[float, float, float]]:
    W, H = world.extent
    n = survey.stations_per_axis
    fr = np.linspace(survey.margin_frac, 1 - survey.margin_frac, n) if n > 1 else np.array([0.5])
    hazard = world.hazard_mask(s_cri_deg)
    route = []
    for k, fy in enumerate(fr):
        xs = fr if k % 2 == 0 else fr[::-1]  # serpentine
        for fx in xs:
            x, y = float(fx * W), float(fy * H)
            i, j = world.texel_index(x, y)
            if hazard[i, j]:
                continue
            for h in range(survey.headings):
                route.append((x, y, wrap(math.pi / 2 + 2 * math.pi * h / survey.headings)))
    return route


def wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def collect_frames(world: World, sensor_cfg: SensorConfig = SensorConfig(),
                   survey: SurveyConfig = SurveyConfig(), seed: int = 0) -> list[SensorFrame]:
    sensors = Sensors(world, sensor_cfg)
    rng = np.random.default_rng(seed)
    return [sensors.sense(x, y, yaw, k * survey.frame_dt, rng)
            for k, (x, y, yaw) in enumerate(survey_route(world, survey))]


def build_map(frames: list[SensorFrame], cfg: PipelineConfig, mode: str) -> MappingPipeline:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    pipe = MappingPipeline(cfg, use_semantics=(mode == "fused"))
    for f in frames:
        pipe.process(f.points, f.label_image, f.camera, now=f.stamp)
    return pipe


class GroundTruth:
    """Replays paths against true hazards with the real (uninflated) footprint."""

    def __init__(self, world: World, cfg: PipelineConfig):
        self.world = world
        s_cri = cfg.thresholds().s_cri
        hz = world.hazard_mask(s_cri)
        state = np.where(hz, CellState.OCCUPIED, CellState.FREE).astype(np.uint8)
        W, H = world.extent
        spec = GridSpec((0.0, 0.0), hz.shape[0], hz.shape[1], world.texel)
        self.grid = OccupancyGrid(spec, state)
        self.checker = CollisionChecker(self.grid, cfg.footprint, unknown_blocks=True)
        self.spacing = cfg.grid.resolution / 2

    def pose_safe(self, x: float, y: float, theta: float) -> bool:
        return not self.checker.collides(x, y, theta)

    def replay_collides(self, path: PlannedPath) -> bool:
        return any(self.checker.collides(x, y, th) for x, y, th in path.interpolate(self.spacing))


def sample_goal(spec: ScenarioSpec, truth: GroundTruth, rng: np.random.Generator,
                attempts: int = 200) -> tuple[float, float, float]:
    """Random goal in the scenario's goal region whose footprint is truly safe."""
    x0, y0, x1, y1 = spec.goal_region
    for _ in range(attempts):
        g = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)),
             wrap(math.pi / 2 + float(rng.uniform(-math.pi / 6, math.pi / 6))))
        if truth.pose_safe(*g):
            return g
    raise ValueError(f"{spec.name}: no safe goal found in region {spec.goal_region}")


def plan_and_replay(pipe: MappingPipeline, truth: GroundTruth, start, goal,
                    scenario: str = "", trial: int = 0, mode: str = "fused",
                    occ: OccupancyGrid | None = None) -> tuple[TrialOutcome, PlannedPath | None]:
    cfg = pipe.config
    occ = pipe.occupancy() if occ is None else occ
    try:
        path = plan(occ, start, goal, cfg.footprint, cfg.planner)
    except (NoPath, InvalidStart):
        return TrialOutcome(scenario, trial, mode, Result.NO_PATH), None
    length = float(path.total_length)
    result = Result.COLLISION if truth.replay_collides(path) else Result.SUCCESS
    return TrialOutcome(scenario, trial, mode, result, length), path


def run_trial(world: World, start, goal, pipeline_cfg: PipelineConfig | None = None,
              mode: str = "fused", sensor_cfg: SensorConfig = SensorConfig(),
              survey: SurveyConfig = SurveyConfig(), seed: int = 0,
              frames: list[SensorFrame] | None = None) -> TrialOutcome:
    """Survey the world, map it in ``mode``, plan and replay against ground truth."""
    cfg = pipeline_cfg or bench_pipeline_config(world.spec)
    truth = GroundTruth(world, cfg)
    if not truth.pose_safe(*start):
        raise InvalidStart(f"start {tuple(start)} is not safe in the ground truth")
    if frames is None:
        frames = collect_frames(world, sensor_cfg, survey, seed)
    pipe = build_map(frames, cfg, mode)
    outcome, _ = plan_and_replay(pipe, truth, start, goal, world.spec.name, 0, mode)
    return outcome


@dataclass
class BenchmarkResult:
    scenarios: list[ScenarioSpec]
    outcomes: list[TrialOutcome]
    goals: dict = field(default_factory=dict)  # (scenario, trial) -> goal pose
    paths: dict = field(default_factory=dict)  # (scenario, trial, mode) -> PlannedPath
    occupancy: dict = field(default_factory=dict)  # (scenario, mode) -> OccupancyGrid
    configs: dict = field(default_factory=dict)  # scenario -> PipelineConfig

    def rate(self, mode: str, scenario: str | None = None) -> float:
        sel = [o for o in self.outcomes if o.mode == mode
               and (scenario is None or o.scenario == scenario)]
        return 100.0 * sum(o.result is Result.SUCCESS for o in sel) / len(sel) if sel else float("nan")

    def outcome(self, scenario: str, trial: int, mode: str) -> TrialOutcome:
        for o in self.outcomes:
            if (o.scenario, o.trial, o.mode) == (scenario, trial, mode):
                return o
        raise KeyError((scenario, trial, mode))

    def trial_log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "trial", "goal_x", "goal_y", "goal_theta",
                    "geometric_result", "geometric_length", "fused_result", "fused_length"])
        for spec in self.scenarios:
            trials = sorted({o.trial for o in self.outcomes if o.scenario == spec.name})
            for t in trials:
                gx, gy, gth = self.goals[(spec.name, t)]
                row = [spec.name, t, f"{gx:.3f}", f"{gy:.3f}", f"{gth:.4f}"]
                for mode in MODES:
                    o = self.outcome(spec.name, t, mode)
                    row += [o.result.value, "" if o.path_length is None else f"{o.path_length:.3f}"]
                w.writerow(row)
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "difficult_terrain", "obstacles", "geometric_pct", "ttm_pct"])
        for spec in self.scenarios:
            w.writerow([spec.name, int(spec.difficult_terrain), int(spec.obstacles),
                        f"{self.rate('geometric', spec.name):.1f}",
                        f"{self.rate('fused', spec.name):.1f}"])
        w.writerow(["overall", "", "", f"{self.rate('geometric'):.1f}", f"{self.rate('fused'):.1f}"])
        return buf.getvalue()

    def format_table(self) -> str:
        w = max(12, max(len(s.name) for s in self.scenarios) + 2)
        lines = [f"{'Scenario':<{w}}{'Difficult':>10}{'Obstacles':>10}{'Geometric':>11}{'TTM':>8}"]
        for spec in self.scenarios:
            lines.append(f"{spec.name:<{w}}{'yes' if spec.difficult_terrain else 'no':>10}"
                         f"{'yes' if spec.obstacles else 'no':>10}"
                         f"{self.rate('geometric', spec.name):>10.1f}%"
                         f"{self.rate('fused', spec.name):>7.1f}%")
        lines.append(f"{'Overall':<{w + 20}}{self.rate('geometric'):>10.1f}%{self.rate('fused'):>7.1f}%")
        return "\n".join(lines)


def benchmark(scenarios: list[ScenarioSpec], trials: int = 10, seed: int = 0,
              base_cfg: PipelineConfig = PipelineConfig(),
              sensor_cfg: SensorConfig = SensorConfig(image_width=192, image_height=108,
                                                      lidar_points=15000),
              survey: SurveyConfig = SurveyConfig(), min_trials: int = 10,
              progress=None) -> BenchmarkResult:
    """Run every scenario in both modes. Each scenario is surveyed once and
    mapped once per mode; all of its trials plan on those maps."""
    if trials < min_trials:
        raise ValueError(f"trials must be >= {min_trials}, got {trials}")
    if not scenarios:
        raise ValueError("scenario list is empty")
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique")
    outcomes, goals, paths, occupancy, configs = [], {}, {}, {}, {}
    for si, spec in enumerate(scenarios):
        world = generate_world(spec)
        cfg = bench_pipeline_config(spec, base_cfg)
        truth = GroundTruth(world, cfg)
        if not truth.pose_safe(*spec.start):
            raise ValueError(f"{spec.name}: start pose is not safe in the ground truth")
        frames = collect_frames(world, sensor_cfg, survey, seed=seed * 1000 + si)
        pipes = {m: build_map(frames, cfg, m) for m in MODES}
        occs = {m: pipes[m].occupancy() for m in MODES}
        configs[spec.name] = cfg
        for m in MODES:
            occupancy[(spec.name, m)] = occs[m]
        goal_rng = np.random.default_rng([seed, si])
        for t in range(trials):
            goal = sample_goal(spec, truth, goal_rng)
            goals[(spec.name, t)] = goal
            for m in MODES:
                o, path = plan_and_replay(pipes[m], truth, spec.start, goal, spec.name, t, m,
                                          occs[m])
                outcomes.append(o)
                if path is not None:
                    paths[(spec.name, t, m)] = path
                if progress:
                    progress(o)
    return BenchmarkResult(list(scenarios), outcomes, goals, paths, occupancy, configs)
