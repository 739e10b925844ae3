"""Synthetic worlds, virtual sensors and the planning benchmark."""

from .harness import (MODES, BenchmarkResult, GroundTruth, Result, SurveyConfig, TrialOutcome,
                      bench_pipeline_config, benchmark, build_map, collect_frames, run_trial,
                      sample_goal, survey_route)
from .sensing import SensorConfig, SensorFrame, Sensors, body_to_camera, raycast, sense
from .suite import default_suite, flat_suite
from .world import InvalidSpec, ScenarioSpec, World, generate_world, load_scenarios, save_scenarios

__all__ = [
    "MODES", "BenchmarkResult", "GroundTruth", "Result", "SurveyConfig", "TrialOutcome",
    "bench_pipeline_config", "benchmark", "build_map", "collect_frames", "run_trial",
    "sample_goal", "survey_route", "SensorConfig", "SensorFrame", "Sensors", "body_to_camera",
    "raycast", "sense", "default_suite", "flat_suite", "InvalidSpec", "ScenarioSpec", "World",
    "generate_world", "load_scenarios", "save_scenarios",
]
