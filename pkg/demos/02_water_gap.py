"""Survey a small site, map it twice and plan across a water-filled gap.

The only gap in a wall holds a shallow pond. Geometry alone sees flat ground
and drives through; the fused map marks the water forbidden.

Run: python demos/02_water_gap.py
"""

import math

import numpy as np

from ttmap.postprocess import CellState
from ttmap.simulator import (ScenarioSpec, SensorConfig, SurveyConfig, bench_pipeline_config,
                             build_map, collect_frames, generate_world)
from ttmap.simulator.harness import GroundTruth, plan_and_replay

spec = ScenarioSpec(
    "water-gap", seed=3, extent=(20.0, 20.0), ground_amplitude=0.0,
    start=(8.0, 3.5, math.pi / 2), goal_region=(6.0, 15.0, 10.0, 17.0),
    features=[
        {"type": "box", "x0": 0.0, "y0": 9.0, "x1": 4.0, "y1": 11.0, "height": 1.2},
        {"type": "box", "x0": 12.0, "y0": 9.0, "x1": 20.0, "y1": 11.0, "height": 1.2},
        {"type": "patch", "x0": 3.5, "y0": 8.5, "x1": 12.5, "y1": 11.5, "label": "water"},
    ])
world = generate_world(spec)
cfg = bench_pipeline_config(spec)
frames = collect_frames(world, SensorConfig(image_width=160, image_height=90, lidar_points=10000),
                        SurveyConfig(stations_per_axis=2, headings=4))
print(f"surveyed {len(frames)} frames")

truth = GroundTruth(world, cfg)
goal = (8.0, 16.0, math.pi / 2)
for mode in ("geometric", "fused"):
    pipe = build_map(frames, cfg, mode)
    occ = pipe.occupancy()
    outcome, path = plan_and_replay(pipe, truth, spec.start, goal, spec.name, 0, mode, occ)
    print(f"\n{mode}: {outcome.result.value}"
          + (f", path {outcome.path_length:.1f} m" if path is not None else ""))
    # coarse view of the occupancy grid, north up, one character per metre
    sub = occ.state[2::5, 2::5].T[::-1]
    for row in sub:
        print("  " + "".join("#" if v == CellState.OCCUPIED else "." for v in row))
