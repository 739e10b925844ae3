"""The bundled nine-scenario benchmark suite.

Most scenarios share one layout: a 1.2 m wall across the middle of a
40 x 40 m site with a short-cut gap near the start (gap A, x 3-13 m) and a
detour gap further east (gap B, x 22-30 m). The start sits south of the
wall and goals are drawn north of it. What occupies gap A decides which
mapping mode can use it.

Six scenarios carry the difficult-terrain flag and seven the obstacle flag.
"""

from __future__ import annotations

from .world import ScenarioSpec

WALL_Y = (19.0, 21.0)
GAP_A = (3.0, 13.0)
GAP_B = (22.0, 30.0)


def _wall(height: float = 1.2) -> list[dict]:
    y0, y1 = WALL_Y
    spans = [(0.0, GAP_A[0]), (GAP_A[1], GAP_B[0]), (GAP_B[1], 40.0)]
    return [{"type": "box", "x0": a, "y0": y0, "x1": b, "y1": y1, "height": height,
             "label": "obstacle"} for a, b in spans]


def _water_in_gap_a() -> dict:
    return {"type": "patch", "x0": GAP_A[0] - 0.5, "y0": WALL_Y[0] - 0.5,
            "x1": GAP_A[1] + 0.5, "y1": WALL_Y[1] + 0.5, "label": "water"}


def _bar_in_gap_a() -> dict:
    # a steel bar lying on the ground: far below any geometric threshold
    return {"type": "box", "x0": GAP_A[0], "y0": 19.8, "x1": GAP_A[1], "y1": 20.2,
            "height": 0.06, "label": "obstacle"}


def default_suite() -> list[ScenarioSpec]:
    s = []
    s.append(ScenarioSpec(
        "s1-water", seed=11, difficult_terrain=True, obstacles=True,
        features=_wall() + [_water_in_gap_a(),
                            {"type": "ramp", "x0": 30.0, "y0": 4.0, "x1": 37.0, "y1": 10.0,
                             "slope_deg": 20.0, "direction_deg": 0.0}]))
    s.append(ScenarioSpec(
        "s2-bar", seed=12, obstacles=True,
        features=_wall() + [_bar_in_gap_a()]))
    s.append(ScenarioSpec(
        "s3-rocks", seed=13, difficult_terrain=True, obstacles=True,
        features=_wall() + [{"type": "rockpile", "cx": 8.0, "cy": 20.0, "radius": 3.5, "height": 2.5},
                            {"type": "pit", "cx": 18.0, "cy": 10.0, "radius": 2.0, "depth": 1.0}]))
    s.append(ScenarioSpec(
        "s4-puddles", seed=14, difficult_terrain=True, obstacles=True,
        features=_wall() + [_water_in_gap_a(),
                            {"type": "patch", "x0": 14.0, "y0": 2.0, "x1": 20.0, "y1": 8.0,
                             "label": "mixed_water_dirt"},
                            {"type": "patch", "x0": 22.0, "y0": 24.0, "x1": 30.0, "y1": 30.0,
                             "label": "bumpy", "amplitude": 0.05, "wavelength": 2.0}]))
    s.append(ScenarioSpec(
        "s5-bar-excavator", seed=15, obstacles=True,
        features=_wall() + [_bar_in_gap_a(),
                            {"type": "box", "x0": 16.0, "y0": 8.0, "x1": 19.0, "y1": 13.0,
                             "height": 3.0, "label": "excavator"}]))
    s.append(ScenarioSpec(
        "s6-water-hills", seed=16, difficult_terrain=True, obstacles=True,
        features=_wall() + [_water_in_gap_a(),
                            {"type": "hill", "cx": 20.0, "cy": 6.0, "radius": 4.0, "height": 1.2},
                            {"type": "hill", "cx": 34.0, "cy": 30.0, "radius": 4.0, "height": 1.0}]))
    s.append(ScenarioSpec(
        "s7-pits", seed=17, difficult_terrain=True,
        features=[{"type": "pit", "cx": 9.0, "cy": 20.0, "radius": 3.0, "depth": 1.5},
                  {"type": "hill", "cx": 20.0, "cy": 20.0, "radius": 4.0, "height": 3.0},
                  {"type": "ramp", "x0": 26.0, "y0": 26.0, "x1": 34.0, "y1": 32.0,
                   "slope_deg": 30.0, "direction_deg": 90.0}]))
    s.append(ScenarioSpec(
        "s8-rubble", seed=18, obstacles=True,
        features=_wall() + [{"type": "rockpile", "cx": 8.0, "cy": 20.0, "radius": 6.0,
                             "height": 0.12}]))
    s.append(ScenarioSpec(
        "s9-moat", seed=19, difficult_terrain=True,
        features=[{"type": "patch", "x0": 0.0, "y0": 18.0, "x1": GAP_B[0], "y1": 22.0,
                   "label": "water"},
                  {"type": "patch", "x0": GAP_B[1], "y0": 18.0, "x1": 40.0, "y1": 22.0,
                   "label": "water"}]))
    return s


def flat_suite(n: int = 3) -> list[ScenarioSpec]:
    """Featureless sites; every trial should succeed in both modes."""
    return [ScenarioSpec(f"flat-{k}", seed=100 + k, ground_amplitude=0.0) for k in range(n)]

