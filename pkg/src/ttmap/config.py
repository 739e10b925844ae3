"""Pipeline configuration with full-default fallback.

The config file is JSON. Every key is optional; omitted keys take the
defaults below. Schema::

    {
      "grid":      {"origin": [x, y], "width": int, "height": int, "resolution": m},
      "machine":   {"max_climb_deg", "safe_climb_deg", "track_width",
                    "track_separation", "slope_margin_deg", "step_span"},
      "thresholds": {"s_cri", "s_safe", "h_cri", "h_safe", "alpha1", "alpha2"},
      "window_s": 2.0, "heights_per_cell": 10, "t_occ": 0.6,
      "unknown_policy": "occupied" | "free" | "unknown",
      "postprocess": true, "label_decay": 1.0, "image_time_tolerance": 0.1,
      "camera": "path/to/calibration.json" | null,
      "footprint": {"length", "width", "min_turn_radius", "allow_reverse"},
      "planner":   {"heading_bins", "step_factor", "reverse_cost", "position_tol",
                    "heading_tol_deg", "max_expansions", "unknown_blocks",
                    "footprint_margin", "heuristic_weight"}
    }

``thresholds`` entries override the values derived from ``machine``. A
relative ``camera`` path is resolved against the config file's directory
by the CLI.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import GeoThresholds, MachineSpec, Neighborhoods, derive_thresholds
from .gridmap import GridSpec
from .planner import PlannerConfig, VehicleFootprint
from .postprocess import UnknownPolicy


class ConfigError(ValueError):
    pass


# XCMG XE490D-sized tracked base
DEFAULT_FOOTPRINT = VehicleFootprint(length=5.0, width=3.35, min_turn_radius=3.0, allow_reverse=True)


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridSpec = GridSpec()
    machine: MachineSpec = MachineSpec()
    threshold_overrides: dict = field(default_factory=dict)
    window_s: float = 2.0
    heights_per_cell: int = 10
    t_occ: float = 0.6
    unknown_policy: str = "occupied"
    postprocess: bool = True
    label_decay: float = 1.0
    image_time_tolerance: float = 0.1
    camera: str | None = None
    footprint: VehicleFootprint = DEFAULT_FOOTPRINT
    planner: PlannerConfig = PlannerConfig()

    def __post_init__(self):
        if not self.window_s > 0:
            raise ConfigError("window_s must be positive")
        if self.heights_per_cell < 1:
            raise ConfigError("heights_per_cell must be >= 1")
        if not 0 < self.t_occ < 1:
            raise ConfigError("t_occ must lie in (0, 1)")
        if not 0 < self.label_decay <= 1:
            raise ConfigError("label_decay must lie in (0, 1]")
        try:
            UnknownPolicy(self.unknown_policy)
        except ValueError:
            raise ConfigError(f"unknown_policy must be one of "
                              f"{[p.value for p in UnknownPolicy]}") from None
        self.thresholds()

    def thresholds(self) -> GeoThresholds:
        base = derive_thresholds(self.machine, self.grid.resolution)
        try:
            return dataclasses.replace(base, **self.threshold_overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid threshold override: {exc}") from None

    def neighborhoods(self) -> Neighborhoods:
        return Neighborhoods.for_machine(self.machine, self.grid.resolution)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {"grid", "machine", "thresholds", "window_s", "heights_per_cell", "t_occ",
                 "unknown_policy", "postprocess", "label_decay", "image_time_tolerance",
                 "camera", "footprint", "planner"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        kw = {}
        try:
            if "grid" in d:
                kw["grid"] = GridSpec.from_dict(d["grid"])
            if "machine" in d:
                kw["machine"] = MachineSpec(**d["machine"])
            if "footprint" in d:
                kw["footprint"] = VehicleFootprint(**{**dataclasses.asdict(DEFAULT_FOOTPRINT),
                                                      **d["footprint"]})
            if "planner" in d:
                kw["planner"] = PlannerConfig(**d["planner"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if "thresholds" in d:
            kw["threshold_overrides"] = dict(d["thresholds"])
        for k in ("window_s", "heights_per_cell", "t_occ", "unknown_policy", "postprocess",
                  "label_decay", "image_time_tolerance", "camera"):
            if k in d:
                kw[k] = d[k]
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "machine": dataclasses.asdict(self.machine),
            "thresholds": dict(self.threshold_overrides),
            "window_s": self.window_s,
            "heights_per_cell": self.heights_per_cell,
            "t_occ": self.t_occ,
            "unknown_policy": self.unknown_policy,
            "postprocess": self.postprocess,
            "label_decay": self.label_decay,
            "image_time_tolerance": self.image_time_tolerance,
            "camera": self.camera,
            "footprint": dataclasses.asdict(self.footprint),
            "planner": dataclasses.asdict(self.planner),
        }


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return PipelineConfig.from_dict(data)
