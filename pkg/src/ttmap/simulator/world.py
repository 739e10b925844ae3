"""Synthetic worlds: a fine ground-truth heightfield plus a semantic texture.

Scenario specs are plain JSON-friendly dicts. Every feature carries a
``type`` key; coordinates are meters in the world frame, whose origin is
the lower-left corner of the extent.

Feature types and their fields::

    ramp      x0 y0 x1 y1 slope_deg direction_deg [label]   planar wedge, drops at the high end
    hill      cx cy radius height [label]                   cosine bump
    pit       cx cy radius depth [label]                    flat-bottomed hole with vertical walls
    patch     x0 y0 x1 y1 label [amplitude wavelength]      texture only; optional gentle ripple
    rockpile  cx cy radius height                           cone labeled RockPile
    box       x0 y0 x1 y1 height [label]                    flat-topped block (default Obstacle)
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..semantics import SemanticClass


class InvalidSpec(ValueError):
    pass


_LABELS = {c.name.lower(): c for c in SemanticClass}
_REQUIRED = {
    "ramp": ("x0", "y0", "x1", "y1", "slope_deg", "direction_deg"),
    "hill": ("cx", "cy", "radius", "height"),
    "pit": ("cx", "cy", "radius", "depth"),
    "patch": ("x0", "y0", "x1", "y1", "label"),
    "rockpile": ("cx", "cy", "radius", "height"),
    "box": ("x0", "y0", "x1", "y1", "height"),
}
_DEFAULT_LABEL = {"ramp": "bumpy", "hill": "bumpy", "pit": "bumpy", "box": "obstacle"}


def parse_label(name) -> SemanticClass:
    if isinstance(name, (int, np.integer)):
        return SemanticClass(int(name))
    try:
        return _LABELS[str(name).lower()]
    except KeyError:
        raise InvalidSpec(f"unknown label {name!r}; expected one of {sorted(_LABELS)}") from None


@dataclass
class ScenarioSpec:
    name: str
    seed: int = 0
    extent: tuple[float, float] = (40.0, 40.0)
    texel: float = 0.05
    ground_amplitude: float = 0.02  # smooth seeded undulation of the base ground
    features: list[dict] = field(default_factory=list)
    start: tuple[float, float, float] = (6.0, 5.0, math.pi / 2)
    goal_region: tuple[float, float, float, float] = (5.0, 27.0, 14.0, 35.0)
    difficult_terrain: bool = False
    obstacles: bool = False

    def __post_init__(self):
        self.extent = tuple(float(v) for v in self.extent)
        self.start = tuple(float(v) for v in self.start)
        self.goal_region = tuple(float(v) for v in self.goal_region)
        self.validate()

    def validate(self):
        W, H = self.extent
        if not (W > 0 and H > 0 and 0 < self.texel <= 0.5):
            raise InvalidSpec(f"{self.name}: bad extent {self.extent} or texel {self.texel}")
        if self.ground_amplitude < 0:
            raise InvalidSpec(f"{self.name}: ground_amplitude must be >= 0")
        for k, f in enumerate(self.features):
            kind = f.get("type")
            if kind not in _REQUIRED:
                raise InvalidSpec(f"{self.name}: feature {k} has unknown type {kind!r}")
            missing = [r for r in _REQUIRED[kind] if r not in f]
            if missing:
                raise InvalidSpec(f"{self.name}: {kind} feature {k} lacks {missing}")
            if "label" in f:
                parse_label(f["label"])
            if "x0" in f:
                if not (0 <= f["x0"] < f["x1"] <= W and 0 <= f["y0"] < f["y1"] <= H):
                    raise InvalidSpec(f"{self.name}: {kind} feature {k} rectangle outside extent")
            else:
                if not (0 <= f["cx"] <= W and 0 <= f["cy"] <= H and f["radius"] > 0):
                    raise InvalidSpec(f"{self.name}: {kind} feature {k} center outside extent")
            if kind == "ramp" and not 0 <= f["slope_deg"] < 90:
                raise InvalidSpec(f"{self.name}: ramp slope must lie in [0, 90)")
            if kind in ("box", "rockpile", "hill") and f["height"] <= 0:
                raise InvalidSpec(f"{self.name}: {kind} height must be positive")
            if kind == "pit" and f["depth"] <= 0:
                raise InvalidSpec(f"{self.name}: pit depth must be positive")
        x, y, _ = self.start
        gx0, gy0, gx1, gy1 = self.goal_region
        if not (0 < x < W and 0 < y < H):
            raise InvalidSpec(f"{self.name}: start outside extent")
        if not (0 <= gx0 < gx1 <= W and 0 <= gy0 < gy1 <= H):
            raise InvalidSpec(f"{self.name}: goal region outside extent")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extent"] = list(self.extent)
        d["start"] = list(self.start)
        d["goal_region"] = list(self.goal_region)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown scenario keys {sorted(unknown)}")
        if "name" not in d:
            raise InvalidSpec("scenario needs a name")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None


@dataclass
class World:
    spec: ScenarioSpec
    height: np.ndarray   # (nx, ny) meters, texel centers at (i + 0.5) * texel
    texture: np.ndarray  # (nx, ny) uint8 SemanticClass

    @property
    def texel(self) -> float:
        return self.spec.texel

    @property
    def extent(self) -> tuple[float, float]:
        return self.spec.extent

    def height_at(self, x, y) -> np.ndarray:
        """Bilinear height between texel centers, clamped at the borders."""
        t = self.texel
        fx = np.clip(np.asarray(x, dtype=float) / t - 0.5, 0, self.height.shape[0] - 1)
        fy = np.clip(np.asarray(y, dtype=float) / t - 0.5, 0, self.height.shape[1] - 1)
        i0 = np.minimum(fx.astype(np.int64), self.height.shape[0] - 2)
        j0 = np.minimum(fy.astype(np.int64), self.height.shape[1] - 2)
        ax, ay = fx - i0, fy - j0
        h = self.height
        return ((h[i0, j0] * (1 - ax) + h[i0 + 1, j0] * ax) * (1 - ay)
                + (h[i0, j0 + 1] * (1 - ax) + h[i0 + 1, j0 + 1] * ax) * ay)

    def surface_at(self, x, y) -> np.ndarray:
        """Nearest-texel height; keeps box walls vertical for ray casting."""
        i, j = self.texel_index(x, y)
        return self.height[i, j]

    def label_at(self, x, y) -> np.ndarray:
        i, j = self.texel_index(x, y)
        return self.texture[i, j]

    def texel_index(self, x, y):
        t = self.texel
        i = np.clip((np.asarray(x, dtype=float) / t).astype(np.int64), 0, self.height.shape[0] - 1)
        j = np.clip((np.asarray(y, dtype=float) / t).astype(np.int64), 0, self.height.shape[1] - 1)
        return i, j

    def max_height_field(self, reach: float = 1.0) -> tuple[np.ndarray, float]:
        """Per-texel maximum height within ``reach`` meters (square window), cached."""
        cache = self.__dict__.setdefault("_hmax", {})
        if reach not in cache:
            k = 2 * int(math.ceil(reach / self.texel)) + 3
            cache[reach] = ndimage.maximum_filter(self.height, size=k, mode="nearest")
        return cache[reach], reach

    def true_slope_deg(self) -> np.ndarray:
        """Per-texel slope from central differences of the heightfield."""
        gx, gy = np.gradient(self.height, self.texel)
        return np.degrees(np.arctan(np.hypot(gx, gy)))

    def hazard_mask(self, s_cri_deg: float) -> np.ndarray:
        """Ground-truth hazards: forbidden texture or slope steeper than ``s_cri_deg``."""
        forbidden = np.isin(self.texture, [int(SemanticClass.WATER), int(SemanticClass.ROCK_PILE),
                                           int(SemanticClass.OBSTACLE), int(SemanticClass.EXCAVATOR)])
        return forbidden | (self.true_slope_deg() > s_cri_deg)


def generate_world(spec: ScenarioSpec) -> World:
    spec.validate()
    W, H = spec.extent
    t = spec.texel
    nx, ny = int(round(W / t)), int(round(H / t))
    x = (np.arange(nx) + 0.5) * t
    y = (np.arange(ny) + 0.5) * t
    X, Y = np.meshgrid(x, y, indexing="ij")

    rng = np.random.default_rng(spec.seed)
    if spec.ground_amplitude > 0:
        # low-pass noise with a ~4 m correlation length
        noise = ndimage.gaussian_filter(rng.standard_normal((nx, ny)), sigma=4.0 / t, mode="wrap")
        noise /= max(np.abs(noise).max(), 1e-12)
        height = spec.ground_amplitude * noise
    else:
        height = np.zeros((nx, ny))
    texture = np.full((nx, ny), int(SemanticClass.FLAT), dtype=np.uint8)

    # boxes go last so their flat tops override whatever terrain is underneath
    order = sorted(range(len(spec.features)), key=lambda k: spec.features[k]["type"] == "box")
    for k in order:
        f = spec.features[k]
        kind = f["type"]
        label = parse_label(f.get("label", _DEFAULT_LABEL.get(kind, "flat")))
        if "x0" in f:
            inside = (X >= f["x0"]) & (X < f["x1"]) & (Y >= f["y0"]) & (Y < f["y1"])
        else:
            R = np.hypot(X - f["cx"], Y - f["cy"])
            inside = R < f["radius"]
        if kind == "ramp":
            a = math.radians(f["direction_deg"])
            ux, uy = math.cos(a), math.sin(a)
            # distance along the climb direction from the rectangle's low edge
            corners = [(f["x0"], f["y0"]), (f["x1"], f["y0"]), (f["x0"], f["y1"]), (f["x1"], f["y1"])]
            base = min(cx * ux + cy * uy for cx, cy in corners)
            rise = (X * ux + Y * uy - base) * math.tan(math.radians(f["slope_deg"]))
            height[inside] += rise[inside]
        elif kind == "hill":
            bump = f["height"] * 0.5 * (1 + np.cos(np.pi * R / f["radius"]))
            height[inside] += bump[inside]
        elif kind == "pit":
            height[inside] -= f["depth"]
        elif kind == "rockpile":
            cone = f["height"] * (1 - R / f["radius"])
            height[inside] += cone[inside]
            label = SemanticClass.ROCK_PILE
        elif kind == "patch":
            amp = float(f.get("amplitude", 0.0))
            if amp > 0:
                wl = float(f.get("wavelength", 1.0))
                ripple = amp * np.sin(2 * np.pi * X / wl) * np.sin(2 * np.pi * Y / wl)
                height[inside] += ripple[inside]
        elif kind == "box":
            ground = height[inside]
            height[inside] = (ground.max() if ground.size else 0.0) + f["height"]
        texture[inside] = int(label)
    return World(spec, height, texture)


def load_scenarios(path) -> list[ScenarioSpec]:
    """A suite file is ``{"scenarios": [...]}`` or a bare list of scenario objects."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{path}: {exc}") from None
    if isinstance(data, dict):
        data = data.get("scenarios")
    if not isinstance(data, list) or not data:
        raise InvalidSpec(f"{path}: expected a non-empty list of scenarios")
    return [ScenarioSpec.from_dict(d) for d in data]


def save_scenarios(path, scenarios: list[ScenarioSpec]) -> None:
    Path(path).write_text(json.dumps({"scenarios": [s.to_dict() for s in scenarios]}, indent=2))
