"""Semantic labels: camera projection, per-point labeling and per-cell voting."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .gridmap import NUM_CLASSES, ElevationGridMap, world_to_indices

UNLABELED = 255


class SemanticClass(IntEnum):
    FLAT = 0
    BUMPY = 1
    MIXED_WATER_DIRT = 2
    WATER = 3
    ROCK_PILE = 4
    OBSTACLE = 5
    EXCAVATOR = 6


# most dangerous first; used to break voting ties
DANGER_ORDER = (
    SemanticClass.OBSTACLE,
    SemanticClass.EXCAVATOR,
    SemanticClass.ROCK_PILE,
    SemanticClass.WATER,
    SemanticClass.MIXED_WATER_DIRT,
    SemanticClass.BUMPY,
    SemanticClass.FLAT,
)
DANGER_RANK = np.zeros(NUM_CLASSES, dtype=np.int64)
for _rank, _cls in enumerate(reversed(DANGER_ORDER)):
    DANGER_RANK[int(_cls)] = _rank
_DANGER_DESC = np.array([int(c) for c in DANGER_ORDER])


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera. ``E`` maps homogeneous world points into the camera frame."""

    K: np.ndarray
    E: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float).reshape(3, 3)
        E = np.asarray(self.E, dtype=float).reshape(4, 4)
        if np.any(np.tril(K, -1) != 0) or K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("K must be upper triangular with positive focal lengths")
        R = E[:3, :3]
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6) or np.linalg.det(R) < 0:
            raise ValueError("E must be a rigid transform")
        if not np.allclose(E[3], (0, 0, 0, 1)):
            raise ValueError("E must have last row (0, 0, 0, 1)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "E", E)

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float, E=None) -> "CameraModel":
        f = (width / 2) / np.tan(np.radians(hfov_deg) / 2)
        K = np.array([[f, 0, width / 2], [0, f, height / 2], [0, 0, 1.0]])
        return cls(K, np.eye(4) if E is None else E, width, height)

    def with_extrinsic(self, E) -> "CameraModel":
        return CameraModel(self.K, E, self.width, self.height)

    def at_pose(self, body_to_world: np.ndarray) -> "CameraModel":
        """Camera whose ``E`` (body-to-camera) is composed with a body pose."""
        return self.with_extrinsic(self.E @ np.linalg.inv(body_to_world))

    def to_dict(self) -> dict:
        return {"K": self.K.reshape(-1).tolist(), "E": self.E.reshape(-1).tolist(),
                "W": self.width, "H": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        K, E = d["K"], d["E"]
        if len(K) != 9 or len(E) != 16:
            raise ValueError("calibration needs 9 K values and 16 E values")
        return cls(np.array(K, dtype=float), np.array(E, dtype=float), int(d["W"]), int(d["H"]))


def load_calibration(path) -> CameraModel:
    return CameraModel.from_dict(json.loads(Path(path).read_text()))


def save_calibration(path, cam: CameraModel) -> None:
    Path(path).write_text(json.dumps(cam.to_dict(), indent=2))


def project_points(points: np.ndarray, cam: CameraModel):
    """Project ``(M, 3)`` world points. Returns ``(uv, depth, visible)``."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    pc = p @ cam.E[:3, :3].T + cam.E[:3, 3]
    zc = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = pc @ cam.K.T
        uv = q[:, :2] / zc[:, None]
    visible = (zc > 0) & (uv[:, 0] >= 0) & (uv[:, 0] < cam.width) \
        & (uv[:, 1] >= 0) & (uv[:, 1] < cam.height)
    return uv, zc, visible


def project_point(p, cam: CameraModel) -> tuple[float, float] | None:
    """Pixel coordinates of world point ``p``, or None when not visible."""
    uv, _, vis = project_points(np.asarray(p, dtype=float)[None, :], cam)
    if not vis[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])


def back_project(uv, depth, cam: CameraModel) -> np.ndarray:
    """World points on the pixel rays at camera-frame depth ``depth``."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    depth = np.asarray(depth, dtype=float).reshape(-1)
    homog = np.column_stack([uv, np.ones(len(uv))])
    pc = np.linalg.solve(cam.K, homog.T).T * depth[:, None]
    R, t = cam.E[:3, :3], cam.E[:3, 3]
    return (pc - t) @ R


def label_cloud(points, label_image: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Class index per point (``UNLABELED`` when outside the image).

    ``label_image`` is indexed ``[row, col]`` = ``[v, u]``.
    """
    img = np.asarray(label_image)
    if img.shape != (cam.height, cam.width):
        raise DimensionMismatch(f"label image {img.shape[::-1]} does not match camera "
                                f"{cam.width}x{cam.height}")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    labels = np.full(len(pts), UNLABELED, dtype=np.uint8)
    if len(pts) == 0:
        return labels
    uv, _, vis = project_points(pts, cam)
    u = uv[vis, 0].astype(np.int64)
    v = uv[vis, 1].astype(np.int64)
    labels[vis] = img[v, u]
    return labels


def accumulate_labels(gridmap: ElevationGridMap, points, labels, decay: float = 1.0) -> int:
    """Add labeled points to their cells' histograms. Returns cells touched.

    ``decay`` < 1 scales every histogram down before the batch is added.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    labels = np.asarray(labels).reshape(-1)
    if decay != 1.0:
        gridmap.label_hist *= decay
    i, j, inside = world_to_indices(gridmap.spec, pts[:, :2])
    use = inside & (labels < NUM_CLASSES)
    if not use.any():
        return 0
    flat = (i[use] * gridmap.spec.height + j[use]) * NUM_CLASSES + labels[use].astype(np.int64)
    counts = np.bincount(flat, minlength=gridmap.label_hist.size)
    gridmap.label_hist += counts.reshape(gridmap.label_hist.shape)
    cells = np.unique(flat // NUM_CLASSES)
    return len(cells)


def majority_label(histogram) -> SemanticClass | None:
    """Most frequent class; ties go to the more dangerous class.

    ``histogram`` is a mapping class -> count or a length-7 sequence.
    """
    if isinstance(histogram, dict):
        h = np.zeros(NUM_CLASSES)
        for c, v in histogram.items():
            h[int(c)] = v
    else:
        h = np.asarray(histogram, dtype=float)
    top = h.max()
    if top <= 0:
        return None
    tied = np.flatnonzero(h == top)
    return SemanticClass(int(tied[np.argmax(DANGER_RANK[tied])]))


def majority_labels(hist: np.ndarray) -> np.ndarray:
    """Per-cell majority class over a ``(..., 7)`` histogram; -1 where empty."""
    # columns in descending danger: argmax returns the first (most dangerous) tie
    by_danger = np.asarray(hist)[..., _DANGER_DESC]
    k = np.argmax(by_danger, axis=-1)
    top = np.take_along_axis(by_danger, k[..., None], axis=-1)[..., 0]
    return np.where(top > 0, _DANGER_DESC[k], -1)


def nearest_stamp(stamps, t: float, tolerance: float = 0.1) -> int | None:
    """Index of the stamp closest to ``t`` within ``tolerance`` seconds."""
    if len(stamps) == 0:
        return None
    s = np.asarray(stamps, dtype=float)
    k = int(np.argmin(np.abs(s - t)))
    return k if abs(s[k] - t) <= tolerance else None


# --- binary PGM (P5) -------------------------------------------------------------

class PGMError(ValueError):
    pass


def write_pgm(path, image: np.ndarray, comments: dict | None = None) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise PGMError("PGM image must be 2-D")
    header = "P5\n"
    for k, v in (comments or {}).items():
        header += f"# {k}={v}\n"
    header += f"{img.shape[1]} {img.shape[0]}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(img.astype(np.uint8).tobytes())


def read_pgm(path) -> tuple[np.ndarray, dict]:
    """Read an 8-bit binary PGM. Returns ``(rows x cols image, comments)``."""
    data = Path(path).read_bytes()
    tokens, comments = [], {}
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise PGMError(f"{path}: truncated header")
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            m = re.match(r"#\s*(\w+)\s*[=:]\s*(.*)", data[pos:end].decode("ascii", "replace"))
            if m:
                comments[m.group(1)] = m.group(2).strip()
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise PGMError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise PGMError(f"{path}: malformed header") from None
    if maxval > 255:
        raise PGMError(f"{path}: only 8-bit PGM supported")
    pos += 1
    body = data[pos:pos + w * h]
    if len(body) != w * h:
        raise PGMError(f"{path}: expected {w * h} pixel bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy(), comments


def read_label_image(path) -> tuple[np.ndarray, float | None]:
    """Label PGM plus its timestamp (``# stamp=`` comment or numeric file stem)."""
    img, comments = read_pgm(path)
    bad = (img >= NUM_CLASSES) & (img != UNLABELED)
    if bad.any():
        raise PGMError(f"{path}: pixel values must be 0-{NUM_CLASSES - 1} or {UNLABELED}")
    stamp = comments.get("stamp")
    if stamp is None:
        try:
            stamp = float(Path(path).stem)
        except ValueError:
            stamp = None
    return img, None if stamp is None else float(stamp)
