"""Per-cell terrain geometry and the geometric traversability score.

Each cell is abstracted to one point (cell center x, y and mean height z).
Surface normals come from PCA over a small neighborhood; step height looks
at a wider window. Both window sizes derive from the machine's track width
and the step-scan span, rounded to the nearest odd cell count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gridmap import WindowedView

# eigenvalue gap below which the smallest eigenvector is ill-defined
EIGEN_TIE_TOL = 1e-12


class InsufficientData(ValueError):
    """Raised when a cell lacks enough populated neighbors for an estimate."""


@dataclass(frozen=True)
class MachineSpec:
    max_climb_deg: float = 35.0
    safe_climb_deg: float = 10.0
    track_width: float = 0.6
    track_separation: float = 2.75
    slope_margin_deg: float = 5.0
    step_span: float = 1.4

    def __post_init__(self):
        if not 0 < self.safe_climb_deg < self.max_climb_deg < 90:
            raise ValueError("need 0 < safe_climb_deg < max_climb_deg < 90, got "
                             f"{self.safe_climb_deg}, {self.max_climb_deg}")
        if not self.track_width > 0:
            raise ValueError("track_width must be positive")
        if not self.track_separation > self.track_width:
            raise ValueError("track_separation must exceed track_width")
        if self.slope_margin_deg < 0 or self.step_span <= 0:
            raise ValueError("slope_margin_deg must be >= 0 and step_span > 0")


@dataclass(frozen=True)
class GeoThresholds:
    s_cri: float
    s_safe: float
    h_cri: float
    h_safe: float
    alpha1: float = 0.5
    alpha2: float = 0.5

    def __post_init__(self):
        vals = (self.s_cri, self.s_safe, self.h_cri, self.h_safe, self.alpha1, self.alpha2)
        if not all(v > 0 for v in vals):
            raise ValueError(f"thresholds and weights must be positive: {vals}")
        if not self.s_safe < self.s_cri:
            raise ValueError(f"s_safe ({self.s_safe}) must be below s_cri ({self.s_cri})")
        if not self.h_safe < self.h_cri:
            raise ValueError(f"h_safe ({self.h_safe}) must be below h_cri ({self.h_cri})")
        if abs(self.alpha1 + self.alpha2 - 1.0) > 1e-9:
            raise ValueError("alpha1 + alpha2 must equal 1")


@dataclass(frozen=True)
class NormalEstimate:
    normal: tuple[float, float, float]
    eigenvalues: tuple[float, float, float]
    neighbor_count: int
    centroid: tuple[float, float, float] = (0.0, 0.0, 0.0)


def odd_window(length: float, resolution: float) -> int:
    """Nearest odd cell count covering ``length`` meters (at least 3)."""
    n = round(length / resolution, 9)  # 0.6 / 0.2 must count as 3, not 2.999...
    k = 2 * math.floor(n / 2) + 1
    # ties (an even cell count) go to the larger window so it covers ``length``
    if abs(n - (k + 2)) <= abs(n - k):
        k += 2
    return max(3, k)


@dataclass(frozen=True)
class Neighborhoods:
    normal: int = 3
    step: int = 7

    @classmethod
    def for_machine(cls, machine: MachineSpec, resolution: float) -> "Neighborhoods":
        return cls(odd_window(machine.track_width, resolution),
                   odd_window(machine.step_span, resolution))


def derive_thresholds(machine: MachineSpec, d_res: float) -> GeoThresholds:
    """Critical and safe slope/step thresholds from the machine limits.

    The critical step is the rise of the critical slope over three cells.
    """
    if not d_res > 0:
        raise ValueError("d_res must be positive")
    s_cri = machine.max_climb_deg - machine.slope_margin_deg
    s_safe = machine.safe_climb_deg
    if not 0 < s_safe < s_cri:
        raise ValueError(f"safe climb {s_safe} deg is not below critical slope {s_cri} deg")
    h_cri = 3 * math.tan(math.radians(s_cri)) * d_res
    h_safe = 3 * math.tan(math.radians(s_safe)) * d_res
    return GeoThresholds(s_cri, s_safe, h_cri, h_safe, 0.5, 0.5)


def geometric_traversability(s: float, h: float, th: GeoThresholds) -> float:
    if s > th.s_cri or h > th.h_cri:
        return 0.0
    if s < th.s_safe and h < th.h_safe:
        return 1.0
    return max(1.0 - (th.alpha1 * s / th.s_cri + th.alpha2 * h / th.h_cri), 0.0)


def geometric_traversability_grid(s: np.ndarray, h: np.ndarray, th: GeoThresholds) -> np.ndarray:
    """Vectorized T_geo; NaN wherever slope or step is absent."""
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    with np.errstate(invalid="ignore"):
        cont = np.maximum(1.0 - (th.alpha1 * s / th.s_cri + th.alpha2 * h / th.h_cri), 0.0)
        out = np.where((s < th.s_safe) & (h < th.h_safe), 1.0, cont)
        out = np.where((s > th.s_cri) | (h > th.h_cri), 0.0, out)
    out[np.isnan(s) | np.isnan(h)] = np.nan
    return out


def slope_of(normal) -> float:
    """Angle in degrees between a normal and the world up axis."""
    nz = float(normal[2])
    if not 0.0 <= nz <= 1.0 + 1e-12:
        raise ValueError(f"normal z component must lie in [0, 1], got {nz}")
    return math.degrees(math.acos(min(nz, 1.0)))


# --- closed-form eigen decomposition of symmetric 3x3 matrices ---------------

def sym3_eigenvalues(a00, a01, a02, a11, a12, a22):
    """Ascending eigenvalues of symmetric 3x3 matrices (trigonometric method).

    Arguments are broadcastable arrays of the six unique entries.
    """
    p1 = a01 ** 2 + a02 ** 2 + a12 ** 2
    q = (a00 + a11 + a22) / 3.0
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv_p = np.where(p > 0, 1.0 / p, 0.0)
    b00, b11, b22 = (a00 - q) * inv_p, (a11 - q) * inv_p, (a22 - q) * inv_p
    b01, b02, b12 = a01 * inv_p, a02 * inv_p, a12 * inv_p
    det_b = (b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02)
             + b02 * (b01 * b12 - b11 * b02))
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam_max = q + 2.0 * p * np.cos(phi)
    lam_min = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    # phi in [0, pi/3] already orders the roots; the clip only absorbs rounding
    lam_mid = np.clip(3.0 * q - lam_max - lam_min, lam_min, lam_max)
    return np.stack([lam_min, lam_mid, lam_max], axis=-1)


def sym3_null_vector(a00, a01, a02, a11, a12, a22, lam):
    """Unit eigenvector for eigenvalue ``lam`` via cross products of rows of A - lam*I."""
    d0, d1, d2 = a00 - lam, a11 - lam, a22 - lam
    # rows r0 = (d0, a01, a02), r1 = (a01, d1, a12), r2 = (a02, a12, d2)
    c01 = (a01 * a12 - a02 * d1, a02 * a01 - d0 * a12, d0 * d1 - a01 * a01)
    c02 = (a01 * d2 - a02 * a12, a02 * a02 - d0 * d2, d0 * a12 - a01 * a02)
    c12 = (d1 * d2 - a12 * a12, a12 * a02 - a01 * d2, a01 * a12 - d1 * a02)
    n01 = c01[0] ** 2 + c01[1] ** 2 + c01[2] ** 2
    n02 = c02[0] ** 2 + c02[1] ** 2 + c02[2] ** 2
    n12 = c12[0] ** 2 + c12[1] ** 2 + c12[2] ** 2
    use02 = n02 > n01
    best = np.where(use02, n02, n01)
    v = [np.where(use02, b, a) for a, b in zip(c01, c02)]
    use12 = n12 > best
    best = np.where(use12, n12, best)
    v = [np.where(use12, b, a) for a, b in zip(v, c12)]
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = 1.0 / np.sqrt(best)
        return np.stack([v[0] * inv, v[1] * inv, v[2] * inv], axis=-1)


# --- single-cell operations ----------------------------------------------------

def _neighborhood_points(view: WindowedView, ij, k: int) -> np.ndarray:
    i, j = ij
    r = k // 2
    spec = view.spec
    pts = []
    for a in range(i - r, i + r + 1):
        for b in range(j - r, j + r + 1):
            z = view.height(a, b)
            if z is not None:
                pts.append(((a - i) * spec.resolution, (b - j) * spec.resolution, z))
    return np.array(pts, dtype=float).reshape(-1, 3)


def estimate_normal(view: WindowedView, ij, k: int = 3) -> NormalEstimate:
    """PCA surface normal of cell ``ij`` over its ``k x k`` neighborhood.

    Positions are taken relative to the query cell center so the covariance
    stays well conditioned far from the map origin.
    """
    pts = _neighborhood_points(view, ij, k)
    if len(pts) < 3:
        raise InsufficientData(f"cell {tuple(ij)} has {len(pts)} populated neighbors")
    centroid = pts.mean(axis=0)
    d = pts - centroid
    C = d.T @ d / len(pts)
    args = (C[0, 0], C[0, 1], C[0, 2], C[1, 1], C[1, 2], C[2, 2])
    lam = sym3_eigenvalues(*args)
    if lam[1] - lam[0] < EIGEN_TIE_TOL:
        raise InsufficientData(f"cell {tuple(ij)} neighborhood is degenerate")
    n = sym3_null_vector(*args, lam[0])
    if n[2] < 0:
        n = -n
    x0, y0 = view.spec.cell_center(ij[0], ij[1])
    c = (float(centroid[0] + x0), float(centroid[1] + y0), float(centroid[2]))
    return NormalEstimate(tuple(float(v) for v in n), tuple(float(v) for v in lam), len(pts), c)


def step_height(view: WindowedView, ij, k: int = 7) -> float:
    """Largest absolute height difference between a cell and its k x k window."""
    zc = view.height(*ij)
    if zc is None:
        raise InsufficientData(f"cell {tuple(ij)} is absent")
    i, j = ij
    r = k // 2
    diffs = [abs(zc - z) for a in range(i - r, i + r + 1) for b in range(j - r, j + r + 1)
             if (a, b) != (i, j) and (z := view.height(a, b)) is not None]
    if not diffs:
        raise InsufficientData(f"cell {tuple(ij)} has no populated neighbor")
    return max(diffs)


def roughness(view: WindowedView, ij, k: int = 3, estimate: NormalEstimate | None = None) -> float:
    """Root of summed squared distances of neighborhood points to the fitted plane."""
    est = estimate if estimate is not None else estimate_normal(view, ij, k)
    pts = _neighborhood_points(view, ij, k)
    x0, y0 = view.spec.cell_center(ij[0], ij[1])
    centroid = np.array(est.centroid) - (x0, y0, 0.0)
    n = np.array(est.normal)
    d = (pts - centroid) @ n / np.linalg.norm(n)
    return float(np.sqrt(np.sum(d * d)))


# --- whole-grid evaluation --------------------------------------------------------

def _shifted(padded: np.ndarray, r: int, di: int, dj: int, shape) -> np.ndarray:
    W, H = shape
    return padded[r + di:r + di + W, r + dj:r + dj + H]


@dataclass
class GeometryLayers:
    normal: np.ndarray      # (W, H, 3), NaN where insufficient
    eigenvalues: np.ndarray  # (W, H, 3)
    count: np.ndarray       # populated cells in the normal window
    slope: np.ndarray
    step: np.ndarray
    roughness: np.ndarray


def compute_geometry(view: WindowedView, hoods: Neighborhoods = Neighborhoods(),
                     cells: np.ndarray | None = None) -> GeometryLayers:
    """Normal, slope, step height and roughness for every present cell of ``view``.

    ``cells`` optionally restricts evaluation to a boolean mask. Results
    match the single-cell functions; absent outputs are NaN.
    """
    z = view.heights
    shape = z.shape
    res = view.spec.resolution
    target = view.present if cells is None else (view.present & cells)

    r = hoods.normal // 2
    present = ~np.isnan(z)
    o = present.astype(float)
    # heights relative to a global reference keep the raw moments well conditioned
    zref = float(z[present].mean()) if present.any() else 0.0
    zo = np.where(present, z - zref, 0.0)
    d = np.arange(-r, r + 1) * res
    ones, d2 = np.ones_like(d), d * d

    def c1(a, w, axis):
        return ndimage.correlate1d(a, w, axis=axis, mode="constant", cval=0.0)

    # separable window sums: weights along axis 1 first, then axis 0
    o_1, o_y, o_yy = c1(o, ones, 1), c1(o, d, 1), c1(o, d2, 1)
    z_1, z_y = c1(zo, ones, 1), c1(zo, d, 1)
    n = c1(o_1, ones, 0)
    sx, sy, sz = c1(o_1, d, 0), c1(o_y, ones, 0), c1(z_1, ones, 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mx, my, mz = sx / n, sy / n, sz / n
    # scatter sums about the neighborhood centroid
    cxx = c1(o_1, d2, 0) - sx * mx
    cyy = c1(o_yy, ones, 0) - sy * my
    cxy = c1(o_y, d, 0) - sx * my
    cxz = c1(z_1, d, 0) - sx * mz
    cyz = c1(z_y, ones, 0) - sy * mz
    czz = c1(c1(zo * zo, ones, 1), ones, 0) - sz * mz
    valid = target & (n >= 3)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv_n = np.where(valid, 1.0 / n, np.nan)
        args = tuple(c * inv_n for c in (cxx, cxy, cxz, cyy, cyz, czz))
        eig = sym3_eigenvalues(*args)
        normal = sym3_null_vector(*args, eig[..., 0])
    normal *= np.where(normal[..., 2:3] < 0, -1.0, 1.0)
    bad = ~((eig[..., 1] - eig[..., 0]) >= EIGEN_TIE_TOL)
    normal[bad] = np.nan
    eig[bad] = np.nan
    nz = np.clip(normal[..., 2], 0.0, 1.0)
    slope = np.degrees(np.arccos(nz))
    rough = np.zeros(shape)
    nx_, ny_, nz_ = normal[..., 0], normal[..., 1], normal[..., 2]
    c = nx_ * mx + ny_ * my + nz_ * (mz + zref)
    zp = np.pad(z, r, constant_values=np.nan)
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            zs = _shifted(zp, r, di, dj, shape)
            dist = nz_ * zs + (nx_ * (di * res) + ny_ * (dj * res) - c)
            dist *= dist
            rough += np.where(np.isnan(dist), 0.0, dist)
    rough = np.sqrt(rough)
    rough[np.isnan(eig[..., 0])] = np.nan

    # square windows are separable; including the center cannot change the
    # max |dz| because it contributes 0
    k = hoods.step
    zmax = ndimage.maximum_filter(np.where(present, z, -np.inf), size=k,
                                  mode="constant", cval=-np.inf)
    zmin = ndimage.minimum_filter(np.where(present, z, np.inf), size=k,
                                  mode="constant", cval=np.inf)
    others = ndimage.uniform_filter(o, size=k, mode="constant") * (k * k) > 1.5
    with np.errstate(invalid="ignore"):
        step = np.maximum(zmax - z, z - zmin)
    step[~(target & others)] = np.nan
    return GeometryLayers(normal, eig, n.astype(np.int64), slope, step, rough)
