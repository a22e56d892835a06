"""Pinhole camera model, planar calibration, and physical measurement.

World points are projected through x = K [R | t] X: the intrinsic matrix K
(focal lengths, skew, principal point) composed with the rigid transform
placing the world in the camera frame.  Measurements assume the defect lies
on a locally planar surface, so pixel metrics convert to millimetres through
a single mm-per-pixel scale obtained either by proportioning a reference
object or from the pinhole relation distance/focal-length.

All math is double precision; the 3x3 inversions are explicit closed forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import EmptyMask, NonPositiveInput
from .segmenter import MaskMetrics

MM_PER_INCH = 25.4
MM_PER_FOOT = 304.8


class BehindCamera(Exception):
    """World point has non-positive depth in the camera frame."""


class RayParallelToPlane(Exception):
    """The viewing ray cannot intersect the measurement plane."""


class BadCalibration(Exception):
    """A calibration document is malformed or inconsistent."""


@dataclass(frozen=True)
class Intrinsics:
    """Camera intrinsics: focal lengths and skew in pixels, principal point."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.fx, self.skew, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def inverse_matrix(self) -> np.ndarray:
        # closed form for the upper-triangular intrinsic matrix
        fx, fy, s, cx, cy = self.fx, self.fy, self.skew, self.cx, self.cy
        return np.array(
            [
                [1.0 / fx, -s / (fx * fy), (s * cy - cx * fy) / (fx * fy)],
                [0.0, 1.0 / fy, -cy / fy],
                [0.0, 0.0, 1.0],
            ]
        )


_ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class Extrinsics:
    """Rigid transform from world to camera frame: rotation R, translation t (mm)."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not np.allclose(r.T @ r, np.eye(3), atol=_ROTATION_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(float(np.linalg.det(r)) - 1.0) > _ROTATION_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        r.setflags(write=False)
        t.setflags(write=False)

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class CameraModel:
    intrinsics: Intrinsics
    extrinsics: Extrinsics

    @property
    def projection_matrix(self) -> np.ndarray:
        rt = np.hstack(
            [self.extrinsics.rotation, self.extrinsics.translation.reshape(3, 1)]
        )
        return self.intrinsics.matrix @ rt

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (mm)."""
        r, t = self.extrinsics.rotation, self.extrinsics.translation
        return -(r.T @ t)


def project(camera: CameraModel, point: np.ndarray) -> tuple[float, float]:
    """Project a world point (3-vector, mm) to pixel coordinates (u, v).

    Raises BehindCamera when the point's camera-frame depth is <= 0.
    """
    x = np.asarray(point, dtype=np.float64)
    if x.shape != (3,):
        raise ValueError("world point must be a 3-vector")
    cam = camera.extrinsics.rotation @ x + camera.extrinsics.translation
    w = cam[2]
    if w <= 0.0:
        raise BehindCamera(f"point depth {w} <= 0")
    uvw = camera.intrinsics.matrix @ cam
    return float(uvw[0] / w), float(uvw[1] / w)


def back_project_to_plane(
    camera: CameraModel,
    pixel: tuple[float, float],
    plane_point: np.ndarray,
    plane_normal: np.ndarray,
) -> np.ndarray:
    """Intersect the viewing ray through ``pixel`` with a world plane (mm).

    The plane is given by a point on it and its normal.  Raises
    RayParallelToPlane when the ray direction is orthogonal to the normal.
    """
    u, v = pixel
    p0 = np.asarray(plane_point, dtype=np.float64)
    n = np.asarray(plane_normal, dtype=np.float64)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise ValueError("plane normal must be non-zero")
    n = n / norm

    r = camera.extrinsics.rotation
    origin = camera.center
    direction = r.T @ (camera.intrinsics.inverse_matrix @ np.array([u, v, 1.0]))
    direction = direction / np.linalg.norm(direction)

    denom = float(direction @ n)
    if abs(denom) <= 1e-12:
        raise RayParallelToPlane(f"|ray . normal| = {abs(denom)}")
    s = float((p0 - origin) @ n) / denom
    return origin + s * direction


@dataclass(frozen=True)
class PlanarScale:
    """Planar mm-per-pixel conversion factor and how it was obtained."""

    mm_per_pixel: float
    source: str  # "ReferenceObject" | "PinholeDistance"

    def __post_init__(self):
        if not (self.mm_per_pixel > 0 and math.isfinite(self.mm_per_pixel)):
            raise ValueError(f"mm_per_pixel {self.mm_per_pixel} must be positive finite")
        if self.source not in ("ReferenceObject", "PinholeDistance"):
            raise ValueError(f"unknown scale source {self.source!r}")


def scale_from_reference(reference_length_mm: float, reference_span_px: float) -> PlanarScale:
    """Proportion a known real-world dimension to its span in pixels."""
    if reference_length_mm <= 0 or reference_span_px <= 0:
        raise NonPositiveInput("reference length and span must be positive")
    return PlanarScale(reference_length_mm / reference_span_px, "ReferenceObject")


def scale_from_pinhole(camera: CameraModel, surface_distance_mm: float) -> PlanarScale:
    """Scale for a fronto-parallel surface at a known distance: distance / fx."""
    if surface_distance_mm <= 0:
        raise NonPositiveInput("surface distance must be positive")
    return PlanarScale(surface_distance_mm / camera.intrinsics.fx, "PinholeDistance")


@dataclass(frozen=True)
class Measurement:
    """Physical defect dimensions in millimetres.

    Cracks carry length and maximum width; spalls carry area and the
    diameter of the equal-area circle.  Depth and exposed rebar cannot be
    measured from a single image and are supplied by the inspector.
    """

    kind: str  # "Crack" | "Spall"
    length_mm: float | None = None
    max_width_mm: float | None = None
    area_mm2: float | None = None
    equivalent_diameter_mm: float | None = None
    depth_mm: float | None = None
    exposed_rebar: bool | None = None

    def __post_init__(self):
        if self.kind not in ("Crack", "Spall"):
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        for name in ("length_mm", "max_width_mm", "area_mm2", "equivalent_diameter_mm", "depth_mm"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name}={v} must be positive finite")
        if self.area_mm2 is not None and self.equivalent_diameter_mm is not None:
            expected = 2.0 * math.sqrt(self.area_mm2 / math.pi)
            if abs(self.equivalent_diameter_mm - expected) > 1e-9:
                raise ValueError("equivalent diameter inconsistent with area")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "length_mm": self.length_mm,
            "max_width_mm": self.max_width_mm,
            "area_mm2": self.area_mm2,
            "equivalent_diameter_mm": self.equivalent_diameter_mm,
            "depth_mm": self.depth_mm,
            "exposed_rebar": self.exposed_rebar,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Measurement":
        return cls(**doc)


def measure_crack(
    metrics: MaskMetrics,
    scale: PlanarScale,
    depth_mm: float | None = None,
    exposed_rebar: bool | None = None,
) -> Measurement:
    """Convert crack pixel metrics to physical length and maximum width."""
    if metrics.area == 0:
        raise EmptyMask("cannot measure an empty mask")
    s = scale.mm_per_pixel
    return Measurement(
        kind="Crack",
        length_mm=metrics.skeleton_length * s,
        max_width_mm=metrics.max_thickness * s,
        depth_mm=depth_mm,
        exposed_rebar=exposed_rebar,
    )


def measure_spall(
    metrics: MaskMetrics,
    scale: PlanarScale,
    depth_mm: float | None = None,
    exposed_rebar: bool | None = None,
) -> Measurement:
    """Convert spall pixel metrics to physical area and equivalent diameter."""
    if metrics.area == 0:
        raise EmptyMask("cannot measure an empty mask")
    s = scale.mm_per_pixel
    area = metrics.area * s * s
    return Measurement(
        kind="Spall",
        area_mm2=area,
        equivalent_diameter_mm=2.0 * math.sqrt(area / math.pi),
        depth_mm=depth_mm,
        exposed_rebar=exposed_rebar,
    )


def parse_calibration(doc: dict) -> PlanarScale:
    """Build a planar scale from a calibration document.

    Two layouts are accepted: {"mm_per_pixel": s} directly, or a full camera
    {fx, fy, skew, cx, cy, R (row-major 9), t (3, mm)} with an optional
    "surface_distance_mm" (default: the z translation) from which the
    pinhole scale is derived.
    """
    if not isinstance(doc, dict):
        raise BadCalibration("calibration must be a JSON object")
    if "mm_per_pixel" in doc:
        try:
            return PlanarScale(float(doc["mm_per_pixel"]), "ReferenceObject")
        except (TypeError, ValueError) as exc:
            raise BadCalibration(str(exc)) from exc
    required = {"fx", "fy", "cx", "cy", "R", "t"}
    if not required.issubset(doc):
        missing = sorted(required - set(doc))
        raise BadCalibration(f"calibration missing fields: {missing}")
    try:
        camera = CameraModel(
            Intrinsics(
                fx=float(doc["fx"]),
                fy=float(doc["fy"]),
                cx=float(doc["cx"]),
                cy=float(doc["cy"]),
                skew=float(doc.get("skew", 0.0)),
            ),
            Extrinsics(
                np.asarray(doc["R"], dtype=np.float64).reshape(3, 3),
                np.asarray(doc["t"], dtype=np.float64).reshape(3),
            ),
        )
        distance = float(doc.get("surface_distance_mm", camera.extrinsics.translation[2]))
        return scale_from_pinhole(camera, distance)
    except (TypeError, ValueError, NonPositiveInput) as exc:
        raise BadCalibration(str(exc)) from exc


def load_calibration(path) -> PlanarScale:
    """Read a calibration JSON file and return its planar scale."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadCalibration(f"cannot read calibration {path}: {exc}") from exc
    return parse_calibration(doc)
