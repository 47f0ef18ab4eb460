"""Fan-beam acquisition geometry and the center-of-rotation offset convention.

Frame conventions
-----------------
The object frame has the rotation center at the origin. At rotation angle
``theta`` the unit vector pointing from the source towards the detector is
``e_n = (cos theta, sin theta)`` and the detector axis is
``e_d = (-sin theta, cos theta)``. The midline (source to detector point D,
perpendicular to the detector) is displaced by ``-c * image_pixel_size``
along ``e_d``, so a positive offset ``c`` places the rotation center at
``+c`` object pixels along the detector direction as seen from the midline.

The image grid is axis aligned and centered on the rotation center. Pixel
``(row, col)`` has its center at ``x = (col - (N-1)/2) * p`` and
``y = ((N-1)/2 - row) * p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "GeometryError",
    "GeometrySpec",
    "Ray",
    "validate",
    "check",
    "check_offset",
    "ray_for",
    "rays",
    "magnification",
    "detector_shift_of_center",
    "center_offset_from_detector_shift",
    "detector_coordinates",
    "full_circle_angles",
    "restrict_angles",
    "angular_span",
]

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised when a geometry or offset violates its invariants."""


@dataclass(frozen=True)
class GeometrySpec:
    """Fan-beam scan description.

    Lengths are in millimetres, angles in radians.
    """

    source_to_center: float
    center_to_detector: float
    n_detector: int
    detector_pixel_size: float
    angles: np.ndarray
    image_size: int
    image_pixel_size: float
    n_angles: int = field(default=-1)

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "angles", angles)
        if self.n_angles == -1:
            object.__setattr__(self, "n_angles", int(angles.size))

    @property
    def source_to_detector(self) -> float:
        return self.source_to_center + self.center_to_detector

    @property
    def n_pixels(self) -> int:
        return self.image_size * self.image_size

    @property
    def n_measurements(self) -> int:
        return self.n_angles * self.n_detector

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_size, self.image_size)

    @property
    def sinogram_shape(self) -> tuple[int, int]:
        return (self.n_angles, self.n_detector)

    def with_angles(self, angles) -> "GeometrySpec":
        angles = np.asarray(angles, dtype=np.float64)
        return replace(self, angles=angles, n_angles=int(angles.size))

    def with_image_size(self, image_size: int, image_pixel_size: float | None = None) -> "GeometrySpec":
        if image_pixel_size is None:
            image_pixel_size = self.image_pixel_size
        return replace(self, image_size=int(image_size), image_pixel_size=float(image_pixel_size))

    def __eq__(self, other):
        if not isinstance(other, GeometrySpec):
            return NotImplemented
        return (
            self.source_to_center == other.source_to_center
            and self.center_to_detector == other.center_to_detector
            and self.n_detector == other.n_detector
            and self.detector_pixel_size == other.detector_pixel_size
            and self.image_size == other.image_size
            and self.image_pixel_size == other.image_pixel_size
            and self.n_angles == other.n_angles
            and np.array_equal(self.angles, other.angles)
        )

    __hash__ = None


@dataclass(frozen=True)
class Ray:
    source_point: np.ndarray
    detector_point: np.ndarray


def _positive(value) -> bool:
    try:
        return math.isfinite(value) and value > 0
    except TypeError:
        return False


def validate(geom: GeometrySpec) -> list[str]:
    """Return the list of violated invariants; an empty list means valid."""
    errors = []
    for name in ("source_to_center", "center_to_detector", "detector_pixel_size", "image_pixel_size"):
        if not _positive(getattr(geom, name)):
            errors.append(f"{name} > 0 violated")
    for name in ("n_detector", "n_angles", "image_size"):
        value = getattr(geom, name)
        if not isinstance(value, (int, np.integer)) or value < 1:
            errors.append(f"{name} ≥ 1 violated")
    angles = geom.angles
    if angles.size != geom.n_angles:
        errors.append("n_angles matches len(angles) violated")
    if angles.size:
        if not np.all(np.isfinite(angles)):
            errors.append("angles finite violated")
        else:
            wrapped = np.sort(np.mod(angles, TWO_PI))
            gaps = np.diff(np.concatenate([wrapped, wrapped[:1] + TWO_PI]))
            if wrapped.size > 1 and gaps.min() <= 1e-12:
                errors.append("angles distinct violated")
            if angles.size > 1 and not np.all(np.diff(angles) > 0):
                errors.append("angles strictly increasing violated")
    return errors


def check(geom: GeometrySpec) -> GeometrySpec:
    """Raise `GeometryError` listing every violated invariant."""
    errors = validate(geom)
    if errors:
        raise GeometryError("; ".join(errors))
    return geom


def check_offset(geom: GeometrySpec, c: float) -> float:
    c = float(c)
    if not math.isfinite(c):
        raise GeometryError(f"offset c must be finite, got {c}")
    if abs(c) >= geom.image_size / 2:
        raise GeometryError(f"|c| < image_size/2 violated: c={c}, image_size={geom.image_size}")
    return c


def magnification(geom: GeometrySpec) -> float:
    return geom.source_to_detector / geom.source_to_center


def detector_coordinates(geom: GeometrySpec) -> np.ndarray:
    """Signed positions (mm) of detector pixel centers relative to point D."""
    j = np.arange(geom.n_detector, dtype=np.float64)
    return (j - (geom.n_detector - 1) / 2.0) * geom.detector_pixel_size


def detector_shift_of_center(geom: GeometrySpec, c: float) -> float:
    """Detector-pixel displacement at which the rotation center is imaged."""
    return c * geom.image_pixel_size * magnification(geom) / geom.detector_pixel_size


def center_offset_from_detector_shift(geom: GeometrySpec, shift: float) -> float:
    return shift * geom.detector_pixel_size / (geom.image_pixel_size * magnification(geom))


def _endpoints(geom: GeometrySpec, theta, u, c):
    # theta, u broadcast together; returns (sx, sy, dx, dy)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    lateral = -c * geom.image_pixel_size
    sx = -geom.source_to_center * cos_t - lateral * sin_t
    sy = -geom.source_to_center * sin_t + lateral * cos_t
    lat_d = lateral + u
    dx = geom.center_to_detector * cos_t - lat_d * sin_t
    dy = geom.center_to_detector * sin_t + lat_d * cos_t
    return sx, sy, dx, dy


def ray_for(geom: GeometrySpec, angle_index: int, detector_index: int, c: float) -> Ray:
    """Source and detector-pixel-center positions for one measurement."""
    if not 0 <= angle_index < geom.n_angles:
        raise IndexError(f"angle_index {angle_index} out of range [0, {geom.n_angles})")
    if not 0 <= detector_index < geom.n_detector:
        raise IndexError(f"detector_index {detector_index} out of range [0, {geom.n_detector})")
    check_offset(geom, c)
    u = detector_coordinates(geom)[detector_index]
    sx, sy, dx, dy = _endpoints(geom, geom.angles[angle_index], u, c)
    return Ray(np.array([sx, sy]), np.array([dx, dy]))


def rays(geom: GeometrySpec, c: float) -> tuple[np.ndarray, np.ndarray]:
    """All ray endpoints at once.

    Returns
    -------
    sources : (n_angles, 2) array
    detectors : (n_angles, n_detector, 2) array
    """
    theta = geom.angles[:, None]
    u = detector_coordinates(geom)[None, :]
    sx, sy, dx, dy = _endpoints(geom, theta, u, c)
    sources = np.stack([sx[:, 0], sy[:, 0]], axis=-1)
    detectors = np.stack([dx, dy], axis=-1)
    return sources, detectors


def full_circle_angles(n_angles: int, angular_range_deg: float = 360.0) -> np.ndarray:
    """Equally spaced angles covering ``[0, range)`` for a full scan of `n_angles`."""
    return np.arange(n_angles, dtype=np.float64) * (np.deg2rad(angular_range_deg) / n_angles)


def restrict_angles(angles: np.ndarray, max_deg: float, tol_deg: float = 1e-9) -> np.ndarray:
    """Indices of angles lying in the closed interval ``[0, max_deg]`` degrees."""
    deg = np.rad2deg(np.mod(angles, TWO_PI))
    return np.flatnonzero(deg <= max_deg + tol_deg)


def angular_span(angles: np.ndarray) -> float:
    """Angular coverage (radians) of a scan, counting one sampling step at the end."""
    if angles.size < 2:
        return 0.0
    wrapped = np.sort(np.mod(angles, TWO_PI))
    gaps = np.diff(np.concatenate([wrapped, wrapped[:1] + TWO_PI]))
    # the largest gap is the uncovered part of the circle, less one nominal step
    step = float(np.median(gaps))
    return float(min(TWO_PI, TWO_PI - gaps.max() + step))
