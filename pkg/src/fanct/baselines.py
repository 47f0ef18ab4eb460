"""Sinogram-only center-of-rotation estimators: center of mass and cross-correlation.

Both rely on the symmetry of a full-rotation scan. On a partial scan they still
return an estimate but set ``warning=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometrySpec, angular_span, center_offset_from_detector_shift

__all__ = ["BaselineEstimate", "BaselineError", "com_offset", "xcorr_offset", "mirror_lag", "is_full_rotation"]


class BaselineError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineEstimate:
    c_hat: float
    detector_shift: float
    method: str
    warning: bool = False

    def line(self) -> str:
        """Machine-readable one-line form."""
        return (f"method={self.method} c_hat={self.c_hat:.17g} "
                f"detector_shift={self.detector_shift:.17g} warning={str(self.warning).lower()}")


def is_full_rotation(geom: GeometrySpec, tol_deg: float = 1.0) -> bool:
    return angular_span(geom.angles) >= 2 * math.pi - math.radians(tol_deg)


def _check(b, geom):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != geom.sinogram_shape:
        raise BaselineError(f"sinogram shape {b.shape} != {geom.sinogram_shape}")
    if not np.any(b):
        raise BaselineError("all-zero sinogram: offset undefined")
    return b


def com_offset(b, geom: GeometrySpec) -> BaselineEstimate:
    """Average over angles of the per-projection intensity centroid."""
    b = _check(b, geom)
    pos = np.arange(geom.n_detector) - (geom.n_detector - 1) / 2.0
    mass = b.sum(axis=1)
    valid = mass != 0
    if not np.any(valid):
        raise BaselineError("no projection with nonzero mass")
    centroids = (b[valid] @ pos) / mass[valid]
    shift = float(centroids.mean())
    return BaselineEstimate(center_offset_from_detector_shift(geom, shift), shift, "com",
                            not is_full_rotation(geom))


def mirror_lag(profile) -> float:
    """Sub-pixel lag maximizing the correlation of `profile` with its reversal.

    A profile symmetric about the detector midpoint displaced by ``s`` pixels
    gives a lag of ``2 s``.
    """
    p = np.asarray(profile, dtype=np.float64)
    n = p.size
    corr = np.correlate(p, p[::-1], mode="full")
    k = int(np.argmax(corr))
    if k == 0 or k == corr.size - 1:
        raise BaselineError("correlation peak at the boundary; shift out of measurable range")
    y0, y1, y2 = corr[k - 1], corr[k], corr[k + 1]
    denom = y0 - 2.0 * y1 + y2
    frac = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    return float(k - (n - 1) + frac)


def xcorr_offset(b, geom: GeometrySpec) -> BaselineEstimate:
    """Mirror correlation of the angle-summed projection profile."""
    b = _check(b, geom)
    shift = 0.5 * mirror_lag(b.sum(axis=0))
    return BaselineEstimate(center_offset_from_detector_shift(geom, shift), shift, "xcorr",
                            not is_full_rotation(geom))
