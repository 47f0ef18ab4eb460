"""Synthetic phantoms and noisy sinogram simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometrySpec, check, check_offset
from .projector import FanBeamProjector, ShapeError
from .streams import stream

__all__ = [
    "Disk",
    "PhantomSpec",
    "NoiseSpec",
    "make_phantom",
    "beads_phantom_spec",
    "simulate_sinogram",
    "refine_phantom",
    "noise_precision_for_snr",
]


@dataclass(frozen=True)
class Disk:
    center_x: float  # column-index coordinate, pixels
    center_y: float  # row-index coordinate, pixels
    radius: float
    value: float


@dataclass(frozen=True)
class PhantomSpec:
    image_size: int
    disks: tuple[Disk, ...] = ()
    background: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(Disk(*d) if not isinstance(d, Disk) else d for d in self.disks))
        if self.image_size < 1:
            raise ValueError("image_size must be >= 1")
        if not math.isfinite(self.background):
            raise ValueError("background must be finite")
        for d in self.disks:
            if not d.radius > 0:
                raise ValueError(f"disk radius must be > 0, got {d.radius}")
            if not all(math.isfinite(v) for v in (d.center_x, d.center_y, d.value)):
                raise ValueError("disk parameters must be finite")


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise with precision `lambda_true`; ``enabled=False`` is the noiseless limit."""

    lambda_true: float = 1.0
    seed: int = 0
    enabled: bool = field(default=True)

    def __post_init__(self):
        if self.enabled and not (self.lambda_true > 0 and math.isfinite(self.lambda_true)):
            raise ValueError("lambda_true must be finite and > 0")


def make_phantom(spec: PhantomSpec) -> np.ndarray:
    """Rasterize disks by pixel-center membership; later disks overwrite earlier ones."""
    n = spec.image_size
    img = np.full((n, n), float(spec.background))
    rows, cols = np.mgrid[0:n, 0:n].astype(np.float64)
    for d in spec.disks:
        inside = (cols - d.center_x) ** 2 + (rows - d.center_y) ** 2 <= d.radius ** 2
        img[inside] = d.value
    return img


def beads_phantom_spec(image_size: int = 64, n_beads: int = 12, seed: int = 7,
                       container_value: float = 0.2, bead_value: float = 1.0) -> PhantomSpec:
    """A cylinder of low-absorbing material holding small high-absorbing beads.

    Bead placement is random but fixed by `seed`; beads do not overlap.
    """
    mid = (image_size - 1) / 2.0
    container_r = 0.38 * image_size
    bead_r = max(1.0, image_size / 28.0)
    rng = np.random.default_rng(seed)
    beads: list[Disk] = []
    attempts = 0
    while len(beads) < n_beads and attempts < 10000:
        attempts += 1
        rad = (container_r - 1.5 * bead_r) * math.sqrt(rng.random())
        ang = 2 * math.pi * rng.random()
        bx, by = mid + rad * math.cos(ang), mid + rad * math.sin(ang)
        if all((bx - b.center_x) ** 2 + (by - b.center_y) ** 2 > (2.5 * bead_r) ** 2 for b in beads):
            beads.append(Disk(bx, by, bead_r, bead_value))
    disks = (Disk(mid, mid, container_r, container_value), *beads)
    return PhantomSpec(image_size, disks, 0.0)


def _refine(x: np.ndarray, factor: int) -> np.ndarray:
    return np.kron(x, np.ones((factor, factor)))


def refine_phantom(spec: PhantomSpec, factor: int) -> PhantomSpec:
    """The same disks described on a grid `factor` times finer."""
    shift = (factor - 1) / 2.0
    disks = tuple(Disk(factor * d.center_x + shift, factor * d.center_y + shift, factor * d.radius, d.value)
                  for d in spec.disks)
    return PhantomSpec(spec.image_size * factor, disks, spec.background)


def simulate_sinogram(x, geom: GeometrySpec, c_true: float, noise: NoiseSpec,
                      supersample: int = 1, parallel: bool = False) -> np.ndarray:
    """Forward project at offset `c_true` on a refined grid and add Gaussian noise.

    `x` is either an image or a `PhantomSpec`. An image is refined by
    splitting each pixel into ``supersample**2`` sub-pixels of equal value;
    since that describes the same piecewise-constant function, exact line
    integrals change only by roundoff. A `PhantomSpec` is rasterized directly
    on the refined grid, so the data are not generated by the discretization
    that reconstruction inverts.
    """
    check(geom)
    check_offset(geom, c_true)
    supersample = int(supersample)
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    if isinstance(x, PhantomSpec):
        if x.image_size != geom.image_size:
            raise ShapeError(f"phantom size {x.image_size} does not match geometry {geom.image_size}")
        fine_img = make_phantom(refine_phantom(x, supersample))
    else:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != geom.image_shape:
            raise ShapeError(f"image shape {x.shape} does not match geometry {geom.image_shape}")
        fine_img = _refine(x, supersample) if supersample > 1 else x
    if supersample == 1:
        clean = FanBeamProjector(geom, parallel).forward(fine_img, c_true)
    else:
        fine = geom.with_image_size(geom.image_size * supersample, geom.image_pixel_size / supersample)
        clean = FanBeamProjector(fine, parallel).forward(fine_img, c_true * supersample)
    if not noise.enabled:
        return clean
    rng = stream(noise.seed, "noise")
    return clean + rng.standard_normal(clean.shape) / math.sqrt(noise.lambda_true)


def noise_precision_for_snr(clean_sinogram: np.ndarray, relative_sigma: float) -> float:
    """Precision giving a noise standard deviation of `relative_sigma` times the sinogram maximum."""
    sigma = relative_sigma * float(np.max(np.abs(clean_sinogram)))
    return 1.0 / sigma ** 2
