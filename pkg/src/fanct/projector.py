"""Matrix-free fan-beam projector built on exact ray/pixel intersections.

Forward and back projection share one traversal routine, so the pair is an
exact adjoint up to summation roundoff.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .geometry import GeometrySpec, check_offset

__all__ = [
    "FanBeamProjector",
    "forward_project",
    "back_project",
    "operator_norm_estimate",
    "materialize",
    "MatrixProjector",
    "ShapeError",
]

# back projection accumulates into this many per-chunk images and reduces them
# in a fixed order, so results do not depend on the thread count
_N_CHUNKS = 8


class ShapeError(ValueError):
    pass


@numba.njit(cache=True, nogil=True)
def _trace_ray(sx, sy, dx, dy, n, p, idx, wts):
    """Siddon-style traversal; fills (flat index, length) pairs, returns count."""
    half = 0.5 * n * p
    lo = -half
    hi = half
    ddx = dx - sx
    ddy = dy - sy
    length = math.sqrt(ddx * ddx + ddy * ddy)

    a_min = 0.0
    a_max = 1.0
    if ddx != 0.0:
        a0 = (lo - sx) / ddx
        a1 = (hi - sx) / ddx
        a_min = max(a_min, min(a0, a1))
        a_max = min(a_max, max(a0, a1))
    elif sx <= lo or sx >= hi:
        return 0
    if ddy != 0.0:
        a0 = (lo - sy) / ddy
        a1 = (hi - sy) / ddy
        a_min = max(a_min, min(a0, a1))
        a_max = min(a_max, max(a0, a1))
    elif sy <= lo or sy >= hi:
        return 0
    if a_min >= a_max:
        return 0

    inf = np.inf
    if ddx > 0.0:
        k = math.floor((sx + a_min * ddx - lo) / p) + 1
        ax = (lo + k * p - sx) / ddx
        step_x = p / ddx
    elif ddx < 0.0:
        k = math.ceil((sx + a_min * ddx - lo) / p) - 1
        ax = (lo + k * p - sx) / ddx
        step_x = -p / ddx
    else:
        ax = inf
        step_x = inf
    if ddy > 0.0:
        k = math.floor((sy + a_min * ddy - lo) / p) + 1
        ay = (lo + k * p - sy) / ddy
        step_y = p / ddy
    elif ddy < 0.0:
        k = math.ceil((sy + a_min * ddy - lo) / p) - 1
        ay = (lo + k * p - sy) / ddy
        step_y = -p / ddy
    else:
        ay = inf
        step_y = inf

    count = 0
    a_cur = a_min
    while a_cur < a_max:
        a_next = min(ax, ay, a_max)
        if a_next > a_cur:
            a_mid = 0.5 * (a_cur + a_next)
            col = int(math.floor((sx + a_mid * ddx - lo) / p))
            row = n - 1 - int(math.floor((sy + a_mid * ddy - lo) / p))
            if col < 0:
                col = 0
            elif col >= n:
                col = n - 1
            if row < 0:
                row = 0
            elif row >= n:
                row = n - 1
            idx[count] = row * n + col
            wts[count] = (a_next - a_cur) * length
            count += 1
        if ax <= a_next:
            ax += step_x
        if ay <= a_next:
            ay += step_y
        a_cur = a_next
    return count


@numba.njit(cache=True, nogil=True)
def _ray_endpoints(theta, u, sod, odd, lateral):
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    sx = -sod * cos_t - lateral * sin_t
    sy = -sod * sin_t + lateral * cos_t
    lat_d = lateral + u
    dx = odd * cos_t - lat_d * sin_t
    dy = odd * sin_t + lat_d * cos_t
    return sx, sy, dx, dy


def _make_kernels(parallel):
    jit = numba.njit(cache=True, nogil=True, parallel=parallel)
    prange = numba.prange if parallel else range

    @jit
    def forward(img, angles, u, sod, odd, n, p, lateral, out):
        n_ang = angles.shape[0]
        n_det = u.shape[0]
        flat = img.ravel()
        for a in prange(n_ang):
            idx = np.empty(2 * n + 4, dtype=np.int64)
            wts = np.empty(2 * n + 4, dtype=np.float64)
            for j in range(n_det):
                sx, sy, dx, dy = _ray_endpoints(angles[a], u[j], sod, odd, lateral)
                cnt = _trace_ray(sx, sy, dx, dy, n, p, idx, wts)
                acc = 0.0
                for q in range(cnt):
                    acc += wts[q] * flat[idx[q]]
                out[a, j] = acc

    @jit
    def back(sino, angles, u, sod, odd, n, p, lateral, n_chunks, out):
        n_ang = angles.shape[0]
        n_det = u.shape[0]
        acc = np.zeros((n_chunks, n * n))
        for ch in prange(n_chunks):
            idx = np.empty(2 * n + 4, dtype=np.int64)
            wts = np.empty(2 * n + 4, dtype=np.float64)
            for a in range(ch, n_ang, n_chunks):
                for j in range(n_det):
                    y = sino[a, j]
                    if y == 0.0:
                        continue
                    sx, sy, dx, dy = _ray_endpoints(angles[a], u[j], sod, odd, lateral)
                    cnt = _trace_ray(sx, sy, dx, dy, n, p, idx, wts)
                    for q in range(cnt):
                        acc[ch, idx[q]] += wts[q] * y
        flat = out.ravel()
        for k in range(n * n):
            s = 0.0
            for ch in range(n_chunks):
                s += acc[ch, k]
            flat[k] = s

    return forward, back


_serial_forward, _serial_back = _make_kernels(False)
_parallel_forward, _parallel_back = _make_kernels(True)


class FanBeamProjector:
    """Forward/back projection pair ``A_c``, ``A_c^T`` for a fixed geometry.

    Keeps counters of forward and back projections performed, which the
    sampler reports as its computational cost.

    Parameters
    ----------
    geom : GeometrySpec
    parallel : bool
        Use numba threads. Results are identical to the serial mode because
        back projection reduces fixed angle chunks in a fixed order.
    """

    def __init__(self, geom: GeometrySpec, parallel: bool = False):
        self.geom = geom
        self.parallel = parallel
        j = np.arange(geom.n_detector, dtype=np.float64)
        self._u = (j - (geom.n_detector - 1) / 2.0) * geom.detector_pixel_size
        self._angles = np.ascontiguousarray(geom.angles, dtype=np.float64)
        self.n_forward = 0
        self.n_back = 0

    def reset_counters(self):
        self.n_forward = 0
        self.n_back = 0

    @property
    def cost(self) -> int:
        return self.n_forward + self.n_back

    def _lateral(self, c):
        return -check_offset(self.geom, c) * self.geom.image_pixel_size

    def forward(self, x: np.ndarray, c: float) -> np.ndarray:
        g = self.geom
        x = np.asarray(x, dtype=np.float64)
        if x.shape != g.image_shape:
            raise ShapeError(f"image shape {x.shape} does not match geometry {g.image_shape}")
        out = np.empty(g.sinogram_shape)
        kernel = _parallel_forward if self.parallel else _serial_forward
        kernel(np.ascontiguousarray(x), self._angles, self._u, float(g.source_to_center),
               float(g.center_to_detector), g.image_size, float(g.image_pixel_size),
               self._lateral(c), out)
        self.n_forward += 1
        return out

    def back(self, y: np.ndarray, c: float) -> np.ndarray:
        g = self.geom
        y = np.asarray(y, dtype=np.float64)
        if y.shape != g.sinogram_shape:
            raise ShapeError(f"sinogram shape {y.shape} does not match geometry {g.sinogram_shape}")
        out = np.empty(g.image_shape)
        kernel = _parallel_back if self.parallel else _serial_back
        n_chunks = max(1, min(_N_CHUNKS, g.n_angles))
        kernel(np.ascontiguousarray(y), self._angles, self._u, float(g.source_to_center),
               float(g.center_to_detector), g.image_size, float(g.image_pixel_size),
               self._lateral(c), n_chunks, out)
        self.n_back += 1
        return out

    def norm_squared(self, c: float, n_power_iters: int = 30, seed=0, v0=None):
        """Power-method estimate of ``||A_c||_2^2``; returns (estimate, vector)."""
        if n_power_iters < 1:
            raise ValueError("n_power_iters must be >= 1")
        if v0 is None:
            v = np.random.default_rng(seed).standard_normal(self.geom.image_shape)
        else:
            v = np.array(v0, dtype=np.float64)
        estimate = 0.0
        for _ in range(n_power_iters):
            nv = np.linalg.norm(v)
            if nv == 0.0:
                return 0.0, v
            v = v / nv
            av = self.forward(v, c)
            # Rayleigh quotient of A^T A at the normalized iterate
            estimate = float(np.vdot(av, av))
            v = self.back(av, c)
        return estimate, v


def forward_project(x, geom: GeometrySpec, c: float, parallel: bool = False) -> np.ndarray:
    return FanBeamProjector(geom, parallel).forward(x, c)


def back_project(y, geom: GeometrySpec, c: float, parallel: bool = False) -> np.ndarray:
    return FanBeamProjector(geom, parallel).back(y, c)


def operator_norm_estimate(geom: GeometrySpec, c: float, n_power_iters: int = 30, seed=0) -> float:
    """Estimate ``||A_c||_2^2`` by power iteration on ``A_c^T A_c``.

    The estimate is a Rayleigh quotient, so it never exceeds the true value
    and is nondecreasing in `n_power_iters` for a fixed seed.
    """
    return FanBeamProjector(geom).norm_squared(c, n_power_iters, seed)[0]


def materialize(geom: GeometrySpec, c: float) -> np.ndarray:
    """Dense ``(m, n)`` matrix of ``A_c``; test oracles only, grids up to 32x32."""
    if geom.image_size > 32:
        raise ValueError("materialize is limited to image_size <= 32")
    proj = FanBeamProjector(geom)
    n = geom.n_pixels
    cols = []
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        cols.append(proj.forward(e.reshape(geom.image_shape), c).ravel())
        e[k] = 0.0
    return np.stack(cols, axis=1)


class MatrixProjector:
    """Dense stand-in for `FanBeamProjector` on small grids.

    Matrices come from `materialize` and are cached per offset. Inputs may
    carry leading batch dimensions, which lets a solver advance many
    independent problems at once; a batched call counts as one projection.
    """

    def __init__(self, geom: GeometrySpec):
        self.geom = geom
        self._mats: dict[float, np.ndarray] = {}
        self.n_forward = 0
        self.n_back = 0

    def reset_counters(self):
        self.n_forward = 0
        self.n_back = 0

    @property
    def cost(self) -> int:
        return self.n_forward + self.n_back

    def matrix(self, c: float) -> np.ndarray:
        c = check_offset(self.geom, c)
        if c not in self._mats:
            self._mats[c] = materialize(self.geom, c)
        return self._mats[c]

    def forward(self, x: np.ndarray, c: float) -> np.ndarray:
        g = self.geom
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-2:] != g.image_shape:
            raise ShapeError(f"image shape {x.shape} does not match geometry {g.image_shape}")
        batch = x.shape[:-2]
        out = x.reshape(batch + (g.n_pixels,)) @ self.matrix(c).T
        self.n_forward += 1
        return out.reshape(batch + g.sinogram_shape)

    def back(self, y: np.ndarray, c: float) -> np.ndarray:
        g = self.geom
        y = np.asarray(y, dtype=np.float64)
        if y.shape[-2:] != g.sinogram_shape:
            raise ShapeError(f"sinogram shape {y.shape} does not match geometry {g.sinogram_shape}")
        batch = y.shape[:-2]
        out = y.reshape(batch + (g.n_measurements,)) @ self.matrix(c)
        self.n_back += 1
        return out.reshape(batch + g.image_shape)

    def norm_squared(self, c: float, n_power_iters: int = 30, seed=0, v0=None):
        """Exact ``||A_c||_2^2`` from the SVD, with the dominant right singular vector."""
        _, sv, vt = np.linalg.svd(self.matrix(c), full_matrices=False)
        return float(sv[0] ** 2), vt[0].reshape(self.geom.image_shape)
