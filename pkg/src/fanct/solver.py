"""FISTA for Tikhonov-regularized least squares, optionally with x >= 0.

Minimizes the smooth quadratic

    f(x) = lam/2 * ||A_c x - b_tilde||^2 + delta/2 * ||x - xi_tilde||^2

with a fixed number of iterations. The same routine yields MAP
reconstructions (no perturbation) and randomize-then-optimize samples
(perturbed data and prior shift).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometrySpec, check_offset
from .projector import FanBeamProjector

__all__ = [
    "QuadraticObjective",
    "FistaConfig",
    "SolverError",
    "fista_solve",
    "fista_run",
    "map_reconstruct",
    "lipschitz_constant",
    "objective_value",
    "gradient",
    "SAFETY_FACTOR",
]

SAFETY_FACTOR = 1.01


class SolverError(RuntimeError):
    """FISTA produced non-finite values, usually a step size that is too large."""


@dataclass
class QuadraticObjective:
    """Data and weights of one regularized least-squares problem.

    ``xi_tilde=None`` means a zero prior shift. The prior precision is the
    identity. `b_tilde` (and `xi_tilde`) may carry one leading batch axis to
    pose several independent problems at once; this needs a projector that
    accepts batched inputs, such as `MatrixProjector`.
    """

    geom: GeometrySpec
    c: float
    b_tilde: np.ndarray
    lam: float
    delta: float
    xi_tilde: np.ndarray | None = None
    nonneg: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        check_offset(self.geom, self.c)
        self.b_tilde = np.asarray(self.b_tilde, dtype=np.float64)
        if self.b_tilde.ndim not in (2, 3) or self.b_tilde.shape[-2:] != self.geom.sinogram_shape:
            raise ValueError(f"data shape {self.b_tilde.shape} != {self.geom.sinogram_shape}")
        if self.xi_tilde is not None:
            self.xi_tilde = np.asarray(self.xi_tilde, dtype=np.float64)
            if self.xi_tilde.shape != self.batch_shape + self.geom.image_shape:
                raise ValueError(f"prior shift shape {self.xi_tilde.shape} != "
                                 f"{self.batch_shape + self.geom.image_shape}")

    @property
    def batch_shape(self) -> tuple:
        return self.b_tilde.shape[:-2]


@dataclass
class FistaConfig:
    k_fista: int = 20
    step_size: float | None = None
    warm_start: np.ndarray | None = None

    def __post_init__(self):
        if self.k_fista < 1:
            raise ValueError("k_fista must be >= 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be > 0")


def lipschitz_constant(norm_sq_a: float, lam: float, delta: float) -> float:
    """Lipschitz constant of the gradient, using the safety-scaled operator norm."""
    return lam * norm_sq_a * SAFETY_FACTOR + delta


def objective_value(obj: QuadraticObjective, x, projector: FanBeamProjector | None = None) -> float:
    proj = projector or FanBeamProjector(obj.geom)
    r = proj.forward(x, obj.c) - obj.b_tilde
    d = x if obj.xi_tilde is None else x - obj.xi_tilde
    return 0.5 * obj.lam * float(np.vdot(r, r)) + 0.5 * obj.delta * float(np.vdot(d, d))


def gradient(obj: QuadraticObjective, x, projector: FanBeamProjector | None = None) -> np.ndarray:
    proj = projector or FanBeamProjector(obj.geom)
    r = proj.forward(x, obj.c) - obj.b_tilde
    g = obj.lam * proj.back(r, obj.c) + obj.delta * x
    if obj.xi_tilde is not None:
        g -= obj.delta * obj.xi_tilde
    return g


def fista_run(obj: QuadraticObjective, cfg: FistaConfig, projector: FanBeamProjector | None = None,
              ax0: np.ndarray | None = None, norm_sq_a: float | None = None):
    """Run exactly ``cfg.k_fista`` FISTA iterations.

    Returns ``(x, ax)`` where ``ax = A_c x`` for the returned iterate. The
    projection of the iterates is tracked alongside them, so every iteration
    costs one forward and one back projection; the extrapolated point's
    projection follows by linearity. Passing `ax0` (the projection of the
    warm start) saves the initial forward projection.
    """
    g = obj.geom
    proj = projector or FanBeamProjector(g)
    c = obj.c
    step = cfg.step_size
    if step is None:
        if norm_sq_a is None:
            norm_sq_a = proj.norm_squared(c)[0]
        step = 1.0 / lipschitz_constant(norm_sq_a, obj.lam, obj.delta)

    batch = obj.batch_shape
    if cfg.warm_start is None:
        x = np.zeros(batch + g.image_shape)
        ax = np.zeros(batch + g.sinogram_shape)
    else:
        x = np.array(cfg.warm_start, dtype=np.float64)
        if x.shape != batch + g.image_shape:
            raise ValueError(f"warm start shape {x.shape} != {batch + g.image_shape}")
        ax = proj.forward(x, c) if ax0 is None else np.array(ax0, dtype=np.float64)

    lam, delta, b = obj.lam, obj.delta, obj.b_tilde
    shift = obj.xi_tilde
    y, ay = x, ax
    t = 1.0
    for _ in range(cfg.k_fista):
        grad = lam * proj.back(ay - b, c)
        grad += delta * y
        if shift is not None:
            grad -= delta * shift
        x_new = y - step * grad
        if obj.nonneg:
            np.maximum(x_new, 0.0, out=x_new)
        ax_new = proj.forward(x_new, c)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(ax_new))):
            raise SolverError("non-finite iterate in FISTA; step size too large?")
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        y = x_new + beta * (x_new - x)
        ay = ax_new + beta * (ax_new - ax)
        x, ax, t = x_new, ax_new, t_new
    return x, ax


def fista_solve(obj: QuadraticObjective, cfg: FistaConfig, projector: FanBeamProjector | None = None) -> np.ndarray:
    """Approximate minimizer of `obj` after ``cfg.k_fista`` FISTA iterations."""
    return fista_run(obj, cfg, projector)[0]


def map_reconstruct(b, geom: GeometrySpec, c: float, alpha: float, nonneg: bool = True,
                    k_fista: int = 100, warm_start=None, projector: FanBeamProjector | None = None,
                    norm_sq_a: float | None = None) -> np.ndarray:
    """Tikhonov reconstruction ``argmin ||A_c x - b||^2 + alpha ||x||^2`` (x >= 0 if `nonneg`)."""
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    obj = QuadraticObjective(geom, c, b, lam=1.0, delta=float(alpha), nonneg=nonneg)
    cfg = FistaConfig(k_fista=k_fista, warm_start=warm_start)
    return fista_run(obj, cfg, projector, norm_sq_a=norm_sq_a)[0]
