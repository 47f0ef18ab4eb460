"""Hierarchical Metropolis-within-Gibbs sampler for image, offset and precisions.

One Gibbs sweep draws, in order,

1. the noise precision ``lam`` from its Gamma conditional,
2. the prior precision ``delta`` from its Gamma conditional,
3. the offset ``c`` by ``k_metro`` random-walk Metropolis-Hastings steps,
4. the image ``x`` by a truncated, warm-started FISTA solve of a randomly
   perturbed regularized least-squares problem (randomize-then-optimize).

Steps 1 and 3 condition on the previous image. Projections are cached
between steps so a sweep costs exactly ``2*k_fista + k_metro`` projections.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import GeometrySpec, check, check_offset
from .io import ChainRecords, ChainWriter, write_image
from .projector import FanBeamProjector
from .solver import FistaConfig, QuadraticObjective, fista_run, lipschitz_constant, map_reconstruct
from .streams import RandomStreams

__all__ = [
    "HyperPriors",
    "OffsetPrior",
    "SamplerConfig",
    "GibbsChain",
    "lambda_conditional",
    "delta_conditional",
    "sample_lambda",
    "sample_delta",
    "mh_sample_c",
    "rto_sample_x",
    "run_gibbs",
    "tune_step_size",
    "TuneResult",
    "log_offset_target",
    "with_start",
    "NormCache",
    "default_alpha",
]


@dataclass(frozen=True)
class HyperPriors:
    """Gamma(shape, rate) hyperpriors; the defaults are weak exponential priors."""

    alpha_lambda: float = 1.0
    beta_lambda: float = 1e-4
    alpha_delta: float = 1.0
    beta_delta: float = 1e-4

    def __post_init__(self):
        for name in ("alpha_lambda", "beta_lambda", "alpha_delta", "beta_delta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class OffsetPrior:
    mu_c: float = 0.0
    sigma_c: float = 10.0

    def __post_init__(self):
        if not self.sigma_c > 0:
            raise ValueError(f"sigma_c must be > 0, got {self.sigma_c}")


@dataclass(frozen=True)
class SamplerConfig:
    k_gibbs: int = 1000
    k_metro: int = 10
    k_fista: int = 20
    mh_step_size: float = 0.1
    nonneg: bool = True
    c0: float = 0.0
    x0: np.ndarray | None = None
    hyperpriors: HyperPriors = field(default_factory=HyperPriors)
    offset_prior: OffsetPrior = field(default_factory=OffsetPrior)
    seed: int = 0
    burn_in: int = 0
    alpha0: float | None = None  # regularization of the initial MAP image
    k_fista_init: int = 200
    flush_every: int = 50

    def __post_init__(self):
        for name in ("k_gibbs", "k_metro", "k_fista"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.mh_step_size > 0:
            raise ValueError("mh_step_size must be > 0")
        if not 0 <= self.burn_in < self.k_gibbs:
            raise ValueError("burn_in must satisfy 0 <= burn_in < k_gibbs")


@dataclass
class GibbsChain:
    """Scalar chain records plus running image moments after burn-in."""

    records: ChainRecords
    burn_in: int
    k_metro: int
    mean_image: np.ndarray
    second_moment_image: np.ndarray
    final_image: np.ndarray
    cost: int
    setup_cost: int = 0
    n_mean: int = 0
    n_out_of_grid: int = 0  # MH proposals rejected without a projection

    @property
    def std_image(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.second_moment_image - self.mean_image ** 2, 0.0))


# -- conditionals ---------------------------------------------------------


def lambda_conditional(residual_sq: float, m: int, hp: HyperPriors) -> tuple[float, float]:
    """(shape, rate) of the noise-precision conditional given ``||A_c x - b||^2``."""
    return m / 2.0 + hp.alpha_lambda, 0.5 * residual_sq + hp.beta_lambda


def delta_conditional(x, hp: HyperPriors, nonneg: bool) -> tuple[float, float]:
    """(shape, rate) of the prior-precision conditional.

    Under the nonnegativity prior only strictly positive entries count
    towards the shape.
    """
    x = np.asarray(x)
    n_eff = int(np.count_nonzero(x > 0)) if nonneg else x.size
    return n_eff / 2.0 + hp.alpha_delta, 0.5 * float(np.vdot(x, x)) + hp.beta_delta


def _gamma(rng: np.random.Generator, shape: float, rate: float) -> float:
    # one Generator.gamma call per draw
    return float(rng.gamma(shape, 1.0 / rate))


def sample_lambda(x, b, geom: GeometrySpec, c: float, hp: HyperPriors, rng: np.random.Generator,
                  projector: FanBeamProjector | None = None, ax=None) -> float:
    if ax is None:
        ax = (projector or FanBeamProjector(geom)).forward(x, c)
    r = np.asarray(ax) - b
    shape, rate = lambda_conditional(float(np.vdot(r, r)), r.size, hp)
    return _gamma(rng, shape, rate)


def sample_delta(x, hp: HyperPriors, nonneg: bool, rng: np.random.Generator) -> float:
    shape, rate = delta_conditional(x, hp, nonneg)
    return _gamma(rng, shape, rate)


def log_offset_target(misfit_sq: float, c: float, lam: float, prior: OffsetPrior) -> float:
    """Unnormalized log density of the offset conditional."""
    return -0.5 * lam * misfit_sq - 0.5 * ((c - prior.mu_c) / prior.sigma_c) ** 2


def _mh(x, c_prev, lam, b, prior, s, k_metro, streams, project, ax_prev, c_limit):
    if ax_prev is None:
        ax_prev = project(x, c_prev)
    r = ax_prev - b
    c_cur, ax_cur = float(c_prev), ax_prev
    logp_cur = log_offset_target(float(np.vdot(r, r)), c_cur, lam, prior)
    accepts = skipped = 0
    for _ in range(k_metro):
        c_prop = c_cur + s * streams.mh_proposal.standard_normal()
        u = streams.mh_uniform.random()
        if c_limit is not None and abs(c_prop) >= c_limit:
            skipped += 1  # zero prior mass outside the grid; no projection needed
            continue
        ax_prop = project(x, c_prop)
        r = ax_prop - b
        logp_prop = log_offset_target(float(np.vdot(r, r)), c_prop, lam, prior)
        if u < math.exp(min(0.0, logp_prop - logp_cur)):
            c_cur, ax_cur, logp_cur = c_prop, ax_prop, logp_prop
            accepts += 1
    return c_cur, accepts, ax_cur, skipped


def mh_sample_c(x, c_prev, lam, b, geom: GeometrySpec | None, prior: OffsetPrior, s: float, k_metro: int,
                streams: RandomStreams, delta: float | None = None, project=None, ax_prev=None):
    """Random-walk Metropolis-Hastings for the offset conditional.

    Parameters
    ----------
    project : callable ``(x, c) -> A_c x``, optional
        Defaults to the fan-beam projector of `geom`; any callable with the
        same contract may be substituted.
    delta : float, optional
        Accepted for symmetry with the Gibbs conditioning list; the offset
        conditional does not depend on it.

    Returns
    -------
    c_new : float
    accept_count : int
    """
    if not s > 0:
        raise ValueError("s must be > 0")
    if k_metro < 1:
        raise ValueError("k_metro must be >= 1")
    c_limit = None
    if project is None:
        project = FanBeamProjector(geom).forward
    if geom is not None:
        c_limit = geom.image_size / 2.0
    c_new, accepts, _, _ = _mh(np.asarray(x), c_prev, lam, np.asarray(b), prior, s, k_metro, streams,
                            project, ax_prev, c_limit)
    return c_new, accepts


def _rto(b, geom, c, lam, delta, nonneg, k_fista, warm_start, streams, projector, ax0, norm_sq_a,
         perturb=True, batch=()):
    if perturb:
        xi_m = streams.xi_m.standard_normal(batch + geom.sinogram_shape)
        xi_n = streams.xi_n.standard_normal(batch + geom.image_shape)
        b_tilde = b + xi_m / math.sqrt(lam)
        shift = xi_n / math.sqrt(delta)
    else:
        b_tilde, shift = b, None
    obj = QuadraticObjective(geom, c, b_tilde, lam, delta, shift, nonneg)
    step = None if norm_sq_a is None else 1.0 / lipschitz_constant(norm_sq_a, lam, delta)
    cfg = FistaConfig(k_fista=k_fista, step_size=step, warm_start=warm_start)
    return fista_run(obj, cfg, projector, ax0=ax0, norm_sq_a=norm_sq_a)


def rto_sample_x(b, geom: GeometrySpec, c: float, lam: float, delta: float, nonneg: bool, k_fista: int,
                 warm_start, streams: RandomStreams, projector: FanBeamProjector | None = None,
                 norm_sq_a: float | None = None, perturb: bool = True,
                 n_samples: int | None = None) -> np.ndarray:
    """Approximate draw from the image conditional by truncated FISTA.

    Solves the least-squares problem with data ``b + lam**-0.5 * xi_m`` and
    prior shift ``delta**-0.5 * xi_n`` for fresh standard normal ``xi_m``,
    ``xi_n``. ``perturb=False`` drops the perturbation (a MAP solve with
    ``alpha = delta / lam``).

    With `n_samples` set, that many independent draws are solved together and
    returned stacked along a leading axis; the projector must accept batched
    inputs (see `MatrixProjector`) and `warm_start` must be None or stacked.
    """
    if not (lam > 0 and delta > 0):
        raise ValueError("lam and delta must be > 0")
    projector = projector or FanBeamProjector(geom)
    b = np.asarray(b, dtype=np.float64)
    batch = ()
    if n_samples is not None:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        batch = (int(n_samples),)
        b = np.broadcast_to(b, batch + geom.sinogram_shape)
    return _rto(b, geom, c, lam, delta, nonneg, k_fista, warm_start, streams,
                projector, None, norm_sq_a, perturb, batch)[0]


# -- the Gibbs sweep ------------------------------------------------------


@dataclass
class _State:
    x: np.ndarray
    ax: np.ndarray  # A_c x for the current (x, c)
    c: float
    lam: float = float("nan")
    delta: float = float("nan")
    accepts: int = 0
    skipped: int = 0  # MH proposals outside the grid, rejected without projecting


class NormCache:
    """Operator norm ``||A_c||^2`` re-estimated once c drifts by more than `tol` pixels.

    Re-estimation warm-starts the power method from the previous dominant
    vector. Projections spent here are tallied in `projections` so they can be
    kept out of the sampler's cost count.
    """

    def __init__(self, projector: FanBeamProjector, c: float, value: float | None = None, tol: float = 0.5,
                 n_iters: int = 30, n_refresh: int = 8, seed: int = 0):
        self.projector = projector
        self.tol = tol
        self.n_iters = n_iters
        self.n_refresh = n_refresh
        self.seed = seed
        self.projections = 0
        self._vec = None
        self.c_ref = float(c)
        self.value = self._estimate(c) if value is None else float(value)

    def _estimate(self, c):
        before = self.projector.cost
        n = self.n_iters if self._vec is None else self.n_refresh
        value, self._vec = self.projector.norm_squared(c, n, self.seed, v0=self._vec)
        self.projections += self.projector.cost - before
        return value

    def get(self, c: float) -> float:
        if abs(c - self.c_ref) > self.tol:
            self.value = self._estimate(c)
            self.c_ref = float(c)
        return self.value


def _sweep(state: _State, b, geom, cfg: SamplerConfig, s, streams, projector, norms: NormCache, hook=None):
    hp = cfg.hyperpriors
    if hook:
        hook("lambda")
    lam = sample_lambda(state.x, b, geom, state.c, hp, streams.gamma, ax=state.ax)
    if hook:
        hook("delta")
    delta = sample_delta(state.x, hp, cfg.nonneg, streams.gamma)
    if hook:
        hook("c")
    c_new, accepts, ax_c, skipped = _mh(state.x, state.c, lam, b, cfg.offset_prior, s, cfg.k_metro, streams,
                               projector.forward, state.ax, geom.image_size / 2.0)
    if hook:
        hook("x")
    x_new, ax_new = _rto(b, geom, c_new, lam, delta, cfg.nonneg, cfg.k_fista, state.x, streams, projector,
                         ax_c, norms.get(c_new))
    return _State(x_new, ax_new, c_new, lam, delta, accepts, skipped)


def _initial_state(b, geom, cfg: SamplerConfig, projector, norm_sq_a):
    c0 = check_offset(geom, cfg.c0)
    if cfg.x0 is not None:
        x0 = np.array(cfg.x0, dtype=np.float64)
        if x0.shape != geom.image_shape:
            raise ValueError(f"x0 shape {x0.shape} != {geom.image_shape}")
    else:
        alpha = cfg.alpha0 if cfg.alpha0 is not None else default_alpha(norm_sq_a)
        x0 = map_reconstruct(b, geom, c0, alpha, cfg.nonneg, cfg.k_fista_init, projector=projector,
                             norm_sq_a=norm_sq_a)
    return _State(x0, projector.forward(x0, c0), c0)


def default_alpha(norm_sq_a: float) -> float:
    """Mild Tikhonov weight for the starting image, relative to ``||A||^2``."""
    return 1e-3 * norm_sq_a


def run_gibbs(b, geom: GeometrySpec, cfg: SamplerConfig, projector: FanBeamProjector | None = None,
              out_dir: str | None = None, hook=None, norm_sq_a: float | None = None) -> GibbsChain:
    """Run ``cfg.k_gibbs`` sweeps and collect the chain.

    The chain's `cost` counts the projections spent in the sweeps:
    ``k_gibbs * (2*k_fista + k_metro)`` minus one for every MH proposal that
    fell outside the grid (`n_out_of_grid`). Initialization and operator
    norm updates are reported separately as `setup_cost`.

    If `out_dir` is given, ``chain.csv`` is appended and flushed after every
    sweep, and the running mean / second-moment images are written as
    ``mean.ctim`` / ``second_moment.ctim`` every ``cfg.flush_every`` sweeps
    and at the end.

    `hook`, if given, is called with the name of each conditional step just
    before it is drawn.
    """
    check(geom)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != geom.sinogram_shape:
        raise ValueError(f"sinogram shape {b.shape} != {geom.sinogram_shape}")
    projector = projector or FanBeamProjector(geom)
    streams = RandomStreams(cfg.seed)
    start = projector.cost
    norms = NormCache(projector, cfg.c0, norm_sq_a, seed=cfg.seed)
    state = _initial_state(b, geom, cfg, projector, norms.value)
    setup_cost = projector.cost - start

    k = cfg.k_gibbs
    recs = ChainRecords(np.arange(1, k + 1), np.empty(k), np.empty(k), np.empty(k), np.empty(k, np.int64))
    mean = np.zeros(geom.image_shape)
    second = np.zeros(geom.image_shape)
    n_mean = 0
    writer = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        writer = ChainWriter(os.path.join(out_dir, "chain.csv"))

    def flush_images():
        if out_dir is not None:
            write_image(os.path.join(out_dir, "mean.ctim"), mean)
            write_image(os.path.join(out_dir, "second_moment.ctim"), second)

    loop_start = projector.cost
    norm_start = norms.projections
    n_out = 0
    try:
        for i in range(k):
            state = _sweep(state, b, geom, cfg, cfg.mh_step_size, streams, projector, norms, hook)
            n_out += state.skipped
            recs.lam[i], recs.delta[i], recs.c[i], recs.mh_accepts[i] = (
                state.lam, state.delta, state.c, state.accepts)
            if writer is not None:
                writer.write(i + 1, state.lam, state.delta, state.c, state.accepts)
            if i >= cfg.burn_in:
                n_mean += 1
                mean += (state.x - mean) / n_mean
                second += (state.x * state.x - second) / n_mean
            if (i + 1) % cfg.flush_every == 0:
                flush_images()
    finally:
        if writer is not None:
            writer.close()
    flush_images()
    overhead = norms.projections - norm_start
    return GibbsChain(recs, cfg.burn_in, cfg.k_metro, mean, second, state.x,
                      projector.cost - loop_start - overhead, setup_cost + overhead, n_mean, n_out)


# -- step size tuning -----------------------------------------------------


@dataclass
class TuneResult:
    step_size: float
    history: list  # (step size, acceptance rate) per pilot batch
    x: np.ndarray
    c: float


def tune_step_size(b, geom: GeometrySpec, cfg: SamplerConfig, n_pilot: int = 10, low: float = 0.15,
                   high: float = 0.40, max_adjust: int = 30, projector: FanBeamProjector | None = None,
                   norm_sq_a: float | None = None) -> TuneResult:
    """Adjust the MH step size on discarded pilot sweeps.

    Each pilot batch runs `n_pilot` full sweeps (continuing from the previous
    batch's state) and measures the MH acceptance rate; the step size is
    doubled if the rate is above `high`, halved if below `low`, and the loop
    stops once the rate lands in ``[low, high]`` or after `max_adjust`
    adjustments. Pilot randomness uses a seed distinct from ``cfg.seed``.
    """
    check(geom)
    b = np.asarray(b, dtype=np.float64)
    projector = projector or FanBeamProjector(geom)
    norms = NormCache(projector, cfg.c0, norm_sq_a, seed=cfg.seed)
    streams = RandomStreams(cfg.seed + 0x9E3779B9)
    state = _initial_state(b, geom, cfg, projector, norms.value)
    s = cfg.mh_step_size
    history = []
    for n_adjust in range(max_adjust + 1):
        accepted = 0
        for _ in range(n_pilot):
            state = _sweep(state, b, geom, cfg, s, streams, projector, norms)
            accepted += state.accepts
        rate = accepted / (n_pilot * cfg.k_metro)
        history.append((s, rate))
        if low <= rate <= high or n_adjust == max_adjust:
            break
        s = s * 2.0 if rate > high else s / 2.0
    return TuneResult(s, history, state.x, state.c)


def with_start(cfg: SamplerConfig, tune: TuneResult, **changes) -> SamplerConfig:
    """Config continuing from a pilot's final state with the tuned step size."""
    return replace(cfg, mh_step_size=tune.step_size, x0=tune.x, c0=tune.c, **changes)
