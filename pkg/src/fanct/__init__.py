"""Fan-beam CT reconstruction with an uncertain center-of-rotation offset.

The offset ``c`` is sampled jointly with the image and the noise/prior
precisions by a hierarchical Metropolis-within-Gibbs sampler.
"""

from .baselines import BaselineEstimate, com_offset, xcorr_offset
from .diagnostics import chain_stats
from .geometry import GeometrySpec, Ray, detector_shift_of_center, ray_for, validate
from .projector import FanBeamProjector, MatrixProjector, back_project, forward_project, operator_norm_estimate
from .sampler import (GibbsChain, HyperPriors, OffsetPrior, SamplerConfig, mh_sample_c, rto_sample_x, run_gibbs,
                      sample_delta, sample_lambda, tune_step_size)
from .simulate import NoiseSpec, PhantomSpec, make_phantom, simulate_sinogram
from .solver import FistaConfig, QuadraticObjective, fista_solve, map_reconstruct

__version__ = "0.1.0"
