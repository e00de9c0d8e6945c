"""Zero-shot image denoising with diffusion priors.

The engine iteratively solves maximum-a-posteriori problems inside the
reverse process of a pre-trained diffusion model, with adaptive
likelihood/prior balancing, a non-uniform accelerated timestep
sub-sequence, and a two-stage low-to-high-resolution cascade.
"""

from .cascade import (CascadeConfig, cascade_denoise, cascade_denoise_report,
                      downsample, upsample_bicubic)
from .epsnet import (EpsMeanPredictor, EpsPredictorNet, load_checkpoint,
                     save_checkpoint, train_eps_predictor)
from .forward import coupled_noisy, noise_draw, posterior_mean_tilde, sample_forward
from .lam import LambdaPolicy, adaptive_map, adaptive_scalar, estimate_noise, lambda_at, refine
from .metrics import MetricWindow, psnr, ssim
from .phantom import NoiseModel, PhantomSpec, corrupt, generate_phantoms
from .prior import AnalyticGaussianPrior, MeanPredictor, ancestral_sample, mu_from_eps
from .schedule import NoiseSchedule, TauSchedule, linear_beta_schedule, make_tau
from .solver import (DenoiseConfig, RunSnapshot, denoise, denoise_average,
                     denoise_runs, map_update, resume, resume_runs)

__all__ = [
    "AnalyticGaussianPrior",
    "CascadeConfig",
    "DenoiseConfig",
    "EpsMeanPredictor",
    "EpsPredictorNet",
    "LambdaPolicy",
    "MeanPredictor",
    "MetricWindow",
    "NoiseModel",
    "NoiseSchedule",
    "PhantomSpec",
    "RunSnapshot",
    "TauSchedule",
    "adaptive_map",
    "adaptive_scalar",
    "ancestral_sample",
    "cascade_denoise",
    "cascade_denoise_report",
    "corrupt",
    "coupled_noisy",
    "denoise",
    "denoise_average",
    "denoise_runs",
    "downsample",
    "estimate_noise",
    "generate_phantoms",
    "lambda_at",
    "linear_beta_schedule",
    "load_checkpoint",
    "make_tau",
    "map_update",
    "mu_from_eps",
    "noise_draw",
    "posterior_mean_tilde",
    "psnr",
    "refine",
    "resume",
    "resume_runs",
    "sample_forward",
    "save_checkpoint",
    "ssim",
    "train_eps_predictor",
    "upsample_bicubic",
]

__version__ = "0.1.0"
