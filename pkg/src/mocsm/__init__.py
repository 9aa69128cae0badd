"""Multi-output spectral mixture Gaussian processes with the MOCSM kernel."""

from .data import ChannelSeries, MultiChannelDataset, generate_synthetic, load_csv, save_csv
from .errors import InputError, MOGPError, NumericalError
from .gp import FitReport, GPPosterior, MOGPModel, OptimizerConfig, fit, nlml, nlml_grad, predict
from .init import gmm_em, init_params
from .kernels import (Family, MOGPKernelParams, SpectralComponent, cross_params, gram_matrix,
                      kernel_eval, mocsm_eval, mosm_eval, param_count, sm_eval)

__version__ = "0.1.0"

__all__ = [
    "ChannelSeries", "MultiChannelDataset", "generate_synthetic", "load_csv", "save_csv",
    "InputError", "MOGPError", "NumericalError",
    "FitReport", "GPPosterior", "MOGPModel", "OptimizerConfig", "fit", "nlml", "nlml_grad",
    "predict", "gmm_em", "init_params",
    "Family", "MOGPKernelParams", "SpectralComponent", "cross_params", "gram_matrix",
    "kernel_eval", "mocsm_eval", "mosm_eval", "param_count", "sm_eval",
]
