"""De-render images of objects into shape, material and lighting, and
re-render or relight them."""

from .coarse import (
    CoarseConfig,
    CoarseEstimate,
    LightFitResult,
    coarse_pipeline,
    fit_coarse_light,
    invert_albedo,
    refine_albedo,
)
from .fit import FitConfig, fit_decomposition, relight_after_fit
from .losses import (
    LightSampleConfig,
    LossWeights,
    MetricReport,
    coarse_loss,
    lsgan_losses,
    metric_dia,
    metric_mse_l1,
    metric_report,
    metric_sie,
    reconstruction_loss,
    sample_random_light,
    ssim,
)
from .optim import ObjectiveReport, OptimConfig, finite_diff, grad_check, gradient_descent
from .raster import brightness_hsv, fill_sparse_nearest, resample, sobel_gradients
from .rendering import (
    Decomposition,
    LightParams,
    MaterialParams,
    RenderConfig,
    alpha_from_raw,
    combine_normals,
    light_from_xy,
    normals_from_depth,
    relight,
    render,
    shade_diffuse,
    shade_specular,
    tone_map,
)

__version__ = "0.1.0"

__all__ = [
    "CoarseConfig",
    "CoarseEstimate",
    "Decomposition",
    "FitConfig",
    "LightFitResult",
    "LightParams",
    "LightSampleConfig",
    "LossWeights",
    "MaterialParams",
    "MetricReport",
    "ObjectiveReport",
    "OptimConfig",
    "RenderConfig",
    "alpha_from_raw",
    "brightness_hsv",
    "coarse_loss",
    "coarse_pipeline",
    "combine_normals",
    "fill_sparse_nearest",
    "finite_diff",
    "fit_coarse_light",
    "fit_decomposition",
    "grad_check",
    "gradient_descent",
    "invert_albedo",
    "light_from_xy",
    "lsgan_losses",
    "metric_dia",
    "metric_mse_l1",
    "metric_report",
    "metric_sie",
    "normals_from_depth",
    "reconstruction_loss",
    "refine_albedo",
    "relight",
    "relight_after_fit",
    "render",
    "resample",
    "sample_random_light",
    "shade_diffuse",
    "shade_specular",
    "sobel_gradients",
    "ssim",
    "tone_map",
]
