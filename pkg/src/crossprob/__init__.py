"""Exact Brownian-motion barrier crossing probabilities and related laws.

The package covers a family of moving barriers whose crossing
probabilities, last-exit-time distributions, and first-hitting-time
densities have closed forms certified by an image measure: a measure (or
derivative-of-Dirac train) on the far side of the barrier whose Gaussian
smoothing equals one along the barrier.  A deterministic Monte Carlo
oracle validates every closed form.
"""

from .errors import ConditionError, DomainError
from .special import (
    bivariate_norm_cdf,
    hermite_eval,
    hermite_largest_zero,
    hermite_zeros,
    lambert_w,
    norm_cdf,
    norm_pdf,
    norm_pdf_deriv,
)
from .measures import (
    DiracAtom,
    ExpComponent,
    IdentityReport,
    ImageMeasure,
    barrier_time_grid,
    images_condition_residual,
    verify_barrier_identity,
)
from .barriers import (
    HermiteBarrier,
    ImagesLambertBarrier,
    LinearBarrier,
    LogRemainingBarrier,
    SqrtRemainingBarrier,
    TimeInvertedBarrier,
    TwoSidedConstantBarrier,
    TwoSidedCurvedBarrier,
    barrier_from_dict,
    barrier_to_dict,
    hermite_gauss_largest_root,
    time_invert,
)
from .analytics import (
    CrossingResult,
    DensityCurve,
    crossing_prob,
    density_curve,
    hitting_cdf_inverted,
    hitting_pdf_inverted,
    images_crossing,
    images_hitting_pdf,
    lambda_cdf,
    lambda_pdf,
    sigma_cdf,
    sigma_pdf,
    sigma_pdf_via_measure,
    two_sided_sigma_cdf,
    two_sided_sigma_pdf,
)
from .montecarlo import (
    FortetResult,
    LastExitResult,
    McConfig,
    McEstimate,
    agreement_suite,
    mc_crossing,
    mc_fortet_check,
    mc_last_exit,
    mc_last_outside,
)

__version__ = "0.1.0"

__all__ = [
    "ConditionError",
    "DomainError",
    "bivariate_norm_cdf",
    "hermite_eval",
    "hermite_largest_zero",
    "hermite_zeros",
    "lambert_w",
    "norm_cdf",
    "norm_pdf",
    "norm_pdf_deriv",
    "DiracAtom",
    "ExpComponent",
    "IdentityReport",
    "ImageMeasure",
    "barrier_time_grid",
    "images_condition_residual",
    "verify_barrier_identity",
    "HermiteBarrier",
    "ImagesLambertBarrier",
    "LinearBarrier",
    "LogRemainingBarrier",
    "SqrtRemainingBarrier",
    "TimeInvertedBarrier",
    "TwoSidedConstantBarrier",
    "TwoSidedCurvedBarrier",
    "barrier_from_dict",
    "barrier_to_dict",
    "hermite_gauss_largest_root",
    "time_invert",
    "CrossingResult",
    "DensityCurve",
    "crossing_prob",
    "density_curve",
    "hitting_cdf_inverted",
    "hitting_pdf_inverted",
    "images_crossing",
    "images_hitting_pdf",
    "lambda_cdf",
    "lambda_pdf",
    "sigma_cdf",
    "sigma_pdf",
    "sigma_pdf_via_measure",
    "two_sided_sigma_cdf",
    "two_sided_sigma_pdf",
    "FortetResult",
    "LastExitResult",
    "McConfig",
    "McEstimate",
    "agreement_suite",
    "mc_crossing",
    "mc_fortet_check",
    "mc_last_exit",
    "mc_last_outside",
    "__version__",
]
