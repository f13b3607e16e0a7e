"""Simulation and asymptotic analysis of finite-time blow-up in y' = H(y) A y + G(t, y)."""

__version__ = "0.1.0"

from .asymptotics import AsymptoticsReport, Options, analyze, fit_rate  # noqa: E402
from .envelope import Envelope, RateModel, integrals_of, predict_rate  # noqa: E402
from .homogeneous import HomogeneousFn, euclidean, make_kernel, p_norm, quadratic_form  # noqa: E402
from .integrator import BlowupTrajectory, Control, exact_unforced, integrate_blowup  # noqa: E402
from .problem import (  # noqa: E402
    ProblemSpec,
    blowup_threshold,
    forced,
    from_dict,
    general,
    make_corrector,
    make_perturbation,
    manufactured,
    reference,
)
from .spectral import SpectralData, decompose  # noqa: E402

__all__ = [
    "AsymptoticsReport", "BlowupTrajectory", "Control", "Envelope", "HomogeneousFn", "Options", "ProblemSpec",
    "RateModel", "SpectralData", "analyze", "blowup_threshold", "decompose", "euclidean", "exact_unforced",
    "fit_rate", "forced", "from_dict", "general", "integrals_of", "integrate_blowup", "make_corrector",
    "make_kernel", "make_perturbation", "manufactured", "p_norm", "predict_rate", "quadratic_form", "reference",
]
