"""Vine copula modeling of dependent traffic parameters.

Extracts per-car-per-frame stochastic parameters from trajectory recordings,
fits an R-vine pair-copula construction to them, and resimulates
statistically faithful samples.
"""

from .bicop import (
    DomainError,
    Family,
    PairCopula,
    cdf,
    hfunc,
    hinv,
    loglik,
    params_from_tau,
    pdf,
    tau_from_params,
)
from .dependence import (
    DataMatrix,
    EmpiricalMarginal,
    Scale,
    ZeroVarianceError,
    correlation_matrix,
    kendall_tau,
    marginal_cdf,
    marginal_fit,
    marginal_quantile,
    pseudo_obs,
    ranks,
    spearman_rho,
)
from .fitting import PairFitReport, fit_pair
from .traffic import ExtractConfig, RoundaboutGeometry, extract, load_recording
from .vine import (
    FittedVine,
    ModelFormatError,
    NonFiniteDensityError,
    StructureError,
    VineEdge,
    VineStructure,
    fit_vine,
    inverse_rosenblatt,
    load_model,
    log_density,
    log_density_u,
    rosenblatt,
    sample,
    sample_u,
    save_model,
    select_structure,
    structure_from_weights,
)

__version__ = "0.1.0"
