"""Husler-Reiss mixture distributions: evaluation, spectral and extremal
correlation functions, and samplers for the limits of Gaussian maxima."""

__version__ = "0.1.0"

from ._errors import (
    CapacityError,
    DomainError,
    FactorizationError,
    IntegrationError,
    NotInDomainError,
    SimulationError,
)
from .special import (
    NormalizingConstant,
    bivariate_normal_cdf,
    mvn_survivor,
    normalizing_constant,
    std_normal_cdf,
    std_normal_pdf,
)
from .measures import (
    INF,
    EtaMeasure,
    MixtureMeasure,
    atomic,
    dirac,
    discretize,
    empirical,
    integrate,
    make_measure,
    rayleigh,
    tabulated,
    type2gumbel,
)
from .distributions import (
    BivariateMaxStableCDF,
    DependenceMatrix,
    gamma_transform,
    general_mixture_cdf,
    h_eta_cdf,
    h_lm,
    hr_bivariate_cdf,
    hr_mixture_cdf,
    husler_reiss_cdf,
    is_strictly_cnd,
    rayleigh_mixture_cdf,
    type2_gumbel_mixture_cdf,
)
from .dependence import (
    SpectralDensity,
    Variogram,
    cdf_from_spectral,
    ecf_brown_resnick,
    ecf_from_bivariate_cdf,
    ecf_laplace,
    ecf_mixture,
    spectral_density,
)
from .simulation import (
    FieldSample,
    GridSpec,
    RngHandle,
    brown_resnick_field,
    correlations_from_radii,
    dependence_matrix_from_grid,
    exact_finite_n_cdf,
    mixture_process_field,
    rescaled_gaussian_max_field,
    sample_hr_mixture_ppp,
    sample_row_max_bivariate,
)
from .verification import (
    ConvergenceReport,
    convergence_report,
    empirical_cdf,
    estimate_ecf,
    sup_distance,
)
