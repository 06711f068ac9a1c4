"""Plug-in entropy of samples via histograms and kernel estimates, with a
derivative-minimum rule for choosing the bin width or bandwidth."""

from .distributions import (
    DISTRIBUTION_IDS,
    AnalyticDistribution,
    Sample,
    exact_entropy,
    get_distribution,
    pdf,
    reduced_radial_pdf,
    roughness_fprime,
    roughness_fsecond,
    sample,
)
from .errors import BoundaryMinimumError, DataFormatError, InvalidArgumentError, ResourceBudgetError
from .experiment import RunConfig, RunReport, compare_selectors, run_experiment
from .histogram import HistogramEstimate, build_histogram, coarsen, histogram_entropy
from .kde import (
    Kernel,
    KdeEstimate,
    get_kernel,
    kde_density,
    kde_entropy,
    kde_entropy_derivative,
    kde_second_derivative_residual,
    kernel_eval,
    make_kde,
)
from .selector import (
    EntropyCurve,
    Estimator,
    SelectorResult,
    SmoothingGrid,
    amise_bandwidth,
    default_grid,
    derivative_curve,
    entropy_curve,
    find_derivative_minimum,
    fit_scaling_exponent,
    scott_bin_width,
)

__version__ = "0.1.0"
