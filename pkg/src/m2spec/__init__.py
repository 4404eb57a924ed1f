"""Matrix-valued multidimensional covariance extension with the tau-divergence."""

from .divergence import divergence, itakura_saito, nu_divergence, tau_divergence
from .dual import (
    DualVariable,
    SolverOptions,
    SolverReport,
    Status,
    choose_nu,
    dual_gradient,
    dual_objective,
    dual_objective_is,
    dual_value,
    feasibility_margin,
    q_norm,
    solve_dual,
)
from . import herm
from .grid import CovarianceData, IndexSet, TorusGrid, eval_trig_poly, gamma_moments, quadrature
from .primal import Certificate, certify, moment_residual, primal_density, primal_density_power_form
from .spectra import (
    GridDensity,
    PriorSpec,
    eval_prior,
    periodogram,
    random_coercive_density,
    smoothed_periodogram,
    synth_field,
)

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "CovarianceData",
    "DualVariable",
    "GridDensity",
    "IndexSet",
    "PriorSpec",
    "SolverOptions",
    "SolverReport",
    "Status",
    "TorusGrid",
    "certify",
    "choose_nu",
    "divergence",
    "dual_gradient",
    "dual_objective",
    "dual_objective_is",
    "dual_value",
    "eval_prior",
    "eval_trig_poly",
    "feasibility_margin",
    "gamma_moments",
    "herm",
    "itakura_saito",
    "moment_residual",
    "nu_divergence",
    "periodogram",
    "primal_density",
    "primal_density_power_form",
    "q_norm",
    "quadrature",
    "random_coercive_density",
    "smoothed_periodogram",
    "solve_dual",
    "synth_field",
    "tau_divergence",
]
