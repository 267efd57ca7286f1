from .alpha import (AlphaReport, RadialProfile, alpha_level_series, alpha_report, compute_alpha_end,
                    compute_alpha_level, compute_ball_functionals, limsup_proxy)
from .growth import (ChiReport, Epsilon, GrowthReport, OmegaReport, chi_diagnostics, epsilon_of, exponent_a,
                     gamma_bound, growth_fit, omega_diagnostics, quadratic_decay_exponent)
from .meanvalue import MeanValueReport, dimension_bound, moser_verify, sobolev_measure, sobolev_ratio
from .pipeline import EndCountReport, PipelineConfig, end_count_pipeline

__all__ = [
    "AlphaReport", "RadialProfile", "alpha_level_series", "alpha_report", "compute_alpha_end",
    "compute_alpha_level", "compute_ball_functionals", "limsup_proxy",
    "ChiReport", "Epsilon", "GrowthReport", "OmegaReport", "chi_diagnostics", "epsilon_of", "exponent_a",
    "gamma_bound", "growth_fit", "omega_diagnostics", "quadratic_decay_exponent",
    "MeanValueReport", "dimension_bound", "moser_verify", "sobolev_measure", "sobolev_ratio",
    "EndCountReport", "PipelineConfig", "end_count_pipeline",
]
