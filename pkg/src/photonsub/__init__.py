"""Photon-subtracted squeezed-pair states: analytics, simulation, inference.

The package covers the full chain from state construction to measured data:
detected joint photon-number distributions under lossy counters with dark
counts, nonclassicality witnesses on those distributions, a Monte Carlo of
the conditional beam-splitter subtraction protocol, maximum-likelihood
parameter recovery, and a pulse-trace pipeline for energy-resolving sensors.
"""
from .config import (DEFAULT_SEED, DEFAULTS, Config, DomainError,
                     TruncationError, UndefinedWitnessError, __version__)
from .estimation import (BootstrapErrors, FitConfig, FitResult, bootstrap_errors,
                         fit_parameters, negative_log_likelihood, synthetic_counts)
from .montecarlo import (McResult, ProtocolConfig, acceptance_probability,
                         beamsplitter_split, sample_pair_numbers, simulate_run,
                         tv_distance)
from .states import (DetectorModel, FockAmplitudes, JointPND,
                     build_subtracted_state, derivative_formula_pnd,
                     detected_joint_pnd, detector_povm, ideal_joint_pnd,
                     mean_pair_number, pad_joint, squeezing_from_pump,
                     state_mean_photons)
from .tes import (GaussianMixture, PulseTemplate, Trace, assign_photon_numbers,
                  default_template, fit_mixture, synth_batch, synth_trace,
                  wiener_project)
from .witnesses import (MarginalFit, WitnessReport, agarwal_parameter,
                        det_moment_matrix, fit_marginal, joint_factorial_moment,
                        min_eigenvalue, moment_matrix, poisson_pmf, thermal_pmf,
                        witness_report)

__all__ = [
    "BootstrapErrors", "Config", "DEFAULTS", "DEFAULT_SEED", "DetectorModel",
    "DomainError", "FitConfig", "FitResult", "FockAmplitudes", "GaussianMixture",
    "JointPND", "MarginalFit", "McResult", "ProtocolConfig", "PulseTemplate",
    "Trace", "TruncationError", "UndefinedWitnessError", "WitnessReport",
    "__version__", "acceptance_probability", "agarwal_parameter",
    "assign_photon_numbers", "beamsplitter_split", "bootstrap_errors",
    "build_subtracted_state",
    "default_template", "derivative_formula_pnd", "det_moment_matrix",
    "detected_joint_pnd", "detector_povm", "fit_marginal", "fit_mixture",
    "fit_parameters", "ideal_joint_pnd", "joint_factorial_moment",
    "mean_pair_number", "min_eigenvalue", "moment_matrix",
    "negative_log_likelihood", "pad_joint", "poisson_pmf", "sample_pair_numbers",
    "simulate_run", "squeezing_from_pump", "state_mean_photons", "synth_batch",
    "synth_trace", "synthetic_counts", "thermal_pmf", "tv_distance",
    "wiener_project", "witness_report",
]
