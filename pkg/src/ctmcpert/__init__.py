"""Ergodicity certificates and perturbation bounds for time-inhomogeneous
Markovian queueing models.

The package models five structural classes of inhomogeneous
continuous-time chains, computes exponential-ergodicity certificates by a
weighted-norm route and a uniform route, evaluates the corresponding
perturbation bounds, and verifies everything numerically by integrating
the truncated forward equations.
"""

from .analysis import (CertificateError, ErgodicityCertificate,
                       WeightSequence, catastrophe_uniform_certificate,
                       decay_rate_at, decay_rates_at, forcing_norm_at,
                       log_norm, peak_deviation, reduced_norm_at,
                       similarity_reduced_matrix, uniform_from_weighted,
                       weighted_certificate, weighted_reduced_matrix)
from .bounds import (BoundReport, InfeasibleBoundError, PerturbationGaps,
                     build_report, critical_reduced_gap, perturbation_gaps,
                     to_total_variation, uniform_bound_at,
                     uniform_limsup_bound, uniform_mean_limsup_bound,
                     weighted_feasible, weighted_limsup_bound,
                     weighted_mean_limsup_bound)
from .model import (ChainSpec, ChainValidationError, GeneratorSlice,
                    MassArrivalChain, Perturbation, RateFamily,
                    batch_arrival_chain, batch_chain, batch_service_chain,
                    birth_death_chain, catastrophe_chain,
                    catastrophe_floor_at, catastrophe_reduction_at,
                    generator_at, perturb, rate_family, reduced_system_at)
from .rates import (RateEvalError, RateFunction, RateSyntaxError, eval_rate,
                    parse_rate, periodic_mean)
from .solver import (DistanceCurve, ProbeResult, RegimeReport, SolverError,
                     Trajectory, delta_state, ergodicity_coefficient,
                     integrate, limiting_regime, mass_arrival_probe,
                     mean_state, perturbation_distance,
                     stationary_distribution, write_mean_csv,
                     write_states_csv)

__version__ = "0.1.0"
