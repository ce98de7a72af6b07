"""Monte Carlo quadrature of monotone functions on [0,1].

Estimators, exact worst-case error analysis, universal lower bounds, and a
brute-force verification layer, with a CLI (``monoquad``) that writes
CSV/JSON reports and optional figures.
"""

from .analysis import (AdversarialPair, BoundReport, VarianceCertificate,
                       adversarial_pair, bound_reports_to_csv, lower_bound_lp,
                       optimal_strata, ratio_table, trapezoid_worst_case,
                       variance_lower_bound, worst_case_certificate,
                       worst_case_var_cv, worst_case_var_mc,
                       worst_case_var_stratified,
                       worst_case_var_stratified_restricted)
from .errors import BudgetExceededError, InvariantError, ParseError
from .estimators import (ControlVariate, EstimatorSpec, RngStream, SimpleMC,
                         StrataSpec, Stratified, Trapezoid, estimate,
                         estimate_batch, estimator_from_json, estimator_to_json,
                         evaluation_points, point_sampler, sample_size,
                         trapezoid_nodes, uniform_budget)
from .functions import (MonotoneFunction, Preset, Staircase, UnitStep, evaluate,
                        exact_integral, function_from_json, function_to_json,
                        moments_on_interval, project_staircase, var_fx_minus_x)
from .oracle import (BruteForceResult, ExperimentConfig, Report, UnbiasednessCheck,
                     brute_force_max_trapezoid_error, brute_force_max_variance,
                     empirical_lp_error, exact_estimator_variance,
                     exact_trapezoid_error, replicated_estimates, run_experiment,
                     verify_unbiasedness)

__version__ = "0.1.0"
