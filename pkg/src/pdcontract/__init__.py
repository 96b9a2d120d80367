"""Primal-dual contraction toolkit.

Certify exponential contraction of primal-dual gradient flows, simulate
them against time-varying optima, and check steady-state tracking bounds
for perturbed, observer-driven and layered variants.
"""
from ._backend import COMPILED
from .agc import AgcConfig, agc_delayed_field, agc_model, agc_true_field, build_agc_problem, run_agc_demo
from .contraction import (
    ContractionCertificate,
    alpha_max,
    build_q,
    build_theta,
    certify,
    empirical_rate,
    theta_inverse,
    weighted_distance,
)
from .dynamics import (
    ObserverConfig,
    Trajectory,
    VectorField,
    displacement_jacobian,
    integrate,
    observer_augmented_field,
    pd_vector_field,
    perturbed_field,
)
from .errors import *  # noqa: F401,F403
from .hierarchy import LayerSpec, linear_cascade, simulate_stack, tau_chain
from .matrixcore import matrix_measure_2, spectral_norm, sym_eig_extremes, sym_eigh, sym_sqrt
from .problem import (
    SaddleProblem,
    incidence_from_edges,
    instantaneous_optimum,
    kkt_residual,
    lagrangian_value,
    make_problem,
    make_quadratic_problem,
    optimum_rate,
    sup_optimum_rate,
)
from .robustness import (
    BoundReport,
    LipschitzEstimates,
    bound_approx_to_pd,
    bound_observer_error,
    bound_perturbed_to_pd,
    bound_tracking,
    bound_tracking_with_observer,
    estimate_lipschitz,
    run_observer_experiment,
    unobserved_projector,
    validate_bound,
)
from .signals import Constant, Ramp, Sinusoid, Tabulated

__version__ = "0.1.0"
