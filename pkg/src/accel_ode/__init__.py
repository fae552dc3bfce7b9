"""Discretizations of low- and high-resolution ODEs behind momentum methods,
with rate-bound and Lyapunov certification on convex test problems."""
from .analysis import (bound_catalog, check_bound, fit_rate, max_spectral_radius, spectral_radius,
                       theorem_step_size)
from .integrators import SchemeRule, SchemeSpec, Trace, run, step
from .lyapunov import catalog as lyapunov_catalog, check_contraction
from .objectives import (make_log_sum_exp, make_logistic, make_problem, make_quadratic,
                         make_scalar_quadratic)
from .phase_dynamics import OdeFamily, PhaseState, vector_field
from .reference_flow import integrate

__version__ = "0.1.0"

__all__ = [
    "OdeFamily", "PhaseState", "SchemeRule", "SchemeSpec", "Trace", "bound_catalog", "check_bound",
    "check_contraction", "fit_rate", "integrate", "lyapunov_catalog", "make_log_sum_exp", "make_logistic",
    "make_problem", "make_quadratic", "make_scalar_quadratic", "max_spectral_radius", "run",
    "spectral_radius", "step", "theorem_step_size", "vector_field",
]
