"""Closed characteristics, capacities and volumes for convex Hamiltonians of
the form ``T(p) + V(q)``, with numeric checks of Viterbo's inequality
``vol X >= c(X)^n / n!``.

Modules
-------
bodies
    Hamiltonians, norms, exact and Monte Carlo volumes, Legendre transforms.
quadratic
    Linear flows, symplectic frequencies, ellipsoid capacities and the two
    inscribed-ellipsoid arguments.
pl_flow
    Exact event-driven flow of ``||p||_1^2 + ||q||_inf^2``.
action_profiles
    Bodies that split into planar one-degree-of-freedom systems.
verify, cli
    Ratios, the dimension inequality for the explicit orbits, reports.
"""

from .bodies import (
    ConvexHamiltonian,
    L2SumSpec,
    NormDescriptor,
    Volume,
    gamma_binomial,
    l2_sum_volume,
    legendre_2hom,
    monte_carlo_volume,
    norm_ball_volume,
    sandwich_check,
    tightest_quadratic_bound,
)
from .pl_flow import (
    ClosedTrajectory,
    PhasePoint,
    explicit_nd_start,
    nd_period_formula,
    one_cycle_minimal,
    simulate,
    trajectory_action,
)
from .quadratic import QuadraticForm, ellipsoid_capacity, symplectic_frequencies
from .verify import check_ineq, l2sum_capacity_upper_bound, viterbo_ratio

__version__ = "0.1.0"
