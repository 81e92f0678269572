"""Numerical laboratory for integrator-induced precession in the planar
Kepler problem: six discrete schemes, their step-size perturbation theory,
and the measurement tools that compare the two."""

from .errors import (
    ConfigurationError,
    DegenerateOrbit,
    KeplerLabError,
    NearSingularity,
    NumericalFailure,
    SignChange,
    SingularMassMatrix,
    SolverFailure,
    TooFewRevolutions,
    UnboundOrbit,
)
from .kepler import (
    CIRCULAR_ECCENTRICITY,
    KEPLER_TOLERANCE,
    SINGULARITY_FLOOR,
    ExactOrbit,
    OrbitElements,
    PlanarVector,
    State,
    angular_momentum,
    elements_from_state,
    energy,
    exact_state_at,
    force,
    gradient_jacobian,
    lrl_angle,
    lrl_vector,
    perihelion_state,
    potential,
    potential_gradient,
    radius,
    solve_kepler,
)
from .integrators import (
    DEFAULT_SOLVER,
    FR_THETA,
    IMPLICIT_METHODS,
    IntegrationStats,
    MethodId,
    SolverConfig,
    Trajectory,
    dec_step,
    fr_step,
    init_second_point,
    integrate,
    lc_step,
    ml_step,
    mp_step,
    reconstruct_velocities,
    reconstruct_velocity,
    sv_step,
)
from .theory import (
    DEFAULT_AVERAGE_NODES,
    REFERENCE_STEP,
    ModifiedModel,
    PrecessionFormula,
    PrecessionPrediction,
    integrate_modified,
    lrl_symmetry_field,
    modified_acceleration,
    modified_lagrangian,
    orbit_average,
    orbit_average_closed_form,
    perturbation_field,
    precession_closed_form,
    precession_quadrature,
)
from .analysis import (
    ConservedQuantity,
    DriftReport,
    PrecessionEstimate,
    convergence_slope,
    discrete_angular_momentum,
    error_curve,
    invariant_drift,
    measure_precession,
    observable_series,
    series_drift,
    trajectory_arrays,
)

__version__ = "0.1.0"
