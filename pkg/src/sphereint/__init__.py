"""Explicit time-reversible symplectic integration for bodies on a sphere.

The kinetic energy in spherical coordinates couples the colatitude to the
azimuthal momentum, so the Hamiltonian is not separable and classic
explicit splitting schemes do not apply directly. The steppers here exploit
the hierarchical structure of that coupling to stay explicit while
remaining symplectic and time-reversible, at orders 2 and 4. The package
also ships the baselines they are measured against (implicit midpoint,
adaptive Dormand-Prince 5(4)), a closed-form benchmark trajectory with its
calibration, conservation diagnostics, and a CLI harness.
"""

from .errors import (
    CalibrationError,
    ConfigError,
    ConvergenceError,
    DomainError,
    SimulationError,
    SingularityError,
    StiffnessError,
    StructureError,
)
from .phase import (
    BodyState,
    PhaseState,
    SIN_THETA_GUARD,
    SphereParams,
    StateViolation,
    canonical_structure_matrix,
    state_distance,
    validate_state,
)
from .hamiltonian import (
    Partials,
    SphereNBodyHamiltonian,
    SplitHamiltonian,
    geodesic_distance,
    pair_potential,
    partials,
    total_energy,
)
from .integrators import (
    DopriConfig,
    MidpointSolverConfig,
    YoshidaCoefficients,
    dopri45_integrate,
    implicit_midpoint_step,
    integrate,
    sesi2_step,
    sesi4_step,
)
from .oracle import (
    BENCHMARK_P_PHI,
    BENCHMARK_P_THETA,
    OracleParams,
    PETAL_ADVANCE,
    ReducedState,
    build_benchmark_initial_state,
    calibrate_reduction,
    closure_distance,
    oracle_phase_state,
    phi_of_t,
    psi_of_t,
    reduced_state_of_t,
    symmetric_state,
    theta_of_t,
)
from .diagnostics import (
    ConvergenceResult,
    DiagnosticsRow,
    angular_momentum,
    convergence_study,
    diagnose_trajectory,
    xy_projection,
)
from .hierarchy import (
    HierarchicalHamiltonian,
    HierarchyViolation,
    KineticTerm,
    PotentialTerm,
    hierarchical_step2,
    hierarchical_step4,
    sphere_hierarchical,
    validate_hierarchy,
)

__version__ = "0.1.0"
