"""Closed-form benchmark trajectory for three bodies in three-fold symmetry.

When the three bodies share one colatitude and their azimuths differ by
2*pi/3, the dynamics collapse to one degree of freedom. In the variable
psi = cos(theta) the motion is simple harmonic:

    psi(t) = psi0 / (1 + E0) + A * sin(omega * t),   omega = sqrt(1 + E0)

with psi0 = cos(theta0), E0 the reduced energy and L the reduced angular
momentum (L = sin(theta)^2 * dphi/dt in the reduced clock). The azimuth
follows by quadrature of L / sin(theta)^2.

The reduced description uses its own clock and its own momentum/energy
normalization. The exact scale factors relating (E0, L, reduced time) to
the canonical (H, p_phi, simulation time) are not assumed: they are fitted
at build time from an integrated probe trajectory of the full system,
snapped to the exact rationals they converge to, and then verified against
two observable gates (the reduced energy identity, and an azimuthal advance
of exactly 2*pi/6 per radial period, which is what closes the benchmark
trajectory into its six-petal shape).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import CalibrationError, ConvergenceError
from .hamiltonian import SphereNBodyHamiltonian, SplitHamiltonian
from .integrators import integrate
from .phase import PhaseState, SphereParams

# Benchmark momenta (per body, canonical units). The azimuthal value is
# tuned so that the azimuthal advance per radial oscillation is exactly
# 2*pi/6, closing the trajectory after six radial periods.
BENCHMARK_P_THETA = 0.25
BENCHMARK_P_PHI = 0.1727174029854043

PHI_OFFSETS = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)

# Azimuthal advance per radial period of the closed benchmark trajectory.
PETAL_ADVANCE = 2.0 * math.pi / 6.0

_IDENTITY_GATE = 1e-10
_ADVANCE_GATE = 1e-9

# Scale factors are exact rationals of the reduction; the numeric fit is
# snapped onto this grid (and must land within _SNAP_TOL of a grid point).
_SNAP_GRID = (
    1.0, 0.5, 1.0 / 3.0, 0.25, 0.2, 1.0 / 6.0, 0.125, 0.1,
    2.0 / 3.0, 0.75, 1.5, 2.0, 3.0, 4.0,
)
_SNAP_TOL = 1e-6


@dataclass(frozen=True)
class OracleParams:
    """Reduced-system constants plus the calibrated normalization.

    amplitude is signed: its sign encodes the initial radial direction
    (psi decreasing at t = 0 when negative). momentum_scale converts
    canonical momenta to reduced ones (L = momentum_scale * p_phi);
    energy_scale converts the full energy (E0 = energy_scale * H);
    time_scale converts simulation time to the reduced clock
    (t_reduced = time_scale * t).
    """

    theta0: float
    psi0: float
    e0: float
    l_reduced: float
    amplitude: float
    momentum_scale: float
    energy_scale: float
    time_scale: float

    def __post_init__(self):
        if not (1.0 + self.e0 > 0.0):
            raise ValueError(f"need 1 + E0 > 0, got E0 = {self.e0}")
        if abs(self.psi0 - math.cos(self.theta0)) > 1e-12:
            raise ValueError("psi0 must equal cos(theta0)")
        amp_sq = self.amplitude_sq_bound
        if amp_sq < -1e-12:
            raise ValueError(f"amplitude bound is negative: {amp_sq}")
        if abs(self.amplitude**2 - max(0.0, amp_sq)) > 1e-9:
            raise ValueError(
                "amplitude inconsistent with (E0, L): "
                f"{self.amplitude**2} vs {amp_sq}"
            )
        if abs(self.psi_center) + abs(self.amplitude) >= 1.0:
            raise ValueError("radial oscillation reaches a pole")
        if not (self.momentum_scale > 0 and self.energy_scale > 0 and self.time_scale > 0):
            raise ValueError("scale factors must be positive")

    @property
    def psi_center(self) -> float:
        return self.psi0 / (1.0 + self.e0)

    @property
    def amplitude_sq_bound(self) -> float:
        return (
            self.e0
            - self.l_reduced**2
            - self.e0 * self.psi0**2 / (1.0 + self.e0)
        ) / (1.0 + self.e0)

    @property
    def omega(self) -> float:
        return math.sqrt(1.0 + self.e0)

    @property
    def period(self) -> float:
        """Radial period in the reduced clock."""
        return 2.0 * math.pi / self.omega

    @property
    def real_period(self) -> float:
        """Radial period in simulation time."""
        return self.period / self.time_scale

    @classmethod
    def from_reduced(
        cls,
        theta0: float,
        e0: float,
        l_reduced: float,
        momentum_scale: float,
        energy_scale: float,
        time_scale: float,
        radial_direction: float = -1.0,
    ) -> "OracleParams":
        psi0 = math.cos(theta0)
        amp_sq = (e0 - l_reduced**2 - e0 * psi0**2 / (1.0 + e0)) / (1.0 + e0)
        amplitude = math.copysign(math.sqrt(max(0.0, amp_sq)), radial_direction)
        return cls(
            theta0, psi0, e0, l_reduced, amplitude,
            momentum_scale, energy_scale, time_scale,
        )


@dataclass(frozen=True)
class ReducedState:
    """Reduced-clock snapshot of the symmetric motion."""

    theta: float
    phi: float
    theta_dot: float
    phi_dot: float


def psi_of_t(params: OracleParams, t: float) -> float:
    """cos(theta) at reduced time t."""
    return params.psi_center + params.amplitude * math.sin(params.omega * t)


def theta_of_t(params: OracleParams, t: float) -> float:
    return math.acos(psi_of_t(params, t))


def _phi_integrand(params: OracleParams):
    l = params.l_reduced

    def f(s):
        psi = psi_of_t(params, s)
        return l / (1.0 - psi * psi)

    return f


def _quad_segment(params: OracleParams, upper: float, quad_tol: float) -> float:
    if upper == 0.0 or params.l_reduced == 0.0:
        return 0.0
    val, abserr = quad(
        _phi_integrand(params), 0.0, upper,
        epsabs=quad_tol, epsrel=1e-12, limit=200,
    )
    if abserr > 100.0 * max(quad_tol, 1e-14):
        raise ConvergenceError(
            f"azimuthal quadrature error {abserr:.3e} above tolerance",
            residual=abserr,
        )
    return val


@lru_cache(maxsize=128)
def _period_advance(params: OracleParams, quad_tol: float) -> float:
    return _quad_segment(params, params.period, quad_tol)


def phi_of_t(
    params: OracleParams,
    t: float,
    quad_tol: float = 1e-12,
    phi_at_0: float = 0.0,
) -> float:
    """Azimuth at reduced time t: phi(0) plus the quadrature of
    L / (1 - psi^2). The integral is split into whole radial periods plus a
    remainder so each quadrature interval stays short."""
    if not (quad_tol > 0):
        raise ValueError("quad_tol must be positive")
    period = params.period
    n_full = math.floor(t / period)
    remainder = t - n_full * period
    advance = 0.0
    if n_full != 0:
        advance += n_full * _period_advance(params, quad_tol)
    advance += _quad_segment(params, remainder, quad_tol)
    return phi_at_0 + advance


def reduced_state_of_t(
    params: OracleParams,
    t: float,
    phi_at_0: float = 0.0,
    quad_tol: float = 1e-12,
) -> ReducedState:
    psi = psi_of_t(params, t)
    sin_theta = math.sqrt(1.0 - psi * psi)
    psi_dot = params.amplitude * params.omega * math.cos(params.omega * t)
    return ReducedState(
        theta=math.acos(psi),
        phi=phi_of_t(params, t, quad_tol, phi_at_0),
        theta_dot=-psi_dot / sin_theta,
        phi_dot=params.l_reduced / (1.0 - psi * psi),
    )


def reduced_potential(theta: float, theta0: float) -> float:
    """The pair interaction seen by the symmetric configuration, as a
    function of the shared colatitude."""
    return (math.cos(theta) - math.cos(theta0)) ** 2 / math.sin(theta) ** 2


def symmetric_state(
    t: float, theta: float, p_theta: float, p_phi: float, base_phi: float = 0.0
) -> PhaseState:
    """Three-fold symmetric three-body state at the given shared values."""
    return PhaseState(
        t,
        np.full(3, theta),
        base_phi + np.asarray(PHI_OFFSETS),
        np.full(3, p_theta),
        np.full(3, p_phi),
    )


def _snap(value: float, name: str) -> float:
    best = min(_SNAP_GRID, key=lambda g: abs(g - value))
    if abs(best - value) > _SNAP_TOL:
        raise CalibrationError(
            f"fitted {name} = {value!r} is not near any expected rational"
        )
    return best


def calibrate_reduction(
    params: SphereParams, hamiltonian: SplitHamiltonian | None = None
) -> tuple[float, float, float]:
    """Fit the reduced-normalization scale factors from the full dynamics.

    A symmetric probe trajectory is integrated with the order-4 stepper and
    the reduced energy identity V(theta) + alpha*k + (-beta)*H = 0 is fitted
    by least squares over its samples, where k is the per-body kinetic
    energy. alpha and beta are snapped to exact rationals. Returns
    (momentum_scale, energy_scale, time_scale).
    """
    if hamiltonian is None:
        hamiltonian = SphereNBodyHamiltonian(params)
    m = params.mass
    scale = math.sqrt(m)
    start = symmetric_state(0.0, params.theta0 + 0.25, 0.25 * scale, 0.15 * scale)
    tau = 0.02 * scale
    samples = integrate(start, hamiltonian, "sesi4", tau, 400, sample_every=4)
    h_value = hamiltonian.value(start)

    v_vals = []
    k_vals = []
    for s in samples:
        theta = float(s.theta[0])
        v_vals.append(reduced_potential(theta, params.theta0))
        k_vals.append(
            float(s.p_theta[0] ** 2 + (s.p_phi[0] / math.sin(theta)) ** 2) / (2.0 * m)
        )
    v_vals = np.asarray(v_vals)
    k_vals = np.asarray(k_vals)
    if np.ptp(k_vals) < 1e-6:
        raise CalibrationError("probe trajectory explores too little phase space")

    # V = -alpha * k + beta * H  (H constant along the probe)
    slope, intercept = np.polyfit(k_vals, v_vals, 1)
    alpha = _snap(-float(slope), "kinetic scale")
    beta = _snap(float(intercept) / h_value, "energy scale")
    residual = float(np.max(np.abs(v_vals + alpha * k_vals - beta * h_value)))
    if residual > 1e-6:
        raise CalibrationError(
            f"reduced energy identity violated along the probe ({residual:.3e})"
        )

    momentum_scale = math.sqrt(alpha / (2.0 * m))
    time_scale = 1.0 / (momentum_scale * m)
    return momentum_scale, beta, time_scale


def _solve_reduced_energy(
    params: SphereParams,
    hamiltonian: SplitHamiltonian,
    energy_scale: float,
    p_theta: float,
    p_phi: float,
) -> float:
    """Self-consistent E0 for a start at the oscillation center,
    theta = arccos(psi0 / (1 + E0))."""
    psi0 = math.cos(params.theta0)
    e0 = 0.05
    for _ in range(200):
        theta_c = math.acos(psi0 / (1.0 + e0))
        state = symmetric_state(0.0, theta_c, p_theta, p_phi)
        e_new = energy_scale * hamiltonian.value(state)
        if abs(e_new - e0) <= 1e-16 * max(1.0, abs(e_new)):
            return e_new
        e0 = e_new
    raise CalibrationError("reduced-energy fixed point did not converge")


def build_benchmark_initial_state(
    params: SphereParams,
) -> tuple[PhaseState, OracleParams]:
    """The three-fold symmetric initial state whose trajectory closes into
    a six-petal shape, together with the calibrated oracle parameters.

    The initial colatitude is the center of the radial oscillation,
    arccos(psi0 / (1 + E0)), where the closed form has zero phase and the
    polar momentum is maximal.
    """
    if params.n_bodies != 3:
        raise ValueError("benchmark requires exactly 3 bodies")
    if abs(params.theta0 - math.pi / 4) > 1e-12:
        raise ValueError("benchmark requires theta0 = pi/4")

    hamiltonian = SphereNBodyHamiltonian(params)
    momentum_scale, energy_scale, time_scale = calibrate_reduction(params, hamiltonian)
    e0 = _solve_reduced_energy(
        params, hamiltonian, energy_scale, BENCHMARK_P_THETA, BENCHMARK_P_PHI
    )
    l_reduced = momentum_scale * BENCHMARK_P_PHI
    psi0 = math.cos(params.theta0)
    psi_c = psi0 / (1.0 + e0)
    theta_c = math.acos(psi_c)
    omega = math.sqrt(1.0 + e0)
    sin_c = math.sin(theta_c)
    # signed amplitude from the initial polar momentum: psi decreasing at
    # t = 0 when p_theta > 0
    amplitude = -momentum_scale * BENCHMARK_P_THETA * sin_c / omega

    oracle = OracleParams(
        theta0=params.theta0,
        psi0=psi0,
        e0=e0,
        l_reduced=l_reduced,
        amplitude=amplitude,
        momentum_scale=momentum_scale,
        energy_scale=energy_scale,
        time_scale=time_scale,
    )

    identity_residual = abs(
        reduced_potential(theta_c, params.theta0)
        + (momentum_scale * BENCHMARK_P_THETA) ** 2
        + l_reduced**2 / (sin_c * sin_c)
        - e0
    )
    if identity_residual > _IDENTITY_GATE:
        raise CalibrationError(
            f"reduced energy identity residual {identity_residual:.3e} "
            f"exceeds {_IDENTITY_GATE:.0e}"
        )
    advance = phi_of_t(oracle, oracle.period)
    if abs(advance - PETAL_ADVANCE) > _ADVANCE_GATE:
        raise CalibrationError(
            f"azimuthal advance per period {advance!r} differs from 2*pi/6 "
            f"by {abs(advance - PETAL_ADVANCE):.3e}"
        )

    state = symmetric_state(0.0, theta_c, BENCHMARK_P_THETA, BENCHMARK_P_PHI)
    return state, oracle


def closure_distance(start: PhaseState, end: PhaseState, windings: int = 1) -> float:
    """Max-norm distance between two states of a closed trajectory, with the
    known azimuthal winding removed (azimuths are stored unwrapped, so a
    closed loop ends 2*pi*windings ahead in every phi)."""
    shift = 2.0 * math.pi * windings
    return max(
        float(np.max(np.abs(end.theta - start.theta))),
        float(np.max(np.abs(end.phi - shift - start.phi))),
        float(np.max(np.abs(end.p_theta - start.p_theta))),
        float(np.max(np.abs(end.p_phi - start.p_phi))),
    )


def oracle_phase_state(
    params: OracleParams,
    phi_at_0: float,
    t: float,
    quad_tol: float = 1e-12,
) -> PhaseState:
    """Map the closed-form solution at simulation time t to the full
    three-body phase state under the calibrated normalization."""
    t_reduced = params.time_scale * t
    psi = psi_of_t(params, t_reduced)
    theta = math.acos(psi)
    sin_theta = math.sqrt(1.0 - psi * psi)
    psi_dot = params.amplitude * params.omega * math.cos(params.omega * t_reduced)
    theta_prime = -psi_dot / sin_theta
    p_theta = theta_prime / params.momentum_scale
    p_phi = params.l_reduced / params.momentum_scale
    phi = phi_of_t(params, t_reduced, quad_tol, phi_at_0)
    return symmetric_state(t, theta, p_theta, p_phi, base_phi=phi)
