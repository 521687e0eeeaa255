"""Steppers: the explicit symplectic pair (orders 2 and 4) plus the two
baselines they are compared against (implicit midpoint, adaptive
Dormand-Prince 5(4)).

The order-2 stepper advances a state by tau with five explicit instructions:
half-drift in theta, half-drift in phi at the new theta, a full azimuthal
momentum kick, a full polar momentum kick that averages the metric force
over the old and new azimuthal momenta, then the mirroring half-drifts.
Written compactly it is a generalized leapfrog, hence symplectic and
time-reversible; every instruction is explicit because each consumed
quantity is already known when it is needed.

The order-4 stepper is the standard triple concatenation of the order-2 map
with sub-step durations tau/(2 - 2^(1/3)) twice bracketing a negative middle
sub-step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, SimulationError, StiffnessError
from .hamiltonian import SplitHamiltonian
from .phase import PhaseState

_CBRT2 = 2.0 ** (1.0 / 3.0)


@dataclass(frozen=True)
class YoshidaCoefficients:
    """Sub-step durations of the order-4 triple concatenation."""

    tau1: float
    tau2: float
    tau3: float

    @classmethod
    def for_step(cls, tau: float) -> "YoshidaCoefficients":
        w = 1.0 / (2.0 - _CBRT2)
        return cls(tau * w, -_CBRT2 * tau * w, tau * w)

    @property
    def total(self) -> float:
        return self.tau1 + self.tau2 + self.tau3


@dataclass(frozen=True)
class MidpointSolverConfig:
    """Fixed-point solve of the implicit midpoint stage."""

    tolerance: float = 1e-13
    max_iterations: int = 50

    def __post_init__(self):
        floor = 100 * np.finfo(float).eps
        if not (self.tolerance >= floor):
            raise ValueError(f"tolerance must be >= {floor:.2e}, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class DopriConfig:
    """Adaptive step control for the embedded 5(4) pair.

    rel_tol/abs_tol/safety follow the common defaults of the solver family
    this baseline stands in for.
    """

    rel_tol: float = 1e-3
    abs_tol: float = 1e-6
    initial_step: float = 0.01
    max_step: float = 10.0
    safety: float = 0.9

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.initial_step <= self.max_step):
            raise ValueError("need 0 < initial_step <= max_step")
        if not (0 < self.safety < 1):
            raise ValueError("safety must lie in (0, 1)")


def sesi2_step(state: PhaseState, h: SplitHamiltonian, tau: float) -> PhaseState:
    """Advance by tau with the explicit order-2 scheme."""
    half = 0.5 * tau
    t = state.t

    theta_half = state.theta + half * h.dh1_dptheta(state)
    s1 = PhaseState(t, theta_half, state.phi, state.p_theta, state.p_phi)

    phi_half = state.phi + half * h.dh2_dpphi(s1)
    s2 = PhaseState(t, theta_half, phi_half, state.p_theta, state.p_phi)

    g3_theta, g3_phi = h.h3_gradients(s2)
    p_phi_new = state.p_phi - tau * g3_phi
    s3 = PhaseState(t, theta_half, phi_half, state.p_theta, p_phi_new)

    p_theta_new = state.p_theta - tau * (
        g3_theta + 0.5 * h.dh2_dtheta(s2) + 0.5 * h.dh2_dtheta(s3)
    )
    s4 = PhaseState(t, theta_half, phi_half, p_theta_new, p_phi_new)

    theta_new = theta_half + half * h.dh1_dptheta(s4)
    phi_new = phi_half + half * h.dh2_dpphi(s4)
    return PhaseState(t + tau, theta_new, phi_new, p_theta_new, p_phi_new)


def sesi4_step(state: PhaseState, h: SplitHamiltonian, tau: float) -> PhaseState:
    """Advance by tau with the order-4 triple concatenation."""
    c = YoshidaCoefficients.for_step(tau)
    out = sesi2_step(sesi2_step(sesi2_step(state, h, c.tau1), h, c.tau2), h, c.tau3)
    # the sub-steps sum to tau only to round-off; pin the reported time
    return replace(out, t=state.t + tau)


def _total_gradients(state: PhaseState, h: SplitHamiltonian):
    """(dH/dq, dH/dp) as interleaved (theta, phi) arrays."""
    g3_theta, g3_phi = h.h3_gradients(state)
    n = state.n_bodies
    gq = np.empty(2 * n)
    gp = np.empty(2 * n)
    gq[0::2] = h.dh2_dtheta(state) + g3_theta
    gq[1::2] = g3_phi
    gp[0::2] = h.dh1_dptheta(state)
    gp[1::2] = h.dh2_dpphi(state)
    return gq, gp


def implicit_midpoint_step(
    state: PhaseState,
    h: SplitHamiltonian,
    tau: float,
    config: MidpointSolverConfig = MidpointSolverConfig(),
) -> PhaseState:
    """Advance by tau with the implicit midpoint rule.

    The midpoint stage (q_half, p_half) is found by plain fixed-point
    iteration started from the current state; the update is accepted once
    the max-norm change of the stage drops below the configured tolerance.
    """
    n = state.n_bodies
    q0 = np.empty(2 * n)
    p0 = np.empty(2 * n)
    q0[0::2], q0[1::2] = state.theta, state.phi
    p0[0::2], p0[1::2] = state.p_theta, state.p_phi

    q_half, p_half = q0.copy(), p0.copy()
    residual = math.inf
    for _ in range(config.max_iterations):
        mid = PhaseState(state.t, q_half[0::2], q_half[1::2], p_half[0::2], p_half[1::2])
        gq, gp = _total_gradients(mid, h)
        q_next = q0 + 0.5 * tau * gp
        p_next = p0 - 0.5 * tau * gq
        residual = max(
            float(np.max(np.abs(q_next - q_half))),
            float(np.max(np.abs(p_next - p_half))),
        )
        q_half, p_half = q_next, p_next
        if residual < config.tolerance:
            break
    else:
        raise ConvergenceError(
            f"midpoint stage did not converge in {config.max_iterations} "
            f"iterations (final residual {residual:.3e})",
            residual=residual,
        )

    mid = PhaseState(state.t, q_half[0::2], q_half[1::2], p_half[0::2], p_half[1::2])
    gq, gp = _total_gradients(mid, h)
    q1 = q_half + 0.5 * tau * gp
    p1 = p_half - 0.5 * tau * gq
    return PhaseState(state.t + tau, q1[0::2], q1[1::2], p1[0::2], p1[1::2])


# Butcher tableau of the Dormand-Prince 5(4) embedded pair (seven stages;
# the propagating solution is order 5, the error estimate order 4).
_DOPRI_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DOPRI_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DOPRI_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DOPRI_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_MIN_STEP = 1e-14
_HIT_TOL = 1e-10


def dopri45_integrate(
    state: PhaseState,
    h: SplitHamiltonian,
    t_end: float,
    config: DopriConfig = DopriConfig(),
    sample_every: float = 1.0,
) -> list[PhaseState]:
    """Integrate dz/dt = J grad H adaptively and sample on a fixed cadence.

    Steps are clipped so that sample times (and t_end) are hit exactly,
    which keeps the emitted rows bit-reproducible. The error norm is
    max(|e_i| / (abs_tol + rel_tol |z_i|)) and a step is accepted when it is
    at most 1; the step factor safety * err^(-1/5) is clipped to [0.2, 5].
    """
    if not (t_end > state.t):
        raise ValueError(f"t_end must exceed the state time, got {t_end} <= {state.t}")
    if not (sample_every > 0):
        raise ValueError("sample_every must be positive")

    n = state.n_bodies

    def rhs(t, z):
        s = PhaseState(t, z[0 : 2 * n : 2], z[1 : 2 * n : 2], z[2 * n :: 2], z[2 * n + 1 :: 2])
        gq, gp = _total_gradients(s, h)
        return np.concatenate([gp, -gq])

    t0 = state.t
    z = state.to_flat()
    t = t0
    step = min(config.initial_step, config.max_step)
    samples = [state]
    k_sample = 1

    while t < t_end - _HIT_TOL:
        next_sample = t0 + k_sample * sample_every
        target = min(next_sample, t_end)
        h_try = min(step, target - t)
        if h_try < _MIN_STEP:
            raise StiffnessError(
                f"step size underflow at t = {t:.6g} (h = {h_try:.3e})"
            )
        k = np.empty((7, z.size))
        k[0] = rhs(t, z)
        for i in range(1, 7):
            zi = z + h_try * sum(a * k[j] for j, a in enumerate(_DOPRI_A[i]) if a != 0.0)
            k[i] = rhs(t + _DOPRI_C[i] * h_try, zi)
        z5 = z + h_try * (_DOPRI_B5 @ k)
        z4 = z + h_try * (_DOPRI_B4 @ k)
        scale = config.abs_tol + config.rel_tol * np.abs(z5)
        err = float(np.max(np.abs(z5 - z4) / scale))

        if err <= 1.0:
            t = t + h_try
            z = z5
            if abs(t - target) <= _HIT_TOL:
                t = target
                sampled = PhaseState(
                    t, z[0 : 2 * n : 2], z[1 : 2 * n : 2], z[2 * n :: 2], z[2 * n + 1 :: 2]
                )
                samples.append(sampled)
                if abs(target - next_sample) <= _HIT_TOL:
                    k_sample += 1

        factor = 5.0 if err == 0.0 else min(5.0, max(0.2, config.safety * err ** (-0.2)))
        step = min(config.max_step, step * factor)
        if step < _MIN_STEP:
            raise StiffnessError(
                f"step size underflow at t = {t:.6g} (h = {step:.3e})"
            )
    return samples


_FIXED_STEPPERS = ("sesi2", "sesi4", "midpoint")


def integrate(
    state: PhaseState,
    h: SplitHamiltonian,
    method: str,
    tau: float,
    n_steps: int,
    sample_every: int = 1,
    midpoint_config: MidpointSolverConfig = MidpointSolverConfig(),
) -> list[PhaseState]:
    """Apply a fixed-step stepper n_steps times, keeping every
    sample_every-th state (the initial and final states always included).

    Sample times are pinned to t0 + k*tau exactly rather than accumulated.
    Stepper failures are re-raised with the failing step index attached.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    if method == "sesi2":
        step_fn = lambda s: sesi2_step(s, h, tau)
    elif method == "sesi4":
        step_fn = lambda s: sesi4_step(s, h, tau)
    elif method == "midpoint":
        step_fn = lambda s: implicit_midpoint_step(s, h, tau, midpoint_config)
    else:
        raise ValueError(f"unknown fixed-step method {method!r}; expected one of {_FIXED_STEPPERS}")

    t0 = state.t
    samples = [state]
    current = state
    for k in range(1, n_steps + 1):
        try:
            current = step_fn(current)
        except SimulationError as exc:
            raise type(exc)(f"step {k}: {exc}") from exc
        current = replace(current, t=t0 + k * tau)
        if k % sample_every == 0 or k == n_steps:
            samples.append(current)
    return samples
