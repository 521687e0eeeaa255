"""Conserved-quantity monitors and trajectory post-processing.

Energy deviation and embedded angular momentum along sampled trajectories,
the XY-plane projection of each body, and the fixed-final-time convergence
study used to measure a stepper's order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, SimulationError, SingularityError
from .hamiltonian import SplitHamiltonian, _require_valid
from .integrators import MidpointSolverConfig, integrate
from .phase import PhaseState, SIN_THETA_GUARD, SphereParams, state_distance


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    energy: float
    delta_e: float
    l_vec: tuple[float, float, float]
    bodies_xy: tuple[tuple[float, float], ...]


def angular_momentum(state: PhaseState, params: SphereParams) -> np.ndarray:
    """Total angular momentum sum_i m r_i x v_i in the embedding frame.

    Velocities follow from the canonical relations theta_dot = p_theta / m
    and phi_dot = p_phi / (m sin^2 theta). The z component reduces
    algebraically to R^2 sum_i p_phi_i.
    """
    m, r = params.mass, params.radius
    st, ct = np.sin(state.theta), np.cos(state.theta)
    if np.any(np.abs(st) < SIN_THETA_GUARD):
        i = int(np.argmax(np.abs(st) < SIN_THETA_GUARD))
        raise SingularityError(f"body {i} too close to a pole")
    sp, cp = np.sin(state.phi), np.cos(state.phi)
    theta_dot = state.p_theta / m
    # phi_dot enters only through phi_dot * sin^2(theta) = p_phi / m
    phi_dot_st2 = state.p_phi / m
    lx = m * r * r * np.sum(-theta_dot * sp - phi_dot_st2 * ct / st * cp)
    ly = m * r * r * np.sum(theta_dot * cp - phi_dot_st2 * ct / st * sp)
    lz = m * r * r * np.sum(phi_dot_st2)
    return np.array([lx, ly, lz])


def xy_projection(state: PhaseState, params: SphereParams) -> np.ndarray:
    """Per-body (x, y) of the embedded positions, shape (N, 2)."""
    st = np.sin(state.theta)
    return params.radius * np.stack(
        [st * np.cos(state.phi), st * np.sin(state.phi)], axis=1
    )


def diagnose_trajectory(
    samples: Sequence[PhaseState], h: SplitHamiltonian
) -> list[DiagnosticsRow]:
    """One row per sample; the energy deviation is referenced to the first
    sample. Evaluation failures are re-raised with the sample index."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    rows = []
    e0 = None
    for idx, s in enumerate(samples):
        try:
            _require_valid(s, h)
            e = h.value(s)
            l_vec = angular_momentum(s, h.params)
            xy = xy_projection(s, h.params)
        except SimulationError as exc:
            raise type(exc)(f"sample {idx}: {exc}") from exc
        if e0 is None:
            e0 = e
        rows.append(
            DiagnosticsRow(
                t=s.t,
                energy=e,
                delta_e=e - e0,
                l_vec=(float(l_vec[0]), float(l_vec[1]), float(l_vec[2])),
                bodies_xy=tuple((float(x), float(y)) for x, y in xy),
            )
        )
    return rows


@dataclass(frozen=True)
class ConvergenceResult:
    """Per-pair final-state differences and the fitted log-log slope."""

    pairs: tuple[tuple[float, float], ...]  # (tau_i, diff between tau_i and tau_{i+1})
    slope: float  # nan when some difference vanishes


StateBuilder = Callable[[], tuple[PhaseState, SplitHamiltonian]]


def convergence_study(
    builder: StateBuilder,
    method: str,
    taus: Sequence[float],
    t_final: float,
    midpoint_config: MidpointSolverConfig = MidpointSolverConfig(),
) -> ConvergenceResult:
    """Integrate to a fixed final time with each step size and compare the
    final canonical states of runs with neighbouring step sizes.

    The slope is an ordinary least-squares fit of log(diff) against
    log(tau_i) over consecutive pairs; 2.0 and 4.0 are the expected values
    for the order-2 and order-4 steppers.
    """
    taus = [float(t) for t in taus]
    if len(taus) < 3:
        raise ConfigError(f"need at least 3 step sizes, got {len(taus)}")
    if any(t2 >= t1 for t1, t2 in zip(taus, taus[1:])):
        raise ConfigError("step sizes must be strictly decreasing")
    if not (t_final > 0):
        raise ConfigError("t_final must be positive")

    finals = []
    for tau in taus:
        n = round(t_final / tau)
        if n < 1 or abs(n * tau - t_final) > 1e-9 * max(1.0, abs(t_final)):
            raise ConfigError(
                f"step size {tau} does not divide t_final = {t_final}"
            )
        state, hamiltonian = builder()
        samples = integrate(
            state, hamiltonian, method, tau, n,
            sample_every=n, midpoint_config=midpoint_config,
        )
        finals.append(samples[-1])

    pairs = []
    for tau, a, b in zip(taus, finals, finals[1:]):
        pairs.append((tau, state_distance(a, b)))

    if any(d == 0.0 for _, d in pairs):
        slope = math.nan
    else:
        log_tau = np.log([tau for tau, _ in pairs])
        log_diff = np.log([d for _, d in pairs])
        slope = float(np.polyfit(log_tau, log_diff, 1)[0])
    return ConvergenceResult(pairs=tuple(pairs), slope=slope)
