"""Phase-space state types for N bodies in spherical canonical coordinates.

A body carries colatitude theta, azimuth phi and their conjugate momenta.
Azimuths are stored unwrapped (they may accumulate beyond 2*pi); all
trigonometric evaluations are wrap-insensitive, and unwrapped angles keep
max-norm state comparisons meaningful across many revolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# States with |sin(theta)| below this are rejected before any kinetic
# evaluation: the metric factor 1/sin(theta)^2 diverges at the poles.
SIN_THETA_GUARD = 1e-8


@dataclass(frozen=True)
class SphereParams:
    """Static problem parameters: body count, mass, sphere radius and the
    equilibrium colatitude of the pair interaction."""

    n_bodies: int
    mass: float = 1.0
    radius: float = 1.0
    theta0: float = math.pi / 4

    def __post_init__(self):
        if self.n_bodies < 1:
            raise ValueError(f"n_bodies must be >= 1, got {self.n_bodies}")
        if not (self.mass > 0):
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not (self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not (0.0 < self.theta0 < math.pi):
            raise ValueError(f"theta0 must lie in (0, pi), got {self.theta0}")


@dataclass(frozen=True)
class BodyState:
    theta: float
    phi: float
    p_theta: float
    p_phi: float


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhaseState:
    """Immutable snapshot of all canonical coordinates at one time.

    Component arrays all have shape (n_bodies,). Instances are value data:
    construction copies the inputs and the arrays are read-only, so states
    can be shared freely across threads.
    """

    t: float
    theta: np.ndarray
    phi: np.ndarray
    p_theta: np.ndarray
    p_phi: np.ndarray

    def __post_init__(self):
        for name in ("theta", "phi", "p_theta", "p_phi"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        n = self.theta.shape[0]
        if any(getattr(self, name).shape[0] != n for name in ("phi", "p_theta", "p_phi")):
            raise ValueError("component arrays must have equal length")

    @property
    def n_bodies(self) -> int:
        return self.theta.shape[0]

    @property
    def bodies(self) -> tuple[BodyState, ...]:
        return tuple(
            BodyState(self.theta[i], self.phi[i], self.p_theta[i], self.p_phi[i])
            for i in range(self.n_bodies)
        )

    @classmethod
    def from_bodies(cls, t, bodies) -> "PhaseState":
        bodies = tuple(bodies)
        return cls(
            t,
            [b.theta for b in bodies],
            [b.phi for b in bodies],
            [b.p_theta for b in bodies],
            [b.p_phi for b in bodies],
        )

    def to_flat(self) -> np.ndarray:
        """Flatten to (q, p) with per-body interleaving.

        Layout: q = (theta_1, phi_1, theta_2, phi_2, ...), then p in the same
        order. This is the total order consumed by the hierarchical stepper
        and by the canonical structure matrix below.
        """
        n = self.n_bodies
        q = np.empty(2 * n)
        p = np.empty(2 * n)
        q[0::2] = self.theta
        q[1::2] = self.phi
        p[0::2] = self.p_theta
        p[1::2] = self.p_phi
        return np.concatenate([q, p])

    @classmethod
    def from_flat(cls, t, z) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or z.size % 4 != 0:
            raise ValueError(f"flat state length must be a multiple of 4, got {z.size}")
        d = z.size // 2
        q, p = z[:d], z[d:]
        return cls(t, q[0::2], q[1::2], p[0::2], p[1::2])


@dataclass(frozen=True)
class StateViolation:
    """First problem found by validate_state: which body, which field, why."""

    body: int
    field: str
    detail: str


def state_distance(a: PhaseState, b: PhaseState) -> float:
    """Max-norm over all 4N canonical components of a - b.

    Azimuths are compared unwrapped. Time is not part of the metric.
    """
    if a.n_bodies != b.n_bodies:
        raise ValueError(
            f"body count mismatch: {a.n_bodies} vs {b.n_bodies}"
        )
    return max(
        float(np.max(np.abs(a.theta - b.theta))),
        float(np.max(np.abs(a.phi - b.phi))),
        float(np.max(np.abs(a.p_theta - b.p_theta))),
        float(np.max(np.abs(a.p_phi - b.p_phi))),
    )


def validate_state(state: PhaseState, params: SphereParams) -> StateViolation | None:
    """Check pole clearance and finiteness; None when everything is fine.

    Diagnostic only: never raises. A passing state guarantees every kinetic
    evaluation is finite.
    """
    if state.n_bodies != params.n_bodies:
        return StateViolation(-1, "bodies", (
            f"state has {state.n_bodies} bodies, params expect {params.n_bodies}"
        ))
    fields = ("theta", "phi", "p_theta", "p_phi")
    for i in range(state.n_bodies):
        for name in fields:
            v = getattr(state, name)[i]
            if not np.isfinite(v):
                return StateViolation(i, name, f"non-finite value {v!r}")
        if abs(math.sin(state.theta[i])) < SIN_THETA_GUARD:
            return StateViolation(
                i, "theta",
                f"|sin(theta)| = {abs(math.sin(state.theta[i])):.3e} "
                f"below pole guard {SIN_THETA_GUARD:.0e}",
            )
    return None


def canonical_structure_matrix(dimension: int) -> np.ndarray:
    """Block matrix [[0, I], [-I, 0]] acting on flat (q, p) states of the
    given coordinate dimension (half the phase-space dimension)."""
    j = np.zeros((2 * dimension, 2 * dimension))
    j[:dimension, dimension:] = np.eye(dimension)
    j[dimension:, :dimension] = -np.eye(dimension)
    return j
