"""Split Hamiltonian H = H1(p_theta) + H2(theta, p_phi) + H3(theta, phi).

H1 and H2 make up the kinetic energy on the sphere; the metric factor
1/sin(theta)^2 inside H2 couples a coordinate to a momentum, so the total is
not separable in the classic kinetic-plus-potential sense. The split above
is still enough structure for the explicit steppers in
:mod:`sphereint.integrators`.

The concrete N-body realization uses a pairwise interaction that vanishes
when the chord factor of a pair equals sin(theta0) and diverges as bodies
approach coincidence. The interaction enters the Hamiltonian through the
ordered double sum over pairs, i.e. every unordered pair is counted twice;
this is the normalization under which the packaged benchmark trajectory
closes into its six-petal shape.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError
from .phase import BodyState, PhaseState, SIN_THETA_GUARD, SphereParams, validate_state

# Arguments of sqrt/asin are clamped into their domain by at most this much
# before evaluation; symmetric configurations otherwise produce NaN from
# round-off.
DOMAIN_CLAMP = 1e-12

# Each unordered pair appears twice in the interaction sum (ordered pairs).
PAIR_SUM_WEIGHT = 2.0

# Pair-force cusp guard: the interaction has a square-root branch point where
# the chord factor reaches 1; gradients are rejected this close to it.
_CUSP_GUARD = 1e-12


class SplitHamiltonian(abc.ABC):
    """Evaluator bundle for the three split terms and their five partials.

    All evaluators take a full :class:`PhaseState` and each reads only the
    variables its term depends on, so callers may pass states whose other
    components are placeholders.
    """

    def __init__(self, params: SphereParams):
        self.params = params

    @abc.abstractmethod
    def h1(self, state: PhaseState) -> float:
        """Polar kinetic term; a function of p_theta only."""

    @abc.abstractmethod
    def h2(self, state: PhaseState) -> float:
        """Azimuthal kinetic term; a function of theta and p_phi only."""

    @abc.abstractmethod
    def h3(self, state: PhaseState) -> float:
        """Interaction term; a function of theta and phi only."""

    @abc.abstractmethod
    def dh1_dptheta(self, state: PhaseState) -> np.ndarray:
        ...

    @abc.abstractmethod
    def dh2_dpphi(self, state: PhaseState) -> np.ndarray:
        ...

    @abc.abstractmethod
    def dh2_dtheta(self, state: PhaseState) -> np.ndarray:
        ...

    @abc.abstractmethod
    def dh3_dtheta(self, state: PhaseState) -> np.ndarray:
        ...

    @abc.abstractmethod
    def dh3_dphi(self, state: PhaseState) -> np.ndarray:
        ...

    def h3_gradients(self, state: PhaseState) -> tuple[np.ndarray, np.ndarray]:
        """(dH3/dtheta, dH3/dphi) in one call; override when a single pass
        over the pair list can produce both."""
        return self.dh3_dtheta(state), self.dh3_dphi(state)

    def value(self, state: PhaseState) -> float:
        return self.h1(state) + self.h2(state) + self.h3(state)


@dataclass(frozen=True)
class Partials:
    """The five derivative families consumed by the steppers."""

    dh1_dptheta: np.ndarray
    dh2_dpphi: np.ndarray
    dh2_dtheta: np.ndarray
    dh3_dtheta: np.ndarray
    dh3_dphi: np.ndarray


def _embed(theta, phi, radius):
    """Cartesian positions, shape (3, N)."""
    st = np.sin(theta)
    return radius * np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def geodesic_distance(a: BodyState, b: BodyState, radius: float) -> float:
    """Great-circle distance between two bodies on the sphere of the given
    radius, computed from the chord of the embedded points."""
    ra = _embed(np.array([a.theta]), np.array([a.phi]), radius)[:, 0]
    rb = _embed(np.array([b.theta]), np.array([b.phi]), radius)[:, 0]
    chord = math.sqrt(float(np.sum((ra - rb) ** 2)))
    arg = chord / (2.0 * radius)
    arg = min(max(arg, -1.0), 1.0)
    return 2.0 * radius * math.asin(arg)


def pair_potential(distance: float, params: SphereParams) -> float:
    """Interaction energy of a single pair at the given geodesic separation.

    The chord factor x = 2 sin(distance / 2R) / sqrt(3) is clamped to (0, 1]
    (tolerance DOMAIN_CLAMP) before the square root; separations at or below
    zero, or with x beyond the clamp band, are outside the domain.
    """
    if distance <= 0.0:
        raise DomainError(
            f"pair separation must be positive, got {distance!r}"
        )
    x = 2.0 * math.sin(distance / (2.0 * params.radius)) / math.sqrt(3.0)
    if x > 1.0 + DOMAIN_CLAMP:
        raise DomainError(
            f"chord factor {x!r} exceeds 1 beyond clamp tolerance"
        )
    x = min(x, 1.0)
    if x <= 0.0:
        raise DomainError(
            f"chord factor {x!r} is not positive (coincident bodies)"
        )
    c = math.sqrt(1.0 - x * x)
    g = (c - math.cos(params.theta0)) / x
    return g * g


class SphereNBodyHamiltonian(SplitHamiltonian):
    """N bodies of equal mass on a sphere with the pairwise interaction above.

    H1 = sum_i p_theta_i^2 / 2m
    H2 = sum_i (p_phi_i / sin theta_i)^2 / 2m
    H3 = ordered pair sum of the interaction (each unordered pair twice)
    """

    def __init__(self, params: SphereParams):
        super().__init__(params)
        n = params.n_bodies
        self._ii, self._jj = np.triu_indices(n, 1)
        self._psi0 = math.cos(params.theta0)

    # -- kinetic helpers ---------------------------------------------------

    def _guarded_sin(self, theta: np.ndarray) -> np.ndarray:
        st = np.sin(theta)
        bad = np.abs(st) < SIN_THETA_GUARD
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SingularityError(
                f"body {i} too close to a pole: |sin(theta)| = {abs(st[i]):.3e}"
            )
        return st

    def h1(self, state: PhaseState) -> float:
        return float(np.sum(state.p_theta**2)) / (2.0 * self.params.mass)

    def h2(self, state: PhaseState) -> float:
        st = self._guarded_sin(state.theta)
        return float(np.sum((state.p_phi / st) ** 2)) / (2.0 * self.params.mass)

    def dh1_dptheta(self, state: PhaseState) -> np.ndarray:
        return state.p_theta / self.params.mass

    def dh2_dpphi(self, state: PhaseState) -> np.ndarray:
        st = self._guarded_sin(state.theta)
        return state.p_phi / (self.params.mass * st * st)

    def dh2_dtheta(self, state: PhaseState) -> np.ndarray:
        st = self._guarded_sin(state.theta)
        return -(state.p_phi**2) * np.cos(state.theta) / (self.params.mass * st**3)

    # -- interaction -------------------------------------------------------

    def _pair_chord_sq(self, state: PhaseState) -> np.ndarray:
        """Squared chord factor u = x^2 per unordered pair.

        u = 2 (1 - cos(gamma)) / 3 with gamma the central angle; independent
        of the sphere radius.
        """
        ii, jj = self._ii, self._jj
        st, ct = np.sin(state.theta), np.cos(state.theta)
        cos_gamma = (
            st[ii] * st[jj] * np.cos(state.phi[ii] - state.phi[jj])
            + ct[ii] * ct[jj]
        )
        u = 2.0 * (1.0 - cos_gamma) / 3.0
        if np.any(u <= 0.0):
            k = int(np.argmax(u <= 0.0))
            raise DomainError(
                f"bodies {ii[k]} and {jj[k]} are coincident"
            )
        if np.any(u > 1.0 + DOMAIN_CLAMP):
            k = int(np.argmax(u > 1.0 + DOMAIN_CLAMP))
            raise DomainError(
                f"pair ({ii[k]}, {jj[k]}) chord factor exceeds the domain"
            )
        return np.minimum(u, 1.0)

    def h3(self, state: PhaseState) -> float:
        if self.params.n_bodies < 2:
            return 0.0
        u = self._pair_chord_sq(state)
        c = np.sqrt(1.0 - u)
        return PAIR_SUM_WEIGHT * float(np.sum((c - self._psi0) ** 2 / u))

    def h3_gradients(self, state: PhaseState) -> tuple[np.ndarray, np.ndarray]:
        n = self.params.n_bodies
        if n < 2:
            z = np.zeros(n)
            return z, z.copy()
        ii, jj = self._ii, self._jj
        st, ct = np.sin(state.theta), np.cos(state.theta)
        dphi = state.phi[ii] - state.phi[jj]
        cos_dphi, sin_dphi = np.cos(dphi), np.sin(dphi)
        cos_gamma = st[ii] * st[jj] * cos_dphi + ct[ii] * ct[jj]
        u = 2.0 * (1.0 - cos_gamma) / 3.0
        if np.any(u <= 0.0):
            k = int(np.argmax(u <= 0.0))
            raise DomainError(f"bodies {ii[k]} and {jj[k]} are coincident")
        if np.any(u > 1.0 + DOMAIN_CLAMP):
            k = int(np.argmax(u > 1.0 + DOMAIN_CLAMP))
            raise DomainError(f"pair ({ii[k]}, {jj[k]}) chord factor exceeds the domain")
        u = np.minimum(u, 1.0)
        c = np.sqrt(1.0 - u)
        if np.any(c < _CUSP_GUARD):
            k = int(np.argmax(c < _CUSP_GUARD))
            raise DomainError(
                f"pair ({ii[k]}, {jj[k]}) sits on the interaction cusp; "
                "the pair force diverges there"
            )
        # dV/du for V = (c - psi0)^2 / u, c = sqrt(1 - u)
        dv_du = (c - self._psi0) * (self._psi0 * c - 1.0) / (c * u * u)
        w = PAIR_SUM_WEIGHT * dv_du * (-2.0 / 3.0)  # chain through u(cos gamma)
        dcos_dth_i = ct[ii] * st[jj] * cos_dphi - st[ii] * ct[jj]
        dcos_dth_j = st[ii] * ct[jj] * cos_dphi - ct[ii] * st[jj]
        dcos_dph_i = -st[ii] * st[jj] * sin_dphi
        g_theta = np.zeros(n)
        g_phi = np.zeros(n)
        np.add.at(g_theta, ii, w * dcos_dth_i)
        np.add.at(g_theta, jj, w * dcos_dth_j)
        # the azimuthal pair force is exactly antisymmetric, so the total
        # azimuthal momentum kick cancels to round-off
        np.add.at(g_phi, ii, w * dcos_dph_i)
        np.add.at(g_phi, jj, -(w * dcos_dph_i))
        return g_theta, g_phi

    def dh3_dtheta(self, state: PhaseState) -> np.ndarray:
        return self.h3_gradients(state)[0]

    def dh3_dphi(self, state: PhaseState) -> np.ndarray:
        return self.h3_gradients(state)[1]


def _require_valid(state: PhaseState, h: SplitHamiltonian) -> None:
    violation = validate_state(state, h.params)
    if violation is not None:
        if violation.field == "theta" and "pole guard" in violation.detail:
            raise SingularityError(
                f"body {violation.body}: {violation.detail}"
            )
        raise ValueError(
            f"invalid state at body {violation.body}, field {violation.field}: "
            f"{violation.detail}"
        )


def total_energy(state: PhaseState, h: SplitHamiltonian) -> float:
    """H1 + H2 + H3 for a validated state."""
    _require_valid(state, h)
    return h.value(state)


def partials(state: PhaseState, h: SplitHamiltonian) -> Partials:
    """All five derivative families at a validated state."""
    _require_valid(state, h)
    g_theta, g_phi = h.h3_gradients(state)
    return Partials(
        dh1_dptheta=h.dh1_dptheta(state),
        dh2_dpphi=h.dh2_dpphi(state),
        dh2_dtheta=h.dh2_dtheta(state),
        dh3_dtheta=g_theta,
        dh3_dphi=g_phi,
    )
