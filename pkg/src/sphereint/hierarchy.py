"""Explicit symplectic stepping for hierarchically structured kinetic terms.

The sphere scheme generalizes: whenever the kinetic energy splits as
K = sum_i K_i(q_1, ..., q_{i-1}, p_i) (each term reads one momentum and only
lower-indexed coordinates) plus a potential V(q), an explicit second-order
time-reversible symplectic step exists:

  1. ascending i, drift q_i by tau/2 using dK_i/dp_i at the already-updated
     prefix coordinates and the old p_i;
  2. half-kick all momenta with forces evaluated at the half-step
     coordinates and the old momenta;
  3. mirrored half-kick, descending i, with forces at the half-step
     coordinates and the already-final higher-index momenta (dH/dq_i can
     only involve p_k with k > i, so the sweep stays explicit);
  4. drift all q_i by tau/2 at the frozen half-step coordinates with the
     new momenta.

Flat states are vectors (q_1..q_d, p_1..p_d). For N bodies on the sphere
the coordinates interleave per body (theta_1, phi_1, theta_2, ...), under
which the two kinetic terms of each body are hierarchical and the step
reproduces the dedicated sphere stepper instruction for instruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SingularityError, StructureError
from .hamiltonian import SphereNBodyHamiltonian
from .integrators import YoshidaCoefficients
from .phase import PhaseState, SIN_THETA_GUARD


@dataclass(frozen=True)
class KineticTerm:
    """One kinetic term: reads p at its own position and the declared
    coordinate dependencies (validated, not trusted).

    value/d_p take the full (q, p) arrays; d_q returns the partials with
    respect to the declared q_deps, in declaration order (None when the
    term has no coordinate dependencies).
    """

    q_deps: tuple[int, ...]
    value: Callable[[np.ndarray, np.ndarray], float]
    d_p: Callable[[np.ndarray, np.ndarray], float]
    d_q: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class PotentialTerm:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HierarchicalHamiltonian:
    kinetic_terms: tuple[KineticTerm, ...]
    potential: PotentialTerm

    @property
    def dimension(self) -> int:
        return len(self.kinetic_terms)

    def value(self, z: np.ndarray) -> float:
        d = self.dimension
        q, p = z[:d], z[d:]
        total = self.potential.value(q)
        for term in self.kinetic_terms:
            total += term.value(q, p)
        return total


@dataclass(frozen=True)
class HierarchyViolation:
    """Which term (1-based) illegally depends on which variable."""

    term: int
    variable: str
    detail: str


def _structural_violation(h: HierarchicalHamiltonian) -> HierarchyViolation | None:
    for i, term in enumerate(h.kinetic_terms):
        for j in term.q_deps:
            if not (0 <= j < i):
                return HierarchyViolation(
                    i + 1, f"q{j + 1}",
                    "declared coordinate dependency must have a lower index",
                )
    return None


def validate_hierarchy(
    h: HierarchicalHamiltonian, probes: int, seed: int = 0
) -> HierarchyViolation | None:
    """Audit the declared dependency structure by random perturbation.

    For each probe state and each term, every excluded variable (any
    coordinate outside the declared q_deps, any momentum other than the
    term's own) is bumped and the value must stay bit-identical. Diagnostic
    only; returns the first violation found or None.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    violation = _structural_violation(h)
    if violation is not None:
        return violation

    d = h.dimension
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        q = rng.uniform(-3.0, 3.0, d)
        p = rng.uniform(-2.0, 2.0, d)
        for i, term in enumerate(h.kinetic_terms):
            base = term.value(q, p)
            deps = set(term.q_deps)
            for j in range(d):
                if j in deps:
                    continue
                q_bumped = q.copy()
                q_bumped[j] += rng.uniform(0.5, 1.5)
                if term.value(q_bumped, p) != base:
                    return HierarchyViolation(
                        i + 1, f"q{j + 1}", "undeclared coordinate dependency"
                    )
            for j in range(d):
                if j == i:
                    continue
                p_bumped = p.copy()
                p_bumped[j] += rng.uniform(0.5, 1.5)
                if term.value(q, p_bumped) != base:
                    return HierarchyViolation(
                        i + 1, f"p{j + 1}", "dependency on a foreign momentum"
                    )
    return None


def _require_structure(h: HierarchicalHamiltonian) -> None:
    violation = _structural_violation(h)
    if violation is not None:
        raise StructureError(
            f"kinetic term {violation.term} depends on {violation.variable}: "
            f"{violation.detail}"
        )


def _kinetic_q_grad(h: HierarchicalHamiltonian, q, p) -> np.ndarray:
    out = np.zeros(h.dimension)
    for term in h.kinetic_terms:
        if term.q_deps:
            dq = term.d_q(q, p)
            for pos, j in enumerate(term.q_deps):
                out[j] += dq[pos]
    return out


def hierarchical_step2(
    z: np.ndarray, h: HierarchicalHamiltonian, tau: float
) -> np.ndarray:
    """Advance a flat (q, p) state by tau with the order-2 scheme."""
    _require_structure(h)
    d = h.dimension
    z = np.asarray(z, dtype=float)
    if z.shape != (2 * d,):
        raise ValueError(f"flat state must have shape ({2 * d},), got {z.shape}")
    half = 0.5 * tau
    q = z[:d].copy()
    p_old = z[d:].copy()

    for i, term in enumerate(h.kinetic_terms):
        q[i] = q[i] + half * term.d_p(q, p_old)

    grad_v = np.asarray(h.potential.gradient(q), dtype=float)
    p_mid = p_old - half * (grad_v + _kinetic_q_grad(h, q, p_old))

    consumers: list[list[tuple[KineticTerm, int]]] = [[] for _ in range(d)]
    for term in h.kinetic_terms:
        for pos, j in enumerate(term.q_deps):
            consumers[j].append((term, pos))

    p_new = p_mid.copy()
    for i in reversed(range(d)):
        force = grad_v[i]
        for term, pos in consumers[i]:
            force += term.d_q(q, p_new)[pos]
        p_new[i] = p_mid[i] - half * force

    drift = np.array([term.d_p(q, p_new) for term in h.kinetic_terms])
    q_new = q + half * drift
    return np.concatenate([q_new, p_new])


def hierarchical_step4(
    z: np.ndarray, h: HierarchicalHamiltonian, tau: float
) -> np.ndarray:
    """Order-4 triple concatenation of the order-2 step."""
    c = YoshidaCoefficients.for_step(tau)
    out = hierarchical_step2(z, h, c.tau1)
    out = hierarchical_step2(out, h, c.tau2)
    return hierarchical_step2(out, h, c.tau3)


def _guarded_sin(x: float) -> float:
    s = math.sin(x)
    if abs(s) < SIN_THETA_GUARD:
        raise SingularityError(f"|sin(theta)| = {abs(s):.3e} below pole guard")
    return s


def sphere_hierarchical(
    hamiltonian: SphereNBodyHamiltonian,
) -> HierarchicalHamiltonian:
    """Declare the sphere Hamiltonian in hierarchical form.

    Per body b the flat layout holds theta at index 2b and phi at 2b + 1;
    the polar kinetic term reads no coordinates and the azimuthal one reads
    only its body's theta, so the hierarchy holds with per-body
    interleaving.
    """
    params = hamiltonian.params
    m = params.mass
    terms: list[KineticTerm] = []
    for b in range(params.n_bodies):
        i_theta, i_phi = 2 * b, 2 * b + 1

        terms.append(
            KineticTerm(
                q_deps=(),
                value=lambda q, p, i=i_theta: p[i] ** 2 / (2.0 * m),
                d_p=lambda q, p, i=i_theta: p[i] / m,
            )
        )

        def value(q, p, i=i_phi, j=i_theta):
            s = _guarded_sin(q[j])
            return (p[i] / s) ** 2 / (2.0 * m)

        def d_p(q, p, i=i_phi, j=i_theta):
            s = _guarded_sin(q[j])
            return p[i] / (m * s * s)

        def d_q(q, p, i=i_phi, j=i_theta):
            s = _guarded_sin(q[j])
            return np.array([-(p[i] ** 2) * math.cos(q[j]) / (m * s**3)])

        terms.append(KineticTerm(q_deps=(i_theta,), value=value, d_p=d_p, d_q=d_q))

    def _coord_state(q):
        n = params.n_bodies
        return PhaseState(0.0, q[0::2], q[1::2], np.zeros(n), np.zeros(n))

    def v_value(q):
        return hamiltonian.h3(_coord_state(q))

    def v_gradient(q):
        g_theta, g_phi = hamiltonian.h3_gradients(_coord_state(q))
        out = np.empty(2 * params.n_bodies)
        out[0::2] = g_theta
        out[1::2] = g_phi
        return out

    return HierarchicalHamiltonian(
        kinetic_terms=tuple(terms),
        potential=PotentialTerm(value=v_value, gradient=v_gradient),
    )
