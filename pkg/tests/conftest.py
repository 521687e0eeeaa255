import math

import numpy as np
import pytest

from sphereint import (
    PhaseState,
    SphereNBodyHamiltonian,
    SphereParams,
    build_benchmark_initial_state,
    symmetric_state,
)


@pytest.fixture(scope="session")
def benchmark_params():
    return SphereParams(n_bodies=3)


@pytest.fixture(scope="session")
def benchmark_hamiltonian(benchmark_params):
    return SphereNBodyHamiltonian(benchmark_params)


@pytest.fixture(scope="session")
def benchmark(benchmark_params):
    """(initial state, oracle params) of the closed-trajectory scenario."""
    return build_benchmark_initial_state(benchmark_params)


@pytest.fixture(scope="session")
def equilibrium_state(benchmark_params):
    return symmetric_state(0.0, benchmark_params.theta0, 0.0, 0.0)


def pair_chord_sq(state):
    """Squared pair chord factors, same geometry the interaction uses."""
    n = state.n_bodies
    ii, jj = np.triu_indices(n, 1)
    st, ct = np.sin(state.theta), np.cos(state.theta)
    cos_gamma = st[ii] * st[jj] * np.cos(state.phi[ii] - state.phi[jj]) + ct[ii] * ct[jj]
    return 2.0 * (1.0 - cos_gamma) / 3.0


def random_state(rng, n_bodies=3, t=0.0, momentum=0.3, u_window=(0.05, 0.9)):
    """Non-singular random state: clear of the poles and of both ends of the
    pair-interaction domain (coincidence and the square-root cusp)."""
    for _ in range(500):
        theta = rng.uniform(0.5, math.pi - 0.5, n_bodies)
        phi = rng.uniform(0.0, 2.0 * math.pi, n_bodies)
        p_theta = rng.uniform(-momentum, momentum, n_bodies)
        p_phi = rng.uniform(-momentum, momentum, n_bodies)
        state = PhaseState(t, theta, phi, p_theta, p_phi)
        if n_bodies == 1:
            return state
        u = pair_chord_sq(state)
        if np.all(u > u_window[0]) and np.all(u < u_window[1]):
            return state
    raise RuntimeError("could not draw a non-singular state")


def fd_jacobian(step, state, h=1e-6):
    """Central finite-difference Jacobian of a PhaseState map, in the flat
    (q, p) interleaved layout."""
    z0 = state.to_flat()
    n = z0.size
    jac = np.empty((n, n))
    for j in range(n):
        zp = z0.copy()
        zp[j] += h
        zm = z0.copy()
        zm[j] -= h
        fp = step(PhaseState.from_flat(state.t, zp)).to_flat()
        fm = step(PhaseState.from_flat(state.t, zm)).to_flat()
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def fd_jacobian_flat(step, z0, h=1e-6):
    """Same, for maps acting directly on flat vectors."""
    n = z0.size
    jac = np.empty((n, n))
    for j in range(n):
        zp = z0.copy()
        zp[j] += h
        zm = z0.copy()
        zm[j] -= h
        jac[:, j] = (step(zp) - step(zm)) / (2.0 * h)
    return jac


def embedding_energy(state, params):
    """Independent energy evaluation: embed the bodies, take chords, convert
    to geodesic separations and sum the interaction over ordered pairs.

    Deliberately avoids the package's pair-geometry code path.
    """
    m, r = params.mass, params.radius
    st = np.sin(state.theta)
    kinetic = float(np.sum(state.p_theta**2 + (state.p_phi / st) ** 2)) / (2.0 * m)
    pos = r * np.stack(
        [st * np.cos(state.phi), st * np.sin(state.phi), np.cos(state.theta)], axis=1
    )
    potential = 0.0
    n = state.n_bodies
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            chord = math.sqrt(float(np.sum((pos[i] - pos[j]) ** 2)))
            geodesic = 2.0 * r * math.asin(min(1.0, chord / (2.0 * r)))
            x = min(1.0, 2.0 * math.sin(geodesic / (2.0 * r)) / math.sqrt(3.0))
            c = math.sqrt(1.0 - x * x)
            potential += ((c - math.cos(params.theta0)) / x) ** 2
    return kinetic + potential
