import math

import numpy as np
import pytest

from sphereint import (
    PhaseState,
    SphereNBodyHamiltonian,
    SphereParams,
    canonical_structure_matrix,
    state_distance,
    validate_state,
)

from conftest import random_state


def single(theta=1.0, phi=0.0, p_theta=0.0, p_phi=0.0):
    return PhaseState(0.0, [theta], [phi], [p_theta], [p_phi])


class TestSphereParams:
    def test_defaults(self):
        p = SphereParams(n_bodies=3)
        assert p.mass == 1.0 and p.radius == 1.0
        assert p.theta0 == math.pi / 4

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_bodies": 0},
            {"n_bodies": 2, "mass": 0.0},
            {"n_bodies": 2, "mass": -1.0},
            {"n_bodies": 2, "radius": 0.0},
            {"n_bodies": 2, "theta0": 0.0},
            {"n_bodies": 2, "theta0": math.pi},
        ],
    )
    def test_invariants(self, kwargs):
        with pytest.raises(ValueError):
            SphereParams(**kwargs)


class TestPhaseState:
    def test_arrays_are_read_only_copies(self):
        theta = np.array([1.0, 2.0])
        s = PhaseState(0.0, theta, [0.0, 1.0], [0.0, 0.0], [0.0, 0.0])
        theta[0] = 99.0
        assert s.theta[0] == 1.0
        with pytest.raises(ValueError):
            s.theta[0] = 5.0

    def test_bodies_round_trip(self):
        s = PhaseState(1.5, [1.0, 2.0], [0.1, 0.2], [0.3, 0.4], [0.5, 0.6])
        again = PhaseState.from_bodies(s.t, s.bodies)
        assert state_distance(s, again) == 0.0
        assert again.t == 1.5

    def test_flat_round_trip(self):
        s = PhaseState(2.0, [1.0, 2.0, 3.0], [4.0, 5.0, 6.0],
                       [7.0, 8.0, 9.0], [10.0, 11.0, 12.0])
        z = s.to_flat()
        # per-body interleaving: q then p
        assert list(z[:6]) == [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]
        assert list(z[6:]) == [7.0, 10.0, 8.0, 11.0, 9.0, 12.0]
        back = PhaseState.from_flat(s.t, z)
        assert state_distance(s, back) == 0.0

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            PhaseState(0.0, [1.0, 2.0], [0.0], [0.0, 0.0], [0.0, 0.0])


class TestStateDistance:
    def test_identity(self):
        s = single()
        assert state_distance(s, s) == 0.0

    def test_single_component(self):
        a = single(theta=1.0)
        b = single(theta=1.5)
        assert state_distance(a, b) == 0.5

    def test_max_over_bodies(self):
        a = PhaseState(0.0, [1.0, 1.2], [0.0, 0.0], [0.0, 0.0], [0.1, 0.2])
        b = PhaseState(0.0, [1.1, 1.2], [0.0, 0.0], [0.0, 0.0], [0.1, -0.1])
        assert state_distance(a, b) == pytest.approx(0.3, abs=1e-15)

    def test_mismatched_counts(self):
        a = single()
        b = PhaseState(0.0, [1.0, 1.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
        with pytest.raises(ValueError):
            state_distance(a, b)

    def test_unwrapped_phi(self):
        a = single(phi=0.0)
        b = single(phi=2.0 * math.pi)
        assert state_distance(a, b) == pytest.approx(2.0 * math.pi)

    def test_metric_properties(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = random_state(rng)
            b = random_state(rng)
            c = random_state(rng)
            dab = state_distance(a, b)
            assert dab >= 0.0
            assert dab == state_distance(b, a)
            assert state_distance(a, c) <= dab + state_distance(b, c) + 1e-15
        s = random_state(rng)
        assert state_distance(s, s) == 0.0


class TestValidateState:
    def test_ok(self):
        params = SphereParams(n_bodies=2)
        s = PhaseState(0.0, [math.pi / 2, math.pi / 2], [0.0, 1.0], [0.1, 0.2], [0.3, 0.4])
        assert validate_state(s, params) is None

    def test_pole_proximity(self):
        params = SphereParams(n_bodies=2)
        s = PhaseState(0.0, [math.pi / 2, 1e-12], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
        v = validate_state(s, params)
        assert v is not None
        assert v.body == 1 and v.field == "theta"

    def test_non_finite(self):
        params = SphereParams(n_bodies=1)
        s = single(p_theta=math.inf)
        v = validate_state(s, params)
        assert v is not None
        assert v.body == 0 and v.field == "p_theta"
        v = validate_state(single(p_phi=math.nan), params)
        assert v is not None and v.field == "p_phi"

    def test_body_count_mismatch(self):
        params = SphereParams(n_bodies=2)
        v = validate_state(single(), params)
        assert v is not None

    def test_ok_implies_finite_kinetics(self):
        rng = np.random.default_rng(3)
        params = SphereParams(n_bodies=3)
        h = SphereNBodyHamiltonian(params)
        for _ in range(30):
            s = random_state(rng)
            assert validate_state(s, params) is None
            assert math.isfinite(h.h1(s))
            assert math.isfinite(h.h2(s))
            assert np.all(np.isfinite(h.dh2_dpphi(s)))
            assert np.all(np.isfinite(h.dh2_dtheta(s)))


def test_canonical_structure_matrix():
    j = canonical_structure_matrix(2)
    assert j.shape == (4, 4)
    assert np.array_equal(j.T, -j)
    assert np.array_equal(j @ j, -np.eye(4))
