import math

import numpy as np
import pytest

from sphereint import (
    BENCHMARK_P_PHI,
    BENCHMARK_P_THETA,
    OracleParams,
    PETAL_ADVANCE,
    SphereParams,
    build_benchmark_initial_state,
    calibrate_reduction,
    closure_distance,
    integrate,
    oracle_phase_state,
    phi_of_t,
    psi_of_t,
    reduced_state_of_t,
    state_distance,
    theta_of_t,
    total_energy,
)
from sphereint.oracle import reduced_potential


class TestPsiOfT:
    def test_initial_value_is_center(self, benchmark):
        _, oracle = benchmark
        assert psi_of_t(oracle, 0.0) == oracle.psi_center

    def test_periodicity(self, benchmark):
        _, oracle = benchmark
        t_grid = np.linspace(0.0, 3.0 * oracle.period, 40)
        for t in t_grid:
            assert abs(psi_of_t(oracle, t + oracle.period) - psi_of_t(oracle, t)) <= 1e-12

    def test_ode_residual(self, benchmark):
        """The closed form satisfies psi'^2 = E0 - L^2 - E0 psi^2 - (psi-psi0)^2."""
        _, oracle = benchmark
        e0, l, psi0 = oracle.e0, oracle.l_reduced, oracle.psi0
        worst = 0.0
        for t in np.linspace(0.0, 2.0 * oracle.period, 10_000):
            psi = psi_of_t(oracle, t)
            psi_dot = oracle.amplitude * oracle.omega * math.cos(oracle.omega * t)
            residual = psi_dot**2 - (e0 - l * l - e0 * psi * psi - (psi - psi0) ** 2)
            worst = max(worst, abs(residual))
        assert worst <= 1e-10

    def test_stays_off_poles(self, benchmark):
        _, oracle = benchmark
        for t in np.linspace(0.0, oracle.period, 500):
            assert -1.0 < psi_of_t(oracle, t) < 1.0


class TestPhiOfT:
    def test_zero_angular_momentum_freezes_phi(self):
        p = OracleParams.from_reduced(
            theta0=math.pi / 4, e0=0.05, l_reduced=0.0,
            momentum_scale=0.5, energy_scale=1.0 / 6.0, time_scale=2.0,
        )
        for t in (0.0, 0.7, 3.0, 11.0):
            assert phi_of_t(p, t) == 0.0

    def test_strictly_monotone_for_positive_l(self, benchmark):
        _, oracle = benchmark
        values = [phi_of_t(oracle, t) for t in np.linspace(0.0, 2 * oracle.period, 60)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_period_advance_is_one_sixth_turn(self, benchmark):
        _, oracle = benchmark
        advance = phi_of_t(oracle, oracle.period) - phi_of_t(oracle, 0.0)
        assert abs(advance - PETAL_ADVANCE) <= 1e-9

    def test_offset_argument(self, benchmark):
        _, oracle = benchmark
        assert phi_of_t(oracle, 1.0, phi_at_0=2.5) == pytest.approx(
            2.5 + phi_of_t(oracle, 1.0), abs=1e-14
        )

    def test_multi_period_consistency(self, benchmark):
        # splitting into whole periods plus remainder must agree with the
        # single-period value extended linearly plus the fractional part
        _, oracle = benchmark
        t = 3.0 * oracle.period + 0.37
        direct = phi_of_t(oracle, t)
        composed = 3.0 * phi_of_t(oracle, oracle.period) + phi_of_t(oracle, 0.37)
        assert direct == pytest.approx(composed, abs=1e-11)


class TestCalibration:
    def test_snapped_scale_factors(self, benchmark_params):
        momentum_scale, energy_scale, time_scale = calibrate_reduction(benchmark_params)
        assert momentum_scale == 0.5
        assert energy_scale == pytest.approx(1.0 / 6.0, abs=0)
        assert time_scale == 2.0

    def test_benchmark_regression_values(self, benchmark):
        state, oracle = benchmark
        assert oracle.e0 == pytest.approx(0.030547738162207322, abs=1e-14)
        assert oracle.l_reduced == pytest.approx(BENCHMARK_P_PHI / 2.0, abs=0)
        assert float(state.theta[0]) == pytest.approx(0.8146176958321291, abs=1e-13)
        assert oracle.real_period == pytest.approx(3.0946804792670126, abs=1e-12)

    def test_energy_scale_maps_full_energy(self, benchmark, benchmark_hamiltonian):
        state, oracle = benchmark
        assert oracle.e0 == pytest.approx(
            oracle.energy_scale * total_energy(state, benchmark_hamiltonian), rel=1e-12
        )

    def test_mass_invariance_of_snap(self):
        params = SphereParams(n_bodies=3, mass=2.0)
        momentum_scale, energy_scale, time_scale = calibrate_reduction(params)
        # alpha = 1/2 and beta = 1/6 are mass-free; the scales are not
        assert momentum_scale == pytest.approx(0.5 / math.sqrt(2.0), rel=1e-12)
        assert energy_scale == pytest.approx(1.0 / 6.0, abs=0)
        assert time_scale == pytest.approx(1.0 / (momentum_scale * 2.0), rel=1e-12)


class TestBuildBenchmark:
    def test_threefold_symmetry_is_exact(self, benchmark):
        state, _ = benchmark
        assert state.theta[0] == state.theta[1] == state.theta[2]
        assert state.p_theta[0] == state.p_theta[1] == state.p_theta[2]
        assert state.p_phi[0] == state.p_phi[1] == state.p_phi[2]
        assert state.phi[1] - state.phi[0] == 2.0 * math.pi / 3.0
        assert state.phi[2] - state.phi[0] == 4.0 * math.pi / 3.0

    def test_quoted_momenta(self, benchmark):
        state, _ = benchmark
        assert float(state.p_theta[0]) == BENCHMARK_P_THETA
        assert float(state.p_phi[0]) == BENCHMARK_P_PHI
        assert float(np.sum(state.p_phi)) == pytest.approx(
            3.0 * BENCHMARK_P_PHI, abs=5e-17
        )

    def test_preconditions(self):
        with pytest.raises(ValueError):
            build_benchmark_initial_state(SphereParams(n_bodies=2))
        with pytest.raises(ValueError):
            build_benchmark_initial_state(SphereParams(n_bodies=3, theta0=0.9))

    def test_closure_after_six_periods(self, benchmark, benchmark_hamiltonian):
        state, oracle = benchmark
        t_total = 6.0 * oracle.real_period
        n = round(t_total / 0.02)
        samples = integrate(state, benchmark_hamiltonian, "sesi4", t_total / n, n, n)
        assert closure_distance(state, samples[-1], windings=1) < 2e-6


class TestOraclePhaseState:
    def test_t0_matches_build(self, benchmark):
        state, oracle = benchmark
        mapped = oracle_phase_state(oracle, 0.0, 0.0)
        assert state_distance(mapped, state) <= 1e-12

    def test_symmetry_preserved(self, benchmark):
        _, oracle = benchmark
        for t in (0.3, 1.7, 5.2):
            s = oracle_phase_state(oracle, 0.0, t)
            assert s.theta[0] == s.theta[1] == s.theta[2]
            assert s.p_theta[0] == s.p_theta[1] == s.p_theta[2]
            assert s.p_phi[0] == s.p_phi[1] == s.p_phi[2]

    def test_energy_is_time_independent(self, benchmark, benchmark_hamiltonian):
        _, oracle = benchmark
        energies = [
            total_energy(oracle_phase_state(oracle, 0.0, t), benchmark_hamiltonian)
            for t in np.linspace(0.0, 2.0 * oracle.real_period, 25)
        ]
        assert max(energies) - min(energies) <= 1e-9

    def test_tracks_integration_over_one_period(self, benchmark, benchmark_hamiltonian):
        state, oracle = benchmark
        t_total = oracle.real_period
        n = round(t_total / 0.002)
        tau = t_total / n
        samples = integrate(state, benchmark_hamiltonian, "sesi4", tau, n, n // 8)
        for s in samples:
            expected = oracle_phase_state(oracle, 0.0, s.t)
            assert abs(float(s.theta[0]) - float(expected.theta[0])) <= 1e-6


class TestReducedIdentities:
    def test_energy_identity_along_oracle(self, benchmark):
        """V(theta) + L^2/sin(theta)^2 + theta_dot^2 = E0 in the reduced clock."""
        _, oracle = benchmark
        for t in np.linspace(0.0, 2.0 * oracle.period, 200):
            r = reduced_state_of_t(oracle, t)
            lhs = (
                reduced_potential(r.theta, oracle.theta0)
                + oracle.l_reduced**2 / math.sin(r.theta) ** 2
                + r.theta_dot**2
            )
            assert abs(lhs - oracle.e0) <= 1e-10

    def test_quadratic_potential_in_psi(self, benchmark):
        """(psi - psi0)^2 equals V(theta) sin(theta)^2 at psi = cos(theta)."""
        _, oracle = benchmark
        for theta in np.linspace(0.4, math.pi - 0.4, 100):
            psi = math.cos(theta)
            u = (psi - oracle.psi0) ** 2
            v = reduced_potential(theta, oracle.theta0) * math.sin(theta) ** 2
            assert abs(u - v) <= 1e-14

    def test_reduced_state_reproduces_l(self, benchmark):
        _, oracle = benchmark
        for t in (0.0, 0.9, 2.4, 7.7):
            r = reduced_state_of_t(oracle, t)
            assert abs(math.sin(r.theta) ** 2 * r.phi_dot - oracle.l_reduced) <= 1e-12


class TestOracleParamsValidation:
    def test_rejects_bad_e0(self):
        with pytest.raises(ValueError):
            OracleParams.from_reduced(
                theta0=math.pi / 4, e0=-1.5, l_reduced=0.0,
                momentum_scale=0.5, energy_scale=1 / 6, time_scale=2.0,
            )

    def test_rejects_inconsistent_amplitude(self):
        with pytest.raises(ValueError):
            OracleParams(
                theta0=math.pi / 4, psi0=math.cos(math.pi / 4),
                e0=0.03, l_reduced=0.08, amplitude=0.5,
                momentum_scale=0.5, energy_scale=1 / 6, time_scale=2.0,
            )

    def test_rejects_wrong_psi0(self):
        with pytest.raises(ValueError):
            OracleParams(
                theta0=math.pi / 4, psi0=0.9, e0=0.03, l_reduced=0.08,
                amplitude=0.01, momentum_scale=0.5, energy_scale=1 / 6,
                time_scale=2.0,
            )

    def test_rejects_excess_angular_momentum(self):
        # amplitude bound goes negative when L^2 exceeds the radial budget
        with pytest.raises(ValueError):
            OracleParams.from_reduced(
                theta0=math.pi / 4, e0=0.03, l_reduced=0.5,
                momentum_scale=0.5, energy_scale=1 / 6, time_scale=2.0,
            )


def test_closure_distance_removes_winding(benchmark):
    import dataclasses

    state, _ = benchmark
    wound = dataclasses.replace(state, phi=state.phi + 2.0 * math.pi)
    # adding and subtracting the winding leaves only float round-off
    assert closure_distance(state, wound, windings=1) <= 1e-15
    assert state_distance(state, wound) == pytest.approx(2.0 * math.pi)
