import numpy as np
import pytest

from stochwave import (
    DiscreteProblem,
    ObservableSet,
    SchemeConfig,
    build_mesh,
    expected_observable_path,
    hamiltonian,
    integrate,
    linear_additive,
    off,
    sine_gordon_additive,
)
from stochwave.integrators import State, stm_step
from stochwave.noise import NoiseSpec
from stochwave.observables import modal_energies, record_observables


def _linear_dp(n=20):
    problem = linear_additive(
        noise=NoiseSpec(kind="off"),
        u0=lambda x: np.sin(np.pi * x),
        u0_prime=lambda x: np.pi * np.cos(np.pi * x),
        v0=lambda x: np.sin(2 * np.pi * x),
    )
    return DiscreteProblem(problem, build_mesh(n), off())


class TestHamiltonian:
    def test_zero_state_zero_potential(self):
        dp = _linear_dp()
        assert hamiltonian(State(np.zeros(19), np.zeros(19)), dp) == 0.0

    def test_missing_potential_rejected(self):
        from stochwave.problems import anderson

        dp = DiscreteProblem(anderson(), build_mesh(8), off())
        with pytest.raises(ValueError, match="no potential"):
            hamiltonian(dp.initial_state(), dp)

    def test_modal_additivity_for_zero_potential(self, rng):
        # V = 0: H equals the sum of per-mode energies (Parseval)
        dp = _linear_dp()
        state = State(rng.normal(size=19), rng.normal(size=19))
        H = hamiltonian(state, dp)
        modal = modal_energies(state, dp, 19).sum()
        assert abs(H - modal) <= 1e-10 * abs(H)

    def test_invariant_under_free_trigonometric_step(self):
        dp = _linear_dp()
        state = dp.initial_state()
        H0 = hamiltonian(state, dp)
        for _ in range(100):
            state = stm_step(state, 0.03, dp)
        assert hamiltonian(state, dp) == pytest.approx(H0, rel=1e-12)

    def test_indicator_initial_energy(self):
        dp = DiscreteProblem(sine_gordon_additive(), build_mesh(10), off())
        H0 = hamiltonian(dp.initial_state(), dp)
        assert H0 == pytest.approx(0.25, abs=0.03)

    def test_batched(self, rng):
        dp = _linear_dp()
        U1 = rng.normal(size=(19, 4))
        U2 = rng.normal(size=(19, 4))
        batch = hamiltonian(State(U1, U2), dp)
        assert batch.shape == (4,)
        for b in range(4):
            assert batch[b] == pytest.approx(hamiltonian(State(U1[:, b], U2[:, b]), dp))


class TestObservableSet:
    def test_requires_a_selection(self):
        with pytest.raises(ValueError):
            ObservableSet()

    def test_names_order(self):
        obs = ObservableSet(hamiltonian=True, l2_norm_u2=True, modal_energies=2)
        assert obs.names() == ("hamiltonian", "l2_norm_u2", "modal_energy_1", "modal_energy_2")

    def test_recording_during_integration(self):
        dp = _linear_dp()
        obs = ObservableSet(hamiltonian=True, l2_norm_u1=True)
        _, series = integrate(dp, SchemeConfig("stm", 0.02), 10, None, record=obs)
        assert series["hamiltonian"].shape == (11,)
        assert series["time"][-1] == pytest.approx(0.2)
        np.testing.assert_allclose(series["hamiltonian"], series["hamiltonian"][0], rtol=1e-12)

    def test_record_values(self, rng):
        dp = _linear_dp()
        state = State(rng.normal(size=19), rng.normal(size=19))
        vals = record_observables(state, dp, ObservableSet(l2_norm_u1=True, energy_seminorm=True))
        assert vals["l2_norm_u1"] == pytest.approx(np.sqrt(state.u1 @ dp.ops.mass @ state.u1))
        assert vals["energy_seminorm"] == pytest.approx(np.sqrt(state.u1 @ dp.ops.stiffness @ state.u1))


class TestExpectedObservablePath:
    def test_identical_samples_zero_stderr(self):
        series = np.tile(np.linspace(0, 1, 7), (5, 1))
        mean, stderr = expected_observable_path(series)
        np.testing.assert_allclose(mean, np.linspace(0, 1, 7))
        np.testing.assert_allclose(stderr, 0.0)

    def test_two_point_arithmetic(self):
        mean, stderr = expected_observable_path(np.array([[0.0], [2.0]]))
        assert mean[0] == 1.0
        assert stderr[0] == pytest.approx(1.0)

    def test_single_sample_flagged(self):
        mean, stderr = expected_observable_path(np.array([[1.0, 2.0]]))
        np.testing.assert_allclose(mean, [1.0, 2.0])
        assert np.all(np.isnan(stderr))

    def test_ragged_rejected(self):
        with pytest.raises(ValueError):
            expected_observable_path([np.zeros(3), np.zeros(4)])
