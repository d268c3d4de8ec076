import numpy as np
import pytest

from decohist import histories, oscillator, qops
from decohist.oscillator import TruncatedOscillator


def test_two_level_phase_states():
    phi = oscillator.phase_states(TruncatedOscillator(2))
    assert np.abs(phi[:, 0] - np.array([1, 1]) / np.sqrt(2)).max() < 1e-15
    assert np.abs(phi[:, 1] - np.array([1, -1]) / np.sqrt(2)).max() < 1e-15


@pytest.mark.parametrize("N", [2, 3, 4, 7, 16])
def test_phase_states_orthonormal(N):
    phi = oscillator.phase_states(TruncatedOscillator(N))
    assert np.abs(phi.conj().T @ phi - np.eye(N)).max() < 1e-13


def test_antipodal_phases_orthogonal():
    phi = oscillator.phase_states(TruncatedOscillator(4))
    assert abs(np.vdot(phi[:, 0], phi[:, 2])) < 1e-15


@pytest.mark.parametrize("N", [2, 3, 5, 8, 13])
def test_step_permutes_phase_states(N):
    osc = TruncatedOscillator(N, 0.7)
    phi = oscillator.phase_states(osc)
    U = oscillator.step_unitary(osc)
    for j in range(N):
        moved = U @ phi[:, j]
        assert abs(abs(np.vdot(phi[:, osc.successor(j)], moved)) - 1) < 1e-12
    assert np.abs(U - qops.matrix_exponential(osc.hamiltonian, osc.step_time)).max() < 1e-12


def test_step_direction_convention():
    osc = TruncatedOscillator(5)
    assert osc.successor(0) == (oscillator.STEP_DIRECTION % 5)
    assert osc.successor(3, 5) == 3


@pytest.mark.parametrize("N", [2, 4, 16, 64])
def test_full_period_is_identity_up_to_phase(N):
    osc = TruncatedOscillator(N, 2.3)
    U = oscillator.step_unitary(osc)
    assert qops.is_unitary(U, 1e-12)
    P = np.linalg.matrix_power(U, N)
    assert np.abs(P - P[0, 0] * np.eye(N)).max() < 1e-10
    assert abs(abs(P[0, 0]) - 1) < 1e-12


def test_two_level_two_step_probabilities():
    osc = TruncatedOscillator(2)
    sched = oscillator.phase_history_schedule(osc, 2)
    p = histories.history_probabilities(histories.decoherence_functional(sched, np.eye(2) / 2))
    s = osc.successor
    assert p[(0, s(0))] == pytest.approx(0.5, abs=1e-14)
    assert p[(1, s(1))] == pytest.approx(0.5, abs=1e-14)
    assert p[(0, 0)] == pytest.approx(0.0, abs=1e-14)
    assert p[(1, 1)] == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("N,n", [(4, 3), (8, 2), (5, 4)])
def test_live_histories_are_successor_chains(N, n):
    osc = TruncatedOscillator(N)
    D = histories.decoherence_functional(oscillator.phase_history_schedule(osc, n), np.eye(N) / N)
    assert sorted(D.support) == sorted(oscillator.successor_chains(osc, n))
    diag = D.diagonal()
    assert all(abs(diag[lab] - 1 / N) < 1e-12 for lab in D.support)
    assert histories.is_decoherent(D, 1e-10).decoherent


def test_energy_histories_decohere_at_arbitrary_times():
    osc = TruncatedOscillator(6)
    sched = oscillator.energy_history_schedule(osc, 3, times=[0.0, 0.37, 2.9])
    g = np.random.default_rng(0)
    G = g.standard_normal((6, 6)) + 1j * g.standard_normal((6, 6))
    rho = G @ G.conj().T
    rho /= np.trace(rho).real
    D = histories.decoherence_functional(sched, rho)
    assert sorted(D.support) == [(k, k, k) for k in range(6)]
    assert D.max_offdiagonal() < 1e-15


def test_schedule_arguments():
    osc = TruncatedOscillator(3)
    with pytest.raises(ValueError):
        oscillator.phase_history_schedule(osc, 0)
    with pytest.raises(ValueError):
        oscillator.energy_history_schedule(osc, 2, times=[0.0])
    with pytest.raises(ValueError):
        TruncatedOscillator(1)
    with pytest.raises(ValueError):
        TruncatedOscillator(3, -1.0)


def test_mixed_basis_demo_eight_levels():
    rep = oscillator.mixed_basis_coherence_demo(TruncatedOscillator(8), 3)
    # every phase chain starting anywhere is live between ground-state endpoints
    assert len(rep["live_histories"]) == 8
    assert rep["n_defined_pairs"] == 28
    assert rep["all_coherent"]
    assert abs(rep["min_ratio"] - 1) < 1e-8
    assert rep["phase_control_live_histories"] == 1
    assert rep["energy_control_live_histories"] == 1


def test_mixed_basis_demo_single_event():
    rep = oscillator.mixed_basis_coherence_demo(TruncatedOscillator(4), 1)
    assert len(rep["live_histories"]) == 4
    assert rep["n_defined_pairs"] == 6
    assert rep["all_coherent"]
