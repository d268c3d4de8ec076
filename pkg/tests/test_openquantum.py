import numpy as np
import pytest
from scipy import stats

from decohist import openquantum as oq, qops
from decohist.openquantum import LindbladModel
from decohist.qops import ProjectorFamily, dag

sx, sy, sz = qops.pauli()
SM = qops.lowering(2)  # |0><1|


def random_rho(d, g):
    G = g.standard_normal((d, d)) + 1j * g.standard_normal((d, d))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def suite_models():
    return [
        oq.qubit_damping(1.0, 0.7),
        LindbladModel(0.3 * sx, ((SM, 0.5), (sz, 0.2))),
        oq.thermal_oscillator_model(6, 1.0, 1.0, 0.5),
    ]


# ---------------------------------------------------------------- generator

def test_rhs_qubit_decay_from_excited_state():
    rhs = oq.lindblad_rhs(oq.qubit_damping(1.0), np.diag([0.0, 1.0]))
    assert np.abs(rhs - np.diag([1.0, -1.0])).max() < 1e-15


def test_rhs_without_channels_is_commutator():
    g = np.random.default_rng(0)
    H = random_rho(3, g)
    rho = random_rho(3, g)
    model = LindbladModel(H)
    assert np.abs(oq.lindblad_rhs(model, rho) + 1j * (H @ rho - rho @ H)).max() < 1e-15
    assert np.abs(oq.lindblad_rhs(model, H)).max() < 1e-15


@pytest.mark.parametrize("k", range(3))
def test_rhs_traceless_hermitian_and_matches_superoperator(k):
    model = suite_models()[k]
    rho = random_rho(model.dim, np.random.default_rng(k))
    r = oq.lindblad_rhs(model, rho)
    assert abs(np.trace(r)) < 1e-12
    assert np.abs(r - dag(r)).max() < 1e-12
    d = model.dim
    assert np.abs(r - (oq.liouvillian(model) @ rho.reshape(-1)).reshape(d, d)).max() < 1e-12


def test_truncated_thermal_state_is_stationary():
    omega, beta = 1.0, 1.0
    N = oq.truncation_for_tail(omega, beta, 1e-8)
    assert oq.tail_weight(N, omega, beta) < 1e-8
    model = oq.thermal_oscillator_model(N, omega, beta, 0.5)
    rhs = oq.lindblad_rhs(model, oq.thermal_state(N, omega, beta))
    assert np.abs(rhs).max() < 1e-8


def test_model_validation():
    with pytest.raises(ValueError):
        LindbladModel(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        LindbladModel(sz, ((SM, -1.0),))
    with pytest.raises(qops.DimensionError):
        oq.lindblad_rhs(oq.qubit_damping(), np.eye(3) / 3)


# ---------------------------------------------------------------- propagation

def test_propagate_zero_time():
    rho = random_rho(2, np.random.default_rng(1))
    assert np.abs(oq.propagate(oq.qubit_damping(), rho, 0.0) - rho).max() == 0
    with pytest.raises(ValueError):
        oq.propagate(oq.qubit_damping(), rho, -1.0)


@pytest.mark.parametrize("method", ["expm", "rk"])
@pytest.mark.parametrize("t", [0.1, 1.0, 3.7])
def test_excited_population_decays_exponentially(method, t):
    out = oq.propagate(oq.qubit_damping(1.3, 0.4), np.diag([0.0, 1.0]), t, method=method)
    assert abs(out[1, 1].real - np.exp(-1.3 * t)) < 1e-9


def test_coherence_decays_at_half_rate():
    plus = np.full((2, 2), 0.5)
    out = oq.propagate(oq.qubit_damping(1.0, 0.0), plus, 2.0)
    assert abs(abs(out[0, 1]) - 0.5 * np.exp(-1.0)) < 1e-12


@pytest.mark.parametrize("k", range(3))
def test_trace_preservation_and_paths_agree(k):
    model = suite_models()[k]
    rho = random_rho(model.dim, np.random.default_rng(10 + k))
    a = oq.propagate(model, rho, 1.5, method="expm")
    b = oq.propagate(model, rho, 1.5, method="rk")
    assert abs(np.trace(a) - 1) < 1e-9 and abs(np.trace(b) - 1) < 1e-9
    assert np.abs(a - b).max() < 1e-8


@pytest.mark.parametrize("k", range(3))
def test_complete_positivity_on_entangled_input(k):
    model = suite_models()[k]
    d = model.dim
    S = oq.channel_superoperator(model, 0.8)
    # apply the channel to the first factor of the maximally entangled state
    omega = np.eye(d).reshape(-1) / np.sqrt(d)
    Om = np.outer(omega, omega.conj()).reshape(d, d, d, d)  # [i, a, j, b]
    blocks = Om.transpose(0, 2, 1, 3).reshape(d * d, d, d)  # [(i, j), a, b]
    out = np.einsum("pq,qab->pab", S, blocks).reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    assert np.linalg.eigvalsh(0.5 * (out + dag(out))).min() >= -1e-8


def test_thermal_oscillator_relaxes_to_thermal_state():
    N, omega, beta = 8, 1.0, 1.5
    model = oq.thermal_oscillator_model(N, omega, beta, 1.0)
    out = oq.propagate(model, np.diag(np.eye(N)[N - 1]), 60.0)
    assert np.abs(out - oq.thermal_state(N, omega, beta)).max() < 1e-10
    assert np.abs(oq.fixed_point(model) - oq.thermal_state(N, omega, beta)).max() < 1e-9


def test_kraus_form_reproduces_channel():
    model = suite_models()[1]
    rho = random_rho(2, np.random.default_rng(3))
    K = oq.channel_kraus(model, 0.6)
    out = sum(k @ rho @ dag(k) for k in K)
    assert np.abs(out - oq.propagate(model, rho, 0.6)).max() < 1e-12
    assert np.abs(sum(dag(k) @ k for k in K) - np.eye(2)).max() < 1e-12


def test_degenerate_fixed_point_detected():
    with pytest.raises(oq.DegenerateFixedPointError):
        oq.fixed_point(LindbladModel(sz, ((sz, 1.0),)))


# ---------------------------------------------------------------- thermal model

def test_thermal_rates():
    model = oq.thermal_oscillator_model(5, 2.0, 0.7, 1.5)
    (ad, gp), (a, gm) = model.channels
    assert gp / gm == pytest.approx(np.exp(-0.7 * 2.0), rel=1e-15)
    assert np.abs(ad - dag(a)).max() == 0
    inf = oq.thermal_oscillator_model(5, 2.0, np.inf, 1.5)
    assert inf.channels[0][1] == 0.0


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_fock_state_rates(n):
    N, gm = 6, 0.8
    model = oq.thermal_oscillator_model(N, 1.0, 1.0, gm)
    gp = gm * np.exp(-1.0)
    up, down = oq.jump_rates(model, np.diag(np.eye(N)[n]))
    # absorption weight tr(a^+ rho a) = n + 1, emission tr(a rho a^+) = n
    assert up == pytest.approx((n + 1) * gp, rel=1e-14)
    assert down == pytest.approx(n * gm, rel=1e-14, abs=1e-15)
    if n + 1 < N:
        up_next, down_next = oq.jump_rates(model, np.diag(np.eye(N)[n + 1]))
        assert up / down_next == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_fock_emission_probability_per_step():
    model = oq.thermal_oscillator_model(6, 1.0, 1.0, 0.8)
    n, dt, M = 3, 1e-2, 20000
    trajs = oq.jump_ensemble(model, np.eye(6)[n], dt, dt, M, seed=5)
    emitted = sum(1 for t in trajs for j in t.jumps if j.channel == 1) / M
    absorbed = sum(1 for t in trajs for j in t.jumps if j.channel == 0) / M
    for rate, obs in ((n * 0.8 * dt, emitted), ((n + 1) * 0.8 * np.exp(-1) * dt, absorbed)):
        assert abs(obs - rate) < 4 * np.sqrt(rate / M)


# ---------------------------------------------------------------- POVM step

def test_povm_unitary_channel():
    g = np.random.default_rng(4)
    U = qops.matrix_exponential(random_rho(3, g), 1.0)
    model = LindbladModel(np.zeros((3, 3)), ((U, 2.0),))
    rho = random_rho(3, g)
    dt = 0.1
    out, post = oq.povm_feedback_step(model, rho, dt, draw=0.1999)
    assert out == 1 and np.abs(post - U @ rho @ dag(U)).max() < 1e-12
    out, _ = oq.povm_feedback_step(model, rho, dt, draw=0.2001)
    assert out == 0


def test_povm_qubit_decay():
    model = oq.qubit_damping(1.0)
    out, post = oq.povm_feedback_step(model, np.diag([0.0, 1.0]), 0.05, draw=0.0499)
    assert out == 1 and np.abs(post - np.diag([1.0, 0.0])).max() < 1e-15
    out, post = oq.povm_feedback_step(model, np.diag([0.0, 1.0]), 0.05, draw=0.0501)
    assert out == 0 and np.abs(post - np.diag([0.0, 1.0])).max() < 1e-15


def test_povm_branch_is_normalized_jump():
    model = LindbladModel(0.4 * sz, ((np.array([[0.3, 1.2], [0.1, -0.5j]]), 0.7),))
    rho = random_rho(2, np.random.default_rng(6))
    L = model.channels[0][0]
    dt = 1e-3
    _, post = oq.povm_feedback_step(model, rho, dt, draw=0.0)
    jump = L @ rho @ dag(L)
    Uh = qops.matrix_exponential(model.H, dt)
    assert np.abs(post - Uh @ (jump / np.trace(jump)) @ dag(Uh)).max() < 1e-12


def test_povm_errors():
    with pytest.raises(oq.StepTooLargeError):
        oq.povm_feedback_step(oq.qubit_damping(1.0), np.eye(2) / 2, 2.0, 0.5)
    with pytest.raises(ValueError):
        oq.povm_feedback_step(suite_models()[1], np.eye(2) / 2, 0.01, 0.5)


def test_averaged_step_second_order():
    from decohist.acceptance import one_step_errors, _fit_slope

    model = suite_models()[1]
    rho = random_rho(2, np.random.default_rng(7))
    dts = [1e-1, 1e-2, 1e-3]
    errs = one_step_errors(model, rho, dts)
    assert abs(_fit_slope(dts, errs) - 2) < 0.2


# ---------------------------------------------------------------- dilation

def test_dilation_identity_full_strength():
    dil = oq.dilate_to_projection(np.eye(2), 1.0)
    rho = random_rho(2, np.random.default_rng(8))
    assert dil.probability(rho, 1) == pytest.approx(1.0, abs=1e-14)
    assert np.abs(dil.P0 + dil.P1 - np.eye(4)).max() < 1e-14


def test_dilation_zero_strength():
    dil = oq.dilate_to_projection(np.diag([0.0, 1.0]), 0.0)
    assert dil.probability(np.diag([0.0, 1.0]), 1) == 0.0


def test_dilation_random_draws():
    g = np.random.default_rng(9)
    worst = 0.0
    for _ in range(200):
        d = int(g.integers(1, 5))
        X = g.standard_normal((d, d)) + 1j * g.standard_normal((d, d))
        A = qops.hermitian_sqrt(X @ dag(X))
        gdt = float(g.uniform(0, 1)) / np.linalg.eigvalsh(A @ A).max()
        dil = oq.dilate_to_projection(A, gdt)
        assert np.abs(dil.P0 @ dil.P0 - dil.P0).max() < 1e-10
        assert np.abs(dil.P0 + dil.P1 - np.eye(2 * d)).max() < 1e-10
        rho = random_rho(d, g)
        M1 = gdt * A @ A
        K0 = qops.hermitian_sqrt(np.eye(d) - M1)
        p1 = np.trace(M1 @ rho).real
        worst = max(worst, abs(dil.probability(rho, 1) - p1), abs(dil.probability(rho, 0) - (1 - p1)))
        p, post = dil.branch(rho, 0)
        if p > 1e-9:
            ref = K0 @ rho @ K0
            worst = max(worst, np.abs(post - ref / np.trace(ref).real).max())
        p, post = dil.branch(rho, 1)
        if p > 1e-9:
            ref = A @ rho @ A
            worst = max(worst, np.abs(post - ref / np.trace(ref).real).max())
    assert worst < 1e-10


def test_dilation_rejects_non_psd():
    with pytest.raises(qops.NotPositiveError):
        oq.dilate_to_projection(np.eye(2), 2.0)
    with pytest.raises(ValueError):
        oq.dilate_to_projection(np.array([[0, 1], [0, 0]]), 0.1)


# ---------------------------------------------------------------- trajectories

def test_no_channels_unitary_trajectory():
    model = LindbladModel(sx)
    tr = oq.jump_unravel(model, np.array([1, 0]), 1.0, 0.01, seed=0, sample_times=[0.0, 1.0])
    assert tr.jumps == []
    assert np.abs(tr.states[-1] - qops.matrix_exponential(sx, 1.0) @ np.array([1, 0])).max() < 1e-12


def test_trajectory_states_valid_and_reproducible():
    model = suite_models()[1]
    times = np.linspace(0, 2, 11)
    a = oq.jump_unravel(model, np.eye(2) / 2, 2.0, 0.01, seed=3, sample_times=times, trajectory_id=4)
    b = oq.jump_unravel(model, np.eye(2) / 2, 2.0, 0.01, seed=3, sample_times=times, trajectory_id=4)
    assert np.array_equal(a.states, b.states) and a.jumps == b.jumps
    for rho in a.states:
        qops.validate_density_matrix(rho)
    ts = [j.time for j in a.jumps]
    assert ts == sorted(ts)


def test_jump_times_exponential():
    gamma, dt, T, M = 1.0, 1e-3, 10.0, 10_000
    trajs = oq.jump_ensemble(oq.qubit_damping(gamma), np.array([0, 1]), T, dt, M, seed=11)
    first = np.array([t.jumps[0].time if t.jumps else np.inf for t in trajs])
    observed = first[np.isfinite(first)]
    # the law is conditioned on a jump before T; P(no jump) = exp(-10) is censored
    cdf = lambda x: (1 - np.exp(-gamma * x)) / (1 - np.exp(-gamma * T))
    ks = stats.kstest(observed, cdf).statistic
    assert ks <= 0.02
    assert all(len(t.jumps) <= 1 for t in trajs)


def test_horizon_mismatch():
    with pytest.raises(ValueError, match="whole number"):
        oq.jump_unravel(oq.qubit_damping(), np.array([0, 1]), 1.0, 0.3, seed=0)


def test_step_too_large():
    with pytest.raises(oq.StepTooLargeError):
        oq.jump_unravel(oq.qubit_damping(5.0), np.array([0, 1]), 1.0, 0.5, seed=0)


def test_single_trajectory_ensemble():
    model = oq.qubit_damping(1.0)
    res = oq.ensemble_average(model, np.array([0, 1]), 1.0, 0.01, 1, seed=2)
    tr = oq.jump_unravel(model, np.array([0, 1]), 1.0, 0.01, seed=2)
    assert np.abs(res.mean - qops.ket_to_dm(tr.states[-1])).max() < 1e-15


def test_ensemble_qubit_damping_close_to_exact():
    res = oq.ensemble_average(oq.qubit_damping(1.0), np.diag([0.0, 1.0]), 1.0, 1e-3, 10_000, seed=1)
    assert res.trace_distance_to_exact <= 0.03
    assert res.statistical_error <= res.statistical_bound
    assert res.bias < 1e-3


def test_thermal_ensemble_stays_thermal():
    N, omega, beta = 6, 1.0, 1.0
    model = oq.thermal_oscillator_model(N, omega, beta, 1.0)
    rho_th = oq.thermal_state(N, omega, beta)
    times = np.linspace(0.5, 5.0, 10)
    trajs = oq.jump_ensemble(model, rho_th, 5.0, 0.01, 2000, seed=6, sample_times=times)
    states = np.array([t.states for t in trajs])  # (M, times, N, N)
    mean = states.mean(axis=(0, 1))
    assert qops.trace_distance(mean, rho_th) < 0.05


def test_thread_count_does_not_change_results(monkeypatch):
    model = suite_models()[1]
    runs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("DECOHIST_THREADS", threads)
        res = oq.ensemble_average(model, np.eye(2) / 2, 0.5, 0.01, 2500, seed=9, exact=False)
        runs.append((res.mean, res.jump_counts))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]


# ---------------------------------------------------------------- relaxation

def random_family(g):
    X = g.standard_normal((2, 2)) + 1j * g.standard_normal((2, 2))
    return ProjectorFamily.from_basis(np.linalg.qr(X)[0])


def test_zero_spacing_repeated_family_is_diagonal():
    fam = random_family(np.random.default_rng(12))
    labels, D = oq.open_decoherence_matrix(oq.qubit_damping(1.0, 0.5), [fam, fam], 0.0, np.eye(2) / 2)
    assert np.abs(D[0, 1]) < 1e-15 and np.real(D[1, 2]) < 1e-15
    rep = oq.relaxation_decoherence_experiment(oq.qubit_damping(1.0, 0.5), [fam, fam], [0.0])
    assert rep.rows[0].max_ratio < 1e-20


def test_dilation_and_channel_agree():
    g = np.random.default_rng(13)
    fams = [random_family(g) for _ in range(3)]
    model = oq.qubit_damping(1.0, 0.5)
    rho = random_rho(2, g)
    l1, D1 = oq.open_decoherence_matrix(model, fams, [0.3, 0.9], rho, method="dilation")
    l2, D2 = oq.open_decoherence_matrix(model, fams, [0.3, 0.9], rho, method="channel")
    assert l1 == l2
    assert np.abs(D1 - D2).max() < 1e-12
    assert abs(np.trace(D1) - 1) < 1e-12


def test_relaxation_ratio_decreases_with_spacing():
    g = np.random.default_rng(14)
    fams = [random_family(g) for _ in range(3)]
    model = oq.qubit_damping(1.0, 0.5)
    rep = oq.relaxation_decoherence_experiment(model, fams, [0.5, 2, 10, 20])
    ratios = [r.max_ratio for r in rep.rows]
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))
    assert rep.rows[2].max_ratio <= 1e-3
    assert rep.rows[3].max_marginal_deviation <= 1e-6
    # coherences are the slowest mode: rate gamma / 2
    assert rep.relaxation_time == pytest.approx(2.0, rel=1e-9)


def test_unitary_stinespring():
    K = oq.channel_kraus(oq.qubit_damping(1.0), 0.4)
    V = oq.stinespring_unitary(K)
    assert qops.is_unitary(V, 1e-12)


def test_relaxation_rejects_degenerate_model():
    fam = ProjectorFamily.from_basis(np.eye(2))
    with pytest.raises(oq.DegenerateFixedPointError):
        oq.relaxation_decoherence_experiment(LindbladModel(sz, ((sz, 1.0),)), [fam, fam], [1.0])
