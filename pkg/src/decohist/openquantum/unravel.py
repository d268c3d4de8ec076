"""Quantum-jump unraveling of Lindblad dynamics as measurement plus feedback.

Each channel ``L = U A`` (polar form) defines a two-outcome POVM with
``M1 = gamma dt A^2`` and ``M0 = 1 - M1``; outcome 1 is followed by the
feedback unitary ``U``, so the jump branch is ``L rho L^+ / tr(L rho L^+)``.
Several channels share one POVM with ``M0 = 1 - dt sum_j gamma_j A_j^2``, and
Hamiltonian evolution ``exp(-iH dt)`` follows every step.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import qops, rng
from ..qops import dag
from . import lindblad

#: Trajectories simulated per batch; fixed so reductions never depend on it.
CHUNK = 1024


class StepTooLargeError(ValueError):
    """dt is so large that the no-jump POVM element is not PSD."""


@dataclass(frozen=True)
class JumpEvent:
    time: float
    channel: int


@dataclass
class Trajectory:
    seed: int
    trajectory_id: int
    times: np.ndarray
    states: np.ndarray
    jumps: list


def _no_jump_element(model, dt):
    d = model.dim
    M0 = np.eye(d, dtype=complex)
    for L, g in model.channels:
        _, A = qops.polar_decompose(L)
        M0 = M0 - g * dt * (A @ A)
    lam = np.linalg.eigvalsh(M0).min()
    if lam < -1e-12:
        raise StepTooLargeError(f"dt={dt:g} leaves the no-jump element with eigenvalue {lam:.3g}")
    return qops.hermitian_sqrt(M0)


def povm_feedback_step(model, rho, dt, draw):
    """One measurement-plus-feedback step for a single-channel model.

    ``draw`` is a U[0,1) number; outcome 1 (a jump) happens when
    ``draw < p1 = gamma dt tr(A^2 rho)``.

    Returns
    -------
    outcome : int
    rho_next : ndarray
    """
    if len(model.channels) != 1:
        raise ValueError("povm_feedback_step needs exactly one channel")
    rho = qops.validate_density_matrix(rho, model.dim)
    (L, g), = model.channels
    U, A = qops.polar_decompose(L)
    K0 = _no_jump_element(model, dt)
    p1 = float(g * dt * np.trace(A @ A @ rho).real)
    if draw < p1:
        post = A @ rho @ A
        post = U @ post @ dag(U)
        outcome = 1
    else:
        post = K0 @ rho @ K0
        outcome = 0
    post = post / np.trace(post).real
    Uh = qops.matrix_exponential(model.H, dt)
    return outcome, Uh @ post @ dag(Uh)


def averaged_step(model, rho, dt):
    """Outcome-averaged map: K0 rho K0 + dt sum_j gamma_j L_j rho L_j^+, then exp(-iH dt)."""
    K0 = _no_jump_element(model, dt)
    out = K0 @ rho @ K0
    for L, g in model.channels:
        out = out + g * dt * (L @ rho @ dag(L))
    Uh = qops.matrix_exponential(model.H, dt)
    return Uh @ out @ dag(Uh)


def iterate_averaged_step(model, rho, dt, n_steps):
    """The deterministic state an infinite jump ensemble converges to."""
    d = model.dim
    K0 = _no_jump_element(model, dt)
    Uh = qops.matrix_exponential(model.H, dt)
    S = np.kron(K0, K0.conj())
    for L, g in model.channels:
        S = S + g * dt * np.kron(L, L.conj())
    S = np.kron(Uh, Uh.conj()) @ S
    v = np.asarray(rho, dtype=complex).reshape(-1)
    v = np.linalg.matrix_power(S, n_steps) @ v
    return v.reshape(d, d)


@dataclass
class Dilation:
    """Projective realization of the two-outcome POVM on system x ancilla.

    The ancilla is a qubit prepared in ``sigma = |0><0|``.  ``coupling`` maps
    ``|psi>|0>`` to ``K0|psi>|0> + K1|psi>|1>`` and ``projectors[k] =
    coupling^+ (I x |k><k|) coupling``, so outcome statistics are
    ``tr(P_k (rho x sigma))``.
    """

    sigma: np.ndarray
    coupling: np.ndarray
    projectors: tuple
    dim: int

    @property
    def P0(self):
        return self.projectors[0]

    @property
    def P1(self):
        return self.projectors[1]

    def probability(self, rho, outcome):
        joint = qops.tensor_product(rho, self.sigma)
        return float(np.trace(self.projectors[outcome] @ joint).real)

    def branch(self, rho, outcome):
        """(probability, normalized system state) for one outcome."""
        joint = qops.tensor_product(rho, self.sigma)
        P = self.projectors[outcome]
        V = self.coupling
        post = V @ P @ joint @ P @ dag(V)
        p = float(np.trace(post).real)
        if p <= 0:
            return 0.0, None
        return p, qops.partial_trace(post, (self.dim, 2), keep=0) / p


def dilate_to_projection(A, gamma_dt):
    """Neumark dilation of {M1 = gamma_dt A^2, M0 = 1 - M1}."""
    A = qops.as_operator(A)
    if not qops.is_hermitian(A):
        raise ValueError("A must be Hermitian")
    d = A.shape[0]
    M1 = gamma_dt * (A @ A)
    M0 = np.eye(d) - M1
    if np.linalg.eigvalsh(M0).min() < -1e-12 or np.linalg.eigvalsh(M1).min() < -1e-12:
        raise qops.NotPositiveError("POVM elements are not PSD")
    K0 = qops.hermitian_sqrt(M0)
    K1 = qops.hermitian_sqrt(M1)
    flip = np.array([[0, -1], [1, 0]], dtype=complex)  # |0> -> |1>, |1> -> -|0>
    V = np.kron(K0, np.eye(2)) + np.kron(K1, flip)
    ket0 = np.diag([1.0, 0.0]).astype(complex)
    ket1 = np.diag([0.0, 1.0]).astype(complex)
    P0 = dag(V) @ np.kron(np.eye(d), ket0) @ V
    P1 = dag(V) @ np.kron(np.eye(d), ket1) @ V
    return Dilation(ket0, V, (0.5 * (P0 + dag(P0)), 0.5 * (P1 + dag(P1))), d)


def _step_count(T, dt):
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(T, dt):
        raise ValueError(f"horizon {T} is not a whole number of steps of {dt}")
    return n


def _sample_steps(sample_times, dt, n_steps):
    if sample_times is None:
        return np.array([n_steps])
    steps = np.rint(np.asarray(sample_times, dtype=float) / dt).astype(int)
    if steps.min() < 0 or steps.max() > n_steps:
        raise ValueError("sample times outside [0, T]")
    return steps


def _run_batch(model, state0, dt, n_steps, draws, sample_steps):
    """Advance a batch of trajectories; one uniform draw per trajectory per step."""
    m = draws.shape[0]
    pure = state0.ndim == 1
    K0 = _no_jump_element(model, dt)
    Uh = qops.matrix_exponential(model.H, dt)
    stay = Uh @ K0
    Ls = np.array([L for L, _ in model.channels]).reshape(-1, model.dim, model.dim)
    gam = np.array([g for _, g in model.channels])
    leaps = np.einsum("ab,jbc->jac", Uh, Ls) if len(gam) else Ls
    psi = np.repeat(state0[None], m, axis=0)
    samples = np.empty((m, len(sample_steps)) + state0.shape, dtype=complex)
    want = {}
    for i, s in enumerate(sample_steps):
        want.setdefault(int(s), []).append(i)
    jumps = []
    for step in range(n_steps + 1):
        for i in want.get(step, ()):
            samples[:, i] = psi
        if step == n_steps:
            break
        if len(gam):
            if pure:
                Lpsi = np.einsum("jab,mb->mja", Ls, psi)
                p = gam * dt * np.einsum("mja,mja->mj", Lpsi, Lpsi.conj()).real
            else:
                Lr = np.einsum("jab,mbc->mjac", Ls, psi)
                p = gam * dt * np.einsum("mjac,jac->mj", Lr, Ls.conj()).real
            cum = np.cumsum(p, axis=1)
            chan = np.sum(draws[:, step, None] >= cum, axis=1)  # == J means no jump
        else:
            chan = np.zeros(m, dtype=int)
        J = len(gam)
        nxt = np.empty_like(psi)
        idle = chan == J
        if pure:
            nxt[idle] = psi[idle] @ stay.T
        else:
            nxt[idle] = stay @ psi[idle] @ dag(stay)
        for j in range(J):
            hit = chan == j
            if not hit.any():
                continue
            if pure:
                nxt[hit] = psi[hit] @ leaps[j].T
            else:
                nxt[hit] = leaps[j] @ psi[hit] @ dag(leaps[j])
            for t_idx in np.flatnonzero(hit):
                jumps.append((int(t_idx), (step + 1) * dt, j))
        if pure:
            nxt /= np.linalg.norm(nxt, axis=1)[:, None]
        else:
            nxt /= np.einsum("mii->m", nxt).real[:, None, None]
        psi = nxt
    return samples, jumps


def _initial(state0, d):
    s = np.asarray(state0, dtype=complex)
    if s.ndim == 1:
        return qops.validate_state_vector(s, d)
    return qops.validate_density_matrix(s, d)


def _simulate(model, state0, T, dt, seed, ids, sample_times):
    n_steps = _step_count(T, dt)
    steps = _sample_steps(sample_times, dt, n_steps)
    state0 = _initial(state0, model.dim)
    chunks = [ids[i:i + CHUNK] for i in range(0, len(ids), CHUNK)]

    def work(chunk):
        draws = rng.uniforms(seed, chunk, max(n_steps, 1))
        return _run_batch(model, state0, dt, n_steps, draws, steps)

    workers = min(rng.thread_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    samples = np.concatenate([r[0] for r in results], axis=0)
    jumps = [[] for _ in ids]
    offset = 0
    for chunk, (_, js) in zip(chunks, results):
        for local, t, j in js:
            jumps[offset + local].append(JumpEvent(t, j))
        offset += len(chunk)
    return samples, jumps, steps * dt


def jump_unravel(model, state0, T, dt, seed, sample_times=None, trajectory_id=0):
    """Simulate one jump trajectory.

    ``state0`` is a state vector (pure-state mode) or a density matrix.
    Jumps are stamped with the end time of the step in which they occur.
    """
    samples, jumps, times = _simulate(model, state0, T, dt, seed, [trajectory_id], sample_times)
    return Trajectory(seed, trajectory_id, times, samples[0], jumps[0])


def jump_ensemble(model, state0, T, dt, n_trajectories, seed, sample_times=None):
    """Trajectories 0..n-1 under one master seed."""
    ids = list(range(n_trajectories))
    samples, jumps, times = _simulate(model, state0, T, dt, seed, ids, sample_times)
    return [Trajectory(seed, k, times, samples[k], jumps[k]) for k in ids]


@dataclass
class EnsembleResult:
    mean: np.ndarray
    stderr: np.ndarray
    n_trajectories: int
    dt: float
    horizon: float
    seed: int
    discrete_limit: np.ndarray
    statistical_error: float
    statistical_bound: float
    bias: float = None
    exact: np.ndarray = None
    trace_distance_to_exact: float = None
    jump_counts: list = None


def ensemble_average(model, state0, T, dt, n_trajectories, seed, exact=True, keep_jumps=False):
    """Mean trajectory state at ``T`` with error bars.

    The error is split into a statistical part (mean vs. the iterated
    averaged step, which the ensemble converges to) and the O(dt) bias
    (iterated averaged step vs. the exact propagator).
    """
    if n_trajectories < 1:
        raise ValueError("need at least one trajectory")
    ids = list(range(n_trajectories))
    samples, jumps, _ = _simulate(model, state0, T, dt, seed, ids, None)
    final = samples[:, -1]
    if final.ndim == 2:
        final = np.einsum("ma,mb->mab", final, final.conj())
    mean = rng.pairwise_sum(final) / n_trajectories
    sq = rng.pairwise_sum(np.abs(final - mean) ** 2)
    var = sq / max(n_trajectories - 1, 1)
    stderr = np.sqrt(var / n_trajectories)
    d = model.dim
    rho0 = np.asarray(state0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = qops.ket_to_dm(rho0)
    target = iterate_averaged_step(model, rho0, dt, _step_count(T, dt))
    res = EnsembleResult(
        mean=mean,
        stderr=stderr,
        n_trajectories=n_trajectories,
        dt=dt,
        horizon=T,
        seed=seed,
        discrete_limit=target,
        statistical_error=qops.trace_distance(mean, target),
        statistical_bound=3.0 * 0.5 * np.sqrt(d) * float(np.sqrt(var.sum() / n_trajectories)),
        jump_counts=[len(j) for j in jumps],
    )
    if keep_jumps:
        res.jumps = jumps
    if exact:
        ex = lindblad.propagate(model, rho0, T)
        res.exact = ex
        res.bias = qops.trace_distance(target, ex)
        res.trace_distance_to_exact = qops.trace_distance(mean, ex)
    return res
