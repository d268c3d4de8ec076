"""Class operators and decoherence functionals for event schedules.

A schedule is an ordered list of measurement families (projective or Kraus)
at strictly increasing times, with unitary propagation in between.  The class
operator of a history ``alpha = (a_1, ..., a_n)`` is the Schroedinger-picture
chain ``C = P^n_{a_n} U_{n-1} ... U_1 P^1_{a_1}`` and the decoherence
functional is ``D(alpha, beta) = tr(rho_f C_alpha rho_i C_beta^dagger) / Z``
(``rho_f = I`` and ``Z = 1`` unless a final state is given).

Internally ``rho_i = X X^dagger`` and ``rho_f = Y Y^dagger`` are factored, so
each history contributes one vector ``m_alpha = vec(Y^dagger C_alpha X)``
and ``D = m m^dagger / Z`` is a Gram matrix.  Histories whose prefix already
annihilates the state are pruned while the tree is walked.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import qops
from . import tolerances as tol
from .qops import KrausFamily, ProjectorFamily, dag

#: Largest label count for which the full D matrix is materialized.
MATERIALIZE_LIMIT = 4096
_BLOCK = 1024


class MissingPropagatorError(LookupError):
    """A branch-dependent propagator rule has no unitary for some prefix."""


class OrthogonalEndpointsError(ValueError):
    """tr(rho_f rho_i) is too small to normalize a time-symmetric functional."""


@dataclass(frozen=True, eq=False)
class EventSchedule:
    """Measurement events at ``times`` with unitary evolution between them.

    Exactly one propagation rule is used, in this order of precedence:
    ``branch_rule(gap, prefix)`` (prefix = outcomes of events 0..gap),
    one explicit unitary per gap, evolution under ``hamiltonian``, or the
    identity.  With a Hamiltonian, ``initial_time``/``final_time`` place the
    initial/final states before the first and after the last event.
    """

    times: tuple
    families: tuple
    hamiltonian: np.ndarray = None
    unitaries: tuple = None
    branch_rule: object = None
    initial_time: float = None
    final_time: float = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        families = tuple(self.families)
        if len(times) != len(families) or not families:
            raise ValueError("need one family per event time, and at least one event")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        for f in families:
            if not isinstance(f, (ProjectorFamily, KrausFamily)):
                raise TypeError("families must be ProjectorFamily or KrausFamily")
        d = families[0].dim
        if any(f.dim != d for f in families):
            raise qops.DimensionError("families differ in Hilbert dimension")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "families", families)
        if self.hamiltonian is not None:
            H = qops.as_operator(self.hamiltonian, d)
            if not qops.is_hermitian(H):
                raise ValueError("Hamiltonian is not Hermitian")
            object.__setattr__(self, "hamiltonian", H)
        if self.unitaries is not None:
            us = tuple(qops.as_operator(U, d) for U in self.unitaries)
            if len(us) != len(times) - 1:
                raise ValueError(f"need {len(times) - 1} gap unitaries, got {len(us)}")
            for U in us:
                if not qops.is_unitary(U):
                    raise ValueError("gap propagator is not unitary")
            object.__setattr__(self, "unitaries", us)
        if (self.initial_time is not None and self.initial_time > times[0]) or (
            self.final_time is not None and self.final_time < times[-1]
        ):
            raise ValueError("initial/final times must bracket the events")

    @property
    def dim(self):
        return self.families[0].dim

    @property
    def n_events(self):
        return len(self.families)

    @property
    def is_projective(self):
        return all(isinstance(f, ProjectorFamily) for f in self.families)

    @property
    def n_labels(self):
        return int(np.prod([len(f) for f in self.families]))

    def labels(self):
        return list(itertools.product(*(range(len(f)) for f in self.families)))

    def _evolve(self, dt):
        if self.hamiltonian is None or dt == 0:
            return None
        key = ("H", dt)
        if key not in self._cache:
            self._cache[key] = qops.matrix_exponential(self.hamiltonian, dt)
        return self._cache[key]

    def gap_unitary(self, gap, prefix):
        """Propagator from event ``gap`` to event ``gap + 1``; None means identity."""
        if self.branch_rule is not None:
            U = self.branch_rule(gap, tuple(prefix))
            if U is None:
                raise MissingPropagatorError(f"no propagator for gap {gap}, prefix {tuple(prefix)}")
            return qops.as_operator(U, self.dim)
        if self.unitaries is not None:
            return self.unitaries[gap]
        return self._evolve(self.times[gap + 1] - self.times[gap])

    def initial_unitary(self):
        if self.initial_time is None:
            return None
        return self._evolve(self.times[0] - self.initial_time)

    def final_unitary(self):
        if self.final_time is None:
            return None
        return self._evolve(self.final_time - self.times[-1])

    def with_families(self, families):
        return EventSchedule(self.times, families, self.hamiltonian, self.unitaries,
                             self.branch_rule, self.initial_time, self.final_time)

    def with_times(self, times, initial_time=None, final_time=None):
        return EventSchedule(times, self.families, self.hamiltonian, self.unitaries,
                             self.branch_rule, initial_time, final_time)


def _apply(U, S):
    return S if U is None else U @ S


def class_operator(schedule, label):
    """The history operator C_alpha, including any initial/final propagation."""
    label = tuple(label)
    if len(label) != schedule.n_events:
        raise ValueError("label length does not match the schedule")
    for a, f in zip(label, schedule.families):
        if not 0 <= a < len(f):
            raise ValueError(f"outcome {a} out of range for a family of size {len(f)}")
    C = np.eye(schedule.dim, dtype=complex)
    C = _apply(schedule.initial_unitary(), C)
    for k, a in enumerate(label):
        if k > 0:
            C = _apply(schedule.gap_unitary(k - 1, label[:k]), C)
        C = schedule.families[k][a] @ C
    return _apply(schedule.final_unitary(), C)


def _factor(rho):
    """X with X X^dagger = rho, keeping only the numerically nonzero spectrum."""
    w, V = np.linalg.eigh(0.5 * (rho + dag(rho)))
    keep = w > 1e-15 * max(w.max(initial=0.0), 1.0)
    return V[:, keep] * np.sqrt(w[keep])


def _history_vectors(schedule, X, Y=None, prune=1e-14):
    """Walk the outcome tree; return {label: vec(Y^dagger C X)} for live branches."""
    n = schedule.n_events
    fams = schedule.families
    U_fin = schedule.final_unitary()
    cut = prune * max(np.linalg.norm(X), 1.0)
    out = {}

    def finish(S):
        S = _apply(U_fin, S)
        if Y is not None:
            S = dag(Y) @ S
        return S.reshape(-1)

    def walk(k, prefix, S):
        if k > 0:
            S = _apply(schedule.gap_unitary(k - 1, prefix), S)
        for a, K in enumerate(fams[k].kraus()):
            T = K @ S
            if np.linalg.norm(T) <= cut:
                continue
            lab = prefix + (a,)
            if k == n - 1:
                out[lab] = finish(T)
            else:
                walk(k + 1, lab, T)

    walk(0, (), _apply(schedule.initial_unitary(), X))
    return out


class DecoherenceFunctional:
    """D(alpha, beta) over all histories of a schedule.

    Only histories with a nonzero chain are stored; all other entries are
    exactly zero.  Use :meth:`matrix` for the dense table (label count up to
    :data:`MATERIALIZE_LIMIT`) or :meth:`entry`/:meth:`iter_pairs` otherwise.
    """

    def __init__(self, schedule, vectors, rho_i, rho_f=None, normalization=1.0):
        self.schedule = schedule
        self.rho_i = rho_i
        self.rho_f = rho_f
        self.normalization = float(normalization)
        self._vectors = vectors
        self.support = list(vectors)
        self._index = {lab: i for i, lab in enumerate(self.support)}
        if vectors:
            self._M = np.array([vectors[lab] for lab in self.support])
        else:
            self._M = np.zeros((0, 1), dtype=complex)

    @property
    def has_final_state(self):
        return self.rho_f is not None

    @property
    def labels(self):
        return self.schedule.labels()

    @property
    def n_labels(self):
        return self.schedule.n_labels

    def entry(self, a, b):
        a, b = tuple(a), tuple(b)
        if a not in self._vectors or b not in self._vectors:
            return 0.0 + 0.0j
        return complex(np.vdot(self._vectors[b], self._vectors[a]) / self.normalization)

    def __getitem__(self, pair):
        return self.entry(*pair)

    def support_diagonal(self):
        return np.einsum("ij,ij->i", self._M, self._M.conj()).real / self.normalization

    def diagonal(self):
        """{label: D(label, label)} over every label, zeros included."""
        diag = dict.fromkeys(self.labels, 0.0)
        diag.update(zip(self.support, self.support_diagonal()))
        return diag

    def support_matrix(self):
        if len(self.support) > MATERIALIZE_LIMIT:
            raise MemoryError("support too large to materialize; use iter_pairs")
        return (self._M @ dag(self._M)) / self.normalization

    def matrix(self):
        """Dense D indexed like ``self.labels``."""
        if self.n_labels > MATERIALIZE_LIMIT:
            raise MemoryError(f"{self.n_labels} labels exceed the materialization limit")
        labels = self.labels
        where = {lab: i for i, lab in enumerate(labels)}
        pos = np.array([where[lab] for lab in self.support], dtype=int)
        D = np.zeros((len(labels), len(labels)), dtype=complex)
        if len(pos):
            D[np.ix_(pos, pos)] = self.support_matrix()
        return D

    def blocks(self, block=_BLOCK):
        """Yield (i0, j0, D-block) over the upper block triangle of the support."""
        M = self._M
        m = len(self.support)
        for i0 in range(0, m, block):
            for j0 in range(i0, m, block):
                yield i0, j0, (M[i0:i0 + block] @ dag(M[j0:j0 + block])) / self.normalization

    def iter_pairs(self):
        """Stream ((alpha, beta), D) for alpha < beta in support order."""
        for i0, j0, B in self.blocks():
            for i in range(B.shape[0]):
                for j in range(B.shape[1]):
                    if j0 + j > i0 + i:
                        yield (self.support[i0 + i], self.support[j0 + j]), complex(B[i, j])

    def max_offdiagonal(self):
        best = 0.0
        for i0, j0, B in self.blocks():
            A = np.abs(B)
            if i0 == j0:
                A = np.triu(A, k=1)
            best = max(best, float(A.max(initial=0.0)))
        return best


def _functional(schedule, rho_i, rho_f, normalization):
    d = schedule.dim
    rho_i = qops.validate_density_matrix(rho_i, d)
    Y = None
    if rho_f is not None:
        rho_f = qops.validate_density_matrix(rho_f, d)
        Y = _factor(rho_f)
    vectors = _history_vectors(schedule, _factor(rho_i), Y)
    return DecoherenceFunctional(schedule, vectors, rho_i, rho_f, normalization)


def decoherence_functional(schedule, rho_i):
    """D(alpha, beta) = tr(C_alpha rho_i C_beta^dagger)."""
    return _functional(schedule, rho_i, None, 1.0)


def time_symmetric_functional(schedule, rho_i, rho_f):
    """D(alpha, beta) = tr(rho_f C_alpha rho_i C_beta^dagger) / tr(rho_f rho_i)."""
    Z = float(np.trace(np.asarray(rho_f) @ np.asarray(rho_i)).real)
    if Z <= tol.get("endpoint_floor"):
        raise OrthogonalEndpointsError(f"tr(rho_f rho_i) = {Z:.3g} is below the floor")
    return _functional(schedule, rho_i, rho_f, Z)


def history_probabilities(D):
    """p(alpha) = Re D(alpha, alpha), clamped at zero.

    Only meaningful without a final state; the probabilities then sum to one.
    """
    if D.has_final_state:
        raise ValueError("probabilities need a functional without a final state")
    probs = {}
    for lab, p in D.diagonal().items():
        if p < -tol.get("structural"):
            raise ValueError(f"negative diagonal {p:.3g} for history {lab}")
        probs[lab] = max(p, 0.0)
    total = sum(probs.values())
    if abs(total - 1.0) > tol.get("roundtrip"):
        raise ValueError(f"history probabilities sum to {total:.12g}")
    return probs


def decoherence_ratio(D, a, b):
    """|D(a,b)|^2 / (D(a,a) D(b,b)), or None if either diagonal is below the floor."""
    floor = tol.get("diagonal_floor")
    pa, pb = D.entry(a, a).real, D.entry(b, b).real
    if pa < floor or pb < floor:
        return None
    return abs(D.entry(a, b)) ** 2 / (pa * pb)


@dataclass
class DecoherenceCheck:
    decoherent: bool
    worst_pair: tuple
    worst_ratio: float
    epsilon: float
    n_pairs: int


def _ratio_blocks(D):
    floor = tol.get("diagonal_floor")
    diag = D.support_diagonal()
    live = diag >= floor
    for i0, j0, B in D.blocks():
        di = diag[i0:i0 + B.shape[0]]
        dj = diag[j0:j0 + B.shape[1]]
        mask = np.outer(live[i0:i0 + B.shape[0]], live[j0:j0 + B.shape[1]])
        if i0 == j0:
            mask &= np.triu(np.ones(B.shape, dtype=bool), k=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.abs(B) ** 2 / np.outer(di, dj)
        yield i0, j0, R, mask


def is_decoherent(D, epsilon=None):
    """Whether every defined off-diagonal ratio is at most ``epsilon``.

    Pairs with a diagonal below the floor are skipped.  The worst pair and its
    ratio are reported either way (None/0.0 when no pair is defined).
    """
    epsilon = tol.get("epsilon") if epsilon is None else float(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    worst, worst_pair, count = 0.0, None, 0
    for i0, j0, R, mask in _ratio_blocks(D):
        count += int(mask.sum())
        if not mask.any():
            continue
        Rm = np.where(mask, R, -1.0)
        i, j = np.unravel_index(np.argmax(Rm), Rm.shape)
        if Rm[i, j] > worst or worst_pair is None:
            worst = float(Rm[i, j])
            worst_pair = (D.support[i0 + i], D.support[j0 + j])
    return DecoherenceCheck(worst <= epsilon, worst_pair, worst, epsilon, count)


@dataclass
class RatioTable:
    """Pairwise ratios among histories whose diagonal clears the floor."""

    labels: list
    ratios: np.ndarray
    functional: DecoherenceFunctional

    def defined(self):
        iu = np.triu_indices(len(self.labels), k=1)
        return self.ratios[iu]

    def max(self):
        v = self.defined()
        return float(v.max()) if v.size else 0.0

    def min(self):
        v = self.defined()
        return float(v.min()) if v.size else 0.0


def ratio_table(D):
    floor = tol.get("diagonal_floor")
    diag = D.support_diagonal()
    keep = np.flatnonzero(diag >= floor)
    if len(keep) > MATERIALIZE_LIMIT:
        raise MemoryError("too many live histories for a dense ratio table")
    G = D.support_matrix()[np.ix_(keep, keep)]
    dk = diag[keep]
    R = np.abs(G) ** 2 / np.outer(dk, dk)
    np.fill_diagonal(R, np.nan)
    return RatioTable([D.support[i] for i in keep], R, D)


def pure_endpoint_ratio(schedule, psi, phi):
    """Ratios for D(alpha, beta) = <phi|C_alpha|psi><psi|C_beta^dagger|phi>.

    Unnormalized, so orthogonal endpoints are allowed.  Every pair of
    histories with nonzero amplitude has ratio one.
    """
    d = schedule.dim
    psi = qops.validate_state_vector(psi, d)
    phi = qops.validate_state_vector(phi, d)
    D = _functional(schedule, qops.ket_to_dm(psi), qops.ket_to_dm(phi), 1.0)
    return ratio_table(D)


def sum_rule_violation(schedule, rho_i, outcome):
    """|p(x) with earlier events summed coherently - sum over prefixes of p(prefix, x)|.

    The coherent side is ||sum_prefix C_(prefix,x) rho^(1/2)||^2 and the
    incoherent side is the sum of the individual history probabilities.
    """
    if schedule.n_events < 2:
        return 0.0
    if not 0 <= outcome < len(schedule.families[-1]):
        raise ValueError("final-event outcome out of range")
    D = decoherence_functional(schedule, rho_i)
    rows = [i for i, lab in enumerate(D.support) if lab[-1] == outcome]
    if not rows:
        return 0.0
    M = D._M[rows]
    coherent = float(np.vdot(M.sum(axis=0), M.sum(axis=0)).real)
    incoherent = float(np.einsum("ij,ij->", M, M.conj()).real)
    return abs(coherent - incoherent)
