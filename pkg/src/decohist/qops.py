"""Dense operator algebra on finite Hilbert spaces.

Operators, states and density matrices are plain complex ``numpy`` arrays;
the helpers here validate them and supply the few primitives the rest of the
package needs (propagators, polar decomposition, Hermitian square roots,
tensor products and partial traces).  hbar = 1 throughout.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import tolerances as tol


class DimensionError(ValueError):
    """Operands live on Hilbert spaces of different dimension."""


class NotPositiveError(ValueError):
    """An operator expected to be positive semidefinite is not."""


def as_operator(A, dim=None):
    """Return ``A`` as a finite square complex matrix, checking ``dim``."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if dim is not None and A.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {A.shape[0]}")
    if not np.all(np.isfinite(A)):
        raise ValueError("operator has non-finite entries")
    return A


def dag(A):
    return np.conj(np.swapaxes(A, -1, -2))


def is_hermitian(A, atol=None):
    atol = tol.get("structural") if atol is None else atol
    return bool(np.abs(A - dag(A)).max(initial=0.0) <= atol)


def is_unitary(U, atol=None):
    atol = tol.get("structural") if atol is None else atol
    eye = np.eye(U.shape[0])
    return bool(np.abs(dag(U) @ U - eye).max(initial=0.0) <= atol)


def validate_state_vector(psi, dim=None):
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {psi.size}")
    if not np.all(np.isfinite(psi)):
        raise ValueError("state vector has non-finite entries")
    if abs(np.linalg.norm(psi) - 1.0) > tol.get("structural"):
        raise ValueError("state vector is not normalized")
    return psi


def validate_density_matrix(rho, dim=None):
    """Check Hermiticity, unit trace and positivity; return ``rho`` as an array."""
    rho = as_operator(rho, dim)
    eps = tol.get("structural")
    if not is_hermitian(rho, eps):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > eps:
        raise ValueError(f"density matrix has trace {np.trace(rho).real:.12g}")
    if np.linalg.eigvalsh(rho).min() < -tol.get("psd"):
        raise NotPositiveError("density matrix has a negative eigenvalue")
    return rho


def ket_to_dm(psi):
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def basis_state(dim, index):
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e


def trace_norm(X):
    return float(np.linalg.svd(X, compute_uv=False).sum())


def trace_distance(rho, sigma):
    return 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))


def _check_family_dims(members, dim):
    if not members:
        raise ValueError("a measurement family needs at least one member")
    ops = tuple(as_operator(m) for m in members)
    d = ops[0].shape[0] if dim is None else dim
    for m in ops:
        if m.shape[0] != d:
            raise DimensionError("family members differ in dimension")
    return ops, d


@dataclass(frozen=True, eq=False)
class ProjectorFamily:
    """Exhaustive, mutually exclusive projectors {P_a}.

    Construction validates P^2 = P = P^dagger, P_a P_b = 0 for a != b and
    sum_a P_a = I, all to the ``structural`` tolerance.
    """

    members: tuple
    dim: int = None

    def __post_init__(self):
        ops, d = _check_family_dims(self.members, self.dim)
        object.__setattr__(self, "members", ops)
        object.__setattr__(self, "dim", d)
        eps = tol.get("structural")
        ranges = []
        for a, P in enumerate(ops):
            if not is_hermitian(P, eps):
                raise ValueError(f"member {a} is not Hermitian")
            if np.abs(P @ P - P).max() > eps:
                raise ValueError(f"member {a} is not idempotent")
            w, V = np.linalg.eigh(P)
            ranges.append(V[:, w > 0.5])
        # ||P_a P_b|| = ||B_a^+ B_b|| for orthonormal range bases B; the Frobenius
        # norm of each cross block bounds every entry of P_a P_b.
        B = np.concatenate(ranges, axis=1)
        G = np.abs(dag(B) @ B) ** 2
        edges = np.cumsum([0] + [r.shape[1] for r in ranges])
        for a in range(len(ops)):
            row = G[edges[a]:edges[a + 1]]
            for b in range(a + 1, len(ops)):
                if np.sqrt(row[:, edges[b]:edges[b + 1]].sum()) > eps:
                    raise ValueError(f"members {a} and {b} are not orthogonal")
        if np.abs(sum(ops) - np.eye(d)).max() > eps:
            raise ValueError("projectors do not sum to the identity")

    def __len__(self):
        return len(self.members)

    def __getitem__(self, a):
        return self.members[a]

    def kraus(self):
        return self.members

    @classmethod
    def from_basis(cls, vectors, groups=None):
        """Projectors onto groups of columns of an orthonormal ``vectors`` matrix.

        ``groups`` is a list of column-index lists; by default each column is
        its own rank-1 projector.
        """
        V = np.asarray(vectors, dtype=complex)
        if groups is None:
            groups = [[j] for j in range(V.shape[1])]
        members = []
        for g in groups:
            B = V[:, list(g)]
            members.append(B @ dag(B))
        return cls(tuple(members))


@dataclass(frozen=True, eq=False)
class KrausFamily:
    """Generalized measurement {K_a} with sum_a K_a^dagger K_a = I."""

    members: tuple
    dim: int = None

    def __post_init__(self):
        ops, d = _check_family_dims(self.members, self.dim)
        object.__setattr__(self, "members", ops)
        object.__setattr__(self, "dim", d)
        total = sum(dag(K) @ K for K in ops)
        if np.abs(total - np.eye(d)).max() > tol.get("structural"):
            raise ValueError("Kraus operators are not complete")

    def __len__(self):
        return len(self.members)

    def __getitem__(self, a):
        return self.members[a]

    def kraus(self):
        return self.members


def matrix_exponential(A, t=1.0, propagator=True):
    """``exp(-i A t)`` in propagator mode, ``exp(A t)`` otherwise.

    Hermitian input goes through an eigendecomposition, which keeps the
    propagator unitary to rounding; anything else uses scaling-and-squaring
    Pade.
    """
    A = as_operator(A)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    scale = -1j * t if propagator else t
    if is_hermitian(A):
        w, V = np.linalg.eigh(0.5 * (A + dag(A)))
        return (V * np.exp(scale * w)) @ dag(V)
    return scipy.linalg.expm(scale * A)


def hermitian_sqrt(A):
    """Positive square root of a Hermitian PSD operator.

    Eigenvalues in [-psd_hard, 0) are treated as rounding noise and clamped.
    """
    A = as_operator(A)
    if not is_hermitian(A, max(tol.get("structural"), 1e-12 * np.abs(A).max())):
        raise ValueError("hermitian_sqrt needs a Hermitian operator")
    w, V = np.linalg.eigh(0.5 * (A + dag(A)))
    if w.size and w.min() < -tol.get("psd_hard"):
        raise NotPositiveError(f"operator has eigenvalue {w.min():.3g} < 0")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ dag(V)


def _complement_basis(span, dim, rtol=1e-10):
    """Orthonormal basis of span(columns)^perp, built by Gram-Schmidt on the
    standard basis vectors taken in index order."""
    basis = [span[:, j] for j in range(span.shape[1])]
    out = []
    for i in range(dim):
        v = basis_state(dim, i)
        for b in basis + out:
            v = v - b * np.vdot(b, v)
        # second pass for stability
        for b in basis + out:
            v = v - b * np.vdot(b, v)
        n = np.linalg.norm(v)
        if n > rtol:
            out.append(v / n)
        if len(out) == dim - span.shape[1]:
            break
    return np.array(out).T.reshape(dim, len(out))


def polar_decompose(L, rank_tol=1e-12):
    """Write ``L = U A`` with ``A = (L^dagger L)^(1/2)`` and ``U`` unitary.

    On range(A), ``U`` is fixed by ``UA = L``.  On ker(A) the decomposition is
    not unique; the kernel basis obtained by Gram-Schmidt of e_0, e_1, ...
    is mapped, in order, onto the basis of range(L)^perp built the same way.

    Returns
    -------
    U, A : ndarray
    """
    L = as_operator(L)
    d = L.shape[0]
    W, s, Vh = np.linalg.svd(L)
    V = dag(Vh)
    A = (V * s) @ Vh
    A = 0.5 * (A + dag(A))
    cutoff = rank_tol * max(1.0, s.max(initial=0.0))
    r = int(np.sum(s > cutoff))
    U = W[:, :r] @ Vh[:r, :]
    if r < d:
        kernel = _complement_basis(V[:, :r], d)
        target = _complement_basis(W[:, :r], d)
        U = U + target @ dag(kernel)
    return U, A


def tensor_product(A, B):
    return np.kron(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex))


def partial_trace(X, dims, keep=0):
    """Trace out one factor of a bipartite operator.

    Parameters
    ----------
    X : (dA*dB, dA*dB) array
    dims : (dA, dB)
    keep : 0 keeps the first factor (traces out B), 1 keeps the second.
    """
    dA, dB = dims
    X = as_operator(X)
    if X.shape[0] != dA * dB:
        raise DimensionError(f"operator dimension {X.shape[0]} != {dA}*{dB}")
    T = X.reshape(dA, dB, dA, dB)
    if keep == 0:
        return np.einsum("ijkj->ik", T)
    if keep == 1:
        return np.einsum("ijil->jl", T)
    raise ValueError("keep must be 0 or 1")


def pauli():
    """The Pauli matrices (sx, sy, sz)."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def lowering(dim):
    """Truncated annihilation operator a|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)
