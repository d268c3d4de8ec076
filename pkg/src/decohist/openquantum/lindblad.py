"""Lindblad generators, their superoperators and exact propagation.

Superoperators act on row-major vectorized matrices, ``vec(A X B) =
(A kron B^T) vec(X)``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .. import qops
from .. import tolerances as tol
from ..qops import dag

#: Largest dimension propagated by exponentiating the d^2 x d^2 superoperator.
EXPM_MAX_DIM = 32


class IntegrationError(RuntimeError):
    pass


class DegenerateFixedPointError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """``H`` plus jump channels ``[(L_j, gamma_j), ...]``.

    Generator: -i[H, rho] - sum_j (gamma_j / 2)(L^+L rho - 2 L rho L^+ + rho L^+L).
    """

    H: np.ndarray
    channels: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        H = qops.as_operator(self.H)
        if not qops.is_hermitian(H):
            raise ValueError("Hamiltonian is not Hermitian")
        chans = []
        for L, g in self.channels:
            L = qops.as_operator(L, H.shape[0])
            g = float(g)
            if not g >= 0:
                raise ValueError("rates must be non-negative")
            chans.append((L, g))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "channels", tuple(chans))

    @property
    def dim(self):
        return self.H.shape[0]

    def superoperator(self):
        if "L" not in self._cache:
            self._cache["L"] = liouvillian(self)
        return self._cache["L"]


def liouvillian(model):
    d = model.dim
    eye = np.eye(d)
    H = model.H
    S = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for L, g in model.channels:
        LdL = dag(L) @ L
        S += g * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return S


def lindblad_rhs(model, rho):
    rho = qops.as_operator(rho, model.dim)
    out = -1j * (model.H @ rho - rho @ model.H)
    for L, g in model.channels:
        LdL = dag(L) @ L
        out -= 0.5 * g * (LdL @ rho - 2 * L @ rho @ dag(L) + rho @ LdL)
    return out


def channel_superoperator(model, t):
    """exp(t * Liouvillian), cached per time."""
    key = ("expm", float(t))
    if key not in model._cache:
        model._cache[key] = scipy.linalg.expm(model.superoperator() * t)
    return model._cache[key]


def _finish(rho):
    rho = 0.5 * (rho + dag(rho))
    lam = np.linalg.eigvalsh(rho).min()
    if lam < -1e-8:
        raise qops.NotPositiveError(f"propagated state has eigenvalue {lam:.3g}")
    return rho


def propagate(model, rho, t, method="auto", rtol=1e-10, atol=1e-12):
    """State at time ``t`` under the Lindblad flow.

    ``method`` is "expm" (exact superoperator exponential), "rk" (adaptive
    Runge-Kutta on the right-hand side) or "auto" (expm up to
    :data:`EXPM_MAX_DIM`).
    """
    rho = qops.validate_density_matrix(rho, model.dim)
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return rho.copy()
    d = model.dim
    if method == "auto":
        method = "expm" if d <= EXPM_MAX_DIM else "rk"
    if method == "expm":
        out = (channel_superoperator(model, t) @ rho.reshape(-1)).reshape(d, d)
    elif method == "rk":
        S = model.superoperator()
        sol = scipy.integrate.solve_ivp(lambda _t, y: S @ y, (0.0, t), rho.reshape(-1).astype(complex),
                                        method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise IntegrationError(sol.message)
        out = sol.y[:, -1].reshape(d, d)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _finish(out)


def spectrum(model):
    return np.linalg.eigvals(model.superoperator())


def fixed_point(model, zero_tol=1e-9):
    """The unique stationary state; raises if the kernel is degenerate."""
    w, V = np.linalg.eig(model.superoperator())
    zero = np.flatnonzero(np.abs(w) < zero_tol)
    if len(zero) != 1:
        raise DegenerateFixedPointError(f"{len(zero)} zero eigenvalues in the Liouvillian")
    d = model.dim
    rho = V[:, zero[0]].reshape(d, d)
    rho = rho / np.trace(rho)
    return _finish(rho)


def relaxation_time(model, zero_tol=1e-9):
    """1 / spectral gap: the slowest decay rate among nonzero Liouvillian modes."""
    w = spectrum(model)
    nonzero = w[np.abs(w) >= zero_tol]
    zeros = len(w) - len(nonzero)
    if zeros != 1:
        raise DegenerateFixedPointError(f"{zeros} zero eigenvalues in the Liouvillian")
    gap = float(np.min(-nonzero.real))
    if gap <= 0:
        raise DegenerateFixedPointError("a nonzero mode does not decay")
    return 1.0 / gap


def superoperator_to_kraus(S, d, cutoff=1e-14):
    """Kraus operators of the CP map with row-major superoperator ``S``."""
    C = S.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    C = 0.5 * (C + dag(C))
    w, V = np.linalg.eigh(C)
    if w.min() < -tol.get("psd_hard") * max(1.0, w.max()):
        raise qops.NotPositiveError("map is not completely positive")
    keep = np.flatnonzero(w > cutoff * max(1.0, w.max()))[::-1]
    return [np.sqrt(w[i]) * V[:, i].reshape(d, d) for i in keep]


def channel_kraus(model, t):
    if t == 0:
        return [np.eye(model.dim, dtype=complex)]
    return superoperator_to_kraus(channel_superoperator(model, t), model.dim)
