"""Histories of an open system whose events are spaced by Lindblad evolution.

Two equivalent routes are provided:

* ``"dilation"``: each interval's channel is realized as a unitary on
  system x a fresh environment register (Stinespring), every environment starts
  in ``|0>``, and the ordinary closed-system functional is evaluated on the
  enlarged space with projectors ``P x I``.
* ``"channel"``: D(a, b) = tr[P_n E_n(... E_1(P_1 rho P'_1) ...) P'_n] with the
  channels extended linearly to off-diagonal operators.
"""

from dataclasses import dataclass

import numpy as np

from .. import histories, qops
from .. import tolerances as tol
from ..qops import ProjectorFamily, dag
from . import lindblad

#: Largest enlarged dimension attempted by the dilation route.
DILATION_MAX_DIM = 512


def stinespring_unitary(kraus):
    """Unitary on system x environment with U(|psi>|0>) = sum_m K_m|psi>|m>."""
    d = kraus[0].shape[0]
    r = len(kraus)
    W = np.zeros((d * r, d), dtype=complex)
    for m, K in enumerate(kraus):
        W[m::r, :] = K
    if np.abs(dag(W) @ W - np.eye(d)).max() > 1e-9:
        raise ValueError("Kraus operators are not trace preserving")
    U = np.zeros((d * r, d * r), dtype=complex)
    U[:, 0::r] = W
    rest = qops._complement_basis(W, d * r)
    others = [j for j in range(d * r) if j % r != 0]
    U[:, others] = rest
    return U


def _embed(op, dims, k):
    """Lift ``op`` acting on factors (0, k) of a multipartite space to the full space."""
    n = len(dims)
    rest = [i for i in range(n) if i not in (0, k)]
    order = [0, k] + rest
    big = np.kron(op, np.eye(int(np.prod([dims[i] for i in rest])) if rest else 1))
    shape = [dims[i] for i in order]
    T = big.reshape(shape + shape)
    inv = np.argsort(order)
    T = T.transpose(list(inv) + [n + i for i in inv])
    D = int(np.prod(dims))
    return T.reshape(D, D)


def _as_list(spacings, n_gaps):
    s = np.atleast_1d(np.asarray(spacings, dtype=float))
    if s.size == 1:
        s = np.repeat(s, n_gaps)
    if s.size != n_gaps or np.any(s < 0):
        raise ValueError(f"need {n_gaps} non-negative spacings")
    return s


def _dilated_matrix(model, families, spacings, rho0):
    d = model.dim
    krauses = [lindblad.channel_kraus(model, s) for s in spacings]
    dims = [d] + [len(k) for k in krauses]
    D_total = int(np.prod(dims))
    env_eye = np.eye(D_total // d)
    fams = [ProjectorFamily(tuple(np.kron(P, env_eye) for P in f.members)) for f in families]
    gaps = [_embed(stinespring_unitary(k), dims, i + 1) for i, k in enumerate(krauses)]
    env0 = np.zeros(D_total // d)
    env0[0] = 1.0
    sched = histories.EventSchedule(range(len(fams)), fams, unitaries=gaps)
    D = histories.decoherence_functional(sched, np.kron(rho0, np.outer(env0, env0)))
    return sched.labels(), D.matrix()


def _channel_matrix(model, families, spacings, rho0):
    d = model.dim
    sups = [lindblad.channel_superoperator(model, s) if s > 0 else None for s in spacings]
    labels = histories.EventSchedule(range(len(families)), families).labels()
    n = len(labels)
    D = np.zeros((n, n), dtype=complex)
    for i, a in enumerate(labels):
        for j in range(i, n):
            b = labels[j]
            X = families[0][a[0]] @ rho0 @ families[0][b[0]]
            for k in range(1, len(families)):
                if sups[k - 1] is not None:
                    X = (sups[k - 1] @ X.reshape(-1)).reshape(d, d)
                X = families[k][a[k]] @ X @ families[k][b[k]]
            D[i, j] = np.trace(X)
            D[j, i] = np.conj(D[i, j])
    return labels, D


def open_decoherence_matrix(model, families, spacings, rho0, method="auto"):
    """Dense (labels, D) for projector families separated by Lindblad intervals."""
    families = list(families)
    if len(families) < 1:
        raise ValueError("need at least one event")
    spacings = _as_list(spacings, len(families) - 1)
    rho0 = qops.validate_density_matrix(rho0, model.dim)
    if method == "auto":
        ranks = [len(lindblad.channel_kraus(model, s)) for s in spacings]
        method = "dilation" if model.dim * np.prod(ranks, dtype=float) <= DILATION_MAX_DIM else "channel"
    if method == "dilation":
        return _dilated_matrix(model, families, spacings, rho0)
    if method == "channel":
        return _channel_matrix(model, families, spacings, rho0)
    raise ValueError(f"unknown method {method!r}")


def _max_ratio(D):
    floor = tol.get("diagonal_floor")
    p = np.real(np.diag(D))
    live = np.flatnonzero(p >= floor)
    if len(live) < 2:
        return 0.0
    sub = D[np.ix_(live, live)]
    R = np.abs(sub) ** 2 / np.outer(p[live], p[live])
    np.fill_diagonal(R, 0.0)
    return float(R.max())


@dataclass
class RelaxationRow:
    spacing_over_tau: float
    spacing: float
    max_ratio: float
    marginals: list
    max_marginal_deviation: float
    max_joint_deviation: float


@dataclass
class RelaxationReport:
    relaxation_time: float
    fixed_point: np.ndarray
    fixed_point_probabilities: list
    rows: list
    method: str


def relaxation_decoherence_experiment(model, families, spacing_ratios, rho0=None, method="auto"):
    """Max decoherence ratio for events spaced by s = x * tau, for each x given.

    ``rho0`` defaults to the fixed point.  Each row also compares the event
    marginals, and the joint history probabilities, with measurement on the
    fixed point.
    """
    tau = lindblad.relaxation_time(model)
    fp = lindblad.fixed_point(model)
    families = list(families)
    for f in families:
        if not isinstance(f, ProjectorFamily) or f.dim != model.dim:
            raise ValueError("families must be projector families on the model space")
    if rho0 is None:
        rho0 = fp
    fp_probs = [[float(np.trace(P @ fp).real) for P in f.members] for f in families]
    rows = []
    if method == "auto":
        worst = max(len(lindblad.channel_kraus(model, float(x) * tau)) for x in np.atleast_1d(spacing_ratios))
        span = model.dim * float(worst) ** (len(families) - 1)
        method = "dilation" if span <= DILATION_MAX_DIM else "channel"
    for x in np.atleast_1d(spacing_ratios):
        s = float(x) * tau
        labels, D = open_decoherence_matrix(model, families, s, rho0, method)
        p = np.real(np.diag(D))
        marg = []
        for k, f in enumerate(families):
            marg.append([float(sum(pp for lab, pp in zip(labels, p) if lab[k] == a)) for a in range(len(f))])
        dev = max(abs(m - q) for mk, qk in zip(marg[1:], fp_probs[1:]) for m, q in zip(mk, qk)) if len(marg) > 1 else 0.0
        # first event sees rho0, later events see the relaxed state
        first = [float(np.trace(P @ rho0).real) for P in families[0].members]
        joint = [first[lab[0]] * np.prod([fp_probs[k][lab[k]] for k in range(1, len(families))])
                 for lab in labels]
        rows.append(RelaxationRow(float(x), s, _max_ratio(D), marg, float(dev),
                                  float(np.max(np.abs(p - np.array(joint))))))
    return RelaxationReport(tau, fp, fp_probs, rows, method)
