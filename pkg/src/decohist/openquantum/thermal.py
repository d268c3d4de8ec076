"""Damped oscillator in contact with a thermal bath, on a truncated ladder."""

import numpy as np

from .. import qops
from ..qops import dag
from .lindblad import LindbladModel


def thermal_oscillator_model(N, omega, beta, gamma_minus):
    """Channels (a^+, gamma_+) and (a, gamma_-) with gamma_+ = gamma_- exp(-beta omega).

    ``beta = inf`` gives pure decay (gamma_+ = 0).
    """
    if N < 2 or not beta > 0 or not gamma_minus > 0 or not omega > 0:
        raise ValueError("need N >= 2 and positive omega, beta, gamma_minus")
    a = qops.lowering(N)
    H = omega * (dag(a) @ a)
    gamma_plus = gamma_minus * np.exp(-beta * omega)
    return LindbladModel(H, ((dag(a), gamma_plus), (a, gamma_minus)))


def thermal_state(N, omega, beta):
    w = np.exp(-beta * omega * np.arange(N))
    return np.diag(w / w.sum()).astype(complex)


def tail_weight(N, omega, beta):
    """Thermal weight of levels >= N in the untruncated oscillator."""
    return float(np.exp(-beta * omega * N))


def truncation_for_tail(omega, beta, tail=1e-8):
    """Smallest N whose untruncated tail weight is below ``tail``."""
    return max(2, int(np.floor(-np.log(tail) / (beta * omega))) + 1)


def jump_rates(model, rho):
    """gamma_j tr(L_j rho L_j^+) for each channel."""
    return [float(g * np.trace(L @ rho @ dag(L)).real) for L, g in model.channels]
