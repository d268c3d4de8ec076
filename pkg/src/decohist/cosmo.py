"""de Sitter thermodynamics and reinflation/fluctuation log-probabilities.

Planck units (G = c = hbar = k_B = 1).  Probabilities and times are kept as
natural logarithms throughout; nothing here exponentiates, so realistic
cosmological terms (~1e-122) are safe.
"""

import math
from dataclasses import dataclass
from functools import cached_property

_REL = 1e-12


def _check_positive(**values):
    for name, v in values.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive and finite, got {v!r}")


def _agree(a, b, what):
    scale = max(abs(a), abs(b), 1e-300)
    if abs(a - b) > _REL * scale:
        raise ArithmeticError(f"{what}: {a!r} != {b!r}")


@dataclass(frozen=True)
class DeSitterPhase:
    """Cosmological term with its horizon length, temperature and entropy."""

    cosmological_term: float
    length: float
    temperature: float
    entropy: float

    @classmethod
    def from_lambda(cls, lam):
        _check_positive(cosmological_term=lam)
        ell = math.sqrt(3.0 / lam)
        return cls(lam, ell, 1.0 / (2 * math.pi * ell), math.pi * ell * ell)

    @classmethod
    def from_length(cls, ell):
        _check_positive(length=ell)
        return cls(3.0 / (ell * ell), ell, 1.0 / (2 * math.pi * ell), math.pi * ell * ell)

    @classmethod
    def from_temperature(cls, T):
        _check_positive(temperature=T)
        return cls.from_length(1.0 / (2 * math.pi * T))

    @classmethod
    def from_entropy(cls, S):
        _check_positive(entropy=S)
        return cls.from_length(math.sqrt(S / math.pi))


def de_sitter_from_lambda(lam):
    return DeSitterPhase.from_lambda(lam)


@dataclass(frozen=True)
class ReinflationParams:
    """High phase ``lambda0``, low phase ``lambda1`` and the O(1) size constant ``C``."""

    lambda0: float
    lambda1: float
    C: float = 1.0

    def __post_init__(self):
        _check_positive(lambda0=self.lambda0, lambda1=self.lambda1, C=self.C)
        if self.lambda1 > self.lambda0:
            raise ValueError("need lambda0 >= lambda1")

    @cached_property
    def high(self):
        return DeSitterPhase.from_lambda(self.lambda0)

    @cached_property
    def low(self):
        return DeSitterPhase.from_lambda(self.lambda1)

    @cached_property
    def log_probability(self):
        return _checked_log_probability(self)


@dataclass(frozen=True)
class FluctuationSpec:
    """Fluctuation with energy ``energy`` and entropy deficit ``entropy_deficit``."""

    energy: float
    entropy_deficit: float

    def __post_init__(self):
        if not (self.energy >= 0 and self.entropy_deficit >= 0):
            raise ValueError("energy and entropy deficit must be non-negative")


def reinflation_energy(params):
    """Energy 3 C^3 l0 needed to fill a region of radius C l0 at density lambda0.

    Cross-checked against (C l0)^3 * lambda0.
    """
    ell0 = params.high.length
    energy = 3.0 * params.C ** 3 * ell0
    _agree(energy, (params.C * ell0) ** 3 * params.lambda0, "reinflation energy")
    return energy


def reinflation_spec(params):
    """The reinflation event as a generic fluctuation (energy, entropy deficit S0)."""
    return FluctuationSpec(reinflation_energy(params), params.high.entropy)


def fluctuation_log_probability(spec, T1):
    """log of exp(-dE/T1 - dS)."""
    _check_positive(T1=T1)
    return -spec.energy / T1 - spec.entropy_deficit


def _checked_log_probability(params):
    high, low = params.high, params.low
    logp = fluctuation_log_probability(reinflation_spec(params), low.temperature)
    C3 = params.C ** 3
    lengths = -6 * math.pi * C3 * high.length * low.length - math.pi * high.length ** 2
    entropies = -6 * C3 * math.sqrt(high.entropy * low.entropy) - high.entropy
    _agree(logp, lengths, "reinflation log-probability (length form)")
    _agree(logp, entropies, "reinflation log-probability (entropy form)")
    return logp


def reinflation_log_probability(params):
    """-6 pi C^3 l0 l1 - pi l0^2, checked against -6 C^3 sqrt(S0 S1) - S0.

    Evaluated once per parameter set and cached on it.
    """
    return params.log_probability


def recurrence_log_time(params):
    """(log tau1, prefactor 4 pi^2 l1) with tau1 = 4 pi^2 l1 / p_reinflate."""
    prefactor = 4 * math.pi ** 2 * params.low.length
    return math.log(prefactor) - reinflation_log_probability(params), prefactor


@dataclass(frozen=True)
class BrainComparison:
    log_odds: float
    verdict: str
    log_p_reinflation: float
    log_p_brain: float
    exceeds_reinflation_energy: bool
    exceeds_horizon_energy: bool


def compare_boltzmann_brain(params, brain):
    """log p(reinflate) - log p(brain) at the low-phase temperature.

    Positive log-odds mean reinflation (and ordinary, evolved observers)
    wins.  Both energy thresholds are reported: 3 C^3 l0 and plain l0.
    """
    T1 = params.low.temperature
    log_re = reinflation_log_probability(params)
    log_brain = fluctuation_log_probability(brain, T1)
    odds = log_re - log_brain
    if odds > 0:
        verdict = "ordinary-brains-dominate"
    elif odds < 0:
        verdict = "boltzmann-brains-dominate"
    else:
        verdict = "balanced"
    return BrainComparison(
        log_odds=odds,
        verdict=verdict,
        log_p_reinflation=log_re,
        log_p_brain=log_brain,
        exceeds_reinflation_energy=brain.energy > reinflation_energy(params),
        exceeds_horizon_energy=brain.energy > params.high.length,
    )


def sweep(lambda0, lambda1_values, C=1.0, brain=None):
    """One row per lambda1: log p_reinflate, log tau1 and, with a brain, its log p and log-odds."""
    rows = []
    for lam1 in lambda1_values:
        params = ReinflationParams(lambda0, lam1, C)
        log_tau, _ = recurrence_log_time(params)
        row = {
            "lambda1": lam1,
            "log_p_reinflate": reinflation_log_probability(params),
            "log_tau1": log_tau,
        }
        if brain is not None:
            cmp = compare_boltzmann_brain(params, brain)
            row["log_p_brain"] = cmp.log_p_brain
            row["log_odds"] = cmp.log_odds
        rows.append(row)
    return rows
