"""Truncated harmonic oscillator: energy and phase bases and canned schedules.

With ``H = omega * diag(0, ..., N-1)`` and step ``dt = 2*pi / (N*omega)``,
``U = exp(-i H dt)`` maps the phase state ``|phi_j>`` onto ``|phi_{j-1}>``
exactly (indices mod N).  That is the rotation direction of
``exp(-iHt)`` acting on ``N^(-1/2) sum_l exp(i l phi) |l>``; see
:data:`STEP_DIRECTION`.
"""

from dataclasses import dataclass

import numpy as np

from . import histories, qops
from .qops import ProjectorFamily

#: Phase index shift produced by one step of the propagator.
STEP_DIRECTION = -1


@dataclass(frozen=True)
class TruncatedOscillator:
    N: int
    omega: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("need N >= 2 levels")
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @property
    def hamiltonian(self):
        return self.omega * np.diag(np.arange(self.N)).astype(complex)

    @property
    def step_time(self):
        return 2 * np.pi / (self.N * self.omega)

    def ground(self):
        return qops.basis_state(self.N, 0)

    def successor(self, j, steps=1):
        return (j + STEP_DIRECTION * steps) % self.N


def phase_states(osc):
    """Columns are the phase states: <l|phi_j> = N^(-1/2) exp(2 pi i l j / N)."""
    N = osc.N
    l = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    return np.exp(2j * np.pi * l * j / N) / np.sqrt(N)


def energy_projectors(osc):
    return ProjectorFamily.from_basis(np.eye(osc.N))


def phase_projectors(osc):
    return ProjectorFamily.from_basis(phase_states(osc))


def step_unitary(osc):
    # diagonal H, so the exponential is exact elementwise
    return np.diag(np.exp(-1j * osc.omega * np.arange(osc.N) * osc.step_time))


def phase_history_schedule(osc, n_steps):
    """Phase-state projectors at t = 0, dt, ..., (n_steps - 1) dt."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    fam = phase_projectors(osc)
    times = [k * osc.step_time for k in range(n_steps)]
    return histories.EventSchedule(times, [fam] * n_steps, hamiltonian=osc.hamiltonian)


def energy_history_schedule(osc, n_steps, times=None):
    """Energy-eigenstate projectors at arbitrary increasing times."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if times is None:
        times = [k * osc.step_time for k in range(n_steps)]
    if len(times) != n_steps:
        raise ValueError("need one time per step")
    fam = energy_projectors(osc)
    return histories.EventSchedule(times, [fam] * n_steps, hamiltonian=osc.hamiltonian)


def successor_chains(osc, n_steps):
    """The N histories (j, j+s, j+2s, ...) allowed by deterministic phase evolution."""
    return [tuple(osc.successor(j, k) for k in range(n_steps)) for j in range(osc.N)]


def mixed_basis_coherence_demo(osc, n_events=1):
    """Ground state -> phase events -> ground-state projector.

    Pure endpoints make every pair of live histories fully coherent; the
    report carries the same check for the two decoherent controls (energy
    histories, and phase histories closed on the matching phase state).
    """
    sched = phase_history_schedule(osc, n_events)
    g = osc.ground()
    # the last event sits at (n_events - 1) dt; close one step later
    closing = sched.with_times(sched.times, initial_time=0.0,
                               final_time=sched.times[-1] + osc.step_time)
    mixed = histories.pure_endpoint_ratio(closing, g, g)

    start = phase_states(osc)[:, 0]
    end = phase_states(osc)[:, osc.successor(0, n_events)]
    phase_ctrl = histories.pure_endpoint_ratio(closing, start, end)
    energy_sched = energy_history_schedule(osc, n_events).with_times(
        closing.times, initial_time=0.0, final_time=closing.final_time)
    energy_ctrl = histories.pure_endpoint_ratio(energy_sched, g, g)

    coherent = mixed.defined()
    return {
        "N": osc.N,
        "n_events": n_events,
        "live_histories": [list(lab) for lab in mixed.labels],
        "n_defined_pairs": int(coherent.size),
        "min_ratio": mixed.min(),
        "max_ratio": mixed.max(),
        "all_coherent": bool(coherent.size > 0 and np.all(np.abs(coherent - 1) <= 1e-8)),
        "phase_control_max_ratio": phase_ctrl.max(),
        "phase_control_live_histories": len(phase_ctrl.labels),
        "energy_control_max_ratio": energy_ctrl.max(),
        "energy_control_live_histories": len(energy_ctrl.labels),
    }
