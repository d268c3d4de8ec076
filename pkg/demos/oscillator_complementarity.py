"""
Phase histories of a truncated oscillator
=========================================

Phase-state histories sampled once per step follow deterministic chains
and decohere exactly.  Closing the same histories on the ground state
(an energy eigenstate) makes every live pair fully coherent.
"""

import numpy as np

from decohist import histories, oscillator

osc = oscillator.TruncatedOscillator(N=8, omega=1.0)

# maximally mixed start, three phase measurements one step apart
sched = oscillator.phase_history_schedule(osc, 3)
D = histories.decoherence_functional(sched, np.eye(osc.N) / osc.N)
print("live histories:", sorted(D.support))
print("max off-diagonal |D|:", D.max_offdiagonal())
print("decoherent at eps=1e-6:", histories.is_decoherent(D, 1e-6).decoherent)

# the step moves phase index j to j + STEP_DIRECTION
print("successor of 0:", osc.successor(0), "(STEP_DIRECTION =", oscillator.STEP_DIRECTION, ")")

# ground-state endpoints: every chain survives and they all interfere
report = oscillator.mixed_basis_coherence_demo(osc, n_events=3)
print("mixed-basis live histories:", len(report["live_histories"]))
print("pairs with ratio 1:", report["n_defined_pairs"], "all coherent:", report["all_coherent"])
print("energy-basis control, live histories:", report["energy_control_live_histories"])
