"""
Quantum jumps as measurement plus feedback
==========================================

A decaying qubit is monitored with a two-outcome POVM every ``dt``.  The
trajectory average reproduces the master equation up to an O(dt) bias and
a statistical error that shrinks like 1/sqrt(M).
"""

import numpy as np

from decohist import openquantum as oq, qops

model = oq.qubit_damping(gamma=1.0)
excited = np.array([0.0, 1.0])

# one trajectory: a single jump to the ground state
traj = oq.jump_unravel(model, excited, T=5.0, dt=1e-2, seed=1)
print("jumps:", [(round(j.time, 2), j.channel) for j in traj.jumps])

# jump times over many trajectories follow the exponential law
trajs = oq.jump_ensemble(model, excited, 5.0, 1e-2, 4000, seed=2)
first = np.array([t.jumps[0].time for t in trajs if t.jumps])
print("mean first-jump time: %.3f (exact 1/gamma = 1)" % first.mean())

# ensemble mean vs. the exact channel
for M in (100, 1000, 10000):
    res = oq.ensemble_average(model, np.diag([0.0, 1.0]), 1.0, 1e-3, M, seed=3)
    print("M=%5d  trace distance %.4f  (bias %.1e)" % (M, res.trace_distance_to_exact, res.bias))

# the POVM has a projective realization on a qubit ancilla
_, A = qops.polar_decompose(qops.lowering(2))
dil = oq.dilate_to_projection(A, 0.1)
rho = np.diag([0.3, 0.7])
print("jump probability, dilated vs. direct: %.12f %.12f" % (dil.probability(rho, 1), 0.1 * 0.7))
