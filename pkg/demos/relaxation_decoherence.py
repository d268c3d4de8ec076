"""
Histories spaced beyond the relaxation time
===========================================

Events on a damped qubit are separated by Lindblad intervals.  As the
spacing grows past the relaxation time the off-diagonal ratios die out and
every event sees the fixed point.
"""

import numpy as np

from decohist import ensembles, openquantum as oq

model = oq.qubit_damping(gamma=1.0, omega=0.5)
families = [ensembles.sample_random_family(2, [1, 1], seed=s) for s in range(3)]

report = oq.relaxation_decoherence_experiment(model, families, [0.0, 0.5, 2.0, 5.0, 10.0, 20.0])
print("relaxation time:", report.relaxation_time, "method:", report.method)
print("fixed point populations:", np.real(np.diag(report.fixed_point)))
for row in report.rows:
    print("s/tau = %5.1f   max ratio %.2e   marginal deviation %.2e"
          % (row.spacing_over_tau, row.max_ratio, row.max_marginal_deviation))
