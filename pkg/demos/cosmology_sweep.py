"""
Reinflation against Boltzmann brains
====================================

Everything is kept as a natural logarithm, so realistic cosmological
terms are fine.  A heavy brain (dE = 30 in Planck units) loses to
reinflation; a light one wins once the low phase is cold enough.
"""

import numpy as np

from decohist import cosmo

lambda0 = 3.0  # unit horizon
heavy = cosmo.FluctuationSpec(energy=30.0, entropy_deficit=0.0)
light = cosmo.FluctuationSpec(energy=0.1, entropy_deficit=0.0)

for row in cosmo.sweep(lambda0, np.geomspace(3.0, 3e-6, 7), brain=heavy):
    print("lambda1=%.1e  log p=%.4g  log tau=%.4g  log odds vs heavy brain=%.4g"
          % (row["lambda1"], row["log_p_reinflate"], row["log_tau1"], row["log_odds"]))

params = cosmo.ReinflationParams(lambda0, 0.03)
print(cosmo.compare_boltzmann_brain(params, light).verdict)

# present-day numbers do not overflow
today = cosmo.ReinflationParams(1e-10, 3e-122)
print("log p today: %.6e" % cosmo.reinflation_log_probability(today))
