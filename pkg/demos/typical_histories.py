"""
Typical coarse-grained histories
================================

Random projector families on a d-dimensional space.  For pairs of
histories ending in the same outcome, the squared overlap of the two
normalized branch states is about 1/d, so coarse histories nearly decohere
while fine ones do not.
"""

import numpy as np

from decohist import ensembles

for d in (8, 16, 32, 64):
    spec = ensembles.RandomScheduleSpec(d, n_events=2, ranks=[d // 2, d // 2], samples=50, seed=0)
    rep = ensembles.typical_ratio_experiment(spec)
    print("d=%2d  median ratio %.4f   mean ratio*d %.3f   mean ratio*d*p*p' %.4f"
          % (d, np.median(rep.ratio), rep.overlap.mean(), rep.scaled.mean()))

# finer histories interfere more; where does the median cross 0.1?
cap = ensembles.information_capacity_check(64, samples=20)
for lv in cap.levels:
    print("rank %2d  event p %.3f  median ratio %s" % (lv["rank"], lv["event_probability"], lv["median_ratio"]))
print("crossing by history probability:", cap.crossing_probability, " predicted:", cap.prediction)
