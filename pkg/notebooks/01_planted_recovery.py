"""
Recovering planted components
=============================

Build a tensor whose components are known, fit it with the two
nonnegative solvers, and check how close each fit gets to the truth.
"""

import numpy as np

from cltca import (FitOptions, PlantedSpec, fit_nn_bcd, fit_nn_hals, generate,
                   normalized_error, similarity_score)

# 500 units, 20 inputs, 24 snapshots split into three tasks of 8.
# Each component is active during one task only.
spec = PlantedSpec((500, 20, 24), rank=5, seed=1, noise=0.05,
                   structure="task_gated", task_lengths=(8, 8, 8))
x, truth = generate(spec)
print("tensor shape", x.shape)
print("error of the truth itself: %.4f" % normalized_error(x, truth))

# the temporal factors are bumps inside a single task window
for r in range(truth.rank):
    active = np.flatnonzero(truth.W[:, r] > 0)
    print("component %d active on snapshots %d..%d" % (r, active.min(), active.max()))

###############################################################################
# Fit ten seeds with each solver and keep the best.

def best_of(fitter, n=10):
    fits = [fitter(x, 5, FitOptions(seed=s)) for s in range(n)]
    return min(fits, key=lambda f: f.final_error)

hals = best_of(fit_nn_hals)
bcd = best_of(fit_nn_bcd)
for name, res in [("HALS", hals), ("BCD", bcd)]:
    sim = similarity_score(res.factors, truth)
    print("%s: error %.4f after %d iterations, similarity to truth %.4f"
          % (name, res.final_error, res.iterations, sim.score))

# both should land just under the noise level, and agree with each other
print("HALS - BCD error gap: %.2e" % abs(hals.final_error - bcd.final_error))

###############################################################################
# The error trace never goes up.

trace = np.array(hals.error_trace)
print("first errors", np.round(trace[:5], 4), "last", round(trace[-1], 4))
print("largest step up:", np.diff(trace).max())
