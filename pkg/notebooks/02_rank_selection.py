"""
Choosing the number of components
=================================

Sweep the rank with several seeds per rank, find where the error curve
flattens, then take the lowest rank there whose replicates agree.
"""

from cltca import FitOptions, PlantedSpec, detect_elbow, generate, select_rank, sweep_ranks

x, truth = generate(PlantedSpec((300, 20, 24), rank=5, seed=3, noise=0.05,
                                structure="task_gated", task_lengths=(8, 8, 8)))

# replicate i at rank r uses seed 1000*r + i, so results do not depend on
# how many ranks are swept or in which order fits finish
report = sweep_ranks(x, (1, 8), n_replicates=5, algorithm="nn-hals", opts=FitOptions(seed=0))

print("rank  best error  mean similarity")
for r in report.ranks:
    s = report.per_rank[r]
    print("%4d  %10.4f  %s" % (r, s.min_error, "%.3f" % s.mean_similarity))

###############################################################################
# Elbow: the first rank after which every step gains less than 5%.

elbow = detect_elbow(report.min_errors, report.ranks)
print("elbow at rank", elbow.rank, "search interval", elbow.interval)

# stability: mean pairwise similarity across replicates must exceed 0.8
print("selected rank:", select_rank(report, threshold=0.8))

# the CSV table is ready for plotting error curves
print(report.to_csv().splitlines()[:4])
