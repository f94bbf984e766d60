"""
Curating task splits from a 2-D embedding
=========================================

Summarize each class by its centroid, take the classes on the convex
hull of the centroids as candidates for the first task, and deal the rest
into the later tasks.
"""

import numpy as np

from cltca import class_centroids, curate_tasks, quickhull

classes = ["airplane", "automobile", "bird", "cat", "deer",
           "dog", "frog", "horse", "ship", "truck"]
rng = np.random.default_rng(0)
centers = rng.standard_normal((10, 2)) * 4

# 200 embedded samples per class scattered around its center
labels = np.repeat(np.arange(10), 200)
xy = centers[labels] + rng.standard_normal((labels.size, 2))
ids, centroids = class_centroids(xy, labels)

hull = quickhull(centroids)
print("hull classes (counter-clockwise):", [classes[i] for i in hull])

###############################################################################
# Four classes for the first task, three later tasks of two classes each.

plan = curate_tasks([classes[i] for i in ids], centroids, num_initial=4,
                    num_later_tasks=3, seed=0)
for t, task in enumerate(plan.tasks, start=1):
    print("task %d: %s" % (t, ", ".join(task)))

# the same seed always gives the same plan
assert curate_tasks([classes[i] for i in ids], centroids, 4, 3, seed=0) == plan
print(plan.to_json())
