"""
From saved activations to a neuron mask
=======================================

Write per-snapshot activation files with a manifest, assemble them into a
tensor, fit it, export the factors, and select the units that carry the
strongest component.
"""

import json
import os
import tempfile

import numpy as np

from cltca import (FitOptions, PlantedSpec, export_factors, export_neuron_mask, fit_nn_hals,
                   generate, load_factors, load_tensor, write_npy)

workdir = tempfile.mkdtemp(prefix="cltca_demo_")

# pretend these are activations of 64 units to 10 inputs after each epoch
x, _ = generate(PlantedSpec((64, 10, 9), rank=3, seed=2, noise=0.05,
                            structure="task_gated", task_lengths=(3, 3, 3)))
snapshots = []
for k in range(9):
    task, epoch = k // 3 + 1, 10 * (k % 3 + 1)
    name = "t%d_e%d.npy" % (task, epoch)
    write_npy(os.path.join(workdir, name), x.data[:, :, k].T)   # inputs x units
    snapshots.append({"task": task, "epoch": epoch, "path": name})
manifest = os.path.join(workdir, "manifest.json")
with open(manifest, "w") as fh:
    json.dump({"layout": "activations", "snapshots": snapshots}, fh)

###############################################################################
# Assemble: units x inputs x snapshots, with labels on every axis.

tensor = load_tensor(manifest)
print("assembled", tensor.shape)
print("snapshot axis:", tensor.axis_labels[2][:4], "...")

res = fit_nn_hals(tensor, 3, FitOptions(seed=0))
print("rank-3 error: %.4f" % res.final_error)

###############################################################################
# Export factors and a mask of the 8 most active units in component 0.

fdir = os.path.join(workdir, "factors")
export_factors(res, fdir, axis_labels=tensor.axis_labels)
factors, meta = load_factors(fdir)
print("reloaded", meta["algorithm"], "rank", meta["rank"])

mask = export_neuron_mask(factors, component=0, top_k=8, layer="demo", source=fdir)
mask.save(os.path.join(workdir, "mask.npy"))
print("selected units:", mask.selected)
print("files in", workdir, sorted(os.listdir(workdir)))
