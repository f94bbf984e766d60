"""Snapshot manifests, tensor assembly and factor/mask export.

Manifest format (JSON)::

    {
      "layout": "activations" | "filter_images",
      "snapshots": [{"task": 1, "epoch": 10, "path": "t1_e10.npy"}, ...],
      "input_labels": ["airplane", ...]            # optional
    }

Each snapshot file is a 2-D array with one row per input (or filter) and
one column per flattened unit (or pixel). Relative paths resolve against
the manifest's directory. Snapshots must be listed in strictly increasing
``(task, epoch)`` order.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import (
    EmptyManifest,
    IndexOutOfRange,
    ManifestError,
    ShapeMismatchAcrossSnapshots,
)
from .kruskal import KruskalFactors
from .npyio import read_npy, write_npy
from .solvers import FitResult
from .tensor import Dense3Tensor

LAYOUTS = ("activations", "filter_images")
FACTOR_FILES = ("U.npy", "V.npy", "W.npy", "lambda.npy")


@dataclass(frozen=True)
class Snapshot:
    task: int
    epoch: int
    path: str

    @property
    def label(self):
        return f"(task {self.task}, epoch {self.epoch})"


@dataclass(frozen=True)
class SnapshotManifest:
    layout: str
    snapshots: Tuple[Snapshot, ...]
    input_labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ManifestError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        keys = [(s.task, s.epoch) for s in self.snapshots]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise ManifestError(f"snapshots must be strictly ordered by (task, epoch): {keys}")


def load_manifest(path) -> SnapshotManifest:
    with open(path) as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    try:
        snaps = tuple(
            Snapshot(int(s["task"]), int(s["epoch"]), os.path.join(base, s["path"]))
            for s in doc["snapshots"]
        )
        layout = doc["layout"]
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: malformed manifest ({exc})") from None
    labels = doc.get("input_labels")
    return SnapshotManifest(layout, snaps, None if labels is None else tuple(map(str, labels)))


def assemble_tensor(manifest: SnapshotManifest) -> Dense3Tensor:
    """Stack snapshots into a ``(units, inputs, snapshots)`` tensor.

    Entry ``(i, j, k)`` is row ``j``, column ``i`` of the k-th snapshot file.
    """
    if not manifest.snapshots:
        raise EmptyManifest("manifest lists no snapshots")
    missing = [s.path for s in manifest.snapshots if not os.path.isfile(s.path)]
    if missing:
        raise FileNotFoundError(f"snapshot files not found: {missing}")
    first = read_npy(manifest.snapshots[0].path)
    if first.ndim != 2:
        raise ShapeMismatchAcrossSnapshots(manifest.snapshots[0].path, first.shape, "a 2-D array")
    n_inputs, n_units = first.shape
    data = np.empty((n_units, n_inputs, len(manifest.snapshots)))
    for k, snap in enumerate(manifest.snapshots):
        arr = first if k == 0 else read_npy(snap.path)
        if arr.shape != first.shape:
            raise ShapeMismatchAcrossSnapshots(snap.path, arr.shape, first.shape)
        data[:, :, k] = arr.T
    kind = "input" if manifest.layout == "activations" else "filter"
    inputs = manifest.input_labels or tuple(f"{kind} {j}" for j in range(n_inputs))
    if len(inputs) != n_inputs:
        raise ManifestError(f"{len(inputs)} input labels for {n_inputs} inputs")
    unit = "unit" if manifest.layout == "activations" else "pixel"
    labels = (
        tuple(f"{unit} {i}" for i in range(n_units)),
        tuple(inputs),
        tuple(s.label for s in manifest.snapshots),
    )
    return Dense3Tensor(data, labels)


def save_tensor(tensor: Dense3Tensor, path) -> None:
    """Write ``tensor.npy`` plus a ``<stem>_labels.json`` sidecar if labelled."""
    write_npy(path, tensor.data)
    if tensor.axis_labels is not None:
        stem = os.path.splitext(path)[0]
        with open(stem + "_labels.json", "w") as fh:
            json.dump([list(ax) for ax in tensor.axis_labels], fh, indent=2)
            fh.write("\n")


def load_tensor(path) -> Dense3Tensor:
    """Load a tensor from a ``.npy`` file or assemble it from a manifest JSON."""
    if str(path).endswith(".json"):
        return assemble_tensor(load_manifest(path))
    arr = read_npy(path)
    labels = None
    sidecar = os.path.splitext(path)[0] + "_labels.json"
    if os.path.isfile(sidecar):
        with open(sidecar) as fh:
            labels = json.load(fh)
    return Dense3Tensor(arr, labels)


def export_factors(result, directory, axis_labels=None, **meta) -> list:
    """Write ``U.npy``, ``V.npy``, ``W.npy``, ``lambda.npy`` and ``meta.json``.

    ``result`` is a :class:`FitResult` or bare :class:`KruskalFactors`;
    extra keyword arguments are merged into ``meta.json``.
    """
    os.makedirs(directory, exist_ok=True)
    if isinstance(result, FitResult):
        factors = result.factors
        info = {
            "algorithm": result.algorithm,
            "seed": result.seed,
            "final_error": result.final_error,
            "iterations": result.iterations,
            "converged": result.converged,
        }
    else:
        factors = result
        info = {"algorithm": None, "seed": None, "final_error": None}
    info["rank"] = factors.rank
    info["shape"] = list(factors.shape)
    info["axis_labels"] = None if axis_labels is None else [list(ax) for ax in axis_labels]
    info.update(meta)
    paths = []
    for name, arr in zip(FACTOR_FILES, (factors.U, factors.V, factors.W, factors.weights)):
        p = os.path.join(directory, name)
        write_npy(p, arr)
        paths.append(p)
    p = os.path.join(directory, "meta.json")
    with open(p, "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(p)
    return paths


def load_factors(directory):
    """Inverse of :func:`export_factors`; returns ``(factors, meta)``."""
    U, V, W, weights = (read_npy(os.path.join(directory, n)) for n in FACTOR_FILES)
    meta_path = os.path.join(directory, "meta.json")
    meta = {}
    if os.path.isfile(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
    return KruskalFactors(weights, U, V, W), meta


@dataclass(frozen=True, eq=False)
class NeuronMask:
    """Boolean selection of units from one component's activation factor."""

    mask: np.ndarray
    component: int
    top_k: int
    layer: Optional[str] = None
    source: Optional[str] = None

    @property
    def selected(self):
        return np.flatnonzero(self.mask).tolist()

    def save(self, path) -> None:
        """Write the mask as a boolean ``.npy`` plus a JSON provenance sidecar."""
        write_npy(path, self.mask.astype(bool))
        sidecar = os.path.splitext(path)[0] + ".json"
        with open(sidecar, "w") as fh:
            json.dump({
                "layer": self.layer,
                "component": self.component,
                "top_k": self.top_k,
                "source": self.source,
                "selected": self.selected,
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")


def export_neuron_mask(f: KruskalFactors, component: int, top_k: int,
                       layer=None, source=None) -> NeuronMask:
    """Mask of the ``top_k`` largest entries of ``U[:, component]``.

    Ties go to the lowest unit index.
    """
    if not 0 <= component < f.rank:
        raise IndexOutOfRange(f"component {component} out of range for rank {f.rank}")
    n_units = f.U.shape[0]
    if not 0 <= top_k <= n_units:
        raise IndexOutOfRange(f"top_k must lie in 0..{n_units}, got {top_k}")
    order = np.argsort(-f.U[:, component], kind="stable")
    mask = np.zeros(n_units, dtype=bool)
    mask[order[:top_k]] = True
    return NeuronMask(mask, int(component), int(top_k), layer, source)
