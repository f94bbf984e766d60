"""Tensor component analysis of continual-learning dynamics.

Nonnegative CP decompositions of (units x inputs x snapshots) tensors,
similarity scores between decompositions, replicate-stability rank
selection, and convex-hull task curation from 2-D class embeddings.
"""
__version__ = "0.1.0"

from .compare import SimilarityResult, align, component_similarity_matrix, similarity_score, solve_assignment
from .curation import EmbeddedPoint, TaskPlan, class_centroids, curate_tasks, quickhull
from .ingest import (
    NeuronMask,
    SnapshotManifest,
    assemble_tensor,
    export_factors,
    export_neuron_mask,
    load_factors,
    load_manifest,
    load_tensor,
    save_tensor,
)
from .kruskal import KruskalFactors, component_slice, normalize_components, normalized_error, reconstruct
from .npyio import read_npy, write_npy
from .rank import SweepReport, detect_elbow, select_rank, sweep_ranks
from .solvers import FitOptions, FitResult, fit, fit_cp_als, fit_nn_bcd, fit_nn_hals, init_random
from .synth import PlantedSpec, generate
from .tensor import Dense3Tensor, frobenius_norm, khatri_rao, new_tensor, refold, unfold
