"""Similarity between two CP models of the same rank.

Components are matched by solving a linear assignment problem on the
matrix of per-component similarities. A component pair's similarity is the
product of the cosines between its U, V and W columns. The score is the
mean similarity over matched pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import NonSquare, NotNormalized, RankMismatch
from .kruskal import KruskalFactors, is_normalized, normalize_components


@dataclass(frozen=True, eq=False)
class SimilarityResult:
    """``permutation[r]`` is the component of model B matched to component r of A."""

    score: float
    permutation: np.ndarray
    per_component: np.ndarray


def _check_ranks(a, b):
    if a.rank != b.rank:
        raise RankMismatch(f"cannot compare rank {a.rank} with rank {b.rank}")


def component_similarity_matrix(a: KruskalFactors, b: KruskalFactors,
                                weight_penalty: bool = False) -> np.ndarray:
    """``S[r, s]`` = product over modes of cos(a's column r, b's column s).

    Both models must already be normalized. With ``weight_penalty`` each
    entry is further scaled by ``1 - |la - lb| / max(la, lb)``.
    """
    _check_ranks(a, b)
    for name, m in (("a", a), ("b", b)):
        if not is_normalized(m):
            raise NotNormalized(f"model {name} is not normalized; call normalize_components")
    S = np.ones((a.rank, b.rank))
    for fa, fb in zip(a.factors, b.factors):
        S *= fa.T @ fb
    if weight_penalty:
        la = a.weights[:, None]
        lb = b.weights[None, :]
        top = np.maximum(la, lb)
        S *= np.where(top > 0, 1.0 - np.abs(la - lb) / np.where(top > 0, top, 1.0), 1.0)
    return S


def solve_assignment(S, maximize: bool = True) -> np.ndarray:
    """Optimal permutation ``p`` for ``sum_r S[r, p[r]]`` (Hungarian method)."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NonSquare(f"assignment needs a square matrix, got shape {S.shape}")
    if not np.isfinite(S).all():
        raise ValueError("assignment matrix has non-finite entries")
    rows, cols = linear_sum_assignment(S, maximize=maximize)
    perm = np.empty(S.shape[0], dtype=np.intp)
    perm[rows] = cols
    return perm


def _normalized(f):
    return f if is_normalized(f) else normalize_components(f)


def similarity_score(a: KruskalFactors, b: KruskalFactors,
                     weight_penalty: bool = False) -> SimilarityResult:
    _check_ranks(a, b)
    a, b = _normalized(a), _normalized(b)
    S = component_similarity_matrix(a, b, weight_penalty)
    perm = solve_assignment(S)
    per = S[np.arange(a.rank), perm]
    return SimilarityResult(float(per.mean()), perm, per)


def align(a: KruskalFactors, b: KruskalFactors) -> KruskalFactors:
    """Return ``b`` with its components reordered to line up with ``a``.

    Note that ``a`` is compared in normalized (descending-weight) order, so
    row ``r`` of the result matches component ``r`` of
    ``normalize_components(a)``.
    """
    perm = similarity_score(a, b).permutation
    return _normalized(b).permute(perm)
