"""Kruskal (CP) factor models.

A rank-``R`` model of an ``(I, J, K)`` tensor is stored as a weight vector
``weights`` plus factor matrices ``U`` (I x R), ``V`` (J x R) and ``W``
(K x R), so that::

    Xhat[i, j, k] = sum_r weights[r] * U[i, r] * V[j, r] * W[k, r]
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import (
    ColumnMismatch,
    DegenerateComponent,
    DimMismatch,
    IndexOutOfRange,
    LengthMismatch,
    NonFiniteEntry,
    ZeroTensor,
)
from .tensor import Dense3Tensor, frobenius_norm, khatri_rao, unfold


def _frozen(arr, ndim):
    arr = np.array(arr, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise LengthMismatch(f"expected a {ndim}-D array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        flat = int(np.flatnonzero(~np.isfinite(arr).ravel())[0])
        raise NonFiniteEntry(np.unravel_index(flat, arr.shape), arr.ravel()[flat])
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class KruskalFactors:
    """Weights plus three factor matrices sharing a column count."""

    weights: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        for name in ("U", "V", "W"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 2))
        object.__setattr__(self, "weights", _frozen(self.weights, 1))
        rank = self.weights.shape[0]
        if rank < 1:
            raise ColumnMismatch("rank must be at least 1")
        cols = [self.U.shape[1], self.V.shape[1], self.W.shape[1]]
        if any(c != rank for c in cols):
            raise ColumnMismatch(f"factor column counts {cols} differ from rank {rank}")

    @classmethod
    def from_factors(cls, U, V, W, weights=None):
        U = np.asarray(U, dtype=np.float64)
        if weights is None:
            weights = np.ones(U.shape[1])
        return cls(weights, U, V, W)

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0], self.W.shape[0])

    @property
    def factors(self):
        return (self.U, self.V, self.W)

    def permute(self, order) -> "KruskalFactors":
        """Reorder components; component ``r`` of the result is ``order[r]``."""
        order = np.asarray(order, dtype=np.intp)
        if sorted(order.tolist()) != list(range(self.rank)):
            raise IndexOutOfRange(f"{order.tolist()} is not a permutation of 0..{self.rank - 1}")
        return KruskalFactors(self.weights[order], self.U[:, order], self.V[:, order], self.W[:, order])

    def __repr__(self):
        return f"KruskalFactors(rank={self.rank}, shape={self.shape})"


class Component(NamedTuple):
    weight: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray


def _check_dims(f, dims):
    if tuple(int(d) for d in dims) != f.shape:
        raise DimMismatch(f"factor rows {f.shape} do not match tensor dims {tuple(dims)}")


def reconstruct(f: KruskalFactors, dims=None) -> Dense3Tensor:
    """Full tensor ``sum_r weights[r] * U[:, r] o V[:, r] o W[:, r]``."""
    if dims is not None:
        _check_dims(f, dims)
    return Dense3Tensor(np.einsum("r,ir,jr,kr->ijk", f.weights, f.U, f.V, f.W))


def _unfolded_model(f):
    # mode-0 unfolding of the reconstruction, via one BLAS call
    return (f.U * f.weights) @ khatri_rao(f.W, f.V).T


def normalized_error(x: Dense3Tensor, f: KruskalFactors) -> float:
    """Relative reconstruction error ``||X - Xhat||_F / ||X||_F``."""
    _check_dims(f, x.shape)
    norm_x = frobenius_norm(x)
    if norm_x == 0:
        raise ZeroTensor("normalized error is undefined for an all-zero tensor")
    resid = unfold(x, 0) - _unfolded_model(f)
    return float(np.sqrt(np.sum(resid * resid)) / norm_x)


def _canonical_order(weights, U):
    # descending weight; ties broken by lexicographic order of U columns
    keys = [(-weights[r], tuple(U[:, r])) for r in range(len(weights))]
    return sorted(range(len(weights)), key=lambda r: keys[r])


def normalize_components(f: KruskalFactors) -> KruskalFactors:
    """Scale every factor column to unit norm and fold the norms into the weights.

    Components come back sorted by descending weight. A component whose
    weight is already zero may keep all-zero columns; any other zero column
    raises :class:`DegenerateComponent`.
    """
    norms = np.stack([np.linalg.norm(m, axis=0) for m in f.factors])
    weights = f.weights * np.prod(norms, axis=0)
    bad = (norms == 0).any(axis=0) & (f.weights != 0)
    if bad.any():
        raise DegenerateComponent(
            f"components {np.flatnonzero(bad).tolist()} have a zero factor column "
            "but a nonzero weight"
        )
    safe = np.where(norms == 0, 1.0, norms)
    U, V, W = (m / s for m, s in zip(f.factors, safe))
    # negative weights are flipped into the first factor
    sign = np.where(weights < 0, -1.0, 1.0)
    weights = weights * sign
    U = U * sign
    order = _canonical_order(weights, U)
    return KruskalFactors(weights, U, V, W).permute(order)


def is_normalized(f: KruskalFactors, atol=1e-8) -> bool:
    if (f.weights < 0).any():
        return False
    for m in f.factors:
        norms = np.linalg.norm(m, axis=0)
        ok = (np.abs(norms - 1.0) <= atol) | ((norms == 0) & (f.weights == 0))
        if not ok.all():
            return False
    return True


def component_slice(f: KruskalFactors, r: int) -> Component:
    """Weight and the three factor vectors of component ``r`` (read-only views)."""
    if not 0 <= r < f.rank:
        raise IndexOutOfRange(f"component {r} out of range for rank {f.rank}")
    return Component(float(f.weights[r]), f.U[:, r], f.V[:, r], f.W[:, r])
