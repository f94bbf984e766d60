"""Dense three-way tensors and the multilinear primitives the solvers use.

Layout conventions (frozen)
---------------------------
Entries are stored C-order, so entry ``(i, j, k)`` of an ``(I, J, K)``
tensor lives at flat position ``i*J*K + j*K + k``.

Mode-n unfoldings put mode ``n`` on the rows and order the remaining two
modes with the lower mode varying fastest:

* ``unfold(x, 0)`` is ``I x (J*K)``, column ``j + J*k``
* ``unfold(x, 1)`` is ``J x (I*K)``, column ``i + I*k``
* ``unfold(x, 2)`` is ``K x (I*J)``, column ``i + I*j``

With :func:`khatri_rao` rows indexed ``a*q + b``, this gives the usual
identity ``unfold(x, 0) == U @ khatri_rao(W, V).T`` for a CP model.
Matrices are plain 2-D ``numpy`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import ColumnMismatch, InvalidMode, LengthMismatch, NonFiniteEntry

# axis order of the transposed array whose C-order reshape is the unfolding
_UNFOLD_AXES = {0: (0, 2, 1), 1: (1, 2, 0), 2: (2, 1, 0)}


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dense3Tensor:
    """Immutable ``(I, J, K)`` tensor of 64-bit floats.

    Parameters
    ----------
    data : array_like, shape (I, J, K)
        Tensor entries. Copied and widened to float64.
    axis_labels : tuple of three sequences of str, optional
        Per-axis labels (units, inputs/filters, snapshots).
    """

    data: np.ndarray
    axis_labels: Optional[Tuple[Tuple[str, ...], Tuple[str, ...], Tuple[str, ...]]] = None

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise LengthMismatch(f"expected a 3-way array, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise LengthMismatch(f"all dims must be positive, got {arr.shape}")
        arr = _frozen(arr)
        _check_finite(arr)
        object.__setattr__(self, "data", arr)
        if self.axis_labels is not None:
            labels = tuple(tuple(str(s) for s in ax) for ax in self.axis_labels)
            if len(labels) != 3 or tuple(len(ax) for ax in labels) != arr.shape:
                raise LengthMismatch(
                    f"axis label lengths {[len(ax) for ax in labels]} "
                    f"do not match dims {arr.shape}"
                )
            object.__setattr__(self, "axis_labels", labels)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dims(self):
        return self.data.shape

    def __getitem__(self, idx):
        return self.data[idx]

    def __repr__(self):
        return f"Dense3Tensor(shape={self.shape})"


def _check_finite(arr):
    bad = ~np.isfinite(arr)
    if bad.any():
        flat = int(np.flatnonzero(bad.ravel())[0])
        raise NonFiniteEntry(np.unravel_index(flat, arr.shape), arr.ravel()[flat])


def new_tensor(dims: Sequence[int], data, axis_labels=None) -> Dense3Tensor:
    """Build a tensor from dims and a flat, C-ordered data vector."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise LengthMismatch(f"dims must be three positive integers, got {dims}")
    flat = np.asarray(data, dtype=np.float64).ravel()
    expected = dims[0] * dims[1] * dims[2]
    if flat.size != expected:
        raise LengthMismatch(f"data has {flat.size} entries, dims {dims} need {expected}")
    return Dense3Tensor(flat.reshape(dims), axis_labels)


def unfold(x, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization of a tensor (see module docstring)."""
    if mode not in _UNFOLD_AXES:
        raise InvalidMode(f"mode must be 0, 1 or 2, got {mode!r}")
    arr = x.data if isinstance(x, Dense3Tensor) else np.asarray(x, dtype=np.float64)
    return arr.transpose(_UNFOLD_AXES[mode]).reshape(arr.shape[mode], -1)


def refold(mat, mode: int, dims: Sequence[int]) -> Dense3Tensor:
    """Inverse of :func:`unfold`."""
    if mode not in _UNFOLD_AXES:
        raise InvalidMode(f"mode must be 0, 1 or 2, got {mode!r}")
    axes = _UNFOLD_AXES[mode]
    dims = tuple(int(d) for d in dims)
    mat = np.asarray(mat, dtype=np.float64)
    if mat.size != dims[0] * dims[1] * dims[2]:
        raise LengthMismatch(f"matrix of shape {mat.shape} cannot refold into {dims}")
    permuted = mat.reshape(tuple(dims[a] for a in axes))
    return Dense3Tensor(permuted.transpose(np.argsort(axes)))


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; row ``a*q + b`` holds ``A[a] * B[b]``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ColumnMismatch(f"column counts differ: {a.shape} vs {b.shape}")
    return (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[1])


def frobenius_norm(x) -> float:
    arr = x.data if isinstance(x, Dense3Tensor) else np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.sum(arr * arr)))
