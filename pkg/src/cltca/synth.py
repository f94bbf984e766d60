"""Planted nonnegative CP tensors with known ground-truth components.

``task_gated`` tensors mimic units that are active only while one task is
being learned. Each component's temporal factor is a raised-cosine bump
inside one task's window of snapshots. Its unit factor is sparse, and its
input factor peaks on a single input.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import InvalidSpec
from .kruskal import KruskalFactors, normalize_components, reconstruct
from .tensor import Dense3Tensor

STRUCTURES = ("dense_nonneg", "task_gated")
# off-peak level of the input factors; keeps the zero-signal region (where
# clipping biases the noise upward) small without smearing components
BASELINE = 0.1


@dataclass(frozen=True)
class PlantedSpec:
    """Parameters of a planted tensor.

    ``noise`` is the noise norm after clipping at 0, as a fraction of the
    signal norm: ``||X - signal|| = noise * ||signal||``.
    ``task_lengths`` splits the snapshot axis into consecutive task windows
    (default: ``n_tasks`` near-equal windows).
    """

    dims: Tuple[int, int, int]
    rank: int
    seed: int = 0
    noise: float = 0.0
    structure: str = "dense_nonneg"
    n_tasks: int = 3
    task_lengths: Optional[Tuple[int, ...]] = None
    support_fraction: float = 0.8

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if self.task_lengths is not None:
            object.__setattr__(self, "task_lengths", tuple(int(n) for n in self.task_lengths))
        if len(dims) != 3 or min(dims) < 1:
            raise InvalidSpec(f"dims must be three positive integers, got {dims}")
        I, J, K = dims
        if not 1 <= self.rank <= min(I * J, J * K, I * K):
            raise InvalidSpec(f"rank {self.rank} out of range for dims {dims}")
        if not 0 <= self.noise < 1:
            raise InvalidSpec(f"noise must lie in [0, 1), got {self.noise}")
        if self.structure not in STRUCTURES:
            raise InvalidSpec(f"structure must be one of {STRUCTURES}")
        if not 0 < self.support_fraction <= 1:
            raise InvalidSpec("support_fraction must lie in (0, 1]")
        if self.structure == "task_gated":
            lengths = self.windows_lengths()
            if min(lengths) < 1 or sum(lengths) != K:
                raise InvalidSpec(f"task lengths {lengths} must be positive and sum to K={K}")

    def windows_lengths(self):
        if self.task_lengths is not None:
            return self.task_lengths
        if not 1 <= self.n_tasks <= self.dims[2]:
            raise InvalidSpec(f"n_tasks must lie in 1..K, got {self.n_tasks}")
        return tuple(len(a) for a in np.array_split(np.arange(self.dims[2]), self.n_tasks))

    def task_windows(self):
        """``(start, stop)`` snapshot ranges of each task."""
        edges = np.concatenate([[0], np.cumsum(self.windows_lengths())])
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(**doc)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


def _raised_cosine(n):
    t = np.arange(1, n + 1) / (n + 1)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * t))


def _task_gated_factors(spec, rng):
    I, J, K = spec.dims
    R = spec.rank
    windows = spec.task_windows()
    n_support = max(1, int(round(spec.support_fraction * I)))
    peaks = rng.permutation(J)[:R] if J >= R else np.arange(R) % J
    U = np.zeros((I, R))
    V = np.empty((J, R))
    W = np.zeros((K, R))
    for r in range(R):
        support = rng.choice(I, size=n_support, replace=False)
        U[support, r] = 0.5 + rng.random(n_support)
        V[:, r] = BASELINE * rng.random(J)
        V[peaks[r], r] = 1.0
        # bump over a random sub-window of at least half the task window,
        # so components sharing a task still have distinct time courses
        start, stop = windows[r % len(windows)]
        length = stop - start
        width = int(rng.integers((length + 1) // 2, length + 1))
        offset = int(rng.integers(0, length - width + 1))
        W[start + offset:start + offset + width, r] = _raised_cosine(width)
    return U, V, W


def _noise_ratio(signal, gauss, c):
    noisy = np.maximum(signal + c * gauss, 0.0)
    return np.linalg.norm(noisy - signal) / np.linalg.norm(signal)


def generate(spec: PlantedSpec):
    """Build the planted tensor and its ground-truth factors.

    Returns
    -------
    tensor : Dense3Tensor
    truth : KruskalFactors
        Normalized ground truth; ``reconstruct(truth)`` is the noiseless signal.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.structure == "dense_nonneg":
        U, V, W = (rng.random((d, spec.rank)) for d in spec.dims)
    else:
        U, V, W = _task_gated_factors(spec, rng)
    truth = normalize_components(KruskalFactors.from_factors(U, V, W))
    signal = reconstruct(truth).data
    if spec.noise == 0:
        return Dense3Tensor(signal), truth

    gauss = rng.standard_normal(signal.shape)
    # clipping at zero shrinks the noise, so solve for the scale that hits the target
    hi = 2.0 * spec.noise * np.linalg.norm(signal) / np.linalg.norm(gauss)
    while _noise_ratio(signal, gauss, hi) < spec.noise:
        hi *= 2.0
    c = brentq(lambda c: _noise_ratio(signal, gauss, c) - spec.noise, 0.0, hi, xtol=1e-14)
    return Dense3Tensor(np.maximum(signal + c * gauss, 0.0)), truth
