"""CP fitting: unconstrained ALS, nonnegative HALS and nonnegative BCD.

All three solvers share one outer loop. Each iteration sweeps the modes in
the fixed order U, V, W. For mode ``n`` it forms the MTTKRP
``M = X_(n) K`` and the Gram matrix ``G = K^T K``, where ``K`` is the
Khatri-Rao product of the other two factors. Then it applies the
solver-specific update:

* ALS: ``A <- M G^+``
* HALS: for each column r, ``a_r <- max(0, a_r + (M e_r - A G e_r) / G_rr)``
* BCD: ``A <- A * M / (A G + eps)`` (multiplicative block update)

Both nonnegative solvers decrease the objective monotonically. A column
that collapses to exactly zero mid-fit is re-seeded once from the positive
part of the residual, with an optimal scale. Re-seeding cannot increase the
error. A second collapse marks the component degenerate (weight 0).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .exceptions import NegativeInput, ZeroTensor
from .kruskal import KruskalFactors, normalize_components
from .tensor import Dense3Tensor, frobenius_norm, khatri_rao, unfold

logger = logging.getLogger(__name__)

ALS = "ALS"
NN_HALS = "NN_HALS"
NN_BCD = "NN_BCD"

ALGORITHMS = {"als": ALS, "nn-hals": NN_HALS, "nn-bcd": NN_BCD}

# Khatri-Rao operand order per mode, matching the unfolding conventions
_KR_ORDER = {0: (2, 1), 1: (2, 0), 2: (1, 0)}
_RESCUE_POWER_ITERS = 25
# relative errors this small are float64 round-off; count as converged
_ERROR_FLOOR = 1e-14


@dataclass(frozen=True)
class FitOptions:
    """Stopping rule, seed and numerical guards for a single fit.

    ``nonnegative`` only affects the ALS initialization (uniform instead of
    normal entries); the nonnegative solvers always start from uniform
    factors.
    """

    max_iters: int = 500
    rel_tol: float = 1e-6
    seed: int = 0
    nonnegative: Optional[bool] = None
    epsilon_div: float = 1e-12

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not self.epsilon_div > 0:
            raise ValueError("epsilon_div must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class FitResult:
    factors: KruskalFactors
    error_trace: Tuple[float, ...]
    final_error: float
    iterations: int
    converged: bool
    seed: int
    algorithm: str
    degenerate: Tuple[int, ...] = ()
    warnings: Tuple[str, ...] = field(default=())

    @property
    def rank(self):
        return self.factors.rank


def init_random(dims, rank: int, seed: int, nonnegative: bool) -> KruskalFactors:
    """Seeded random factors: uniform [0, 1) if nonnegative, else standard normal."""
    if rank < 1:
        raise ValueError("rank must be >= 1")
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    rng = np.random.default_rng(seed)
    draw = rng.random if nonnegative else rng.standard_normal
    U, V, W = (draw((d, rank)) for d in dims)
    return KruskalFactors(np.ones(rank), U, V, W)


def _gram(factors, mode):
    a, b = _KR_ORDER[mode]
    return (factors[a].T @ factors[a]) * (factors[b].T @ factors[b])


def _mttkrp(unfoldings, factors, mode):
    a, b = _KR_ORDER[mode]
    return unfoldings[mode] @ khatri_rao(factors[a], factors[b])


def _sq_error(x0, norm_x_sq, factors):
    """Squared residual norm; exact recomputation when the error is small."""
    U, V, W = factors
    gram = (U.T @ U) * (V.T @ V) * (W.T @ W)
    model0 = U @ khatri_rao(W, V).T
    inner = np.sum(x0 * model0)
    sq = norm_x_sq - 2.0 * inner + gram.sum()
    if sq < 1e-6 * norm_x_sq:
        resid = x0 - model0
        sq = np.sum(resid * resid)
    return max(float(sq), 0.0)


def _als_update(A, M, G, eps):
    if np.linalg.matrix_rank(G) < G.shape[0]:
        logger.warning("SingularUpdate: Gram matrix is rank deficient, using pseudoinverse")
    return M @ np.linalg.pinv(G)


def _hals_update(A, M, G, eps):
    A = A.copy()
    for r in range(A.shape[1]):
        step = (M[:, r] - A @ G[:, r]) / max(G[r, r], eps)
        A[:, r] = np.maximum(0.0, A[:, r] + step)
    return A


def _bcd_update(A, M, G, eps):
    return A * M / (A @ G + eps)


_UPDATES = {ALS: _als_update, NN_HALS: _hals_update, NN_BCD: _bcd_update}


def _rebalance(factors, skip):
    # equalize column norms across modes; leaves the model unchanged
    norms = np.stack([np.linalg.norm(f, axis=0) for f in factors])
    ok = (norms > 0).all(axis=0)
    ok[list(skip)] = False
    if not ok.any():
        return factors
    target = np.cbrt(np.prod(norms, axis=0))
    out = []
    for f, n in zip(factors, norms):
        scale = np.where(ok, target / np.where(ok, n, 1.0), 1.0)
        out.append(f * scale)
    return out


def _rescue(x, factors, r):
    """Re-seed component ``r`` from the leading positive part of the residual.

    Returns False if the residual offers no positive direction to fit.
    """
    U, V, W = factors
    resid = x.data - np.einsum("ir,jr,kr->ijk", U, V, W)
    pos = np.maximum(resid, 0.0)
    vecs = [np.ones(d) / np.sqrt(d) for d in pos.shape]
    for _ in range(_RESCUE_POWER_ITERS):
        for mode, spec in enumerate(("ijk,j,k->i", "ijk,i,k->j", "ijk,i,j->k")):
            others = [vecs[m] for m in range(3) if m != mode]
            v = np.einsum(spec, pos, *others)
            n = np.linalg.norm(v)
            if n == 0:
                return False
            vecs[mode] = v / n
    scale = float(np.einsum("ijk,i,j,k->", resid, *vecs))
    if not scale > 0:
        return False
    c = np.cbrt(scale)
    for f, v in zip(factors, vecs):
        f[:, r] = c * v
    return True


def _validate(x, rank, nonneg_input):
    if not isinstance(x, Dense3Tensor):
        x = Dense3Tensor(x)
    if int(rank) < 1:
        raise ValueError("rank must be >= 1")
    if nonneg_input and x.data.min() < 0:
        idx = np.unravel_index(int(np.argmin(x.data)), x.shape)
        raise NegativeInput(f"nonnegative fit requires x >= 0; x{idx} = {x.data[idx]}")
    if frobenius_norm(x) == 0:
        raise ZeroTensor("cannot fit an all-zero tensor")
    return x


def _fit(x, rank, opts, init, algorithm):
    nonneg = algorithm != ALS
    x = _validate(x, rank, nonneg)
    opts = opts or FitOptions()
    rank = int(rank)
    eps = opts.epsilon_div
    update = _UPDATES[algorithm]

    if init is None:
        init_nonneg = True if nonneg else bool(opts.nonnegative)
        init = init_random(x.shape, rank, opts.seed, init_nonneg)
    elif init.rank != rank or init.shape != x.shape:
        raise ValueError(f"init has rank {init.rank} and shape {init.shape}, "
                         f"expected rank {rank} and shape {x.shape}")
    if nonneg and min(f.min() for f in init.factors) < 0:
        raise NegativeInput("nonnegative fit requires a nonnegative initialization")

    w = init.weights
    factors = [init.U * w, init.V.copy(), init.W.copy()]
    unfoldings = [np.ascontiguousarray(unfold(x, n)) for n in range(3)]
    norm_x_sq = float(np.sum(x.data * x.data))

    notes = []
    degenerate = set()
    for r in range(rank):
        if any(not f[:, r].any() for f in factors):
            degenerate.add(r)
            notes.append(f"DegenerateComponent: component {r} has a zero column at initialization")
            logger.warning(notes[-1])

    # start from the best scalar multiple of the initialization
    U, V, W = factors
    model_sq = float(((U.T @ U) * (V.T @ V) * (W.T @ W)).sum())
    if model_sq > 0:
        inner = float(np.sum(_mttkrp(unfoldings, factors, 0) * U))
        if inner != 0 and not (nonneg and inner < 0):
            c = np.cbrt(inner / model_sq)
            factors = [f * c for f in factors]

    err = np.sqrt(_sq_error(unfoldings[0], norm_x_sq, factors) / norm_x_sq)
    trace = [float(err)]
    rescued = set()
    converged = False
    iterations = 0
    for iterations in range(1, int(opts.max_iters) + 1):
        for mode in range(3):
            G = _gram(factors, mode)
            M = _mttkrp(unfoldings, factors, mode)
            factors[mode] = update(factors[mode], M, G, eps)

        if nonneg:
            for r in range(rank):
                if r in degenerate or all(f[:, r].any() for f in factors):
                    continue
                if r in rescued or not _rescue(x, factors, r):
                    degenerate.add(r)
                    notes.append(f"DegenerateComponent: component {r} collapsed to zero")
                    logger.warning(notes[-1])
                else:
                    rescued.add(r)
                    logger.info("component %d collapsed; re-seeded from residual", r)

        factors = _rebalance(factors, degenerate)
        new_err = float(np.sqrt(_sq_error(unfoldings[0], norm_x_sq, factors) / norm_x_sq))
        trace.append(new_err)
        if new_err < _ERROR_FLOOR or abs(err - new_err) < opts.rel_tol * err:
            converged = True
            break
        err = new_err

    weights = np.ones(rank)
    for r in degenerate:
        weights[r] = 0.0
        for f in factors:
            f[:, r] = 0.0
    fitted = normalize_components(KruskalFactors(weights, *factors))
    return FitResult(
        factors=fitted,
        error_trace=tuple(trace),
        final_error=trace[-1],
        iterations=iterations,
        converged=converged,
        seed=int(opts.seed),
        algorithm=algorithm,
        degenerate=tuple(np.flatnonzero(fitted.weights == 0).tolist()),
        warnings=tuple(notes),
    )


def fit_cp_als(x, rank: int, opts: FitOptions = None, init: KruskalFactors = None) -> FitResult:
    """Unconstrained CP by alternating least squares."""
    return _fit(x, rank, opts, init, ALS)


def fit_nn_hals(x, rank: int, opts: FitOptions = None, init: KruskalFactors = None) -> FitResult:
    """Nonnegative CP by hierarchical alternating least squares.

    Each factor column is updated in closed form with the others held
    fixed, then clipped at zero.

    Parameters
    ----------
    x : Dense3Tensor
        Nonnegative data tensor.
    rank : int
        Number of components.
    opts : FitOptions, optional
    init : KruskalFactors, optional
        Starting factors; defaults to ``init_random(..., opts.seed, True)``.

    Returns
    -------
    FitResult
    """
    return _fit(x, rank, opts, init, NN_HALS)


def fit_nn_bcd(x, rank: int, opts: FitOptions = None, init: KruskalFactors = None) -> FitResult:
    """Nonnegative CP by multiplicative block updates (one block per mode).

    A column that is exactly zero in the initialization is a fixed point of
    the update; it is reported in ``FitResult.warnings`` and
    ``FitResult.degenerate`` rather than re-seeded.
    """
    return _fit(x, rank, opts, init, NN_BCD)


_FITTERS = {ALS: fit_cp_als, NN_HALS: fit_nn_hals, NN_BCD: fit_nn_bcd}


def resolve_algorithm(name: str) -> str:
    key = name.lower().replace("_", "-")
    if key in ALGORITHMS:
        return ALGORITHMS[key]
    if name in _FITTERS:
        return name
    raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")


def fit(x, rank: int, algorithm: str = "nn-bcd", opts: FitOptions = None, init=None) -> FitResult:
    return _FITTERS[resolve_algorithm(algorithm)](x, rank, opts, init)
