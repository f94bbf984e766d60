"""Rank sweeps with replicates, elbow detection and stability-based rank choice."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .compare import similarity_score
from .exceptions import NoStableRank, TooFewRanks
from .solvers import FitOptions, FitResult, fit, resolve_algorithm

logger = logging.getLogger(__name__)

ELBOW_IMPROVEMENT = 0.05
STABILITY_THRESHOLD = 0.8


def replicate_seed(seed_base: int, rank: int, replicate: int) -> int:
    """Seed of one sweep replicate; adding ranks never shifts existing seeds."""
    return int(seed_base) + 1000 * int(rank) + int(replicate)


@dataclass(frozen=True, eq=False)
class RankSummary:
    rank: int
    results: Tuple[Optional[FitResult], ...]
    failures: Tuple[str, ...]
    min_error: float
    mean_error: float
    std_error: float
    mean_similarity: Optional[float]
    min_similarity: Optional[float]

    @property
    def errors(self):
        return [r.final_error for r in self.results if r is not None]


@dataclass(frozen=True, eq=False)
class SweepReport:
    """Replicate fits and summary statistics for every rank of a sweep."""

    ranks: Tuple[int, ...]
    n_replicates: int
    algorithm: str
    seed_base: int
    per_rank: Dict[int, RankSummary]

    @property
    def min_errors(self) -> List[float]:
        return [self.per_rank[r].min_error for r in self.ranks]

    @property
    def mean_similarities(self) -> Dict[int, Optional[float]]:
        return {r: self.per_rank[r].mean_similarity for r in self.ranks}

    def best_fit(self, rank: int) -> FitResult:
        fits = [f for f in self.per_rank[rank].results if f is not None]
        return min(fits, key=lambda f: f.final_error)

    def to_dict(self) -> dict:
        out = {
            "ranks": list(self.ranks),
            "n_replicates": self.n_replicates,
            "algorithm": self.algorithm,
            "seed_base": self.seed_base,
            "per_rank": [],
        }
        for r in self.ranks:
            s = self.per_rank[r]
            out["per_rank"].append({
                "rank": r,
                "replicates": [
                    None if f is None else {
                        "replicate": i,
                        "seed": f.seed,
                        "final_error": f.final_error,
                        "iterations": f.iterations,
                        "converged": f.converged,
                        "degenerate": list(f.degenerate),
                    }
                    for i, f in enumerate(s.results)
                ],
                "failures": list(s.failures),
                "min_error": s.min_error,
                "mean_error": s.mean_error,
                "std_error": s.std_error,
                "mean_similarity": s.mean_similarity,
                "min_similarity": s.min_similarity,
            })
        return out

    def to_json(self, path=None, indent=2) -> str:
        text = json.dumps(self.to_dict(), indent=indent, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path=None) -> str:
        """Error-curve table with columns rank, replicate, error, mean_similarity."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "replicate", "error", "mean_similarity"])
        for r in self.ranks:
            s = self.per_rank[r]
            sim = "" if s.mean_similarity is None else repr(s.mean_similarity)
            for i, f in enumerate(s.results):
                writer.writerow([r, i, "" if f is None else repr(f.final_error), sim])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _summarize(rank, results, failures):
    fits = [f for f in results if f is not None]
    errs = np.array([f.final_error for f in fits])
    if errs.size == 0:
        stats = (float("nan"),) * 3
    else:
        stats = (float(errs.min()), float(errs.mean()), float(errs.std()))
    sims = [similarity_score(a.factors, b.factors).score
            for a, b in itertools.combinations(fits, 2)]
    mean_sim = float(np.mean(sims)) if sims else None
    min_sim = float(np.min(sims)) if sims else None
    return RankSummary(rank, tuple(results), tuple(failures), *stats, mean_sim, min_sim)


def sweep_ranks(x, rank_range, n_replicates: int = 10, algorithm: str = "nn-bcd",
                opts: FitOptions = None, n_workers: Optional[int] = None) -> SweepReport:
    """Fit ``n_replicates`` models at every rank in ``rank_range``.

    Parameters
    ----------
    x : Dense3Tensor
    rank_range : (int, int) or iterable of int
        Inclusive ``(low, high)`` pair, or an explicit list of ranks.
    n_replicates : int
        Fits per rank. Replicate ``i`` at rank ``r`` uses seed
        ``opts.seed + 1000*r + i``.
    algorithm : {'als', 'nn-hals', 'nn-bcd'}
    opts : FitOptions, optional
        Shared options; ``opts.seed`` is the seed base.
    n_workers : int, optional
        Thread pool size; defaults to the number of logical cores.

    Returns
    -------
    SweepReport
        Failed fits are recorded as ``None`` with a message in
        ``failures``; they do not abort the sweep.
    """
    if isinstance(rank_range, tuple) and len(rank_range) == 2:
        ranks = tuple(range(int(rank_range[0]), int(rank_range[1]) + 1))
    else:
        ranks = tuple(int(r) for r in rank_range)
    if not ranks or min(ranks) < 1:
        raise ValueError(f"rank range must be nonempty and positive, got {rank_range!r}")
    if int(n_replicates) < 1:
        raise ValueError("n_replicates must be >= 1")
    algorithm = resolve_algorithm(algorithm)
    opts = opts or FitOptions()
    jobs = [(r, i) for r in ranks for i in range(int(n_replicates))]

    def run(job):
        r, i = job
        o = replace(opts, seed=replicate_seed(opts.seed, r, i))
        try:
            return fit(x, r, algorithm, o), None
        except Exception as exc:  # recorded per fit, not fatal to the sweep
            logger.warning("rank %d replicate %d failed: %s", r, i, exc)
            return None, f"replicate {i}: {type(exc).__name__}: {exc}"

    workers = n_workers or os.cpu_count() or 1
    if workers == 1:
        outcomes = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, jobs))
    by_job = dict(zip(jobs, outcomes))

    per_rank = {}
    for r in ranks:
        results = [by_job[(r, i)][0] for i in range(n_replicates)]
        failures = [by_job[(r, i)][1] for i in range(n_replicates) if by_job[(r, i)][1]]
        per_rank[r] = _summarize(r, results, failures)
    return SweepReport(ranks, int(n_replicates), algorithm, int(opts.seed), per_rank)


class Elbow(NamedTuple):
    rank: int
    interval: Tuple[int, int]
    no_elbow: bool


def detect_elbow(min_errors, ranks=None, threshold: float = ELBOW_IMPROVEMENT) -> Elbow:
    """Smallest rank after which every step improves the error by less than ``threshold``.

    The improvement of step ``r -> r+1`` is ``(err[r] - err[r+1]) / err[r]``.
    The returned interval is ``[elbow, elbow + 2]`` clipped to the ranks
    given. If only the last rank qualifies, the rule never fired:
    ``no_elbow`` is set and the interval is the last rank alone.
    """
    errs = np.asarray(min_errors, dtype=np.float64)
    if ranks is None:
        ranks = list(range(1, errs.size + 1))
    ranks = [int(r) for r in ranks]
    if errs.size < 3:
        raise TooFewRanks(f"elbow detection needs at least 3 ranks, got {errs.size}")
    if len(ranks) != errs.size:
        raise ValueError("ranks and errors differ in length")
    if not np.isfinite(errs).all():
        raise ValueError("errors must be finite")
    with np.errstate(divide="ignore", invalid="ignore"):
        improve = (errs[:-1] - errs[1:]) / errs[:-1]
    improve = np.where(errs[:-1] > 0, improve, 0.0)
    small = improve < threshold
    idx = errs.size - 1
    while idx > 0 and small[idx - 1]:
        idx -= 1
    no_elbow = idx == errs.size - 1
    hi = min(idx + 2, errs.size - 1)
    return Elbow(ranks[idx], (ranks[idx], ranks[hi]), bool(no_elbow))


def select_rank(report: SweepReport, threshold: float = STABILITY_THRESHOLD,
                elbow_threshold: float = ELBOW_IMPROVEMENT) -> int:
    """Lowest rank in the elbow interval whose replicates agree above ``threshold``.

    Agreement is the mean similarity over all replicate pairs.
    """
    if report.n_replicates < 2:
        raise ValueError("rank selection needs at least 2 replicates per rank")
    elbow = detect_elbow(report.min_errors, report.ranks, elbow_threshold)
    lo, hi = elbow.interval
    candidates = [r for r in report.ranks if lo <= r <= hi]
    sims = {r: report.per_rank[r].mean_similarity for r in candidates}
    for r in candidates:
        if sims[r] is not None and sims[r] > threshold:
            return r
    scored = [r for r in candidates if sims[r] is not None]
    best = max(scored, key=lambda r: sims[r]) if scored else candidates[0]
    raise NoStableRank(elbow.interval, best, sims.get(best) or float("nan"), threshold)
