"""Command-line interface.

Exit codes: 0 success, 2 bad arguments or input, 3 I/O or file-format
error, 4 no usable replicate, 5 no stable rank, 6 rank mismatch,
7 task curation infeasible.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .compare import align, similarity_score
from .curation import class_centroids, curate_tasks, read_embedding_csv
from .exceptions import (
    DegenerateInput,
    EmptyManifest,
    HullTooSmall,
    ManifestError,
    NegativeInput,
    NoStableRank,
    NpyFormatError,
    RankMismatch,
    ShapeMismatchAcrossSnapshots,
    TCAError,
    TooManyTasks,
    ZeroTensor,
    InvalidSpec,
)
from .ingest import (
    assemble_tensor,
    export_factors,
    export_neuron_mask,
    load_factors,
    load_manifest,
    load_tensor,
    save_tensor,
)
from .npyio import read_npy
from .rank import select_rank, sweep_ranks
from .solvers import FitOptions, fit, resolve_algorithm
from .synth import PlantedSpec, generate

logger = logging.getLogger("cltca")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4
EXIT_NO_STABLE_RANK = 5
EXIT_RANK_MISMATCH = 6
EXIT_CURATION = 7

_IO_ERRORS = (OSError, NpyFormatError, ManifestError, EmptyManifest,
              ShapeMismatchAcrossSnapshots, json.JSONDecodeError)


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("TCA_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CLIError(f"TCA_SEED must be an integer, got {env!r}", EXIT_USAGE) from None
    return 0


def _threads(args):
    return args.threads or os.cpu_count() or 1


def _out_dir(args):
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _load_tensor(path):
    if not os.path.isfile(path):
        raise CLIError(f"tensor file not found: {path}", EXIT_IO)
    return load_tensor(path)


def _fit_options(args, seed):
    try:
        return FitOptions(max_iters=args.max_iters, rel_tol=args.tol, seed=seed)
    except ValueError as exc:
        raise CLIError(str(exc), EXIT_USAGE) from None


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _rank_range(text):
    try:
        lo, hi = (int(t) for t in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"rank range {text!r} must satisfy 1 <= A <= B")
    return lo, hi


# ---------------------------------------------------------------- fit

def cmd_fit(args):
    x = _load_tensor(args.tensor)
    seed = _seed(args)
    algorithm = resolve_algorithm(args.algorithm)
    opts = _fit_options(args, seed)
    if algorithm != "ALS" and x.data.min() < 0:
        raise CLIError(f"{args.algorithm} needs a nonnegative tensor; use --algorithm als",
                       EXIT_USAGE)

    def run(i):
        o = FitOptions(max_iters=opts.max_iters, rel_tol=opts.rel_tol, seed=seed + i)
        try:
            return fit(x, args.rank, algorithm, o), None
        except (NegativeInput, ZeroTensor):
            raise
        except TCAError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    try:
        with ThreadPoolExecutor(max_workers=min(_threads(args), args.replicates)) as pool:
            outcomes = list(pool.map(run, range(args.replicates)))
    except (NegativeInput, ZeroTensor) as exc:
        raise CLIError(str(exc), EXIT_USAGE) from None

    rows = []
    usable = []
    for i, (res, err) in enumerate(outcomes):
        row = {"replicate": i, "seed": seed + i, "error": err}
        if res is not None:
            row.update(final_error=res.final_error, iterations=res.iterations,
                       converged=res.converged, degenerate=list(res.degenerate))
            if len(res.degenerate) < res.rank:
                usable.append((res.final_error, i, res))
        rows.append(row)
    if not usable:
        raise CLIError("no replicate produced a usable decomposition", EXIT_DEGENERATE)
    _, best_i, best = min(usable)

    out = _out_dir(args)
    export_factors(best, os.path.join(out, "factors"), axis_labels=x.axis_labels,
                   replicate=best_i, tensor=args.tensor)
    errors = np.array([r["final_error"] for r in rows if "final_error" in r])
    report = {
        "tensor": args.tensor,
        "shape": list(x.shape),
        "algorithm": algorithm,
        "rank": args.rank,
        "seed": seed,
        "max_iters": opts.max_iters,
        "tol": opts.rel_tol,
        "best_replicate": best_i,
        "final_error": best.final_error,
        "mean_error": float(errors.mean()),
        "std_error": float(errors.std()),
        "replicates": rows,
    }
    _write_json(os.path.join(out, "fit_report.json"), report)
    print(f"rank {args.rank} {algorithm}: best error {best.final_error:.6g} "
          f"(replicate {best_i} of {args.replicates})")
    return EXIT_OK


# ---------------------------------------------------------------- sweep

def cmd_sweep(args):
    if args.select and args.replicates < 2:
        raise CLIError("--select needs --replicates >= 2 to measure stability", EXIT_USAGE)
    x = _load_tensor(args.tensor)
    seed = _seed(args)
    algorithm = resolve_algorithm(args.algorithm)
    if algorithm != "ALS" and x.data.min() < 0:
        raise CLIError(f"{args.algorithm} needs a nonnegative tensor", EXIT_USAGE)
    report = sweep_ranks(x, args.ranks, args.replicates, algorithm,
                         _fit_options(args, seed), n_workers=_threads(args))
    out = _out_dir(args)
    doc = report.to_dict()
    code = EXIT_OK
    if args.select:
        try:
            chosen = select_rank(report, args.threshold, args.elbow_threshold)
            doc["selected_rank"] = chosen
            print(f"selected rank: {chosen}")
        except NoStableRank as exc:
            doc["selected_rank"] = None
            print(str(exc), file=sys.stderr)
            code = EXIT_NO_STABLE_RANK
    _write_json(os.path.join(out, "sweep.json"), doc)
    report.to_csv(os.path.join(out, "sweep.csv"))
    return code


# ---------------------------------------------------------------- compare

def cmd_compare(args):
    try:
        a, _ = load_factors(args.a)
        b, _ = load_factors(args.b)
    except _IO_ERRORS as exc:
        raise CLIError(str(exc), EXIT_IO) from None
    try:
        sim = similarity_score(a, b, weight_penalty=args.weight_penalty)
    except RankMismatch as exc:
        raise CLIError(str(exc), EXIT_RANK_MISMATCH) from None
    out = _out_dir(args)
    export_factors(align(a, b), os.path.join(out, "aligned_b"), source=args.b, aligned_to=args.a)
    _write_json(os.path.join(out, "similarity.json"), {
        "a": args.a,
        "b": args.b,
        "score": sim.score,
        "permutation": sim.permutation.tolist(),
        "per_component": sim.per_component.tolist(),
        "weight_penalty": args.weight_penalty,
    })
    with open(os.path.join(out, "similarity.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["component_a", "component_b", "similarity"])
        for r, (s, v) in enumerate(zip(sim.permutation, sim.per_component)):
            writer.writerow([r, int(s), repr(float(v))])
    print(f"similarity score: {sim.score:.6f}")
    print(f"permutation: {sim.permutation.tolist()}")
    return EXIT_OK


# ---------------------------------------------------------------- curate

def _load_embedding(args):
    path = args.embedding
    if path.endswith(".npy"):
        if not args.labels:
            raise CLIError("--labels is required with a .npy embedding", EXIT_USAGE)
        return read_npy(path), read_npy(args.labels)
    return read_embedding_csv(path)


def cmd_curate(args):
    try:
        xy, labels = _load_embedding(args)
    except ValueError as exc:
        if isinstance(exc, _IO_ERRORS):
            raise
        raise CLIError(str(exc), EXIT_USAGE) from None
    seed = _seed(args)
    classes, centroids = class_centroids(xy, labels)
    try:
        plan = curate_tasks(classes, centroids, args.initial, args.tasks, seed)
    except (HullTooSmall, TooManyTasks, DegenerateInput) as exc:
        raise CLIError(str(exc), EXIT_CURATION) from None
    out = _out_dir(args)
    text = plan.to_json(os.path.join(out, "task_plan.json"))
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------- misc

def cmd_build_tensor(args):
    tensor = assemble_tensor(load_manifest(args.manifest))
    out = _out_dir(args)
    save_tensor(tensor, os.path.join(out, "tensor.npy"))
    print(f"tensor {tensor.shape} written to {os.path.join(out, 'tensor.npy')}")
    return EXIT_OK


def cmd_synth(args):
    with open(args.spec) as fh:
        doc = json.load(fh)
    doc.setdefault("seed", _seed(args))
    try:
        spec = PlantedSpec.from_dict(doc)
    except InvalidSpec as exc:
        raise CLIError(str(exc), EXIT_USAGE) from None
    tensor, truth = generate(spec)
    out = _out_dir(args)
    save_tensor(tensor, os.path.join(out, "tensor.npy"))
    export_factors(truth, os.path.join(out, "truth"), spec=spec.to_dict())
    print(f"planted tensor {tensor.shape}, rank {spec.rank}, written to {out}")
    return EXIT_OK


def cmd_mask(args):
    try:
        factors, meta = load_factors(args.factors)
    except _IO_ERRORS as exc:
        raise CLIError(str(exc), EXIT_IO) from None
    if not 0 <= args.component < factors.rank:
        raise CLIError(f"--component must lie in 0..{factors.rank - 1}", EXIT_USAGE)
    if not 0 <= args.top_k <= factors.U.shape[0]:
        raise CLIError(f"--top-k must lie in 0..{factors.U.shape[0]}", EXIT_USAGE)
    mask = export_neuron_mask(factors, args.component, args.top_k,
                              layer=args.layer, source=os.path.abspath(args.factors))
    out = _out_dir(args)
    mask.save(os.path.join(out, "mask.npy"))
    print(f"masked {int(mask.mask.sum())} of {mask.mask.size} units")
    return EXIT_OK


def write_layer_errors(reports, path):
    """Collect ``fit_report.json`` files into one per-layer error CSV.

    ``reports`` maps a layer name to the path of its fit report.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "rank", "algorithm", "best_error", "mean_error", "std_error",
                         "n_replicates"])
        for layer, report_path in reports.items():
            with open(report_path) as rf:
                rep = json.load(rf)
            writer.writerow([layer, rep["rank"], rep["algorithm"], repr(rep["final_error"]),
                             repr(rep["mean_error"]), repr(rep["std_error"]),
                             len(rep["replicates"])])


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="base seed (default: $TCA_SEED, else 0)")
    common.add_argument("--threads", type=_positive, default=None,
                        help="worker threads for replicate fits (default: all cores)")
    common.add_argument("--out-dir", default=".", help="directory for output files")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tensor", required=True, help="tensor .npy or manifest .json")
    solver.add_argument("--algorithm", choices=sorted(ALGORITHM_CHOICES), default="nn-bcd")
    solver.add_argument("--max-iters", type=_positive, default=500)
    solver.add_argument("--tol", type=float, default=1e-6)

    parser = argparse.ArgumentParser(
        prog="cltca",
        description="Tensor component analysis of continual-learning snapshots.",
        epilog="exit codes: 0 ok, 2 bad arguments, 3 I/O error, 4 no usable replicate, "
               "5 no stable rank, 6 rank mismatch, 7 curation infeasible",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common, solver], help="fit CP models at one rank")
    p.add_argument("--rank", type=_positive, required=True)
    p.add_argument("--replicates", type=_positive, default=1)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", parents=[common, solver], help="rank sweep with replicates")
    p.add_argument("--ranks", type=_rank_range, required=True, help="inclusive range A..B")
    p.add_argument("--replicates", type=_positive, default=10)
    p.add_argument("--select", action="store_true", help="apply elbow + stability rank choice")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--elbow-threshold", type=float, default=0.05)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", parents=[common], help="similarity of two factor sets")
    p.add_argument("--a", required=True, help="factors directory")
    p.add_argument("--b", required=True, help="factors directory")
    p.add_argument("--weight-penalty", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("curate", parents=[common], help="curate tasks from a 2-D embedding")
    p.add_argument("--embedding", required=True, help="class,x,y CSV or (N, 2) .npy")
    p.add_argument("--labels", help="length-N label .npy (with a .npy embedding)")
    p.add_argument("--initial", type=_positive, required=True)
    p.add_argument("--tasks", type=int, required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("build-tensor", parents=[common], help="assemble a tensor from a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_build_tensor)

    p = sub.add_parser("synth", parents=[common], help="write a planted tensor and its truth")
    p.add_argument("--spec", required=True, help="JSON planted-tensor spec")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mask", parents=[common], help="export a top-k neuron mask")
    p.add_argument("--factors", required=True)
    p.add_argument("--component", type=int, required=True)
    p.add_argument("--top-k", type=int, required=True)
    p.add_argument("--layer")
    p.set_defaults(func=cmd_mask)
    return parser


ALGORITHM_CHOICES = ("als", "nn-hals", "nn-bcd")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"cltca: error: {exc}", file=sys.stderr)
        return exc.code
    except _IO_ERRORS as exc:
        print(f"cltca: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TCAError, ValueError) as exc:
        print(f"cltca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
