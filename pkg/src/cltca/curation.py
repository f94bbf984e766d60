"""Curated task splits from 2-D class embeddings.

Classes are summarized by the centroid of their embedded samples. The
classes whose centroids are vertices of the convex hull are the candidates
for the first, larger task. The remaining classes are dealt evenly into
the later tasks.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .exceptions import DegenerateInput, EmptyClassSet, HullTooSmall, TooManyTasks

# orientation tolerance for cross products
CROSS_TOL = 1e-12


class EmbeddedPoint(NamedTuple):
    x: float
    y: float
    class_label: object


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def class_centroids(points, labels=None):
    """Mean (x, y) of every class.

    Parameters
    ----------
    points : (N, 2) array_like or sequence of EmbeddedPoint
    labels : (N,) array_like, optional
        Required unless ``points`` are ``EmbeddedPoint`` records.

    Returns
    -------
    classes : ndarray
        Sorted distinct class labels.
    centroids : ndarray, shape (n_classes, 2)
    """
    if labels is None:
        pts = list(points)
        if not pts:
            raise EmptyClassSet("no points given")
        labels = [p.class_label for p in pts]
        xy = np.array([(p.x, p.y) for p in pts], dtype=np.float64)
    else:
        xy = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    if xy.size == 0 or labels.size == 0:
        raise EmptyClassSet("no points given")
    if xy.ndim != 2 or xy.shape[1] != 2 or labels.shape != (xy.shape[0],):
        raise ValueError(f"expected (N, 2) points with N labels, got {xy.shape} and {labels.shape}")
    if not np.isfinite(xy).all():
        raise ValueError("embedding coordinates must be finite")
    classes, inverse = np.unique(labels, return_inverse=True)
    counts = np.bincount(inverse, minlength=classes.size)
    centroids = np.stack([
        np.bincount(inverse, weights=xy[:, d], minlength=classes.size) / counts
        for d in range(2)
    ], axis=1)
    return classes, centroids


def quickhull(points) -> List[int]:
    """Indices of the convex hull vertices, counter-clockwise.

    The list starts at the lowest point (smallest y, then smallest x).
    Points lying on a hull edge are not vertices. Among duplicate points
    the first index is reported.

    Raises
    ------
    DegenerateInput
        Fewer than three distinct points, or all points collinear.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {pts.shape}")
    _, first = np.unique(pts, axis=0, return_index=True)
    idx = sorted(int(i) for i in first)
    if len(idx) < 3:
        raise DegenerateInput(f"need at least 3 distinct points, got {len(idx)}")

    # extreme points in x are always hull vertices
    left = min(idx, key=lambda i: (pts[i, 0], pts[i, 1]))
    right = max(idx, key=lambda i: (pts[i, 0], pts[i, 1]))
    side = {i: _cross(pts[left], pts[right], pts[i]) for i in idx}
    above = [i for i in idx if side[i] > CROSS_TOL]
    below = [i for i in idx if side[i] < -CROSS_TOL]
    if not above and not below:
        raise DegenerateInput("all points are collinear")

    # CCW: left -> lower chain -> right -> upper chain -> left
    hull = [left]
    _chain(pts, left, right, below, hull)
    hull.append(right)
    _chain(pts, right, left, above, hull)
    hull = _drop_collinear(pts, hull)

    start = min(range(len(hull)), key=lambda n: (pts[hull[n], 1], pts[hull[n], 0]))
    return hull[start:] + hull[:start]


def _chain(pts, a, b, candidates, out):
    """Append hull vertices strictly right of a->b, in order from a to b."""
    if not candidates:
        return
    pa, pb = pts[a], pts[b]
    dist = [-_cross(pa, pb, pts[i]) for i in candidates]
    top = max(dist)
    # among equally far points take the one nearest b: an edge endpoint
    far = max((i for i, d in zip(candidates, dist) if d == top),
              key=lambda i: np.dot(pts[i] - pa, pb - pa))
    pf = pts[far]
    outside_af = [i for i in candidates if _cross(pa, pf, pts[i]) < -CROSS_TOL]
    outside_fb = [i for i in candidates if _cross(pf, pb, pts[i]) < -CROSS_TOL]
    _chain(pts, a, far, outside_af, out)
    out.append(far)
    _chain(pts, far, b, outside_fb, out)


def _drop_collinear(pts, hull):
    changed = True
    while changed and len(hull) > 3:
        changed = False
        for n in range(len(hull)):
            prev, cur, nxt = hull[n - 1], hull[n], hull[(n + 1) % len(hull)]
            if _cross(pts[prev], pts[cur], pts[nxt]) <= CROSS_TOL:
                del hull[n]
                changed = True
                break
    return hull


@dataclass(frozen=True)
class TaskPlan:
    initial_classes: Tuple
    later_tasks: Tuple[Tuple, ...]
    hull_classes: Tuple
    seed: int

    @property
    def tasks(self):
        return (self.initial_classes,) + self.later_tasks

    def to_dict(self) -> dict:
        conv = _json_label
        return {
            "initial": [conv(c) for c in self.initial_classes],
            "tasks": [[conv(c) for c in t] for t in self.later_tasks],
            "hull": [conv(c) for c in self.hull_classes],
            "seed": self.seed,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _json_label(c):
    if isinstance(c, np.generic):
        return c.item()
    return c


def curate_tasks(classes: Sequence, centroids, num_initial: int,
                 num_later_tasks: int, seed: int) -> TaskPlan:
    """Draw the first task from hull classes and deal the rest round-robin.

    Parameters
    ----------
    classes : sequence
        Class labels, one per centroid row.
    centroids : (n_classes, 2) array_like
    num_initial : int
        Size of the first task; drawn uniformly without replacement from
        the classes whose centroids are hull vertices.
    num_later_tasks : int
        Number of remaining tasks. The leftover classes are shuffled and
        dealt into these so sizes differ by at most one.
    seed : int
    """
    classes = [_json_label(c) for c in classes]
    centroids = np.asarray(centroids, dtype=np.float64)
    if len(classes) != centroids.shape[0]:
        raise ValueError("one centroid per class expected")
    if len(set(classes)) != len(classes):
        raise ValueError("class labels must be distinct")
    hull_classes = [classes[i] for i in quickhull(centroids)]
    if num_initial < 0 or num_later_tasks < 0:
        raise ValueError("task sizes must be nonnegative")
    if len(hull_classes) < num_initial:
        raise HullTooSmall(
            f"hull has {len(hull_classes)} classes, {num_initial} requested for the initial task"
        )
    remaining_count = len(classes) - num_initial
    if remaining_count < num_later_tasks or (remaining_count > 0 and num_later_tasks == 0):
        raise TooManyTasks(
            f"{remaining_count} remaining classes cannot fill {num_later_tasks} tasks"
        )

    rng = np.random.default_rng(seed)
    pick = rng.choice(len(hull_classes), size=num_initial, replace=False)
    initial = [hull_classes[i] for i in pick]
    chosen = set(initial)
    rest = [c for c in classes if c not in chosen]
    order = rng.permutation(len(rest))
    later = [[] for _ in range(num_later_tasks)]
    for n, i in enumerate(order):
        later[n % num_later_tasks].append(rest[i])
    return TaskPlan(tuple(initial), tuple(tuple(t) for t in later),
                    tuple(hull_classes), int(seed))


def read_embedding_csv(path):
    """Read a ``class,x,y`` CSV; returns (xy array, label array).

    Labels that all parse as integers are returned as integers.
    """
    labels, xy = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"class", "x", "y"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected a header with columns class,x,y")
        for row in reader:
            labels.append(row["class"].strip())
            xy.append((float(row["x"]), float(row["y"])))
    try:
        labels = [int(s) for s in labels]
    except ValueError:
        pass
    return np.array(xy, dtype=np.float64).reshape(-1, 2), np.array(labels)
