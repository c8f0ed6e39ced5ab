"""Axis-aligned box regions around embedding classes.

The region family: a single bounding box around the positive class
("plain"), the same box greedily shrunk until it excludes every negative
("small"), and per-cluster bounding boxes after k-means ("cluster"). Each
variant can additionally live in rotated coordinates z = Q^T (x - c) where
Q's columns are the eigenvectors of the positive-class covariance, so the
boxes align with the data's principal axes.

All geometry is f64 and deterministic: clustering and sampling take explicit
seeds, everything else is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateInput,
    DimMismatch,
    EmptyInput,
    KTooLarge,
    MalformedFile,
    SearchExhausted,
)
from . import kvio

KINDS = ("plain", "small", "cluster")


def _as_points(points, dim: Optional[int] = None) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, 0 if dim is None else dim)
    if pts.ndim != 2:
        raise DimMismatch(f"expected a 2-D point array, got shape {pts.shape}")
    if dim is not None and pts.shape[0] and pts.shape[1] != dim:
        raise DimMismatch(f"points have dim {pts.shape[1]}, expected {dim}")
    return pts


@dataclass(eq=False)
class Hyperrectangle:
    """Closed axis-aligned box: lower[i] <= x[i] <= upper[i]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimMismatch(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            bad = int(np.argmax(lo > hi))
            raise ValueError(f"lower > upper in dimension {bad}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self.lower = lo
        self.upper = hi

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def __eq__(self, other):
        if not isinstance(other, Hyperrectangle):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def intersects(self, other: "Hyperrectangle") -> bool:
        if other.dim != self.dim:
            raise DimMismatch(f"dim {other.dim} vs {self.dim}")
        return bool(
            np.all(np.maximum(self.lower, other.lower) <= np.minimum(self.upper, other.upper))
        )

    def is_subset_of(self, other: "Hyperrectangle") -> bool:
        if other.dim != self.dim:
            raise DimMismatch(f"dim {other.dim} vs {self.dim}")
        return bool(np.all(self.lower >= other.lower) and np.all(self.upper <= other.upper))


@dataclass(eq=False)
class RotationTransform:
    """Orthogonal change of coordinates z = Q^T (x - c)."""

    matrix: np.ndarray  # Q, columns are the new axes
    center: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.matrix, dtype=np.float64)
        c = np.asarray(self.center, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimMismatch(f"rotation matrix must be square, got {Q.shape}")
        if c.shape != (Q.shape[0],):
            raise DimMismatch(f"center shape {c.shape} does not match matrix {Q.shape}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(c))):
            raise ValueError("rotation entries must be finite")
        err = np.abs(Q.T @ Q - np.eye(Q.shape[0])).max()
        if err > 1e-8:
            raise ValueError(f"matrix is not orthogonal (max |Q^T Q - I| = {err:.3g})")
        Q.flags.writeable = False
        c.flags.writeable = False
        self.matrix = Q
        self.center = c

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def to_rotated(self, x: np.ndarray) -> np.ndarray:
        """x -> z. Accepts a single vector or an (n, dim) batch."""
        x = np.asarray(x, dtype=np.float64)
        return (x - self.center) @ self.matrix

    def to_input(self, z: np.ndarray) -> np.ndarray:
        """z -> x, the exact inverse map x = Q z + c."""
        z = np.asarray(z, dtype=np.float64)
        return z @ self.matrix.T + self.center

    def __eq__(self, other):
        if not isinstance(other, RotationTransform):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix) and np.array_equal(
            self.center, other.center
        )


@dataclass(eq=False)
class RegionSet:
    """One or more boxes, optionally in rotated coordinates.

    Boxes live in rotated coordinates when ``rotation`` is present, else in
    input coordinates. ``kind`` is one of plain/small/cluster; ``k`` is the
    requested cluster count (boxes may be fewer if clusters came up empty).
    """

    boxes: tuple
    rotation: Optional[RotationTransform] = None
    kind: str = "plain"
    k: Optional[int] = None
    shrunk: bool = False

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise EmptyInput("a region set needs at least one box")
        dim = boxes[0].dim
        for b in boxes:
            if b.dim != dim:
                raise DimMismatch(f"box dims differ: {b.dim} vs {dim}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "cluster":
            if self.k is None or self.k < 1:
                raise ValueError("cluster region sets need k >= 1")
            if len(boxes) > self.k:
                raise ValueError(f"{len(boxes)} boxes exceed k={self.k}")
        if self.kind == "small":
            self.shrunk = True
        if self.rotation is not None and self.rotation.dim != dim:
            raise DimMismatch(f"rotation dim {self.rotation.dim} vs box dim {dim}")
        self.boxes = boxes

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    def describe(self) -> str:
        name = self.kind
        if self.kind == "cluster":
            name += f":{self.k}"
            if self.shrunk:
                name += "+shrink"
        if self.rotation is not None:
            name += "+rot"
        return name

    def __eq__(self, other):
        if not isinstance(other, RegionSet):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.k == other.k
            and self.shrunk == other.shrunk
            and self.rotation == other.rotation
            and self.boxes == other.boxes
        )


def parse_variant(text: str) -> dict:
    """Parse a region variant like ``plain``, ``small+rot``, ``cluster:4+shrink+rot``."""
    tokens = text.strip().split("+")
    head = tokens[0]
    kind, _, k_text = head.partition(":")
    spec = {"kind": kind, "k": None, "rotate": False, "shrink": False}
    if kind not in KINDS:
        raise MalformedFile(f"unknown region kind {kind!r} in variant {text!r}")
    if kind == "cluster":
        if not k_text:
            raise MalformedFile(f"cluster variant needs a count, e.g. cluster:4 (got {text!r})")
        try:
            spec["k"] = int(k_text)
        except ValueError:
            raise MalformedFile(f"bad cluster count {k_text!r} in variant {text!r}") from None
        if spec["k"] < 1:
            raise MalformedFile(f"cluster count must be >= 1 in variant {text!r}")
    elif k_text:
        raise MalformedFile(f"{kind!r} takes no count (got {text!r})")
    for tok in tokens[1:]:
        if tok == "rot":
            spec["rotate"] = True
        elif tok == "shrink":
            spec["shrink"] = True
        else:
            raise MalformedFile(f"unknown variant modifier {tok!r} in {text!r}")
    if kind == "small":
        spec["shrink"] = True
    return spec


# ---------------------------------------------------------------------------
# Core constructions


def bounding_box(points) -> Hyperrectangle:
    """Smallest axis-aligned box containing every point."""
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise EmptyInput("bounding_box of zero points")
    return Hyperrectangle(pts.min(axis=0), pts.max(axis=0))


def contains(box: Hyperrectangle, x) -> bool:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (box.dim,):
        raise DimMismatch(f"point shape {x.shape}, box dim {box.dim}")
    return bool(np.all(box.lower <= x) and np.all(x <= box.upper))


def contains_batch(box: Hyperrectangle, X) -> np.ndarray:
    X = _as_points(X, box.dim)
    return np.all((X >= box.lower) & (X <= box.upper), axis=1)


def region_contains(regions: RegionSet, x) -> bool:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (regions.dim,):
        raise DimMismatch(f"point shape {x.shape}, region dim {regions.dim}")
    return bool(region_contains_batch(regions, x.reshape(1, -1))[0])


def region_contains_batch(regions: RegionSet, X) -> np.ndarray:
    """Boolean mask: which rows fall inside any box of the set."""
    X = _as_points(X, regions.dim)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    Z = regions.rotation.to_rotated(X) if regions.rotation is not None else X
    inside = np.zeros(X.shape[0], dtype=bool)
    for box in regions.boxes:
        inside |= contains_batch(box, Z)
    return inside


def membership_counts(regions: RegionSet, Z) -> np.ndarray:
    """How many boxes contain each row; rows already in box coordinates."""
    Z = _as_points(Z, regions.dim)
    counts = np.zeros(Z.shape[0], dtype=np.int64)
    for box in regions.boxes:
        counts += contains_batch(box, Z)
    return counts


def fit_rotation(points) -> RotationTransform:
    """Principal-axes rotation of a point cloud.

    Q's columns are unit eigenvectors of the sample covariance, ordered by
    descending eigenvalue; the largest-magnitude component of each column is
    made positive so the decomposition is backend-independent.
    """
    pts = _as_points(points)
    if pts.shape[0] < 2:
        raise DegenerateInput(f"rotation fit needs >= 2 points, got {pts.shape[0]}")
    center = pts.mean(axis=0)
    centered = pts - center
    cov = (centered.T @ centered) / (pts.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    Q = vecs[:, order]
    for j in range(Q.shape[1]):
        i = int(np.argmax(np.abs(Q[:, j])))
        if Q[i, j] < 0:
            Q[:, j] = -Q[:, j]
    return RotationTransform(Q, center)


def shrink_to_exclude(box: Hyperrectangle, positives, negatives) -> Hyperrectangle:
    """Tighten box faces until no negative remains inside.

    Greedy: while a negative is inside, consider every single-face move that
    just excludes one of them (lower[i] -> neg[i]+d or upper[i] -> neg[i]-d,
    d = 1e-9 * max(1, |neg[i]|)) and apply the move that evicts the fewest
    currently-retained positives. Ties prefer the smallest dimension index,
    then the lower face, then the earliest negative.
    """
    P = _as_points(positives, box.dim) if np.size(positives) else np.empty((0, box.dim))
    N = _as_points(negatives, box.dim) if np.size(negatives) else np.empty((0, box.dim))
    lower = box.lower.copy()
    upper = box.upper.copy()
    if N.shape[0] == 0:
        return box

    while True:
        inside = np.all((N >= lower) & (N <= upper), axis=1)
        if not inside.any():
            break
        retained = P[np.all((P >= lower) & (P <= upper), axis=1)]
        best_key = None
        best_move = None  # (dim, face, new_value); face 0 = lower, 1 = upper
        for g in N[inside]:
            delta = 1e-9 * np.maximum(1.0, np.abs(g))
            v_low = g + delta
            v_up = g - delta
            ok_low = v_low <= upper
            ok_up = v_up >= lower
            loss_low = (retained < v_low).sum(axis=0) if retained.size else np.zeros(box.dim, int)
            loss_up = (retained > v_up).sum(axis=0) if retained.size else np.zeros(box.dim, int)
            for i in range(box.dim):
                if ok_low[i]:
                    key = (int(loss_low[i]), i, 0)
                    if best_key is None or key < best_key:
                        best_key, best_move = key, (i, 0, v_low[i])
                if ok_up[i]:
                    key = (int(loss_up[i]), i, 1)
                    if best_key is None or key < best_key:
                        best_key, best_move = key, (i, 1, v_up[i])
        if best_move is None:
            # Box thinner than the margin in every dimension: collapse one
            # face onto the other, which keeps the box valid and nonempty.
            g = N[inside][0]
            for i in range(box.dim):
                if lower[i] < g[i]:
                    upper[i] = lower[i]
                    break
                if upper[i] > g[i]:
                    lower[i] = upper[i]
                    break
            else:
                raise DegenerateInput("box is a single point coincident with a negative")
            continue
        i, face, value = best_move
        if face == 0:
            lower[i] = value
        else:
            upper[i] = value
    return Hyperrectangle(lower, upper)


# ---------------------------------------------------------------------------
# Clustering


@dataclass
class KMeansResult:
    assignments: np.ndarray          # (n,) cluster index per point
    centroids: np.ndarray            # (k, dim)
    clusters: tuple                  # per cluster: index array into the input
    objective_history: tuple         # sum of squared distances, per iteration
    iterations: int


def _sq_dist(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans(points, k: int, seed: int) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding, deterministic under seed."""
    pts = _as_points(points)
    n = pts.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the {n} available points")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[int(rng.integers(n))]
    d2 = np.sum((pts - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = pts[idx]
        d2 = np.minimum(d2, np.sum((pts - centroids[j]) ** 2, axis=1))

    assignments = np.full(n, -1, dtype=np.int64)
    history = []
    iterations = 0
    for iterations in range(1, 301):
        dist = _sq_dist(pts, centroids)
        new_assign = dist.argmin(axis=1)
        # Re-seed empty clusters at the point farthest from its centroid.
        for j in range(k):
            if not np.any(new_assign == j):
                worst = int(np.argmax(dist[np.arange(n), new_assign]))
                centroids[j] = pts[worst]
                dist[:, j] = np.sum((pts - centroids[j]) ** 2, axis=1)
                new_assign = dist.argmin(axis=1)
        history.append(float(dist[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for j in range(k):
            members = pts[assignments == j]
            if members.shape[0]:
                centroids[j] = members.mean(axis=0)
    clusters = tuple(np.flatnonzero(assignments == j) for j in range(k))
    return KMeansResult(assignments, centroids, clusters, tuple(history), iterations)


def cluster_hypercubes(positives, negatives, k: int, seed: int,
                       rotation: Optional[RotationTransform] = None,
                       shrink: bool = False) -> tuple:
    """Per-cluster bounding boxes around the positives.

    Returns (RegionSet, negatives_inside_count). Clustering and boxes are
    computed in rotated coordinates when a rotation is given; the negative
    count is over the whole set of boxes.
    """
    P = _as_points(positives)
    N = _as_points(negatives, P.shape[1]) if np.size(negatives) else np.empty((0, P.shape[1]))
    Pz = rotation.to_rotated(P) if rotation is not None else P
    Nz = rotation.to_rotated(N) if (rotation is not None and N.shape[0]) else N
    result = kmeans(Pz, k, seed)
    boxes = []
    for idx in result.clusters:
        if idx.size == 0:
            continue
        box = bounding_box(Pz[idx])
        if shrink and Nz.shape[0]:
            box = shrink_to_exclude(box, Pz[idx], Nz)
        boxes.append(box)
    regions = RegionSet(tuple(boxes), rotation=rotation, kind="cluster", k=k, shrunk=shrink)
    if Nz.shape[0]:
        inside = np.zeros(Nz.shape[0], dtype=bool)
        for box in regions.boxes:
            inside |= contains_batch(box, Nz)
        negative_count = int(inside.sum())
    else:
        negative_count = 0
    return regions, negative_count


def search_min_k(positives, negatives, k_max: int, seed: int,
                 rotation: Optional[RotationTransform] = None) -> int:
    """Smallest k whose cluster boxes contain zero negatives (linear scan)."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    n_points = _as_points(positives).shape[0]
    best_k = None
    best_residual = None
    for k in range(1, min(k_max, n_points) + 1):
        _, residual = cluster_hypercubes(positives, negatives, k, seed, rotation)
        if residual == 0:
            return k
        if best_residual is None or residual < best_residual:
            best_k, best_residual = k, residual
    raise SearchExhausted(
        f"no k <= {k_max} excludes all negatives (best k={best_k} leaves {best_residual})",
        best_k=best_k,
        residual_negatives=best_residual,
    )


def build_region_set(positives, negatives, kind: str, *, k: Optional[int] = None,
                     rotate: bool = False, shrink: bool = False, seed: int = 0) -> RegionSet:
    """Construct a region set of the given kind around the positives."""
    if kind not in KINDS:
        raise ValueError(f"unknown region kind {kind!r}")
    P = _as_points(positives)
    if P.shape[0] == 0:
        raise EmptyInput("cannot build regions around zero positives")
    N = _as_points(negatives, P.shape[1]) if np.size(negatives) else np.empty((0, P.shape[1]))
    rotation = fit_rotation(P) if rotate else None
    if kind == "cluster":
        if k is None:
            raise ValueError("cluster regions need k")
        regions, _ = cluster_hypercubes(P, N, k, seed, rotation, shrink=shrink)
        return regions
    Pz = rotation.to_rotated(P) if rotation is not None else P
    Nz = rotation.to_rotated(N) if (rotation is not None and N.shape[0]) else N
    box = bounding_box(Pz)
    do_shrink = shrink or kind == "small"
    if do_shrink:
        box = shrink_to_exclude(box, Pz, Nz)
    return RegionSet((box,), rotation=rotation, kind=kind, shrunk=do_shrink)


# ---------------------------------------------------------------------------
# Containment statistics


@dataclass
class ContainmentRow:
    """Percentages of each data partition inside a region set (None = empty partition)."""

    region: str
    train_positive: Optional[float]
    test_positive: Optional[float]
    test_negative: Optional[float]
    test_ambiguous: Optional[float]

    COLUMNS = ("train_positive", "test_positive", "test_negative", "test_ambiguous")


def containment_report(sets, dataset) -> list:
    """Percentage of each 3-way partition falling inside each region set.

    Partitions follow the reporting convention: Train positive, Test
    positive, Test negative, Test ambiguous, all under 3-way labels.
    """
    from .dataset import Label, Split, partition

    parts = {
        "train_positive": partition(dataset, Split.TRAIN, Label.POSITIVE, three_way=True),
        "test_positive": partition(dataset, Split.TEST, Label.POSITIVE, three_way=True),
        "test_negative": partition(dataset, Split.TEST, Label.NEGATIVE, three_way=True),
        "test_ambiguous": partition(dataset, Split.TEST, Label.AMBIGUOUS, three_way=True),
    }
    rows = []
    for regions in sets:
        cells = {}
        for name, pts in parts.items():
            if pts.shape[0] == 0:
                cells[name] = None
            else:
                inside = region_contains_batch(regions, pts)
                cells[name] = 100.0 * float(inside.sum()) / pts.shape[0]
        rows.append(ContainmentRow(regions.describe(), **cells))
    return rows


# ---------------------------------------------------------------------------
# Volumes (entirely in log space; -inf marks a degenerate box)


def log_volume_box(box: Hyperrectangle) -> float:
    widths = box.widths
    if np.any(widths == 0.0):
        return float("-inf")
    return float(np.sum(np.log(widths)))


def log_volume(obj) -> float:
    """Natural-log volume of a box, or box-wise sum for a region set."""
    if isinstance(obj, Hyperrectangle):
        return log_volume_box(obj)
    logs = np.array([log_volume_box(b) for b in obj.boxes])
    finite = logs[np.isfinite(logs)]
    if finite.size == 0:
        return float("-inf")
    m = finite.max()
    return float(m + np.log(np.sum(np.exp(finite - m))))


def log_volume_eps_ball(dim: int, eps: float) -> float:
    """Natural-log volume of the l-infinity ball of radius eps: dim * ln(2 eps)."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return float(dim) * float(np.log(2.0 * eps))


def overlap_possible(regions: RegionSet) -> bool:
    """True when some pair of boxes intersects, so summed volume may overcount."""
    boxes = regions.boxes
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if boxes[i].intersects(boxes[j]):
                return True
    return False


def sample_in_boxes(regions: RegionSet, n: int, seed: int) -> tuple:
    """n points uniform over the boxes (box chosen proportional to volume).

    Returns (Z, box_index) in box coordinates; callers map through the
    rotation when one is present. Degenerate boxes get zero weight unless
    every box is degenerate, in which case boxes are drawn uniformly.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    logs = np.array([log_volume_box(b) for b in regions.boxes])
    if np.all(np.isneginf(logs)):
        weights = np.full(len(logs), 1.0 / len(logs))
    else:
        shifted = logs - logs[np.isfinite(logs)].max()
        weights = np.exp(shifted)
        weights /= weights.sum()
    choice = rng.choice(len(regions.boxes), size=n, p=weights)
    Z = np.empty((n, regions.dim))
    for b, box in enumerate(regions.boxes):
        mask = choice == b
        m = int(mask.sum())
        if m == 0:
            continue
        u = rng.random((m, regions.dim))
        Z[mask] = box.lower + u * box.widths
    return Z, choice


def mc_log_union_volume(regions: RegionSet, n: int, seed: int) -> float:
    """Monte Carlo union volume: box-proportional samples deduplicated by
    membership count, so overlapping boxes are not double-counted."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    total = log_volume(regions)
    if not np.isfinite(total):
        return total
    Z, _ = sample_in_boxes(regions, n, seed)
    counts = membership_counts(regions, Z)
    counts = np.maximum(counts, 1)  # round-trip float safety at box faces
    return total + float(np.log(np.mean(1.0 / counts)))


# ---------------------------------------------------------------------------
# Serialization (human-diffable key=value text)

_FORMAT_NAME = "hypercert-region-set"


def save_region_set(regions: RegionSet, path, meta: Optional[dict] = None) -> None:
    pairs = [
        ("format", _FORMAT_NAME),
        ("version", "1"),
        ("kind", regions.kind),
        ("dim", str(regions.dim)),
        ("boxes", str(len(regions.boxes))),
        ("shrunk", "yes" if regions.shrunk else "no"),
    ]
    if regions.kind == "cluster":
        pairs.append(("k", str(regions.k)))
    for key, value in (meta or {}).items():
        pairs.append((f"meta.{key}", str(value)))
    if regions.rotation is not None:
        pairs.append(("rotation.center", kvio.fmt_floats(regions.rotation.center)))
        for r in range(regions.dim):
            pairs.append((f"rotation.row{r}", kvio.fmt_floats(regions.rotation.matrix[r])))
    for b, box in enumerate(regions.boxes):
        pairs.append((f"box{b}.lower", kvio.fmt_floats(box.lower)))
        pairs.append((f"box{b}.upper", kvio.fmt_floats(box.upper)))
    kvio.write_text(path, kvio.format_kv(pairs))


def load_region_set(path) -> tuple:
    """Load a region-set file; returns (RegionSet, meta dict)."""
    source = str(path)
    kv = kvio.parse_kv(kvio.read_text(path), source=source)
    if kv.get("format") != _FORMAT_NAME:
        raise MalformedFile(f"{source}: not a region-set file (format={kv.get('format')!r})")
    if kv.get("version") != "1":
        raise MalformedFile(f"{source}: unsupported version {kv.get('version')!r}")
    try:
        kind = kv["kind"]
        dim = int(kv["dim"])
        n_boxes = int(kv["boxes"])
    except (KeyError, ValueError) as exc:
        raise MalformedFile(f"{source}: bad header ({exc})") from None
    shrunk = kv.get("shrunk", "no") == "yes"
    k = int(kv["k"]) if "k" in kv else None
    meta = {key[5:]: value for key, value in kv.items() if key.startswith("meta.")}
    rotation = None
    if "rotation.center" in kv:
        center = kvio.parse_floats(kv["rotation.center"], dim, f"{source}: rotation.center")
        rows = []
        for r in range(dim):
            key = f"rotation.row{r}"
            if key not in kv:
                raise MalformedFile(f"{source}: missing {key}")
            rows.append(kvio.parse_floats(kv[key], dim, f"{source}: {key}"))
        try:
            rotation = RotationTransform(np.array(rows), center)
        except ValueError as exc:
            raise MalformedFile(f"{source}: {exc}") from None
    boxes = []
    for b in range(n_boxes):
        lo_key, hi_key = f"box{b}.lower", f"box{b}.upper"
        if lo_key not in kv or hi_key not in kv:
            raise MalformedFile(f"{source}: missing bounds for box {b}")
        lo = kvio.parse_floats(kv[lo_key], dim, f"{source}: {lo_key}")
        hi = kvio.parse_floats(kv[hi_key], dim, f"{source}: {hi_key}")
        try:
            boxes.append(Hyperrectangle(lo, hi))
        except ValueError as exc:
            raise MalformedFile(f"{source}: box {b}: {exc}") from None
    try:
        regions = RegionSet(tuple(boxes), rotation=rotation, kind=kind, k=k, shrunk=shrunk)
    except (ValueError, EmptyInput) as exc:
        raise MalformedFile(f"{source}: {exc}") from None
    return regions, meta
