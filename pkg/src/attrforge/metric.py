"""Finite metric geometry: point sets, greedy nets, exact cover oracle, box counting.

All distances are accumulated coordinate by coordinate with elementwise numpy
operations, so a distance between two points does not depend on the shape of the
batch it was computed in.  That property is what keeps nets and Hausdorff
distances bit-identical across chunkings and thread counts.
"""

from __future__ import annotations

import csv
import itertools
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

METRIC_TAGS = ("euclidean", "max", "sum", "weighted-euclidean")


def row_norms(diff: np.ndarray, metric: str = "euclidean", weights=None) -> np.ndarray:
    """Norm of each vector stored along the last axis of ``diff``."""
    diff = np.asarray(diff, dtype=np.float64)
    dim = diff.shape[-1]
    if dim == 0:
        return np.zeros(diff.shape[:-1])
    if metric == "euclidean" or metric == "weighted-euclidean":
        w = None if metric == "euclidean" else np.asarray(weights, dtype=np.float64)
        acc = np.zeros(diff.shape[:-1])
        for j in range(dim):
            col = diff[..., j]
            acc = acc + (col * col if w is None else w[j] * col * col)
        return np.sqrt(acc)
    if metric == "max":
        acc = np.abs(diff[..., 0])
        for j in range(1, dim):
            acc = np.maximum(acc, np.abs(diff[..., j]))
        return acc
    if metric == "sum":
        acc = np.abs(diff[..., 0])
        for j in range(1, dim):
            acc = acc + np.abs(diff[..., j])
        return acc
    raise ValueError(f"unknown metric tag {metric!r}")


@dataclass(frozen=True, eq=False)
class FinitePointSet:
    """An ordered cloud of points in R^dim with a metric tag.

    Point order matters: nets break ties by lowest index.
    """

    points: np.ndarray
    metric: str = "euclidean"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array (count, dim)")
        if pts.shape[1] == 0:
            raise ValueError("dim must be positive")
        if self.metric not in METRIC_TAGS:
            raise ValueError(f"unknown metric tag {self.metric!r}")
        if self.metric == "weighted-euclidean":
            if self.weights is None or len(self.weights) != pts.shape[1]:
                raise ValueError("weighted-euclidean needs one weight per coordinate")
            if min(self.weights) <= 0:
                raise ValueError("weights must be strictly positive")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def with_points(self, points) -> "FinitePointSet":
        """Same metric, new coordinates."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim)
        return FinitePointSet(pts, self.metric, self.weights)

    def norms(self, diff: np.ndarray) -> np.ndarray:
        return row_norms(diff, self.metric, self.weights)

    def distances_to(self, x) -> np.ndarray:
        return self.norms(self.points - np.asarray(x, dtype=np.float64))

    def subset(self, indices) -> "FinitePointSet":
        return self.with_points(self.points[np.asarray(indices, dtype=np.intp)])


def as_point_set(points, metric: str = "euclidean", weights=None) -> FinitePointSet:
    if isinstance(points, FinitePointSet):
        return points
    return FinitePointSet(np.asarray(points, dtype=np.float64), metric, weights)


@dataclass(frozen=True)
class PseudometricSpec:
    """rho(x, y) = norm(F(x) - F(y)) for a feature map F.

    ``kind`` is one of ``projection`` (F picks ``coords``), ``linear``
    (F(x) = matrix @ x) or ``map`` (F is an arbitrary vectorised callable).
    """

    kind: str
    coords: tuple[int, ...] = ()
    matrix: tuple[tuple[float, ...], ...] | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = None
    norm: str = "euclidean"
    weights: tuple[float, ...] | None = None

    @classmethod
    def projection(cls, coords: Sequence[int], norm: str = "euclidean") -> "PseudometricSpec":
        return cls("projection", coords=tuple(int(c) for c in coords), norm=norm)

    @classmethod
    def linear(cls, matrix, norm: str = "euclidean") -> "PseudometricSpec":
        m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        return cls("linear", matrix=tuple(tuple(map(float, row)) for row in m), norm=norm)

    @classmethod
    def from_map(cls, func, norm: str = "euclidean") -> "PseudometricSpec":
        return cls("map", func=func, norm=norm)

    def features(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.kind == "projection":
            return points[:, list(self.coords)]
        if self.kind == "linear":
            return matvec(np.asarray(self.matrix), points)
        if self.kind == "map":
            out = np.asarray(self.func(points), dtype=np.float64)
            return out.reshape(points.shape[0], -1)
        raise ValueError(f"unknown pseudometric kind {self.kind!r}")

    def pair_distance(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return row_norms(self.features(X) - self.features(Y), self.norm, self.weights)


def matvec(matrix: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rows of ``points`` mapped by ``matrix``; summed column by column.

    Avoids BLAS so a row's image never depends on how many rows are in the batch.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    points = np.asarray(points, dtype=np.float64)
    out = np.zeros((points.shape[0], matrix.shape[0]))
    for j in range(matrix.shape[1]):
        out = out + points[:, j : j + 1] * matrix[:, j]
    return out


@dataclass(frozen=True)
class NetResult:
    centers: tuple[int, ...]
    radius: float
    kind: str = "both"

    @property
    def count(self) -> int:
        return len(self.centers)


def _feature_space(G: FinitePointSet, rho: PseudometricSpec | None):
    if rho is None:
        return G.points, G.metric, G.weights
    return rho.features(G.points), rho.norm, rho.weights


def farthest_point_order(G: FinitePointSet, floor: float, rho: PseudometricSpec | None = None):
    """Farthest-point traversal down to insertion radius ``floor``.

    Returns (centers, insertion_radii, min_dist).  The first radius is +inf.
    Stops once every point is strictly closer than ``floor`` to a center, so the
    prefix of centers with insertion radius >= eps is exactly the greedy eps-net.
    """
    if len(G) == 0:
        raise ValueError("empty point set")
    feats, metric, weights = _feature_space(G, rho)
    centers = [0]
    radii = [np.inf]
    mind = row_norms(feats - feats[0], metric, weights)
    while True:
        nxt = int(np.argmax(mind))
        r = float(mind[nxt])
        if not r >= floor or r == 0.0:
            break
        centers.append(nxt)
        radii.append(r)
        mind = np.minimum(mind, row_norms(feats - feats[nxt], metric, weights))
    return centers, np.array(radii), mind


def count_from_radii(radii: np.ndarray, eps: float) -> int:
    """Greedy net size at radius eps, read off a farthest-point traversal."""
    return int(np.count_nonzero(radii >= eps))


def greedy_net(G: FinitePointSet, eps: float, rho: PseudometricSpec | None = None) -> NetResult:
    """Maximal eps-separated subset, which is also an open eps-cover of G."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    centers, _, mind = farthest_point_order(G, eps, rho)
    assert np.all(mind < eps)
    return NetResult(tuple(centers), float(eps), "both")


def assign_to_centers(G: FinitePointSet, centers: Sequence[int], rho: PseudometricSpec | None = None):
    """Index (into ``centers``) of the nearest center for every point; lowest index wins ties."""
    feats, metric, weights = _feature_space(G, rho)
    best = np.full(len(G), np.inf)
    owner = np.zeros(len(G), dtype=np.intp)
    for j, c in enumerate(centers):
        d = row_norms(feats - feats[c], metric, weights)
        closer = d < best
        owner[closer] = j
        best[closer] = d[closer]
    return owner, best


def pairwise_distances(G: FinitePointSet) -> np.ndarray:
    P = G.points
    return G.norms(P[:, None, :] - P[None, :, :])


EXACT_LIMIT = 20


def exact_cover_number(G: FinitePointSet, eps: float) -> int:
    """Minimum number of open eps-balls centered at points of G covering G.

    Exhaustive search over center subsets; only for tiny instances.
    """
    n = len(G)
    if n == 0:
        raise ValueError("empty point set")
    if n > EXACT_LIMIT:
        raise ValueError("oracle size exceeded")
    D = pairwise_distances(G)
    masks = [sum(1 << j for j in range(n) if D[i, j] < eps) for i in range(n)]
    full = (1 << n) - 1
    for k in range(1, n + 1):
        for combo in itertools.combinations(range(n), k):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc == full:
                return k
    return n


@dataclass(frozen=True)
class DimensionFit:
    slope: float
    intercept: float
    r_squared: float
    eps_range: tuple[float, float]
    counts: tuple[tuple[float, int], ...]


def box_counting_dimension(G: FinitePointSet, eps_grid: Sequence[float], rho=None) -> DimensionFit:
    """Least-squares slope of log N(eps) against log(1/eps) using greedy-net counts."""
    eps = np.asarray(sorted((float(e) for e in eps_grid), reverse=True))
    if eps.size < 3:
        raise ValueError("need at least 3 eps values")
    if eps[-1] <= 0:
        raise ValueError("eps values must be positive")
    _, radii, _ = farthest_point_order(G, float(eps[-1]), rho)
    counts = np.array([count_from_radii(radii, e) for e in eps])
    pairs = tuple((float(e), int(c)) for e, c in zip(eps, counts))
    rng = (float(eps[-1]), float(eps[0]))
    if np.all(counts == counts[0]):
        return DimensionFit(0.0, float(np.log(counts[0])), 0.0, rng, pairs)
    x = np.log(1.0 / eps)
    y = np.log(counts.astype(np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    return DimensionFit(float(slope), float(intercept), max(0.0, min(1.0, r2)), rng, pairs)


def hausdorff_distance_onesided(G: FinitePointSet, H: FinitePointSet, chunk: int = 256) -> float:
    """max over g in G of min over h in H of d(g, h)."""
    if len(H) == 0:
        raise ValueError("empty target set")
    if len(G) == 0:
        return 0.0
    if G.dim != H.dim:
        raise ValueError("dimension mismatch")
    return float(np.max(nearest_distances(G, H, chunk)))


def nearest_distances(G: FinitePointSet, H: FinitePointSet, chunk: int = 256) -> np.ndarray:
    """Distance from each point of G to its nearest point of H."""
    out = np.empty(len(G))
    Hp = H.points
    for start in range(0, len(G), chunk):
        block = G.points[start : start + chunk]
        d = H.norms(block[:, None, :] - Hp[None, :, :])
        out[start : start + chunk] = d.min(axis=1)
    return out


def diameter(G: FinitePointSet) -> float:
    """Exact diameter; uses convex-hull vertices for large euclidean clouds."""
    n = len(G)
    if n <= 1:
        return 0.0
    P = G.points
    if G.metric == "max":
        return float(np.max(P.max(axis=0) - P.min(axis=0)))
    if G.metric == "sum" and G.dim <= 10:
        best = 0.0
        for signs in itertools.product((1.0, -1.0), repeat=G.dim - 1):
            s = np.concatenate(([1.0], signs))
            proj = matvec(s.reshape(1, -1), P)[:, 0]
            best = max(best, float(proj.max() - proj.min()))
        return best
    cand = G
    if n > 3000 and G.dim <= 6:
        from scipy.spatial import ConvexHull, QhullError

        scaled = P if G.weights is None else P * np.sqrt(np.asarray(G.weights))
        try:
            cand = G.subset(np.sort(ConvexHull(scaled).vertices))
        except (QhullError, ValueError):
            cand = G
    best = 0.0
    for start in range(0, len(cand), 512):
        block = cand.points[start : start + 512]
        d = cand.norms(block[:, None, :] - cand.points[None, :, :])
        best = max(best, float(d.max()))
    return best


def dedupe(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop bit-identical rows, keeping first occurrences in their original order.

    Returns (unique_points, kept_indices).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        return points, np.zeros(0, dtype=np.intp)
    # -0.0 and 0.0 compare equal but differ in bits; normalise so equality is by value.
    keyed = points + 0.0
    view = keyed.view(np.dtype((np.void, keyed.dtype.itemsize * keyed.shape[1]))).ravel()
    _, first = np.unique(view, return_index=True)
    keep = np.sort(first)
    return points[keep], keep


# ---------------------------------------------------------------- I/O

MAGIC = b"ATRF"
_HEADER = struct.Struct("<4sHIQ")


def write_csv(G: FinitePointSet | np.ndarray, path) -> None:
    pts = G.points if isinstance(G, FinitePointSet) else np.atleast_2d(G)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        for row in pts:
            w.writerow([repr(float(v)) for v in row])


def read_csv(path, metric: str = "euclidean", weights=None) -> FinitePointSet:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError("empty point set")
    return FinitePointSet(np.array(rows), metric, weights)


def write_binary(G: FinitePointSet, path) -> None:
    header = _HEADER.pack(MAGIC, 1, G.dim, len(G))
    Path(path).write_bytes(header + np.ascontiguousarray(G.points, dtype="<f8").tobytes())


def read_binary(path, metric: str = "euclidean", weights=None) -> FinitePointSet:
    blob = Path(path).read_bytes()
    magic, version, dim, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError("not an ATRF file")
    if version != 1:
        raise ValueError(f"unsupported ATRF version {version}")
    body = blob[_HEADER.size :]
    if len(body) != 8 * dim * count:
        raise ValueError("truncated ATRF payload")
    pts = np.frombuffer(body, dtype="<f8").reshape(count, dim).astype(np.float64)
    return FinitePointSet(pts, metric, weights)
