"""Packing numbers of finite-dimensional unit balls and the closed-form count bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metric import row_norms

NORM_TAGS = ("l1", "l2", "linf", "weighted-l2")
_P = {"l1": 1.0, "l2": 2.0, "linf": math.inf}


@dataclass(frozen=True)
class NormPair:
    """Unit ball of X measured in Y, both on K^n (K = R or C)."""

    n: int
    norm_x: str = "l2"
    norm_y: str = "l2"
    field: str = "real"
    weights_x: tuple[float, ...] | None = None
    weights_y: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        for tag, w in ((self.norm_x, self.weights_x), (self.norm_y, self.weights_y)):
            if tag not in NORM_TAGS:
                raise ValueError(f"unknown norm tag {tag!r}")
            if tag == "weighted-l2":
                if w is None or len(w) != self.n or min(w) <= 0:
                    raise ValueError("weighted-l2 needs n positive weights")
        if self.field not in ("real", "complex"):
            raise ValueError("field must be 'real' or 'complex'")

    @property
    def real_dim(self) -> int:
        return real_dimension(self.n, self.field)

    def norm_x_of(self, V):
        return norm_of(V, self.norm_x, self.field, self.weights_x)

    def norm_y_of(self, V):
        return norm_of(V, self.norm_y, self.field, self.weights_y)


def real_dimension(n: int, field: str) -> int:
    """n over R, 2n over C."""
    if field == "real":
        return n
    if field == "complex":
        return 2 * n
    raise ValueError("field must be 'real' or 'complex'")


_METRIC = {"l1": "sum", "l2": "euclidean", "linf": "max", "weighted-l2": "weighted-euclidean"}


def norm_of(V, tag: str, field: str = "real", weights=None) -> np.ndarray:
    """Row norms; complex vectors are stored as (re, im) pairs and normed by modulus."""
    V = np.asarray(V, dtype=np.float64)
    if field == "complex":
        re, im = V[..., 0::2], V[..., 1::2]
        V = np.sqrt(re * re + im * im)
    return row_norms(V, _METRIC[tag], weights)


def _to_l2(tag: str, n: int, weights) -> float:
    """max ||x||_2 / ||x||_tag."""
    if tag == "weighted-l2":
        return 1.0 / math.sqrt(min(weights))
    return n ** max(0.0, 0.5 - 1.0 / _P[tag])


def _from_l2(tag: str, n: int, weights) -> float:
    """max ||x||_tag / ||x||_2."""
    if tag == "weighted-l2":
        return math.sqrt(max(weights))
    return n ** max(0.0, 1.0 / _P[tag] - 0.5)


def containment_radius(pair: NormPair) -> float:
    """Upper bound on sup ||x||_Y over the X-unit ball (exact when X = Y)."""
    if pair.norm_x == pair.norm_y and pair.weights_x == pair.weights_y:
        return 1.0
    if pair.norm_x in _P and pair.norm_y in _P:
        return pair.n ** max(0.0, 1.0 / _P[pair.norm_y] - 1.0 / _P[pair.norm_x])
    return _to_l2(pair.norm_x, pair.n, pair.weights_x) * _from_l2(pair.norm_y, pair.n, pair.weights_y)


@dataclass(frozen=True)
class PackingResult:
    count: int
    points: np.ndarray
    eps: float
    candidates_tested: int
    restarts: int


TOL = 1e-9


def _lattices(pair: NormPair, eps: float) -> list[np.ndarray]:
    """Generator matrices (rows are basis vectors) whose nonzero points are
    at least eps apart in Y."""
    d = pair.real_dim
    unit = np.eye(d)
    axis_len = pair.norm_y_of(unit)
    gens = [np.diag(eps / axis_len)]
    euclid_y = pair.norm_y == "l2"
    if euclid_y and d == 2:
        gens.append(eps * np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]]))
    if euclid_y and d >= 3:
        # checkerboard lattice D_d, minimal vectors (1, 1, 0, ...)
        basis = np.zeros((d, d))
        basis[0, 0], basis[0, 1] = -1.0, -1.0
        for i in range(1, d):
            basis[i, i - 1], basis[i, i] = 1.0, -1.0
        gens.append(basis * eps / math.sqrt(2.0))
    return gens


def _lattice_points(gen: np.ndarray, reach: float, offset: np.ndarray, limit: int) -> np.ndarray:
    d = gen.shape[0]
    smallest = np.min(np.linalg.svd(gen, compute_uv=False))
    m = int(math.ceil(reach / smallest)) + 1
    if (2 * m + 1) ** d > max(limit, 1) * 4:
        m = max(1, int(((max(limit, 1) * 4) ** (1.0 / d) - 1) // 2))
    ax = np.arange(-m, m + 1, dtype=np.float64)
    grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return grid @ gen + offset


def _greedy_insert(pair: NormPair, cand: np.ndarray, eps: float, budget: int):
    inside = pair.norm_x_of(cand) <= 1.0 + TOL
    cand = cand[inside]
    order = np.argsort(pair.norm_x_of(cand), kind="stable")
    cand = cand[order][:budget]
    chosen = np.empty((0, cand.shape[1]))
    for p in cand:
        if chosen.shape[0] == 0 or np.min(pair.norm_y_of(chosen - p)) >= eps * (1.0 - TOL):
            chosen = np.vstack([chosen, p])
    return chosen, cand.shape[0]


def _rotation(d: int, rng) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def unit_ball_packing(pair: NormPair, eps: float, budget: int = 100_000, seed: int = 0) -> PackingResult:
    """Lower bound on the number of eps-separated (in Y) points of the X-unit ball.

    Lattice packings scaled to separation eps are tried first (centered at the
    origin and shifted by half a cell), then seeded restarts with random rotations, offsets and uniform
    candidates until ``budget`` candidate insertions are spent.  Separation and
    membership are tested with relative tolerance 1e-9, so exact boundary
    configurations such as the hexagon in the disc are found.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    d = pair.real_dim
    reach = _x_reach(pair)
    best = np.zeros((1, d))
    used = 0
    restarts = 0
    rotatable = pair.norm_x == "l2" and pair.norm_y == "l2" and pair.field == "real"
    gens = _lattices(pair, eps)
    # origin-centred lattices, then the same lattices shifted by half a cell
    plan = [(g, np.zeros(d), np.eye(d)) for g in gens] + [(g, 0.5 * g.sum(axis=0), np.eye(d)) for g in gens]
    while used < budget:
        if plan:
            gen, offset, rot = plan.pop(0)
            cand = _lattice_points(gen, reach, offset, budget - used) @ rot.T
        elif restarts % 2 == 0:
            gen = gens[restarts // 2 % len(gens)]
            rot = _rotation(d, rng) if rotatable else np.eye(d)
            offset = rng.uniform(-0.5, 0.5, d) @ gen
            cand = _lattice_points(gen, reach, offset, budget - used) @ rot.T
        else:
            m = min(budget - used, 2000)
            cand = rng.uniform(-reach, reach, (m, d))
        chosen, tested = _greedy_insert(pair, cand, eps, budget - used)
        used += max(tested, 1)
        restarts += 1
        if chosen.shape[0] > best.shape[0]:
            best = chosen
    return PackingResult(best.shape[0], best, float(eps), used, restarts)


def _x_reach(pair: NormPair) -> float:
    """Coordinate bound of the X-unit ball (max |x_i| for ||x||_X <= 1)."""
    if pair.norm_x == "weighted-l2":
        return 1.0 / math.sqrt(min(pair.weights_x))
    return 1.0


def verify_packing(pair: NormPair, points: np.ndarray, eps: float) -> bool:
    if np.any(pair.norm_x_of(points) > 1.0 + TOL):
        return False
    for i in range(points.shape[0] - 1):
        if np.any(pair.norm_y_of(points[i + 1 :] - points[i]) < eps * (1.0 - TOL)):
            return False
    return True


def volume_upper_bound(r: float, eps: float, n_real: int) -> float:
    """(1 + 2r/eps)^n: at most this many eps-separated points fit in a ball of radius r."""
    if r <= 0 or eps <= 0 or n_real <= 0:
        raise ValueError("arguments must be positive")
    return (1.0 + 2.0 * r / eps) ** n_real


def banach_mazur_lp(n: int, p) -> float:
    """Banach-Mazur distance from l_p^n to l_2^n for p in {1, 2, inf}."""
    if p in ("inf", "linf") or p == math.inf:
        p = math.inf
    elif p in (1, 2, "1", "2", "l1", "l2"):
        p = float(str(p).lstrip("l"))
    else:
        raise ValueError(f"unsupported p={p!r}; only 1, 2 and inf have exact values")
    inv = 0.0 if p == math.inf else 1.0 / p
    return float(n) ** abs(inv - 0.5)


def john_bound(n: int) -> float:
    return math.sqrt(n)


def finite_cover_count_bound(n: int, r: float, eps: float, d_bm: float, field: str = "real") -> tuple[float, float]:
    """(1 + 2 d_BM r/eps)^N and (1 + 2 sqrt(n) r/eps)^N with N the real dimension."""
    if not 0 < eps < r:
        raise ValueError("need 0 < eps < r")
    N = real_dimension(n, field)
    return (1.0 + 2.0 * d_bm * r / eps) ** N, (1.0 + 2.0 * math.sqrt(n) * r / eps) ** N


def epsilon_capacity(count: float) -> float:
    if count < 1:
        raise ValueError("count must be >= 1")
    return math.log2(count)


def unit_ball_net(dim: int, eps: float, coords: Sequence[int], ambient: int) -> np.ndarray:
    """An eps-net of the euclidean unit ball of the coordinate subspace ``coords``
    embedded in R^ambient (grid candidates thinned by a greedy packing)."""
    from .metric import FinitePointSet, greedy_net

    step = eps / (2.0 * math.sqrt(dim))
    m = int(math.ceil(1.0 / step))
    ax = np.arange(-m, m + 1) * step
    grid = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    grid = grid[row_norms(grid) <= 1.0]
    net = greedy_net(FinitePointSet(grid), eps)
    out = np.zeros((net.count, ambient))
    out[:, list(coords)] = grid[list(net.centers)]
    return out


# ------------------------------------------------------------ tables

CSV_COLUMNS = ("n", "norm_X", "norm_Y", "eps", "packing_lb", "volume_ub", "capacity_bits")


def capacity_rows(pair: NormPair, eps_list: Sequence[float], budget: int = 100_000, seed: int = 0) -> list[dict]:
    """Packing lower bounds over a list of eps, made monotone by reusing witnesses
    found at larger eps (a packing at eps' >= eps is also a packing at eps)."""
    rows = []
    best_count = 1
    for eps in sorted(eps_list, reverse=True):
        res = unit_ball_packing(pair, eps, budget, seed)
        best_count = max(best_count, res.count)
        r = containment_radius(pair)
        rows.append({
            "n": pair.n, "norm_X": pair.norm_x, "norm_Y": pair.norm_y, "eps": float(eps),
            "packing_lb": best_count, "volume_ub": volume_upper_bound(r, eps, pair.real_dim),
            "capacity_bits": epsilon_capacity(best_count),
        })
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\r\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
