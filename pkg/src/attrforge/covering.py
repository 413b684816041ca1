"""Covering condition N(S(kT)B, a q^k) <= b h^k: checking, fitting, cover propagation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .metric import (
    FinitePointSet,
    PseudometricSpec,
    as_point_set,
    assign_to_centers,
    count_from_radii,
    dedupe,
    diameter,
    farthest_point_order,
    greedy_net,
    row_norms,
)
from .semigroup import SystemSpec, iterate


@dataclass(frozen=True)
class CoverRecord:
    k: int
    eps: float
    count: int
    allowed: float


@dataclass(frozen=True)
class CoveringCertificate:
    k0: int
    a: float
    b: float
    q: float
    h: float
    T: float
    per_k: tuple[CoverRecord, ...]
    empirical: bool = True

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        if self.h < 1 or self.b < 1 or self.a <= 0:
            raise ValueError("need a > 0, b >= 1, h >= 1")

    @property
    def k_max(self) -> int:
        return max((r.k for r in self.per_k), default=self.k0)

    def allowed(self, k: int) -> float:
        return self.b * self.h**k

    def radius(self, k: int) -> float:
        return self.a * self.q**k

    def holds(self) -> bool:
        return all(r.count <= self.allowed(r.k) for r in self.per_k)

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "a": self.a,
            "b": self.b,
            "q": self.q,
            "h": self.h,
            "T": self.T,
            "per_k": [{"k": r.k, "eps": r.eps, "count": r.count, "allowed": r.allowed} for r in self.per_k],
            "empirical": self.empirical,
            "dim_bound": dim_bound(self),
            "xi_T": attraction_rate_bound(self),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoveringCertificate":
        recs = tuple(CoverRecord(int(r["k"]), float(r["eps"]), int(r["count"]), float(r["allowed"])) for r in d["per_k"])
        return cls(int(d["k0"]), float(d["a"]), float(d["b"]), float(d["q"]), float(d["h"]), float(d["T"]), recs,
                   bool(d.get("empirical", True)))


@dataclass(frozen=True)
class CoveringViolation:
    k: int
    eps: float
    count: int
    allowed: float
    per_k: tuple[CoverRecord, ...] = field(default=())

    def to_dict(self) -> dict:
        return {"violation": {"k": self.k, "eps": self.eps, "count": self.count, "allowed": self.allowed},
                "per_k": [r.__dict__ for r in self.per_k]}


def dim_bound(cert: CoveringCertificate) -> float:
    return math.log(cert.h) / math.log(1.0 / cert.q)


def attraction_rate_bound(cert: CoveringCertificate) -> float:
    return math.log(1.0 / cert.q) / cert.T


def _images(sys: SystemSpec, B: FinitePointSet, T, k_max: int) -> list[FinitePointSet]:
    return iterate(sys, B, T, k_max)


def _distinct(G: FinitePointSet) -> int:
    return dedupe(G.points)[0].shape[0]


def check_covering_condition(sys, B, T, a, q, b, h, k0, k_max):
    """Greedy covering counts of S(kT)B at radius a q^k against b h^k.

    Returns a CoveringCertificate when every k in [k0, k_max] passes, else a
    CoveringViolation for the first failing k.
    """
    if not 0 < q < 1 or h < 1 or k0 > k_max:
        raise ValueError("need q in (0,1), h >= 1 and k0 <= k_max")
    B = as_point_set(B, sys.metric)
    images = _images(sys, B, T, k_max)
    recs = []
    for k in range(k0, k_max + 1):
        eps = a * q**k
        rec = CoverRecord(k, eps, greedy_net(images[k], eps).count, b * h**k)
        recs.append(rec)
        if rec.count > rec.allowed:
            return CoveringViolation(rec.k, rec.eps, rec.count, rec.allowed, tuple(recs))
    return CoveringCertificate(int(k0), float(a), float(b), float(q), float(h), float(T), tuple(recs))


def default_a(B: FinitePointSet) -> float:
    """1.5 * max(diam B, 1)."""
    return 1.5 * max(diameter(B), 1.0)


def _root_max(counts: dict[int, int], b: float) -> float:
    """Smallest float h >= 1 with b h^k >= count_k for every k."""
    h = max([1.0] + [(c / b) ** (1.0 / k) for k, c in counts.items()])
    while any(b * h**k < c for k, c in counts.items()):
        h = math.nextafter(h, math.inf)
    return h


def fit_certificate(sys, B, T, k0: int, k_max: int, q_grid: Sequence[float], a_policy="quasi"):
    """Fit (q, h) with b = 1 so the covering condition holds at every k0 <= k <= k_max.

    h(q) is the per-k root max of the measured counts; the q minimising
    ln h / ln(1/q) wins, ties going to the smaller q.  A q is infeasible when
    some image is resolved into singletons (count equals the number of distinct
    points, more than one), since the sample then says nothing about growth.
    """
    if not q_grid or any(not 0 < q < 1 for q in q_grid):
        raise ValueError("q_grid must be a nonempty subset of (0, 1)")
    B = as_point_set(B, sys.metric)
    a = default_a(B) if a_policy == "quasi" else float(a_policy)
    images = _images(sys, B, T, k_max)
    qs = sorted(float(q) for q in q_grid)
    traversals = {}
    for k in range(k0, k_max + 1):
        floor = a * qs[0] ** k
        _, radii, _ = farthest_point_order(images[k], floor)
        traversals[k] = (radii, _distinct(images[k]))
    best = None
    for q in qs:
        counts = {}
        feasible = True
        for k, (radii, n_distinct) in traversals.items():
            c = count_from_radii(radii, a * q**k)
            if c == n_distinct and c > 1:
                feasible = False
                break
            counts[k] = c
        if not feasible:
            continue
        h = _root_max(counts, 1.0)
        dim = math.log(h) / math.log(1.0 / q)
        if best is None or dim < best[0]:
            best = (dim, q, h, counts)
    if best is None:
        raise RuntimeError("no certificate in grid")
    _, q, h, counts = best
    recs = tuple(CoverRecord(k, a * q**k, counts[k], h**k) for k in sorted(counts))
    return CoveringCertificate(int(k0), a, 1.0, q, h, float(T), recs)


# ------------------------------------------------------- cover propagation


class QuasiStabilityViolation(ValueError):
    def __init__(self, i: int, j: int, lhs: float, rhs: float):
        super().__init__(f"d(Sx,Sy) <= eta d(x,y) + rho(x,y) fails on pair ({i}, {j}): {lhs:.6g} > {rhs:.6g}")
        self.pair = (i, j)


@dataclass(frozen=True)
class PropagationResult:
    cells: int
    per_cell: tuple[int, ...]
    product_bound: int
    realized_count: int
    realized_radius: float
    realized_centers: tuple[int, ...]
    max_assigned_distance: float

    @property
    def c_rho(self) -> int:
        return max(self.per_cell)


def propagate_cover(A, image, cover, rho: PseudometricSpec, eta: float, sigma: float, rtol: float = 1e-12):
    """One step of cover propagation through a quasi-stable map.

    ``image`` holds S(x) for each x in ``A`` (same order) and ``cover`` is a
    NetResult of A at radius eps.  Each cell (points nearest to one center, so
    of diameter < 2 eps) is split by a maximal sigma*eps-separated subset in rho;
    the image of every piece has diameter <= 2 (eta + sigma) eps, so balls of
    radius 3 (eta + sigma) eps around one image point per piece cover S(A).
    """
    A = as_point_set(A)
    S = as_point_set(image, A.metric, A.weights)
    if len(S) != len(A):
        raise ValueError("image must list S(x) for every x in A")
    eps = cover.radius
    owner, _ = assign_to_centers(A, cover.centers)
    per_cell = []
    realized = []
    piece_of = np.empty(len(A), dtype=np.intp)
    for c in range(cover.count):
        members = np.nonzero(owner == c)[0]
        cell = A.subset(members)
        _check_pairs(A, S, rho, eta, members, rtol)
        sub = greedy_net(cell, sigma * eps, rho)
        per_cell.append(sub.count)
        sub_owner, _ = assign_to_centers(cell, sub.centers, rho)
        for j, centre in enumerate(sub.centers):
            piece_of[members[sub_owner == j]] = len(realized)
            realized.append(int(members[centre]))
    radius = 3.0 * (eta + sigma) * eps
    d = S.norms(S.points - S.points[np.asarray(realized)[piece_of]])
    far = float(d.max())
    if not far < radius:
        raise AssertionError(f"realized cover fails: distance {far} >= radius {radius}")
    return PropagationResult(cover.count, tuple(per_cell), cover.count * max(per_cell), len(realized),
                             radius, tuple(realized), far)


def _check_pairs(A, S, rho, eta, members, rtol):
    if members.size < 2:
        return
    P, Q = A.points[members], S.points[members]
    fP = rho.features(P)
    for i in range(members.size - 1):
        d = A.norms(P[i + 1 :] - P[i])
        dS = A.norms(Q[i + 1 :] - Q[i])
        rhs = eta * d + row_norms(fP[i + 1 :] - fP[i], rho.norm, rho.weights)
        bad = np.nonzero(dS > rhs * (1 + rtol))[0]
        if bad.size:
            j = int(bad[0])
            raise QuasiStabilityViolation(int(members[i]), int(members[i + 1 + j]), float(dS[j]), float(rhs[j]))
