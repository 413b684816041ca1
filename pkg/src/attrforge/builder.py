"""Construction of finite attractor approximations from a covering certificate.

W_k are greedy-net centers of S(kT)B at radius a q^k, Q_k = W_k together with
the stored image S(T)Q_{k-1}, and E0 is the union of the Q_k.  Also: the T/N
refinement, the time-interpolated set for flows and the periodic family
t -> S(t)E0.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .covering import CoveringCertificate
from .metric import (
    FinitePointSet,
    as_point_set,
    dedupe,
    greedy_net,
    hausdorff_distance_onesided,
    read_csv,
    write_csv,
)
from .semigroup import SystemSpec, flow_sample, is_step_multiple, iterate, step


class CertificateMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Provenance:
    k: int
    origin: str  # "net-center", "image-of" or "refine"
    parent: int  # index into S(kT)B, Q_{k-1} or E0 respectively

    def row(self) -> list:
        return [self.k, self.origin, self.parent]


@dataclass
class AttractorApproximation:
    T: float
    k0: int
    k_max: int
    W: dict[int, FinitePointSet]
    Q: dict[int, FinitePointSet]
    E0: FinitePointSet
    provenance: list[Provenance]
    cert: CoveringCertificate
    Q_provenance: dict[int, list[Provenance]] = field(default_factory=dict)

    def cardinality_bound(self, k: int) -> float:
        b, h = self.cert.b, self.cert.h
        return b * sum(h ** (k - l) for l in range(0, k - self.k0 + 1))


def _union(first: np.ndarray, second: np.ndarray):
    """Bit-exact union preserving order: rows of ``first`` then new rows of ``second``."""
    both = np.concatenate([first, second], axis=0)
    return dedupe(both)


def build_E0(sys: SystemSpec, B, cert: CoveringCertificate, k_max: int | None = None) -> AttractorApproximation:
    B = as_point_set(B, sys.metric)
    k_max = cert.k_max if k_max is None else int(k_max)
    if k_max < cert.k0:
        raise CertificateMismatch("k_max must be >= k0")
    T = cert.T
    images = iterate(sys, B, T, k_max)
    W, Q, Qprov = {}, {}, {}
    for k in range(cert.k0, k_max + 1):
        net = greedy_net(images[k], cert.radius(k))
        if net.count > cert.allowed(k):
            raise CertificateMismatch(
                f"certificate does not hold for this system and sample at k={k}: "
                f"{net.count} centers > {cert.allowed(k)}"
            )
        W[k] = images[k].subset(net.centers)
        w_prov = [Provenance(k, "net-center", c) for c in net.centers]
        if k == cert.k0:
            Q[k], Qprov[k] = W[k], w_prov
            continue
        carried = step(sys, Q[k - 1], T)
        pts, keep = _union(W[k].points, carried.points)
        n_w = len(W[k])
        prov = [w_prov[i] if i < n_w else Provenance(k, "image-of", int(i - n_w)) for i in keep]
        Q[k], Qprov[k] = B.with_points(pts), prov
    allq = np.concatenate([Q[k].points for k in sorted(Q)], axis=0)
    allprov = [p for k in sorted(Q) for p in Qprov[k]]
    pts, keep = dedupe(allq)
    return AttractorApproximation(
        float(T), cert.k0, k_max, W, Q, B.with_points(pts), [allprov[i] for i in keep], cert, Qprov
    )


def check_recursion(sys: SystemSpec, approx: AttractorApproximation) -> None:
    """Assert Q_{k0} = W_{k0} and Q_k = W_k u S(T)Q_{k-1} as bit-exact point sets."""
    ks = sorted(approx.Q)
    assert _as_set(approx.Q[ks[0]]) == _as_set(approx.W[ks[0]])
    for k in ks[1:]:
        expect = _as_set(approx.W[k]) | _as_set(step(sys, approx.Q[k - 1], approx.T))
        assert _as_set(approx.Q[k]) == expect, f"recursion broken at k={k}"
        assert len(approx.Q[k]) <= approx.cardinality_bound(k), f"cardinality bound broken at k={k}"


def _as_set(G: FinitePointSet) -> set:
    return {tuple((G.points[i] + 0.0).tolist()) for i in range(len(G))}


def refine_to_TN(sys: SystemSpec, approx: AttractorApproximation, N: int) -> AttractorApproximation:
    """E0~ = union over l < N of S(lT/N)E0."""
    if N < 1:
        raise ValueError("N must be >= 1")
    sub = approx.T / N
    if N > 1 and (sys.kind == "discrete-map" or not is_step_multiple(sys, sub)):
        raise ValueError("time step not divisible")
    frames = [approx.E0.points]
    prov = list(approx.provenance)
    X = approx.E0
    for l in range(1, N):
        X = step(sys, X, sub)
        frames.append(X.points)
        prov.extend(Provenance(l, "refine", i) for i in range(len(X)))
    pts, keep = dedupe(np.concatenate(frames, axis=0))
    return AttractorApproximation(
        sub, approx.k0, approx.k_max, approx.W, approx.Q, approx.E0.with_points(pts),
        [prov[i] for i in keep], approx.cert, approx.Q_provenance,
    )


@dataclass(frozen=True)
class InvarianceReport:
    defect: float
    passed: bool


def verify_positive_invariance(sys: SystemSpec, M, T, tol: float = 0.0) -> InvarianceReport:
    M = as_point_set(M, sys.metric)
    defect = hausdorff_distance_onesided(step(sys, M, T), M)
    return InvarianceReport(defect, defect <= tol)


@dataclass(frozen=True)
class AttractionReport:
    dists: tuple[tuple[int, float], ...]
    xi_hat: float


def measure_attraction(sys: SystemSpec, G, M, T, k_max: int) -> AttractionReport:
    """dist(S(kT)G, M) for k = 0..k_max and the decay rate fitted on the second half.

    The rate is minus the least-squares slope of log dist against time over
    k >= k_max/2, skipping exact zeros; +inf when fewer than two remain.
    """
    G = as_point_set(G, sys.metric)
    M = as_point_set(M, sys.metric)
    if len(G) == 0 or len(M) == 0:
        raise ValueError("empty point set")
    dists = []
    for k, img in enumerate(iterate(sys, G, T, k_max)):
        dists.append((k, hausdorff_distance_onesided(img, M)))
    tail = [(k * float(T), d) for k, d in dists if k >= k_max // 2 and d > 0]
    if len(tail) < 2:
        return AttractionReport(tuple(dists), math.inf)
    t, d = np.array(tail).T
    slope = np.polyfit(t, np.log(d), 1)[0]
    return AttractionReport(tuple(dists), float(-slope))


def build_time_interpolated_E(sys: SystemSpec, E0, T, N: int, p_grid: Sequence[float]) -> FinitePointSet:
    """Union of S(p)E0 over grid times p in [N T, (N+1) T]."""
    E0 = as_point_set(E0, sys.metric)
    lo, hi = N * float(T), (N + 1) * float(T)
    grid = sorted(float(p) for p in p_grid)
    if not grid:
        raise ValueError("empty time grid")
    slack = 1e-12 * max(1.0, hi)
    for p in grid:
        if p < lo - slack or p > hi + slack:
            raise ValueError(f"grid time {p} outside [{lo}, {hi}]")
    frames = flow_sample(sys, E0.points, grid)
    pts, _ = dedupe(np.concatenate(frames, axis=0))
    return E0.with_points(pts)


@dataclass(frozen=True)
class NonautonomousFamily:
    """M(t) = S(t)E0 on a grid of phases in [0, T), extended T-periodically."""

    T: float
    members: dict[float, FinitePointSet]

    def __call__(self, t: float) -> FinitePointSet:
        phase = math.fmod(float(t), self.T)
        if phase < 0:
            phase += self.T
        for s, M in self.members.items():
            if math.isclose(s, phase, rel_tol=0, abs_tol=1e-12 * max(1.0, self.T)):
                return M
        raise KeyError(f"phase {phase} is not on the family grid")


def nonautonomous_family(sys: SystemSpec, E0, T, t_grid: Sequence[float]) -> NonautonomousFamily:
    E0 = as_point_set(E0, sys.metric)
    grid = sorted(float(t) for t in t_grid)
    if any(t < 0 or t >= T for t in grid):
        raise ValueError("family phases must lie in [0, T)")
    if sys.kind == "discrete-map" and grid != [0.0]:
        raise ValueError("discrete-map systems only support the phase 0")
    frames = flow_sample(sys, E0.points, grid)
    return NonautonomousFamily(float(T), {t: E0.with_points(f) for t, f in zip(grid, frames)})


def nonautonomous_defect(sys: SystemSpec, family: NonautonomousFamily, s: float, t: float) -> float:
    """dist(S(t)M(s), M(s+t)), the sampled non-autonomous invariance defect."""
    return hausdorff_distance_onesided(step(sys, family(s), t), family(s + t))


# ---------------------------------------------------------------- storage


def save_approximation(approx: AttractorApproximation, directory) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema": "attractor/1",
        "T": approx.T,
        "k0": approx.k0,
        "k_max": approx.k_max,
        "E0_size": len(approx.E0),
        "Q_sizes": {str(k): len(v) for k, v in approx.Q.items()},
        "W_sizes": {str(k): len(v) for k, v in approx.W.items()},
        "certificate": approx.cert.to_dict(),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    write_csv(approx.E0, out / "E0.csv")
    for k in sorted(approx.Q):
        write_csv(approx.W[k], out / f"W{k}.csv")
        write_csv(approx.Q[k], out / f"Q{k}.csv")
    with open(out / "provenance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["index", "k", "origin", "parent"])
        for i, p in enumerate(approx.provenance):
            w.writerow([i, *p.row()])


def load_approximation(directory, metric: str = "euclidean") -> AttractorApproximation:
    src = Path(directory)
    meta = json.loads((src / "meta.json").read_text())
    cert = CoveringCertificate.from_dict(meta["certificate"])
    ks = sorted(int(k) for k in meta["Q_sizes"])
    W = {k: read_csv(src / f"W{k}.csv", metric) for k in ks}
    Q = {k: read_csv(src / f"Q{k}.csv", metric) for k in ks}
    with open(src / "provenance.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    prov = [Provenance(int(r[1]), r[2], int(r[3])) for r in rows]
    return AttractorApproximation(float(meta["T"]), int(meta["k0"]), int(meta["k_max"]), W, Q,
                                  read_csv(src / "E0.csv", metric), prov, cert)
