"""Semigroup evaluation: discrete maps and fixed-step RK4 time-T maps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable, Sequence

import numpy as np

from .metric import FinitePointSet, as_point_set, dedupe, row_norms

BLOWUP_LIMIT = 1e12

_threads = 1


def set_threads(n: int) -> None:
    """Worker count for row-parallel evaluation.  Results never depend on it."""
    global _threads
    if n < 1:
        raise ValueError("threads must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


class BlowUpError(RuntimeError):
    def __init__(self, index: int, when: float):
        super().__init__(f"trajectory blow-up at point {index} (time {when:g})")
        self.index = index
        self.when = when


@dataclass(frozen=True)
class SystemSpec:
    """A semigroup on R^phase_dim.

    For ``discrete-map`` systems ``rhs`` is the map itself; for ``ode-flow``
    it is the vector field, integrated with RK4 at ``step_size``.  Both act on
    arrays of shape (count, phase_dim) row by row.
    """

    name: str
    phase_dim: int
    kind: str
    rhs: Callable[[np.ndarray], np.ndarray]
    step_size: float | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    field: str = "real"
    params: dict[str, Any] = dc_field(default_factory=dict)
    metric: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("discrete-map", "ode-flow"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.kind == "ode-flow" and not (self.step_size and self.step_size > 0):
            raise ValueError("ode-flow systems need a positive step_size")
        if self.field not in ("real", "complex"):
            raise ValueError("field must be 'real' or 'complex'")
        if self.field == "complex" and self.phase_dim % 2:
            raise ValueError("complex systems store 2n real coordinates")


def _check(X: np.ndarray, when: float) -> None:
    bad = ~(np.abs(X) <= BLOWUP_LIMIT)
    if bad.any():
        raise BlowUpError(int(np.nonzero(bad.any(axis=1))[0][0]), when)


def _rk4(f, X: np.ndarray, h: float, n: int, t0: float = 0.0) -> np.ndarray:
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n):
        k1 = f(X)
        k2 = f(X + half * k1)
        k3 = f(X + half * k2)
        k4 = f(X + h * k3)
        X = X + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check(X, t0 + (i + 1) * h)
    return X


def _substeps(sys: SystemSpec, dt: float) -> tuple[int, float]:
    """Number and size of RK4 substeps covering a time span ``dt``.

    Spans that are whole multiples of step_size use step_size itself, so the
    semigroup law holds bit-exactly; other spans are cut into equal pieces.
    """
    h = float(sys.step_size)
    n = int(round(dt / h))
    if n > 0 and abs(n * h - dt) <= 1e-9 * max(1.0, abs(dt)):
        return n, h
    n = max(1, math.ceil(dt / h - 1e-9))
    return n, dt / n


def is_step_multiple(sys: SystemSpec, T: float) -> bool:
    if sys.kind == "discrete-map":
        return float(T) == int(T)
    h = float(sys.step_size)
    n = int(round(T / h))
    return abs(n * h - T) <= 1e-9 * max(1.0, abs(T))


def _advance_rows(sys: SystemSpec, X: np.ndarray, T: float, t0: float = 0.0) -> np.ndarray:
    if sys.kind == "discrete-map":
        for i in range(int(T)):
            X = np.asarray(sys.rhs(X), dtype=np.float64)
            _check(X, t0 + i + 1)
        return X
    if T == 0:
        return X
    n, h = _substeps(sys, float(T))
    return _rk4(sys.rhs, X, h, n, t0)


def _parallel_rows(func, X: np.ndarray) -> np.ndarray:
    if _threads == 1 or X.shape[0] < 2 * _threads:
        return func(X)
    bounds = np.linspace(0, X.shape[0], _threads + 1).astype(int)
    chunks = [X[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    offsets = bounds[:-1]
    with ThreadPoolExecutor(_threads) as pool:
        futures = [pool.submit(func, c) for c in chunks]
        parts = []
        for off, fut in zip(offsets, futures):
            try:
                parts.append(fut.result())
            except BlowUpError as err:
                raise BlowUpError(err.index + int(off), err.when) from None
    return np.concatenate(parts, axis=0)


def _validate_time(sys: SystemSpec, T) -> float:
    if T < 0:
        raise ValueError("time must be nonnegative")
    if sys.kind == "discrete-map" and float(T) != int(T):
        raise ValueError("discrete-map systems take integer times")
    if sys.kind == "ode-flow" and not is_step_multiple(sys, T) and T != 0:
        raise ValueError(f"time {T} is not a multiple of step_size {sys.step_size}")
    return float(T)


def step(sys: SystemSpec, X, T) -> FinitePointSet:
    """S(T) applied to every point; point i maps to point i."""
    G = as_point_set(X, sys.metric)
    T = _validate_time(sys, T)
    if G.dim != sys.phase_dim:
        raise ValueError(f"{sys.name} acts on dimension {sys.phase_dim}, got {G.dim}")
    out = _parallel_rows(lambda rows: _advance_rows(sys, rows, T), np.array(G.points))
    return G.with_points(out)


def iterate(sys: SystemSpec, X, T, k: int) -> list[FinitePointSet]:
    """[X, S(T)X, ..., S(kT)X], each computed from the previous one."""
    G = as_point_set(X, sys.metric)
    out = [G]
    for _ in range(k):
        out.append(step(sys, out[-1], T))
    return out


def flow_sample(sys: SystemSpec, x, times: Sequence[float]) -> list[np.ndarray]:
    """S(t)x at each of the increasing ``times``.

    ``x`` may be a single point or a (count, dim) array.  Consecutive spans are
    integrated in order, so the first entry matches step(sys, x, times[0]).
    """
    X = np.atleast_2d(np.asarray(x, dtype=np.float64)).copy()
    single = np.asarray(x).ndim == 1
    out = []
    t_prev = 0.0
    for t in times:
        t = float(t)
        if t < 0 or t < t_prev:
            raise ValueError("times must be nonnegative and increasing")
        if sys.kind == "discrete-map" and t != int(t):
            raise ValueError("discrete-map systems take integer times")
        dt = t - t_prev
        if dt > 0:
            X = _parallel_rows(lambda rows, dt=dt, t0=t_prev: _advance_rows(sys, rows, dt, t0), X)
        out.append(X[0].copy() if single else X.copy())
        t_prev = t
    return out


@dataclass(frozen=True)
class AbsorbingSetEstimate:
    center: tuple[float, ...]
    radius: float
    entry_time: float
    positively_invariant_checked: bool
    witness_probes: int
    horizon: int

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "entry_time": self.entry_time,
            "positively_invariant_checked": self.positively_invariant_checked,
            "witness_probes": self.witness_probes,
            "horizon": self.horizon,
        }


RADIUS_GRID_BASE = 2.0 ** 0.25
MIN_RADIUS = 2.0 ** -40


def _grid_radius(r: float) -> float:
    """Smallest value 2^(j/4) >= r."""
    r = max(r, MIN_RADIUS)
    j = math.ceil(4 * math.log2(r) - 1e-12)
    g = 2.0 ** (j / 4)
    while g < r:
        j += 1
        g = 2.0 ** (j / 4)
    return g


def find_absorbing_ball(
    sys: SystemSpec, probes, horizon: int, T=1, seed: int = 0, drop_escaping: bool = False
) -> AbsorbingSetEstimate:
    """Smallest grid ball that every probe orbit enters by horizon/2 and never leaves.

    A candidate is rejected when the orbits in the last quarter of the horizon
    leave the grid ball holding the third quarter (the orbit is still growing).

    Candidate centers are the origin and the centroid of the final iterates; the
    origin wins ties.  The radius grid is 2^(j/4), j integer.  With
    ``drop_escaping`` probes whose orbits blow up are discarded first (they lie
    outside the basin); ``witness_probes`` counts the survivors.
    """
    G = as_point_set(probes, sys.metric)
    if len(G) == 0:
        raise ValueError("empty point set")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if drop_escaping:
        G = G.subset(surviving_probes(sys, G, T, horizon))
        if len(G) == 0:
            raise RuntimeError("no absorbing ball found")
    tail_start = horizon // 2

    X = np.array(G.points)
    for k in range(horizon):
        X = step(sys, G.with_points(X), T).points
    centers = [np.zeros(G.dim), X.mean(axis=0)]

    # worst distance to each candidate center at every time
    far = np.zeros((len(centers), horizon + 1))
    X = np.array(G.points)
    for k in range(horizon + 1):
        if k:
            X = step(sys, G.with_points(X), T).points
        for c, center in enumerate(centers):
            far[c, k] = float(np.max(G.norms(X - center)))

    best = None
    for c, center in enumerate(centers):
        need = float(np.max(far[c, tail_start:]))
        if horizon >= 4:
            # an orbit still growing in the last quarter is not absorbed
            late_start = (3 * horizon) // 4
            if np.max(far[c, late_start:]) > _grid_radius(float(np.max(far[c, tail_start:late_start]))):
                continue
        r = _grid_radius(need)
        outside = np.nonzero(far[c] > r)[0]
        entry = 0 if outside.size == 0 else int(outside[-1]) + 1
        if entry > horizon:
            continue
        if best is None or r < best[1]:
            best = (center, r, entry)
    if best is None:
        raise RuntimeError("no absorbing ball found")
    center, r, entry = best
    invariant = _boundary_stays_inside(sys, G, center, r, horizon, T, seed)
    return AbsorbingSetEstimate(
        tuple(float(v) for v in center), r, float(entry) * float(T), invariant, len(G), horizon
    )


def surviving_probes(sys: SystemSpec, G: FinitePointSet, T, horizon: int) -> np.ndarray:
    """Indices of probes whose orbits stay finite (below the blow-up limit) for the horizon."""
    keep = np.arange(len(G))
    X = np.array(G.points)
    k = 0
    while k < horizon and keep.size:
        try:
            X = step(sys, G.with_points(X), T).points
            k += 1
        except BlowUpError as err:
            keep = np.delete(keep, err.index)
            X = np.delete(X, err.index, axis=0)
    return keep


def _boundary_stays_inside(sys, G, center, r, horizon, T, seed) -> bool:
    rng = np.random.default_rng(seed)
    dirs = [np.eye(G.dim), -np.eye(G.dim), rng.standard_normal((32, G.dim))]
    D = np.vstack(dirs)
    D = D / G.norms(D)[:, None]
    X = center + r * D
    try:
        for _ in range(horizon):
            X = step(sys, G.with_points(X), T).points
            if np.any(G.norms(X - center) > r):
                return False
    except BlowUpError:
        return False
    return True


def absorbed_sample(sys: SystemSpec, probes, est: AbsorbingSetEstimate, T, per_probe: int) -> FinitePointSet:
    """Orbit points S(kT)x for entry <= k < entry + per_probe: a sample of the
    positively invariant part of the absorbing ball swept out by the probes."""
    G = as_point_set(probes, sys.metric)
    entry = int(round(est.entry_time / float(T)))
    return orbit_union(sys, _steps(sys, G, T, entry), T, per_probe)


def _steps(sys, G, T, k):
    for _ in range(k):
        G = step(sys, G, T)
    return G


def orbit_union(sys: SystemSpec, X: FinitePointSet, T, keep: int) -> FinitePointSet:
    frames = [X.points]
    for _ in range(keep - 1):
        X = step(sys, X, T)
        frames.append(X.points)
    pts, _ = dedupe(np.concatenate(frames, axis=0))
    return X.with_points(pts)


def omega_limit_sample(sys: SystemSpec, B, burn_in: int, keep: int, T=1) -> FinitePointSet:
    """S(kT)x for x in B and burn_in <= k < burn_in + keep, exact duplicates removed."""
    if burn_in < 1 or keep < 1:
        raise ValueError("burn_in and keep must be >= 1")
    G = as_point_set(B, sys.metric)
    X = _steps(sys, G, T, burn_in)
    return orbit_union(sys, X, T, keep)


def finite_difference_jacobian(sys: SystemSpec, x, T=1) -> np.ndarray:
    """Central differences of S(T) at x with step 1e-6 * (1 + |x_i|)."""
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    h = 1e-6 * (1.0 + np.abs(x))
    probes = np.empty((2 * d, d))
    for i in range(d):
        probes[2 * i] = x
        probes[2 * i + 1] = x
        probes[2 * i, i] += h[i]
        probes[2 * i + 1, i] -= h[i]
    img = step(sys, FinitePointSet(probes, sys.metric), T).points
    J = np.empty((d, d))
    for i in range(d):
        J[:, i] = (img[2 * i] - img[2 * i + 1]) / (2.0 * h[i])
    return J


def jacobian(sys: SystemSpec, x, T=1) -> tuple[np.ndarray, str]:
    """D_x S(T): analytic (chained over discrete steps) when available, else finite differences."""
    if sys.jacobian is not None and sys.kind == "discrete-map":
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        J = np.eye(sys.phase_dim)
        for _ in range(int(T)):
            J = np.asarray(sys.jacobian(x[0]), dtype=np.float64) @ J
            x = np.asarray(sys.rhs(x), dtype=np.float64)
        return J, "analytic"
    return finite_difference_jacobian(sys, x, T), "finite-difference"


def pair_distances(sys: SystemSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return row_norms(np.asarray(X) - np.asarray(Y), sys.metric)
