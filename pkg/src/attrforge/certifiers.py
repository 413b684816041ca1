"""Stability certificates estimated from pair data, their implications, and the
closed-form dimension bounds they feed.

Every estimator is an envelope (max-ratio) fit, so the certificate's defining
inequalities hold on the exact pairs used to fit it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .capacity import NormPair, real_dimension, unit_ball_net, unit_ball_packing, volume_upper_bound
from .metric import FinitePointSet, PseudometricSpec, as_point_set, matvec, row_norms
from .semigroup import SystemSpec, flow_sample, jacobian, finite_difference_jacobian, step

RTOL = 1e-12


class CertificationError(ValueError):
    """A stability property fails on the supplied data; ``witness`` names the worst pair."""

    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


# ------------------------------------------------------------------ pairs


@dataclass(frozen=True)
class PairData:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=np.float64))
        if X.shape != Y.shape or X.shape[0] == 0:
            raise ValueError("pairs must be two nonempty arrays of equal shape")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self):
        return self.X.shape[0]

    def witness(self, i: int) -> dict:
        return {"index": int(i), "x": self.X[i].tolist(), "y": self.Y[i].tolist()}


def sample_pairs(B, n_pairs: int = 10_000, seed: int = 0, axis_pairs: bool = True) -> PairData:
    """Seeded random pairs of distinct points of B, plus axis-aligned pairs
    through the center of B's bounding box at full and half extent."""
    B = as_point_set(B)
    rng = np.random.default_rng(seed)
    X, Y = [], []
    if len(B) > 1:
        i = rng.integers(0, len(B), n_pairs)
        j = rng.integers(0, len(B) - 1, n_pairs)
        j = j + (j >= i)
        keep = np.any(B.points[i] != B.points[j], axis=1)
        X.append(B.points[i[keep]])
        Y.append(B.points[j[keep]])
    if axis_pairs:
        lo, hi = B.points.min(axis=0), B.points.max(axis=0)
        mid = 0.5 * (lo + hi)
        for axis in range(B.dim):
            for frac in (1.0, 0.5):
                if hi[axis] > lo[axis]:
                    a, b = mid.copy(), mid.copy()
                    a[axis] = mid[axis] - frac * (mid[axis] - lo[axis])
                    b[axis] = mid[axis] + frac * (hi[axis] - mid[axis])
                    X.append(a[None])
                    Y.append(b[None])
    if not X:
        raise ValueError("cannot form pairs from a single point")
    return PairData(np.concatenate(X), np.concatenate(Y))


def _deltas(sys: SystemSpec, pairs: PairData, T):
    d = row_norms(pairs.X - pairs.Y, sys.metric)
    if np.any(d == 0):
        raise ValueError("pairs must consist of distinct points")
    SX = step(sys, FinitePointSet(pairs.X, sys.metric), T).points
    SY = step(sys, FinitePointSet(pairs.Y, sys.metric), T).points
    return d, SX, SY


def _proj(P) -> np.ndarray:
    return np.atleast_2d(np.asarray(P, dtype=np.float64))


# ----------------------------------------------------------- certificates


@dataclass(frozen=True)
class QuasiStabilityCert:
    """d(Sx,Sy) <= eta d(x,y) + n_Z(Kx - Ky) and ||Kx - Ky||_Z <= kappa d(x,y)."""

    eta: float
    kappa: float
    K: PseudometricSpec
    T: float
    n_pairs: int
    margin: float
    witness: dict = field(default_factory=dict)
    kind: str = "quasi-stability"

    def violations(self, sys: SystemSpec, pairs: PairData) -> int:
        d, SX, SY = _deltas(sys, pairs, self.T)
        dK = self.K.pair_distance(pairs.X, pairs.Y)
        dS = row_norms(SX - SY, sys.metric)
        bad = (dS > (self.eta * d + dK) * (1 + RTOL)) | (dK > self.kappa * d * (1 + RTOL))
        return int(bad.sum())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "eta": self.eta, "kappa": self.kappa, "T": self.T, "n_pairs": self.n_pairs,
                "margin": self.margin, "seminorm": self.K.norm, "witness": self.witness,
                "note": "compactness of the seminorm cannot be distinguished on finite samples"}


@dataclass(frozen=True)
class SqueezingCert:
    """Squeezing through P: alternative form (either ||dS|| <= mu ||P dS|| or
    ||dS|| <= eta ||d||), or the generalized sum form ||dS|| <= eta ||d|| + mu ||P dS||;
    in both cases ||P dS|| <= kappa ||d||."""

    n: int
    eta: float
    mu: float
    kappa: float
    P: np.ndarray
    generalized: bool
    T: float
    n_pairs: int = 0
    witness: dict = field(default_factory=dict)
    system: SystemSpec | None = field(default=None, compare=False, repr=False)
    kind: str = "squeezing"

    def violations(self, sys: SystemSpec, pairs: PairData) -> int:
        d, SX, SY = _deltas(sys, pairs, self.T)
        dS = SX - SY
        nS = row_norms(dS, sys.metric)
        nP = row_norms(matvec(self.P, dS), sys.metric)
        kappa_ok = nP <= self.kappa * d * (1 + RTOL)
        if self.generalized:
            main_ok = nS <= (self.eta * d + self.mu * nP) * (1 + RTOL)
        else:
            main_ok = (nS <= self.mu * nP * (1 + RTOL)) | (nS <= self.eta * d * (1 + RTOL))
        return int((~(kappa_ok & main_ok)).sum())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "eta": self.eta, "mu": self.mu, "kappa": self.kappa,
                "P": self.P.tolist(), "generalized": self.generalized, "T": self.T, "n_pairs": self.n_pairs,
                "witness": self.witness}


@dataclass(frozen=True)
class LadyzhenskayaCert:
    """||(I-P) dS|| <= eta ||d|| and ||P dS|| <= kappa ||d|| for a projection P of rank n."""

    n: int
    eta: float
    kappa: float
    P: np.ndarray
    hilbert: bool
    T: float
    n_pairs: int = 0
    witness: dict = field(default_factory=dict)
    system: SystemSpec | None = field(default=None, compare=False, repr=False)
    kind: str = "ladyzhenskaya"

    def violations(self, sys: SystemSpec, pairs: PairData) -> int:
        d, SX, SY = _deltas(sys, pairs, self.T)
        dS = SX - SY
        pdS = matvec(self.P, dS)
        ok = (row_norms(dS - pdS, sys.metric) <= self.eta * d * (1 + RTOL)) & (
            row_norms(pdS, sys.metric) <= self.kappa * d * (1 + RTOL)
        )
        return int((~ok).sum())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "eta": self.eta, "kappa": self.kappa, "P": self.P.tolist(),
                "hilbert": self.hilbert, "T": self.T, "n_pairs": self.n_pairs, "witness": self.witness}


@dataclass(frozen=True)
class SmoothingCert:
    """S(T) = C + M with ||Cx - Cy|| <= eta d(x,y) and ||Mx - My||_Z <= kappa d(x,y)."""

    variant: str
    eta: float
    kappa: float
    C: Callable[[np.ndarray], np.ndarray]
    M: Callable[[np.ndarray], np.ndarray]
    z_norm: str
    T: float
    z_coords: tuple[int, ...] | None = None
    kind: str = "smoothing"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "variant": self.variant, "eta": self.eta, "kappa": self.kappa,
                "z_norm": self.z_norm, "T": self.T,
                "z_coords": None if self.z_coords is None else list(self.z_coords)}


@dataclass(frozen=True)
class C1Cert:
    lam: float
    n: int
    M: float
    jacobian_source: str
    split_ranks: tuple[int, ...]
    remainders: tuple[float, ...]
    samples: int
    kind: str = "c1"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, "n": self.n, "M": self.M,
                "jacobian_source": self.jacobian_source, "samples": self.samples,
                "witness": {"max_split_rank": max(self.split_ranks), "max_remainder_norm": max(self.remainders)}}


@dataclass(frozen=True)
class HolderCert:
    zeta: float
    nu: float
    interval: tuple[float, float]
    r_squared: float
    kind: str = "holder"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "zeta": self.zeta, "nu": self.nu, "interval": list(self.interval),
                "r_squared": self.r_squared}


# ------------------------------------------------------------- estimators


def estimate_quasi_stability(sys: SystemSpec, pairs: PairData, T, seminorm: str, Kmap) -> QuasiStabilityCert:
    """kappa = max ||dK||/d, eta = max (||dS|| - n_Z(dK))^+ / d over the pairs.

    ``Kmap`` is a vectorised callable or a PseudometricSpec; ``seminorm`` is the
    norm tag used on its values.
    """
    K = Kmap if isinstance(Kmap, PseudometricSpec) else PseudometricSpec.from_map(Kmap, norm=seminorm)
    d, SX, SY = _deltas(sys, pairs, T)
    dK = K.pair_distance(pairs.X, pairs.Y)
    dS = row_norms(SX - SY, sys.metric)
    kappa = float(np.max(dK / d))
    ratio = np.maximum(dS - dK, 0.0) / d
    worst = int(np.argmax(ratio))
    eta = float(ratio[worst])
    if eta >= 1:
        raise CertificationError("not quasi-stable on supplied data", pairs.witness(worst))
    margin = float(np.min(eta * d + dK - dS))
    return QuasiStabilityCert(eta, kappa, K, float(T), len(pairs), margin, pairs.witness(worst))


def _squeeze_terms(sys, pairs, T, P):
    d, SX, SY = _deltas(sys, pairs, T)
    dS = SX - SY
    nS = row_norms(dS, sys.metric)
    nP = row_norms(matvec(P, dS), sys.metric)
    return d, nS, nP


def certify_squeezing(sys: SystemSpec, pairs: PairData, T, P, mu: float) -> SqueezingCert:
    """Alternative form: pairs with ||dS|| > mu ||P dS|| must contract by eta < 1."""
    P = _proj(P)
    d, nS, nP = _squeeze_terms(sys, pairs, T, P)
    contracting = nS > mu * nP
    ratio = np.where(contracting, nS / d, 0.0)
    worst = int(np.argmax(ratio))
    eta = float(ratio[worst])
    if eta >= 1:
        raise CertificationError("squeezing fails: contraction branch with eta >= 1", pairs.witness(worst))
    kappa = float(np.max(nP / d))
    return SqueezingCert(_rank(P), eta, float(mu), kappa, P, False, float(T), len(pairs), pairs.witness(worst), sys)


def certify_generalized_squeezing(sys: SystemSpec, pairs: PairData, T, P, mu: float) -> SqueezingCert:
    """Sum form: eta = max (||dS|| - mu ||P dS||)^+ / ||d||."""
    P = _proj(P)
    d, nS, nP = _squeeze_terms(sys, pairs, T, P)
    ratio = np.maximum(nS - mu * nP, 0.0) / d
    worst = int(np.argmax(ratio))
    eta = float(ratio[worst])
    if eta >= 1:
        raise CertificationError("generalized squeezing fails: eta >= 1", pairs.witness(worst))
    kappa = float(np.max(nP / d))
    return SqueezingCert(_rank(P), eta, float(mu), kappa, P, True, float(T), len(pairs), pairs.witness(worst), sys)


def _rank(P: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(P)) if np.any(P) else 0


def certify_ladyzhenskaya(sys: SystemSpec, pairs: PairData, T, P) -> LadyzhenskayaCert:
    P = _proj(P)
    if P.shape != (sys.phase_dim, sys.phase_dim) or not np.allclose(P @ P, P, atol=1e-10):
        raise ValueError("P must be a square projection (P @ P == P) on the phase space")
    d, SX, SY = _deltas(sys, pairs, T)
    dS = SX - SY
    pdS = matvec(P, dS)
    ratio = row_norms(dS - pdS, sys.metric) / d
    worst = int(np.argmax(ratio))
    eta = float(ratio[worst])
    if eta >= 1:
        raise CertificationError("not of Ladyzhenskaya type: eta >= 1", pairs.witness(worst))
    kappa = float(np.max(row_norms(pdS, sys.metric) / d))
    hilbert = sys.metric == "euclidean" and np.allclose(P, P.T, atol=1e-12)
    return LadyzhenskayaCert(_rank(P), eta, kappa, P, bool(hilbert), float(T), len(pairs), pairs.witness(worst), sys)


def estimate_smoothing(sys: SystemSpec, pairs: PairData, T, C, M, z_norm: str = "euclidean",
                       z_coords: Sequence[int] | None = None) -> SmoothingCert:
    """Envelope fit of S(T) = C + M; checks the split on every pair first."""
    d, SX, SY = _deltas(sys, pairs, T)
    CX, CY, MX, MY = C(pairs.X), C(pairs.Y), M(pairs.X), M(pairs.Y)
    if not (np.allclose(CX + MX, SX, rtol=1e-12, atol=1e-14) and np.allclose(CY + MY, SY, rtol=1e-12, atol=1e-14)):
        raise ValueError("C + M does not reproduce S(T) on the pairs")
    eta = float(np.max(row_norms(CX - CY, sys.metric) / d))
    dM = MX - MY
    if z_coords is not None:
        dM = dM[:, list(z_coords)]
    kappa = float(np.max(row_norms(dM, "euclidean" if z_norm == "euclidean" else z_norm) / d))
    return SmoothingCert("range-in-Z", eta, kappa, C, M, z_norm, float(T),
                         None if z_coords is None else tuple(z_coords))


# ------------------------------------------------------------ implications


def derive_quasi_from_squeezing(c: SqueezingCert) -> QuasiStabilityCert:
    """(n, eta, mu, kappa) -> (eta, kappa mu) with K = mu P S(T)."""
    if c.system is None:
        raise ValueError("certificate carries no system; cannot form K = mu P S(T)")
    sys, P, mu, T = c.system, c.P, c.mu, c.T

    def K(X):
        return mu * matvec(P, step(sys, FinitePointSet(X, sys.metric), T).points)

    spec = PseudometricSpec.from_map(K, norm=sys.metric)
    return QuasiStabilityCert(c.eta, c.kappa * c.mu, spec, T, c.n_pairs, 0.0, dict(c.witness))


def derive_squeezing_from_ladyzhenskaya(c: LadyzhenskayaCert) -> SqueezingCert:
    """(n, eta, kappa) -> generalized squeezing (n, eta, 1, kappa)."""
    return SqueezingCert(c.n, c.eta, 1.0, c.kappa, c.P, True, c.T, c.n_pairs, dict(c.witness), c.system)


def derive_smoothing_from_ladyzhenskaya(c: LadyzhenskayaCert) -> SmoothingCert:
    """C = (I - P) S(T), M = P S(T) with Z the range of P."""
    if c.system is None:
        raise ValueError("certificate carries no system")
    sys, P, T = c.system, c.P, c.T

    def M(X):
        return matvec(P, step(sys, FinitePointSet(X, sys.metric), T).points)

    def C(X):
        SX = step(sys, FinitePointSet(X, sys.metric), T).points
        return SX - matvec(P, SX)

    return SmoothingCert("range-in-Z", c.eta, c.kappa, C, M, sys.metric, T)


def derive_ladyzhenskaya_from_smoothing_hilbert(sm: SmoothingCert, eps: float, z_coords: Sequence[int],
                                                phase_dim: int, c_zx: float = 1.0,
                                                system: SystemSpec | None = None) -> LadyzhenskayaCert:
    """Project orthogonally onto the span of an eps-net of the Z unit ball.

    Z is the coordinate subspace ``z_coords`` of R^phase_dim with the euclidean
    norm, and ``c_zx`` bounds ||z||_X <= c_zx ||z||_Z.  The result has
    parameters (n, eta + eps kappa, eta + c_zx kappa) with n the span's dimension.
    """
    eta, kappa = sm.eta, sm.kappa
    if eta + eps * kappa >= 1:
        raise ValueError("ε too large: eta + eps kappa >= 1")
    net = unit_ball_net(len(z_coords), eps, z_coords, phase_dim)
    u, s, _ = np.linalg.svd(net.T, full_matrices=False)
    rank = int(np.sum(s > s.max() * 1e-12)) if s.size and s.max() > 0 else 0
    basis = u[:, :rank]
    P = basis @ basis.T
    return LadyzhenskayaCert(rank, eta + eps * kappa, eta + c_zx * kappa, P, True, sm.T, 0, {}, system)


# -------------------------------------------------------------------- C1


def certify_c1(sys: SystemSpec, B_sample, T, lam: float, source: str = "auto") -> C1Cert:
    """Singular-value certificate for D_y S(T) = K_y + C_y.

    nu(y) = min{m : s_{m+1} < 2 lam} (projection onto the top-m right singular
    vectors as witness); the split rank is min{m : s_{m+1} < lam}, which must be
    below the phase dimension.
    """
    if not 0 < lam < 0.25:
        raise ValueError("lambda must lie in (0, 1/4)")
    B = as_point_set(B_sample, sys.metric)
    nus, splits, rems, tops = [], [], [], []
    used = set()
    for y in B.points:
        if source == "finite-difference":
            J, src = finite_difference_jacobian(sys, y, T), "finite-difference"
        else:
            J, src = jacobian(sys, y, T)
        used.add(src)
        s = np.concatenate([np.linalg.svd(J, compute_uv=False), [0.0]])
        nus.append(int(np.argmax(s < 2 * lam)))
        split = int(np.argmax(s < lam))
        if split >= sys.phase_dim and s[sys.phase_dim - 1] >= lam:
            raise CertificationError("no compact+small split below λ", {"y": y.tolist(), "singular_values": s.tolist()})
        splits.append(split)
        rems.append(float(s[split]))
        tops.append(float(s[0]))
    return C1Cert(float(lam), max(nus), max(tops), "+".join(sorted(used)), tuple(splits), tuple(rems), len(B))


def jacobian_relative_error(sys: SystemSpec, points, T=1) -> float:
    """max entrywise |J_fd - J_analytic| / max |J_analytic| over the points."""
    worst = 0.0
    for y in np.atleast_2d(points):
        Ja, src = jacobian(sys, y, T)
        if src != "analytic":
            raise ValueError("system has no analytic Jacobian")
        Jf = finite_difference_jacobian(sys, y, T)
        scale = max(float(np.max(np.abs(Ja))), 1e-300)
        worst = max(worst, float(np.max(np.abs(Jf - Ja))) / scale)
    return worst


# ----------------------------------------------------------------- Holder


def estimate_holder(sys: SystemSpec, B_sample, time_grid: Sequence[float]) -> HolderCert:
    """Envelope fit of d(S(t1)x, S(t2)x) <= zeta |t1 - t2|^nu over a time grid."""
    times = sorted(float(t) for t in time_grid)
    if len(times) < 2:
        raise ValueError("need at least two grid times")
    B = as_point_set(B_sample, sys.metric)
    frames = flow_sample(sys, B.points, times)
    by_gap: dict[float, float] = {}
    for i in range(len(times)):
        for j in range(i + 1, len(times)):
            gap = float(f"{times[j] - times[i]:.12g}")
            disp = float(np.max(row_norms(frames[j] - frames[i], sys.metric)))
            by_gap[gap] = max(by_gap.get(gap, 0.0), disp)
    interval = (times[0], times[-1])
    gaps = np.array(sorted(by_gap))
    disp = np.array([by_gap[g] for g in gaps])
    live = disp > 0
    if not live.any():
        return HolderCert(0.0, 1.0, interval, 0.0)
    if live.sum() == 1:
        nu, r2 = 1.0, 0.0
    else:
        x, y = np.log(gaps[live]), np.log(disp[live])
        nu, c = np.polyfit(x, y, 1)
        ss = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum((y - (nu * x + c)) ** 2)) / ss if ss > 0 else 1.0
        if nu <= 0:
            raise CertificationError("displacements do not shrink with the time gap")
    zeta = float(np.max(disp / gaps**nu)) * (1 + 1e-12)
    return HolderCert(zeta, float(nu), interval, float(max(0.0, r2)))


def holder_holds(sys: SystemSpec, cert: HolderCert, points, times: Sequence[float]) -> float:
    """Fraction of (x, t1, t2) triples satisfying the Holder inequality."""
    frames = flow_sample(sys, np.atleast_2d(points), sorted(times))
    ts = sorted(times)
    ok = total = 0
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            disp = row_norms(frames[j] - frames[i], sys.metric)
            ok += int(np.sum(disp <= cert.zeta * (ts[j] - ts[i]) ** cert.nu * (1 + 1e-9)))
            total += disp.size
    return ok / total if total else 1.0


# ------------------------------------------------------------------ bounds


def _positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive")


def _eta_ok(eta):
    if not 0 <= eta < 1:
        raise ValueError("eta must lie in [0, 1)")


def mz_volume(n: int, field: str = "real", r: float = 1.0) -> Callable[[float], float]:
    """m_Z upper bound (1 + 2r/eps)^N for a ball in an n-dimensional space."""
    N = real_dimension(n, field)
    return lambda eps: volume_upper_bound(r, eps, N)


def mz_packing(pair: NormPair, budget: int = 20_000, seed: int = 0) -> Callable[[float], float]:
    """m_Z lower bound from the packing search (cached per eps)."""
    cache: dict[float, float] = {}

    def f(eps):
        if eps not in cache:
            cache[eps] = float(unit_ball_packing(pair, eps, budget, seed).count)
        return cache[eps]

    return f


def bound_quasi(eta: float, kappa: float, sigma: float, mz: Callable[[float], float]) -> float:
    """log_{1/(eta+sigma)} m_Z(sigma / 2 kappa), sigma in (0, 1 - eta)."""
    _eta_ok(eta)
    _positive(kappa=kappa)
    if not 0 < sigma < 1 - eta:
        return math.inf
    return math.log(mz(sigma / (2 * kappa))) / math.log(1.0 / (eta + sigma))


def bound_squeezing(n: int, eta: float, mu: float, kappa: float, sigma: float, d_bm: float = 1.0,
                    field: str = "real") -> float:
    """N log_{1/(eta+sigma)} (1 + 2 kappa mu d_BM / sigma)."""
    _eta_ok(eta)
    _positive(n=n, mu=mu, kappa=kappa, d_bm=d_bm)
    if not 0 < sigma < 1 - eta:
        return math.inf
    N = real_dimension(n, field)
    return N * math.log(1 + 2 * kappa * mu * d_bm / sigma) / math.log(1.0 / (eta + sigma))


def bound_squeezing_volume(n: int, eta: float, mu: float, kappa: float, sigma: float, d_bm: float = 1.0,
                           field: str = "real") -> float:
    """The coarser volume-comparison form with 4 kappa mu d_BM / sigma."""
    _eta_ok(eta)
    _positive(n=n, mu=mu, kappa=kappa, d_bm=d_bm)
    if not 0 < sigma < 1 - eta:
        return math.inf
    N = real_dimension(n, field)
    return N * math.log(1 + 4 * kappa * mu * d_bm / sigma) / math.log(1.0 / (eta + sigma))


def bound_ladyzhenskaya_hilbert(n: int, eta: float, kappa: float, sigma: float, field: str = "real") -> float:
    """N log_{1/sqrt(sigma^2 + eta^2)} (1 + 2 kappa / sigma), sigma in (0, sqrt(1 - eta^2))."""
    _eta_ok(eta)
    _positive(n=n, kappa=kappa)
    if not 0 < sigma < math.sqrt(1 - eta * eta):
        return math.inf
    N = real_dimension(n, field)
    return N * math.log(1 + 2 * kappa / sigma) / math.log(1.0 / math.hypot(sigma, eta))


def bound_c1(n: int, M: float, lam: float, sigma: float, field: str = "real") -> float:
    """log_{1/(sigma + 4 lam)} (1 + 8 sqrt(n) M / sigma)^N, sigma in (0, 1 - 4 lam)."""
    if n < 0 or M < 0:
        raise ValueError("n and M must be nonnegative")
    if not 0 < lam < 0.25:
        raise ValueError("lambda must lie in (0, 1/4)")
    if not 0 < sigma < 1 - 4 * lam:
        return math.inf
    N = real_dimension(n, field)
    return N * math.log(1 + 8 * math.sqrt(n) * M / sigma) / math.log(1.0 / (sigma + 4 * lam))


def bound_holder(q: float, h: float, nu: float) -> float:
    """1/nu + log_{1/q} h."""
    _positive(nu=nu)
    if not 0 < q < 1 or h < 1:
        raise ValueError("need q in (0, 1) and h >= 1")
    return 1.0 / nu + math.log(h) / math.log(1.0 / q)


# ------------------------------------------------------------ sigma search

BOUNDS = {
    "quasi": (bound_quasi, lambda p: 1 - p["eta"]),
    "squeezing": (bound_squeezing, lambda p: 1 - p["eta"]),
    "squeezing_volume": (bound_squeezing_volume, lambda p: 1 - p["eta"]),
    "ladyzhenskaya_hilbert": (bound_ladyzhenskaya_hilbert, lambda p: math.sqrt(max(0.0, 1 - p["eta"] ** 2))),
    "c1": (bound_c1, lambda p: 1 - 4 * p["lam"]),
}


def optimize_sigma(bound_id: str, params: dict, grid_size: int = 64) -> tuple[float, float]:
    """Minimise a bound over its admissible sigma interval.

    A log-spaced scan locates the best grid point; golden-section search then
    refines inside the bracket formed by its neighbours.
    """
    if grid_size < 8:
        raise ValueError("grid_size must be >= 8")
    if bound_id not in BOUNDS:
        raise KeyError(f"unknown bound {bound_id!r}")
    fn, upper = BOUNDS[bound_id]
    hi = upper(params)
    if not hi > 0:
        raise ValueError("empty admissible sigma interval")

    def f(sigma):
        return fn(sigma=float(sigma), **params)

    grid = np.geomspace(hi * 1e-6, hi * (1 - 1e-9), grid_size)
    vals = np.array([f(s) for s in grid])
    i = int(np.argmin(vals))
    best_s, best_v = float(grid[i]), float(vals[i])
    if 0 < i < grid_size - 1 and vals[i] < vals[i - 1] and vals[i] < vals[i + 1]:
        res = optimize.minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                                       options={"xtol": 1e-10})
        if res.fun <= best_v and 0 < res.x < hi:
            best_s, best_v = float(res.x), float(res.fun)
    return best_s, best_v
