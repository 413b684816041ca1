"""Benchmark catalog of semigroups.

Every entry builds a SystemSpec from a parameter record and carries a few
documented truths (claim plus how it is known) together with default pipeline
settings used by the CLI and the acceptance suite. Asymptotic closedness of
the semigroup (limits of S(t_k) x_k along convergent sequences stay on the
graph) cannot be checked from finite samples; every entry assumes it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .metric import matvec
from .semigroup import SystemSpec


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    description: str
    defaults: dict[str, Any]
    build: Callable[[dict], SystemSpec]
    documented_truths: tuple[tuple[str, str], ...] = ()
    benchmark: dict[str, Any] = field(default_factory=dict)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "description": self.description,
            "parameters": self.defaults,
            "documented_truths": [{"claim": c, "provenance": p} for c, p in self.documented_truths],
            "benchmark": self.benchmark,
            "assumptions": ["asymptotically closed (not checkable from finite samples)"],
        }


def _vec(value, dim=None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if dim is not None and arr.size == 1 and dim > 1:
        arr = np.full(dim, float(arr[0]))
    return arr


# ------------------------------------------------------------ builders


def _affine_contraction(p: dict) -> SystemSpec:
    c = _vec(p["c"], p.get("dim"))
    eta = float(p["eta"])
    dim = c.size

    def rhs(X):
        return eta * X + c

    def jac(x):
        return eta * np.eye(dim)

    return SystemSpec("affine_contraction", dim, "discrete-map", rhs, jacobian=jac, params=dict(p))


def _diag_linear(p: dict) -> SystemSpec:
    d = _vec(p["diag"])

    def rhs(X):
        return X * d

    def jac(x):
        return np.diag(d)

    return SystemSpec("diag_linear", d.size, "discrete-map", rhs, jacobian=jac, params=dict(p))


def _linear_map(p: dict) -> SystemSpec:
    A = np.atleast_2d(np.asarray(p["matrix"], dtype=np.float64))
    if A.shape[0] != A.shape[1]:
        raise ValueError("linear_map needs a square matrix")

    def rhs(X):
        return matvec(A, X)

    def jac(x):
        return A.copy()

    return SystemSpec("linear_map", A.shape[0], "discrete-map", rhs, jacobian=jac, params=dict(p))


def _rotation(p: dict) -> SystemSpec:
    th = float(p["angle"])
    c, s = math.cos(th), math.sin(th)
    A = np.array([[c, -s], [s, c]])

    def rhs(X):
        return matvec(A, X)

    def jac(x):
        return A.copy()

    return SystemSpec("rotation", 2, "discrete-map", rhs, jacobian=jac, params=dict(p))


def _henon(p: dict) -> SystemSpec:
    a, b = float(p["a"]), float(p["b"])

    def rhs(X):
        x, y = X[:, 0], X[:, 1]
        return np.stack([1.0 - a * x * x + y, b * x], axis=1)

    def jac(z):
        return np.array([[-2.0 * a * z[0], 1.0], [b, 0.0]])

    return SystemSpec("henon", 2, "discrete-map", rhs, jacobian=jac, params=dict(p))


def _logistic(p: dict) -> SystemSpec:
    r = float(p["r"])

    def rhs(X):
        return r * X * (1.0 - X)

    def jac(x):
        return np.array([[r * (1.0 - 2.0 * x[0])]])

    return SystemSpec("logistic", 1, "discrete-map", rhs, jacobian=jac, params=dict(p))


def _lorenz(p: dict) -> SystemSpec:
    s, r, b = float(p["sigma"]), float(p["rho"]), float(p["beta"])

    def rhs(X):
        x, y, z = X[:, 0], X[:, 1], X[:, 2]
        return np.stack([s * (y - x), x * (r - z) - y, x * y - b * z], axis=1)

    return SystemSpec("lorenz63_timeT", 3, "ode-flow", rhs, step_size=float(p["step"]), params=dict(p))


def chafee_infante_tensor(n: int) -> tuple[np.ndarray, ...]:
    """Nonzero entries of (2/pi) * int_0^pi sin(ax) sin(bx) sin(cx) sin(jx) dx.

    Returns index arrays a, b, c (0-based), coefficients, and segment starts for
    each output mode j; entries are grouped by j.
    """
    idx = np.arange(1, n + 1)
    A, B, C, J = np.meshgrid(idx, idx, idx, idx, indexing="ij")
    total = np.zeros(A.shape)
    # sin a sin b = (cos(a-b) - cos(a+b))/2, likewise for (c, j); the integral of
    # cos(m x) over [0, pi] is pi when m = 0 and 0 otherwise.
    for p_val, p_sign in ((A - B, 1.0), (A + B, -1.0)):
        for r_val, r_sign in ((C - J, 1.0), (C + J, -1.0)):
            hits = (p_val == r_val).astype(float) + (p_val == -r_val).astype(float)
            total += p_sign * r_sign * hits
    coef = total / 4.0
    order = np.argsort(J.ravel(), kind="stable")
    keep = order[coef.ravel()[order] != 0.0]
    a, b, c, j = (M.ravel()[keep] - 1 for M in (A, B, C, J))
    starts = np.searchsorted(j, np.arange(n))
    return a, b, c, coef.ravel()[keep], starts


def _chafee_infante(p: dict) -> SystemSpec:
    n = int(p["n_modes"])
    if not 1 <= n <= 16:
        raise ValueError("n_modes must be between 1 and 16")
    lam = float(p["lam"])
    a, b, c, coef, starts = chafee_infante_tensor(n)
    linear = lam - np.arange(1, n + 1, dtype=np.float64) ** 2

    def rhs(U):
        terms = U[:, a] * U[:, b] * U[:, c] * coef
        cubic = np.add.reduceat(terms, starts, axis=1)
        return U * linear - cubic

    return SystemSpec(
        "chafee_infante_galerkin", n, "ode-flow", rhs, step_size=float(p["step"]), params=dict(p)
    )


def _smoothing_demo(p: dict) -> SystemSpec:
    eta, kappa, dim = float(p["eta"]), float(p["kappa"]), int(p["dim"])

    def rhs(X):
        out = eta * X
        out[:, 0] = out[:, 0] + kappa * np.tanh(X[:, 0])
        return out

    def jac(x):
        J = eta * np.eye(dim)
        J[0, 0] += kappa / math.cosh(x[0]) ** 2
        return J

    return SystemSpec("smoothing_demo", dim, "discrete-map", rhs, jacobian=jac, params=dict(p))


def _linear_decay(p: dict) -> SystemSpec:
    rate = float(p["rate"])
    dim = int(p["dim"])

    def rhs(X):
        return -rate * X

    return SystemSpec("linear_decay", dim, "ode-flow", rhs, step_size=float(p["step"]), params=dict(p))


GOLDEN_ANGLE = math.pi * (math.sqrt(5.0) - 1.0)

CATALOG: dict[str, CatalogEntry] = {}


def _register(entry: CatalogEntry) -> None:
    CATALOG[entry.name] = entry


_register(CatalogEntry(
    "affine_contraction", "discrete-map", "x -> eta*x + c",
    {"eta": 0.5, "c": 0.0}, _affine_contraction,
    (("unique fixed point c/(1-eta)", "closed form"),
     ("global attractor is the fixed point, dimension 0", "closed form")),
    {"probe_low": -1.0, "probe_high": 1.0, "probe_count": 100, "probe_layout": "grid",
     "horizon": 60, "T": 1, "k0": 1, "k_max": 20, "q_grid": [0.5, 0.6, 0.7, 0.8, 0.9],
     "sample": "probes"},
))
_register(CatalogEntry(
    "diag_linear", "discrete-map", "x -> diag(d) x",
    {"diag": [0.9, 0.3]}, _diag_linear,
    (("Jacobian is the constant diagonal matrix", "closed form"),
     ("attractor is the origin when all |d_i| < 1", "closed form")),
    {"probe_low": -1.0, "probe_high": 1.0, "probe_count": 400, "probe_layout": "grid",
     "horizon": 200, "T": 1, "k0": 1, "k_max": 15, "q_grid": [0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
     "sample": "probes", "projection": [0]},
))
_register(CatalogEntry(
    "linear_map", "discrete-map", "x -> A x for a square matrix A",
    {"matrix": [[0.5, 0.1], [0.0, 0.4]]}, _linear_map,
    (("attractor is the origin when the spectral radius is below 1", "closed form"),),
    {"probe_low": -1.0, "probe_high": 1.0, "probe_count": 100, "probe_layout": "grid",
     "horizon": 100, "T": 1, "k0": 1, "k_max": 12, "q_grid": [0.5, 0.6, 0.7, 0.8, 0.9],
     "sample": "probes", "projection": [0]},
))
_register(CatalogEntry(
    "rotation", "discrete-map", "rotation of the plane by a fixed angle",
    {"angle": GOLDEN_ANGLE}, _rotation,
    (("orbits of the unit circle are dense for irrational angle/2pi", "classical"),
     ("isometry: not dissipative, covering counts do not shrink", "closed form")),
    {"probe_low": 1.0, "probe_high": 1.0, "probe_count": 1, "probe_layout": "unit-x",
     "horizon": 200, "T": 1, "k0": 1, "k_max": 8, "q_grid": [0.8, 0.9, 0.95],
     "sample": "orbit", "per_probe": 400},
))
_register(CatalogEntry(
    "henon", "discrete-map", "(x, y) -> (1 - a x^2 + y, b x)",
    {"a": 1.4, "b": 0.3}, _henon,
    (("attractor box-counting dimension about 1.26", "numerical literature; grid-count oracle"),
     ("Jacobian determinant is -b", "closed form")),
    {"probe_low": -0.5, "probe_high": 0.5, "probe_count": 100, "probe_layout": "random",
     "horizon": 10000, "T": 1, "k0": 1, "k_max": 35,
     "q_grid": [0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95], "sample": "orbit", "per_probe": 20,
     "drop_escaping": True},
))
_register(CatalogEntry(
    "logistic", "discrete-map", "x -> r x (1 - x)",
    {"r": 3.9}, _logistic,
    (("[0, 1] is forward invariant for 0 <= r <= 4", "closed form"),),
    {"probe_low": 0.05, "probe_high": 0.95, "probe_count": 50, "probe_layout": "grid",
     "horizon": 400, "T": 1, "k0": 1, "k_max": 10, "q_grid": [0.6, 0.7, 0.8, 0.9, 0.95],
     "sample": "orbit", "per_probe": 20},
))
_register(CatalogEntry(
    "lorenz63_timeT", "ode-flow", "Lorenz-63 flow sampled at time T with RK4",
    {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0, "T": 0.1, "step": 0.01}, _lorenz,
    (("attractor box-counting dimension about 2.05", "numerical literature; grid-count oracle"),),
    {"probe_low": -10.0, "probe_high": 10.0, "probe_count": 20, "probe_layout": "random",
     "horizon": 400, "T": 0.1, "k0": 1, "k_max": 8, "q_grid": [0.7, 0.8, 0.9, 0.95],
     "sample": "orbit", "per_probe": 40},
))
_register(CatalogEntry(
    "chafee_infante_galerkin", "ode-flow",
    "sine-Galerkin truncation of u_t = u_xx + lam u - u^3 on (0, pi)",
    {"lam": 5.0, "n_modes": 4, "step": 0.01}, _chafee_infante,
    (("origin is unstable iff lam > 1", "linearisation"),
     ("dissipative: the cubic term dominates for large amplitudes", "energy estimate")),
    {"probe_low": -2.0, "probe_high": 2.0, "probe_count": 40, "probe_layout": "random",
     "horizon": 100, "T": 0.5, "k0": 1, "k_max": 8, "q_grid": [0.5, 0.7, 0.8, 0.9, 0.95],
     "sample": "orbit", "per_probe": 10},
))
_register(CatalogEntry(
    "smoothing_demo", "discrete-map", "x -> eta x + kappa tanh(x_0) e_0",
    {"eta": 0.5, "kappa": 0.4, "dim": 2}, _smoothing_demo,
    (("contraction eta plus a rank-one map with Lipschitz constant kappa", "closed form"),
     ("origin is the global attractor when eta + kappa < 1", "closed form")),
    {"probe_low": -1.0, "probe_high": 1.0, "probe_count": 100, "probe_layout": "grid",
     "horizon": 100, "T": 1, "k0": 1, "k_max": 12, "q_grid": [0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
     "sample": "probes", "projection": [0]},
))
_register(CatalogEntry(
    "linear_decay", "ode-flow", "x' = -rate x",
    {"rate": 1.0, "dim": 1, "step": 0.01}, _linear_decay,
    (("S(t) x = exp(-rate t) x", "closed form"),
     ("Lipschitz in time, Hoelder exponent 1", "closed form")),
    {"probe_low": -1.0, "probe_high": 1.0, "probe_count": 50, "probe_layout": "grid",
     "horizon": 40, "T": 1, "k0": 1, "k_max": 12, "q_grid": [0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
     "sample": "probes"},
))


def make_system(name: str, params: dict | None = None, **kwargs) -> SystemSpec:
    """Build a catalog system; unspecified parameters take their defaults."""
    if name not in CATALOG:
        raise KeyError(f"unknown system {name!r}; known: {', '.join(sorted(CATALOG))}")
    entry = CATALOG[name]
    merged = dict(entry.defaults)
    given = dict(params or {})
    given.update(kwargs)
    unknown = set(given) - set(merged)
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    merged.update(given)
    try:
        return entry.build(merged)
    except (TypeError, ValueError) as err:
        raise ValueError(f"invalid parameters for {name}: {err}") from None


def default_time(sys: SystemSpec) -> float:
    if "T" in sys.params:
        return float(sys.params["T"])
    return float(CATALOG[sys.name].benchmark.get("T", 1))


def list_systems() -> list[dict]:
    return [CATALOG[k].describe() for k in sorted(CATALOG)]


def catalog_json() -> str:
    return json.dumps({"schema": "systems/1", "systems": list_systems()}, indent=2, sort_keys=True)
