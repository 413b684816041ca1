"""The ten acceptance criteria, each reported as one PASS/FAIL line."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from attrforge import certifiers as cf
from attrforge.builder import (
    build_E0,
    build_time_interpolated_E,
    check_recursion,
    load_approximation,
    measure_attraction,
)
from attrforge.capacity import NormPair, unit_ball_packing, volume_upper_bound
from attrforge.cli import run
from attrforge.covering import dim_bound, fit_certificate
from attrforge.metric import (
    FinitePointSet,
    box_counting_dimension,
    diameter,
    exact_cover_number,
    greedy_net,
    hausdorff_distance_onesided,
    read_csv,
)
from attrforge.semigroup import iterate, omega_limit_sample
from attrforge.systems import CATALOG, make_system

# grid box-counting slope of a 10^6-point Henon orbit, eps = 2^-3 .. 2^-9,
# computed once with a plain-python iteration independent of this package
HENON_ORBIT_ORACLE = 1.2325


def test_01_contraction_ground_truth(verdict):
    start = time.perf_counter()
    sys = make_system("affine_contraction")
    B = FinitePointSet(np.linspace(-1, 1, 100))
    cert = fit_certificate(sys, B, 1, 1, 20, [0.5, 0.6, 0.7, 0.8, 0.9])
    approx = build_E0(sys, B, cert)
    dist0 = hausdorff_distance_onesided(approx.E0, FinitePointSet(np.zeros((1, 1))))
    xi = measure_attraction(sys, B, approx.E0, 1, 20).xi_hat
    elapsed = time.perf_counter() - start
    ok = (cert.q, cert.h) == (0.5, 1.0) and dim_bound(cert) == 0.0 and dist0 <= 0.5 and xi >= 0.62 and elapsed < 1
    verdict(1, "contraction ground truth", ok,
            f"(q,h)=({cert.q},{cert.h}) dim={dim_bound(cert)} dist(E0,0)={dist0:.3g} xi={xi:.4f} t={elapsed:.2f}s")


def test_02_recursion_invariants(tmp_path, verdict):
    failures = []
    for name in sorted(CATALOG):
        out = tmp_path / name
        assert run(["cover", "--system", name, "--out", str(out)]) == 0, name
        assert run(["build", "--out", str(out)]) == 0, name
        sys = make_system(name, json.loads((out / "absorb.json").read_text())["params"])
        B = read_csv(out / "B.csv")
        approx = load_approximation(out / "build")
        try:
            check_recursion(sys, approx)
        except AssertionError as err:
            failures.append(f"{name}: {err}")
        imgs = iterate(sys, B, approx.T, approx.k_max)
        for k in range(approx.k0, approx.k_max + 1):
            d = hausdorff_distance_onesided(imgs[k], approx.E0)
            if not d <= approx.cert.radius(k):
                failures.append(f"{name}: k={k} dist {d} > {approx.cert.radius(k)}")
    verdict(2, "recursion invariants", not failures,
            f"{len(CATALOG)} systems checked" + ("" if not failures else f"; {failures[:3]}"))


def test_03_packing_covering_duality(verdict):
    rng = np.random.default_rng(2024)
    bad, exact_cases, exact_time = 0, 0, 0.0
    for _ in range(200):
        dim = int(rng.integers(1, 5))
        n = int(rng.integers(2, 41))
        G = FinitePointSet(rng.uniform(-1, 1, (n, dim)))
        eps = float(rng.uniform(0.05, 1.0))
        g1, g2 = greedy_net(G, eps).count, greedy_net(G, 2 * eps).count
        bad += g2 > g1
        if n <= 12:
            t = time.perf_counter()
            bad += exact_cover_number(G, eps) > g1
            exact_time += time.perf_counter() - t
            exact_cases += 1
    verdict(3, "packing/covering duality", bad == 0 and exact_time < 30 and exact_cases > 0,
            f"200 clouds, {exact_cases} exhaustive oracles in {exact_time:.2f}s, {bad} violations")


def test_04_implication_chain(verdict):
    sys = make_system("diag_linear", diag=[0.9, 0.3])
    B = FinitePointSet(np.random.default_rng(0).uniform(-1, 1, (400, 2)))
    pairs = cf.sample_pairs(B, 10_000, seed=0)
    lady = cf.certify_ladyzhenskaya(sys, pairs, 1, np.diag([1.0, 0.0]))
    sq = cf.derive_squeezing_from_ladyzhenskaya(lady)
    quasi = cf.derive_quasi_from_squeezing(sq)
    bad = (lady.violations(sys, pairs), sq.violations(sys, pairs), quasi.violations(sys, pairs))
    ok = (abs(lady.eta - 0.3) < 1e-12 and abs(lady.kappa - 0.9) < 1e-12 and sq.mu == 1.0 and bad == (0, 0, 0))
    verdict(4, "implication chain", ok,
            f"Lady(eta={lady.eta:.6f}, kappa={lady.kappa:.6f}) -> squeezing(mu=1) -> quasi; "
            f"violations on {len(pairs)} pairs: {bad}")


def test_05_bound_hierarchy(verdict):
    worst = -math.inf
    order_ok = True
    for eta in np.linspace(0.01, 0.95, 20):
        for sigma in np.linspace(1e-3, 1 - eta - 1e-3, 20):
            lady = cf.bound_ladyzhenskaya_hilbert(1, eta, 0.9, sigma)
            sq = cf.bound_squeezing(1, eta, 1.0, 0.9, sigma, 1.0)
            vol = cf.bound_squeezing_volume(1, eta, 1.0, 0.9, sigma, 1.0)
            worst = max(worst, lady - sq)
            order_ok &= lady <= sq <= vol
    lady_spot = cf.bound_ladyzhenskaya_hilbert(1, 0.3, 0.9, 0.5)
    sq_spot = cf.bound_squeezing(1, 0.3, 1.0, 0.9, 0.5)
    # closed-form oracles evaluated directly
    lady_ref = math.log(4.6) / math.log(1 / math.sqrt(0.34))
    sq_ref = math.log(4.6) / math.log(1.25)
    spots = round(lady_spot, 3) == round(lady_ref, 3) == 2.829 and round(sq_spot, 3) == round(sq_ref, 3)
    verdict(5, "bound hierarchy", order_ok and spots,
            f"max(lady - squeezing) on 20x20 grid = {worst:.3g}; spots {lady_spot:.3f} vs {sq_spot:.3f}")


def test_06_capacity_sanity(verdict):
    res = unit_ball_packing(NormPair(2, "l2", "l2"), 1.0)
    cap = volume_upper_bound(1, 1, 2)
    ok = res.count == 7 and res.count <= cap == 9 and volume_upper_bound(1, 0.5, 2) == 25
    verdict(6, "capacity sanity", ok,
            f"packing={res.count} <= volume bound {cap:g}; (1+2/0.5)^2={volume_upper_bound(1, 0.5, 2):g}")


def test_07_henon_end_to_end(tmp_path, verdict):
    start = time.perf_counter()
    out = tmp_path / "henon"
    rc = run(["cover", "--system", "henon", "--out", str(out)])
    absorb = json.loads((out / "absorb.json").read_text())
    cert = json.loads((out / "cover.json").read_text())["certificate"]
    sys = make_system("henon")
    starts = np.array([[0.1, 0.1]]) + np.arange(10)[:, None] * 0.01
    omega = omega_limit_sample(sys, starts, 1000, 10_000)
    slope = box_counting_dimension(omega, [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625]).slope
    elapsed = time.perf_counter() - start
    ok = (rc == 0 and absorb["estimate"]["radius"] > 0 and math.isfinite(cert["dim_bound"])
          and abs(slope - 1.26) <= 0.1 and abs(HENON_ORBIT_ORACLE - 1.26) <= 0.1
          and slope <= cert["dim_bound"] + 0.3 and elapsed < 120)
    verdict(7, "Henon end-to-end", ok,
            f"ball r={absorb['estimate']['radius']:.4g}; omega slope {slope:.4f} (oracle {HENON_ORBIT_ORACLE}); "
            f"dim_bound {cert['dim_bound']:.4f}; t={elapsed:.1f}s")


def test_08_c1_certifier(verdict):
    sys = make_system("diag_linear", diag=[0.9, 0.05])
    B = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    cert = cf.certify_c1(sys, B, 1, 0.1)
    sigma, bound = cf.optimize_sigma("c1", {"n": 1, "M": 0.9, "lam": 0.1}, 64)
    err_diag = cf.jacobian_relative_error(sys, B[:10])
    err_henon = cf.jacobian_relative_error(make_system("henon"), B[:10] * 0.5, 2)
    ok = (cert.n == 1 and cert.M == 0.9 and math.isfinite(bound) and 0 < sigma < 0.6
          and max(err_diag, err_henon) < 1e-5)
    verdict(8, "C1 certifier", ok,
            f"nu={cert.n} M={cert.M} sigma*={sigma:.4f} bound*={bound:.4f}; "
            f"FD rel err {max(err_diag, err_henon):.2e}")


def test_09_holder_composite(verdict):
    sys = make_system("linear_decay")
    B = FinitePointSet(np.linspace(-1, 1, 50))
    hol = cf.estimate_holder(sys, np.linspace(0, 1, 11)[:, None], np.linspace(0, 0.2, 11))
    cert = fit_certificate(sys, B, 1, 1, 12, [0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    approx = build_E0(sys, B, cert)
    E = build_time_interpolated_E(sys, approx.E0, 1.0, 1, np.linspace(1, 2, 21))
    d = diameter(E)
    slope = box_counting_dimension(E, [d * 2.0**-j for j in range(3, 9)]).slope
    limit = 1 / hol.nu + dim_bound(cert) + 0.3
    ok = 0.9 <= hol.nu <= 1.1 and slope <= limit
    verdict(9, "Holder composite", ok, f"nu={hol.nu:.4f}; slope(E)={slope:.4f} <= {limit:.4f}")


PIPELINES = {
    "chafee_infante_galerkin": [
        ["cover", "--probe-count", "16", "--kmax", "5", "--per-probe", "5", "--horizon", "40"],
        ["build"], ["certify"], ["bounds", "--optimize-sigma"], ["report"],
    ],
    "diag_linear": [["absorb"], ["cover"], ["build"], ["certify"], ["bounds", "--optimize-sigma"], ["report"]],
    "henon": [["dim", "--burn-in", "200", "--keep", "500"]],
    "lorenz63_timeT": [["cover", "--kmax", "4"], ["build"]],
}


def _artifacts(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_10_reproducibility(tmp_path, verdict):
    results, outputs = [], {}
    for threads in ("1", "4"):
        root = tmp_path / f"t{threads}"
        for name, stages in PIPELINES.items():
            for argv in stages:
                extra = ["--run", str(root / name)] if argv[0] == "report" else []
                rc = run(argv + ["--system", name, "--out", str(root / name), "--threads", threads,
                                 "--verify-repro"] + extra)
                results.append(rc)
        rc = run(["capacity", "--n", "2", "--eps", "1,0.5", "--budget", "5000", "--out", str(root / "cap"),
                  "--threads", threads, "--verify-repro"])
        results.append(rc)
        results.append(run(["systems", "--out", str(root / "sys"), "--threads", threads, "--verify-repro"]))
        outputs[threads] = _artifacts(root)
    same = outputs["1"] == outputs["4"]
    ok = all(r == 0 for r in results) and same and len(outputs["1"]) > 0
    verdict(10, "reproducibility", ok,
            f"{len(results)} stage runs with --verify-repro (exit codes {sorted(set(results))}); "
            f"{len(outputs['1'])} artifacts identical across --threads 1/4: {same}")
