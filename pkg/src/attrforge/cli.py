"""Command-line pipeline: absorb -> cover -> build -> certify -> bounds -> report.

Every stage writes into one run directory.  JSON artifacts are pretty-printed,
key-sorted and carry a ``schema`` tag; CSV files use CRLF line endings.
Flags override the TOML config, and ``ATTRFORGE_SEED`` overrides the config
seed (an explicit ``--seed`` still wins).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import certifiers as cf
from .builder import (
    CertificateMismatch,
    build_E0,
    build_time_interpolated_E,
    measure_attraction,
    save_approximation,
    verify_positive_invariance,
)
from .capacity import NormPair, capacity_rows, rows_to_csv
from .covering import CoveringCertificate, CoveringViolation, check_covering_condition, fit_certificate
from .metric import (
    FinitePointSet,
    box_counting_dimension,
    diameter,
    hausdorff_distance_onesided,
    read_csv,
    write_csv,
)
from .semigroup import (
    BlowUpError,
    absorbed_sample,
    find_absorbing_ball,
    iterate,
    omega_limit_sample,
    set_threads,
    surviving_probes,
)
from .systems import CATALOG, catalog_json, make_system

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_BLOWUP, EXIT_REPRO = 0, 2, 3, 4, 1


class ConfigError(ValueError):
    pass


class MissingStage(ConfigError):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"missing upstream artifact {path}: run the `{stage}` stage first")
        self.stage = stage


class Violation(Exception):
    """A certificate check failed; the report has already been written."""


# ----------------------------------------------------------------- output


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, (set, tuple)):
        return list(v)
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


class Writer:
    """Writes artifacts under a run directory and remembers what it wrote."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def json(self, name: str, schema: str, payload: dict) -> Path:
        p = self.path(name)
        p.write_text(dumps({"schema": f"{schema}/1", **payload}))
        self.written.append(p)
        return p

    def csv(self, name: str, header: Sequence[str], rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            fh.write(buf.getvalue())
        self.written.append(p)
        return p

    def points(self, name: str, G) -> Path:
        p = self.path(name)
        write_csv(G, p)
        self.written.append(p)
        return p

    def tree(self, name: str) -> None:
        """Register every file under a directory written by a library routine."""
        self.written.extend(sorted(p for p in (self.root / name).rglob("*") if p.is_file()))


def table(rows: list[dict], columns: Sequence[str]) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _load(path: Path, stage: str) -> dict:
    if not path.exists():
        raise MissingStage(stage, path)
    return json.loads(path.read_text())


# ----------------------------------------------------------------- config


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def system_params(extra: Sequence[str]) -> dict:
    """Turn leftover ``--name value`` / ``--name=value`` flags into system parameters."""
    params: dict[str, Any] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, val = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"flag {tok} needs a value")
            key, val = tok[2:], extra[i + 1]
            i += 2
        params[key.replace("-", "_")] = parse_value(val)
    return params


def load_config(args, extra) -> dict:
    """Merge defaults < TOML < ATTRFORGE_SEED < flags into one run configuration."""
    cfg: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            cfg = tomllib.loads(Path(args.config).read_text())
        except (OSError, tomllib.TOMLDecodeError) as err:
            raise ConfigError(f"cannot read config: {err}") from None
    system = dict(cfg.get("system", {}))
    name = getattr(args, "system", None) or system.get("name")
    params = dict(system.get("params", {}))
    params.update(system_params(extra))
    run = {k: v for k, v in cfg.items() if k != "system"}
    seed = run.get("seed", 0)
    if "ATTRFORGE_SEED" in os.environ:
        try:
            seed = int(os.environ["ATTRFORGE_SEED"])
        except ValueError:
            raise ConfigError("ATTRFORGE_SEED must be an integer") from None
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    out = getattr(args, "out", None) or run.get("out") or "run"
    return {"name": name, "params": params, "seed": seed, "out": Path(out), "sections": run}


def _section(conf: dict, name: str) -> dict:
    sec = conf["sections"].get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section [{name}] must be a table")
    return dict(sec)


def _setting(args, key: str, conf: dict, section: str, bench: dict, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    sec = _section(conf, section)
    if key in sec:
        return sec[key]
    return bench.get(key, default)


# ------------------------------------------------------------------ probes


def make_probes(dim: int, low: float, high: float, count: int, layout: str, seed: int) -> np.ndarray:
    if count < 1:
        raise ConfigError("probe_count must be >= 1")
    if layout == "grid":
        per_axis = max(1, int(round(count ** (1.0 / dim))))
        ax = np.linspace(low, high, per_axis)
        return np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    if layout == "random":
        return np.random.default_rng(seed).uniform(low, high, (count, dim))
    if layout == "unit-x":
        X = np.zeros((1, dim))
        X[0, 0] = high
        return X
    raise ConfigError(f"unknown probe layout {layout!r}")


def _system(conf: dict, run_dir: Path | None = None):
    name, params = conf["name"], conf["params"]
    if name is None and run_dir is not None and (run_dir / "absorb.json").exists():
        meta = json.loads((run_dir / "absorb.json").read_text())
        name = meta["system"]
        params = {**meta["params"], **params}
    if name is None:
        raise ConfigError("no system given (use --system or [system] name)")
    try:
        return make_system(name, params)
    except KeyError as err:
        raise ConfigError(str(err.args[0])) from None


# ------------------------------------------------------------------ stages


def stage_absorb(args, conf, w: Writer) -> dict:
    sysm = _system(conf)
    bench = CATALOG[sysm.name].benchmark
    T = float(_setting(args, "T", conf, "absorb", {"T": bench.get("T", 1)}))
    low = float(_setting(args, "probe_low", conf, "absorb", bench, -1.0))
    high = float(_setting(args, "probe_high", conf, "absorb", bench, 1.0))
    count = int(_setting(args, "probe_count", conf, "absorb", bench, 100))
    layout = _setting(args, "probe_layout", conf, "absorb", bench, "grid")
    horizon = int(_setting(args, "horizon", conf, "absorb", bench, 100))
    drop = bool(_setting(args, "drop_escaping", conf, "absorb", bench, False))
    sample = _setting(args, "sample", conf, "absorb", bench, "probes")
    per_probe = int(_setting(args, "per_probe", conf, "absorb", bench, 20))
    probes = FinitePointSet(make_probes(sysm.phase_dim, low, high, count, layout, conf["seed"]), sysm.metric)
    if drop:
        probes = probes.subset(surviving_probes(sysm, probes, T, horizon))
        if len(probes) == 0:
            raise RuntimeError("no absorbing ball found")
    est = find_absorbing_ball(sysm, probes, horizon, T, seed=conf["seed"])
    if sample == "orbit":
        B = absorbed_sample(sysm, probes, est, T, per_probe)
    elif sample == "probes":
        B = probes
    else:
        raise ConfigError(f"unknown sample mode {sample!r}")
    w.points("probes.csv", probes)
    w.points("B.csv", B)
    payload = {"system": sysm.name, "params": sysm.params, "kind": sysm.kind, "T": T, "seed": conf["seed"],
               "probes": len(probes), "sample": sample, "sample_size": len(B), "estimate": est.to_dict()}
    w.json("absorb.json", "absorb", payload)
    print(table([{"system": sysm.name, "radius": est.radius, "entry_time": est.entry_time,
                  "invariant_checked": est.positively_invariant_checked, "probes": len(probes),
                  "sample": len(B)}],
                ["system", "radius", "entry_time", "invariant_checked", "probes", "sample"]))
    return payload


def _absorbed(args, conf, w: Writer):
    """System, absorb metadata and sample B, running absorb inline when it has not run."""
    root = w.root
    if not (root / "absorb.json").exists():
        stage_absorb(args, conf, w)
    meta = json.loads((root / "absorb.json").read_text())
    sysm = _system(conf, root)
    return sysm, meta, read_csv(root / "B.csv", sysm.metric)


def stage_cover(args, conf, w: Writer) -> dict:
    sysm, meta, B = _absorbed(args, conf, w)
    bench = CATALOG[sysm.name].benchmark
    T = float(args.T) if args.T is not None else float(meta["T"])
    k0 = int(_setting(args, "k0", conf, "cover", bench, 1))
    k_max = int(_setting(args, "k_max", conf, "cover", bench, 10))
    explicit = [getattr(args, k, None) for k in ("a", "q", "h")]
    if all(v is not None for v in explicit):
        res = check_covering_condition(sysm, B, T, args.a, args.q, args.b or 1.0, args.h, k0, k_max)
    else:
        q_grid = _setting(args, "q_grid", conf, "cover", bench, [0.5, 0.6, 0.7, 0.8, 0.9])
        if isinstance(q_grid, str):
            q_grid = [float(v) for v in q_grid.split(",")]
        a_policy = args.a if args.a is not None else _section(conf, "cover").get("a", "quasi")
        try:
            res = fit_certificate(sysm, B, T, k0, k_max, q_grid, a_policy)
        except RuntimeError as err:
            w.json("cover.json", "cover", {"status": "violation", "reason": str(err), "system": sysm.name})
            raise Violation(str(err)) from None
    if isinstance(res, CoveringViolation):
        w.json("cover.json", "cover", {"status": "violation", "system": sysm.name, **res.to_dict()})
        raise Violation(f"covering condition fails at k={res.k}: {res.count} > {res.allowed}")
    payload = {"status": "ok", "system": sysm.name, "certificate": res.to_dict()}
    w.json("cover.json", "cover", payload)
    w.csv("cover_counts.csv", ["k", "eps", "count", "log_count", "allowed"],
          [[r.k, r.eps, r.count, math.log(r.count), r.allowed] for r in res.per_k])
    c = res.to_dict()
    print(table([{"q": c["q"], "h": c["h"], "a": c["a"], "b": c["b"], "dim_bound": c["dim_bound"],
                  "xi_T": c["xi_T"]}], ["q", "h", "a", "b", "dim_bound", "xi_T"]))
    return payload


def _certificate(root: Path) -> CoveringCertificate:
    cov = _load(root / "cover.json", "cover")
    if cov.get("status") != "ok":
        raise ConfigError("cover stage recorded a violation; no certificate to build from")
    return CoveringCertificate.from_dict(cov["certificate"])


def stage_build(args, conf, w: Writer) -> dict:
    root = w.root
    meta = _load(root / "absorb.json", "absorb")
    cert = _certificate(root)
    sysm = _system(conf, root)
    B = read_csv(root / "B.csv", sysm.metric)
    try:
        approx = build_E0(sysm, B, cert, args.k_max)
    except CertificateMismatch as err:
        w.json("build.json", "build", {"status": "violation", "reason": str(err)})
        raise Violation(str(err)) from None
    save_approximation(approx, root / "build")
    w.tree("build")
    images = iterate(sysm, B, cert.T, approx.k_max)
    checks = []
    for k in range(approx.k0, approx.k_max + 1):
        d = hausdorff_distance_onesided(images[k], approx.E0)
        checks.append({"k": k, "dist": d, "radius": cert.radius(k), "ok": d <= cert.radius(k)})
    inv = verify_positive_invariance(sysm, approx.E0, cert.T)
    att = measure_attraction(sysm, B, approx.E0, cert.T, approx.k_max)
    w.csv("attraction.csv", ["t", "dist", "log_dist"],
          [[k * cert.T, d, math.log(d) if d > 0 else "-inf"] for k, d in att.dists])
    payload = {
        "status": "ok" if all(c["ok"] for c in checks) else "violation",
        "system": sysm.name, "E0_size": len(approx.E0), "k0": approx.k0, "k_max": approx.k_max,
        "Q_sizes": {str(k): len(v) for k, v in approx.Q.items()},
        "cardinality_bounds": {str(k): approx.cardinality_bound(k) for k in approx.Q},
        "distance_checks": checks, "invariance_defect": inv.defect, "xi_hat": att.xi_hat,
        "xi_T": cert.to_dict()["xi_T"], "sample": meta["sample"],
    }
    w.json("build.json", "build", payload)
    print(table([{"E0": len(approx.E0), "k_max": approx.k_max, "invariance_defect": inv.defect,
                  "xi_hat": att.xi_hat}], ["E0", "k_max", "invariance_defect", "xi_hat"]))
    if payload["status"] != "ok":
        raise Violation("dist(S(kT)B, E0) exceeds a q^k")
    return payload


def stage_certify(args, conf, w: Writer) -> dict:
    root = w.root
    meta = _load(root / "absorb.json", "absorb")
    sysm = _system(conf, root)
    bench = CATALOG[sysm.name].benchmark
    sec = _section(conf, "certify")
    B = read_csv(root / "B.csv", sysm.metric)
    T = float(args.T) if args.T is not None else float(meta["T"])
    n_pairs = int(sec.get("n_pairs", 10_000))
    lam = float(args.lam if args.lam is not None else sec.get("lambda", 0.1))
    coords = sec.get("projection", bench.get("projection"))
    if coords is not None and not (isinstance(coords, list) and all(
            isinstance(c, int) and 0 <= c < sysm.phase_dim for c in coords)):
        raise ConfigError(f"projection must list coordinate indices in [0, {sysm.phase_dim})")
    pairs = cf.sample_pairs(B, n_pairs, conf["seed"])
    results: dict[str, dict] = {}

    def record(kind, fn):
        try:
            results[kind] = {"status": "ok", **fn().to_dict()}
        except (cf.CertificationError, ValueError) as err:
            results[kind] = {"status": "failed", "kind": kind, "reason": str(err),
                             "witness": getattr(err, "witness", {})}

    if coords is not None:
        P = np.zeros((sysm.phase_dim, sysm.phase_dim))
        for c in coords:
            P[c, c] = 1.0
        lady = None

        def ladyzhenskaya():
            nonlocal lady
            lady = cf.certify_ladyzhenskaya(sysm, pairs, T, P)
            return lady

        record("ladyzhenskaya", ladyzhenskaya)
        record("squeezing", lambda: cf.certify_generalized_squeezing(sysm, pairs, T, P, 1.0))
        if lady is not None:
            sq = cf.derive_squeezing_from_ladyzhenskaya(lady)

            def quasi():
                q = cf.derive_quasi_from_squeezing(sq)
                if q.violations(sysm, pairs):
                    raise cf.CertificationError("derived quasi-stability certificate does not re-validate")
                return q

            record("quasi-stability", quasi)
            results["quasi-stability"]["z_dim"] = lady.n
    sample = B.subset(range(0, len(B), max(1, len(B) // int(sec.get("c1_points", 50)))))
    record("c1", lambda: cf.certify_c1(sysm, sample, T, lam))
    if sysm.kind == "ode-flow":
        grid = sec.get("holder_grid") or np.linspace(0.0, T / 5, 11).tolist()
        record("holder", lambda: cf.estimate_holder(sysm, sample, grid))
    for kind, res in results.items():
        w.json(f"certs/{kind}.json", "certificate", res)
    print(table([{"kind": k, "status": r["status"],
                  "summary": ", ".join(f"{p}={r[p]:.6g}" for p in ("n", "eta", "kappa", "mu", "M", "nu", "zeta")
                                       if isinstance(r.get(p), (int, float)))}
                 for k, r in results.items()], ["kind", "status", "summary"]))
    return {"certificates": results}


def _bound_rows(certs: dict, cover: dict | None, sigma: float | None, optimize_sigma: bool, grid: int) -> list[dict]:
    rows = []

    def add(theorem, bound_id, params, shown):
        if optimize_sigma:
            s, v = cf.optimize_sigma(bound_id, params, grid)
        else:
            if sigma is None:
                raise ConfigError("give --sigma or --optimize-sigma")
            s, v = sigma, cf.BOUNDS[bound_id][0](sigma=sigma, **params)
        rows.append({"theorem": theorem, "params": shown, "sigma": s, "bound": v})

    sq = certs.get("squeezing")
    if sq and sq["status"] == "ok" and sq["n"] > 0:
        p = {"n": sq["n"], "eta": sq["eta"], "mu": sq["mu"], "kappa": sq["kappa"]}
        add("squeezing", "squeezing", p, p)
        add("squeezing-volume", "squeezing_volume", p, p)
    lady = certs.get("ladyzhenskaya")
    if lady and lady["status"] == "ok" and lady["hilbert"] and lady["n"] > 0:
        p = {"n": lady["n"], "eta": lady["eta"], "kappa": lady["kappa"]}
        add("ladyzhenskaya-hilbert", "ladyzhenskaya_hilbert", p, p)
    qs = certs.get("quasi-stability")
    if qs and qs["status"] == "ok" and qs.get("z_dim", 0) > 0:
        shown = {"eta": qs["eta"], "kappa": qs["kappa"], "z_dim": qs["z_dim"]}
        add("quasi-stability", "quasi", {"eta": qs["eta"], "kappa": qs["kappa"], "mz": cf.mz_volume(qs["z_dim"])},
            shown)
        # packing count is a lower estimate of m_Z, reported alongside the volume bound
        packing = cf.mz_packing(NormPair(qs["z_dim"], "l2", "l2"), budget=500)
        add("quasi-stability-packing", "quasi", {"eta": qs["eta"], "kappa": qs["kappa"], "mz": packing}, shown)
    c1 = certs.get("c1")
    if c1 and c1["status"] == "ok" and 0 < c1["lambda"] < 0.25:
        p = {"n": c1["n"], "M": c1["M"], "lam": c1["lambda"]}
        add("c1", "c1", p, p)
    if cover is not None:
        cert = cover["certificate"]
        rows.append({"theorem": "covering", "params": {"q": cert["q"], "h": cert["h"]}, "sigma": "",
                     "bound": cert["dim_bound"]})
        hol = certs.get("holder")
        if hol and hol["status"] == "ok" and hol["nu"] > 0:
            rows.append({"theorem": "holder-in-time", "params": {"q": cert["q"], "h": cert["h"], "nu": hol["nu"]},
                         "sigma": "", "bound": cf.bound_holder(cert["q"], cert["h"], hol["nu"])})
    return rows


def stage_bounds(args, conf, w: Writer) -> dict:
    src = Path(args.from_dir) if args.from_dir else w.root / "certs"
    if not src.is_dir():
        raise MissingStage("certify", src)
    certs = {p.stem: json.loads(p.read_text()) for p in sorted(src.glob("*.json"))}
    if not certs:
        raise MissingStage("certify", src)
    cover_path = src.parent / "cover.json"
    cover = None
    if cover_path.exists():
        c = json.loads(cover_path.read_text())
        cover = c if c.get("status") == "ok" else None
    rows = _bound_rows(certs, cover, args.sigma, args.optimize_sigma, args.grid_size)
    w.json("bounds.json", "bounds", {"rows": rows, "optimized": bool(args.optimize_sigma)})
    w.csv("bounds.csv", ["theorem", "sigma", "bound"], [[r["theorem"], r["sigma"], r["bound"]] for r in rows])
    print(table(rows, ["theorem", "sigma", "bound"]))
    return {"rows": rows}


def auto_eps_grid(G: FinitePointSet, levels: Sequence[int] = range(3, 9)) -> list[float]:
    d = diameter(G)
    if d == 0:
        raise ConfigError("point set has zero diameter; give --eps explicitly")
    return [d * 2.0**-j for j in levels]


def _box_dim(w: Writer, G: FinitePointSet, eps: Sequence[float] | None, name: str):
    grid = list(eps) if eps else auto_eps_grid(G)
    fit = box_counting_dimension(G, grid)
    w.csv(name, ["eps", "log_inv_eps", "count", "log_count"],
          [[e, math.log(1 / e), c, math.log(c)] for e, c in fit.counts])
    return fit


def stage_dim(args, conf, w: Writer) -> dict:
    eps = [float(v) for v in args.eps.split(",")] if args.eps else None
    if args.input:
        G = read_csv(args.input)
        source = {"input": str(args.input)}
    else:
        sysm = _system(conf, w.root)
        bench = CATALOG[sysm.name].benchmark
        T = float(args.T) if args.T is not None else float(bench.get("T", 1))
        probes = make_probes(sysm.phase_dim, float(bench.get("probe_low", -1)), float(bench.get("probe_high", 1)),
                             args.probes, "random", conf["seed"])
        G0 = FinitePointSet(probes, sysm.metric)
        if bench.get("drop_escaping"):
            G0 = G0.subset(surviving_probes(sysm, G0, T, args.burn_in))
        G = omega_limit_sample(sysm, G0, args.burn_in, args.keep, T)
        source = {"system": sysm.name, "burn_in": args.burn_in, "keep": args.keep, "probes": len(G0)}
    fit = _box_dim(w, G, eps, "box_counts.csv")
    payload = {"source": source, "points": len(G), "slope": fit.slope, "intercept": fit.intercept,
               "r_squared": fit.r_squared, "eps_range": list(fit.eps_range),
               "counts": [{"eps": e, "count": c} for e, c in fit.counts]}
    w.json("dim.json", "dim", payload)
    print(table([{"points": len(G), "slope": fit.slope, "r_squared": fit.r_squared}],
                ["points", "slope", "r_squared"]))
    return payload


def stage_capacity(args, conf, w: Writer) -> dict:
    eps = [float(v) for v in args.eps.split(",")] if args.eps else [1.0, 0.5]
    pair = NormPair(args.n, args.norm_x, args.norm_y, args.field)
    rows = capacity_rows(pair, eps, args.budget, conf["seed"])
    p = w.path("capacity.csv")
    with open(p, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    w.written.append(p)
    w.json("capacity.json", "capacity", {"n": args.n, "norm_X": args.norm_x, "norm_Y": args.norm_y,
                                         "field": args.field, "budget": args.budget, "rows": rows})
    print(table(rows, ["n", "norm_X", "norm_Y", "eps", "packing_lb", "volume_ub", "capacity_bits"]))
    return {"rows": rows}


# finite-scale box-counting slopes overshoot slowly converging limits
SLACK = 0.3


def stage_report(args, conf, w: Writer) -> dict:
    root = Path(args.run) if args.run else w.root
    w.root = root
    absorb = _load(root / "absorb.json", "absorb")
    cover = _load(root / "cover.json", "cover")
    sysm = _system(conf, root)
    build = json.loads((root / "build.json").read_text()) if (root / "build.json").exists() else None
    bounds = json.loads((root / "bounds.json").read_text()) if (root / "bounds.json").exists() else None
    if build is not None and (root / "build" / "E0.csv").exists():
        G, on = read_csv(root / "build" / "E0.csv", sysm.metric), "E0"
    else:
        G, on = read_csv(root / "B.csv", sysm.metric), "B"
    fit = _box_dim(w, G, None, "plot_box_counts.csv")
    bound_rows = []
    if cover.get("status") == "ok":
        cert = cover["certificate"]
        bound_rows.append({"theorem": "covering", "bound": cert["dim_bound"]})
        w.csv("plot_cover_counts.csv", ["k", "log_count"], [[r["k"], math.log(r["count"])] for r in cert["per_k"]])
    if bounds is not None:
        bound_rows += [{"theorem": r["theorem"], "bound": r["bound"]} for r in bounds["rows"]
                       if r["theorem"] != "covering"]
    if build is not None and (root / "attraction.csv").exists():
        with open(root / "attraction.csv", newline="") as fh:
            att = list(csv.reader(fh))[1:]
        w.csv("plot_attraction.csv", ["t", "log_dist"], [[float(t), float(ld)] for t, _, ld in att if ld != "-inf"])
    for r in bound_rows:
        r["box_dim_below"] = fit.slope <= r["bound"]
        r["within_slack"] = fit.slope <= r["bound"] + SLACK
    payload = {
        "system": absorb["system"], "params": absorb["params"], "absorbing_ball": absorb["estimate"],
        "covering": cover, "build": build, "bounds": bounds, "box_dim": {"on": on, "slope": fit.slope,
                                                                          "r_squared": fit.r_squared},
        "consistency": bound_rows, "slack": SLACK, "consistent": all(r["within_slack"] for r in bound_rows),
    }
    w.json("report.json", "report", payload)
    print(table([{"theorem": "box-counting (" + on + ")", "bound": fit.slope, "box_dim_below": ""}] + bound_rows,
                ["theorem", "bound", "box_dim_below", "within_slack"]))
    return payload


def stage_systems(args, conf, w: Writer) -> dict:
    text = catalog_json()
    if args.out:
        p = w.path("systems.json")
        p.write_text(text + "\n")
        w.written.append(p)
    print(text)
    return json.loads(text)


STAGES = {
    "systems": stage_systems, "absorb": stage_absorb, "cover": stage_cover, "build": stage_build,
    "certify": stage_certify, "bounds": stage_bounds, "dim": stage_dim, "capacity": stage_capacity,
    "report": stage_report,
}


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--system", help="catalog system name")
    common.add_argument("--out", help="run directory (default: ./run)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--verify-repro", action="store_true", help="rerun the stage and bit-compare its outputs")
    common.add_argument("--T", type=float, help="time step T")

    p = argparse.ArgumentParser(prog="attrforge", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("systems", parents=[common], allow_abbrev=False, help="list the benchmark catalog")

    a = sub.add_parser("absorb", parents=[common], allow_abbrev=False, help="estimate an absorbing ball")
    for flag, typ in (("--probe-low", float), ("--probe-high", float), ("--probe-count", int), ("--horizon", int),
                      ("--per-probe", int)):
        a.add_argument(flag, type=typ)
    a.add_argument("--probe-layout", choices=["grid", "random", "unit-x"])
    a.add_argument("--sample", choices=["probes", "orbit"])
    a.add_argument("--drop-escaping", action="store_true", default=None)

    c = sub.add_parser("cover", parents=[common], allow_abbrev=False, help="fit or check a covering certificate")
    for flag, typ in (("--probe-low", float), ("--probe-high", float), ("--probe-count", int), ("--horizon", int),
                      ("--per-probe", int)):
        c.add_argument(flag, type=typ)
    c.add_argument("--probe-layout", choices=["grid", "random", "unit-x"])
    c.add_argument("--sample", choices=["probes", "orbit"])
    c.add_argument("--drop-escaping", action="store_true", default=None)
    c.add_argument("--k0", type=int)
    c.add_argument("--kmax", "--k-max", dest="k_max", type=int)
    c.add_argument("--q-grid", dest="q_grid")
    c.add_argument("--a", type=float)
    c.add_argument("--b", type=float)
    c.add_argument("--q", type=float)
    c.add_argument("--h", type=float)

    b = sub.add_parser("build", parents=[common], allow_abbrev=False, help="build E0 from the certificate")
    b.add_argument("--kmax", "--k-max", dest="k_max", type=int)

    ce = sub.add_parser("certify", parents=[common], allow_abbrev=False, help="estimate stability certificates")
    ce.add_argument("--lambda", dest="lam", type=float)

    bo = sub.add_parser("bounds", parents=[common], allow_abbrev=False, help="evaluate dimension bounds")
    bo.add_argument("--from", dest="from_dir", help="certificate directory (default: <out>/certs)")
    bo.add_argument("--sigma", type=float)
    bo.add_argument("--optimize-sigma", action="store_true")
    bo.add_argument("--grid-size", type=int, default=64)

    d = sub.add_parser("dim", parents=[common], allow_abbrev=False, help="box-counting dimension estimate")
    d.add_argument("--input", help="CSV point set (otherwise an omega-limit sample of --system)")
    d.add_argument("--eps", help="comma-separated eps grid")
    d.add_argument("--burn-in", type=int, default=1000)
    d.add_argument("--keep", type=int, default=10_000)
    d.add_argument("--probes", type=int, default=10)

    cp = sub.add_parser("capacity", parents=[common], allow_abbrev=False, help="unit-ball packing table")
    cp.add_argument("--n", type=int, required=True)
    cp.add_argument("--norm-x", default="l2")
    cp.add_argument("--norm-y", default="l2")
    cp.add_argument("--field", default="real", choices=["real", "complex"])
    cp.add_argument("--eps", help="comma-separated eps list")
    cp.add_argument("--budget", type=int, default=100_000)

    r = sub.add_parser("report", parents=[common], allow_abbrev=False, help="collate a run directory")
    r.add_argument("--run", help="run directory (default: --out)")
    return p


def _snapshot(paths: Sequence[Path]) -> dict[str, bytes]:
    return {str(p): p.read_bytes() for p in paths}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        set_threads(args.threads)
        if extra and args.command in ("systems", "capacity", "bounds"):
            raise ConfigError(f"unexpected arguments: {' '.join(extra)}")
        conf = load_config(args, extra)
        root = Path(args.run) if args.command == "report" and args.run else conf["out"]
        stage = STAGES[args.command]
        w = Writer(root)
        status = EXIT_OK
        try:
            stage(args, conf, w)
        except Violation as err:
            print(f"certificate violation: {err}", file=sys.stderr)
            status = EXIT_VIOLATION
        if args.verify_repro:
            first = _snapshot(w.written)
            # remove this run's artifacts so the rerun recreates every one of them
            for path in w.written:
                path.unlink(missing_ok=True)
            again = Writer(root)
            with contextlib.redirect_stdout(io.StringIO()):
                try:
                    stage(args, conf, again)
                except Violation:
                    pass
            second = _snapshot(again.written)
            if first != second:
                diff = sorted(set(first) ^ set(second) | {k for k in first if first.get(k) != second.get(k)})
                print(f"reproducibility check failed: {', '.join(diff)}", file=sys.stderr)
                return EXIT_REPRO
            print(f"reproducibility check passed ({len(first)} artifacts bit-identical)", file=sys.stderr)
        return status
    except BlowUpError as err:
        print(f"numerical blow-up: {err}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ConfigError, KeyError, ValueError) as err:
        print(f"error: {err.args[0] if err.args else err}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VIOLATION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
