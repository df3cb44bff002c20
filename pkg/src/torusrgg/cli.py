"""Command-line front end for all experiments.

Configuration comes from an optional JSON file plus flag overrides (flags
win); the environment variable RGG_SEED overrides the master seed.  Every
run writes a manifest echoing the fully resolved spec, and result files
are byte-identical across runs with the same spec and seed.  Diagnostics
go to stderr; --stdout mirrors the main JSON result to stdout.

Exit codes: 0 success, 2 invalid spec, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import EMPIRICAL_QUANTILE, calibrate
from .cumulants import QuadratureError, cycle_gamma_moment_mc, cycle_kappa, triangle_gamma_moment
from .signed import power_cell, power_sweep
from .spectral import (arc_vector_q, arc_vectors_linf, center_adjacency,
                       count_large_eigs, default_arc_half_width, gram_offdiag,
                       rayleigh, spectrum)
from .torus import (INFINITY, ModelConfig, build_rgg, edges_to_text,
                    sample_gnp, sample_positions, sample_rgg)
from .tracemethod import Multigraph, contract_core, empirical_trace_moment
from .tvbound import tv_upper_bound

DEFAULT_SEED = 20260809


def _parse_norm(text):
    if str(text).lower() in ("inf", "infinity", "linf", "max"):
        return INFINITY
    return int(text)


def _norm_repr(norm):
    return "inf" if norm == INFINITY else int(norm)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


class SpecError(ValueError):
    pass


def _resolve(args: argparse.Namespace, fields: list[str]) -> dict:
    """Merge JSON config (if any) with CLI flags; flags win."""
    spec: dict = {}
    if args.config:
        with open(args.config) as fh:
            spec.update(json.load(fh))
    for name in fields:
        val = getattr(args, name.replace("-", "_"), None)
        if val is not None:
            spec[name] = val
    if "RGG_SEED" in os.environ:
        spec["seed"] = int(os.environ["RGG_SEED"])
    spec.setdefault("seed", DEFAULT_SEED)
    if "norm" in spec:
        spec["norm"] = _norm_repr(_parse_norm(spec["norm"]))
    return spec


def _model(spec: dict) -> ModelConfig:
    try:
        return ModelConfig(n=int(spec["n"]), d=int(spec["d"]), p=float(spec["p"]),
                           norm=_parse_norm(spec["norm"]), master_seed=int(spec["seed"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecError(f"invalid model spec: {exc}") from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _finish(outdir: Path, command: str, spec: dict, streams: dict,
            result, args, t0: float) -> int:
    manifest = {"command": command, "spec": spec, "version": __version__,
                "master_seed": spec["seed"], "streams": streams,
                "wall_seconds": time.time() - t0}
    _write_json(outdir / "manifest.json", manifest)
    if getattr(args, "stdout", False) and result is not None:
        print(json.dumps(result, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------

def _cmd_calibrate(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["q", "d", "p", "method", "budget", "seed"])
    q, d, p = int(spec["q"]), int(spec["d"]), float(spec["p"])
    method = spec.get("method") or EMPIRICAL_QUANTILE
    budget = int(spec.get("budget") or 2_000_000)
    res = calibrate(q, d, p, method=method, sample_budget=budget,
                    master_seed=spec["seed"])
    out = {"q": q, "d": d, "p": p, "tau": res.tau, "tau_hat": res.tau_hat,
           "method": res.method, "achieved_p": res.achieved_p,
           "stderr": res.achieved_p_stderr}
    _write_json(outdir / "calibrate.json", out)
    return _finish(outdir, "calibrate", spec, {"calibration": "0x11", "validation": "0x12"},
                   out, args, t0)


def _cmd_sample(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["model", "n", "d", "p", "norm", "tau", "trial", "seed"])
    cfg = _model(spec)
    kind = spec.get("model", "rgg")
    trial = int(spec.get("trial", 0))
    if kind == "rgg":
        tau = spec.get("tau")
        if tau is None:
            tau = calibrate(cfg.norm, cfg.d, cfg.p, master_seed=cfg.master_seed).tau
        A = sample_rgg(cfg, float(tau), trial)
    elif kind == "gnp":
        A = sample_gnp(cfg, trial)
    else:
        raise SpecError(f"unknown model {kind!r}")
    (outdir / "edges.txt").write_text(edges_to_text(A))
    out = {"model": kind, "n": cfg.n, "edges": int(A.sum()) // 2}
    _write_json(outdir / "sample.json", out)
    return _finish(outdir, "sample", spec, {"positions": trial, "coins": trial},
                   out, args, t0)


def _cmd_moments(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["q", "k", "d-values", "zeta", "mc-samples", "seed"])
    q = int(spec["q"])
    k = int(spec.get("k") or 3)
    zeta = float(spec.get("zeta") or 1.0)
    d_values = [int(x) for x in str(spec.get("d-values") or "64,256,1024").split(",")]
    mc = int(spec.get("mc-samples") or 10_000_000)
    if k == 3:
        gamma_moment = triangle_gamma_moment(q)
    else:
        gamma_moment, _ = cycle_gamma_moment_mc(q, k, mc, master_seed=spec["seed"])
    kappas = {str(d): cycle_kappa(q, k, d, zeta, mc_samples=mc,
                                  master_seed=spec["seed"]).kappa_d for d in d_values}
    rho = cycle_kappa(q, k, d_values[0], zeta, mc_samples=mc,
                      master_seed=spec["seed"]).rho
    out = {"q": q, "k": k, "gamma_moment": gamma_moment, "rho": rho,
           "kappa_d_at": kappas}
    _write_json(outdir / "moments.json", out)
    return _finish(outdir, "moments", spec, {"mc": "0x72"}, out, args, t0)


_POWER_HEADER = ["norm", "q", "n", "d", "p", "trials", "statistic_mean",
                 "statistic_stderr", "power", "fpr", "seed"]


def _power_rows(cfg_base, cells):
    rows = []
    for c in cells:
        rows.append([_norm_repr(cfg_base.norm), _norm_repr(cfg_base.norm),
                     cfg_base.n, c.d, cfg_base.p, c.trials, c.statistic_mean,
                     c.statistic_stderr, c.power, c.fpr, cfg_base.master_seed])
    return rows


def _cmd_triangle_test(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["n", "d", "p", "norm", "trials", "calibration-method", "seed"])
    cfg = _model(spec)
    trials = int(spec.get("trials") or 100)
    cell = power_cell(cfg, trials, calibration_method=spec.get("calibration-method"))
    _write_csv(outdir / "triangle_test.csv", _POWER_HEADER, _power_rows(cfg, [cell]))
    out = {"power": cell.power, "fpr": cell.fpr, "statistic_mean": cell.statistic_mean}
    return _finish(outdir, "triangle-test", spec,
                   {"calibration": 0, "trials": f"0..{trials - 1}"}, out, args, t0)


def _cmd_sweep_power(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["n", "p", "norm", "d-values", "trials",
                           "calibration-method", "seed"])
    d_values = [int(x) for x in str(spec.get("d-values") or "16,64,256").split(",")]
    spec["d"] = d_values[0]
    cfg = _model(spec)
    trials = int(spec.get("trials") or 100)
    cells = power_sweep(cfg, d_values, trials,
                        calibration_method=spec.get("calibration-method"))
    _write_csv(outdir / "sweep_power.csv", _POWER_HEADER, _power_rows(cfg, cells))
    out = {"cells": [{"d": c.d, "power": c.power, "fpr": c.fpr} for c in cells]}
    return _finish(outdir, "sweep-power", spec,
                   {"per_d_stream": "index+1"}, out, args, t0)


def _cmd_spectrum(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["model", "n", "d", "p", "norm", "trial", "seed"])
    cfg = _model(spec)
    trial = int(spec.get("trial", 0))
    kind = spec.get("model", "rgg")
    if kind == "rgg":
        tau = calibrate(cfg.norm, cfg.d, cfg.p, master_seed=cfg.master_seed).tau
        A = sample_rgg(cfg, tau, trial)
    else:
        A = sample_gnp(cfg, trial)
    rep = spectrum(center_adjacency(A, cfg.p))
    regime = "linf" if cfg.norm == INFINITY else "lq"
    counts = {}
    for a in (1.0, 2.0, 4.0):
        scale = cfg.d if regime == "linf" else math.sqrt(cfg.d)
        thr = cfg.n * cfg.p / (a * scale)
        counts[repr(thr)] = count_large_eigs(rep, a, regime, n=cfg.n, p=cfg.p, d=cfg.d)
    _write_csv(outdir / "eigenvalues.csv",
               ["rank", "eigenvalue", "n", "d", "p", "norm"],
               [[i + 1, float(v), cfg.n, cfg.d, cfg.p, _norm_repr(cfg.norm)]
                for i, v in enumerate(rep.eigenvalues)])
    out = {"lambda1": float(rep.eigenvalues[0]),
           "lambda2_abs_max": rep.lambda2_abs_max, "counts": counts}
    _write_json(outdir / "spectrum.json", out)
    return _finish(outdir, "spectrum", spec, {"positions": trial}, out, args, t0)


def _cmd_arc_vectors(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["n", "d", "p", "norm", "arc-half-width", "trial", "seed"])
    cfg = _model(spec)
    trial = int(spec.get("trial", 0))
    X = sample_positions(cfg, trial)
    thr = calibrate(cfg.norm, cfg.d, cfg.p, master_seed=cfg.master_seed)
    A = build_rgg(X, thr.tau, cfg.norm)
    if cfg.norm == INFINITY:
        vectors = []
        for i in range(cfg.d):
            vectors.extend(arc_vectors_linf(X, i, thr.extra["xi"]))
    else:
        c = float(spec.get("arc-half-width") or default_arc_half_width(int(cfg.norm)))
        vectors = [arc_vector_q(X, i, c) for i in range(cfg.d)]
    M = center_adjacency(A, cfg.p)
    rows = []
    for idx, v in enumerate(vectors):
        r = rayleigh(M, v.normalized) if not v.degenerate else float("nan")
        rows.append([idx, v.dimension_index, r])
    _write_csv(outdir / "arc_rayleigh.csv", ["vector", "dimension", "rayleigh"], rows)
    out = {"gram_offdiag_max": gram_offdiag(vectors),
           "rayleigh_mean": float(np.nanmean([r[2] for r in rows]))}
    _write_json(outdir / "arc_summary.json", out)
    return _finish(outdir, "arc-vectors", spec, {"positions": trial}, out, args, t0)


def _cmd_core_contract(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["input", "seed"])
    path = spec.get("input")
    if not path or not Path(path).exists():
        raise SpecError(f"input edge file not found: {path}")
    edges = Counter()
    vertices = set()
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise SpecError(f"bad edge line: {line!r}")
        u, v = int(parts[0]), int(parts[1])
        mult = int(parts[2]) if len(parts) == 3 else 1
        edges[(min(u, v), max(u, v))] += mult
        vertices.update((u, v))
    H = Multigraph(vertices=vertices, edges=edges)
    try:
        rep = contract_core(H)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    out = {
        "core_vertices": sorted(rep.core.vertices),
        "core_edges": [[u, v, m] for (u, v), m in sorted(rep.core.edges.items())],
        "removed_cycles": [{"vertices": list(c.vertices), "edges": c.edge_count,
                            "degenerate": c.degenerate} for c in rep.removed_cycles],
        "s": rep.s, "s_d": rep.s_d,
        "contracted_chains": rep.contracted_chains,
        "non_contracted_edges": [[u, v, m] for (u, v), m
                                 in sorted(rep.non_contracted_edges.items())],
        "counting_identity_holds": rep.counting_identity_holds(),
        "trivial": rep.trivial,
    }
    _write_json(outdir / "core.json", out)
    return _finish(outdir, "core-contract", spec, {}, out, args, t0)


def _cmd_trace_moment(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["n", "p", "norm", "d-values", "m", "trials", "seed"])
    d_values = [int(x) for x in str(spec.get("d-values") or "16,256").split(",")]
    m = int(spec.get("m") or 4)
    trials = int(spec.get("trials") or 20)
    rows = []
    for idx, d in enumerate(d_values):
        spec_d = dict(spec)
        spec_d["d"] = d
        cfg = _model(spec_d)
        mean, stderr, pred = empirical_trace_moment(cfg, m, trials, stream_id=idx + 1)
        rows.append([m, d, mean, stderr, pred])
    _write_csv(outdir / "trace_moment.csv",
               ["m", "d", "mean", "stderr", "regime_prediction"], rows)
    out = {"rows": [{"m": r[0], "d": r[1], "mean": r[2]} for r in rows]}
    return _finish(outdir, "trace-moment", spec, {"per_d_stream": "index+1"},
                   out, args, t0)


def _cmd_tv_bound(args, outdir: Path, t0: float) -> int:
    spec = _resolve(args, ["n", "d", "p", "norm", "k-max", "trials", "inner-budget", "seed"])
    cfg = _model(spec)
    rep = tv_upper_bound(cfg, k_max=int(spec.get("k-max") or 8),
                         trials=int(spec.get("trials") or 400),
                         inner_budget=int(spec.get("inner-budget") or 10_000))
    out = {"terms": rep.terms, "bound": rep.bound,
           "truncation_k": rep.truncation_k, "mc_budget": rep.mc_budget,
           "tail_estimate": rep.tail_estimate, "diverged_at": rep.diverged_at}
    _write_json(outdir / "tv_bound.json", out)
    return _finish(outdir, "tv-bound", spec, {"per_j_stream": "j"}, out, args, t0)


_HANDLERS = {
    "calibrate": _cmd_calibrate,
    "sample": _cmd_sample,
    "moments": _cmd_moments,
    "triangle-test": _cmd_triangle_test,
    "sweep-power": _cmd_sweep_power,
    "spectrum": _cmd_spectrum,
    "arc-vectors": _cmd_arc_vectors,
    "core-contract": _cmd_core_contract,
    "trace-moment": _cmd_trace_moment,
    "tv-bound": _cmd_tv_bound,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgg",
                                     description="torus RGG experiment runner")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--output-dir", default=".", help="where results land")
        sp.add_argument("--seed", type=int, help="master seed (RGG_SEED env wins)")
        sp.add_argument("--stdout", action="store_true",
                        help="mirror the JSON result to stdout")
        sp.add_argument("--threads", type=int, default=None,
                        help="cap worker threads (results are thread-count independent)")

    sp = sub.add_parser("calibrate")
    common(sp)
    sp.add_argument("--q", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--method", choices=["empirical_quantile", "gaussian"])
    sp.add_argument("--budget", type=int)

    sp = sub.add_parser("sample")
    common(sp)
    sp.add_argument("--model", choices=["rgg", "gnp"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--norm")
    sp.add_argument("--tau", type=float)
    sp.add_argument("--trial", type=int)

    sp = sub.add_parser("moments")
    common(sp)
    sp.add_argument("--q", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--d-values")
    sp.add_argument("--zeta", type=float)
    sp.add_argument("--mc-samples", type=int)

    sp = sub.add_parser("triangle-test")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--norm")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--calibration-method", choices=["empirical_quantile", "gaussian"])

    sp = sub.add_parser("sweep-power")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--norm")
    sp.add_argument("--d-values")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--calibration-method", choices=["empirical_quantile", "gaussian"])

    sp = sub.add_parser("spectrum")
    common(sp)
    sp.add_argument("--model", choices=["rgg", "gnp"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--norm")
    sp.add_argument("--trial", type=int)

    sp = sub.add_parser("arc-vectors")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--norm")
    sp.add_argument("--arc-half-width", type=float)
    sp.add_argument("--trial", type=int)

    sp = sub.add_parser("core-contract")
    common(sp)
    sp.add_argument("--input", help="edge multiset file: 'u v multiplicity' lines")

    sp = sub.add_parser("trace-moment")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--norm")
    sp.add_argument("--d-values")
    sp.add_argument("--m", type=int)
    sp.add_argument("--trials", type=int)

    sp = sub.add_parser("tv-bound")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--norm")
    sp.add_argument("--k-max", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--inner-budget", type=int)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    if args.threads:
        os.environ["NUMBA_NUM_THREADS"] = str(args.threads)
    outdir = Path(args.output_dir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        t0 = time.time()
        code = _HANDLERS[args.command](args, outdir, t0)
        _log(f"{args.command}: done in {time.time() - t0:.1f}s -> {outdir}")
        return code
    except SpecError as exc:
        print(json.dumps({"error": "invalid_spec", "message": str(exc)}),
              file=sys.stderr)
        return 2
    except (QuadratureError, ArithmeticError, FloatingPointError) as exc:
        print(json.dumps({"error": "numerical_failure", "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
