"""Command-line front end: ``spectral-reg <command> --config FILE``.

Each command writes CSV/JSON (and SVG for contour plots) into the output
directory plus a ``manifest.json`` describing the run. The exit status is 0
when every asserted bound holds, 1 when one fails, 2 for an invalid config
and 3 when a computation raises; errors are reported as JSON on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .conditioning import overlap_sum_in_region
from .config import COMMANDS, ConfigError, ExperimentConfig, default_view, parse_config, parse_matrix_source
from .ensembles import (
    RngSpec, sample_complex_ginibre, verify_s1_tail, verify_small_ball, verify_smin_law, verify_sst_real,
)
from .matrix_core import matrix_to_json, operator_norm
from .pseudospectrum import contours, contours_svg, limiting_overlap_estimate, polygon_area, smin_field
from .regions import Disk, Rect
from .regularizer import (
    bulk_overlap_profile, davies_tradeoff, jordan_scan, optimize_st, regularize, verify_theorem_b,
)
from .sde import BACKEND, couple_evolve, marginal_law_check

MANIFEST_VERSION = 1
WORKERS_ENV = "SPECTRAL_REG_WORKERS"

# reference optimum of t and t sqrt(s) for the union-bound constants
REFERENCE_T = 3.7487
REFERENCE_T_SQRT_S = 3.8822
REFERENCE_TOL = 1e-3


@dataclass
class RunManifest:
    config: dict
    artifacts: list[dict]
    wall_clock_seconds: float
    seed: int
    version: str
    backend: str
    passed: bool
    manifest_version: int = MANIFEST_VERSION

    def to_json(self) -> str:
        return dump_json(asdict(self))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dump_json(obj) -> str:
    """Canonical JSON: sorted keys, non-finite floats as null, trailing newline."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _matrix(cfg: ExperimentConfig):
    return parse_matrix_source(cfg.matrix, cfg.base_dir)


# ---------------------------------------------------------------------------
# commands; each returns (artifacts, passed)


def _cmd_optimize_st(cfg, workers):
    opt = optimize_st()
    checks = {
        "t": abs(opt.t - REFERENCE_T) <= REFERENCE_TOL,
        "t_sqrt_s": abs(opt.objective - REFERENCE_T_SQRT_S) <= REFERENCE_TOL,
    }
    report = {"t": opt.t, "s": opt.s, "t_sqrt_s": opt.objective,
              "reference": {"t": REFERENCE_T, "t_sqrt_s": REFERENCE_T_SQRT_S, "tol": REFERENCE_TOL},
              "checks": checks, "passed": all(checks.values())}
    return {"optimize_st.json": dump_json(report)}, report["passed"]


def _pseudo_panel(m, view, cfg, workers, tag):
    fld = smin_field(m, view, cfg.nx, cfg.ny, workers)
    cs = contours(fld, cfg.levels)
    lam = np.linalg.eigvals(m)
    loops = []
    for k, eps in enumerate(cs.levels):
        closed = [polygon_area(p) for j, p in enumerate(cs.polylines[k]) if cs.is_closed(k, j)]
        loops.append({"eps": eps, "polylines": len(cs.polylines[k]), "closed_loops": len(closed),
                      "enclosed_area": float(sum(closed))})
    summary = {"levels": loops, "smin_min": float(fld.values.min()),
               "smin_max": float(fld.values.max()), "eigenvalues": lam.tolist()}
    files = {
        f"smin_{tag}.csv": fld.to_csv(),
        f"contours_{tag}.json": cs.to_json() + "\n",
        f"contours_{tag}.svg": contours_svg(cs, fld, lam),
    }
    return files, summary


def _cmd_pseudospectrum(cfg, workers):
    a = _matrix(cfg)
    region = cfg.region_obj()
    if cfg.perturbation > 0:
        b = a + cfg.perturbation * sample_complex_ginibre(a.shape[0], cfg.rng.generator(0))
        span = max(operator_norm(a), operator_norm(b))
    else:
        b = None
        span = operator_norm(a)
    if region is None:
        view = default_view(span, cfg.levels)
    elif isinstance(region, Disk):
        lo_re, hi_re, lo_im, hi_im = region.bounding_box()
        view = Rect(complex(lo_re, lo_im), complex(hi_re, hi_im))
    else:
        view = region
    files, before = _pseudo_panel(a, view, cfg, workers, "before")
    report = {"view": view.to_dict(), "before": before, "passed": True}
    if b is not None:
        f2, after = _pseudo_panel(b, view, cfg, workers, "after")
        files.update(f2)
        files["perturbed_matrix.json"] = matrix_to_json(b) + "\n"
        report["after"] = after
        report["perturbation"] = cfg.perturbation
    if cfg.limiting_area:
        area_region = region if region is not None else view
        est = limiting_overlap_estimate(a, area_region, resolution=cfg.area_resolution, workers=workers)
        oracle = overlap_sum_in_region(a, area_region)
        rel = abs(est.value - oracle) / oracle if oracle > 0 else abs(est.value)
        ok = bool(est.converged and rel <= cfg.limit_tolerance)
        report["limiting_area"] = {**est.to_dict(), "overlap_sum": oracle, "relative_error": rel,
                                   "tolerance": cfg.limit_tolerance, "passed": ok}
        report["passed"] = ok
    files["pseudospectrum.json"] = dump_json(report)
    return files, report["passed"]


def _cmd_regularize(cfg, workers):
    a = _matrix(cfg)
    norm_a = operator_norm(a)
    rows, runs = [], []
    for r in range(cfg.trials):
        rng = RngSpec(cfg.seed, cfg.stream + r)
        if cfg.delta is not None:
            res = regularize(a, cfg.delta, cfg.attempts, rng)
            budget = cfg.delta * (norm_a if norm_a > 0 else 1.0)
            within = res.norm_E <= budget * (1 + 1e-12) and res.kappa_V_after <= res.bound * (1 + 1e-9)
            d = res.to_dict()
        else:
            dv = davies_tradeoff(a, cfg.epsilon, rng, cfg.attempts)
            res = dv.regularization
            within = dv.within_bound
            d = dv.to_dict()
        runs.append(res)
        ok = (not res.certified) or within
        rows.append([r, res.attempts_used, int(res.certified), res.norm_E, res.kappa_V_after,
                     res.bound, int(ok)])
        d.update(run=r, bounds_hold=ok)
    certified = sum(r.certified for r in runs)
    frac = certified / cfg.trials
    bounds_ok = all(row[-1] for row in rows)
    passed = bool(frac >= cfg.min_certified and bounds_ok)
    report = {"n": a.shape[0], "norm_A": norm_a, "delta": cfg.delta, "epsilon": cfg.epsilon,
              "runs": cfg.trials, "attempts": cfg.attempts, "certified": certified,
              "certified_fraction": frac, "min_certified": cfg.min_certified,
              "certified_within_bounds": bounds_ok,
              "max_kappa_V": max(r.kappa_V_after for r in runs),
              "max_attempts_used": max(r.attempts_used for r in runs), "passed": passed}
    files = {
        "regularize.csv": _csv(["run", "attempts_used", "certified", "norm_E", "kappa_V", "bound",
                                "bounds_hold"], rows),
        "regularize.json": dump_json(report),
        "perturbation_run0.json": matrix_to_json(runs[0].E) + "\n",
    }
    return files, passed


def _cmd_theorem_b(cfg, workers):
    a = _matrix(cfg)
    rep = verify_theorem_b(a, cfg.delta, cfg.region_obj(), cfg.trials, cfg.rng)
    return {"theorem_b.json": dump_json(rep.to_dict())}, rep.passed


def _cmd_tails(cfg, workers):
    rng = cfg.rng
    if cfg.law == "smin-law":
        rep = verify_smin_law(cfg.n, cfg.grid, cfg.trials, rng, cfg.min_fraction)
    elif cfg.law == "s1-tail":
        rep = verify_s1_tail(cfg.n, cfg.grid, cfg.trials, rng)
    elif cfg.law == "small-ball":
        rep = verify_small_ball(_matrix(cfg), cfg.delta, cfg.grid, cfg.trials, rng)
    else:
        rep = verify_sst_real(_matrix(cfg), cfg.grid, cfg.trials, rng)
    rows = zip(rep.grid, rep.counts, rep.empirical, rep.lower, rep.upper, rep.theoretical,
               [int(p) for p in rep.point_pass])
    files = {
        "tails.csv": _csv(["x", "count", "empirical", "lower", "upper", "theoretical", "pass"], rows),
        "tails.json": dump_json(rep.to_dict()),
    }
    return files, rep.passed


def _cmd_jordan_scan(cfg, workers):
    scan = jordan_scan(cfg.n, cfg.deltas, cfg.trials, cfg.rng)
    lo, hi = cfg.slope_range
    passed = bool(lo <= scan.slope <= hi)
    report = {**scan.to_dict(), "exponent": 1 - 1 / cfg.n, "slope_range": [lo, hi], "passed": passed}
    rows = zip(scan.deltas, scan.min_kappa, scan.median_kappa, scan.davies_upper)
    files = {
        "jordan_scan.csv": _csv(["delta", "min_kappa_V", "median_kappa_V", "davies_upper"], rows),
        "jordan_scan.json": dump_json(report),
    }
    return files, passed


def _cmd_bulk_profile(cfg, workers):
    prof = bulk_overlap_profile(cfg.n, cfg.trials, cfg.r_edges, cfg.rng)
    edges = np.asarray(prof.r_edges)
    checks = []
    for r in cfg.check_radii:
        k = int(np.searchsorted(edges, r, side="right")) - 1
        if not 0 <= k < len(prof.mean_overlap_over_n):
            checks.append({"radius": r, "bin": None, "passed": False})
            continue
        mean = prof.mean_overlap_over_n[k]
        theory = 1 - r * r
        ok = bool(math.isfinite(mean) and abs(mean - theory) <= cfg.profile_tolerance)
        checks.append({"radius": r, "bin": [edges[k], edges[k + 1]], "mean": mean, "theory": theory,
                       "passed": ok})
    total_ok = prof.total_over_n2 >= cfg.min_total
    passed = bool(all(c["passed"] for c in checks) and total_ok)
    report = {**prof.to_dict(), "checks": checks, "min_total": cfg.min_total,
              "profile_tolerance": cfg.profile_tolerance, "total_passed": bool(total_ok), "passed": passed}
    rows = zip(edges[:-1], edges[1:], prof.counts, prof.mean_overlap_over_n, prof.theory)
    files = {
        "bulk_profile.csv": _csv(["r_lo", "r_hi", "count", "mean_kappa2_over_n", "theory_at_center"], rows),
        "bulk_profile.json": dump_json(report),
    }
    return files, passed


def _cmd_sde_couple(cfg, workers):
    s1 = np.sort(np.asarray(cfg.sigma1, dtype=float))[::-1]
    s2 = np.sort(np.asarray(cfg.sigma2, dtype=float))[::-1]
    rows, first = [], None
    for r in range(cfg.trials):
        p = couple_evolve(s1, s2, cfg.t, cfg.steps, cfg.variant, cfg.rng, run=r,
                          normalized=cfg.normalized, squared=cfg.squared)
        if first is None:
            first = p
        rows.append([r, p.status, p.completed_steps, p.halvings, p.min_step, p.violations,
                     p.violations_beyond_tol, p.max_violation, p.min_value])
    floors = sum(row[1] != "ok" for row in rows)
    beyond = sum(row[6] for row in rows)
    min_value = min(row[8] for row in rows)
    passed = bool(floors == 0 and beyond == 0 and min_value >= 0)
    report = {"variant": cfg.variant, "n": len(s1), "t": cfg.t, "steps": cfg.steps, "runs": cfg.trials,
              "tol_ord": first.tol_ord, "step_floor_runs": floors, "violations_beyond_tol": beyond,
              "violations": sum(row[5] for row in rows), "max_violation": max(row[7] for row in rows),
              "min_value": min_value, "halvings": sum(row[3] for row in rows), "passed": passed}
    files = {
        "sde_couple.csv": _csv(["run", "status", "completed_steps", "halvings", "min_step", "violations",
                                "violations_beyond_tol", "max_violation", "min_value"], rows),
        "sde_couple.json": dump_json(report),
        "paths_run0.csv": first.to_csv(),
    }
    return files, passed


def _cmd_sde_marginal(cfg, workers):
    rep = marginal_law_check(_matrix(cfg), cfg.t, cfg.trials, cfg.steps, cfg.variant, cfg.rng,
                             alpha=cfg.alpha, normalized=cfg.normalized, squared=cfg.squared)
    return {"sde_marginal.json": dump_json(rep.to_dict())}, rep.passed


HANDLERS = {
    "pseudospectrum": _cmd_pseudospectrum,
    "regularize": _cmd_regularize,
    "verify-theorem-b": _cmd_theorem_b,
    "tails": _cmd_tails,
    "jordan-scan": _cmd_jordan_scan,
    "bulk-profile": _cmd_bulk_profile,
    "sde-couple": _cmd_sde_couple,
    "sde-marginal": _cmd_sde_marginal,
    "optimize-st": _cmd_optimize_st,
}


def resolve_workers(cli_value: int | None, cfg: ExperimentConfig) -> int | None:
    if cli_value is not None:
        return cli_value
    if cfg.workers is not None:
        return cfg.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            k = int(env)
        except ValueError:
            raise ConfigError([f"{WORKERS_ENV}: must be a positive integer, got {env!r}"]) from None
        if k < 1:
            raise ConfigError([f"{WORKERS_ENV}: must be a positive integer, got {env!r}"])
        return k
    return None


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None, workers: int | None = None) -> RunManifest:
    """Execute ``cfg``, write its artifacts and ``manifest.json`` to ``out_dir``."""
    out = Path(out_dir or cfg.out or Path("runs") / cfg.command)
    workers = resolve_workers(workers, cfg)
    start = time.perf_counter()
    files, passed = HANDLERS[cfg.command](cfg, workers)
    elapsed = time.perf_counter() - start
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for name in sorted(files):
        data = files[name].encode("utf-8")
        (out / name).write_bytes(data)
        artifacts.append({"path": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    manifest = RunManifest(config=cfg.to_dict(), artifacts=artifacts, wall_clock_seconds=elapsed,
                           seed=cfg.seed, version=__version__, backend=BACKEND, passed=bool(passed))
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def load_config(path: str | Path, command: str | None = None) -> ExperimentConfig:
    """Read a config file, or the config echoed in a run manifest."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict) and "manifest_version" in obj and "config" in obj:
        text = json.dumps(obj["config"])
    return parse_config(text, command=command, base_dir=path.parent)


def _error(kind: str, **payload) -> None:
    sys.stderr.write(dump_json({"error": kind, **payload}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectral-reg", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config or a run manifest")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help=f"worker threads (fallback: ${WORKERS_ENV})")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, command=args.command)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError([f"seed: must be an unsigned 64-bit integer, got {args.seed}"])
            cfg.seed = args.seed
        if args.workers is not None and args.workers < 1:
            raise ConfigError([f"workers: must be a positive integer, got {args.workers}"])
        resolve_workers(args.workers, cfg)
    except ConfigError as exc:
        _error("ConfigError", violations=exc.violations)
        return 2
    except OSError as exc:
        _error(type(exc).__name__, message=str(exc))
        return 2
    try:
        manifest = run(cfg, args.out, args.workers)
    except Exception as exc:  # module failures surface as a JSON diagnostic
        _error(type(exc).__name__, message=str(exc), command=cfg.command)
        return 3
    sys.stdout.write(dump_json({"command": cfg.command, "passed": manifest.passed,
                                "artifacts": [a["path"] for a in manifest.artifacts]}))
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    sys.exit(main())
