"""Command line front end: reproducible phase/simulate/analyze/norm runs.

One JSON config drives everything; the effective config (after flag and
environment overrides) is archived next to the outputs together with the
tool version and seed, and every summary cites the archived file's hash.
Environment overrides exist only for the output directory (FACETSTACK_OUT)
and worker count (FACETSTACK_WORKERS).
"""

import argparse
import concurrent.futures
import hashlib
import json
import logging
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .lattice import HeightField, ModelParams, classify, extract_contours
from .metrics import StackPrediction, epigraph_distance
from .norms import WulffGeometry, build_wulff, make_norm, write_polygon_csv
from .phase import (a_thresholds_to_A, full_phase_diagram, solve_vp_delta,
                    write_branch_data, write_phase_csv, write_thresholds_csv)
from .sampling import ChainConfig, run_chain, write_records_csv

logger = logging.getLogger("facetstack.cli")


class ConfigError(Exception):
    """Invalid or missing configuration; exits with status 1."""


def _load_config(path: str) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _require(cfg: dict, key: str, kind, where: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required key {key!r}")
    value = cfg[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{where}.{key}: expected {kind}, got {type(value).__name__}")
    return value


def _norm_geometry(cfg: dict):
    section = _require(cfg, "norm", dict)
    family = _require(section, "family", str, "norm")
    params = section.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("norm.params must be an object")
    facets = section.get("facet_count", 1024)
    if not isinstance(facets, int) or facets < 16:
        raise ConfigError("norm.facet_count must be an integer >= 16")
    try:
        norm = make_norm(family, params)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"norm: {exc}") from exc
    return norm, build_wulff(norm, facets)


def _model_params(cfg: dict, excess: float = 0.0) -> ModelParams:
    section = _require(cfg, "model", dict)
    try:
        return ModelParams(n=_require(section, "n", int, "model"),
                           beta=_require(section, "beta", float, "model"),
                           p_v=_require(section, "p_v", float, "model"),
                           p_s=_require(section, "p_s", float, "model"),
                           excess=excess,
                           eps=section.get("eps", 0.25))
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def _archive(out_dir: str, cfg: dict, command: str, seed: int) -> str:
    """Write the effective config and run metadata; return the config hash."""
    os.makedirs(out_dir, exist_ok=True)
    blob = json.dumps(cfg, indent=1, sort_keys=True).encode()
    with open(os.path.join(out_dir, "config.json"), "wb") as fh:
        fh.write(blob)
    digest = hashlib.sha256(blob).hexdigest()
    meta = {"tool_version": __version__, "config_sha256": digest,
            "command": command, "seed": seed}
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    return digest


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# phase

def _phase_scales(cfg: dict, norm) -> Dict[str, float]:
    """Effective sigma and the lattice conversion factors, if derivable."""
    section = cfg.get("phase", {})
    tau_e = norm.raw_axis_value
    if "sigma" in section:
        sigma = float(section["sigma"])
        if sigma <= 0.0:
            raise ConfigError("phase.sigma must be positive")
        return {"sigma": sigma, "tau_e": tau_e, "gap": math.nan, "d_beta": math.nan}
    if "model" not in cfg:
        raise ConfigError("phase needs either phase.sigma or a model section")
    params = _model_params(cfg)
    d_beta = params.penalty_scale
    return {"sigma": tau_e * d_beta, "tau_e": tau_e,
            "gap": params.occupation_gap, "d_beta": d_beta}


def cmd_phase(cfg: dict, out_dir: str, seed: int, workers: int) -> int:
    norm, geometry = _norm_geometry(cfg)
    digest = _archive(out_dir, cfg, "phase", seed)
    section = cfg.get("phase", {})
    ell_max = section.get("ell_max", 8)
    if not isinstance(ell_max, int) or ell_max < 1:
        raise ConfigError("phase.ell_max must be a positive integer")
    scales = _phase_scales(cfg, norm)
    sigma, w = scales["sigma"], geometry.w

    if "A_values" in section:
        if math.isnan(scales["gap"]):
            raise ConfigError("phase.A_values needs a model section")
        a_vals = [float(x) for x in section["A_values"]]
        v_values = [a / (scales["gap"] * sigma) for a in a_vals]
    else:
        a_vals = None
        v_values = [float(x) for x in section.get("v_values", [])]

    write_phase_csv(os.path.join(out_dir, "phase.csv"), w, sigma, v_values,
                    ell_max=ell_max)
    diagram = full_phase_diagram(w, sigma, ell_max=ell_max)
    A_col = None
    if not math.isnan(scales["gap"]):
        A_col = a_thresholds_to_A(diagram, scales["gap"], scales["d_beta"],
                                  scales["tau_e"])
    write_thresholds_csv(os.path.join(out_dir, "thresholds.csv"), diagram, A_col)
    write_branch_data(os.path.join(out_dir, "branches.dat"), w, sigma, v_values,
                      ell_max=ell_max)
    _write_json(os.path.join(out_dir, "sweep.json"),
                {"config_sha256": digest, "w": w, "sigma": sigma,
                 "tau_e": scales["tau_e"], "k_star": diagram.k_star,
                 "v_values": v_values, "A_values": a_vals})
    return 0


# ---------------------------------------------------------------------------
# simulate

def _prediction_for(geometry: WulffGeometry, norm, params: ModelParams,
                    excess_a: float, ell_max: int) -> StackPrediction:
    tau_e = norm.raw_axis_value
    delta = excess_a / params.occupation_gap
    sol = solve_vp_delta(delta, params.penalty_scale, geometry.w, tau_e,
                         ell_max=ell_max)
    return StackPrediction.from_stack(geometry, sol.stack)


def _nested_large_loops(field: HeightField, eps: float) -> List[np.ndarray]:
    """Positive large contours, outermost first, rescaled to the unit box."""
    cs = classify(extract_contours(field), eps)
    loops = [c for c in cs.contours if c.label == "large" and c.sign > 0]
    loops.sort(key=lambda c: c.area, reverse=True)
    return [c.rescaled_vertices(field.n) for c in loops]


def _simulate_job(job: dict) -> dict:
    """One (A, replica) chain; runs inside a worker process."""
    try:
        params = ModelParams(**job["model"], excess=job["A"])
        config = ChainConfig(params=params, sweeps=job["sweeps"],
                             burn_in=job["burn_in"], thinning=job["thinning"],
                             seed=job["seed"], tail_mode=job["tail_mode"],
                             proposal_mix=job["proposal_mix"],
                             chain_index=job["chain_index"],
                             snapshot_every=job["snapshot_every"],
                             snapshot_dir=job["snapshot_dir"])
        records, final = run_chain(config)
        write_records_csv(job["records_path"], records)
        final.save_csv(job["final_path"])
        counts: Dict[int, int] = {}
        for r in records:
            counts[r.n_large] = counts.get(r.n_large, 0) + 1
        prediction = StackPrediction(
            polygons=tuple(np.array(p) for p in job["prediction"]),
            kind=job["prediction_kind"])
        loops = _nested_large_loops(final, params.eps)
        dist = epigraph_distance(loops, prediction, grid_n=job["grid_n"])
        return {"A": job["A"], "replica": job["replica"],
                "chain_index": job["chain_index"],
                "records": job["records_path"], "final": job["final_path"],
                "histogram": {str(k): v for k, v in sorted(counts.items())},
                "final_layers": len(loops), "epigraph_distance": dist}
    except Exception as exc:                    # sibling jobs keep running
        return {"A": job.get("A"), "replica": job.get("replica"),
                "error": f"{type(exc).__name__}: {exc}"}


def cmd_simulate(cfg: dict, out_dir: str, seed: int, workers: int) -> int:
    norm, geometry = _norm_geometry(cfg)
    params0 = _model_params(cfg)
    section = _require(cfg, "simulate", dict)
    a_values = [float(x) for x in _require(section, "A_values", list, "simulate")]
    replicas = section.get("replicas", 1)
    sweeps = _require(section, "sweeps", int, "simulate")
    burn_in = section.get("burn_in", sweeps // 4)
    thinning = section.get("thinning", 10)
    ell_max = section.get("ell_max", 8)
    grid_n = section.get("grid_n", 401)
    if not isinstance(replicas, int) or replicas < 1:
        raise ConfigError("simulate.replicas must be a positive integer")
    digest = _archive(out_dir, cfg, "simulate", seed)
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)

    jobs = []
    predictions = {}
    for ai, a_val in enumerate(a_values):
        pred = _prediction_for(geometry, norm, params0, a_val, ell_max)
        predictions[ai] = pred
        _write_json(os.path.join(out_dir, f"prediction_A{ai}.json"),
                    {"A": a_val, "kind": pred.kind, "layers": pred.layers,
                     "polygons": [p.tolist() for p in pred.polygons]})
        for rep in range(replicas):
            idx = ai * replicas + rep
            model_dict = {k: v for k, v in params0.to_json_dict().items()
                          if k != "excess"}
            jobs.append({"model": model_dict,
                         "A": a_val, "seed": seed, "chain_index": idx,
                         "replica": rep, "sweeps": sweeps, "burn_in": burn_in,
                         "thinning": thinning,
                         "tail_mode": section.get("tail_mode", "gaussian"),
                         "proposal_mix": section.get("proposal_mix", 0.2),
                         "snapshot_every": section.get("snapshot_every", 0),
                         "snapshot_dir": snap_dir,
                         "records_path": os.path.join(
                             out_dir, f"records_A{ai}_r{rep}.csv"),
                         "final_path": os.path.join(
                             snap_dir, f"final_A{ai}_r{rep}.csv"),
                         "prediction": [p.tolist() for p in predictions[ai].polygons],
                         "prediction_kind": predictions[ai].kind,
                         "grid_n": grid_n})

    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_job, jobs))
    else:
        results = [_simulate_job(job) for job in jobs]

    by_a: Dict[str, dict] = {}
    failures = 0
    for ai, a_val in enumerate(a_values):
        merged: Dict[str, int] = {}
        dists = []
        for res in results:
            if res.get("A") != a_val:
                continue
            if "error" in res:
                failures += 1
                continue
            for k, v in res["histogram"].items():
                merged[k] = merged.get(k, 0) + v
            dists.append(res["epigraph_distance"])
        total = sum(merged.values())
        modal = max(merged, key=merged.get) if merged else None
        by_a[f"{a_val:.12g}"] = {
            "histogram": merged,
            "modal_count": int(modal) if modal is not None else None,
            "modal_frequency": merged[modal] / total if merged else None,
            "epigraph_distances": dists,
            "median_epigraph": float(np.median(dists)) if dists else None,
            "predicted_layers": predictions[ai].layers,
            "predicted_kind": predictions[ai].kind,
        }
    _write_json(os.path.join(out_dir, "summary.json"),
                {"config_sha256": digest, "tool_version": __version__,
                 "seed": seed, "by_A": by_a, "failures": failures,
                 "jobs": results})
    return 0 if failures == 0 else 2


# ---------------------------------------------------------------------------
# analyze

def cmd_analyze(cfg: dict, out_dir: str, seed: int, workers: int) -> int:
    norm, geometry = _norm_geometry(cfg)
    params = _model_params(cfg)
    section = _require(cfg, "analyze", dict)
    snap_dir = _require(section, "snapshot_dir", str, "analyze")
    a_val = float(_require(section, "A", float, "analyze"))
    grid_n = section.get("grid_n", 401)
    ell_max = section.get("ell_max", 8)
    digest = _archive(out_dir, cfg, "analyze", seed)
    prediction = _prediction_for(geometry, norm, params, a_val, ell_max)

    entries = []
    skipped = 0
    names = sorted(f for f in os.listdir(snap_dir)) if os.path.isdir(snap_dir) else []
    for name in names:
        if not name.endswith(".csv"):
            continue
        path = os.path.join(snap_dir, name)
        try:
            field = HeightField.load_csv(path)
        except (ValueError, OSError) as exc:
            logger.warning("skipping %s: %s", path, exc)
            skipped += 1
            continue
        cs = classify(extract_contours(field), params.eps)
        loops = _nested_large_loops(field, params.eps)
        entries.append({"file": name,
                        "n_large": cs.counts()["large"],
                        "layers": len(loops),
                        "epigraph_distance": epigraph_distance(
                            loops, prediction, grid_n=grid_n)})
    hist: Dict[str, int] = {}
    for e in entries:
        key = str(e["layers"])
        hist[key] = hist.get(key, 0) + 1
    dists = sorted(e["epigraph_distance"] for e in entries)
    quantiles = {}
    if dists:
        quantiles = {"q25": float(np.quantile(dists, 0.25)),
                     "q50": float(np.quantile(dists, 0.50)),
                     "q75": float(np.quantile(dists, 0.75))}
    _write_json(os.path.join(out_dir, "report.json"),
                {"config_sha256": digest, "tool_version": __version__,
                 "snapshots": entries, "skipped": skipped,
                 "layer_histogram": hist, "epigraph_quantiles": quantiles,
                 "predicted_layers": prediction.layers})
    return 0


# ---------------------------------------------------------------------------
# norm dump

def cmd_norm(cfg: dict, out_dir: str, seed: int, workers: int) -> int:
    norm, geometry = _norm_geometry(cfg)
    digest = _archive(out_dir, cfg, "norm", seed)
    write_polygon_csv(os.path.join(out_dir, "wulff.csv"), geometry.vertices)
    _write_json(os.path.join(out_dir, "norm.json"),
                {"config_sha256": digest, "tool_version": __version__,
                 "family": norm.family_tag, "params": norm.params,
                 "axis_value": norm.raw_axis_value, "w": geometry.w,
                 "facet_count": geometry.facet_count})
    return 0


# ---------------------------------------------------------------------------

_COMMANDS = {"phase": cmd_phase, "simulate": cmd_simulate,
             "analyze": cmd_analyze, "norm": cmd_norm}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="facetstack",
        description="Facet-formation phase diagrams and SOS interface sampling.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="worker process count")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args.config)
        out_dir = (args.out or os.environ.get("FACETSTACK_OUT")
                   or cfg.get("out") or os.path.join("facetstack_out", args.command))
        workers_raw = (args.workers if args.workers is not None
                       else os.environ.get("FACETSTACK_WORKERS", cfg.get("workers", 1)))
        try:
            workers = max(1, int(workers_raw))
        except (TypeError, ValueError):
            raise ConfigError(f"workers must be an integer, got {workers_raw!r}")
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        cfg = dict(cfg)
        cfg["out"] = out_dir
        cfg["workers"] = workers
        cfg["seed"] = seed
        return _COMMANDS[args.command](cfg, out_dir, seed, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                      # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
