"""Per-period pipeline: tensor -> CAE training -> latent features -> clusters/PCA -> efficiency tests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cae_model import build, encode, train
from .config import PipelineConfig
from .efficiency import efficiency_table, return_samples
from .errors import CryptoCAEError, EmptyUniverseError
from .fsutil import write_atomic
from .feature_analysis import (LatentMatrix, cluster_csv, cluster_summary, kmeans, pca_2d,
                               select_k)
from .market_data import PeriodWindow, build_feature_tensor, load_snapshot_dir, make_periods

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_PARTIAL = 0, 1, 2


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    return sha256_bytes(Path(path).read_bytes())


def latent_csv(latent: LatentMatrix):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["symbol", *(f"h{i}" for i in range(latent.rows.shape[1]))])
    for sym, row in zip(latent.symbols, latent.rows):
        w.writerow([sym, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def read_latent_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return LatentMatrix(tuple(r[0] for r in rows[1:]),
                        np.array([[float(v) for v in r[1:]] for r in rows[1:]]))


def cluster_latent(latent: LatentMatrix, k="auto", k_min=2, k_max=6, seed=0, restarts=10):
    """Fixed or silhouette-selected K-means plus the 2-D PCA embedding."""
    n = len(latent.symbols)
    if k == "auto":
        k_sel = select_k(latent, range(k_min, k_max + 1), seed, restarts) if n >= 3 else 1
    else:
        k_sel = min(int(k), n)
    assignment = kmeans(latent, k_sel, seed, restarts)
    embedding = pca_2d(latent)
    return assignment, embedding


def _timed(timings, stage, fn, *args, **kwargs):
    t0 = time.perf_counter()
    result = fn(*args, **kwargs)
    timings[stage] = time.perf_counter() - t0
    return result


def run_period(config: PipelineConfig, window: PeriodWindow, out_dir):
    """Run every stage for one window; returns the manifest entry (never raises on stage errors)."""
    out_dir = Path(out_dir)
    entry = {"index": window.index, "window": window.to_dict(), "status": "ok",
             "error": None, "outputs": {}, "timings": {}, "symbols": []}
    timings = entry["timings"]
    written = {}

    def emit(name, data):
        path = out_dir / name
        write_atomic(path, data)
        written[name] = sha256_file(path)

    try:
        coins = list(load_snapshot_dir(config.snapshot_dir, config.symbols).values())

        samples = return_samples(coins, [window])
        t = config.tests
        table = _timed(timings, "efficiency", efficiency_table, samples, t.max_lag, t.dims,
                       t.distance_mult, t.min_length)
        emit("efficiency.csv", table.to_csv())
        emit("efficiency.json", table.to_json() + "\n")

        tensor = _timed(timings, "tensor", build_feature_tensor, coins, window, config.channels,
                        config.architecture.input_length)
        entry["symbols"] = list(tensor.symbols)
        emit("tensor.json", tensor.to_json() + "\n")
        emit("tensor.csv", tensor.to_csv())

        model = build(config.architecture, config.train.seed)
        report = _timed(timings, "train", train, model, tensor, config.train)
        model.save(out_dir / "model")
        for f in sorted((out_dir / "model").iterdir()):
            written[f"model/{f.name}"] = sha256_file(f)
        emit("train_report.csv", report.to_csv())

        latent = LatentMatrix(tensor.symbols, _timed(timings, "encode", encode, model, tensor.data))
        emit("latent.csv", latent_csv(latent))

        c = config.cluster
        assignment, embedding = _timed(timings, "cluster", cluster_latent, latent, c.k, c.k_min,
                                       c.k_max, c.seed, c.restarts)
        emit("clusters.csv", cluster_csv(latent.symbols, assignment, embedding))
        emit("clusters.json", cluster_summary(assignment, embedding, window=window.to_dict(),
                                              final_loss=report.final_loss) + "\n")
    except EmptyUniverseError as exc:
        entry["status"] = "empty_universe"
        entry["error"] = str(exc)
    except (CryptoCAEError, ValueError, OSError) as exc:
        log.exception("period %d failed", window.index)
        entry["status"] = "error"
        entry["error"] = f"{type(exc).__name__}: {exc}"
    entry["outputs"] = {f"{out_dir.name}/{k}": v for k, v in sorted(written.items())}
    return entry


def _period_job(args):
    config, window, out_dir = args
    return run_period(config, window, out_dir)


def run_pipeline(config: PipelineConfig, out_dir):
    """Run all periods and write ``manifest.json``; returns ``(manifest, exit_code)``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snap = Path(config.snapshot_dir)
    if not snap.is_dir():
        raise CryptoCAEError(f"snapshot directory {snap} does not exist")

    write_atomic(out_dir / "config.json", json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    inputs = {p.name: sha256_file(p) for p in sorted(snap.glob("*.csv"))
              if config.symbols is None or p.stem in config.symbols}
    windows = make_periods(config.anchor_date, config.period_months, config.period_count)
    jobs = [(config, w, out_dir / f"period_{w.index:02d}") for w in windows]

    t0 = time.perf_counter()
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            periods = list(pool.map(_period_job, jobs))
    else:
        periods = [_period_job(j) for j in jobs]

    outputs = {"config.json": sha256_file(out_dir / "config.json")}
    for p in periods:
        outputs.update(p["outputs"])
    failed = [p["index"] for p in periods if p["status"] != "ok"]
    code = EXIT_OK if not failed else (EXIT_FAILURE if len(failed) == len(periods) else EXIT_PARTIAL)
    manifest = {
        "tool": "cryptocae",
        "version": __version__,
        "config_hash": config.digest(),
        "config": json.loads(config.canonical_json()),
        "inputs": inputs,
        "periods": periods,
        "outputs": dict(sorted(outputs.items())),
        "failed_periods": failed,
        "exit_code": code,
        "wall_time": time.perf_counter() - t0,
    }
    write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest, code
