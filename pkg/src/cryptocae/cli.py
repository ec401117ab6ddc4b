"""Command-line entry point: ``cryptocae <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from datetime import date
from pathlib import Path

import numpy as np

from .cae_model import CAEModel, encode
from .config import PipelineConfig
from .efficiency import efficiency_table, return_samples
from .errors import ConfigurationError, CryptoCAEError, DataError, UndefinedStatisticError
from .feature_analysis import LatentMatrix, cluster_csv, cluster_summary
from .fetch import cmd_fetch
from .fsutil import write_atomic
from .market_data import (DEFAULT_SYMBOLS, FeatureTensor, PeriodWindow, load_snapshot_dir,
                          log_returns, make_periods, pearson, rolling_volatility)
from .pipeline import (EXIT_FAILURE, cluster_latent, latent_csv, read_latent_csv, run_pipeline)

log = logging.getLogger("cryptocae")


def _load_config(args):
    if args.config is None:
        return None
    cfg = PipelineConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _snapshot_dir(args, cfg):
    if getattr(args, "snapshot", None):
        return Path(args.snapshot)
    if cfg is not None:
        return Path(cfg.snapshot_dir)
    raise ConfigurationError("a snapshot directory is required (--snapshot or --config)")


def _window(start, end, index=0):
    return PeriodWindow(index, date.fromisoformat(start), date.fromisoformat(end))


def _closes_in_window(coins, symbol, window):
    if symbol not in coins:
        raise DataError(f"no snapshot for {symbol}")
    sub = coins[symbol].between(window.start_date, window.end_date)
    if len(sub) != window.n_days:
        raise DataError(f"{symbol} has {len(sub)} of {window.n_days} days in {window.label()}")
    return sub.column("close")


def correlation_report(coins, sym_a, sym_b, window, split_months=None):
    """Pearson correlation of closing prices over ``window`` and optional sub-periods."""
    a = _closes_in_window(coins, sym_a, window)
    b = _closes_in_window(coins, sym_b, window)
    report = {"symbols": [sym_a, sym_b], "window": window.to_dict(), "pearson": pearson(a, b),
              "subperiods": []}
    if split_months:
        start = window.start_date
        for w in make_periods(start, split_months, 1000):
            if w.start_date > window.end_date:
                break
            end = min(w.end_date, window.end_date)
            lo = (w.start_date - start).days
            hi = (end - start).days + 1
            try:
                r = pearson(a[lo:hi], b[lo:hi])
            except (UndefinedStatisticError, DataError):
                r = None
            report["subperiods"].append({"start_date": w.start_date.isoformat(),
                                         "end_date": end.isoformat(), "pearson": r})
    return report


def _cmd_run(args):
    cfg = _load_config(args)
    if cfg is None:
        raise ConfigurationError("run requires --config")
    manifest, code = run_pipeline(cfg, args.out or "cryptocae-out")
    for p in manifest["periods"]:
        print(f"period {p['index']:2d} {p['window']['start_date']}..{p['window']['end_date']}: "
              f"{p['status']}" + (f" ({p['error']})" if p["error"] else ""))
    return code


def _cmd_fetch(args):
    symbols = [s for s in args.symbols.split(",") if s] if args.symbols is not None \
        else list(DEFAULT_SYMBOLS)
    out = Path(args.out or "snapshot")
    result = cmd_fetch(args.url_template, symbols, out, retries=args.retries,
                       backoff=args.backoff, min_interval=args.min_interval)
    write_atomic(out / "fetch_manifest.json",
                 json.dumps(result.manifest(), indent=2, sort_keys=True) + "\n")
    for sym, err in result.failures.items():
        print(f"{sym}: {err}", file=sys.stderr)
    print(f"fetched {len(result.files)} of {len(symbols)} symbols")
    return result.exit_code


def _cmd_encode(args):
    model = CAEModel.load(args.model)
    tensor_json = Path(args.tensor)
    tensor = FeatureTensor.read(tensor_json, tensor_json.with_suffix(".csv"))
    latent = LatentMatrix(tensor.symbols, encode(model, tensor.data))
    text = latent_csv(latent)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_cluster(args):
    cfg = _load_config(args)
    latent = read_latent_csv(args.latent)
    c = cfg.cluster if cfg is not None else None
    k = args.k if args.k is not None else (c.k if c else "auto")
    k = k if k == "auto" else int(k)
    seed = args.seed if args.seed is not None else (c.seed if c else 0)
    assignment, embedding = cluster_latent(latent, k, c.k_min if c else 2, c.k_max if c else 6,
                                           seed, c.restarts if c else 10)
    out = Path(args.out or ".")
    write_atomic(out / "clusters.csv", cluster_csv(latent.symbols, assignment, embedding))
    write_atomic(out / "clusters.json", cluster_summary(assignment, embedding) + "\n")
    print(f"k={assignment.k} inertia={assignment.inertia:.6g}")
    return 0


def _cmd_efficiency(args):
    cfg = _load_config(args)
    snap = _snapshot_dir(args, cfg)
    symbols = args.symbols.split(",") if args.symbols else (cfg.symbols if cfg else None)
    coins = load_snapshot_dir(snap, symbols)
    if symbols is not None:
        missing = [s for s in symbols if s not in coins]
    else:
        missing = []
    series = [coins[s] for s in (symbols or sorted(coins)) if s in coins]
    if args.window:
        windows = [_window(*w.split(":"), index=i) for i, w in enumerate(args.window)]
    elif cfg is not None:
        windows = make_periods(cfg.anchor_date, cfg.period_months, cfg.period_count)
    else:
        raise ConfigurationError("efficiency needs --window or --config")
    samples = return_samples(series, windows)
    samples += [(s, w, None) for w in windows for s in missing]
    t = cfg.tests if cfg is not None else None
    kwargs = {} if t is None else dict(max_lag=t.max_lag, dims=t.dims,
                                       distance_mult=t.distance_mult, min_length=t.min_length)
    table = efficiency_table(samples, **kwargs)
    out = Path(args.out or ".")
    write_atomic(out / "efficiency.csv", table.to_csv())
    write_atomic(out / "efficiency.json", table.to_json() + "\n")
    sys.stdout.write(table.to_csv())
    return 0


def _cmd_correlate(args):
    cfg = _load_config(args)
    coins = load_snapshot_dir(_snapshot_dir(args, cfg), [args.symbol_a, args.symbol_b])
    report = correlation_report(coins, args.symbol_a, args.symbol_b,
                                _window(args.start, args.end), args.split_months)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        write_atomic(args.out, text)
    print(f"pearson({args.symbol_a}, {args.symbol_b}) = {report['pearson']:.4f}")
    return 0


def _cmd_volatility(args):
    cfg = _load_config(args)
    coins = load_snapshot_dir(_snapshot_dir(args, cfg), [args.symbol])
    if args.symbol not in coins:
        raise DataError(f"no snapshot for {args.symbol}")
    vol = rolling_volatility(log_returns(coins[args.symbol]), args.window_days, args.annualization)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "volatility_pct"])
    for d, v in zip(vol.dates, vol.values):
        w.writerow([d.isoformat(), repr(float(v))])
    if args.out:
        write_atomic(args.out, buf.getvalue())
    since = date.fromisoformat(args.since) if args.since else None
    vals = [v for d, v in zip(vol.dates, vol.values) if since is None or d >= since]
    if vals:
        print(f"mean {args.window_days}-day annualized volatility of {args.symbol}: "
              f"{float(np.mean(vals)):.1f}%")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config (JSON)")
    common.add_argument("--seed", type=int, help="override training and clustering seeds")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cryptocae", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fetch", parents=[common], help="download per-symbol CSV snapshots")
    s.add_argument("--url-template", required=True,
                   help="URL with a {symbol} placeholder, e.g. http://host/{symbol}.csv")
    s.add_argument("--symbols", help="comma-separated symbols (default: the 40-coin universe)")
    s.add_argument("--retries", type=int, default=3)
    s.add_argument("--backoff", type=float, default=0.5)
    s.add_argument("--min-interval", type=float, default=1.0,
                   help="minimum seconds between requests to one host")
    s.set_defaults(func=_cmd_fetch)

    s = sub.add_parser("run", parents=[common], help="run the full per-period pipeline")
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("encode", parents=[common], help="latent features from a saved model")
    s.add_argument("--model", required=True, help="model checkpoint directory")
    s.add_argument("--tensor", required=True, help="tensor JSON sidecar (CSV alongside)")
    s.set_defaults(func=_cmd_encode)

    s = sub.add_parser("cluster", parents=[common], help="k-means + PCA on a latent CSV")
    s.add_argument("--latent", required=True)
    s.add_argument("--k", help="cluster count or 'auto'")
    s.set_defaults(func=_cmd_cluster)

    s = sub.add_parser("efficiency", parents=[common], help="Ljung-Box / runs / BDS table")
    s.add_argument("--snapshot")
    s.add_argument("--symbols")
    s.add_argument("--window", action="append", metavar="START:END",
                   help="ISO date range; repeatable (default: config periods)")
    s.set_defaults(func=_cmd_efficiency)

    s = sub.add_parser("correlate", parents=[common], help="Pearson correlation of closing prices")
    s.add_argument("symbol_a")
    s.add_argument("symbol_b")
    s.add_argument("--start", required=True)
    s.add_argument("--end", required=True)
    s.add_argument("--split-months", type=int, help="also report consecutive sub-periods")
    s.add_argument("--snapshot")
    s.set_defaults(func=_cmd_correlate)

    s = sub.add_parser("volatility", parents=[common], help="rolling annualized volatility")
    s.add_argument("symbol")
    s.add_argument("--window-days", type=int, default=30)
    s.add_argument("--annualization", type=int, default=365)
    s.add_argument("--since", help="average only from this date")
    s.add_argument("--snapshot")
    s.set_defaults(func=_cmd_volatility)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CryptoCAEError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
