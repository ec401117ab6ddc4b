"""Seeded synthetic market data and training fixtures.

The bundled files under ``cryptocae/data`` are produced by
``python -m cryptocae.synthetic <out_dir>``; regenerating them with the same
code yields byte-identical output.
"""

from __future__ import annotations

import math
import sys
from datetime import date, timedelta
from importlib import resources
from pathlib import Path

import numpy as np

from .cae_model import ArchitectureSpec
from .market_data import CoinSeries, PriceRecord, parse_snapshot, serialize_snapshot

DATA_START = date(2013, 5, 15)

# symbol -> (first listed day, seed, start price, daily vol, mean log volume)
SNAPSHOT_COINS = {
    "BTC": (DATA_START, 11, 120.0, 0.040, 18.0),
    "LTC": (DATA_START, 12, 3.0, 0.055, 15.5),
    "USDT": (date(2015, 2, 25), 13, 1.0, 0.0, 17.0),
    "ETH": (date(2015, 8, 7), 14, 2.8, 0.060, 16.5),
    "BNB": (date(2017, 7, 25), 15, 0.11, 0.070, 14.0),
    "TRX": (date(2017, 9, 13), 16, 0.002, 0.075, 14.5),
}
SNAPSHOT_END = date(2019, 5, 15)

TOY_SPEC = ArchitectureSpec(input_length=32, input_channels=1, blocks=((8, 3), (8, 3)),
                            feature_dim=4, pool_factor=2)


def synthetic_coin(symbol, start, n_days, seed, start_price=100.0, daily_vol=0.04,
                   log_volume=16.0, digits=8):
    """Random-walk OHLCV history with ``n_days`` consecutive daily records.

    ``daily_vol == 0`` produces a pegged coin whose close wobbles within
    0.5% of ``start_price``.
    """
    rng = np.random.default_rng(seed)
    if daily_vol > 0:
        # GARCH-flavoured volatility clustering so returns are not iid
        vol = np.empty(n_days)
        shocks = rng.standard_normal(n_days)
        v = daily_vol ** 2
        for t in range(n_days):
            vol[t] = math.sqrt(v)
            v = 0.05 * daily_vol ** 2 + 0.85 * v + 0.10 * (vol[t] * shocks[t]) ** 2
        closes = start_price * np.exp(np.cumsum(vol * shocks))
    else:
        closes = start_price * (1.0 + 0.005 * np.tanh(rng.standard_normal(n_days)))
    opens = np.concatenate([[start_price], closes[:-1]])
    spread = np.abs(rng.normal(0.0, max(daily_vol, 0.002) / 2, size=(2, n_days)))
    volumes = np.exp(log_volume + 0.6 * rng.standard_normal(n_days))
    records = []
    for i in range(n_days):
        o = round(float(opens[i]), digits)
        c = round(float(closes[i]), digits)
        h = round(max(o, c) * math.exp(spread[0, i]), digits)
        low = round(min(o, c) * math.exp(-spread[1, i]), digits)
        h = max(h, o, c)
        low = min(low, o, c)
        records.append(PriceRecord(start + timedelta(days=i), o, h, low, c,
                                   round(float(volumes[i]), 2)))
    return CoinSeries(symbol, tuple(records))


def snapshot_coins(end=SNAPSHOT_END):
    coins = {}
    for sym, (start, seed, price, vol, logv) in SNAPSHOT_COINS.items():
        coins[sym] = synthetic_coin(sym, start, (end - start).days + 1, seed, price, vol, logv)
    return coins


def btc_synth():
    """2190 daily BTC-like records starting 2013-05-15."""
    return synthetic_coin("BTC", DATA_START, 2190, 7, 120.0, 0.04, 18.0)


def sinusoid_samples(n_samples=8, length=32, seed=3):
    """``[n_samples, length, 1]`` sinusoids with random integer frequency and phase."""
    rng = np.random.default_rng(seed)
    t = np.arange(length) / length
    freqs = rng.integers(1, 4, n_samples)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    amps = rng.uniform(0.5, 1.5, n_samples)
    return np.stack([a * np.sin(2 * np.pi * f * t + p) for a, f, p in zip(amps, freqs, phases)])[:, :, None]


def write_fixtures(out_dir):
    out = Path(out_dir)
    snap = out / "snapshot"
    snap.mkdir(parents=True, exist_ok=True)
    for sym, coin in snapshot_coins().items():
        (snap / f"{sym}.csv").write_text(serialize_snapshot(coin))
    (out / "btc_synth.csv").write_text(serialize_snapshot(btc_synth()))
    x = sinusoid_samples()
    lines = ["sample,t,value"]
    for i in range(x.shape[0]):
        for t in range(x.shape[1]):
            lines.append(f"{i},{t},{float(x[i, t, 0])!r}")
    (out / "sinusoids.csv").write_text("\n".join(lines) + "\n")


def data_path(name=""):
    """Filesystem path of a bundled fixture (``snapshot``, ``btc_synth.csv``, ...)."""
    return Path(str(resources.files("cryptocae") / "data" / name))


def load_btc_synth():
    return parse_snapshot(data_path("btc_synth.csv").read_bytes(), symbol="BTC")


def load_sinusoids():
    rows = np.loadtxt(data_path("sinusoids.csv"), delimiter=",", skiprows=1)
    n = int(rows[:, 0].max()) + 1
    length = int(rows[:, 1].max()) + 1
    x = np.zeros((n, length, 1))
    x[rows[:, 0].astype(int), rows[:, 1].astype(int), 0] = rows[:, 2]
    return x


if __name__ == "__main__":
    write_fixtures(sys.argv[1] if len(sys.argv) > 1 else data_path())
