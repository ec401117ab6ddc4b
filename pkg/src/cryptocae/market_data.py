"""OHLCV snapshot ingestion, derived channels, period windows and descriptive statistics."""

from __future__ import annotations

import calendar
import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    EmptyUniverseError,
    InsufficientDataError,
    ParseError,
    UndefinedStatisticError,
)

CSV_HEADER = ("date", "open", "high", "low", "close", "volume")
CHANNELS = ("returns", "hl_ratio", "volume")
DEFAULT_INPUT_LENGTH = 192

# Appendix universe, ordered by market share on 27 Oct 2019.
DEFAULT_SYMBOLS = (
    "BTC", "ETH", "XRP", "BCH", "USDT", "LTC", "EOS", "BNB", "BSV", "XLM",
    "TRX", "ADA", "XMR", "LINK", "HT", "MIOTA", "DASH", "NEO", "ATOM", "XTZ",
    "ETC", "MKR", "USDC", "CRO", "XEM", "ONT", "BAT", "DOGE", "ZEC", "VET",
    "TUSD", "ZRX", "QTUM", "DCR", "HOT", "RVN", "BTG", "LUNA", "OMG", "NANO",
)


@dataclass(frozen=True)
class PriceRecord:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        for name in ("open", "high", "low", "close", "volume"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.low > 0):
            raise DataError(f"{self.date}: low must be positive, got {self.low}")
        if self.high < self.low:
            raise DataError(f"{self.date}: high {self.high} < low {self.low}")
        for name in ("open", "close"):
            v = getattr(self, name)
            if not (self.low <= v <= self.high):
                raise DataError(f"{self.date}: {name} {v} outside [low, high]")
        if self.volume < 0:
            raise DataError(f"{self.date}: negative volume {self.volume}")


@dataclass(frozen=True)
class CoinSeries:
    symbol: str
    records: tuple[PriceRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.date <= prev.date:
                raise DataError(
                    f"{self.symbol}: dates not strictly increasing at {cur.date}")

    def __len__(self):
        return len(self.records)

    @property
    def dates(self) -> list[date]:
        return [r.date for r in self.records]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def between(self, start: date, end: date) -> "CoinSeries":
        """Records with ``start <= date <= end``."""
        return CoinSeries(self.symbol,
                          tuple(r for r in self.records if start <= r.date <= end))


@dataclass(frozen=True)
class DatedSeries:
    dates: tuple[date, ...]
    values: np.ndarray

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class PeriodWindow:
    index: int
    start_date: date
    end_date: date

    def __post_init__(self):
        if self.index < 0:
            raise ConfigurationError("window index must be >= 0")
        if self.end_date <= self.start_date:
            raise ConfigurationError("window end must be after start")

    @property
    def n_days(self) -> int:
        return (self.end_date - self.start_date).days + 1

    def days(self) -> list[date]:
        return [self.start_date + timedelta(days=i) for i in range(self.n_days)]

    def label(self) -> str:
        return f"{self.start_date:%d/%m/%Y} -- {self.end_date:%d/%m/%Y}"

    def to_dict(self) -> dict:
        return {"index": self.index, "start_date": self.start_date.isoformat(),
                "end_date": self.end_date.isoformat()}


@dataclass(frozen=True)
class FeatureTensor:
    symbols: tuple[str, ...]
    window: PeriodWindow
    channels: tuple[str, ...]
    data: np.ndarray
    norm_params: dict = field(default_factory=dict)

    @property
    def valid_length(self) -> int:
        return self.norm_params["valid_length"]

    def to_json(self) -> str:
        meta = {
            "symbols": list(self.symbols),
            "window": self.window.to_dict(),
            "channels": list(self.channels),
            "shape": list(self.data.shape),
            "norm_params": self.norm_params,
        }
        return json.dumps(meta, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """Coin-major flat CSV of ``data``: one row per (symbol, day)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["symbol", "day", *self.channels])
        for i, sym in enumerate(self.symbols):
            for t in range(self.data.shape[1]):
                writer.writerow([sym, t, *(repr(float(v)) for v in self.data[i, t])])
        return buf.getvalue()

    def write(self, json_path, csv_path):
        Path(json_path).write_text(self.to_json() + "\n")
        Path(csv_path).write_text(self.to_csv())

    @classmethod
    def read(cls, json_path, csv_path) -> "FeatureTensor":
        meta = json.loads(Path(json_path).read_text())
        w = meta["window"]
        window = PeriodWindow(w["index"], date.fromisoformat(w["start_date"]),
                              date.fromisoformat(w["end_date"]))
        data = np.zeros(meta["shape"], dtype=np.float64)
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            sym_index = {s: i for i, s in enumerate(meta["symbols"])}
            for row in reader:
                data[sym_index[row[0]], int(row[1])] = [float(v) for v in row[2:]]
        return cls(tuple(meta["symbols"]), window, tuple(meta["channels"]), data,
                   meta["norm_params"])


def _parse_float(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"unparsable {name} {text!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {name} {text!r}", line)
    return value


def parse_snapshot(stream: IO[bytes] | IO[str] | bytes | str, symbol: str = "") -> CoinSeries:
    """Parse a ``date,open,high,low,close,volume`` CSV into a date-sorted CoinSeries.

    Accepts a binary or text stream, or the raw CSV content.
    """
    if isinstance(stream, bytes):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        raw = stream.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    text = text.lstrip("﻿")

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty snapshot", 1) from None
    if tuple(h.strip().lower() for h in header) != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", 1)

    records = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", line)
        try:
            day = date.fromisoformat(row[0].strip())
        except ValueError:
            raise ParseError(f"unparsable date {row[0]!r}", line) from None
        values = [_parse_float(v, name, line) for v, name in zip(row[1:], CSV_HEADER[1:])]
        if day in records:
            raise DataError(f"duplicate date {day} (line {line})")
        records[day] = PriceRecord(day, *values)
    return CoinSeries(symbol, tuple(records[d] for d in sorted(records)))


def serialize_snapshot(series: CoinSeries) -> str:
    """Canonical CSV form; ``repr`` keeps floats round-trip exact."""
    lines = [",".join(CSV_HEADER)]
    for r in series.records:
        lines.append(",".join([r.date.isoformat(), repr(r.open), repr(r.high),
                               repr(r.low), repr(r.close), repr(r.volume)]))
    return "\n".join(lines) + "\n"


def load_snapshot_dir(path, symbols: Iterable[str] | None = None) -> dict[str, CoinSeries]:
    """Load ``<SYMBOL>.csv`` files from a snapshot directory.

    Symbols without a file are skipped when an explicit list is given.
    """
    path = Path(path)
    if symbols is None:
        files = sorted(path.glob("*.csv"))
    else:
        files = [path / f"{s}.csv" for s in symbols]
    out = {}
    for f in files:
        if not f.exists():
            continue
        with open(f, "rb") as fh:
            out[f.stem] = parse_snapshot(fh, symbol=f.stem)
    return out


def log_returns(series: CoinSeries) -> DatedSeries:
    """Daily log returns of the close, dated by the later day."""
    if len(series) < 2:
        raise InsufficientDataError(
            f"{series.symbol}: need at least 2 records for returns, got {len(series)}")
    close = series.column("close")
    values = np.diff(np.log(close))
    return DatedSeries(tuple(series.dates[1:]), values)


def high_low_ratio(series: CoinSeries) -> DatedSeries:
    high = series.column("high")
    low = series.column("low")
    if np.any(low <= 0):
        raise DataError(f"{series.symbol}: high/low ratio undefined for non-positive low")
    return DatedSeries(tuple(series.dates), high / low)


def add_months(day: date, months: int) -> date:
    """Calendar-month addition, clamping the day to the target month's length."""
    total = day.year * 12 + (day.month - 1) + months
    year, month = divmod(total, 12)
    if not (date.min.year <= year <= date.max.year):
        raise OverflowError(f"{day} + {months} months is out of range")
    last = calendar.monthrange(year, month + 1)[1]
    return date(year, month + 1, min(day.day, last))


def make_periods(anchor: date, months_per_period: int = 6, count: int = 12) -> list[PeriodWindow]:
    """Consecutive abutting windows starting at ``anchor``.

    Window ``i`` ends on ``anchor + (i+1)*months`` and every window after the
    first starts the day after its predecessor ends, so an anchor of
    2013-05-15 yields 2013-05-15..2013-11-15, 2013-11-16..2014-05-15, ...
    """
    if count < 1 or months_per_period < 1:
        raise ConfigurationError("count and months_per_period must be >= 1")
    windows = []
    start = anchor
    for i in range(count):
        try:
            end = add_months(anchor, (i + 1) * months_per_period)
            windows.append(PeriodWindow(i, start, end))
            start = end + timedelta(days=1)
        except OverflowError as exc:
            raise OverflowError(f"period {i} is out of calendar range") from exc
    return windows


def _zscore(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    if std == 0.0:
        # constant channel (e.g. a pegged stablecoin): centred only
        return values - mean, mean, 0.0
    return (values - mean) / std, mean, std


def coin_channels(series: CoinSeries, window: PeriodWindow,
                  channels: Sequence[str]) -> np.ndarray | None:
    """Raw ``[day, channel]`` matrix for one coin, or None if not eligible.

    A coin is eligible when it has a record for every calendar day of the
    window.  All channels are aligned on the days that have a return inside
    the window, i.e. the window's days after the first.
    """
    sub = series.between(window.start_date, window.end_date)
    if len(sub) != window.n_days:
        return None
    cols = []
    for ch in channels:
        if ch == "returns":
            cols.append(log_returns(sub).values)
        elif ch == "hl_ratio":
            cols.append(high_low_ratio(sub).values[1:])
        elif ch == "volume":
            cols.append(np.log1p(sub.column("volume")[1:]))
        else:
            raise ConfigurationError(f"unknown channel {ch!r}")
    return np.stack(cols, axis=1)


def build_feature_tensor(coins: Sequence[CoinSeries], window: PeriodWindow,
                         channels: Sequence[str] = CHANNELS,
                         input_length: int = DEFAULT_INPUT_LENGTH) -> FeatureTensor:
    """Stack eligible coins into a z-scored, right-zero-padded ``[coin, day, channel]`` array."""
    channels = tuple(channels)
    if not channels:
        raise ConfigurationError("at least one channel is required")
    for ch in channels:
        if ch not in CHANNELS:
            raise ConfigurationError(f"unknown channel {ch!r}")
    valid_length = window.n_days - 1
    if valid_length > input_length:
        raise ConfigurationError(
            f"window has {valid_length} usable days but the network input length is {input_length}")

    symbols, rows, stats = [], [], {}
    for coin in coins:
        raw = coin_channels(coin, window, channels)
        if raw is None:
            continue
        padded = np.zeros((input_length, len(channels)))
        coin_stats = {}
        for c, ch in enumerate(channels):
            z, mean, std = _zscore(raw[:, c])
            padded[:valid_length, c] = z
            coin_stats[ch] = {"mean": mean, "std": std}
        symbols.append(coin.symbol)
        rows.append(padded)
        stats[coin.symbol] = coin_stats
    if not symbols:
        raise EmptyUniverseError(f"no coin has full coverage of window {window.label()}")

    data = np.stack(rows)
    if not np.all(np.isfinite(data)):
        raise DataError("non-finite values in feature tensor")
    norm_params = {"valid_length": valid_length, "input_length": input_length,
                   "volume_transform": "log1p", "per_coin": stats}
    return FeatureTensor(tuple(symbols), window, channels, data, norm_params)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("pearson needs two 1-D series of equal length")
    if len(a) < 2:
        raise InsufficientDataError("pearson needs at least 2 observations")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.dot(da, da))
    sbb = float(np.dot(db, db))
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedStatisticError("correlation undefined for a zero-variance series")
    r = float(np.dot(da, db)) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def rolling_volatility(returns: DatedSeries, window_days: int = 30,
                       periods_per_year: int = 365) -> DatedSeries:
    """Annualized trailing-window volatility in percent.

    Day ``t`` uses the sample standard deviation of returns ``t-window+1 .. t``.
    """
    values = np.asarray(returns.values, dtype=np.float64)
    if window_days < 2:
        raise ConfigurationError("window_days must be >= 2")
    if len(values) < window_days:
        raise InsufficientDataError(
            f"need {window_days} returns for rolling volatility, got {len(values)}")
    windows = np.lib.stride_tricks.sliding_window_view(values, window_days)
    std = windows.std(axis=1, ddof=1)
    return DatedSeries(tuple(returns.dates[window_days - 1:]),
                       std * math.sqrt(periods_per_year) * 100.0)
