"""Download per-symbol OHLCV CSV snapshots from a configurable HTTP endpoint."""

from __future__ import annotations

import logging
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlsplit

from .errors import ConfigurationError, CryptoCAEError, FetchError
from .fsutil import write_atomic
from .market_data import parse_snapshot
from .pipeline import sha256_bytes

log = logging.getLogger(__name__)


class RateLimiter:
    """Enforces a minimum interval between requests to the same host."""

    def __init__(self, min_interval, clock=time.monotonic, sleep=time.sleep):
        self.min_interval = min_interval
        self.clock = clock
        self.sleep = sleep
        self._last = {}

    def wait(self, host):
        last = self._last.get(host)
        if last is not None:
            delay = self.min_interval - (self.clock() - last)
            if delay > 0:
                self.sleep(delay)
        self._last[host] = self.clock()


@dataclass
class FetchResult:
    files: dict = field(default_factory=dict)      # symbol -> {"path", "sha256", "url"}
    failures: dict = field(default_factory=dict)   # symbol -> error message

    @property
    def exit_code(self):
        if not self.failures:
            return 0
        return 1 if not self.files else 2

    def manifest(self):
        return {"files": self.files, "failures": self.failures}


def _get(url, timeout):
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def fetch_symbol(url, retries=3, backoff=0.5, timeout=30.0, limiter=None, sleep=time.sleep):
    """GET ``url`` with exponential backoff; raises FetchError after the last attempt."""
    host = urlsplit(url).netloc
    last_exc = None
    for attempt in range(retries + 1):
        if limiter is not None:
            limiter.wait(host)
        try:
            return _get(url, timeout)
        except (urllib.error.URLError, OSError) as exc:
            last_exc = exc
            if attempt < retries:
                sleep(backoff * 2 ** attempt)
    raise FetchError(f"{url}: {last_exc}")


def cmd_fetch(url_template, symbols, out_dir, retries=3, backoff=0.5, min_interval=1.0,
              timeout=30.0) -> FetchResult:
    """Fetch ``url_template.format(symbol=...)`` for each symbol into ``out_dir/<SYMBOL>.csv``.

    Payloads are validated by parsing before they are written.  A failure for
    one symbol is recorded and the remaining symbols are still fetched.
    """
    if "{symbol}" not in url_template:
        raise ConfigurationError("url template must contain a {symbol} placeholder")
    out_dir = Path(out_dir)
    result = FetchResult()
    limiter = RateLimiter(min_interval)
    for sym in symbols:
        url = url_template.format(symbol=sym)
        try:
            payload = fetch_symbol(url, retries, backoff, timeout, limiter)
            parse_snapshot(payload, symbol=sym)
        except CryptoCAEError as exc:
            log.warning("fetch %s failed: %s", sym, exc)
            result.failures[sym] = f"{type(exc).__name__}: {exc}"
            continue
        path = out_dir / f"{sym}.csv"
        write_atomic(path, payload)
        result.files[sym] = {"path": path.name, "sha256": sha256_bytes(payload), "url": url}
    return result
