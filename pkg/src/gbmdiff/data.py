"""Price ingestion, log-returns, windowing, normalization, persistence.

The training representation is the anchored log-price window: pooled
log-returns are scaled to unit variance by a single global factor, then
cumulative-summed with a zero first element. The global scale is stored
in the dataset manifest so generated windows can be mapped back to raw
return units.
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
import requests

from .container import read_array_container, write_array_container
from .errors import ConfigError, DataError

__all__ = [
    "PriceSeries",
    "ReturnWindow",
    "DatasetManifest",
    "ingest_csv",
    "log_returns",
    "filter_by_history",
    "make_windows",
    "window_count",
    "normalize",
    "denormalize",
    "save_dataset",
    "load_dataset",
    "fetch_prices",
    "is_clean_ticker",
]

DAYS_PER_YEAR = 365.25
_TICKER_RE = re.compile(r"^[A-Z0-9]+$")


@dataclass
class PriceSeries:
    ticker: str
    dates: np.ndarray  # datetime64[ns], strictly increasing
    adj_close: np.ndarray  # strictly positive floats

    def __len__(self):
        return len(self.adj_close)


@dataclass(frozen=True)
class ReturnWindow:
    values: np.ndarray
    source_ticker: str
    start_index: int


@dataclass
class DatasetManifest:
    length: int
    stride: int
    n_windows: int
    global_scale: float
    sources: dict = field(default_factory=dict)  # ticker -> window count
    checksum: str = ""


def is_clean_ticker(name: str) -> bool:
    """Tickers with characters outside A-Z0-9 (e.g. BRK.B) are skipped."""
    return bool(_TICKER_RE.match(name))


def _build_series(ticker, dates, prices, origin) -> PriceSeries:
    dates = pd.to_datetime(pd.Series(dates), errors="coerce")
    prices = pd.to_numeric(pd.Series(prices), errors="coerce")
    keep = dates.notna() & prices.notna() & (prices > 0.0)
    dates, prices = dates[keep], prices[keep]
    if len(prices) < 2:
        raise DataError(f"{origin}: fewer than 2 valid rows after cleaning")
    order = np.argsort(dates.to_numpy(), kind="stable")
    date_arr = dates.to_numpy()[order]
    price_arr = prices.to_numpy(dtype=float)[order]
    if pd.Series(date_arr).duplicated().any():
        dupes = pd.Series(date_arr)[pd.Series(date_arr).duplicated()].unique()
        raise DataError(f"{origin}: duplicate dates, e.g. {pd.Timestamp(dupes[0]).date()}")
    return PriceSeries(ticker=ticker, dates=date_arr, adj_close=price_arr)


def ingest_csv(path) -> PriceSeries:
    """Read a `date,adj_close` CSV into a cleaned, date-sorted series."""
    try:
        frame = pd.read_csv(path, dtype=str)
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise DataError(f"{path}: unreadable CSV: {exc}") from exc
    missing = {"date", "adj_close"} - set(frame.columns)
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    ticker = os.path.splitext(os.path.basename(str(path)))[0]
    return _build_series(ticker, frame["date"], frame["adj_close"], path)


def log_returns(series: PriceSeries) -> np.ndarray:
    """r_t = log(p_t / p_{t-1}); length n-1."""
    if len(series) < 2:
        raise DataError(f"{series.ticker}: need at least 2 prices for returns")
    return np.diff(np.log(series.adj_close))


def filter_by_history(series: PriceSeries, min_years: float = 40.0) -> bool:
    """True iff the date span strictly exceeds min_years (365.25-day years)."""
    span_days = (series.dates[-1] - series.dates[0]) / np.timedelta64(1, "D")
    return bool(span_days > min_years * DAYS_PER_YEAR)


def window_count(n: int, length: int, stride: int) -> int:
    return 0 if n < length else (n - length) // stride + 1


def make_windows(returns, length: int = 2048, stride: int = 400,
                 ticker: str = "") -> list[ReturnWindow]:
    """Sliding windows at offsets 0, stride, 2*stride, ... of exact length."""
    if length < 1 or stride < 1:
        raise ValueError("length and stride must be positive")
    returns = np.asarray(returns, dtype=float)
    out = []
    for k in range(window_count(len(returns), length, stride)):
        start = k * stride
        out.append(
            ReturnWindow(
                values=returns[start : start + length].copy(),
                source_ticker=ticker,
                start_index=start,
            )
        )
    return out


def _stack(windows) -> np.ndarray:
    if isinstance(windows, np.ndarray):
        arr = np.asarray(windows, dtype=float)
        if arr.ndim != 2:
            raise DataError("expected a (n_windows, length) array")
        return arr
    return np.stack([np.asarray(w.values, dtype=float) for w in windows])


def normalize(windows):
    """Scale pooled returns to unit variance, then anchor-cumsum.

    Returns (anchored log-price windows (n, L) with first column zero,
    global_scale). The anchored form keeps the first L-1 returns of each
    window; the terminal return is not representable in a
    length-preserving anchored window.
    """
    raw = _stack(windows)
    if raw.size == 0:
        raise DataError("no windows to normalize")
    scale = float(raw.std())
    if scale == 0.0 or not np.isfinite(scale):
        raise DataError("pooled return variance is zero or non-finite")
    scaled = raw / scale
    out = np.zeros_like(scaled)
    out[:, 1:] = np.cumsum(scaled[:, :-1], axis=1)
    return out, scale


def denormalize(norm_windows, scale: float) -> np.ndarray:
    """Invert `normalize`: recover the first L-1 returns of each window."""
    return np.diff(np.asarray(norm_windows, dtype=float), axis=1) * scale


_DATASET_KIND = "gbmdiff.dataset"


def save_dataset(windows_array, manifest: DatasetManifest, path):
    arr = np.ascontiguousarray(windows_array, dtype=np.float32)
    if arr.shape != (manifest.n_windows, manifest.length):
        raise DataError(
            f"manifest says ({manifest.n_windows}, {manifest.length}) but "
            f"payload is {arr.shape}"
        )
    manifest.checksum = hashlib.sha256(arr.astype("<f4").tobytes()).hexdigest()
    header = {"kind": _DATASET_KIND, "manifest": asdict(manifest)}
    write_array_container(path, header, {"windows": arr})


def load_dataset(path):
    header, arrays = read_array_container(path)
    if header.get("kind") != _DATASET_KIND:
        raise DataError(f"{path}: not a dataset container")
    manifest = DatasetManifest(**header["manifest"])
    arr = arrays.get("windows")
    if arr is None:
        raise DataError(f"{path}: dataset payload missing")
    if arr.shape != (manifest.n_windows, manifest.length):
        raise DataError(
            f"{path}: manifest ({manifest.n_windows}, {manifest.length}) does "
            f"not match payload {arr.shape}"
        )
    digest = hashlib.sha256(arr.astype("<f4").tobytes()).hexdigest()
    if manifest.checksum and digest != manifest.checksum:
        raise DataError(f"{path}: payload checksum mismatch")
    return arr, manifest


def fetch_prices(ticker: str, endpoint: str | None = None, max_retries: int = 3,
                 timeout: float = 10.0, sleep=time.sleep) -> PriceSeries:
    """Optional HTTP fetcher: GET <endpoint>/<ticker> returning JSON
    {"observations": [{"date": ..., "adj_close": ...}, ...]}.
    """
    endpoint = endpoint or os.environ.get("GBMD_DATA_ENDPOINT")
    if not endpoint:
        raise ConfigError(
            "no data endpoint: pass one or set GBMD_DATA_ENDPOINT"
        )
    url = endpoint.rstrip("/") + "/" + ticker
    last_error = None
    for attempt in range(1, max_retries + 1):
        try:
            resp = requests.get(url, timeout=timeout)
            resp.raise_for_status()
            payload = resp.json()
            break
        except (requests.RequestException, ValueError) as exc:
            last_error = exc
            if attempt < max_retries:
                sleep(0.5 * 2 ** (attempt - 1))
    else:
        raise DataError(
            f"{ticker}: fetch failed after {max_retries} attempts: {last_error}"
        )
    rows = payload.get("observations")
    if not isinstance(rows, list) or not rows:
        raise DataError(f"{ticker}: endpoint returned no observations")
    dates = [row.get("date") for row in rows]
    prices = [row.get("adj_close") for row in rows]
    return _build_series(ticker, dates, prices, url)
