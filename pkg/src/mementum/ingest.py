"""Loading, aligning and transforming daily market and post-count series.

Tweet-count files are expected to hold daily counts of posts that carry the
ticker as a cashtag or hashtag, exclude retweets and contain at least one
image, i.e. the query ``($[ACRONYM] OR #[ACRONYM]) -is:retweet has:images``.
Nothing here talks to a social or market API; inputs are offline CSV files.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

KINDS = ("price", "volume", "tweets")
POLICIES = ("sum_forward", "drop")
PAIRS = {"pr_tw": ("price", "tweets"), "vol_tw": ("volume", "tweets")}
MIN_LENGTH = 10


class IngestError(ValueError):
    pass


def _as_dates(values) -> np.ndarray:
    return np.asarray(values, dtype="datetime64[D]")


@dataclass(frozen=True)
class RawSeries:
    ticker: str
    kind: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise IngestError(f"unknown series kind {self.kind!r}")
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise IngestError("dates and values must be 1-d arrays of equal length")
        if dates.size == 0:
            raise IngestError("no observations")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise IngestError("dates must be strictly increasing without duplicates")
        if not np.all(np.isfinite(values)):
            raise IngestError("non-finite value")
        if self.kind == "price":
            if np.any(values <= 0):
                raise IngestError("prices must be strictly positive")
        else:
            if np.any(values < 0):
                raise IngestError(f"negative {self.kind} count")
            if np.any(values != np.round(values)):
                raise IngestError(f"{self.kind} values must be whole numbers")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class AlignedSeriesSet:
    ticker: str
    dates: np.ndarray
    price: np.ndarray
    volume: np.ndarray
    tweets: np.ndarray

    def __post_init__(self):
        dates = _as_dates(self.dates)
        cols = [np.asarray(getattr(self, k), dtype=float) for k in KINDS]
        if dates.size < 1 or any(c.shape != dates.shape for c in cols):
            raise IngestError("aligned series must share one non-empty calendar")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise IngestError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        for k, c in zip(KINDS, cols):
            object.__setattr__(self, k, c)

    def __len__(self):
        return self.dates.size


@dataclass(frozen=True)
class TransformSpec:
    price_transform: str = "log"
    volume_transform: str = "log1p"
    tweets_transform: str = "log1p"
    weekend_policy: str = "sum_forward"

    def __post_init__(self):
        if self.price_transform not in ("log", "level"):
            raise IngestError(f"bad price transform {self.price_transform!r}")
        for name in ("volume_transform", "tweets_transform"):
            if getattr(self, name) not in ("log1p", "level"):
                raise IngestError(f"bad {name} {getattr(self, name)!r}")
        if self.weekend_policy not in POLICIES:
            raise IngestError(f"bad weekend policy {self.weekend_policy!r}")

    @classmethod
    def from_mode(cls, mode: str = "log", weekend_policy: str = "sum_forward") -> "TransformSpec":
        """``log`` -> log price, log1p counts; ``level`` -> untransformed."""
        if mode == "log":
            return cls(weekend_policy=weekend_policy)
        if mode == "level":
            return cls("level", "level", "level", weekend_policy)
        raise IngestError(f"unknown transform mode {mode!r}")


@dataclass(frozen=True)
class PairSeries:
    labels: tuple
    y: np.ndarray
    dates: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        dates = _as_dates(self.dates)
        if y.ndim != 2 or y.shape[1] != 2 or y.shape[0] != dates.size:
            raise IngestError(f"pair series must be T x 2 with T dates, got {y.shape} and {dates.size}")
        if not np.all(np.isfinite(y)):
            raise IngestError("pair series contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self):
        return self.y.shape[0]


def _parse_date(text, row):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(f"row {row}: malformed date {text!r}") from None


def _parse_number(text, row):
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"row {row}: malformed number {text!r}") from None
    if not math.isfinite(value):
        raise IngestError(f"row {row}: non-finite number {text!r}")
    return value


def _read_rows(path, ncols):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(f.strip() for f in r)]
    if rows:
        try:
            dt.date.fromisoformat(rows[0][0].strip())
        except ValueError:
            rows = rows[1:]  # header
    if not rows:
        raise IngestError(f"{path}: no observations")
    for i, r in enumerate(rows):
        if len(r) != ncols:
            raise IngestError(f"row {i}: expected {ncols} columns, got {len(r)}")
    return rows


def _build(ticker, kind, dates, values):
    order = sorted(range(len(dates)), key=dates.__getitem__)
    d = [dates[i] for i in order]
    for i in range(1, len(d)):
        if d[i] == d[i - 1]:
            raise IngestError(f"duplicate date {d[i].isoformat()}")
    return RawSeries(ticker, kind, np.array(d, dtype="datetime64[D]"), np.array([values[i] for i in order]))


def load_csv(path, kind: str, ticker: str | None = None) -> RawSeries:
    """Read a ``date,value`` file (header optional) into a validated, sorted series."""
    if kind not in KINDS:
        raise IngestError(f"unknown series kind {kind!r}")
    rows = _read_rows(path, 2)
    dates = [_parse_date(r[0], i) for i, r in enumerate(rows)]
    values = [_parse_number(r[1], i) for i, r in enumerate(rows)]
    for i, v in enumerate(values):
        if kind != "price" and v < 0:
            raise IngestError(f"row {i}: negative {kind} count {v}")
    return _build(ticker or Path(path).stem, kind, dates, values)


def load_combined_csv(path, ticker: str | None = None):
    """Read ``date,price,volume,tweets`` into three series."""
    rows = _read_rows(path, 4)
    dates = [_parse_date(r[0], i) for i, r in enumerate(rows)]
    ticker = ticker or Path(path).stem
    out = []
    for col, kind in enumerate(KINDS, start=1):
        values = [_parse_number(r[col], i) for i, r in enumerate(rows)]
        out.append(_build(ticker, kind, dates, values))
    return tuple(out)


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(series: RawSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "value"])
        for d, v in zip(series.dates, series.values):
            w.writerow([str(d), _fmt(v)])


def write_combined_csv(aligned: AlignedSeriesSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *KINDS])
        for i, d in enumerate(aligned.dates):
            w.writerow([str(d), _fmt(aligned.price[i]), _fmt(aligned.volume[i]), _fmt(aligned.tweets[i])])


def align(price: RawSeries, volume: RawSeries, tweets: RawSeries, policy: str = "sum_forward") -> AlignedSeriesSet:
    """Put the three series on the common trading calendar.

    Trading days are the dates present in both market series.  Posts dated on
    non-trading days are added to the next trading day (``sum_forward``) or
    discarded (``drop``); trading days without a post record count zero.
    """
    if policy not in POLICIES:
        raise IngestError(f"unknown weekend policy {policy!r}")
    if len({price.ticker, volume.ticker, tweets.ticker}) != 1:
        raise IngestError(f"ticker mismatch: {price.ticker}, {volume.ticker}, {tweets.ticker}")
    lo = max(s.dates[0] for s in (price, volume, tweets))
    hi = min(s.dates[-1] for s in (price, volume, tweets))
    in_range = lambda d: d[(d >= lo) & (d <= hi)]
    p_days, v_days = in_range(price.dates), in_range(volume.dates)
    calendar = np.intersect1d(p_days, v_days)
    if lo > hi or calendar.size == 0:
        raise IngestError("empty overlap between price, volume and tweets date ranges")
    missing = np.setxor1d(p_days, v_days)
    if missing.size:
        listed = ", ".join(str(d) for d in missing[:10])
        raise IngestError(f"missing market values on trading days: {listed}")

    market = np.intersect1d(price.dates, volume.dates)
    counts = np.zeros(market.size)
    idx = np.searchsorted(market, tweets.dates, side="left")
    inside = idx < market.size
    exact = np.zeros_like(inside)
    exact[inside] = market[idx[inside]] == tweets.dates[inside]
    keep = exact if policy == "drop" else inside
    np.add.at(counts, idx[keep], tweets.values[keep])

    sel = np.isin(market, calendar)
    p = price.values[np.searchsorted(price.dates, calendar)]
    v = volume.values[np.searchsorted(volume.dates, calendar)]
    return AlignedSeriesSet(price.ticker, calendar, p, v, counts[sel])


def _transform(x, how, name):
    if how == "level":
        return x.copy()
    if how == "log":
        if np.any(x <= 0):
            raise IngestError(f"log transform needs strictly positive {name}")
        return np.log(x)
    if np.any(x < 0):
        raise IngestError(f"log1p transform needs nonnegative {name}")
    return np.log1p(x)


def make_pair(aligned: AlignedSeriesSet, pair: str, spec: TransformSpec | None = None,
              min_length: int = MIN_LENGTH) -> PairSeries:
    """Bivariate model input: transformed price (or volume) next to transformed posts."""
    spec = spec or TransformSpec()
    if pair not in PAIRS:
        raise IngestError(f"unknown pair {pair!r}; expected one of {sorted(PAIRS)}")
    if len(aligned) < min_length:
        raise IngestError(f"series has {len(aligned)} observations; at least {min_length} required")
    first, second = PAIRS[pair]
    how = spec.price_transform if first == "price" else spec.volume_transform
    y = np.column_stack([
        _transform(getattr(aligned, first), how, first),
        _transform(aligned.tweets, spec.tweets_transform, "tweets"),
    ])
    return PairSeries((first, second), y, aligned.dates)


def write_pair_csv(pair: PairSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *pair.labels])
        for d, row in zip(pair.dates, pair.y):
            w.writerow([str(d), _fmt(row[0]), _fmt(row[1])])


def load_pair_csv(path, min_length: int = MIN_LENGTH) -> PairSeries:
    """Read an already-transformed ``date,a,b`` pair file."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    labels = tuple(header[1:3]) if header and len(header) == 3 else ("y1", "y2")
    rows = _read_rows(path, 3)
    dates = [_parse_date(r[0], i) for i, r in enumerate(rows)]
    y = [[_parse_number(r[1], i), _parse_number(r[2], i)] for i, r in enumerate(rows)]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise IngestError("pair file dates must be strictly increasing")
    if len(rows) < min_length:
        raise IngestError(f"series has {len(rows)} observations; at least {min_length} required")
    return PairSeries(labels, np.array(y), np.array(dates, dtype="datetime64[D]"))
