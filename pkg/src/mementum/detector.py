"""Meme-period ("mementum") detection from two estimated rank paths.

A stock is in a meme period on days where

1. price/posts and volume/posts are both cointegrated (rank 1),
2. the two cointegration regimes started within ``d_w`` trading days of
   each other,
3. both regimes are persistent: each lasts at least ``d_c`` days and was
   preceded by at least ``d_p`` non-cointegrated days,

and the jointly cointegrated stretch lasts at least ``d_c`` days.  Falls out
of cointegration lasting ``d_f`` days or less are bridged first.

Day indices are 0-based trading-day positions and interval ends are inclusive.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .regimes import RegimeIntervals, to_intervals

COINT_RANK = 1


@dataclass(frozen=True)
class DetectorConfig:
    d_c: int = 2
    d_p: int = 2
    d_f: int = 1
    d_w: int = 1
    filter_first: bool = False  # filter durations before bridging falls

    def __post_init__(self):
        for name in ("d_c", "d_p", "d_f", "d_w"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.d_c < 1:
            raise ValueError("d_c must be at least 1")


@dataclass(frozen=True)
class CointSpans:
    spans: tuple
    horizon: int

    def __post_init__(self):
        spans = tuple((int(a), int(b)) for a, b in self.spans)
        prev = -1
        for a, b in spans:
            if a > b or a <= prev or b >= self.horizon or a < 0:
                raise ValueError(f"spans must be sorted, disjoint and inside 0..{self.horizon - 1}: {spans}")
            prev = b
        object.__setattr__(self, "spans", spans)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.horizon, dtype=bool)
        for a, b in self.spans:
            m[a:b + 1] = True
        return m

    def __len__(self):
        return len(self.spans)

    def __iter__(self):
        return iter(self.spans)


@dataclass
class MementumReport:
    periods: list  # (start, end) inclusive day indices
    cond1: np.ndarray
    cond2: np.ndarray
    cond3: np.ndarray
    config: DetectorConfig
    dates: np.ndarray | None = None
    input_hashes: dict = field(default_factory=dict)

    @property
    def mementum(self) -> np.ndarray:
        m = np.zeros(self.cond1.size, dtype=bool)
        for a, b in self.periods:
            m[a:b + 1] = True
        return m

    @property
    def period_dates(self) -> list:
        if self.dates is None:
            return []
        return [(str(self.dates[a]), str(self.dates[b])) for a, b in self.periods]

    def to_dict(self) -> dict:
        d = {
            "config": asdict(self.config),
            "input_hashes": dict(self.input_hashes),
            "periods": [list(p) for p in self.periods],
            "masks": {
                "cond1": self.cond1.astype(int).tolist(),
                "cond2": self.cond2.astype(int).tolist(),
                "cond3": self.cond3.astype(int).tolist(),
                "mementum": self.mementum.astype(int).tolist(),
            },
        }
        if self.dates is not None:
            d["dates"] = [str(x) for x in self.dates]
            d["period_dates"] = [list(p) for p in self.period_dates]
        return d


def path_hash(states) -> str:
    return hashlib.sha256(np.asarray(states, dtype=np.int64).tobytes()).hexdigest()


def coint_spans(intervals: RegimeIntervals) -> CointSpans:
    """Intervals whose rank is exactly one."""
    spans = [(a, b) for a, b, r in intervals.intervals if r == COINT_RANK]
    return CointSpans(spans, intervals.horizon)


def merge_falls(spans: CointSpans, d_f: int) -> CointSpans:
    """Bridge gaps of at most ``d_f`` days between consecutive spans."""
    out = []
    for a, b in spans:
        if out and a - out[-1][1] - 1 <= d_f:
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return CointSpans(out, spans.horizon)


def persistence_filter(spans: CointSpans, d_c: int, d_p: int) -> CointSpans:
    """Keep spans lasting ``d_c`` days or more that follow ``d_p`` or more non-cointegrated days.

    Days before the first observation do not count as non-cointegrated.
    Dropped spans still count as cointegrated when checking later spans.
    """
    kept = []
    prev_end = -1
    for a, b in spans:
        if b - a + 1 >= d_c and a - prev_end - 1 >= d_p:
            kept.append((a, b))
        prev_end = b
    return CointSpans(kept, spans.horizon)


def _match(pr, vol, d_w):
    candidates = sorted(
        (abs(a - c), min(a, c), i, j)
        for i, (a, _) in enumerate(pr)
        for j, (c, _) in enumerate(vol)
        if abs(a - c) <= d_w
    )
    used_pr, used_vol, pairs = set(), set(), []
    for _, _, i, j in candidates:
        if i not in used_pr and j not in used_vol:
            used_pr.add(i)
            used_vol.add(j)
            pairs.append((pr.spans[i], vol.spans[j]))
    return sorted(pairs)


def match_and_intersect(pr_tw: CointSpans, vol_tw: CointSpans, cfg: DetectorConfig | None = None,
                        cointegrated=None, dates=None) -> MementumReport:
    """Pair spans whose starts differ by at most ``d_w`` and keep long-enough overlaps.

    ``pr_tw`` and ``vol_tw`` are the persistence-filtered spans.  The optional
    ``cointegrated`` pair holds the spans before persistence filtering, used
    for the first condition mask; it defaults to the filtered spans.
    """
    cfg = cfg or DetectorConfig()
    T = pr_tw.horizon
    if vol_tw.horizon != T:
        raise ValueError("span sets cover different horizons")
    pairs = _match(pr_tw, vol_tw, cfg.d_w)
    coint_pr, coint_vol = cointegrated or (pr_tw, vol_tw)
    cond1 = coint_pr.mask() & coint_vol.mask()
    cond3 = pr_tw.mask() & vol_tw.mask()
    cond2 = np.zeros(T, dtype=bool)
    periods = []
    for (a, b), (c, d) in pairs:
        cond2[min(a, c):max(b, d) + 1] = True
        lo, hi = max(a, c), min(b, d)
        if hi - lo + 1 >= cfg.d_c:
            periods.append((lo, hi))
    return MementumReport(periods, cond1, cond2, cond3, cfg, dates=dates)


def _states(path):
    return np.asarray(getattr(path, "states", path))


def pair_spans(states, cfg: DetectorConfig):
    """``(cointegrated spans, persistent spans)`` for one pair.

    The cointegrated spans always have short falls bridged, so that every
    reported day lies inside the first condition mask in either order.
    """
    raw = coint_spans(to_intervals(states))
    merged = merge_falls(raw, cfg.d_f)
    if cfg.filter_first:
        return merged, merge_falls(persistence_filter(raw, cfg.d_c, cfg.d_p), cfg.d_f)
    return merged, persistence_filter(merged, cfg.d_c, cfg.d_p)


def detect(pr_tw_path, vol_tw_path, dates=None, cfg: DetectorConfig | None = None) -> MementumReport:
    """Full detection pipeline on two 1-based state paths over one calendar."""
    cfg = cfg or DetectorConfig()
    s_pr, s_vol = _states(pr_tw_path), _states(vol_tw_path)
    if s_pr.shape != s_vol.shape:
        raise ValueError(f"path lengths differ: {s_pr.size} vs {s_vol.size}")
    if dates is not None and len(dates) != s_pr.size:
        raise ValueError("dates and paths have different lengths")
    coint_pr, pers_pr = pair_spans(s_pr, cfg)
    coint_vol, pers_vol = pair_spans(s_vol, cfg)
    report = match_and_intersect(pers_pr, pers_vol, cfg, cointegrated=(coint_pr, coint_vol), dates=dates)
    report.input_hashes = {"pr_tw": path_hash(s_pr), "vol_tw": path_hash(s_vol)}
    return report
