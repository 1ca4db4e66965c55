"""Reduce posterior draws to per-day ranks and constant-rank intervals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vecm import RankPath


@dataclass(frozen=True)
class RankPosterior:
    probs: np.ndarray  # (T, N) state frequencies
    map_path: RankPath

    @property
    def rank_probs(self) -> np.ndarray:
        return self.probs


@dataclass(frozen=True)
class RegimeIntervals:
    intervals: tuple  # (start, end inclusive, rank)
    horizon: int
    dates: np.ndarray | None = None

    def expand(self) -> np.ndarray:
        """Per-day rank labels."""
        out = np.empty(self.horizon, dtype=np.int64)
        for a, b, r in self.intervals:
            out[a:b + 1] = r
        return out


def summarize(draws, n_states: int | None = None) -> RankPosterior:
    """Per-day state frequencies over retained draws and their argmax.

    Ties go to the lower state.  ``draws`` is a ``PosteriorDraws`` or a
    ``(D, T)`` array of 1-based states.
    """
    S = np.asarray(getattr(draws, "states", draws))
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("need at least one retained draw")
    if n_states is None:
        n_states = draws.n_states if hasattr(draws, "n_states") else int(S.max())
    counts = np.stack([(S == s).sum(axis=0) for s in range(1, n_states + 1)], axis=1)
    probs = counts / S.shape[0]
    # argmax on integer counts returns the first (lowest) state on exact ties
    return RankPosterior(probs, RankPath(counts.argmax(axis=1) + 1))


def to_intervals(path, dates=None) -> RegimeIntervals:
    """Maximal runs of constant state, labelled by rank (state - 1)."""
    s = list(np.asarray(getattr(path, "states", path)).tolist())
    if dates is not None and len(dates) != len(s):
        raise ValueError("path and dates differ in length")
    out = []
    start = 0
    for t in range(1, len(s) + 1):
        if t == len(s) or s[t] != s[start]:
            out.append((start, t - 1, s[start] - 1))
            start = t
    return RegimeIntervals(tuple(out), len(s), dates)
