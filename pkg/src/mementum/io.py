"""On-disk formats: posterior archives, regime tables, detection reports.

Every file written here carries a short configuration hash so that stages
run with different settings are not mixed by accident.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .regimes import RankPosterior
from .sampler import PosteriorDraws
from .vecm import RankPath

REGIME_COLUMNS = ("date", "state", "rank")
MASK_COLUMNS = ("date", "cond1", "cond2", "cond3", "mementum")
_ARRAYS = ("states", "P", "c", "B", "Sigma", "loglik", "alpha", "beta")


class FormatError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def config_hash(cfg: dict) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def data_hash(y, dates=None) -> str:
    """Content hash of a data matrix and its calendar."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(np.asarray(y, dtype=np.float64)).tobytes())
    if dates is not None:
        h.update(np.asarray(dates, dtype="datetime64[D]").astype(np.int64).tobytes())
    return h.hexdigest()


def save_posterior(draws: PosteriorDraws, path, manifest: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.npz`` with the draw arrays and ``<path>.json`` with the manifest."""
    base = Path(path)
    arrays = {k: getattr(draws, k) for k in _ARRAYS if getattr(draws, k) is not None}
    npz = base.with_suffix(".npz")
    with open(npz, "wb") as fh:
        np.savez_compressed(fh, **arrays)
    info = {"meta": draws.meta, "counters": draws.counters, "n_draws": len(draws)}
    info.update(manifest or {})
    js = base.with_suffix(".json")
    js.write_text(json.dumps(info, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    return npz, js


def load_posterior(path) -> tuple[PosteriorDraws, dict]:
    base = Path(path)
    with np.load(base.with_suffix(".npz")) as z:
        arrays = {k: z[k] for k in z.files}
    manifest = json.loads(base.with_suffix(".json").read_text(encoding="utf-8"))
    draws = PosteriorDraws(**arrays, counters=manifest.get("counters", {}), meta=manifest.get("meta", {}))
    return draws, manifest


def _header_comment(fh, cfg_hash):
    if cfg_hash:
        fh.write(f"# config_hash={cfg_hash}\n")


def _read_commented(path):
    cfg_hash = None
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "config_hash":
                cfg_hash = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise FormatError(f"{path}: empty file")
    return rows[0], rows[1:], cfg_hash


def write_regimes_csv(path, dates, posterior: RankPosterior, cfg_hash: str | None = None) -> None:
    """``date,state,rank,p_rank0,...`` with the per-day MAP state and state frequencies."""
    probs = posterior.probs
    states = posterior.map_path.states
    if len(dates) != len(states):
        raise ValueError("dates and regime path differ in length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _header_comment(fh, cfg_hash)
        w = csv.writer(fh)
        w.writerow([*REGIME_COLUMNS, *(f"p_rank{r}" for r in range(probs.shape[1]))])
        for d, s, p in zip(dates, states, probs):
            w.writerow([str(d), int(s), int(s) - 1, *(repr(float(x)) for x in p)])


def write_path_csv(path, dates, states, cfg_hash: str | None = None) -> None:
    """Regime table for a known path (one-hot probabilities)."""
    states = np.asarray(getattr(states, "states", states))
    N = max(3, int(states.max()))
    probs = np.eye(N)[states - 1]
    write_regimes_csv(path, dates, RankPosterior(probs, RankPath(states)), cfg_hash)


def read_regimes_csv(path):
    """Return ``(dates, RankPath, probs, config_hash)``."""
    header, rows, cfg_hash = _read_commented(path)
    if tuple(header[:3]) != REGIME_COLUMNS:
        raise FormatError(f"{path}: expected columns {','.join(REGIME_COLUMNS)},p_rank0,...")
    try:
        dates = np.array([r[0] for r in rows], dtype="datetime64[D]")
        states = np.array([int(r[1]) for r in rows])
        probs = np.array([[float(x) for x in r[3:]] for r in rows])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if len(rows) == 0:
        raise FormatError(f"{path}: no rows")
    return dates, RankPath(states), probs, cfg_hash


def write_masks_csv(path, report, dates=None, cfg_hash: str | None = None) -> None:
    dates = report.dates if dates is None else dates
    if dates is None:
        dates = np.arange(report.cond1.size)
    cols = [report.cond1, report.cond2, report.cond3, report.mementum]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _header_comment(fh, cfg_hash)
        w = csv.writer(fh)
        w.writerow(MASK_COLUMNS)
        for i, d in enumerate(dates):
            w.writerow([str(d), *(int(c[i]) for c in cols)])


def read_masks_csv(path):
    header, rows, cfg_hash = _read_commented(path)
    if tuple(header) != MASK_COLUMNS:
        raise FormatError(f"{path}: expected columns {','.join(MASK_COLUMNS)}")
    dates = [r[0] for r in rows]
    masks = np.array([[int(x) for x in r[1:]] for r in rows], dtype=bool).reshape(-1, 4)
    return dates, {k: masks[:, i] for i, k in enumerate(MASK_COLUMNS[1:])}, cfg_hash


def write_report_json(path, report, ticker: str, cfg_hash: str | None = None) -> dict:
    d = {"ticker": ticker, "config_hash": cfg_hash, **report.to_dict()}
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d


def summary_lines(report, ticker: str) -> list[str]:
    """One ``TICKER: start → end`` line per period, or a no-period line."""
    if not report.periods:
        return [f"{ticker}: no period detected"]
    if report.dates is not None:
        spans = report.period_dates
    else:
        spans = [(str(a), str(b)) for a, b in report.periods]
    return [f"{ticker}: {a} → {b}" for a, b in spans]
