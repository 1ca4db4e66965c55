"""Synthetic pairs with known rank paths and factors, for testing estimation and detection."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import hmm
from .ingest import PairSeries
from .vecm import RankPath, StaticParams

EXPLOSIVE = 1e12
DEFAULT_START = "2021-01-04"


class ExplosiveSeriesError(RuntimeError):
    pass


@dataclass(frozen=True)
class Drift:
    """Additive time variation applied to every free factor element."""

    kind: str = "constant"  # constant | random_walk | sine
    amplitude: float = 0.0
    period: float = 100.0
    variance: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "random_walk", "sine"):
            raise ValueError(f"unknown drift kind {self.kind!r}")

    def path(self, T, size, rng):
        if self.kind == "constant":
            return np.zeros((T, size))
        if self.kind == "sine":
            t = np.arange(T)[:, None]
            return np.broadcast_to(self.amplitude * np.sin(2 * np.pi * t / self.period), (T, size)).copy()
        steps = rng.standard_normal((T, size)) * np.sqrt(self.variance)
        steps[0] = 0.0
        return np.cumsum(steps, axis=0)


@dataclass(frozen=True)
class FactorScript:
    """Base factors for the highest rank used: ``alpha`` (r, n), ``beta`` (n, r) with identity top block."""

    alpha: np.ndarray
    beta: np.ndarray
    alpha_drift: Drift = Drift()
    beta_drift: Drift = Drift()

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        b = np.asarray(self.beta, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if a.shape[0] != b.shape[1] or a.shape[1] != b.shape[0]:
            raise ValueError(f"alpha {a.shape} and beta {b.shape} are not conformable")
        r = b.shape[1]
        if not np.allclose(b[:r, :r], np.eye(r)):
            raise ValueError("beta must have an identity top block")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def max_rank(self) -> int:
        return self.beta.shape[1]


@dataclass(frozen=True)
class ScenarioSpec:
    T: int
    statics: StaticParams
    factors: FactorScript
    path: tuple | None = None  # scripted 1-based states
    P: np.ndarray | None = None  # Markov mode
    init: np.ndarray | None = None
    start_state: int | None = None
    noise_on: bool = True
    seed: int = 0
    y0: np.ndarray | None = None  # first two observations, (2, n)
    start_date: str = DEFAULT_START
    labels: tuple = ("y1", "y2")

    def __post_init__(self):
        if self.path is None and self.P is None:
            raise ValueError("give either a scripted path or a transition matrix")
        if self.path is not None:
            if len(self.path) != self.T:
                raise ValueError(f"scripted path has length {len(self.path)}, expected T={self.T}")
            object.__setattr__(self, "path", tuple(int(s) for s in self.path))
        if self.P is not None:
            P = np.asarray(self.P, dtype=float)
            if P.ndim != 2 or P.shape[0] != P.shape[1] or np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0):
                raise ValueError("P must be a square row-stochastic matrix")
            object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.statics.n

    def _seeds(self):
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(3)]

    def to_dict(self) -> dict:
        d = {
            "T": self.T,
            "seed": self.seed,
            "noise_on": self.noise_on,
            "start_date": self.start_date,
            "labels": list(self.labels),
            "statics": {"c": self.statics.c.tolist(), "B": self.statics.B.tolist(), "Sigma": self.statics.Sigma.tolist()},
            "factors": {
                "alpha": self.factors.alpha.tolist(),
                "beta": self.factors.beta.tolist(),
                "alpha_drift": vars(self.factors.alpha_drift),
                "beta_drift": vars(self.factors.beta_drift),
            },
        }
        if self.path is not None:
            d["path"] = list(self.path)
        if self.P is not None:
            d["P"] = self.P.tolist()
            if self.init is not None:
                d["init"] = np.asarray(self.init).tolist()
            if self.start_state is not None:
                d["start_state"] = self.start_state
        if self.y0 is not None:
            d["y0"] = np.asarray(self.y0).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        st = d["statics"]
        f = d["factors"]
        factors = FactorScript(
            alpha=f["alpha"],
            beta=f["beta"],
            alpha_drift=Drift(**f.get("alpha_drift", {})),
            beta_drift=Drift(**f.get("beta_drift", {})),
        )
        return cls(
            T=int(d["T"]),
            statics=StaticParams(st["c"], st["B"], st["Sigma"]),
            factors=factors,
            path=d.get("path"),
            P=d.get("P"),
            init=d.get("init"),
            start_state=d.get("start_state"),
            noise_on=bool(d.get("noise_on", True)),
            seed=int(d.get("seed", 0)),
            y0=d.get("y0"),
            start_date=d.get("start_date", DEFAULT_START),
            labels=tuple(d.get("labels", ("y1", "y2"))),
        )


@dataclass
class GroundTruth:
    path: RankPath
    alpha: np.ndarray  # (T, r_max, n)
    beta: np.ndarray  # (T, n, r_max)
    Pi: np.ndarray  # (T, n, n)
    statics: StaticParams
    eps: np.ndarray  # (T, n); first two rows are zero
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "states": self.path.states.tolist(),
            "ranks": self.path.ranks.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "Pi": self.Pi.tolist(),
            "statics": {"c": self.statics.c.tolist(), "B": self.statics.B.tolist(), "Sigma": self.statics.Sigma.tolist()},
            **self.meta,
        }


def load_scenario(path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return ScenarioSpec.from_dict(json.load(fh))


def gen_rank_path(spec: ScenarioSpec) -> RankPath:
    if spec.path is not None:
        return RankPath(np.array(spec.path))
    rng = spec._seeds()[0]
    start = None if spec.start_state is None else spec.start_state - 1
    return RankPath(hmm.simulate_chain(spec.P, spec.T, rng, init=spec.init, start=start) + 1)


def business_days(start: str, T: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(T), roll="forward")


def factor_paths(spec: ScenarioSpec, T: int, rng):
    fs = spec.factors
    n, r = fs.beta.shape
    alpha = fs.alpha[None] + fs.alpha_drift.path(T, r * n, rng).reshape(T, r, n)
    beta = np.broadcast_to(fs.beta, (T, n, r)).copy()
    if n > r:
        beta[:, r:, :] += fs.beta_drift.path(T, (n - r) * r, rng).reshape(T, n - r, r)
    return alpha, beta


def simulate(y0, statics: StaticParams, Pi, eps) -> np.ndarray:
    """Run the VECM recursion forward from two initial observations.

    ``Pi`` and ``eps`` are indexed by time; entries for the first two times are unused.
    """
    T = len(Pi)
    n = statics.n
    y = np.zeros((T, n))
    y[:2] = y0
    for t in range(2, T):
        dy = statics.c + y[t - 1] @ Pi[t] + (y[t - 1] - y[t - 2]) @ statics.B + eps[t]
        y[t] = y[t - 1] + dy
        if not np.all(np.abs(y[t]) < EXPLOSIVE):
            raise ExplosiveSeriesError(
                f"series exceeded {EXPLOSIVE:g} at t={t}; shrink Pi or B so the recursion is stable"
            )
    return y


def gen_series(spec: ScenarioSpec, path: RankPath | None = None):
    """Simulate a pair from the model; returns ``(PairSeries, GroundTruth)``."""
    path = gen_rank_path(spec) if path is None else path
    T, n = spec.T, spec.n
    if len(path) != T:
        raise ValueError("rank path length differs from T")
    ranks = path.ranks
    if ranks.max() > spec.factors.max_rank:
        raise ValueError(f"path reaches rank {ranks.max()} but factors support rank {spec.factors.max_rank}")
    _, frng, erng = spec._seeds()
    alpha, beta = factor_paths(spec, T, frng)
    mask = (np.arange(spec.factors.max_rank)[None, :] < ranks[:, None]).astype(float)
    Pi = np.einsum("tik,tk,tkj->tij", beta, mask, alpha)
    eps = np.zeros((T, n))
    if spec.noise_on:
        L = np.linalg.cholesky(spec.statics.Sigma)
        eps[2:] = erng.standard_normal((T - 2, n)) @ L.T
    y0 = np.zeros((2, n)) if spec.y0 is None else np.asarray(spec.y0, dtype=float)
    y = simulate(y0, spec.statics, Pi, eps)
    pair = PairSeries(spec.labels, y, business_days(spec.start_date, T))
    truth = GroundTruth(path, alpha, beta, Pi, spec.statics, eps)
    return pair, truth
