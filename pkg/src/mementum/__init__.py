"""Meme-period detection from Markov-switching cointegration between market and social-post series."""
from .detector import (
    CointSpans,
    DetectorConfig,
    MementumReport,
    coint_spans,
    detect,
    match_and_intersect,
    merge_falls,
    persistence_filter,
)
from .ingest import (
    AlignedSeriesSet,
    IngestError,
    PairSeries,
    RawSeries,
    TransformSpec,
    align,
    load_combined_csv,
    load_csv,
    make_pair,
)
from .regimes import RankPosterior, RegimeIntervals, summarize, to_intervals
from .sampler import McmcSettings, PosteriorDraws, PriorSpec, SamplerError, run_mcmc
from .synth import Drift, FactorScript, GroundTruth, ScenarioSpec, gen_rank_path, gen_series
from .vecm import (
    CointFactors,
    RankPath,
    StaticParams,
    conditional_loglik,
    pi_from_factors,
    pi_from_svd,
    rank_indicator,
    residuals,
)

__version__ = "0.1.0"
