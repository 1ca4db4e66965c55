"""``mementum`` command line: simulate, estimate, detect, or run all stages.

Exit codes are 0 on success (also when no period is found), 1 on runtime
failure and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .detector import DetectorConfig, detect
from .ingest import (
    PAIRS,
    TransformSpec,
    align,
    load_combined_csv,
    load_csv,
    load_pair_csv,
    make_pair,
    write_pair_csv,
)
from .regimes import summarize
from .sampler import McmcSettings, PriorSpec, run_mcmc
from .synth import ScenarioSpec, gen_series

PAIR_NAMES = tuple(PAIRS)


class UsageError(Exception):
    pass


def _common_detector(p):
    g = p.add_argument_group("detector")
    g.add_argument("--dc", type=int, default=2, help="minimum cointegration duration (days)")
    g.add_argument("--dp", type=int, default=2, help="minimum preceding non-cointegrated days")
    g.add_argument("--df", type=int, default=1, help="longest fall to bridge (days)")
    g.add_argument("--dw", type=int, default=1, help="largest start delay between pairs (days)")
    g.add_argument("--filter-first", action="store_true", help="filter durations before bridging falls")


def _common_inputs(p):
    g = p.add_argument_group("inputs")
    g.add_argument("--price", type=Path)
    g.add_argument("--volume", type=Path)
    g.add_argument("--tweets", type=Path)
    g.add_argument("--combined", type=Path, help="date,price,volume,tweets file")
    g.add_argument("--pr-tw", type=Path, help="already transformed price/posts pair file")
    g.add_argument("--vol-tw", type=Path, help="already transformed volume/posts pair file")
    g.add_argument("--weekend", choices=("sum_forward", "drop"), default="sum_forward")
    g.add_argument("--transform", choices=("log", "level"), default="log")
    g.add_argument("--ticker", help="label for summaries (default: from file names)")


def _common_mcmc(p):
    g = p.add_argument_group("sampler")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--draws", type=int, default=5000)
    g.add_argument("--burnin", type=int, default=1000)
    g.add_argument("--thin", type=int, default=1)
    g.add_argument("--quiet", action="store_true", help="no progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mementum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic pairs from a scenario file")
    p.add_argument("scenario", type=Path, help="scenario JSON")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("estimate", help="estimate rank regimes for both pairs")
    _common_inputs(p)
    _common_mcmc(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("detect", help="detect meme periods from two regime files")
    p.add_argument("--pr-regimes", type=Path, help="default: OUT/regimes_pr_tw.csv")
    p.add_argument("--vol-regimes", type=Path, help="default: OUT/regimes_vol_tw.csv")
    p.add_argument("--ticker", default=None)
    p.add_argument("--force", action="store_true", help="accept regime files with different config hashes")
    _common_detector(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run", help="estimate then detect")
    _common_inputs(p)
    _common_mcmc(p)
    _common_detector(p)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _out_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _log(args, msg):
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


# simulate

def cmd_simulate(args) -> int:
    doc = json.loads(args.scenario.read_text(encoding="utf-8"))
    out = _out_dir(args.out)
    ticker = doc.get("ticker", "SIM")
    scenarios = {k: doc[k] for k in PAIR_NAMES if k in doc} or {"pair": doc}
    h = io.config_hash(doc)
    truth = {"ticker": ticker, "config_hash": h}
    for name, sdoc in scenarios.items():
        spec = ScenarioSpec.from_dict(sdoc)
        pair, gt = gen_series(spec)
        write_pair_csv(pair, out / f"{name}.csv")
        io.write_path_csv(out / f"truth_{name}.csv", pair.dates, gt.path, h)
        truth[name] = {"scenario": spec.to_dict(), **gt.to_dict()}
        print(f"wrote {out / f'{name}.csv'}")
    (out / "ground_truth.json").write_text(json.dumps(truth, sort_keys=True) + "\n", encoding="utf-8")
    return 0


# estimate

def _load_pairs(args):
    spec = TransformSpec.from_mode(args.transform, args.weekend)
    if args.pr_tw or args.vol_tw:
        if not (args.pr_tw and args.vol_tw):
            raise UsageError("--pr-tw and --vol-tw must be given together")
        ticker = args.ticker or args.pr_tw.parent.name or "TICKER"
        return ticker, {"pr_tw": load_pair_csv(args.pr_tw), "vol_tw": load_pair_csv(args.vol_tw)}, spec
    if args.combined:
        series = load_combined_csv(args.combined, ticker=args.ticker)
    elif args.price and args.volume and args.tweets:
        t = args.ticker or args.price.stem
        series = tuple(load_csv(f, k, ticker=t) for f, k in
                       ((args.price, "price"), (args.volume, "volume"), (args.tweets, "tweets")))
    else:
        raise UsageError("give --price/--volume/--tweets, --combined, or --pr-tw/--vol-tw")
    aligned = align(*series, policy=spec.weekend_policy)
    return aligned.ticker, {k: make_pair(aligned, k, spec) for k in PAIR_NAMES}, spec


def _estimate(args):
    ticker, pairs, spec = _load_pairs(args)
    out = _out_dir(args.out)
    priors = PriorSpec()
    settings = McmcSettings(n_draws=args.draws, n_burnin=args.burnin, thin=args.thin, seed=args.seed)
    hashes = {k: io.data_hash(p.y, p.dates) for k, p in pairs.items()}
    cfg = {"priors": asdict(priors), "settings": asdict(settings), "transform": asdict(spec), "data": hashes}
    h = io.config_hash(cfg)
    calendars = [p.dates for p in pairs.values()]
    if not np.array_equal(calendars[0], calendars[1]):
        raise ValueError("the two pairs are on different calendars")
    for name, pair in pairs.items():
        total = settings.n_burnin + settings.n_draws * settings.thin
        step = max(1, total // 20)

        def progress(i, n, name=name):
            if i % step == 0 or i == n:
                _log(args, f"{ticker} {name}: {i}/{n}")

        try:
            draws = run_mcmc(pair.y, priors, settings, progress=progress)
        except Exception as exc:
            raise RuntimeError(f"estimation of {name} failed: {exc}") from exc
        manifest = {
            "ticker": ticker,
            "pair": name,
            "labels": list(pair.labels),
            "seed": settings.seed,
            "config_hash": h,
            "data_sha256": hashes[name],
            "config": cfg,
        }
        io.save_posterior(draws, out / f"posterior_{name}", manifest)
        io.write_regimes_csv(out / f"regimes_{name}.csv", pair.dates, summarize(draws), h)
        _log(args, f"wrote {out / f'regimes_{name}.csv'}")
    return ticker


def cmd_estimate(args) -> int:
    _estimate(args)
    return 0


# detect

def _detector_config(args) -> DetectorConfig:
    try:
        return DetectorConfig(d_c=args.dc, d_p=args.dp, d_f=args.df, d_w=args.dw, filter_first=args.filter_first)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _detect(args, ticker=None) -> int:
    cfg = _detector_config(args)
    out = _out_dir(args.out)
    pr_file = getattr(args, "pr_regimes", None) or out / "regimes_pr_tw.csv"
    vol_file = getattr(args, "vol_regimes", None) or out / "regimes_vol_tw.csv"
    d1, p1, _, h1 = io.read_regimes_csv(pr_file)
    d2, p2, _, h2 = io.read_regimes_csv(vol_file)
    if h1 != h2 and not getattr(args, "force", False):
        raise ValueError(f"regime files come from different configurations ({h1} vs {h2}); use --force to override")
    m = min(len(d1), len(d2))
    diff = np.flatnonzero(d1[:m] != d2[:m])
    if diff.size or len(d1) != len(d2):
        k = int(diff[0]) if diff.size else m
        a = str(d1[k]) if k < len(d1) else "end of file"
        b = str(d2[k]) if k < len(d2) else "end of file"
        raise ValueError(f"calendar mismatch at row {k}: {a} vs {b}")
    report = detect(p1, p2, dates=d1, cfg=cfg)
    ticker = ticker or getattr(args, "ticker", None) or Path(out).name or "TICKER"
    h = io.config_hash({"regimes": [h1, h2], "detector": asdict(cfg)})
    io.write_report_json(out / "report.json", report, ticker, h)
    io.write_masks_csv(out / "masks.csv", report, cfg_hash=h)
    lines = io.summary_lines(report, ticker)
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0


def cmd_detect(args) -> int:
    return _detect(args)


def cmd_run(args) -> int:
    _detector_config(args)  # fail on bad flags before the slow stage
    ticker = _estimate(args)
    return _detect(args, ticker)


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "detect": cmd_detect, "run": cmd_run}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mementum {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"mementum {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
