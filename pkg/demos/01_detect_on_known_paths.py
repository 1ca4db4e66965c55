"""Detection on hand-made rank paths.

Two pairs are tracked: log price with log posts, and log volume with log posts.
Each day carries a cointegration state (1 = rank zero, 2 = rank one, 3 = rank
two). Here we write the paths by hand so every step of the detector can be
inspected without running the sampler.
"""
import numpy as np

from mementum import DetectorConfig, coint_spans, detect, merge_falls, persistence_filter, to_intervals

# %% Thirty trading days from 2021-01-04
T = 30
dates = np.busday_offset("2021-01-04", np.arange(T), roll="forward")

pr = np.ones(T, dtype=int)
vol = np.ones(T, dtype=int)
pr[2:4] = 2     # a short blip
pr[7:16] = 2    # the long joint episode
pr[25:28] = 2
vol[3] = 2
vol[8:16] = 2
vol[26] = 2

# %% Runs of equal rank, then the rank-one spans only
for name, path in (("price/posts", pr), ("volume/posts", vol)):
    spans = coint_spans(to_intervals(path))
    print(f"{name:13s} rank-one spans {spans.spans}")

# %% Bridging one-day falls, then keeping only spans that persist
cfg = DetectorConfig()          # d_c=2, d_p=2, d_f=1, d_w=1
merged = merge_falls(coint_spans(to_intervals(pr)), cfg.d_f)
kept = persistence_filter(merged, cfg.d_c, cfg.d_p)
print("price/posts after bridging ", merged.spans)
print("price/posts persistent     ", kept.spans)

# %% Full detector with calendar dates
rep = detect(pr, vol, cfg=cfg, dates=dates)
print("periods (indices):", rep.periods)
print("periods (dates):  ", rep.period_dates)

# %% The three daily conditions side by side
print("day  pr vol  c1 c2 c3  m")
for t in range(T):
    row = [int(x) for x in (rep.cond1[t], rep.cond2[t], rep.cond3[t], rep.mementum[t])]
    print(f"{t:3d}  {pr[t] - 1:2d} {vol[t] - 1:3d}   {row[0]}  {row[1]}  {row[2]}  {row[3]}")

# %% A stricter duration requirement removes everything
print(detect(pr, vol, cfg=DetectorConfig(d_c=10)).periods)
