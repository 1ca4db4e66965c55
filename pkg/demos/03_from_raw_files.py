"""From raw daily files to a report, through the library and the CLI.

Price and volume come on trading days, post counts on calendar days. Weekend
posts are folded into the next trading day, the pairs are log transformed, and
the rest of the pipeline runs through the ``mementum run`` command.
"""
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from mementum import align, load_csv, make_pair

work = Path(tempfile.mkdtemp(prefix="mementum_demo_"))
rng = np.random.default_rng(3)

# %% Fake raw inputs: 60 trading days, posts on every calendar day
days = np.busday_offset("2021-01-04", np.arange(60), roll="forward")
calendar = np.arange(days[0], days[-1] + 1)
price = 20 * np.exp(np.cumsum(rng.normal(0, 0.03, days.size)))
volume = rng.integers(10_000, 500_000, days.size)
posts = rng.poisson(30, calendar.size)

for name, d, v in (("price", days, price), ("volume", days, volume), ("tweets", calendar, posts)):
    lines = ["date,value"] + [f"{a},{b}" for a, b in zip(d, v)]
    (work / f"DEMO_{name}.csv").write_text("\n".join(lines) + "\n")

# %% Library route: load, align, transform
raw = [load_csv(work / f"DEMO_{k}.csv", k, ticker="DEMO") for k in ("price", "volume", "tweets")]
aligned = align(*raw, policy="sum_forward")
print("aligned days", len(aligned.dates), "first Monday posts", aligned.tweets[5])
print("calendar posts Sat+Sun+Mon", posts[5:8].sum())
for name in ("pr_tw", "vol_tw"):
    p = make_pair(aligned, name)
    print(name, p.labels, p.y[:2].round(3).tolist())

# %% CLI route: the same files, all stages in one call
cmd = [sys.executable, "-m", "mementum.cli", "run",
       "--price", str(work / "DEMO_price.csv"), "--volume", str(work / "DEMO_volume.csv"),
       "--tweets", str(work / "DEMO_tweets.csv"), "--ticker", "DEMO",
       "--draws", "300", "--burnin", "100", "--quiet", "--out", str(work / "out")]
res = subprocess.run(cmd, capture_output=True, text=True)
print("exit code", res.returncode)
print(res.stdout.strip())
print(sorted(p.name for p in (work / "out").iterdir()))
