"""Regenerate the shipped ticker CSV fixtures (deterministic).

ALPHA: 10,505 rows, 5 of them dirty (blank/nonpositive prices), shuffled
       on disk -> 10,500 clean rows spanning ~41.7 years -> 22 windows
       at L=2048 / stride=400.
BETA:  10,900 clean rows (~43.3 years) -> 23 windows.
GAMMA: 2,600 clean rows (~10.3 years) -> dropped by the 40-year filter.
BRK.B: symbol with a non [A-Z0-9] character; prepare must skip it.
"""

import os

import numpy as np
import pandas as pd

HERE = os.path.dirname(os.path.abspath(__file__))


def gbm_prices(n, seed, s0=50.0, mu=0.0002, vol=0.015):
    rng = np.random.default_rng(seed)
    steps = mu - 0.5 * vol ** 2 + vol * rng.standard_normal(n - 1)
    return s0 * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))


def write(ticker, n_clean, seed, start, dirty=0, shuffle=False):
    dates = pd.bdate_range(start, periods=n_clean + dirty).strftime("%Y-%m-%d")
    prices = [f"{p:.4f}" for p in gbm_prices(n_clean + dirty, seed)]
    if dirty:
        rng = np.random.default_rng(seed + 1)
        bad = rng.choice(n_clean + dirty, size=dirty, replace=False)
        for j, idx in enumerate(sorted(bad)):
            prices[idx] = ["", "", "", "-1.0", "0.0"][j % 5]
    frame = pd.DataFrame({"date": dates, "adj_close": prices})
    if shuffle:
        frame = frame.sample(frac=1.0, random_state=seed + 2)
    frame.to_csv(os.path.join(HERE, f"{ticker}.csv"), index=False)
    print(ticker, len(frame))


if __name__ == "__main__":
    write("ALPHA", 10_500, seed=101, start="1980-01-01", dirty=5, shuffle=True)
    write("BETA", 10_900, seed=202, start="1978-06-01")
    write("GAMMA", 2_600, seed=303, start="2012-01-01")
    write("BRK.B", 300, seed=404, start="2020-01-01")
