"""Reverse-time generation of log-space windows and return/price mapping."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .errors import DataError, NumericError
from .process import EPS_T, DiffusionProcess, to_price_space
from .scorenet import ScoreNet, time_to_step

__all__ = [
    "GenerationSpec",
    "reverse_integrate",
    "scorenet_score_fn",
    "generate",
    "to_returns",
    "to_prices",
    "save_series_csv",
    "load_series_csv",
    "write_sidecar",
]


@dataclass(frozen=True)
class GenerationSpec:
    n_series: int = 120
    length: int = 2048
    n_steps: int = 2000
    seed: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.n_series < 1 or self.length < 2 or self.n_steps < 1:
            raise ValueError("n_series, length, n_steps must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


def reverse_integrate(process: DiffusionProcess, score_fn, spec: GenerationSpec,
                      initial=None) -> np.ndarray:
    """Integrate the reverse SDE from T down to the floor EPS_T.

    `score_fn(x, t)` maps an (n_series, length) state and a scalar time to
    the score estimate of the same shape. Starts from the VE prior
    N(0, sigma_max^2 I) unless `initial` is supplied. Returns the raw
    (unscaled) terminal states.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed])))
    horizon = process.horizon
    if initial is None:
        x = process.schedule.sigma_max * rng.standard_normal(
            (spec.n_series, spec.length)
        )
    else:
        x = np.array(initial, dtype=float)
        if x.shape != (spec.n_series, spec.length):
            raise ValueError(
                f"initial state shape {x.shape} does not match spec "
                f"({spec.n_series}, {spec.length})"
            )
    dt = (horizon - EPS_T) / spec.n_steps
    for k in range(spec.n_steps):
        t = horizon - k * dt
        score = score_fn(x, t)
        noise = rng.standard_normal(x.shape)
        x = process.reverse_step(x, t, dt, score, noise)
        if not np.all(np.isfinite(x)):
            raise NumericError(
                f"non-finite state during reverse integration at step {k} (t={t:.6f})"
            )
    return x


def scorenet_score_fn(net: ScoreNet, process: DiffusionProcess,
                      n_embed_steps: int = 2000):
    """Adapt a trained network to the (x, t) -> score interface.

    The network predicts the forward noise; dividing by -std(t) of the
    transition kernel turns that into the score estimate.
    """
    net.eval()

    def fn(x, t):
        with torch.no_grad():
            xt = torch.from_numpy(np.asarray(x, dtype=np.float32)).unsqueeze(1)
            step = int(time_to_step(t, n_embed_steps, process.horizon))
            steps = torch.full((xt.shape[0],), step, dtype=torch.long)
            pred = net(xt, steps).squeeze(1).numpy().astype(float)
        _, std = process.marginal_coeffs(t)
        return -pred / float(std)

    return fn


def generate(net: ScoreNet, spec: GenerationSpec, process: DiffusionProcess,
             n_embed_steps: int = 2000) -> np.ndarray:
    """Sample `n_series` log-space windows and undo dataset normalization."""
    if net.config.length != spec.length:
        raise DataError(
            f"network length {net.config.length} does not match requested "
            f"length {spec.length}"
        )
    score_fn = scorenet_score_fn(net, process, n_embed_steps)
    x = reverse_integrate(process, score_fn, spec)
    return x * spec.scale


def to_returns(series):
    """First differences of a log-space series (length -> length-1)."""
    return np.diff(np.asarray(series, dtype=float), axis=-1)


def to_prices(series, s0):
    """Map a log-space series to prices anchored at s0 > 0."""
    return to_price_space(series, s0)


def save_series_csv(series, path):
    series = np.asarray(series, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series_id", "t_index", "log_value"])
        for sid, row in enumerate(series):
            for tix, value in enumerate(row):
                writer.writerow([sid, tix, repr(float(value))])


def load_series_csv(path) -> np.ndarray:
    by_series: dict[int, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["series_id", "t_index", "log_value"]:
            raise DataError(f"{path}: unexpected series CSV header {reader.fieldnames}")
        for row in reader:
            by_series.setdefault(int(row["series_id"]), []).append(
                float(row["log_value"])
            )
    if not by_series:
        raise DataError(f"{path}: empty series file")
    lengths = {len(v) for v in by_series.values()}
    if len(lengths) != 1:
        raise DataError(f"{path}: ragged series lengths {sorted(lengths)}")
    return np.array([by_series[k] for k in sorted(by_series)], dtype=float)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_sidecar(path, spec: GenerationSpec, process: DiffusionProcess,
                  checkpoint_path=None):
    info = {
        "spec": asdict(spec),
        "process": {
            "kind": process.kind.value,
            "schedule": process.schedule.kind.value,
            "sigma_min": process.schedule.sigma_min,
            "sigma_max": process.schedule.sigma_max,
            "horizon": process.horizon,
        },
        "seed": spec.seed,
        "checkpoint_sha256": file_sha256(checkpoint_path) if checkpoint_path else None,
    }
    with open(path, "w") as fh:
        json.dump(info, fh, sort_keys=True, indent=2)
        fh.write("\n")
