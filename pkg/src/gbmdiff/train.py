"""Denoising score matching: objective, training loop, checkpointing.

The loss draws a continuous time t ~ U(t_floor, T) per sample, perturbs
the window through the analytic transition kernel, and regresses the
network onto the conditional score -eps/std with kernel-variance
weighting lambda(t) = std(t)^2. That weighting reduces the objective to
noise prediction:

    lambda ||s_theta - (-eps/std)||^2 = ||std * s_theta + eps||^2

summed over the batch, so a zero network scores B*L in expectation.

Epoch randomness (shuffle, times, noise) is derived from (seed, epoch)
alone, which makes a resumed run bitwise identical to an uninterrupted
one in single-threaded mode.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .container import read_array_container, write_array_container
from .errors import DataError, NumericError
from .process import DiffusionProcess
from .scorenet import ScoreNet, ScoreNetConfig, init_scorenet, time_to_step

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "TrainingDiverged",
    "dsm_loss",
    "dsm_loss_terms",
    "fit",
    "save_checkpoint",
    "load_checkpoint",
    "epoch_rng",
]

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 1000
    learning_rate: float = 1e-3
    lr_decay_points: tuple[float, ...] = (0.75, 0.9)
    lr_decay_factor: float = 0.1
    t_floor: float = 1e-3
    seed: int = 0
    n_embed_steps: int = 2000
    threads: int | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def lr_at(self, epoch: int) -> float:
        decays = sum(epoch >= p * self.epochs for p in self.lr_decay_points)
        return self.learning_rate * self.lr_decay_factor ** decays


@dataclass
class Checkpoint:
    net_config: ScoreNetConfig
    params: dict[str, np.ndarray]
    optimizer_state: dict[str, np.ndarray]
    epoch: int
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0, np.float32))
    n_embed_steps: int = 2000

    def build_net(self) -> ScoreNet:
        net = ScoreNet(self.net_config)
        state = {k: torch.from_numpy(v.copy()) for k, v in self.params.items()}
        net.load_state_dict(state, strict=True)
        return net


class TrainingDiverged(NumericError):
    def __init__(self, message, checkpoint: Checkpoint | None):
        super().__init__(message)
        self.checkpoint = checkpoint


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    """Generator whose stream depends only on (seed, epoch)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))


def dsm_loss_terms(net, process: DiffusionProcess, batch, t, noise, n_embed_steps=2000):
    """Loss from pre-drawn randomness; returns (loss, noise prediction, std).

    `batch` and `noise` are (B, 1, L) float tensors, `t` a (B,) float64
    array of times. The network output n_theta is the noise prediction;
    the implied score is s_theta = -n_theta / std, so the
    kernel-variance-weighted objective

        sum_b std_b^2 ||s_theta - (-eps/std_b)||^2 = sum ||n_theta - eps||^2

    is plain noise regression. Residuals accumulate in float64 so both
    algebraic forms agree to machine precision.
    """
    scale, std = process.marginal_coeffs(t)
    scale_t = torch.as_tensor(np.broadcast_to(scale, t.shape).copy(), dtype=batch.dtype)
    std_t = torch.as_tensor(np.asarray(std), dtype=batch.dtype)
    xt = scale_t.view(-1, 1, 1) * batch + std_t.view(-1, 1, 1) * noise
    steps = torch.from_numpy(time_to_step(t, n_embed_steps, process.horizon))
    pred = net(xt, steps)
    resid = pred.double() - noise.double()
    loss = resid.pow(2).sum()
    return loss, pred, std_t


def dsm_loss(net, process: DiffusionProcess, batch, rng, t_floor=1e-3, n_embed_steps=2000):
    """Draw (t, eps) from `rng` and evaluate the DSM objective."""
    b, _, length = batch.shape
    t = rng.uniform(t_floor, process.horizon, b)
    noise = torch.from_numpy(
        rng.standard_normal((b, 1, length)).astype(np.float32)
    ).to(batch.dtype)
    loss, _, _ = dsm_loss_terms(net, process, batch, t, noise, n_embed_steps)
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite DSM loss: {loss.item()!r}")
    return loss


def _snapshot(net, optimizer, epoch, loss_history, n_embed_steps=2000) -> Checkpoint:
    params = {
        name: tensor.detach().cpu().numpy().copy()
        for name, tensor in net.state_dict().items()
    }
    opt_arrays = {}
    opt_state = optimizer.state_dict()["state"]
    names = [name for name, _ in net.named_parameters()]
    for idx, entry in opt_state.items():
        name = names[idx]
        for key, value in entry.items():
            arr = (
                value.detach().cpu().numpy()
                if torch.is_tensor(value)
                else np.asarray(value, dtype=np.float32)
            )
            opt_arrays[f"{name}.{key}"] = arr.astype(np.float32, copy=False)
    return Checkpoint(
        net_config=net.config,
        params=params,
        optimizer_state=opt_arrays,
        epoch=epoch,
        loss_history=np.asarray(loss_history, dtype=np.float32),
        n_embed_steps=n_embed_steps,
    )


def _restore_optimizer(optimizer, net, opt_arrays):
    if not opt_arrays:
        return
    base = optimizer.state_dict()
    state = {}
    for idx, (name, _) in enumerate(net.named_parameters()):
        entry = {}
        for key in ("step", "exp_avg", "exp_avg_sq"):
            full = f"{name}.{key}"
            if full in opt_arrays:
                arr = opt_arrays[full]
                entry[key] = torch.from_numpy(arr.copy())
        if entry:
            state[idx] = entry
    optimizer.load_state_dict({"state": state, "param_groups": base["param_groups"]})


def fit(
    config: TrainConfig,
    process: DiffusionProcess,
    dataset: np.ndarray,
    net_config: ScoreNetConfig,
    resume: Checkpoint | None = None,
    log_path=None,
) -> Checkpoint:
    """Train the score network on a (n_windows, length) dataset.

    Divergence (non-finite or runaway loss) raises TrainingDiverged
    carrying the last end-of-epoch checkpoint.
    """
    dataset = np.asarray(dataset, dtype=np.float32)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise DataError(f"dataset must be a nonempty (n, length) array, got {dataset.shape}")
    if dataset.shape[1] != net_config.length:
        raise DataError(
            f"dataset window length {dataset.shape[1]} does not match "
            f"network length {net_config.length}"
        )
    if config.threads is not None:
        torch.set_num_threads(config.threads)

    if resume is not None:
        if resume.net_config != net_config:
            raise DataError("checkpoint network configuration does not match")
        net = resume.build_net()
    else:
        net = init_scorenet(net_config, config.seed)
    net.train()

    optimizer = torch.optim.Adam(
        net.parameters(), lr=config.learning_rate, foreach=False
    )
    start_epoch = 0
    loss_history: list[float] = []
    if resume is not None:
        _restore_optimizer(optimizer, net, resume.optimizer_state)
        start_epoch = resume.epoch
        loss_history = [float(v) for v in resume.loss_history]

    data = torch.from_numpy(dataset).unsqueeze(1)
    n = data.shape[0]
    n_batches = math.ceil(n / config.batch_size)

    log_writer = None
    log_file = None
    if log_path is not None:
        fresh = not os.path.exists(log_path)
        log_file = open(log_path, "a", newline="")
        log_writer = csv.writer(log_file)
        if fresh:
            log_writer.writerow(["epoch", "mean_loss", "lr", "wall_seconds"])

    last_good = _snapshot(net, optimizer, start_epoch, loss_history,
                          config.n_embed_steps)
    try:
        for epoch in range(start_epoch, config.epochs):
            t0 = time.perf_counter()
            lr = config.lr_at(epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr
            rng = epoch_rng(config.seed, epoch)
            perm = rng.permutation(n)
            losses = []
            for b in range(n_batches):
                idx = perm[b * config.batch_size : (b + 1) * config.batch_size]
                xb = data[idx]
                optimizer.zero_grad(set_to_none=True)
                try:
                    loss = dsm_loss(
                        net, process, xb, rng,
                        t_floor=config.t_floor,
                        n_embed_steps=config.n_embed_steps,
                    )
                except (NumericError, ValueError) as exc:
                    raise TrainingDiverged(
                        f"training diverged at epoch {epoch} batch {b}: {exc}",
                        last_good,
                    ) from exc
                value = float(loss.detach())
                if not math.isfinite(value) or value > DIVERGENCE_LIMIT:
                    raise TrainingDiverged(
                        f"training diverged at epoch {epoch} batch {b}: "
                        f"loss {value}",
                        last_good,
                    )
                loss.backward()
                optimizer.step()
                losses.append(value)
            mean_loss = float(np.mean(losses))
            loss_history.append(mean_loss)
            last_good = _snapshot(net, optimizer, epoch + 1, loss_history,
                                  config.n_embed_steps)
            if log_writer is not None:
                log_writer.writerow(
                    [epoch, f"{mean_loss:.8e}", f"{lr:.3e}",
                     f"{time.perf_counter() - t0:.3f}"]
                )
                log_file.flush()
    finally:
        if log_file is not None:
            log_file.close()
    return last_good


_CKPT_KIND = "gbmdiff.train_checkpoint"


def save_checkpoint(checkpoint: Checkpoint, path):
    header = {
        "kind": _CKPT_KIND,
        "net_config": asdict(checkpoint.net_config),
        "epoch": checkpoint.epoch,
        "n_embed_steps": checkpoint.n_embed_steps,
    }
    arrays = {f"param.{k}": v for k, v in checkpoint.params.items()}
    arrays.update({f"optim.{k}": v for k, v in checkpoint.optimizer_state.items()})
    arrays["loss_history"] = np.asarray(checkpoint.loss_history, dtype=np.float32)
    write_array_container(path, header, arrays)


def load_checkpoint(path) -> Checkpoint:
    header, arrays = read_array_container(path)
    if header.get("kind") != _CKPT_KIND:
        raise DataError(f"{path}: not a training checkpoint")
    params = {}
    optimizer_state = {}
    loss_history = np.zeros(0, np.float32)
    for name, arr in arrays.items():
        if name.startswith("param."):
            params[name[len("param.") :]] = arr
        elif name.startswith("optim."):
            optimizer_state[name[len("optim.") :]] = arr
        elif name == "loss_history":
            loss_history = arr
    return Checkpoint(
        net_config=ScoreNetConfig(**header["net_config"]),
        params=params,
        optimizer_state=optimizer_state,
        epoch=int(header["epoch"]),
        loss_history=loss_history,
        n_embed_steps=int(header.get("n_embed_steps", 2000)),
    )
