"""Built-in oracle suite: independent checks with known ground truth.

Each oracle returns OracleResult records; the CLI `oracle` command runs
the fast ones and exits nonzero if any fail. The acceptance test module
drives the same functions at their full published scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .metrics import fit_beta, leverage, leverage_bootstrap_se, tail_exponent
from .process import EPS_T, DiffusionProcess, ProcessKind
from .sample import GenerationSpec, generate, reverse_integrate
from .schedule import NoiseSchedule, ScheduleKind
from .scorenet import ScoreNetConfig, init_scorenet
from .synthetic import pareto_returns, student_t_returns
from .train import TrainConfig, dsm_loss_terms, fit

__all__ = [
    "OracleResult",
    "schedule_calculus_oracle",
    "kernel_em_oracle",
    "exact_score_reverse_oracle",
    "gradient_check_oracle",
    "estimator_oracles",
    "dsm_learning_oracle",
    "default_suite",
]


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _result(name, passed, detail):
    return OracleResult(name=name, passed=bool(passed), detail=detail)


# -- schedules ---------------------------------------------------------


def schedule_calculus_oracle(sigma_min=0.01, sigma_max=1.0) -> list[OracleResult]:
    """Endpoints, monotonicity, and finite-difference consistency."""
    out = []
    ts = np.linspace(0.0, 1.0, 10_000)
    h = 1e-7
    inner = ts[(ts > 2 * h) & (ts < 1 - 2 * h)]
    for kind in ScheduleKind:
        s = NoiseSchedule(kind=kind, sigma_min=sigma_min, sigma_max=sigma_max)
        end_ok = (
            abs(s.sigma(0.0) - sigma_min) < 1e-12
            and abs(s.sigma(1.0) - sigma_max) < 1e-12
        )
        out.append(_result(f"schedule/{kind.value}/endpoints", end_ok,
                           f"sigma(0)={s.sigma(0.0):.6g} sigma(1)={s.sigma(1.0):.6g}"))
        mono = bool(np.all(np.diff(s.sigma(ts)) >= 0.0))
        out.append(_result(f"schedule/{kind.value}/monotone", mono, "10^4-point grid"))
        fd_rate = (s.sigma(inner + h) ** 2 - s.sigma(inner - h) ** 2) / (2 * h)
        rel_rate = np.max(
            np.abs(fd_rate - s.sigma_sq_rate(inner))
            / np.maximum(np.abs(s.sigma_sq_rate(inner)), 1e-12)
        )
        h2 = 1e-6
        inner2 = ts[(ts > 2 * h2) & (ts < 1 - 2 * h2)]
        fd_int = (
            np.asarray(s.sigma_sq_integral(inner2 + h2))
            - np.asarray(s.sigma_sq_integral(inner2 - h2))
        ) / (2 * h2)
        rel_int = np.max(
            np.abs(fd_int - s.sigma(inner2) ** 2)
            / np.maximum(s.sigma(inner2) ** 2, 1e-12)
        )
        ok = rel_rate < 1e-4 and rel_int < 1e-4
        out.append(_result(
            f"schedule/{kind.value}/calculus", ok,
            f"max rel err: rate {rel_rate:.2e}, integral {rel_int:.2e}",
        ))
    return out


# -- transition kernels vs Euler-Maruyama ------------------------------


def kernel_em_oracle(n_paths=10_000, n_steps=1_000, seed=0,
                     times=(0.25, 0.5, 1.0)) -> list[OracleResult]:
    """Forward EM terminal statistics vs the analytic kernel, all 9 combos."""
    out = []
    x0_value = 1.0
    for pkind in ProcessKind:
        for skind in ScheduleKind:
            process = DiffusionProcess(kind=pkind, schedule=NoiseSchedule(kind=skind))
            rng = np.random.default_rng(seed)
            path = process.em_forward_path(
                np.full(n_paths, x0_value), n_steps, rng
            )
            worst = 0.0
            ok = True
            for t in times:
                k = int(round(t / process.horizon * n_steps))
                states = path[k]
                kern = process.transition(np.array([x0_value]), t)
                se_mean = kern.std / math.sqrt(n_paths)
                se_var = kern.std ** 2 * math.sqrt(2.0 / (n_paths - 1))
                dev_mean = abs(states.mean() - kern.mean[0]) / se_mean
                dev_var = abs(states.var() - kern.std ** 2) / se_var
                worst = max(worst, dev_mean, dev_var)
                ok = ok and dev_mean < 3.0 and dev_var < 3.0
            out.append(_result(
                f"kernel_em/{pkind.value}/{skind.value}", ok,
                f"worst deviation {worst:.2f} MC standard errors",
            ))
    return out


# -- exact-score reverse run -------------------------------------------


def exact_score_reverse_oracle(n_paths=5_000, length=8, n_steps=2_000,
                               seed=0, data_var=1.0) -> list[OracleResult]:
    """Reverse integration with the analytic Gaussian score.

    Data are N(0, data_var) per coordinate; the run starts from the exact
    time-T marginal N(0, data_var + sigma_max^2), which isolates the
    integrator from the prior-truncation error of generation.
    """
    out = []
    for pkind in (ProcessKind.VE, ProcessKind.GBM):
        for skind in ScheduleKind:
            process = DiffusionProcess(kind=pkind, schedule=NoiseSchedule(kind=skind))
            sched = process.schedule

            def score(x, t):
                return -x / (data_var + sched.sigma(t) ** 2)

            spec = GenerationSpec(
                n_series=n_paths, length=length, n_steps=n_steps, seed=seed
            )
            rng = np.random.default_rng(seed + 1)
            initial = math.sqrt(data_var + sched.sigma_max ** 2) * rng.standard_normal(
                (n_paths, length)
            )
            terminal = reverse_integrate(process, score, spec, initial=initial)
            var = terminal.var()
            mean = terminal.mean()
            ok = abs(var / data_var - 1.0) < 0.05 and abs(mean) < 0.02
            out.append(_result(
                f"exact_score_reverse/{pkind.value}/{skind.value}", ok,
                f"var {var:.4f} (target {data_var}), mean {mean:+.4f}",
            ))
    return out


# -- gradients ----------------------------------------------------------


def gradient_check_oracle(seed=0, n_params=25, h=1e-4) -> list[OracleResult]:
    """Backprop through dsm_loss vs central finite differences (float64)."""
    config = ScoreNetConfig(
        length=32, channels=16, diff_embed_dim=32, feat_embed_dim=8,
        time_embed_dim=16, n_res_blocks=4, n_heads=4,
    )
    process = DiffusionProcess(kind="ve", schedule=NoiseSchedule(kind="linear"))
    net = init_scorenet(config, seed).double()
    torch.manual_seed(seed)
    with torch.no_grad():
        for p in net.parameters():
            p.add_(0.01 * torch.randn_like(p))

    rng = np.random.default_rng(seed)
    batch = torch.from_numpy(
        (0.2 * rng.standard_normal((4, 1, 32)))
    ).double().contiguous()
    t = rng.uniform(EPS_T, 1.0, 4)
    noise = torch.from_numpy(rng.standard_normal((4, 1, 32))).double()

    def loss_fn():
        loss, _, _ = dsm_loss_terms(net, process, batch, t, noise)
        return loss

    loss = loss_fn()
    net.zero_grad()
    loss.backward()

    params = list(net.named_parameters())
    worst = 0.0
    ok = True
    for _ in range(n_params):
        _, p = params[int(rng.integers(len(params)))]
        idx = tuple(int(rng.integers(s)) for s in p.shape)
        grad = p.grad[idx].item()
        with torch.no_grad():
            orig = p[idx].item()
            p[idx] = orig + h
            up = loss_fn().item()
            p[idx] = orig - h
            down = loss_fn().item()
            p[idx] = orig
        fd = (up - down) / (2 * h)
        rel = abs(grad - fd) / max(abs(grad), abs(fd), 1e-8)
        worst = max(worst, rel)
        ok = ok and rel < 1e-3
    return [_result("gradient_check/dsm_loss", ok,
                    f"worst relative error {worst:.2e} over {n_params} parameters")]


# -- estimators ---------------------------------------------------------


def estimator_oracles(seed=0, n_tail=1_000_000, n_iid=100_000) -> list[OracleResult]:
    out = []
    pareto = pareto_returns(n_tail, density_exponent=4.0, seed=seed + 3)
    fit_p = tail_exponent(pareto)
    out.append(_result(
        "estimators/tail_pareto", abs(fit_p.alpha - 4.0) < 0.3,
        f"alpha {fit_p.alpha:.3f} (target 4.0 +- 0.3)",
    ))
    t4 = student_t_returns(n_tail, df=4.0, seed=seed + 2)
    fit_t = tail_exponent(t4)
    out.append(_result(
        "estimators/tail_student_t4", abs(fit_t.alpha - 5.0) < 0.4,
        f"alpha {fit_t.alpha:.3f} (target 5.0 +- 0.4)",
    ))
    iid = np.random.default_rng(seed + 29).normal(size=n_iid)
    lev = leverage(iid, max_lag=100)
    se = leverage_bootstrap_se(iid, max_lag=100, n_boot=64, seed=seed + 1)
    frac = float(np.mean(np.abs(lev) < 3 * se))
    out.append(_result(
        "estimators/leverage_iid_null", frac >= 0.95,
        f"{frac:.0%} of lags within 3 bootstrap standard errors",
    ))
    k = np.arange(1, 101)
    beta = fit_beta(k ** -0.3)
    out.append(_result(
        "estimators/beta_exact_power_law", abs(beta - 0.3) < 1e-6,
        f"beta {beta:.9f} (target 0.3 +- 1e-6)",
    ))
    return out


# -- end-to-end learning -----------------------------------------------


def dsm_learning_oracle(seed=0, epochs=200, n_windows=512, length=32,
                        data_std=0.2, eval_times=(0.2, 0.5, 0.9),
                        n_gen=256, gen_steps=500):
    """Train on iid Gaussian toy windows; compare against the analytic score.

    Returns (results, info dict). The trained network must match
    -x/(data_var + sigma_t^2) within 15% relative L2 over the +-2 std
    band, and generated samples must match the data variance within 10%.
    """
    process = DiffusionProcess(kind="ve", schedule=NoiseSchedule(kind="linear"))
    net_config = ScoreNetConfig(
        length=length, channels=16, diff_embed_dim=32, feat_embed_dim=8,
        time_embed_dim=16, n_res_blocks=4, n_heads=4,
    )
    rng = np.random.default_rng(seed)
    dataset = (data_std * rng.standard_normal((n_windows, length))).astype(np.float32)
    config = TrainConfig(
        batch_size=64, epochs=epochs, learning_rate=1e-3, seed=seed,
        n_embed_steps=2000, threads=None,
    )
    checkpoint = fit(config, process, dataset, net_config)
    net = checkpoint.build_net()
    net.eval()

    from .sample import scorenet_score_fn  # local to avoid cycle at import time

    score_fn = scorenet_score_fn(net, process, config.n_embed_steps)
    data_var = data_std ** 2
    results = []
    rel_errors = {}
    for t in eval_times:
        marg_var = data_var + process.schedule.sigma(t) ** 2
        draws = rng.normal(0.0, math.sqrt(marg_var), size=(256, length))
        pred = score_fn(draws, t)
        truth = -draws / marg_var
        band = np.abs(draws) <= 2.0 * math.sqrt(marg_var)
        rel = np.linalg.norm(pred[band] - truth[band]) / np.linalg.norm(truth[band])
        rel_errors[t] = float(rel)
        results.append(_result(
            f"dsm_learning/score_match_t{t}", rel < 0.15,
            f"relative L2 error {rel:.3f} (limit 0.15)",
        ))

    spec = GenerationSpec(
        n_series=n_gen, length=length, n_steps=gen_steps, seed=seed + 7
    )
    samples = generate(net, spec, process, n_embed_steps=config.n_embed_steps)
    var_ratio = samples.var() / data_var
    results.append(_result(
        "dsm_learning/generated_variance", abs(var_ratio - 1.0) < 0.10,
        f"variance ratio {var_ratio:.3f} (limit 1.0 +- 0.10)",
    ))
    info = {
        "rel_errors": rel_errors,
        "var_ratio": float(var_ratio),
        "checkpoint": checkpoint,
        "loss_history": checkpoint.loss_history,
    }
    return results, info


def desk_protocol_comparison(seed=0, n_windows=2000, length=512, epochs=100,
                             n_series=20, n_steps=500, batch_size=64,
                             channels=16, log=None) -> dict:
    """Desk-scale directional check: GBM-exponential vs VE-linear.

    Trains both configurations on the same GARCH(1,1) window corpus and
    identical budget, generates series, and measures the pooled tail
    exponent of generated returns plus the averaged leverage at lag 0.
    """
    from .data import normalize
    from .metrics import aggregate_report
    from .synthetic import garch_window_dataset

    raw = garch_window_dataset(n_windows, length, seed=seed)
    normalized, scale = normalize(raw)
    net_config = ScoreNetConfig(
        length=length, channels=channels, diff_embed_dim=64,
        feat_embed_dim=16, time_embed_dim=64, n_res_blocks=4, n_heads=4,
    )
    out = {"seed": seed, "scale": scale}
    for label, pkind, skind in (
        ("gbm_exponential", "gbm", "exponential"),
        ("ve_linear", "ve", "linear"),
    ):
        process = DiffusionProcess(kind=pkind, schedule=NoiseSchedule(kind=skind))
        config = TrainConfig(
            batch_size=batch_size, epochs=epochs, learning_rate=1e-3,
            seed=seed, n_embed_steps=2000,
        )
        checkpoint = fit(config, process, normalized, net_config)
        net = checkpoint.build_net()
        spec = GenerationSpec(
            n_series=n_series, length=length, n_steps=n_steps,
            seed=seed + 1000, scale=scale,
        )
        series = generate(net, spec, process, n_embed_steps=config.n_embed_steps)
        returns = np.diff(series, axis=1)
        report = aggregate_report(list(returns))
        out[label] = {
            "alpha": report.alpha,
            "alpha_stderr": report.alpha_stderr,
            "beta": report.beta,
            "leverage0": float(report.leverage[0]),
            "final_loss": float(checkpoint.loss_history[-1]),
        }
        if log is not None:
            print(f"[seed {seed}] {label}: alpha={report.alpha:.3f} "
                  f"beta={report.beta:.3f} L(0)={report.leverage[0]:+.3f}",
                  file=log, flush=True)
    gbm, ve = out["gbm_exponential"], out["ve_linear"]
    out["passes"] = bool(
        3.0 <= gbm["alpha"] <= 6.0
        and gbm["alpha"] < ve["alpha"]
        and gbm["leverage0"] < 0.0
    )
    return out


def default_suite(seed=0) -> list[OracleResult]:
    """The oracle set run by the CLI: schedules, kernels, reverse run,
    gradients, estimators (training oracles live in the test suite)."""
    out = []
    out += schedule_calculus_oracle()
    out += kernel_em_oracle(n_paths=4_000, n_steps=400, seed=seed)
    out += exact_score_reverse_oracle(n_paths=1_000, length=8, n_steps=500, seed=seed)
    out += gradient_check_oracle(seed=seed)
    out += estimator_oracles(seed=seed, n_tail=300_000, n_iid=50_000)
    return out
