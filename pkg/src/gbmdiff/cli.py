"""Command-line entry point: prepare, train, sample, evaluate, oracle.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure,
5 oracle failure.
"""

from __future__ import annotations

import argparse
import csv
import glob
import os
import sys

import numpy as np
import torch

from . import data as data_mod
from . import metrics as metrics_mod
from .config import RunConfig, apply_overrides, apply_preset, load_config
from .errors import ConfigError, DataError, GbmdError, NumericError, OracleFailure
from .oracles import default_suite
from .sample import (
    generate,
    load_series_csv,
    save_series_csv,
    to_returns,
    write_sidecar,
)
from .train import TrainingDiverged, fit, load_checkpoint, save_checkpoint

__all__ = ["main"]


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def cmd_prepare(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    pattern = os.path.join(config.paths.input_dir, "*.csv")
    files = sorted(glob.glob(pattern))
    if not files:
        raise DataError(f"no CSV files under {config.paths.input_dir}")
    all_windows = []
    sources: dict[str, int] = {}
    for path in files:
        ticker = os.path.splitext(os.path.basename(path))[0]
        if not data_mod.is_clean_ticker(ticker):
            print(f"{ticker}: skipped (non-standard symbol)", file=out)
            continue
        series = data_mod.ingest_csv(path)
        if not data_mod.filter_by_history(series, config.data.min_years):
            print(f"{ticker}: skipped (history under {config.data.min_years} years)",
                  file=out)
            sources[ticker] = 0
            continue
        windows = data_mod.make_windows(
            data_mod.log_returns(series), config.length, config.data.stride,
            ticker=ticker,
        )
        sources[ticker] = len(windows)
        all_windows.extend(windows)
        print(f"{ticker}: {len(windows)} windows", file=out)
    if not all_windows:
        raise DataError("no windows extracted (series too short?)")
    normalized, scale = data_mod.normalize(all_windows)
    manifest = data_mod.DatasetManifest(
        length=config.length,
        stride=config.data.stride,
        n_windows=len(all_windows),
        global_scale=scale,
        sources=sources,
    )
    _ensure_parent(config.paths.dataset)
    data_mod.save_dataset(normalized.astype(np.float32), manifest,
                          config.paths.dataset)
    print(f"dataset: {len(all_windows)} windows of length {config.length} "
          f"(scale {scale:.6g}) -> {config.paths.dataset}", file=out)
    return 0


def cmd_train(config: RunConfig, threads=None, out=None) -> int:
    out = out or sys.stdout
    windows, manifest = data_mod.load_dataset(config.paths.dataset)
    if manifest.length != config.length:
        raise ConfigError(
            f"dataset length {manifest.length} does not match config length "
            f"{config.length}"
        )
    process = config.make_process()
    net_config = config.make_net_config()
    train_config = config.make_train_config(threads=threads)
    _ensure_parent(config.paths.checkpoint)
    _ensure_parent(config.paths.train_log)
    try:
        checkpoint = fit(
            train_config, process, windows, net_config,
            log_path=config.paths.train_log,
        )
    except TrainingDiverged as exc:
        if exc.checkpoint is not None:
            save_checkpoint(exc.checkpoint, config.paths.checkpoint)
            print(f"diverged; kept last good checkpoint at epoch "
                  f"{exc.checkpoint.epoch}", file=out)
        raise
    save_checkpoint(checkpoint, config.paths.checkpoint)
    final = checkpoint.loss_history[-1] if len(checkpoint.loss_history) else float("nan")
    print(f"trained {checkpoint.epoch} epochs (final mean loss {final:.4f}) "
          f"-> {config.paths.checkpoint}", file=out)
    return 0


def cmd_sample(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    checkpoint = load_checkpoint(config.paths.checkpoint)
    _, manifest = data_mod.load_dataset(config.paths.dataset)
    spec = config.make_generation_spec(scale=manifest.global_scale)
    if checkpoint.net_config.length != spec.length:
        raise ConfigError(
            f"checkpoint was trained at length {checkpoint.net_config.length}, "
            f"config asks for {spec.length}"
        )
    net = checkpoint.build_net()
    process = config.make_process()
    series = generate(net, spec, process, n_embed_steps=checkpoint.n_embed_steps)
    _ensure_parent(config.paths.series)
    save_series_csv(series, config.paths.series)
    write_sidecar(config.paths.sidecar, spec, process,
                  checkpoint_path=config.paths.checkpoint)
    print(f"generated {spec.n_series} x {spec.length} log-space values "
          f"-> {config.paths.series}", file=out)
    return 0


def _curves_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _lenient_report(series, warnings, label):
    """Per-family estimation; failures are recorded, not fatal."""
    returns = [to_returns(s) for s in series]
    report = metrics_mod.StylizedFactsReport(
        alpha=float("nan"), alpha_stderr=float("nan"), beta=float("nan"),
        acf=np.full(100, np.nan), leverage=np.zeros(101), n_series=len(returns),
        n_obs=int(sum(r.size for r in returns)),
    )
    pooled = np.sort(np.concatenate([r.ravel() for r in returns]))
    try:
        tail = metrics_mod.tail_exponent(pooled)
        report.alpha, report.alpha_stderr = tail.alpha, tail.stderr
        report.tail_bin_centers = tail.bin_centers
        report.tail_bin_density = tail.bin_density
    except GbmdError as exc:
        warnings.append(f"{label}: tail exponent unavailable: {exc}")
    try:
        acf_stack = np.stack([metrics_mod.acf_abs(r, 100) for r in returns])
        report.acf = metrics_mod._exact_column_mean(acf_stack)
        report.beta = metrics_mod.fit_beta(report.acf, (1, 100))
    except GbmdError as exc:
        warnings.append(f"{label}: volatility clustering unavailable: {exc}")
    try:
        lev_stack = np.stack([metrics_mod.leverage(r, 100) for r in returns])
        report.leverage = metrics_mod._exact_column_mean(lev_stack)
    except GbmdError as exc:
        warnings.append(f"{label}: leverage unavailable: {exc}")
    return report


def cmd_evaluate(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    from .plotting import render_report_figures

    series = load_series_csv(config.paths.series)
    warnings: list[str] = []
    report = _lenient_report(series, warnings, "generated")
    reference = None
    if config.paths.reference_series:
        ref_series = load_series_csv(config.paths.reference_series)
        reference = _lenient_report(ref_series, warnings, "reference")

    out_dir = config.paths.report_dir
    os.makedirs(out_dir, exist_ok=True)
    payload = report.to_json()
    if warnings or reference is not None:
        import json as _json

        blob = _json.loads(payload)
        blob["warnings"] = warnings
        if reference is not None:
            blob["reference"] = _json.loads(reference.to_json())
        payload = _json.dumps(blob, sort_keys=True, indent=2)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(payload + "\n")

    _curves_csv(
        os.path.join(out_dir, "acf_abs.csv"), ["lag", "value"],
        list(enumerate(report.acf.tolist(), start=1)),
    )
    _curves_csv(
        os.path.join(out_dir, "leverage.csv"), ["lag", "value"],
        list(enumerate(report.leverage.tolist())),
    )
    _curves_csv(
        os.path.join(out_dir, "tail_density.csv"), ["abs_return", "density"],
        list(zip(report.tail_bin_centers.tolist(), report.tail_bin_density.tolist())),
    )
    render_report_figures(report, out_dir, reference)
    for w in warnings:
        print(f"warning: {w}", file=out)
    print(f"report: alpha={report.alpha:.3f} beta={report.beta:.3f} "
          f"L(0)={report.leverage[0]:+.3f} -> {out_dir}", file=out)
    return 0


def cmd_oracle(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    results = default_suite(seed=config.seed)
    failures = [r for r in results if not r.passed]
    for r in results:
        print(r.line(), file=out)
    print(f"{len(results) - len(failures)}/{len(results)} oracle checks passed",
          file=out)
    if failures:
        raise OracleFailure(f"{len(failures)} oracle check(s) failed")
    return 0


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbmd",
        description="GBM-noised score diffusion for financial time series",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY=VALUE", help="override a config value (repeatable)",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="torch thread count; 1 forces deterministic mode")
    parser.add_argument("--preset", choices=["desk", "paper"], default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.preset:
            config = apply_preset(config, args.preset)
        config = apply_overrides(config, args.overrides)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            torch.set_num_threads(args.threads)
        if args.command == "train":
            return cmd_train(config, threads=args.threads)
        return COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return 5
    except (NumericError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
