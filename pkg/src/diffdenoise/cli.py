"""Command-line entry point.

Subcommands: gen-phantoms, train, sample, denoise, eval, ablate-lambda.
All randomness flows from config seeds, so re-running a command with the
same config reproduces its outputs byte for byte (wall-clock timings go
to a separate timing.csv that is excluded from that guarantee).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch

from . import fileio
from .cascade import CascadeConfig, cascade_denoise_report, downsample
from .config import ConfigError, RunConfig, load_config
from .epsnet import (EpsMeanPredictor, EpsPredictorNet, load_checkpoint,
                     save_checkpoint, train_eps_predictor)
from .lam import LambdaPolicy
from .metrics import MetricWindow, psnr, ssim
from .phantom import corrupt, generate_phantoms
from .prior import ancestral_sample
from .solver import DenoiseConfig

_CSV_HEADER = "# diffdenoise report v1\n"
_WINDOW = MetricWindow(0.0, 1.0)


def _path(cfg: RunConfig, name: str) -> str:
    return name if os.path.isabs(name) else os.path.join(cfg.output_dir, name)


def _require(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"{what}: file not found: {path}")
    return path


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(_CSV_HEADER)
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if v == float("inf") else f"{v:.8g}"
    return str(v)


def cmd_gen_phantoms(cfg: RunConfig) -> None:
    train_spec = dataclasses.replace(cfg.phantom, seed=cfg.train_seed)
    train_imgs = generate_phantoms(train_spec, cfg.train_count)
    test_spec = dataclasses.replace(cfg.phantom, seed=cfg.test_seed)
    clean = generate_phantoms(test_spec, cfg.test_count)
    noisy = [corrupt(img, cfg.noise, cfg.test_seed + 1 + i) for i, img in enumerate(clean)]
    fileio.write_dataset(_path(cfg, cfg.train_dataset), train_imgs)
    fileio.write_dataset(_path(cfg, cfg.clean_dataset), clean)
    fileio.write_dataset(_path(cfg, cfg.noisy_dataset), noisy)
    rows = []
    for i, (x, y) in enumerate(zip(clean, noisy)):
        rows.append([i, cfg.test_seed + 1 + i, cfg.noise.kind,
                     float((y - x).std()), psnr(y, x, _WINDOW)])
    _write_csv(os.path.join(cfg.output_dir, "manifest.csv"),
               ["index", "seed", "noise_kind", "realized_noise_std", "input_psnr_db"],
               rows)
    print(f"wrote {cfg.train_count} training and {cfg.test_count} test phantoms "
          f"to {cfg.output_dir}")


def cmd_train(cfg: RunConfig) -> None:
    torch.manual_seed(cfg.seed)
    hr_images = fileio.read_dataset(_require(_path(cfg, cfg.train_dataset), "data.train"))
    lr_images = [downsample(img, cfg.k) for img in hr_images]

    lr_net = EpsPredictorNet(conditional=False, base_channels=cfg.base_channels,
                             n_hidden=cfg.n_hidden, emb_dim=cfg.emb_dim)
    train_eps_predictor(lr_net, lr_images, cfg.lr.schedule(), cfg.train_steps,
                        lr=cfg.learning_rate, seed=cfg.seed,
                        batch_size=cfg.batch_size,
                        loss_csv=os.path.join(cfg.output_dir, "lr_loss.csv"))
    save_checkpoint(lr_net, _path(cfg, cfg.lr_checkpoint))

    hr_net = EpsPredictorNet(conditional=True, base_channels=cfg.base_channels,
                             n_hidden=cfg.n_hidden, emb_dim=cfg.emb_dim)
    train_eps_predictor(hr_net, hr_images, cfg.hr.schedule(), cfg.train_steps,
                        lr=cfg.learning_rate, seed=cfg.seed + 1,
                        batch_size=cfg.batch_size, cond_images=lr_images,
                        loss_csv=os.path.join(cfg.output_dir, "hr_loss.csv"))
    save_checkpoint(hr_net, _path(cfg, cfg.hr_checkpoint))
    print(f"trained low- and high-resolution predictors ({cfg.train_steps} steps each)")


def _load_predictors(cfg: RunConfig) -> tuple[EpsMeanPredictor, EpsMeanPredictor]:
    lr_net = load_checkpoint(_require(_path(cfg, cfg.lr_checkpoint), "model.lr_checkpoint"),
                             conditional=False)
    hr_net = load_checkpoint(_require(_path(cfg, cfg.hr_checkpoint), "model.hr_checkpoint"),
                             conditional=True)
    return (EpsMeanPredictor(lr_net, cfg.lr.schedule()),
            EpsMeanPredictor(hr_net, cfg.hr.schedule()))


def cmd_sample(cfg: RunConfig, count: int) -> None:
    lr_pred, hr_pred = _load_predictors(cfg)
    out_dir = os.path.join(cfg.output_dir, "samples")
    os.makedirs(out_dir, exist_ok=True)
    for i in range(count):
        lr_img = ancestral_sample(lr_pred, cfg.lr.schedule(),
                                  (cfg.phantom.height // cfg.k, cfg.phantom.width // cfg.k),
                                  seed=cfg.seed + 2 * i)
        hr_img = ancestral_sample(hr_pred, cfg.hr.schedule(),
                                  (cfg.phantom.height, cfg.phantom.width),
                                  condition=lr_img, seed=cfg.seed + 2 * i + 1)
        fileio.write_image(os.path.join(out_dir, f"sample_{i:03d}_lr"), lr_img)
        fileio.write_image(os.path.join(out_dir, f"sample_{i:03d}_hr"), hr_img)
    print(f"wrote {count} sample pairs to {out_dir}")


def _cascade_config(cfg: RunConfig, hr_policy: LambdaPolicy | None = None) -> CascadeConfig:
    lr_stage = DenoiseConfig(tau=cfg.lr.tau(), lambda_policy=cfg.lambda_policy("lr"),
                             averaging=cfg.averaging, rollback_step=0, seed=cfg.seed)
    hr_stage = DenoiseConfig(tau=cfg.hr.tau(),
                             lambda_policy=hr_policy or cfg.lambda_policy("hr"),
                             averaging=cfg.averaging,
                             rollback_step=cfg.rollback_step, seed=cfg.seed)
    return CascadeConfig(k=cfg.k, lr_stage=lr_stage, hr_stage=hr_stage)


def _denoise_set(cfg: RunConfig, noisy, workers: int,
                 hr_policy: LambdaPolicy | None = None):
    lr_pred, hr_pred = _load_predictors(cfg)
    ccfg = _cascade_config(cfg, hr_policy)

    def run(item):
        i, y0 = item
        start = time.perf_counter()
        out, report = cascade_denoise_report(y0, ccfg, lr_pred, hr_pred,
                                             cfg.lr.schedule(), cfg.hr.schedule())
        return i, out, report, time.perf_counter() - start

    items = list(enumerate(noisy))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(item) for item in items]
    return sorted(results, key=lambda r: r[0])


def cmd_denoise(cfg: RunConfig, workers: int) -> None:
    clean = fileio.read_dataset(_require(_path(cfg, cfg.clean_dataset), "data.clean"))
    noisy = fileio.read_dataset(_require(_path(cfg, cfg.noisy_dataset), "data.noisy"))
    out_dir = os.path.join(cfg.output_dir, "denoised")
    os.makedirs(out_dir, exist_ok=True)
    results = _denoise_set(cfg, noisy, workers)
    rows, timing = [], []
    for i, out, report, wall in results:
        fileio.write_image(os.path.join(out_dir, f"denoised_{i:03d}"), out)
        x, y = clean[i], noisy[i]
        in_psnr = psnr(y, x, _WINDOW)
        in_ssim = ssim(y, x, _WINDOW)
        flagged = "clean_input" if in_psnr == float("inf") else ""
        rows.append([i, in_psnr, in_ssim, psnr(out, x, _WINDOW), ssim(out, x, _WINDOW),
                     -1.0 if report.resolved_scalar is None else report.resolved_scalar,
                     report.noise_std, flagged])
        timing.append([i, wall])
    _write_csv(os.path.join(cfg.output_dir, "report.csv"),
               ["index", "input_psnr_db", "input_ssim", "output_psnr_db",
                "output_ssim", "resolved_lambda_scalar", "noise_std_estimate", "flag"],
               rows)
    _write_csv(os.path.join(cfg.output_dir, "timing.csv"),
               ["index", "wall_time_s"], timing)
    mean_out = np.mean([r[3] for r in rows])
    print(f"denoised {len(noisy)} images; mean output PSNR {mean_out:.2f} dB")


def cmd_eval(cfg: RunConfig) -> None:
    clean = fileio.read_dataset(_require(_path(cfg, cfg.clean_dataset), "data.clean"))
    out_dir = os.path.join(cfg.output_dir, "denoised")
    rows = []
    for i, x in enumerate(clean):
        raw = os.path.join(out_dir, f"denoised_{i:03d}.raw")
        _require(raw, "denoised output")
        out = fileio.read_raw(raw)
        rows.append([i, psnr(out, x, _WINDOW), ssim(out, x, _WINDOW)])
    _write_csv(os.path.join(cfg.output_dir, "eval.csv"),
               ["index", "psnr_db", "ssim"], rows)
    print(f"evaluated {len(rows)} denoised images")


def cmd_ablate_lambda(cfg: RunConfig, grid: list[float], workers: int) -> None:
    clean = fileio.read_dataset(_require(_path(cfg, cfg.clean_dataset), "data.clean"))
    noisy = fileio.read_dataset(_require(_path(cfg, cfg.noisy_dataset), "data.noisy"))
    policies = [("constant", LambdaPolicy(variant="constant", lambda0=lam0))
                for lam0 in grid]
    for variant in ("adaptive_scalar", "adaptive_map", "combined"):
        policies.append((variant, LambdaPolicy(
            variant=variant, lambda0=cfg.hr.lambda0,
            a=cfg.lambda_a, b=cfg.lambda_b, c=cfg.lambda_c)))
    rows = []
    for name, policy in policies:
        lam0 = policy.lambda0 if name == "constant" else -1.0
        results = _denoise_set(cfg, noisy, workers, hr_policy=policy)
        for i, out, _, _ in results:
            rows.append([i, name, lam0, psnr(out, clean[i], _WINDOW),
                         ssim(out, clean[i], _WINDOW)])
    _write_csv(os.path.join(cfg.output_dir, "ablate.csv"),
               ["index", "policy", "lambda0", "psnr_db", "ssim"], rows)
    print(f"swept {len(grid)} constant values plus 3 adaptive policies "
          f"over {len(noisy)} images")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffdenoise")
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--preset", choices=("toy", "paper"), default="toy")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--workers", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-phantoms")
    sub.add_parser("train")
    p = sub.add_parser("sample")
    p.add_argument("-n", "--count", type=int, default=4)
    sub.add_parser("denoise")
    sub.add_parser("eval")
    p = sub.add_parser("ablate-lambda")
    p.add_argument("--grid", type=str, default="0.05,0.1,0.2,0.4,0.8",
                   help="comma-separated constant lambda0 values")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, preset=args.preset, seed_override=args.seed)
        os.makedirs(cfg.output_dir, exist_ok=True)
        if args.command == "gen-phantoms":
            cmd_gen_phantoms(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "sample":
            if args.count < 0:
                raise ConfigError("sample count: must be non-negative")
            cmd_sample(cfg, args.count)
        elif args.command == "denoise":
            cmd_denoise(cfg, args.workers)
        elif args.command == "eval":
            cmd_eval(cfg)
        elif args.command == "ablate-lambda":
            try:
                grid = [float(v) for v in args.grid.split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigError(f"grid: {exc}") from exc
            if not grid:
                raise ConfigError("grid: must contain at least one value")
            cmd_ablate_lambda(cfg, grid, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
