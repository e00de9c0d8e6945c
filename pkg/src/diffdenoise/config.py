"""Run configuration: one YAML document, strictly validated.

Unknown keys are errors (they are almost always typos in coefficient
names), every diagnostic carries the field path, and cross-field
constraints (divisibility by the cascade factor, rollback step inside
the timestep sub-sequence) are checked before any work starts.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any

import yaml

from .lam import VARIANTS, LambdaPolicy
from .phantom import NoiseModel, PhantomSpec
from .schedule import NoiseSchedule, TauSchedule, linear_beta_schedule, make_tau

__all__ = ["ConfigError", "RunConfig", "load_config", "PRESETS"]


class ConfigError(Exception):
    """Invalid configuration; message includes the offending field path."""


def _take(section: dict, path: str, key: str, kind, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    value = section.pop(key)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {value!r}")
    return value


def _section(doc: dict, name: str) -> dict:
    value = doc.pop(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{name}: expected a mapping")
    return value


def _reject_unknown(section: dict, path: str) -> None:
    if section:
        key = sorted(section)[0]
        raise ConfigError(f"{path}.{key}: unknown key")


def _pair(section: dict, path: str, key: str, kind, default):
    value = section.pop(key, None)
    if value is None:
        return default
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"{path}.{key}: expected a two-element list")
    return (kind(value[0]), kind(value[1]))


@dataclass(frozen=True)
class StageParams:
    timesteps: int
    beta1: float
    betaT: float
    dense_end: int
    dense_stride: int
    sparse_stride: int
    lambda0: float

    def schedule(self) -> NoiseSchedule:
        return linear_beta_schedule(self.timesteps, self.beta1, self.betaT)

    def tau(self) -> TauSchedule:
        return make_tau(self.timesteps, self.dense_end, self.dense_stride,
                        self.sparse_stride)


@dataclass(frozen=True)
class RunConfig:
    output_dir: str
    seed: int
    k: int
    averaging: int
    rollback_step: int
    lr: StageParams
    hr: StageParams
    lambda_variant: str
    lambda_a: float
    lambda_b: float
    lambda_c: float
    phantom: PhantomSpec
    noise: NoiseModel
    train_count: int
    test_count: int
    train_seed: int
    test_seed: int
    train_steps: int
    learning_rate: float
    batch_size: int
    base_channels: int
    n_hidden: int
    emb_dim: int
    lr_checkpoint: str
    hr_checkpoint: str
    clean_dataset: str
    noisy_dataset: str
    train_dataset: str

    def lambda_policy(self, stage: str) -> LambdaPolicy:
        """Low-resolution stage always uses the constant variant."""
        if stage == "lr":
            return LambdaPolicy(variant="constant", lambda0=self.lr.lambda0)
        return LambdaPolicy(variant=self.lambda_variant, lambda0=self.hr.lambda0,
                            a=self.lambda_a, b=self.lambda_b, c=self.lambda_c)


# Defaults sized for desk-scale runs; the "paper" preset restores the
# full-scale schedule and reference coefficients.
PRESETS: dict[str, dict[str, Any]] = {
    "toy": {},
    "paper": {
        "schedule": {
            "lr": {"timesteps": 2000, "beta1": 1.0e-6, "betaT": 1.0e-2},
            "hr": {"timesteps": 2000, "beta1": 1.0e-6, "betaT": 1.0e-2},
        },
        "tau": {
            "lr": {"dense_end": 501, "dense_stride": 20, "sparse_stride": 500},
            "hr": {"dense_end": 501, "dense_stride": 20, "sparse_stride": 500},
        },
        "lambda": {"lr_lambda0": 0.002, "hr_lambda0": 0.0075,
                   "a": 1.5, "b": -0.01, "c": 0.3},
        # 3 is not an element of the accelerated sub-sequence; the nearest
        # retained timestep is used instead.
        "cascade": {"rollback_step": 21},
    },
}


def _merge(base: dict, override: dict) -> dict:
    # deep-copy the base: parsing consumes keys destructively, and the
    # preset dictionaries must survive repeated use within one process
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _stage(sched: dict, tau: dict, lam0: float, name: str,
           t_default: int, dense_default: int) -> StageParams:
    s = sched.pop(name, {})
    t = tau.pop(name, {})
    path_s, path_t = f"schedule.{name}", f"tau.{name}"
    if not isinstance(s, dict):
        raise ConfigError(f"{path_s}: expected a mapping")
    if not isinstance(t, dict):
        raise ConfigError(f"{path_t}: expected a mapping")
    params = StageParams(
        timesteps=_take(s, path_s, "timesteps", int, t_default),
        beta1=_take(s, path_s, "beta1", float, 1.0e-5),
        betaT=_take(s, path_s, "betaT", float, 0.08),
        dense_end=_take(t, path_t, "dense_end", int, dense_default),
        dense_stride=_take(t, path_t, "dense_stride", int, 2),
        sparse_stride=_take(t, path_t, "sparse_stride", int, dense_default),
        lambda0=lam0,
    )
    _reject_unknown(s, path_s)
    _reject_unknown(t, path_t)
    return params


def parse_config(doc: dict, preset: str = "toy") -> RunConfig:
    if preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}")
    doc = _merge(PRESETS[preset], doc)

    output_dir = _take(doc, "", "output_dir", str, required=True).strip()
    seed = _take(doc, "", "seed", int, 0)
    if seed < 0:
        raise ConfigError("seed: must be non-negative")

    cascade = _section(doc, "cascade")
    k = _take(cascade, "cascade", "k", int, 2)
    averaging = _take(cascade, "cascade", "averaging", int, 10)
    rollback = _take(cascade, "cascade", "rollback_step", int, 21)
    _reject_unknown(cascade, "cascade")

    lam = _section(doc, "lambda")
    variant = _take(lam, "lambda", "variant", str, "combined")
    if variant not in VARIANTS:
        raise ConfigError(f"lambda.variant: must be one of {VARIANTS}")
    lr_lambda0 = _take(lam, "lambda", "lr_lambda0", float, 0.3)
    hr_lambda0 = _take(lam, "lambda", "hr_lambda0", float, 0.4)
    a = _take(lam, "lambda", "a", float, 31.8)
    b = _take(lam, "lambda", "b", float, -0.18)
    c = _take(lam, "lambda", "c", float, 18.0)
    _reject_unknown(lam, "lambda")

    sched = _section(doc, "schedule")
    tau = _section(doc, "tau")
    lr = _stage(sched, tau, lr_lambda0, "lr", 200, 50)
    hr = _stage(sched, tau, hr_lambda0, "hr", 200, 50)
    _reject_unknown(sched, "schedule")
    _reject_unknown(tau, "tau")

    ph = _section(doc, "phantom")
    width = _take(ph, "phantom", "width", int, 64)
    height = _take(ph, "phantom", "height", int, 64)
    ellipses = _pair(ph, "phantom", "ellipses", int, (3, 6))
    intensity = _pair(ph, "phantom", "intensity", float, (0.15, 0.45))
    background = _take(ph, "phantom", "background", float, 0.1)
    train_count = _take(ph, "phantom", "train_count", int, 64)
    test_count = _take(ph, "phantom", "test_count", int, 16)
    train_seed = _take(ph, "phantom", "train_seed", int, 1000)
    test_seed = _take(ph, "phantom", "test_seed", int, 2000)
    _reject_unknown(ph, "phantom")

    noise = _section(doc, "noise")
    kind = _take(noise, "noise", "kind", str, "gaussian")
    nm_kwargs = {}
    for key in ("sigma", "sigma_min", "sigma_max", "base", "gain"):
        value = _take(noise, "noise", key, float, None)
        if value is not None:
            nm_kwargs[key] = value
    _reject_unknown(noise, "noise")

    model = _section(doc, "model")
    lr_ckpt = _take(model, "model", "lr_checkpoint", str, "lr_model.ckpt")
    hr_ckpt = _take(model, "model", "hr_checkpoint", str, "hr_model.ckpt")
    base_channels = _take(model, "model", "base_channels", int, 24)
    n_hidden = _take(model, "model", "n_hidden", int, 2)
    emb_dim = _take(model, "model", "emb_dim", int, 32)
    _reject_unknown(model, "model")

    train = _section(doc, "train")
    steps = _take(train, "train", "steps", int, 3000)
    learning_rate = _take(train, "train", "learning_rate", float, 2.0e-3)
    batch_size = _take(train, "train", "batch_size", int, 16)
    _reject_unknown(train, "train")

    data = _section(doc, "data")
    clean = _take(data, "data", "clean", str, "clean.dds")
    noisy = _take(data, "data", "noisy", str, "noisy.dds")
    train_ds = _take(data, "data", "train", str, "train.dds")
    _reject_unknown(data, "data")

    _reject_unknown(doc, "config")

    try:
        spec = PhantomSpec(width=width, height=height, n_ellipses=ellipses,
                           intensity=intensity, background=background, seed=test_seed)
        nm = NoiseModel(kind=kind, **nm_kwargs)
    except ValueError as exc:
        raise ConfigError(f"phantom/noise: {exc}") from exc

    cfg = RunConfig(
        output_dir=output_dir, seed=seed, k=k, averaging=averaging,
        rollback_step=rollback, lr=lr, hr=hr, lambda_variant=variant,
        lambda_a=a, lambda_b=b, lambda_c=c, phantom=spec, noise=nm,
        train_count=train_count, test_count=test_count,
        train_seed=train_seed, test_seed=test_seed, train_steps=steps,
        learning_rate=learning_rate, batch_size=batch_size,
        base_channels=base_channels, n_hidden=n_hidden, emb_dim=emb_dim,
        lr_checkpoint=lr_ckpt, hr_checkpoint=hr_ckpt,
        clean_dataset=clean, noisy_dataset=noisy, train_dataset=train_ds,
    )
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: RunConfig) -> None:
    if cfg.k < 2:
        raise ConfigError("cascade.k: must be >= 2")
    if cfg.phantom.width % cfg.k or cfg.phantom.height % cfg.k:
        raise ConfigError("cascade.k: phantom dimensions must be divisible by k")
    if cfg.averaging < 1:
        raise ConfigError("cascade.averaging: must be >= 1")
    for name, stage in (("lr", cfg.lr), ("hr", cfg.hr)):
        try:
            stage.schedule()
            taus = stage.tau()
        except ValueError as exc:
            raise ConfigError(f"schedule.{name}/tau.{name}: {exc}") from exc
        if name == "hr" and cfg.rollback_step:
            if cfg.rollback_step not in taus.taus or cfg.rollback_step >= taus.last:
                raise ConfigError(
                    "cascade.rollback_step: must be 0 or an element of tau.hr below its top"
                )


def load_config(path: str, preset: str = "toy", seed_override: int | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML in {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a mapping")
    if seed_override is not None:
        doc["seed"] = seed_override
    return parse_config(doc, preset=preset)
