"""Run configuration, profiles, and the flat key=value config file format."""

import dataclasses
import os
from dataclasses import dataclass


class ConfigError(Exception):
    """Invalid configuration (CLI exit code 2)."""


@dataclass
class RunConfig:
    profile: str = "toy"
    input_size: int = 64          # side length after resize, divisible by 16
    c_low: int = 32               # low-level backbone channels (stride 4)
    c_high: int = 64              # high-level backbone channels (stride 16)
    decoder_dim: int = 128        # transformer token width D (= memory width d)
    lr: float = 2e-3
    weight_decay: float = 5e-4
    epochs: int = 30
    max_steps: int = 0            # 0 -> run full epochs
    seed: int = 0
    dataset_root: str = ""
    num_prompts: int = 10         # N
    min_point_dist: float = 8.0   # delta, in low-level grid pixels
    fdaf_heads: int = 4
    decoder_rounds: int = 2
    num_mask_tokens: int = 3
    corr_radius_low: int = 3
    corr_radius_high: int = 1
    checkpoint_every: int = 100
    log_every: int = 1

    def __post_init__(self):
        if self.input_size < 16 or self.input_size % 16 != 0:
            raise ConfigError(
                f"input_size must be >= 16 and divisible by 16, got {self.input_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("c_low", "c_high", "decoder_dim", "fdaf_heads",
                     "decoder_rounds", "num_mask_tokens", "num_prompts"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.min_point_dist < 0:
            raise ConfigError(f"min_point_dist must be >= 0, got {self.min_point_dist}")


PROFILES = {
    "toy": dict(profile="toy", input_size=64, c_low=32, c_high=64,
                decoder_dim=128, lr=2e-3, weight_decay=5e-4),
    "full": dict(profile="full", input_size=1024, c_low=256, c_high=256,
                 decoder_dim=256, lr=1e-5, weight_decay=5e-4, epochs=30),
}


def profile_config(name, **overrides):
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}, expected one of {sorted(PROFILES)}")
    kw = dict(PROFILES[name])
    kw.update(overrides)
    return RunConfig(**kw)


def _coerce(field, raw):
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    return raw


def parse_config_file(path):
    """Parse a flat ``key = value`` file into a dict of typed values."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                out[key] = _coerce(fields[key], raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {raw!r}") from exc
    return out


def build_config(profile="toy", config_file=None, **cli_overrides):
    """Profile defaults < config file < CLI flags < MIRRORSEG_SEED env var."""
    kw = dict(PROFILES.get(profile) or ())
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    if config_file:
        kw.update(parse_config_file(config_file))
    kw.update({k: v for k, v in cli_overrides.items() if v is not None})
    env_seed = os.environ.get("MIRRORSEG_SEED")
    if env_seed is not None:
        try:
            kw["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"MIRRORSEG_SEED must be an integer, got {env_seed!r}") from exc
    return RunConfig(**kw)
