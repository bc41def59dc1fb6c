"""Run configuration: defaults, config-file parsing, and override layering.

Config files are plain ``key = value`` text; blank lines and ``#`` comments
are ignored. CLI flags override file values, which override defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass


@dataclass
class TrainConfig:
    # model dimensions
    d_model: int = 128
    heads: int = 4
    layers: int = 2
    d_ff: int = 0  # 0 means 4 * d_model
    max_seq_len: int = 512
    ln_eps: float = 1e-5
    # optimization
    lr: float = 0.01
    enc_lr_scale: float = 0.05
    joint_lr_scale: float = 0.1
    adagrad_eps: float = 1e-8
    mle_steps: int = 2000
    critic_steps: int = 500
    joint_steps: int = 3000
    batch_size: int = 8
    # decoding and reward
    max_decode_steps: int = 30
    temperature: float = 1.0
    n_max: int = 1
    reward_eps: float = 1e-9
    # vocabulary
    vocab_max: int = 8192
    vocab_min_freq: int = 1
    # bookkeeping
    eval_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.d_ff == 0:
            self.d_ff = 4 * self.d_model
        self.validate()

    def validate(self) -> None:
        if self.d_model <= 0 or self.d_model % self.heads != 0:
            raise ValueError(f"d_model {self.d_model} must be positive and divisible by heads {self.heads}")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.max_decode_steps < 1:
            raise ValueError("max_decode_steps must be >= 1")
        if not 1 <= self.n_max <= 4:
            raise ValueError(f"n_max must be in [1, 4], got {self.n_max}")
        if self.reward_eps <= 0:
            raise ValueError("reward_eps must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.vocab_max <= 4:
            raise ValueError("vocab_max must exceed 4")
        if self.enc_lr_scale <= 0:
            raise ValueError("enc_lr_scale must be positive")
        if self.joint_lr_scale <= 0:
            raise ValueError("joint_lr_scale must be positive")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines into a typed override dict."""
    overrides: dict = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            overrides[key] = _coerce(key, value)
    return overrides


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    if kind in (int, "int"):
        return int(value)
    if kind in (float, "float"):
        return float(value)
    return value


def load_config(path=None, **overrides) -> TrainConfig:
    """Layer defaults, an optional config file, and keyword overrides."""
    merged: dict = {}
    if path is not None:
        merged.update(parse_config_file(path))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**merged)
