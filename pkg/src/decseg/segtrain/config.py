from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule and loop settings for one training stage.

    Defaults follow the category-model recipe (SGD, 2e-3, 1k warmup, poly
    decay). ``ensemble_defaults`` gives the fusion-network recipe.
    """

    iterations: int = 90_000
    base_lr: float = 2e-3
    warmup_iters: int = 1_000
    poly_power: float = 0.9
    optimizer: str = "sgd"
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 8
    crop: tuple[int, int] | None = None  # (width, height)
    ema_alpha: float = 0.9999
    ema_mode: str = "teacher"  # teacher | literal
    pseudo_threshold: float = 0.9
    target_weight: float = 1.0
    seed: int = 0
    deterministic: bool = False
    log_every: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0 <= self.warmup_iters <= self.iterations:
            raise ValueError(f"warmup_iters must lie in [0, {self.iterations}], got {self.warmup_iters}")
        if not self.base_lr > 0:
            raise ValueError("base_lr must be > 0")
        if not 0 <= self.ema_alpha < 1:
            raise ValueError("ema_alpha must lie in [0, 1)")
        if self.optimizer not in ("sgd", "adamw"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.ema_mode not in ("teacher", "literal"):
            raise ValueError(f"unknown ema_mode {self.ema_mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.crop is not None:
            object.__setattr__(self, "crop", tuple(int(c) for c in self.crop))

    @classmethod
    def ensemble_defaults(cls, **overrides) -> "TrainConfig":
        base = dict(base_lr=5e-4, warmup_iters=8_000, optimizer="adamw", weight_decay=0.01, ema_alpha=0.9999)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict | None) -> "TrainConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["crop"] is not None:
            d["crop"] = list(d["crop"])
        return d

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def lr_schedule(t: int, config: TrainConfig) -> float:
    """Linear warmup followed by polynomial decay to zero at ``iterations``."""
    n, warm, eta = config.iterations, config.warmup_iters, config.base_lr
    if t < 0 or t > n:
        raise IndexError(f"step {t} outside [0, {n}]")
    if t < warm:
        return eta * (t + 1) / warm
    if n == warm:
        return 0.0
    return eta * (1.0 - (t - warm) / (n - warm)) ** config.poly_power



# Short CPU runs on the toy domain. A 0.9999 EMA barely moves within a few
# thousand steps, so these use a faster teacher and AdamW.
def desk_category_config(iterations: int = 600, **overrides) -> TrainConfig:
    base = dict(iterations=iterations, base_lr=3e-3, warmup_iters=iterations // 10,
                optimizer="adamw", weight_decay=1e-4, batch_size=8)
    return TrainConfig(**{**base, **overrides})


def desk_adapt_config(iterations: int = 300, **overrides) -> TrainConfig:
    base = dict(iterations=iterations, base_lr=1e-3, warmup_iters=0, optimizer="adamw",
                weight_decay=1e-4, batch_size=8, ema_alpha=0.99)
    return TrainConfig(**{**base, **overrides})


def desk_ensemble_config(iterations: int = 1500, **overrides) -> TrainConfig:
    return TrainConfig.ensemble_defaults(**{"iterations": iterations, "warmup_iters": iterations // 10,
                                            "ema_alpha": 0.99, "base_lr": 5e-3, **overrides})
