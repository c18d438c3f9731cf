"""Experiment configuration: defaults, the flat key=value file format, and
typed coercion from files and CLI flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .env import TASKS
from .errors import ConfigurationError
from .perception import DEFAULT_CAMERA_PIVOT
from .rewards import REWARD_MODES, RewardMode


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one training/evaluation setup.

    seeds is a count: run seeds are seed_base, seed_base + 1, ...
    switch_episode=None means "total_episodes // 3" when the mode is
    dense2sparse.
    """

    task: str = "reach"
    reward_mode: str = "dense"
    switch_episode: int | None = None
    shift_deg: float = 0.0
    target_mean_error: float = 0.014
    camera_pivot: tuple = DEFAULT_CAMERA_PIVOT
    total_episodes: int = 400
    horizon: int = 200
    discount: float = 0.9
    eval_every: int = 5
    eval_start: int = 20
    eval_episodes: int = 200
    eval_episodes_per_point: int = 10
    seeds: int = 3
    seed_base: int = 0
    out_dir: str = "runs"
    # TD3 overrides
    hidden_sizes: tuple = (256, 256)
    batch_size: int = 256
    learning_rate: float = 3e-4
    tau: float = 0.005
    policy_delay: int = 2
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    exploration_noise_std: float = 0.1
    warmup_steps: int = 1000
    buffer_capacity: int = 200_000
    n_jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.task not in TASKS:
            raise ConfigurationError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigurationError(
                f"reward_mode must be one of {REWARD_MODES}, got {self.reward_mode!r}"
            )
        if self.total_episodes < 0:
            raise ConfigurationError(f"total_episodes must be >= 0, got {self.total_episodes}")
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {self.horizon}")
        if not 0.0 < self.discount < 1.0:
            raise ConfigurationError(f"discount must lie in (0, 1), got {self.discount}")
        if self.eval_every < 1:
            raise ConfigurationError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.eval_episodes < 1 or self.eval_episodes_per_point < 1:
            raise ConfigurationError("evaluation episode counts must be >= 1")
        if self.seeds < 1:
            raise ConfigurationError(f"seeds must be >= 1, got {self.seeds}")
        if self.switch_episode is not None and self.switch_episode < 1:
            raise ConfigurationError(f"switch_episode must be >= 1, got {self.switch_episode}")
        if self.target_mean_error <= 0.0:
            raise ConfigurationError(
                f"target_mean_error must be positive, got {self.target_mean_error}"
            )
        if self.warmup_steps < self.batch_size:
            raise ConfigurationError(
                "warmup_steps must cover at least one batch "
                f"({self.warmup_steps} < {self.batch_size})"
            )
        return self

    def resolved_switch_episode(self) -> int | None:
        """Switch point actually used: explicit value, or a third of training."""
        if self.reward_mode != "dense2sparse":
            return None
        if self.switch_episode is not None:
            return self.switch_episode
        return max(1, self.total_episodes // 3)

    def make_reward_mode(self) -> RewardMode:
        return RewardMode(self.reward_mode, self.resolved_switch_episode())

    def seed_list(self) -> list[int]:
        return [self.seed_base + i for i in range(self.seeds)]

    def run_label(self, seed: int) -> str:
        mode = self.make_reward_mode().label()
        return f"{self.task}_{mode}_shift{_fmt(self.shift_deg)}_seed{seed}"


def _fmt(x) -> str:
    """Compact numeric string for file names (10.0 -> '10')."""
    xf = float(x)
    return str(int(xf)) if xf == int(xf) else str(xf)


_INT_KEYS = {
    "switch_episode", "total_episodes", "horizon", "eval_every", "eval_start",
    "eval_episodes", "eval_episodes_per_point", "seeds", "seed_base",
    "batch_size", "policy_delay", "warmup_steps", "buffer_capacity", "n_jobs",
}
_FLOAT_KEYS = {
    "shift_deg", "target_mean_error", "discount", "learning_rate", "tau",
    "target_noise_std", "target_noise_clip", "exploration_noise_std",
}
_TUPLE_KEYS = {"hidden_sizes": int, "camera_pivot": float}
_STR_KEYS = {"task", "reward_mode", "out_dir"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | set(_TUPLE_KEYS) | _STR_KEYS


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _TUPLE_KEYS:
        cast = _TUPLE_KEYS[key]
        return tuple(cast(part) for part in raw.replace(",", " ").split())
    return raw


def parse_config_text(text: str) -> dict:
    """Parse the flat `key = value` format (# starts a comment)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, updated by config-file values, updated by CLI overrides."""
    merged = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is not None:
                merged[key] = value
    unknown = set(merged) - {f.name for f in fields(ExperimentConfig)}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**merged).validate()


def config_to_text(config: ExperimentConfig) -> str:
    """Serialize in the config-file format; round-trips through parse_config_text."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = " ".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
