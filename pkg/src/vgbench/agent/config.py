"""Agent hyperparameters. Defaults follow the published SAC+AUG settings."""

from dataclasses import asdict, dataclass, fields

from ..augment import parse_pipeline
from ..envcore import ConfigError


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    batch_size: int = 256
    buffer_capacity: int = 100_000
    warmup_steps: int = 1_000
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    encoder_lr: float = 1e-3
    alpha_lr: float = 1e-4
    init_alpha: float = 0.1
    target_entropy: float | None = None  # None -> -action_dim
    log_std_min: float = -10.0
    log_std_max: float = 2.0
    encoder_tau: float = 0.05
    critic_tau: float = 0.01
    update_delay: int = 2
    updates_per_step: int = 1
    beta: float = 0.9
    lam: float = 1e-5
    pipeline: str = "drq"
    # architecture
    num_filters: int = 32
    num_conv: int = 4
    latent_dim: int = 50
    hidden_dim: int = 1024
    frame_stack: int = 3
    image_size: int = 84

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.lam < 0:
            raise ConfigError(f"lam must be non-negative, got {self.lam}")
        for name in ("batch_size", "buffer_capacity", "update_delay", "updates_per_step", "num_filters",
                     "num_conv", "latent_dim", "hidden_dim", "frame_stack", "image_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be non-negative")
        if not self.log_std_min < self.log_std_max:
            raise ConfigError("log_std_min must be below log_std_max")
        if self.init_alpha <= 0:
            raise ConfigError("init_alpha must be positive")
        parse_pipeline(self.pipeline)

    @property
    def kinds(self) -> tuple[str, ...]:
        return parse_pipeline(self.pipeline)

    def entropy_target(self, action_dim: int) -> float:
        return -float(action_dim) if self.target_entropy is None else float(self.target_entropy)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AgentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown agent settings: {sorted(unknown)}")
        return cls(**data)
