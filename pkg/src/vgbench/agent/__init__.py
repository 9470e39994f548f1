"""Soft actor-critic from pixels with augmentation mixing and encoder regularization."""

from .config import AgentConfig
from .losses import actor_loss, alpha_loss, critic_loss, encoder_reg_loss, polyak_update, soft_target
from .networks import Actor, Critic, Encoder, QFunction
from .replay import ReplayBuffer
from .sac import (
    AgentParams,
    EpisodeRunner,
    SACAgent,
    load_checkpoint,
    make_buffer,
    save_checkpoint,
    train_step,
)

__all__ = [
    "AgentConfig", "actor_loss", "alpha_loss", "critic_loss", "encoder_reg_loss", "polyak_update",
    "soft_target", "Actor", "Critic", "Encoder", "QFunction", "ReplayBuffer", "AgentParams",
    "EpisodeRunner", "SACAgent", "load_checkpoint", "make_buffer", "save_checkpoint", "train_step",
]
