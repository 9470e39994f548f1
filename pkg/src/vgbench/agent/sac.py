"""SAC from pixels with augmented, beta-mixed batches and the encoder-invariance term.

One gradient step (``SACAgent.update``):

1. augment the sampled (o, o') pairs with the configured pipeline, keyed by
   (global seed, gradient step, batch index);
2. replace round(beta * B) positions of the clean batch by their augmented
   copies (the same positions for o and o');
3. critic loss on the mixed batch plus ``lam`` times the squared latent
   distance between e(clean).detach() and e(augmented) at the augmented
   positions; this is the only loss that moves the encoder;
4. every ``update_delay`` gradient steps: actor and temperature updates on
   the detached latent of step 3, then Polyak updates of the target encoder
   (``encoder_tau``) and target critics (``critic_tau``).
"""

import math

import numpy as np
import torch
from torch import nn

from ..augment import AugSeed, augment_pair, center_crop, mix_mask
from ..seeding import fold_key, keyed_rng
from .config import AgentConfig
from .losses import actor_loss_from_latent, alpha_loss, critic_loss_from_latent, latent_reg, polyak_update, \
    soft_target
from .networks import Actor, Critic, Encoder, weight_init
from .replay import ReplayBuffer

CHECKPOINT_FORMAT = "vgbench-agent"
CHECKPOINT_VERSION = 1


def torch_generator(*ints) -> torch.Generator:
    return torch.Generator().manual_seed(fold_key(*ints) & ((1 << 63) - 1))


class AgentParams(nn.Module):
    """Every learnable tensor of the agent plus the target copies."""

    def __init__(self, obs_shape, action_dim: int, config: AgentConfig):
        super().__init__()
        c = config
        self.encoder = Encoder(obs_shape, c.num_conv, c.num_filters, c.latent_dim)
        self.critic = Critic(c.latent_dim, action_dim, c.hidden_dim)
        self.actor = Actor(c.latent_dim, action_dim, c.hidden_dim, c.log_std_min, c.log_std_max)
        self.encoder_target = Encoder(obs_shape, c.num_conv, c.num_filters, c.latent_dim)
        self.critic_target = Critic(c.latent_dim, action_dim, c.hidden_dim)
        self.log_alpha = nn.Parameter(torch.tensor(math.log(c.init_alpha)))
        for m in (self.encoder, self.critic, self.actor):
            m.apply(weight_init)
        self.encoder_target.load_state_dict(self.encoder.state_dict())
        self.critic_target.load_state_dict(self.critic.state_dict())
        for p in list(self.encoder_target.parameters()) + list(self.critic_target.parameters()):
            p.requires_grad_(False)

    @property
    def alpha(self):
        return self.log_alpha.exp()


class SACAgent:
    def __init__(self, config: AgentConfig, action_dim: int, seed: int = 0):
        self.config = config
        self.action_dim = int(action_dim)
        self.seed = int(seed)
        self.obs_shape = (3 * config.frame_stack, config.image_size, config.image_size)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(fold_key(0x1417, self.seed) & ((1 << 63) - 1))
            self.params = AgentParams(self.obs_shape, self.action_dim, config)
        p = self.params
        self.critic_opt = torch.optim.Adam([
            {"params": p.encoder.parameters(), "lr": config.encoder_lr},
            {"params": p.critic.parameters(), "lr": config.critic_lr},
        ], fused=True)
        self.actor_opt = torch.optim.Adam(p.actor.parameters(), lr=config.actor_lr, fused=True)
        self.alpha_opt = torch.optim.Adam([p.log_alpha], lr=config.alpha_lr, fused=True)
        self.target_entropy = config.entropy_target(self.action_dim)
        self.grad_steps = 0
        self.actor_updates = 0

    @property
    def alpha(self) -> float:
        return self.params.log_alpha.detach().exp().item()

    def _tensor(self, obs: np.ndarray) -> torch.Tensor:
        obs = center_crop(obs, self.config.image_size)
        return torch.from_numpy(np.ascontiguousarray(obs)).float()

    @torch.no_grad()
    def act(self, obs: np.ndarray, deterministic: bool = True, step: int = 0) -> np.ndarray:
        """Action for one observation (C, H, W). Inputs larger than the
        network size are center-cropped. Stochastic noise is keyed by ``step``."""
        x = self._tensor(obs[None])
        latent = self.params.encoder(x)
        noise = None
        if not deterministic:
            noise = torch.from_numpy(keyed_rng(0xAC7, self.seed, step).standard_normal((1, self.action_dim)))
            noise = noise.float()
        mean, pi, _, _ = self.params.actor(latent, noise=noise, deterministic=deterministic)
        return (mean if deterministic else pi)[0].numpy().astype(np.float64)

    def mixed_batch(self, obs, next_obs, step: int):
        """Returns (mixed o, mixed o', clean o, mask) as uint8 arrays.

        Only the positions selected by the mix mask are augmented; every
        element's draw is keyed by its own batch index, so this equals
        augmenting the whole batch and then mixing.
        """
        cfg = self.config
        clean_o = center_crop(obs, cfg.image_size)
        clean_n = center_crop(next_obs, cfg.image_size)
        kinds = cfg.kinds
        if not kinds:
            return clean_o, clean_n, clean_o, np.zeros(obs.shape[0], dtype=bool)
        mask = mix_mask(obs.shape[0], cfg.beta, AugSeed(self.seed, step))
        mixed_o, mixed_n = clean_o.copy(), clean_n.copy()
        for b in np.flatnonzero(mask):
            a, n = augment_pair(obs[b], next_obs[b], kinds, AugSeed(self.seed, step, int(b)), cfg.image_size)
            mixed_o[b] = center_crop(a, cfg.image_size)
            mixed_n[b] = center_crop(n, cfg.image_size)
        return mixed_o, mixed_n, clean_o, mask

    def update(self, obs, action, reward, next_obs, step: int) -> dict:
        cfg = self.config
        p = self.params
        mixed_o, mixed_n, clean_o, mask = self.mixed_batch(obs, next_obs, step)
        o = torch.from_numpy(np.ascontiguousarray(mixed_o)).float()
        n = torch.from_numpy(np.ascontiguousarray(mixed_n)).float()
        a = torch.as_tensor(action, dtype=torch.float32)
        r = torch.as_tensor(reward, dtype=torch.float32).reshape(-1, 1)
        gen = torch_generator(0x5AC, self.seed, step)
        alpha = p.alpha.detach()

        target = soft_target(p, n, r, alpha, cfg.gamma, generator=gen)
        latent = p.encoder(o)
        c_loss = critic_loss_from_latent(p, latent, a, target)
        reg = torch.zeros(())
        if cfg.lam > 0 and mask.any():
            with torch.no_grad():
                clean_latent = p.encoder(torch.from_numpy(np.ascontiguousarray(clean_o[mask])).float())
            reg = latent_reg(clean_latent, latent[torch.from_numpy(mask)])
        self.critic_opt.zero_grad(set_to_none=True)
        (c_loss + cfg.lam * reg).backward()
        self.critic_opt.step()
        self.grad_steps += 1
        out = {"critic_loss": c_loss.item(), "reg_loss": reg.item(), "n_aug": int(mask.sum())}

        if self.grad_steps % cfg.update_delay == 0:
            a_loss, log_pi = actor_loss_from_latent(p, latent.detach(), alpha, generator=gen)
            self.actor_opt.zero_grad(set_to_none=True)
            a_loss.backward()
            self.actor_opt.step()
            t_loss = alpha_loss(p.log_alpha, log_pi, self.target_entropy)
            self.alpha_opt.zero_grad(set_to_none=True)
            t_loss.backward()
            self.alpha_opt.step()
            polyak_update(p.critic_target, p.critic, cfg.critic_tau)
            polyak_update(p.encoder_target, p.encoder, cfg.encoder_tau)
            self.actor_updates += 1
            out.update(actor_loss=a_loss.item(), alpha_loss=t_loss.item(), entropy=-log_pi.mean().item())
        out["alpha"] = self.alpha
        return out

    # -- persistence -------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "action_dim": self.action_dim,
            "seed": self.seed,
            "grad_steps": self.grad_steps,
            "actor_updates": self.actor_updates,
            "params": self.params.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "actor_opt": self.actor_opt.state_dict(),
            "alpha_opt": self.alpha_opt.state_dict(),
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "SACAgent":
        if state.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not an agent checkpoint")
        if state.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {state.get('version')}")
        agent = cls(AgentConfig.from_dict(state["config"]), state["action_dim"], state["seed"])
        agent.params.load_state_dict(state["params"])
        agent.critic_opt.load_state_dict(state["critic_opt"])
        agent.actor_opt.load_state_dict(state["actor_opt"])
        agent.alpha_opt.load_state_dict(state["alpha_opt"])
        agent.grad_steps = state["grad_steps"]
        agent.actor_updates = state["actor_updates"]
        return agent


def save_checkpoint(agent: SACAgent, path, extra: dict | None = None):
    """Write the agent (and optional plain-data ``extra``) with ``torch.save``."""
    state = agent.state_dict()
    state["extra"] = dict(extra or {})
    torch.save(state, path)


def load_checkpoint(path):
    """Returns ``(agent, extra)``."""
    state = torch.load(path, map_location="cpu", weights_only=True)
    return SACAgent.from_state_dict(state), state.get("extra", {})


class EpisodeRunner:
    """Tracks the current observation and episode bookkeeping of a pixel env."""

    def __init__(self, env):
        self.env = env
        self.obs = None
        self.episode = -1
        self.episode_return = 0.0

    def start(self):
        self.episode += 1
        self.episode_return = 0.0
        self.obs = self.env.reset(self.episode)
        return self.obs


def make_buffer(config: AgentConfig, obs_shape, action_dim: int) -> ReplayBuffer:
    return ReplayBuffer(obs_shape, action_dim, config.buffer_capacity)


def train_step(agent: SACAgent, buffer: ReplayBuffer, runner: EpisodeRunner, step_index: int) -> dict:
    """One environment step plus ``updates_per_step`` gradient steps.

    During the first ``warmup_steps`` steps actions are uniform in [-1, 1]
    and no gradients are taken. Gradient steps are also skipped while the
    buffer holds fewer than ``batch_size`` transitions.
    """
    cfg = agent.config
    if runner.obs is None:
        runner.start()
    if step_index < cfg.warmup_steps:
        action = keyed_rng(0xAC7, agent.seed, step_index, 1).uniform(-1.0, 1.0, agent.action_dim)
    else:
        action = agent.act(runner.obs, deterministic=False, step=step_index)
    next_obs, reward, done = runner.env.step(action)
    buffer.add(runner.obs, action, reward, next_obs)
    runner.episode_return += reward
    record = {"step": step_index, "episode": runner.episode, "reward": float(reward)}
    if done:
        record["episode_return"] = float(runner.episode_return)
        runner.start()
    else:
        runner.obs = next_obs
    if step_index >= cfg.warmup_steps and len(buffer) >= cfg.batch_size:
        for _ in range(cfg.updates_per_step):
            batch = buffer.sample(cfg.batch_size, agent.seed, agent.grad_steps)
            record.update(agent.update(*batch, step=agent.grad_steps))
    return record
