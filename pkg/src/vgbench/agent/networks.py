"""Encoder, squashed-Gaussian actor and twin critics."""

import math

import torch
from torch import nn
import torch.nn.functional as F


def weight_init(m):
    """Orthogonal linear layers; delta-orthogonal convolutions (ReLU gain)."""
    if isinstance(m, nn.Linear):
        nn.init.orthogonal_(m.weight.data)
        m.bias.data.fill_(0.0)
    elif isinstance(m, nn.Conv2d):
        m.weight.data.fill_(0.0)
        m.bias.data.fill_(0.0)
        mid = m.weight.size(2) // 2
        nn.init.orthogonal_(m.weight.data[:, :, mid, mid], nn.init.calculate_gain("relu"))


def conv_output_size(size: int, num_conv: int) -> int:
    size = (size - 3) // 2 + 1
    return size - 2 * (num_conv - 1)


class Encoder(nn.Module):
    """uint8-range pixels -> 50-d latent in (-1, 1).

    Conv(stride 2) followed by ``num_conv - 1`` stride-1 convolutions, all
    3x3 with ReLU, then FC -> LayerNorm -> tanh. Inputs are scaled by 1/255.
    Convolutions run channels-last, which is markedly faster on CPU.
    """

    def __init__(self, obs_shape, num_conv: int = 4, num_filters: int = 32, latent_dim: int = 50):
        super().__init__()
        c, h, w = obs_shape
        if h != w:
            raise ValueError("encoder expects square observations")
        self.obs_shape = tuple(obs_shape)
        self.latent_dim = latent_dim
        convs = [nn.Conv2d(c, num_filters, 3, stride=2)]
        convs += [nn.Conv2d(num_filters, num_filters, 3, stride=1) for _ in range(num_conv - 1)]
        self.convs = nn.ModuleList(convs).to(memory_format=torch.channels_last)
        side = conv_output_size(h, num_conv)
        if side < 1:
            raise ValueError(f"image size {h} too small for {num_conv} conv layers")
        self.fc = nn.Linear(num_filters * side * side, latent_dim)
        self.ln = nn.LayerNorm(latent_dim)

    def conv_activations(self, obs) -> list:
        """Post-ReLU activation of every conv layer, shallowest first."""
        self._check(obs)
        x = (obs / 255.0).contiguous(memory_format=torch.channels_last)
        acts = []
        for conv in self.convs:
            x = torch.relu(conv(x))
            acts.append(x)
        return acts

    def forward(self, obs, detach: bool = False):
        h = self.conv_activations(obs)[-1].flatten(1)
        if detach:
            h = h.detach()
        return torch.tanh(self.ln(self.fc(h)))

    def _check(self, obs):
        if obs.dim() != 4 or tuple(obs.shape[1:]) != self.obs_shape:
            raise ValueError(f"expected observations of shape (B, {self.obs_shape}), got {tuple(obs.shape)}")


def _mlp(inp, hidden, out):
    return nn.Sequential(nn.Linear(inp, hidden), nn.ReLU(), nn.Linear(hidden, hidden), nn.ReLU(),
                         nn.Linear(hidden, out))


def squash(mu, pi, log_pi):
    """tanh squashing with the change-of-variables term on ``log_pi``."""
    mu = torch.tanh(mu)
    if pi is not None:
        pi = torch.tanh(pi)
    if log_pi is not None:
        log_pi = log_pi - torch.log(F.relu(1 - pi.pow(2)) + 1e-6).sum(-1, keepdim=True)
    return mu, pi, log_pi


def gaussian_logprob(noise, log_std):
    residual = (-0.5 * noise.pow(2) - log_std).sum(-1, keepdim=True)
    return residual - 0.5 * math.log(2 * math.pi) * noise.size(-1)


class Actor(nn.Module):
    def __init__(self, latent_dim: int, action_dim: int, hidden_dim: int = 1024,
                 log_std_min: float = -10.0, log_std_max: float = 2.0):
        super().__init__()
        self.action_dim = action_dim
        self.log_std_min = log_std_min
        self.log_std_max = log_std_max
        self.trunk = _mlp(latent_dim, hidden_dim, 2 * action_dim)

    def forward(self, latent, noise=None, deterministic: bool = False, generator=None):
        """Returns ``(mean_action, action, log_prob, log_std)``.

        ``noise`` overrides the Gaussian draw, which keeps the function
        deterministic for gradient checks. In deterministic mode the sampled
        action is ``tanh(mean)`` and ``log_prob`` is None.
        """
        mu, log_std = self.trunk(latent).chunk(2, dim=-1)
        log_std = torch.tanh(log_std)
        log_std = self.log_std_min + 0.5 * (self.log_std_max - self.log_std_min) * (log_std + 1)
        if deterministic:
            mean = torch.tanh(mu)
            return mean, mean, None, log_std
        if noise is None:
            noise = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
        pi = mu + noise * log_std.exp()
        log_pi = gaussian_logprob(noise, log_std)
        mu, pi, log_pi = squash(mu, pi, log_pi)
        return mu, pi, log_pi, log_std


class QFunction(nn.Module):
    def __init__(self, latent_dim: int, action_dim: int, hidden_dim: int = 1024):
        super().__init__()
        self.trunk = _mlp(latent_dim + action_dim, hidden_dim, 1)

    def forward(self, latent, action):
        return self.trunk(torch.cat([latent, action], dim=-1))


class Critic(nn.Module):
    """Twin Q heads on a shared latent."""

    def __init__(self, latent_dim: int, action_dim: int, hidden_dim: int = 1024):
        super().__init__()
        self.q1 = QFunction(latent_dim, action_dim, hidden_dim)
        self.q2 = QFunction(latent_dim, action_dim, hidden_dim)

    def forward(self, latent, action):
        return self.q1(latent, action), self.q2(latent, action)
