"""SAC+AUG objectives as pure functions of tensors and modules.

Every loss accepts explicit noise tensors so it can be evaluated as a
deterministic function (gradient checks, replay of a recorded update).
"""

from contextlib import contextmanager

import torch


@contextmanager
def frozen(*modules):
    """Temporarily stop parameter gradients of ``modules``."""
    saved = [(p, p.requires_grad) for m in modules for p in m.parameters()]
    for p, _ in saved:
        p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in saved:
            p.requires_grad_(flag)


def soft_target(params, next_obs, reward, alpha, gamma, noise=None, generator=None):
    """y = r + gamma * (min_i Q'_i(e'(o'), a') - alpha * log pi(a'|o')), no gradient.

    ``a'`` is sampled from the actor on the online encoding of ``o'``; the
    target critics read the target encoder's encoding.
    """
    with torch.no_grad():
        _, next_action, next_log_pi, _ = params.actor(params.encoder(next_obs), noise=noise, generator=generator)
        tq1, tq2 = params.critic_target(params.encoder_target(next_obs), next_action)
        return reward + gamma * (torch.min(tq1, tq2) - alpha * next_log_pi)


def critic_loss_from_latent(params, latent, action, target):
    q1, q2 = params.critic(latent, action)
    return 0.5 * ((q1 - target).pow(2).mean() + (q2 - target).pow(2).mean())


def critic_loss(params, obs, action, reward, next_obs, alpha, gamma, noise=None, generator=None):
    """Mean over batch and both critics of (Q(o, a) - y)^2."""
    target = soft_target(params, next_obs, reward, alpha, gamma, noise, generator)
    return critic_loss_from_latent(params, params.encoder(obs), action, target)


def actor_loss_from_latent(params, latent, alpha, noise=None, generator=None):
    """Returns ``(loss, log_pi)``; the latent is detached and the critics frozen."""
    _, pi, log_pi, _ = params.actor(latent.detach(), noise=noise, generator=generator)
    with frozen(params.critic):
        q1, q2 = params.critic(latent.detach(), pi)
    loss = (alpha * log_pi - torch.min(q1, q2)).mean()
    return loss, log_pi


def actor_loss(params, obs, alpha, noise=None, generator=None):
    with torch.no_grad():
        latent = params.encoder(obs)
    return actor_loss_from_latent(params, latent, alpha, noise, generator)[0]


def alpha_loss(log_alpha, log_probs, target_entropy):
    """mean(-alpha * (log pi + target_entropy)), differentiated through log alpha only."""
    return (-log_alpha.exp() * (log_probs + target_entropy).detach()).mean()


def latent_reg(clean_latent, aug_latent):
    return (clean_latent.detach() - aug_latent).pow(2).sum(-1).mean()


def encoder_reg_loss(encoder, clean_obs, aug_obs):
    """E ||e(o) - e(z(o))||^2 with the clean branch behind a stop-gradient."""
    with torch.no_grad():
        clean = encoder(clean_obs)
    return latent_reg(clean, encoder(aug_obs))


@torch.no_grad()
def polyak_update(target, online, tau: float):
    """target <- (1 - tau) * target + tau * online, for modules or tensors."""
    if isinstance(target, torch.Tensor):
        if target.shape != online.shape:
            raise ValueError(f"shape mismatch {tuple(target.shape)} vs {tuple(online.shape)}")
        target.mul_(1.0 - tau).add_(online, alpha=tau)
        return target
    t_params = list(target.parameters())
    o_params = list(online.parameters())
    if len(t_params) != len(o_params):
        raise ValueError("target and online modules differ in structure")
    for t, o in zip(t_params, o_params):
        polyak_update(t, o, tau)
    return target
