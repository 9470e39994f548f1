"""Shared test utilities: finite-difference gradients on tiny networks and naive augmentation references."""

import itertools

import numpy as np
import torch

from vgbench.agent import AgentConfig, AgentParams

FD_EPS = 1e-6
FD_RTOL = 1e-4


def tiny_config(**kw) -> AgentConfig:
    base = dict(num_filters=8, num_conv=2, latent_dim=8, hidden_dim=8, frame_stack=1, image_size=8,
                batch_size=4, warmup_steps=0)
    base.update(kw)
    return AgentConfig(**base)


def tiny_params(seed=0, action_dim=2, **kw) -> AgentParams:
    torch.manual_seed(seed)
    cfg = tiny_config(**kw)
    p = AgentParams((3 * cfg.frame_stack, cfg.image_size, cfg.image_size), action_dim, cfg).double()
    # move targets off the online weights so the two paths are distinguishable
    with torch.no_grad():
        for t in list(p.encoder_target.parameters()) + list(p.critic_target.parameters()):
            t.add_(0.05 * torch.randn_like(t))
    return p


def tiny_batch(seed=0, batch=4, action_dim=2, size=8):
    g = torch.Generator().manual_seed(seed)
    obs = torch.randint(0, 256, (batch, 3, size, size), generator=g).double()
    nxt = torch.randint(0, 256, (batch, 3, size, size), generator=g).double()
    act = torch.rand(batch, action_dim, generator=g, dtype=torch.float64) * 2 - 1
    rew = torch.rand(batch, 1, generator=g, dtype=torch.float64)
    noise = torch.randn(batch, action_dim, generator=g, dtype=torch.float64)
    return obs, act, rew, nxt, noise


def max_relative_error(fn, tensors, eps=FD_EPS) -> float:
    """Worst relative disagreement between autograd and central differences.

    Per tensor, error is ||g_auto - g_fd|| / max(||g_auto|| + ||g_fd||, 1e-12).
    """
    for t in tensors:
        t.grad = None
    fn().backward()
    auto = [t.grad.detach().clone() if t.grad is not None else torch.zeros_like(t) for t in tensors]
    worst = 0.0
    with torch.no_grad():
        for t, g in zip(tensors, auto):
            fd = torch.zeros_like(t)
            for idx in itertools.product(*map(range, t.shape)):
                orig = t[idx].item()
                t[idx] = orig + eps
                hi = fn().item()
                t[idx] = orig - eps
                lo = fn().item()
                t[idx] = orig
                fd[idx] = (hi - lo) / (2 * eps)
            denom = max((g.norm() + fd.norm()).item(), 1e-12)
            worst = max(worst, (g - fd).norm().item() / denom)
    return worst


def params_equal(a, b) -> bool:
    sa, sb = a.state_dict(), b.state_dict()
    return sa.keys() == sb.keys() and all(torch.equal(sa[k], sb[k]) for k in sa)


# -- naive references, one pixel at a time --------------------------------


def ref_pad_shift(stack, p, edge_fill=True, color=None):
    """Edge-padded crop at (oy, ox), or for translate: paste at (oy, ox) and center-crop."""
    c, h, w = stack.shape
    pad = p["pad"]
    sign = 1 if edge_fill else -1
    out = np.zeros_like(stack)
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                si, sj = i + sign * (p["oy"] - pad), j + sign * (p["ox"] - pad)
                if 0 <= si < h and 0 <= sj < w:
                    v = int(stack[ch, si, sj])
                elif edge_fill:
                    v = int(stack[ch, min(max(si, 0), h - 1), min(max(sj, 0), w - 1)])
                else:
                    v = int(color[ch % 3])
                if "noise" in p:
                    v = min(255, max(0, v + int(p["noise"][ch % 3, i, j])))
                out[ch, i, j] = v
    return out


def ref_crop(stack, p):
    n = p["out"]
    out = np.zeros((stack.shape[0], n, n), dtype=np.uint8)
    for ch in range(stack.shape[0]):
        for i in range(n):
            for j in range(n):
                out[ch, i, j] = stack[ch, i + p["oy"], j + p["ox"]]
    return out


def _inside(p, i, j):
    return p["y0"] <= i < p["y0"] + p["h"] and p["x0"] <= j < p["x0"] + p["w"]


def ref_window(stack, p):
    out = np.zeros_like(stack)
    for ch, i, j in np.ndindex(stack.shape):
        if _inside(p, i, j):
            out[ch, i, j] = stack[ch, i, j]
    return out


def ref_cutout(stack, p):
    out = stack.copy()
    for ch, i, j in np.ndindex(stack.shape):
        if _inside(p, i, j):
            out[ch, i, j] = p["color"][ch % 3]
    return out


REFERENCES = {
    "drq": lambda s, p: ref_pad_shift(s, p),
    "drq_no_noise": lambda s, p: ref_pad_shift(s, p),
    "translate": lambda s, p: ref_pad_shift(s, p, edge_fill=False, color=p["color"]),
    "rad_crop": ref_crop,
    "window": ref_window,
    "cutout_color": ref_cutout,
}


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_RESULTS: list[str] = []


def record_criterion(label: str, ok: bool, detail: str) -> bool:
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    return ok
