"""Seeded image augmentations for frame stacks.

A stack is a channel-first uint8 array (3 * n_frames, H, W). Every stage is
split into two halves: :func:`sample_params` draws all random choices for one
stack from a keyed stream, and :func:`apply_params` applies them to every
frame identically. :func:`augment_pair` reuses one draw for ``o`` and ``o'``.
Outputs stay uint8; DrQ's resampling noise is therefore integer noise in
{-1, 0, +1}.
"""

from dataclasses import dataclass, replace
import hashlib
import math

import numpy as np

from ._accel import USE_NUMBA, njit
from .envcore import ConfigError
from .seeding import keyed_rng

GEOMETRIC = (
    "rad_crop", "cutout_color", "drq", "drq_no_noise", "large_drq", "large_drq_no_noise",
    "translate", "large_translate", "rotate", "vflip", "window",
)
COLOR = ("color_jitter", "network_rand")
AUG_KINDS = GEOMETRIC + COLOR

ALIASES = {"cj": "color_jitter", "nr": "network_rand", "rad": "rad_crop", "cutout": "cutout_color",
           "flip": "vflip"}

PAD = {"drq": 4, "drq_no_noise": 4, "large_drq": 12, "large_drq_no_noise": 12,
       "translate": 4, "large_translate": 12}
CUTOUT_RANGE = (12, 24)
WINDOW_RANGE = (48, 72)
REFERENCE_SIZE = 84
VFLIP_PROB = 0.5
JITTER_STRENGTHS = (0.4, 0.4, 0.4, 0.5)  # brightness, contrast, saturation, hue
NR_KERNEL = 3


@dataclass(frozen=True)
class AugSeed:
    global_seed: int
    train_step: int = 0
    batch_index: int = 0
    stage_index: int = 0


def derive_stream(seed: AugSeed) -> np.random.Generator:
    return keyed_rng(0xA06, seed.global_seed, seed.train_step, seed.batch_index, seed.stage_index)


def parse_pipeline(text: str) -> tuple[str, ...]:
    """``"cj,drq"`` -> ``("color_jitter", "drq")``. Empty string means no augmentation."""
    kinds = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok or tok == "none":
            continue
        kind = ALIASES.get(tok, tok)
        if kind not in AUG_KINDS:
            raise ConfigError(f"unknown augmentation {tok!r}; expected one of {AUG_KINDS + tuple(ALIASES)}")
        kinds.append(kind)
    return tuple(kinds)


def pipeline_string(kinds) -> str:
    short = {v: k for k, v in ALIASES.items() if k in ("cj", "nr")}
    return ",".join(short.get(k, k) for k in kinds)


def _draw_size(rng, lo, hi, size):
    """Integer in [lo, hi] (inclusive), ranges rescaled for non-84 images."""
    a = max(1, int(round(lo * size / REFERENCE_SIZE)))
    b = max(a, min(size, int(round(hi * size / REFERENCE_SIZE))))
    return int(rng.integers(a, b + 1))


# -- parameter draws -------------------------------------------------------


def sample_params(kind: str, rng: np.random.Generator, shape, out_size: int = REFERENCE_SIZE,
                  strengths=JITTER_STRENGTHS, kernel: int = NR_KERNEL) -> dict:
    """All random choices for one application of ``kind`` to a stack of ``shape``."""
    _, h, w = shape
    if kind in PAD:
        p = PAD[kind]
        params = {"pad": p, "ox": int(rng.integers(0, 2 * p + 1)), "oy": int(rng.integers(0, 2 * p + 1))}
        if kind in ("drq", "large_drq"):
            params["noise"] = rng.integers(-1, 2, size=(3, h, w)).astype(np.int16)
        if kind in ("translate", "large_translate"):
            params["color"] = rng.integers(0, 256, size=3).astype(np.uint8)
        return params
    if kind == "rad_crop":
        if h < out_size or w < out_size:
            raise ValueError(f"rad_crop needs inputs of at least {out_size} pixels, got {h}x{w}")
        return {"out": out_size, "ox": int(rng.integers(0, w - out_size + 1)),
                "oy": int(rng.integers(0, h - out_size + 1))}
    if kind == "rotate":
        return {"k": int(rng.integers(0, 4))}
    if kind == "vflip":
        return {"flip": bool(rng.random() < VFLIP_PROB)}
    if kind in ("window", "cutout_color"):
        lo, hi = WINDOW_RANGE if kind == "window" else CUTOUT_RANGE
        pw = _draw_size(rng, lo, hi, w)
        ph = _draw_size(rng, lo, hi, h)
        params = {"x0": int(rng.integers(0, w - pw + 1)), "y0": int(rng.integers(0, h - ph + 1)), "w": pw, "h": ph}
        if kind == "cutout_color":
            params["color"] = rng.integers(0, 256, size=3).astype(np.uint8)
        return params
    if kind == "color_jitter":
        sb, sc, ss, sh = strengths
        return {
            "brightness": float(rng.uniform(1.0 - sb, 1.0 + sb)) if sb > 0 else 1.0,
            "contrast": float(rng.uniform(1.0 - sc, 1.0 + sc)) if sc > 0 else 1.0,
            "saturation": float(rng.uniform(1.0 - ss, 1.0 + ss)) if ss > 0 else 1.0,
            "hue": float(rng.uniform(-sh, sh)) if sh > 0 else 0.0,
        }
    if kind == "network_rand":
        std = 1.0 / math.sqrt(3 * kernel * kernel)
        return {"weight": rng.normal(0.0, std, size=(3, 3, kernel, kernel))}
    raise ValueError(f"unknown augmentation kind {kind!r}")


def params_digest(params: dict) -> str:
    """Stable fingerprint of a parameter draw (arrays hashed by content)."""
    h = hashlib.sha256()
    for key in sorted(params):
        v = params[key]
        h.update(key.encode())
        if isinstance(v, np.ndarray):
            h.update(str(v.dtype).encode() + str(v.shape).encode() + np.ascontiguousarray(v).tobytes())
        else:
            h.update(repr(v).encode())
    return h.hexdigest()


# -- per-frame application -------------------------------------------------

_YIQ = np.array([[0.299, 0.587, 0.114], [0.596, -0.274, -0.322], [0.211, -0.523, 0.312]])
_YIQ_INV = np.linalg.inv(_YIQ)
_LUMA = _YIQ[0]


def _to_uint8(x):
    return np.floor(np.clip(x, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _jitter_stack(stack, p):
    """Brightness, contrast, saturation, hue, in that order, per frame."""
    if p["brightness"] == p["contrast"] == p["saturation"] == 1.0 and p["hue"] == 0.0:
        return stack.copy()
    c, h, w = stack.shape
    x = stack.reshape(c // 3, 3, h * w).astype(np.float64) / 255.0
    if p["brightness"] != 1.0:
        x = x * p["brightness"]
    if p["contrast"] != 1.0:
        m = (_LUMA @ x).mean(axis=1)[:, None, None]
        x = m + p["contrast"] * (x - m)
    if p["saturation"] != 1.0:
        gray = (_LUMA @ x)[:, None]
        x = gray + p["saturation"] * (x - gray)
    if p["hue"] != 0.0:
        a = 2.0 * math.pi * p["hue"]
        rot = np.array([[1.0, 0.0, 0.0], [0.0, math.cos(a), -math.sin(a)], [0.0, math.sin(a), math.cos(a)]])
        x = (_YIQ_INV @ rot @ _YIQ) @ x
    return _to_uint8(x).reshape(c, h, w)


@njit
def _conv_kernel(x, weight, out):
    f_n, _, h, w = out.shape
    k = weight.shape[-1]
    out[:] = 0.0
    for f in range(f_n):
        for d in range(3):
            for c in range(3):
                for dy in range(k):
                    for dx in range(k):
                        wt = weight[d, c, dy, dx]
                        for i in range(h):
                            for j in range(w):
                                out[f, d, i, j] += wt * x[f, c, i + dy, j + dx]


def _conv_numpy(x, weight, out):
    _, _, h, w = out.shape
    k = weight.shape[-1]
    for d in range(3):
        acc = np.zeros((out.shape[0], h, w))
        for c in range(3):
            for dy in range(k):
                for dx in range(k):
                    acc += weight[d, c, dy, dx] * x[:, c, dy:dy + h, dx:dx + w]
        out[:, d] = acc


def _conv_stack(stack, weight, backend=None):
    """Same-size zero-padded 3->3 convolution of every frame; float64 output.

    Both backends accumulate each output pixel in (c, dy, dx) order, so they
    agree bit for bit.
    """
    k = weight.shape[-1]
    r = k // 2
    c, h, w = stack.shape
    x = np.pad(stack.reshape(c // 3, 3, h, w).astype(np.float64), ((0, 0), (0, 0), (r, r), (r, r)))
    out = np.empty((c // 3, 3, h, w))
    use_numba = USE_NUMBA if backend is None else backend == "numba"
    (_conv_kernel if use_numba else _conv_numpy)(x, np.ascontiguousarray(weight, dtype=np.float64), out)
    return out.reshape(c, h, w)


def _apply_frame(kind, frame, p):
    """One 3-channel frame -> transformed frame, for the geometric kinds."""
    h, w = frame.shape[1:]
    if kind in PAD:
        pad = p["pad"]
        if kind in ("translate", "large_translate"):
            canvas = np.empty((3, h + 2 * pad, w + 2 * pad), dtype=np.uint8)
            canvas[:] = p["color"][:, None, None]
            canvas[:, p["oy"]:p["oy"] + h, p["ox"]:p["ox"] + w] = frame
            return canvas[:, pad:pad + h, pad:pad + w].copy()
        padded = np.pad(frame, ((0, 0), (pad, pad), (pad, pad)), mode="edge")
        out = padded[:, p["oy"]:p["oy"] + h, p["ox"]:p["ox"] + w]
        if "noise" in p:
            out = np.clip(out.astype(np.int16) + p["noise"], 0, 255).astype(np.uint8)
        return out.copy()
    if kind == "rad_crop":
        n = p["out"]
        return frame[:, p["oy"]:p["oy"] + n, p["ox"]:p["ox"] + n].copy()
    if kind == "rotate":
        return np.rot90(frame, k=p["k"], axes=(1, 2)).copy()
    if kind == "vflip":
        return np.rot90(frame, k=2, axes=(1, 2)).copy() if p["flip"] else frame.copy()
    if kind == "window":
        out = np.zeros_like(frame)
        sl = (slice(None), slice(p["y0"], p["y0"] + p["h"]), slice(p["x0"], p["x0"] + p["w"]))
        out[sl] = frame[sl]
        return out
    if kind == "cutout_color":
        out = frame.copy()
        out[:, p["y0"]:p["y0"] + p["h"], p["x0"]:p["x0"] + p["w"]] = p["color"][:, None, None]
        return out
    raise ValueError(f"unknown augmentation kind {kind!r}")


def apply_params(kind: str, stack: np.ndarray, params: dict, trace: list | None = None) -> np.ndarray:
    """Apply one parameter draw to every frame of ``stack``.

    When ``trace`` is given, one ``(frame_index, kind, digest)`` record per
    frame is appended, so callers can check that every frame received the
    same parameters.
    """
    if kind not in AUG_KINDS:
        raise ValueError(f"unknown augmentation kind {kind!r}")
    if kind == "rotate" and stack.shape[1] != stack.shape[2]:
        raise ValueError("rotate needs square frames")
    if trace is not None:
        digest = params_digest(params)
        trace.extend((f, kind, digest) for f in range(stack.shape[0] // 3))
    if kind == "color_jitter":
        return _jitter_stack(stack, params)
    if kind != "network_rand":
        return np.concatenate([_apply_frame(kind, stack[3 * f:3 * f + 3], params)
                               for f in range(stack.shape[0] // 3)], axis=0)
    out = _conv_stack(stack, params["weight"])
    lo, hi = out.min(), out.max()
    if hi > lo:
        return _to_uint8((out - lo) / (hi - lo))
    return np.zeros(out.shape, dtype=np.uint8)


# -- public operations -----------------------------------------------------


def apply_geometric(kind: str, stack: np.ndarray, seed: AugSeed, out_size: int = REFERENCE_SIZE,
                    trace: list | None = None) -> np.ndarray:
    if kind not in GEOMETRIC:
        raise ValueError(f"{kind!r} is not a geometric augmentation")
    params = sample_params(kind, derive_stream(seed), stack.shape, out_size=out_size)
    return apply_params(kind, stack, params, trace)


def color_jitter(stack: np.ndarray, seed: AugSeed, strengths=JITTER_STRENGTHS, trace=None) -> np.ndarray:
    params = sample_params("color_jitter", derive_stream(seed), stack.shape, strengths=strengths)
    return apply_params("color_jitter", stack, params, trace)


def network_randomization(stack: np.ndarray, seed: AugSeed, kernel: int = NR_KERNEL, trace=None) -> np.ndarray:
    params = sample_params("network_rand", derive_stream(seed), stack.shape, kernel=kernel)
    return apply_params("network_rand", stack, params, trace)


def augment_pair(o: np.ndarray, o_next: np.ndarray, pipeline, seed: AugSeed,
                 out_size: int = REFERENCE_SIZE, trace: list | None = None):
    """Run ``pipeline`` on ``o`` and ``o_next`` with one shared draw per stage.

    ``seed.stage_index`` is ignored; stage ``i`` uses stage index ``i``. The
    trace records ``(which, stage, frame, kind, digest)`` tuples.
    """
    for i, kind in enumerate(pipeline):
        params = sample_params(kind, derive_stream(replace(seed, stage_index=i)), o.shape, out_size=out_size)
        t_o = [] if trace is not None else None
        t_n = [] if trace is not None else None
        o = apply_params(kind, o, params, t_o)
        o_next = apply_params(kind, o_next, params, t_n)
        if trace is not None:
            trace.extend(("o", i) + rec for rec in t_o)
            trace.extend(("o_next", i) + rec for rec in t_n)
    return o, o_next


def augment_batch(obs: np.ndarray, next_obs: np.ndarray, pipeline, global_seed: int, train_step: int,
                  out_size: int = REFERENCE_SIZE):
    """Element-wise :func:`augment_pair` over a (B, C, H, W) batch."""
    outs, nexts = [], []
    for b in range(obs.shape[0]):
        a, n = augment_pair(obs[b], next_obs[b], pipeline, AugSeed(global_seed, train_step, b, 0), out_size)
        outs.append(a)
        nexts.append(n)
    return np.stack(outs), np.stack(nexts)


def center_crop(stack: np.ndarray, out_size: int = REFERENCE_SIZE) -> np.ndarray:
    h, w = stack.shape[-2:]
    y0, x0 = (h - out_size) // 2, (w - out_size) // 2
    return stack[..., y0:y0 + out_size, x0:x0 + out_size]


def mix_count(batch_size: int, beta: float) -> int:
    """round(beta * B), halves rounded up."""
    return int(math.floor(beta * batch_size + 0.5))


def mix_mask(batch_size: int, beta: float, seed: AugSeed) -> np.ndarray:
    """Boolean mask of batch positions that take the augmented sample."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    n_aug = mix_count(batch_size, beta)
    mask = np.zeros(batch_size, dtype=bool)
    if 0 < n_aug < batch_size:
        mask[derive_stream(replace(seed, batch_index=-1)).permutation(batch_size)[:n_aug]] = True
    elif n_aug == batch_size:
        mask[:] = True
    return mask


def mix_batch(clean: np.ndarray, augmented: np.ndarray, beta: float, seed: AugSeed) -> np.ndarray:
    if clean.shape != augmented.shape:
        raise ValueError("clean and augmented batches must have the same shape")
    mask = mix_mask(clean.shape[0], beta, seed)
    return np.where(mask.reshape((-1,) + (1,) * (clean.ndim - 1)), augmented, clean)
