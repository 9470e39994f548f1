"""Acceptance criteria 1-8. Each test records one PASS/FAIL line, echoed in
the terminal summary. Tolerances are pinned as module constants."""

import itertools
import os
import subprocess
import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest
import torch

from helpers import (FD_RTOL, REFERENCES, max_relative_error, record_criterion, tiny_batch, tiny_params)
from vgbench.agent import AgentConfig
from vgbench.agent.losses import (actor_loss, alpha_loss, critic_loss_from_latent, encoder_reg_loss, latent_reg,
                                  soft_target)
from vgbench.augment import AUG_KINDS, AugSeed, apply_params, augment_pair, color_jitter, derive_stream, mix_batch, \
    mix_count, sample_params
from vgbench.cli import RunConfig, RunSettings, read_metrics, train
from vgbench.evalproto import (EvalConditions, attention_map, encoder_variance_analysis, env_factory,
                               evaluate_policy, factor_sweep, generalization_error)
from vgbench.agent.networks import Encoder
from vgbench.visualgen import FACTORS, FactorToggles, canonical_spec, canonical_state, sample_visual_spec
from vgbench.visualgen import spec as spec_mod

# -- pinned tolerances and sizes ------------------------------------------

E_G_TOL_PP = 0.1                    # criterion 1, percentage points
N_RENDER_PAIRS = 50                 # criterion 2a
N_AUG_SEEDS = 100                   # criterion 2b
DETERMINISM_STEPS = 200             # criterion 2c
GRAD_RTOL = FD_RTOL                 # criterion 3, 1e-4
N_ORTHO_SEEDS = 1000                # criterion 4
N_ORACLE_CASES = 200                # criterion 5
MIX_BETAS = (0.0, 0.25, 0.9, 1.0)
MIX_BATCHES = (1, 7, 256)
SMOKE_STEPS = 5000                  # criterion 6
SMOKE_SEEDS = (0, 1, 2)
SMOKE_MULTIPLE = 3.0
SMOKE_MIN_PASSING = 2
SMOKE_BATCH = 64                    # desk-scale batch; see the decisions ledger
SMOKE_EVAL_EPISODES = 10
FLOOR_VISUAL_SEEDS = 10             # criterion 7
VARIANCE_RENDERINGS = 20            # criterion 8
ATTENTION_PEAK_PX = 2.0

# (task, method): (train, test, published E_G in percent)
TABLE1 = {
    ("Walker, Walk", "SAC+AE"): (643.6, 25.0, 96.1), ("Walker, Walk", "CURL"): (622.7, 25.3, 95.9),
    ("Walker, Walk", "SAC+AUG"): (919.3, 28.0, 97.0),
    ("Cheetah, Run", "SAC+AE"): (387.9, 4.2, 98.9), ("Cheetah, Run", "CURL"): (202.3, 2.4, 98.8),
    ("Cheetah, Run", "SAC+AUG"): (712.8, 19.8, 97.2),
    ("Hopper, Stand", "SAC+AE"): (631.8, 1.6, 99.8), ("Hopper, Stand", "CURL"): (425.5, 1.9, 99.5),
    ("Hopper, Stand", "SAC+AUG"): (878.1, 3.3, 99.6),
    ("Finger, Spin", "SAC+AE"): (622.1, 0.1, 100.0), ("Finger, Spin", "CURL"): (731.3, 1.6, 99.8),
    ("Finger, Spin", "SAC+AUG"): (916.7, 7.4, 99.2),
    ("Ball in Cup, Catch", "SAC+AE"): (647.0, 99.2, 84.6), ("Ball in Cup, Catch", "CURL"): (815.6, 106.3, 87.0),
    ("Ball in Cup, Catch", "SAC+AUG"): (934.5, 103.0, 89.0),
    ("Cartpole, Balance", "SAC+AE"): (942.8, 212.3, 77.5), ("Cartpole, Balance", "CURL"): (885.7, 233.3, 73.7),
    ("Cartpole, Balance", "SAC+AUG"): (987.4, 218.8, 77.8),
}


# -- 1 ---------------------------------------------------------------------


def test_criterion_1_generalization_error_table():
    worst, worst_key = 0.0, None
    for key, (train_ret, test_ret, published) in TABLE1.items():
        err = abs(100.0 * generalization_error(train_ret, [test_ret]) - published)
        if err > worst:
            worst, worst_key = err, key
    ok = record_criterion("1", worst <= E_G_TOL_PP,
                          f"{len(TABLE1)} entries, worst |diff| {worst:.3f} pp at {worst_key}, tol {E_G_TOL_PP} pp")
    assert ok


# -- 2 ---------------------------------------------------------------------

RENDER_SCRIPT = textwrap.dedent(f"""
    import hashlib
    import numpy as np
    from vgbench.visualgen import FactorToggles, canonical_state, render, sample_visual_spec
    rng = np.random.default_rng(77)
    for i in range({N_RENDER_PAIRS}):
        dom = ("cartpole", "reacher")[i % 2]
        base = canonical_state(dom)
        state = base + rng.normal(0.0, 0.3, size=base.shape)
        k = int(rng.integers(0, 2**40))
        img = render(state, sample_visual_spec(k, FactorToggles(), dom), dom)
        print(hashlib.sha256(img.tobytes()).hexdigest())
""")


def _run_render_process(**env):
    proc = subprocess.run([sys.executable, "-c", RENDER_SCRIPT], capture_output=True, text=True,
                          env={**os.environ, **env}, check=True)
    return proc.stdout.split()


def test_criterion_2a_render_determinism_across_processes():
    a = _run_render_process(PYTHONHASHSEED="1")
    b = _run_render_process(PYTHONHASHSEED="2")
    c = _run_render_process(PYTHONHASHSEED="3", VGBENCH_NUMBA="0")
    same = sum(x == y == z for x, y, z in zip(a, b, c))
    ok = record_criterion("2a", len(a) == N_RENDER_PAIRS and same == N_RENDER_PAIRS,
                          f"{same}/{N_RENDER_PAIRS} renders byte-identical across 3 processes (incl. numpy backend)")
    assert ok


def test_criterion_2b_augmentation_parameter_sharing():
    rng = np.random.default_rng(5)
    failures = []
    for kind in AUG_KINDS:
        size = 100 if kind == "rad_crop" else 84
        o = rng.integers(0, 256, (9, size, size), dtype=np.uint8)
        n = rng.integers(0, 256, (9, size, size), dtype=np.uint8)
        for s in range(N_AUG_SEEDS):
            trace = []
            augment_pair(o, n, (kind,), AugSeed(s, 11), trace=trace)
            digests = {rec[-1] for rec in trace}
            which = {(rec[0], rec[2]) for rec in trace}
            if len(digests) != 1 or len(which) != 6:
                failures.append((kind, s))
    total = len(AUG_KINDS) * N_AUG_SEEDS
    ok = record_criterion("2b", not failures,
                          f"{total - len(failures)}/{total} (kind, seed) draws shared by o, o' and all 3 frames")
    assert ok


def _cli_train(out: Path):
    args = ["train", "--out", str(out), "--quiet", f"training_steps={DETERMINISM_STEPS}", "warmup_steps=100",
            "batch_size=32", "eval_every=100", "eval_episodes=1", "seed=4", "dynamics_seed=4"]
    subprocess.run([sys.executable, "-m", "vgbench.cli", *args], check=True, capture_output=True, text=True)
    return [{k: v for k, v in rec.items() if k != "wall_time"} for rec in read_metrics(out / "metrics.jsonl")]


def test_criterion_2c_training_run_reproduces(tmp_path):
    a = _cli_train(tmp_path / "a")
    b = _cli_train(tmp_path / "b")
    wa = torch.load(tmp_path / "a" / "checkpoint.pt", weights_only=True)["params"]
    wb = torch.load(tmp_path / "b" / "checkpoint.pt", weights_only=True)["params"]
    weights_equal = all(torch.equal(wa[k], wb[k]) for k in wa)
    n_updates = sum("critic_loss" in r for r in a)
    ok = record_criterion("2c", a == b and weights_equal and n_updates > 0,
                          f"{len(a)} metrics records ({n_updates} with gradient updates) identical after removing "
                          f"wall_time; final weights equal: {weights_equal}")
    assert ok


# -- 3 ---------------------------------------------------------------------


def test_criterion_3_gradients_match_finite_differences():
    alpha, gamma = 0.1, 0.99
    errors = {}
    p = tiny_params(11)
    obs, act, rew, nxt, noise = tiny_batch(11)
    y = soft_target(p, nxt, rew, alpha, gamma, noise)
    errors["critic"] = max_relative_error(lambda: critic_loss_from_latent(p, p.encoder(obs), act, y),
                                          list(p.encoder.parameters()) + list(p.critic.parameters()))
    errors["actor"] = max_relative_error(lambda: actor_loss(p, obs, alpha, noise), list(p.actor.parameters()))
    log_alpha = torch.tensor(-1.3, dtype=torch.float64, requires_grad=True)
    log_probs = torch.linspace(-2, 1, 6, dtype=torch.float64)[:, None]
    errors["alpha"] = max_relative_error(lambda: alpha_loss(log_alpha, log_probs, -2.0), [log_alpha])
    with torch.no_grad():
        clean = p.encoder(obs)
    errors["encoder_reg"] = max_relative_error(lambda: latent_reg(clean, p.encoder(nxt)),
                                               list(p.encoder.parameters()))
    clean_in = obs.clone().requires_grad_(True)
    encoder_reg_loss(p.encoder, clean_in, nxt).backward()
    stop_ok = clean_in.grad is None or torch.count_nonzero(clean_in.grad).item() == 0
    worst = max(errors.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errors.items())
    ok = record_criterion("3", worst <= GRAD_RTOL and stop_ok,
                          f"relative errors {detail} (tol {GRAD_RTOL:g}); clean-branch gradient exactly zero: "
                          f"{stop_ok}")
    assert ok


# -- 4 ---------------------------------------------------------------------


def test_criterion_4_factor_orthogonality():
    violations = 0
    checks = 0
    for k in range(1, N_ORTHO_SEEDS + 1):
        alone = {a: sample_visual_spec(k, FactorToggles.only(a), "reacher") for a in FACTORS}
        for a, b in itertools.permutations(FACTORS, 2):
            field = spec_mod._FIELD[a]
            both = sample_visual_spec(k, FactorToggles.only(a, b), "reacher")
            checks += 1
            violations += getattr(both, field) != getattr(alone[a], field)
    canon = canonical_spec()
    seed0_ok = all(sample_visual_spec(0, FactorToggles(**dict(zip(FACTORS, bits))), dom) == canon
                   for dom in ("cartpole", "reacher")
                   for bits in itertools.product((False, True), repeat=len(FACTORS)))
    ok = record_criterion("4", violations == 0 and seed0_ok,
                          f"{violations} violations in {checks} (seed, A, B) checks; seed 0 canonical for every "
                          f"toggle combination: {seed0_ok}")
    assert ok


# -- 5 ---------------------------------------------------------------------


def test_criterion_5_augmentation_oracles():
    mismatches = {}
    for kind, ref in REFERENCES.items():
        if kind == "drq_no_noise":
            continue
        rng = np.random.default_rng(abs(hash(kind)) % 2**32)
        bad = 0
        for case in range(N_ORACLE_CASES):
            stack = rng.integers(0, 256, (9, 6, 6), dtype=np.uint8)
            params = sample_params(kind, derive_stream(AugSeed(case, 1)), stack.shape, out_size=4)
            bad += not np.array_equal(apply_params(kind, stack, params), ref(stack, params))
        mismatches[kind] = bad
    rng = np.random.default_rng(9)
    stack = rng.integers(0, 256, (9, 84, 84), dtype=np.uint8)
    rotate_id = np.array_equal(apply_params("rotate", stack, {"k": 0}), stack)
    jitter_id = all(np.array_equal(color_jitter(stack, AugSeed(s), strengths=(0, 0, 0, 0)), stack) for s in range(20))
    mix_bad = []
    for beta, batch in itertools.product(MIX_BETAS, MIX_BATCHES):
        want = int(np.floor(beta * batch + 0.5))
        mixed = mix_batch(np.zeros((batch, 1)), np.ones((batch, 1)), beta, AugSeed(3, batch))
        if mix_count(batch, beta) != want or int(mixed.sum()) != want:
            mix_bad.append((beta, batch))
    ok = record_criterion("5", not any(mismatches.values()) and rotate_id and jitter_id and not mix_bad,
                          f"6x6 oracle mismatches {mismatches} over {N_ORACLE_CASES} cases each; rotate 0 identity "
                          f"{rotate_id}; zero jitter identity {jitter_id}; mix count failures {mix_bad}")
    assert ok


# -- 6, 7: smoke learning --------------------------------------------------

_TRAINED: dict = {}


def smoke_agent(pipeline: str, seed: int, root: Path):
    """Train (once per session) the smoke agent for ``pipeline`` and ``seed``."""
    key = (pipeline, seed)
    if key not in _TRAINED:
        run = RunSettings(domain="cartpole", seed=seed, dynamics_seed=seed, visual_seed=0, toggles="all",
                          training_steps=SMOKE_STEPS, eval_every=0)
        agent_cfg = AgentConfig(batch_size=SMOKE_BATCH, pipeline=pipeline, beta=0.9, lam=1e-5)
        out = root / f"{pipeline.replace(',', '_')}_{seed}"
        out.mkdir(parents=True, exist_ok=True)
        _TRAINED[key] = train(RunConfig(run, agent_cfg), out)
    return _TRAINED[key]


@pytest.fixture(scope="session")
def smoke_root(tmp_path_factory):
    return tmp_path_factory.mktemp("smoke")


@pytest.mark.slow
def test_criterion_6_smoke_learning(smoke_root, random_baseline):
    threshold = SMOKE_MULTIPLE * random_baseline
    episodes = EvalConditions(n_train_dynamics_seeds=SMOKE_EVAL_EPISODES).train_episodes()
    make = env_factory("cartpole")
    returns = [evaluate_policy(smoke_agent("drq", s, smoke_root), make, episodes).mean for s in SMOKE_SEEDS]
    passing = sum(r >= threshold for r in returns)
    ok = record_criterion("6", passing >= SMOKE_MIN_PASSING,
                          f"eval returns {[round(r, 1) for r in returns]} vs threshold {threshold:.1f} "
                          f"({SMOKE_MULTIPLE:g}x random {random_baseline:.1f}); {passing}/{len(SMOKE_SEEDS)} seeds "
                          f"pass, need {SMOKE_MIN_PASSING}; batch {SMOKE_BATCH}, {SMOKE_STEPS} steps")
    assert ok


@pytest.mark.slow
def test_criterion_7_color_jitter_floor_direction(smoke_root):
    cond = EvalConditions(1, FLOOR_VISUAL_SEEDS, 1)
    floor = {}
    for pipeline in ("drq", "cj,drq"):
        floor[pipeline] = [factor_sweep(smoke_agent(pipeline, s, smoke_root), "cartpole", cond,
                                        columns=["Floor"]).mean("Floor") for s in SMOKE_SEEDS]
    plain, cj = float(np.mean(floor["drq"])), float(np.mean(floor["cj,drq"]))
    ok = record_criterion("7", cj >= plain,
                          f"Floor column mean over {len(SMOKE_SEEDS)} seeds: cj,drq {cj:.1f} vs drq {plain:.1f} "
                          f"(per seed {[round(v, 1) for v in floor['cj,drq']]} vs "
                          f"{[round(v, 1) for v in floor['drq']]})")
    assert ok


# -- 8 ---------------------------------------------------------------------


class _ConstantEncoder(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.z = torch.nn.Parameter(torch.linspace(-0.5, 0.5, 50))

    def forward(self, x):
        return self.z.expand(x.shape[0], -1)


def _pixel_stat_encoder(seed, window=24):
    rng = np.random.default_rng(seed)
    chans = rng.integers(0, 9, 50)
    corners = rng.integers(0, 84 - window + 1, (50, 2))

    def enc(obs):
        x = obs.astype(np.float64) / 255.0
        return np.stack([x[:, c, y:y + window, xx:xx + window].mean(axis=(1, 2)) for c, (y, xx) in
                         zip(chans, corners)], axis=1)
    return enc


def _planted_encoder(y, x):
    enc = Encoder((9, 84, 84), num_conv=2, num_filters=4, latent_dim=8).double()
    with torch.no_grad():
        for conv in enc.convs:
            conv.weight.zero_()
            conv.bias.zero_()
        enc.convs[0].weight[:, 0] = 1.0
        enc.convs[0].bias.fill_(-0.5)
    obs = np.zeros((9, 84, 84), dtype=np.uint8)
    obs[:, y, x] = 255
    return enc, obs


def test_criterion_8_analysis_pipeline():
    state = canonical_state("cartpole")
    zero = encoder_variance_analysis([_ConstantEncoder()], state, "floor", VARIANCE_RENDERINGS)
    zero_ok = zero.shape == (50,) and np.all(zero == 0.0)
    curve = encoder_variance_analysis([_pixel_stat_encoder(s) for s in range(3)], state, "light",
                                      VARIANCE_RENDERINGS)
    curve_ok = curve.shape == (50,) and bool(np.all(np.diff(curve) >= 0)) and curve.min() > 0
    distances = []
    for spot in [(20, 60), (50, 15), (70, 70)]:
        enc, obs = _planted_encoder(*spot)
        heat = attention_map(enc, obs, 0).heatmap
        peak = np.unravel_index(np.argmax(heat), heat.shape)
        distances.append(float(np.hypot(peak[0] - spot[0], peak[1] - spot[1])))
    peak_ok = max(distances) <= ATTENTION_PEAK_PX
    ok = record_criterion("8", zero_ok and curve_ok and peak_ok,
                          f"constant encoder curve all zero {zero_ok}; pixel-statistic curve positive, "
                          f"non-decreasing, length 50: {curve_ok} (min {curve.min():.2e}); attention peak "
                          f"distances {distances} px (tol {ATTENTION_PEAK_PX})")
    assert ok
