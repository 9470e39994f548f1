"""Zero-shot evaluation: returns under visual-seed grids, generalization
error, factor-isolation sweeps, encoder output variance and attention maps.

Evaluation grid conventions (shared by every method, so comparisons are
paired):

* train condition: visual seed 0, dynamics seeds ``DYNAMICS_BASE + i`` for
  ``i < n_train_dynamics_seeds``;
* test conditions: visual seeds ``1..n_test_visual_seeds`` crossed with
  dynamics seeds ``DYNAMICS_BASE + j`` for ``j < n_test_dynamics_seeds_per_visual``.

Every episode starts from episode index 0 of its dynamics seed.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envcore import DOMAINS, ConfigError, EnvConfig
from .visualgen import APPLICABLE, FactorToggles, Fixed, pixel_env, render, sample_visual_spec

DYNAMICS_BASE = 10_000

COLUMN_FACTORS = {
    "Light": "light", "Camera": "camera", "Body Color": "body_color", "Floor": "floor",
    "Background": "background", "Reflectance": "reflectance", "Target Color": "target_color",
}
COLUMN_ORDER = ("None", "Light", "Camera", "Body Color", "Floor", "Background", "Reflectance",
                "Target Color", "All")
CSV_HEADER = ("method", "domain", "toggle_column", "visual_seed", "dynamics_seed", "return")


@dataclass(frozen=True)
class Episode:
    visual_seed: int
    dynamics_seed: int
    toggles: FactorToggles = field(default_factory=FactorToggles)


@dataclass(frozen=True)
class EvalConditions:
    n_train_dynamics_seeds: int = 100
    n_test_visual_seeds: int = 100
    n_test_dynamics_seeds_per_visual: int = 3
    deterministic: bool = True

    def __post_init__(self):
        for name in ("n_train_dynamics_seeds", "n_test_visual_seeds", "n_test_dynamics_seeds_per_visual"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1 (empty evaluation grid)")

    def train_episodes(self) -> list[Episode]:
        return [Episode(0, DYNAMICS_BASE + i, FactorToggles.none()) for i in range(self.n_train_dynamics_seeds)]

    def test_episodes(self, toggles: FactorToggles) -> list[Episode]:
        return [Episode(v, DYNAMICS_BASE + j, toggles)
                for v in range(1, self.n_test_visual_seeds + 1)
                for j in range(self.n_test_dynamics_seeds_per_visual)]


def env_factory(domain: str, size: int = 84, frame_skip: int = 0):
    """Returns ``f(episode) -> PixelEnv`` for ``domain``."""
    if domain not in DOMAINS:
        raise ConfigError(f"unknown domain {domain!r}")

    def make(ep: Episode):
        cfg = EnvConfig(domain, dynamics_seed=ep.dynamics_seed, frame_skip=frame_skip)
        return pixel_env(cfg, Fixed(ep.visual_seed, ep.toggles), size=size)

    return make


def _policy_fn(policy, deterministic):
    if hasattr(policy, "act"):
        return lambda obs: policy.act(obs, deterministic=deterministic)
    return policy


@dataclass
class EvalResult:
    returns: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))

    @property
    def std(self) -> float:
        return float(np.std(self.returns))


def run_episode(policy, env) -> float:
    obs = env.reset(0)
    total, done = 0.0, False
    while not done:
        obs, r, done = env.step(policy(obs))
        total += r
    return total


def evaluate_policy(policy, make_env, episodes, deterministic: bool = True) -> EvalResult:
    """Undiscounted return of one full episode per entry of ``episodes``.

    ``policy`` is an agent with ``act(obs, deterministic=...)`` or a plain
    callable ``obs -> action``.
    """
    episodes = list(episodes)
    if not episodes:
        raise ConfigError("empty episode list")
    fn = _policy_fn(policy, deterministic)
    return EvalResult([run_episode(fn, make_env(ep)) for ep in episodes])


def generalization_error(train_return: float, test_returns) -> float | None:
    """(train - mean(test)) / train, or None when train is zero."""
    tests = np.asarray(list(test_returns), dtype=np.float64)
    if tests.size == 0:
        raise ValueError("test_returns is empty")
    if train_return == 0:
        return None
    return float((train_return - tests.mean()) / train_return)


def sweep_columns(domain: str) -> list[tuple[str, FactorToggles]]:
    """Toggle columns for ``domain``: None, one per applicable factor, All."""
    cols = [("None", FactorToggles.none())]
    for name in COLUMN_ORDER[1:-1]:
        factor = COLUMN_FACTORS[name]
        if factor in APPLICABLE[domain]:
            cols.append((name, FactorToggles.only(factor)))
    cols.append(("All", FactorToggles()))
    return cols


@dataclass(frozen=True)
class Row:
    toggle_column: str
    visual_seed: int
    dynamics_seed: int
    ret: float


@dataclass
class EvalReport:
    method: str
    domain: str
    rows: list[Row] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.toggle_column not in seen:
                seen.append(r.toggle_column)
        return seen

    def returns(self, column: str) -> list[float]:
        out = [r.ret for r in self.rows if r.toggle_column == column]
        if not out:
            raise KeyError(column)
        return out

    def mean(self, column: str) -> float:
        return float(np.mean(self.returns(column)))

    def std(self, column: str) -> float:
        return float(np.std(self.returns(column)))

    def e_g(self, column: str) -> float | None:
        """Generalization error of ``column`` against the None column."""
        return generalization_error(self.mean("None"), self.returns(column))

    def table1(self) -> dict:
        """Train (None), Test (All) and E_G, as in the headline table."""
        return {"Train": self.mean("None"), "Test": self.mean("All"), "E_G": self.e_g("All")}

    def summary(self) -> dict:
        cols = {c: {"mean": self.mean(c), "std": self.std(c), "n": len(self.returns(c)), "E_G": self.e_g(c)}
                for c in self.columns}
        out = {"method": self.method, "domain": self.domain, "columns": cols, "notes": list(self.notes)}
        if "None" in cols and "All" in cols:
            out["table1"] = self.table1()
        return out


def factor_sweep(policy, domain: str, conditions: EvalConditions, method: str = "agent", make_env=None,
                 columns=None) -> EvalReport:
    """Evaluate ``policy`` once per toggle column.

    The None column is the training condition (visual seed 0 over the train
    dynamics seeds); every other column runs the test grid with only its
    factor randomized (All: every applicable factor).
    """
    make_env = make_env or env_factory(domain)
    report = EvalReport(method, domain)
    available = dict(sweep_columns(domain))
    wanted = list(available) if columns is None else list(columns)
    for name in wanted:
        if name not in available:
            report.notes.append(f"column {name!r} omitted: factor not applicable to {domain}")
            continue
        episodes = conditions.train_episodes() if name == "None" else conditions.test_episodes(available[name])
        res = evaluate_policy(policy, make_env, episodes, conditions.deterministic)
        report.rows.extend(Row(name, ep.visual_seed, ep.dynamics_seed, r) for ep, r in zip(episodes, res.returns))
    for factor in sorted(set(COLUMN_FACTORS.values()) - set(APPLICABLE[domain])):
        report.notes.append(f"factor {factor!r} not applicable to {domain}")
    return report


def write_report(report: EvalReport, out_dir) -> tuple[Path, Path]:
    """``returns.csv`` (one row per episode) and ``summary.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "returns.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in report.rows:
            w.writerow([report.method, report.domain, r.toggle_column, r.visual_seed, r.dynamics_seed, repr(r.ret)])
    json_path = out_dir / "summary.json"
    json_path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True))
    return csv_path, json_path


def read_report(out_dir) -> EvalReport:
    out_dir = Path(out_dir)
    with open(out_dir / "returns.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        rows = list(reader)
    summary = json.loads((out_dir / "summary.json").read_text())
    report = EvalReport(summary["method"], summary["domain"], notes=list(summary.get("notes", [])))
    for method, domain, col, vs, ds, ret in rows:
        report.rows.append(Row(col, int(vs), int(ds), float(ret)))
    return report


# -- representation analyses ----------------------------------------------


def _encode_fn(encoder):
    """Normalize an agent, a torch encoder or a callable into uint8 batch -> array."""
    import torch

    if hasattr(encoder, "params"):
        encoder = encoder.params.encoder
    if isinstance(encoder, torch.nn.Module):
        def run(batch):
            with torch.no_grad():
                x = torch.from_numpy(np.ascontiguousarray(batch)).to(next(encoder.parameters()).dtype)
                return encoder(x).numpy()
        return run
    return encoder


def fixed_state_observations(domain: str, state, factor: str, n_renderings: int, size: int = 84,
                             first_seed: int = 1) -> np.ndarray:
    """(n, 9, S, S) stacks of one state under seeds first_seed.. with only ``factor`` on."""
    toggles = FactorToggles.only(factor)
    frames = []
    for k in range(first_seed, first_seed + n_renderings):
        frame = render(state, sample_visual_spec(k, toggles, domain), domain, size=size).transpose(2, 0, 1)
        frames.append(np.concatenate([frame] * 3, axis=0))
    return np.stack(frames)


def variance_curve(encoder, observations) -> np.ndarray:
    """Sorted per-dimension standard deviation of one encoder's outputs."""
    z = np.asarray(_encode_fn(encoder)(observations), dtype=np.float64)
    return np.sort(z.std(axis=0))


def encoder_variance_analysis(encoders, fixed_state, factor: str = "floor", n_renderings: int = 100,
                              domain: str = "cartpole", size: int = 84) -> np.ndarray:
    """Render ``fixed_state`` under ``n_renderings`` visual seeds varying only
    ``factor``, encode, take each latent dimension's standard deviation, sort
    ascending, and average the sorted curves over ``encoders``."""
    if n_renderings < 2:
        raise ValueError("n_renderings must be at least 2")
    encoders = list(encoders)
    if not encoders:
        raise ValueError("need at least one encoder")
    obs = fixed_state_observations(domain, fixed_state, factor, n_renderings, size)
    return np.mean([variance_curve(e, obs) for e in encoders], axis=0)


@dataclass
class AttentionMap:
    heatmap: np.ndarray  # (H, W) in [0, 1]
    overlay: np.ndarray  # (H, W, 3) uint8


def attention_map(encoder, obs: np.ndarray, layer_index: int, alpha: float = 0.5) -> AttentionMap:
    """Channel-mean activation of conv layer ``layer_index``, bilinearly
    resized to the observation, min-max normalized and blended over the
    most recent frame."""
    import torch
    import torch.nn.functional as F

    if hasattr(encoder, "params"):
        encoder = encoder.params.encoder
    depth = len(encoder.convs)
    if not 0 <= layer_index < depth:
        raise ValueError(f"layer_index must lie in [0, {depth}), got {layer_index}")
    obs = np.asarray(obs)
    h, w = obs.shape[-2:]
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(obs[None])).to(next(encoder.parameters()).dtype)
        act = encoder.conv_activations(x)[layer_index].mean(dim=1, keepdim=True)
        act = F.interpolate(act, size=(h, w), mode="bilinear", align_corners=False)[0, 0].double().numpy()
    lo, hi = act.min(), act.max()
    heat = (act - lo) / (hi - lo) if hi > lo else np.zeros_like(act)
    frame = obs[-3:].transpose(1, 2, 0).astype(np.float64) / 255.0
    color = np.stack([heat, heat ** 2, 0.2 * (1.0 - heat)], axis=-1)
    blend = (1.0 - alpha) * frame + alpha * color
    overlay = np.floor(np.clip(blend, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return AttentionMap(heat, overlay)

