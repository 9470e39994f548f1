"""Command line: ``vgbench {train,eval,sweep,gallery,analyze}``.

Settings are flat ``key=value`` pairs. They are resolved in three layers:
built-in defaults, then ``--config FILE`` (one ``key=value`` per line, ``#``
comments), then ``key=value`` arguments on the command line. The resolved
settings are written to ``config.txt`` in every output directory, and that
file can be passed back through ``--config`` to reproduce a run.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .agent import AgentConfig, EpisodeRunner, SACAgent, load_checkpoint, make_buffer, save_checkpoint, train_step
from .augment import GEOMETRIC, parse_pipeline
from .envcore import DOMAINS, ConfigError, EnvConfig
from .evalproto import (EvalConditions, attention_map, encoder_variance_analysis, env_factory, evaluate_policy,
                        factor_sweep, write_report)
from .plots import plot_curves, plot_variance, save_png, tile
from .visualgen import FactorToggles, Fixed, canonical_state, pixel_env, render, sample_visual_spec

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

TRAINING_STEPS = {"cartpole": 50_000, "reacher": 100_000}
SWEEP_GRIDS = {
    "beta": "0,0.5,0.9,1.0",
    "lambda": "0,1e-5,1e-4,0.0015",
    "augmentation": ",".join(GEOMETRIC),
}
RAD_SIZE = 100


@dataclass(frozen=True)
class RunSettings:
    domain: str = "cartpole"
    seed: int = 0
    dynamics_seed: int = 0
    visual_seed: int = 0
    toggles: str = "all"
    frame_skip: int = 0
    training_steps: int = 0  # 0 -> per-domain default
    eval_every: int = 5_000
    eval_episodes: int = 10
    checkpoint_every: int = 0
    method: str = "SAC+AUG"
    n_train_dynamics_seeds: int = 100
    n_test_visual_seeds: int = 100
    n_test_dynamics_seeds: int = 3
    analysis_factor: str = "floor"
    n_renderings: int = 100
    attention_layer: int = 0

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        FactorToggles.parse(self.toggles)
        if self.training_steps < 0 or self.eval_every < 0 or self.checkpoint_every < 0:
            raise ConfigError("step counts must be non-negative")

    @property
    def steps(self) -> int:
        return self.training_steps or TRAINING_STEPS[self.domain]

    def conditions(self) -> EvalConditions:
        return EvalConditions(self.n_train_dynamics_seeds, self.n_test_visual_seeds, self.n_test_dynamics_seeds)


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings
    agent: AgentConfig

    def flat(self) -> dict:
        return {**asdict(self.run), **asdict(self.agent)}

    def to_text(self) -> str:
        return "".join(f"{k}={_format(v)}\n" for k, v in sorted(self.flat().items()))

    @property
    def render_size(self) -> int:
        return RAD_SIZE if "rad_crop" in self.agent.kinds else self.agent.image_size


def _format(v) -> str:
    return "none" if v is None else repr(v) if isinstance(v, float) else str(v)


def _field_types() -> dict:
    out = {}
    for cls in (RunSettings, AgentConfig):
        for f in fields(cls):
            out[f.name] = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    return out


def _coerce(key: str, text: str, kind: str):
    text = text.strip()
    try:
        if "None" in kind and text.lower() in ("none", ""):
            return None
        if kind.startswith("int"):
            v = float(text) if any(c in text.lower() for c in ".e") else int(text)
            if v != int(v):
                raise ValueError(text)
            return int(v)
        if kind.startswith("float"):
            return float(text)
        if kind.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r} (expected {kind})") from None
    return text


def parse_pairs(pairs) -> dict:
    types = _field_types()
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key not in types:
            raise ConfigError(f"unknown setting {key!r}")
        out[key] = _coerce(key, value, types[key])
    return out


def read_config_file(path) -> dict:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    pairs = [ln.split("#", 1)[0].strip() for ln in lines]
    return parse_pairs([p for p in pairs if p])


def resolve(config_file=None, overrides=(), base: dict | None = None) -> RunConfig:
    values = dict(base or {})
    if config_file:
        values.update(read_config_file(config_file))
    values.update(parse_pairs(overrides))
    run_keys = {f.name for f in fields(RunSettings)}
    try:
        run = RunSettings(**{k: v for k, v in values.items() if k in run_keys})
        agent = AgentConfig(**{k: v for k, v in values.items() if k not in run_keys})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(run, agent)


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    return out


# -- train ---------------------------------------------------------------


def make_train_env(cfg: RunConfig):
    r = cfg.run
    env_cfg = EnvConfig(r.domain, dynamics_seed=r.dynamics_seed, frame_skip=r.frame_skip)
    toggles = FactorToggles.parse(r.toggles)
    return pixel_env(env_cfg, Fixed(r.visual_seed, toggles), size=cfg.render_size)


def evaluate_train_condition(agent, cfg: RunConfig, n_episodes: int) -> float:
    episodes = EvalConditions(n_train_dynamics_seeds=n_episodes).train_episodes()
    make = env_factory(cfg.run.domain, size=cfg.render_size, frame_skip=cfg.run.frame_skip)
    return evaluate_policy(agent, make, episodes).mean


def train(cfg: RunConfig, out: Path, log=None) -> SACAgent:
    """Run the training loop, writing ``metrics.jsonl`` and checkpoints to ``out``.

    Each metrics record is one JSON object per line: ``event`` ("step" or
    "eval"), ``step``, ``wall_time`` (seconds since start) and named scalars.
    """
    env = make_train_env(cfg)
    agent = SACAgent(cfg.agent, env.action_dim, cfg.run.seed)
    buffer = make_buffer(cfg.agent, env.obs_shape, env.action_dim)
    runner = EpisodeRunner(env)
    extra = {"domain": cfg.run.domain, "frame_skip": env.config.frame_skip, "render_size": cfg.render_size,
             "run_config": cfg.to_text()}
    t0 = time.perf_counter()
    steps = cfg.run.steps
    with open(out / "metrics.jsonl", "w") as fh:
        for t in range(steps):
            rec = train_step(agent, buffer, runner, t)
            rec = {"event": "step", **rec, "wall_time": round(time.perf_counter() - t0, 3)}
            fh.write(json.dumps(rec) + "\n")
            done = t + 1
            if cfg.run.eval_every and done % cfg.run.eval_every == 0:
                ret = evaluate_train_condition(agent, cfg, cfg.run.eval_episodes)
                ev = {"event": "eval", "step": done, "mean_return": ret,
                      "wall_time": round(time.perf_counter() - t0, 3)}
                fh.write(json.dumps(ev) + "\n")
                fh.flush()
                if log:
                    log(f"step {done}: eval return {ret:.1f}")
            if cfg.run.checkpoint_every and done % cfg.run.checkpoint_every == 0 and done < steps:
                save_checkpoint(agent, out / f"checkpoint_{done}.pt", extra)
    save_checkpoint(agent, out / "checkpoint.pt", extra)
    return agent


def read_metrics(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def cmd_train(args) -> int:
    cfg = resolve(args.config, args.overrides)
    out = _out_dir(args.out)
    (out / "config.txt").write_text(cfg.to_text())
    train(cfg, out, log=_log(args))
    return EXIT_OK


# -- eval ----------------------------------------------------------------


def load_agent(path):
    try:
        return load_checkpoint(path)
    except FileNotFoundError:
        raise ConfigError(f"checkpoint {path} not found") from None


def cmd_eval(args) -> int:
    agent, extra = load_agent(args.checkpoint)
    overrides = parse_pairs(args.overrides)
    domain = extra.get("domain", "cartpole")
    if overrides.get("domain", domain) != domain:
        raise ConfigError(f"checkpoint was trained on {domain!r}, not {overrides['domain']!r}")
    run = replace(RunSettings(domain=domain), **{k: v for k, v in overrides.items()
                                                 if k in {f.name for f in fields(RunSettings)}})
    out = _out_dir(args.out)
    cfg = RunConfig(run, agent.config)
    (out / "config.txt").write_text(cfg.to_text())
    make = env_factory(domain, size=extra.get("render_size", 84), frame_skip=extra.get("frame_skip", 0))
    report = factor_sweep(agent, domain, run.conditions(), method=run.method, make_env=make)
    write_report(report, out)
    t1 = report.table1()
    with open(out / "table1.csv", "w") as fh:
        fh.write("Train,Test,E_G\n")
        fh.write(f"{t1['Train']!r},{t1['Test']!r},{_format(t1['E_G'])}\n")
    _log(args)(f"train {t1['Train']:.1f}  test {t1['Test']:.1f}  E_G {_format(t1['E_G'])}")
    return EXIT_OK


# -- sweep ---------------------------------------------------------------


def sweep_points(kind: str, grid: str) -> list:
    items = [g.strip() for g in grid.split(",") if g.strip()]
    if not items:
        raise ConfigError("empty sweep grid")
    if kind == "augmentation":
        for k in items:
            parse_pipeline(k)
        return items
    try:
        return [float(g) for g in items]
    except ValueError:
        raise ConfigError(f"{kind} grid must be numeric: {grid!r}") from None


def cmd_sweep(args) -> int:
    kind = args.kind
    points = sweep_points(kind, args.grid or SWEEP_GRIDS[kind])
    base = resolve(args.config, args.overrides)
    out = _out_dir(args.out)
    (out / "config.txt").write_text(base.to_text())
    curves, finals = {}, []
    for p in points:
        field_name = {"beta": "beta", "lambda": "lam", "augmentation": "pipeline"}[kind]
        cfg = RunConfig(base.run, replace(base.agent, **{field_name: p}))
        label = f"{kind}={p}"
        sub = _out_dir(out / label.replace("=", "_"))
        (sub / "config.txt").write_text(cfg.to_text())
        _log(args)(f"training {label}")
        train(cfg, sub)
        evals = [r for r in read_metrics(sub / "metrics.jsonl") if r["event"] == "eval"]
        xs, ys = [r["step"] for r in evals], [r["mean_return"] for r in evals]
        curves[label] = (xs, ys)
        finals.append((label, ys[-1] if ys else float("nan")))
    (out / "curves.json").write_text(json.dumps({k: {"step": v[0], "return": v[1]} for k, v in curves.items()},
                                                indent=2, sort_keys=True))
    with open(out / "final_returns.csv", "w") as fh:
        fh.write("setting,final_return\n")
        for label, v in finals:
            fh.write(f"{label},{v!r}\n")
    plot_curves(curves, out / "learning_curves.png", title=f"{kind} sweep ({base.run.domain})")
    return EXIT_OK


# -- gallery -------------------------------------------------------------


def parse_seed_range(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"bad seed range {text!r}") from None
    if not seeds or min(seeds) < 0:
        raise ConfigError(f"seed range must list non-negative seeds: {text!r}")
    return seeds


def gallery(domain: str, seeds, toggles: FactorToggles, columns: int = 5):
    """Returns (tiled image, manifest lines, specs)."""
    state = canonical_state(domain)
    specs = [sample_visual_spec(k, toggles, domain) for k in seeds]
    tiles = [render(state, s, domain) for s in specs]
    manifest = [f"{k}\t{json.dumps(s.describe(), sort_keys=True)}" for k, s in zip(seeds, specs)]
    return tile(tiles, columns), manifest, specs


def cmd_gallery(args) -> int:
    if args.domain not in DOMAINS:
        raise ConfigError(f"unknown domain {args.domain!r}")
    seeds = parse_seed_range(args.seeds)
    image, manifest, _ = gallery(args.domain, seeds, FactorToggles.parse(args.toggles), args.columns)
    out = _out_dir(args.out)
    save_png(image, out / "gallery.png")
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    return EXIT_OK


# -- analyze -------------------------------------------------------------


def cmd_analyze(args) -> int:
    if not args.checkpoints:
        raise ConfigError("analyze needs at least one checkpoint")
    loaded = [load_agent(p) for p in args.checkpoints]
    domains = {extra.get("domain", "cartpole") for _, extra in loaded}
    if len(domains) != 1:
        raise ConfigError(f"checkpoints mix domains: {sorted(domains)}")
    domain = domains.pop()
    run = replace(RunSettings(domain=domain), **{k: v for k, v in parse_pairs(args.overrides).items()
                                                 if k in {f.name for f in fields(RunSettings)}})
    out = _out_dir(args.out)
    agents = [a for a, _ in loaded]
    state = canonical_state(domain)
    if args.kind == "variance":
        curves = {}
        for i, (path, agent) in enumerate(zip(args.checkpoints, agents)):
            label = Path(path).stem
            if label in curves or label == "mean":
                label = f"{label}_{i}"
            curves[label] = encoder_variance_analysis([agent], state, run.analysis_factor,
                                                                run.n_renderings, domain)
        mean = np.mean(list(curves.values()), axis=0)
        curves["mean"] = mean
        with open(out / "variance.csv", "w") as fh:
            fh.write("label," + ",".join(f"d{i}" for i in range(len(mean))) + "\n")
            for label, ys in curves.items():
                fh.write(label + "," + ",".join(repr(float(y)) for y in ys) + "\n")
        plot_variance(curves, out / "variance.png", title=f"{run.analysis_factor} variation ({domain})")
    else:
        spec = sample_visual_spec(run.visual_seed, FactorToggles.parse(run.toggles), domain)
        frame = render(state, spec, domain).transpose(2, 0, 1)
        obs = np.concatenate([frame] * 3, axis=0)
        for path, agent in zip(args.checkpoints, agents):
            amap = attention_map(agent, obs, run.attention_layer)
            save_png(amap.overlay, out / f"attention_{Path(path).stem}_layer{run.attention_layer}.png")
    return EXIT_OK


# -- entry point ---------------------------------------------------------


def _log(args):
    quiet = getattr(args, "quiet", False)
    return (lambda msg: None) if quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vgbench", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="key=value settings file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("overrides", nargs="*", metavar="key=value", help="setting overrides")

    p = sub.add_parser("train", help="train one agent; writes checkpoint.pt and metrics.jsonl")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="factor sweep and E_G for a checkpoint")
    p.add_argument("checkpoint")
    common(p, config=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train one short run per grid point and compare")
    p.add_argument("kind", choices=sorted(SWEEP_GRIDS))
    p.add_argument("--grid", help="comma-separated values (default: the standard grid)")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gallery", help="render the canonical state under a range of visual seeds")
    p.add_argument("--domain", default="cartpole")
    p.add_argument("--seeds", default="0-9", help="e.g. 0-9 or 0,3,7")
    p.add_argument("--toggles", default="all")
    p.add_argument("--columns", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("analyze", help="encoder variance curves or attention overlays")
    p.add_argument("kind", choices=("variance", "attention"))
    p.add_argument("checkpoints", nargs="*")
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="key=value")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # key=value pairs may follow options, which argparse leaves unconsumed
    args, extra = parser.parse_known_args(argv)
    stray = [e for e in extra if "=" not in e or e.startswith("-")]
    if stray or (extra and not hasattr(args, "overrides")):
        parser.error(f"unrecognized arguments: {' '.join(stray or extra)}")
    if extra:
        args.overrides = list(args.overrides) + extra
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
