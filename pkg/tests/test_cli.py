import json
import os
import subprocess
import sys

import numpy as np
import pytest

from vgbench import cli
from vgbench.cli import main, parse_seed_range, read_metrics, resolve
from vgbench.envcore import ConfigError
from vgbench.plots import load_png

TINY = ["training_steps=30", "warmup_steps=15", "batch_size=8", "num_filters=4", "num_conv=2", "latent_dim=8",
        "hidden_dim=16", "eval_every=30", "eval_episodes=1", "buffer_capacity=64"]
TINY_EVAL = ["n_train_dynamics_seeds=1", "n_test_visual_seeds=1", "n_test_dynamics_seeds=1"]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert main(["train", "--out", str(out), "--quiet", *TINY]) == 0
    return out


def test_resolve_layers(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("# comment\nbeta=0.5\nlam = 0.001\ndomain=reacher\n")
    cfg = resolve(f, ["beta=0.25"])
    assert cfg.agent.beta == 0.25 and cfg.agent.lam == 0.001 and cfg.run.domain == "reacher"
    assert cfg.run.steps == 100_000 and resolve().run.steps == 50_000
    again = tmp_path / "again.txt"
    again.write_text(cfg.to_text())
    assert resolve(again) == cfg


def test_render_size_follows_pipeline():
    assert resolve(overrides=["pipeline=rad"]).render_size == 100
    assert resolve(overrides=["pipeline=cj,drq"]).render_size == 84


@pytest.mark.parametrize("pairs", [["bogus=1"], ["beta=2"], ["beta=high"], ["domain=walker"], ["noequals"],
                                   ["batch_size=1.5"], ["toggles=floor,gravity"], ["pipeline=blur"]])
def test_resolve_rejects_bad_settings(pairs):
    with pytest.raises(ConfigError):
        resolve(overrides=pairs)


def test_seed_ranges():
    assert parse_seed_range("0-3") == [0, 1, 2, 3]
    assert parse_seed_range("5,1, 2-3") == [5, 1, 2, 3]
    for bad in ("", "a-b", "-3"):
        with pytest.raises(ConfigError):
            parse_seed_range(bad)


def test_exit_codes(tmp_path):
    assert main(["train", "--out", str(tmp_path), "bogus=1"]) == 2
    assert main(["eval", str(tmp_path / "missing.pt"), "--out", str(tmp_path)]) == 2
    assert main(["analyze", "variance", "--out", str(tmp_path)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["gallery", "--out", str(blocker / "sub"), "--seeds", "0-1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    garbage = tmp_path / "garbage.pt"
    garbage.write_bytes(b"not a checkpoint")
    assert main(["eval", str(garbage), "--out", str(tmp_path / "e"), "--quiet"]) == 3


def test_gallery(tmp_path):
    assert main(["gallery", "--out", str(tmp_path), "--seeds", "0-5", "--columns", "3", "--quiet"]) == 0
    img = load_png(tmp_path / "gallery.png")
    assert img.shape == (2 * 84 + 3 * 2, 3 * 84 + 4 * 2, 3)
    lines = (tmp_path / "manifest.txt").read_text().splitlines()
    assert [int(ln.split("\t")[0]) for ln in lines] == list(range(6))
    assert json.loads(lines[1].split("\t")[1])["visual_seed"] == 1
    tiles = [img[2:86, 2 + c * 86:86 + c * 86] for c in range(2)]
    assert not np.array_equal(tiles[0], tiles[1])


def test_train_outputs(trained):
    assert (trained / "checkpoint.pt").exists()
    cfg_text = (trained / "config.txt").read_text()
    assert "training_steps=30" in cfg_text and "beta=0.9" in cfg_text
    recs = read_metrics(trained / "metrics.jsonl")
    steps = [r for r in recs if r["event"] == "step"]
    evals = [r for r in recs if r["event"] == "eval"]
    assert len(steps) == 30 and [r["step"] for r in steps] == list(range(30))
    assert len(evals) == 1 and evals[0]["step"] == 30 and np.isfinite(evals[0]["mean_return"])
    assert "critic_loss" in steps[-1] and "critic_loss" not in steps[0]
    assert all("wall_time" in r for r in recs)


def test_train_reproducible_from_config_file(trained, tmp_path):
    assert main(["train", "--config", str(trained / "config.txt"), "--out", str(tmp_path), "--quiet"]) == 0

    def strip(path):
        return [{k: v for k, v in r.items() if k != "wall_time"} for r in read_metrics(path)]
    assert strip(trained / "metrics.jsonl") == strip(tmp_path / "metrics.jsonl")


def test_eval_round_trip(trained, tmp_path):
    out = tmp_path / "eval"
    assert main(["eval", str(trained / "checkpoint.pt"), "--out", str(out), "--quiet", *TINY_EVAL]) == 0
    from vgbench.evalproto import read_report
    report = read_report(out)
    assert report.columns[0] == "None" and report.columns[-1] == "All" and len(report.rows) == 8
    head, row = (out / "table1.csv").read_text().splitlines()
    assert head == "Train,Test,E_G"
    t = report.table1()
    assert float(row.split(",")[0]) == t["Train"] and float(row.split(",")[1]) == t["Test"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["columns"]["All"]["E_G"] == pytest.approx(report.e_g("All"), abs=1e-9)


def test_eval_domain_mismatch(trained, tmp_path):
    assert main(["eval", str(trained / "checkpoint.pt"), "--out", str(tmp_path), "domain=reacher"]) == 2


def test_analyze_outputs(trained, tmp_path):
    ck = str(trained / "checkpoint.pt")
    assert main(["analyze", "variance", ck, ck, "--out", str(tmp_path), "--quiet", "--set", "n_renderings=4"]) == 0
    lines = (tmp_path / "variance.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[-1].startswith("mean,") and len(lines[1].split(",")) == 1 + 8
    assert (tmp_path / "variance.png").exists()
    assert main(["analyze", "attention", ck, "--out", str(tmp_path), "--quiet", "--set", "attention_layer=1"]) == 0
    assert load_png(tmp_path / "attention_checkpoint_layer1.png").shape == (84, 84, 3)
    assert main(["analyze", "attention", ck, "--out", str(tmp_path), "--set", "attention_layer=5"]) == 3


def test_sweep_outputs(tmp_path):
    args = ["sweep", "beta", "--grid", "0,1", "--out", str(tmp_path), "--quiet",
            *[t for t in TINY if not t.startswith("training_steps")], "training_steps=20", "eval_every=20",
            "warmup_steps=10"]
    assert main(args) == 0
    curves = json.loads((tmp_path / "curves.json").read_text())
    assert set(curves) == {"beta=0.0", "beta=1.0"}
    assert (tmp_path / "learning_curves.png").exists()
    assert len((tmp_path / "final_returns.csv").read_text().splitlines()) == 3
    assert main(["sweep", "beta", "--grid", "x", "--out", str(tmp_path)]) == 2
    assert cli.SWEEP_GRIDS["augmentation"].count(",") == 10


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vgbench.cli", "gallery", "--out", str(tmp_path), "--seeds", "0",
                           "--quiet"], capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0, proc.stderr
