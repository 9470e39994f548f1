import json
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from vgbench.envcore import ConfigError
from vgbench.evalproto import (CSV_HEADER, DYNAMICS_BASE, EvalConditions, EvalReport, Row, attention_map,
                               encoder_variance_analysis, env_factory, evaluate_policy, factor_sweep,
                               fixed_state_observations, generalization_error, read_report, sweep_columns,
                               variance_curve, write_report)
from vgbench.agent.networks import Encoder
from vgbench.visualgen import FactorToggles, canonical_state

E_G_TOL = 1e-12


def zero_policy(obs):
    return np.zeros(1)


def test_generalization_error_examples():
    assert generalization_error(919.3, [28.0]) == pytest.approx(0.9695, abs=5e-4)
    assert generalization_error(643.6, [20.0, 30.0]) == pytest.approx((643.6 - 25.0) / 643.6, abs=E_G_TOL)
    assert generalization_error(500.0, [500.0, 500.0]) == 0.0
    assert generalization_error(100.0, [150.0]) == pytest.approx(-0.5)
    assert generalization_error(0.0, [1.0]) is None
    with pytest.raises(ValueError):
        generalization_error(1.0, [])


@settings(max_examples=200, deadline=None)
@given(train=st.floats(1e-3, 1e4), tests=st.lists(st.floats(0, 1e4), min_size=1, max_size=20),
       c=st.floats(1e-3, 1e3))
def test_generalization_error_scale_invariant(train, tests, c):
    a = generalization_error(train, tests)
    b = generalization_error(c * train, [c * t for t in tests])
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


def test_conditions_grid_layout():
    cond = EvalConditions(2, 3, 2)
    train = cond.train_episodes()
    assert [(e.visual_seed, e.dynamics_seed) for e in train] == [(0, DYNAMICS_BASE), (0, DYNAMICS_BASE + 1)]
    test = cond.test_episodes(FactorToggles.only("floor"))
    assert len(test) == 6
    assert {e.visual_seed for e in test} == {1, 2, 3}
    assert {e.dynamics_seed for e in test} == {DYNAMICS_BASE, DYNAMICS_BASE + 1}
    assert EvalConditions().n_train_dynamics_seeds == 100 and EvalConditions().n_test_visual_seeds == 100


@pytest.mark.parametrize("kw", [dict(n_train_dynamics_seeds=0), dict(n_test_visual_seeds=0),
                                dict(n_test_dynamics_seeds_per_visual=0)])
def test_empty_grid_rejected(kw):
    with pytest.raises(ConfigError):
        EvalConditions(**kw)


def test_sweep_columns_per_domain():
    assert [c for c, _ in sweep_columns("cartpole")] == ["None", "Light", "Camera", "Body Color", "Floor",
                                                          "Background", "Reflectance", "All"]
    assert [c for c, _ in sweep_columns("reacher")][-2:] == ["Target Color", "All"]
    cols = dict(sweep_columns("cartpole"))
    assert cols["Floor"] == FactorToggles.only("floor") and cols["All"] == FactorToggles()


def test_evaluate_policy_is_deterministic_and_visual_free():
    make = env_factory("cartpole")
    cond = EvalConditions(1, 2, 2)
    a = evaluate_policy(zero_policy, make, cond.test_episodes(FactorToggles()))
    b = evaluate_policy(zero_policy, make, cond.test_episodes(FactorToggles()))
    assert a.returns == b.returns
    # a blind policy sees the same dynamics under any visual seed
    assert a.returns[0] == a.returns[2] and a.returns[1] == a.returns[3]
    with pytest.raises(ConfigError):
        evaluate_policy(zero_policy, make, [])
    with pytest.raises(ConfigError):
        env_factory("walker")


def test_factor_sweep_report_and_round_trip(tmp_path):
    cond = EvalConditions(2, 2, 1)
    report = factor_sweep(zero_policy, "cartpole", cond, method="zero", columns=["None", "Floor", "Target Color",
                                                                                "All"])
    assert report.columns == ["None", "Floor", "All"]
    assert any("Target Color" in n for n in report.notes)
    assert len(report.returns("Floor")) == 2
    # a blind policy generalizes perfectly when test dynamics match the train seeds
    assert report.e_g("All") == pytest.approx(1 - np.mean(report.returns("All")) / report.mean("None"))
    write_report(report, tmp_path)
    header = (tmp_path / "returns.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_HEADER
    again = read_report(tmp_path)
    assert again.rows == report.rows and again.method == "zero"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["table1"]) == {"Train", "Test", "E_G"}
    for col, stats in summary["columns"].items():
        assert stats["E_G"] == pytest.approx(again.e_g(col), abs=1e-9)


def test_report_table1_and_missing_column():
    rep = EvalReport("m", "cartpole", [Row("None", 0, 1, 900.0), Row("All", 1, 1, 300.0), Row("All", 2, 1, 100.0)])
    t = rep.table1()
    assert t == {"Train": 900.0, "Test": 200.0, "E_G": pytest.approx(700 / 900)}
    with pytest.raises(KeyError):
        rep.returns("Floor")


# -- representation analyses ----------------------------------------------


class ConstantEncoder(torch.nn.Module):
    def __init__(self, dim=50):
        super().__init__()
        self.z = torch.nn.Parameter(torch.linspace(-1, 1, dim))

    def forward(self, x):
        return self.z.expand(x.shape[0], -1)


def pixel_stat_encoder(seed, window=24, max_row=84):
    """50 dimensions, each the mean of a random window of one channel."""
    rng = np.random.default_rng(seed)
    chans = rng.integers(0, 9, size=50)
    corners = np.stack([rng.integers(0, max_row - window + 1, 50), rng.integers(0, 84 - window + 1, 50)], 1)

    def enc(obs):
        x = obs.astype(np.float64) / 255.0
        return np.stack([x[:, c, y:y + window, xx:xx + window].mean(axis=(1, 2))
                         for c, (y, xx) in zip(chans, corners)], axis=1)
    return enc


def test_fixed_state_observations():
    obs = fixed_state_observations("cartpole", canonical_state("cartpole"), "floor", 4)
    assert obs.shape == (4, 9, 84, 84) and obs.dtype == np.uint8
    assert np.array_equal(obs[:, 0:3], obs[:, 6:9])
    assert len({o.tobytes() for o in obs}) == 4


def test_variance_analysis_constant_encoder_is_zero():
    curve = encoder_variance_analysis([ConstantEncoder()], canonical_state("cartpole"), n_renderings=5)
    assert curve.shape == (50,) and np.all(curve == 0.0)


def test_variance_analysis_pixel_encoders():
    curve = encoder_variance_analysis([pixel_stat_encoder(s) for s in range(3)], canonical_state("cartpole"),
                                      factor="light", n_renderings=12)
    assert curve.shape == (50,) and np.all(np.diff(curve) >= 0) and curve.min() > 0
    # the upper half of the frame is background
    sky = encoder_variance_analysis([pixel_stat_encoder(s, 12, 40) for s in range(2)], canonical_state("cartpole"),
                                    factor="background", n_renderings=8)
    assert np.all(np.diff(sky) >= 0) and sky.min() > 0


def test_variance_curve_sorted_and_errors():
    obs = np.random.default_rng(0).integers(0, 256, (6, 9, 84, 84), dtype=np.uint8)
    c = variance_curve(Encoder((9, 84, 84)), obs)
    assert c.shape == (50,) and np.all(np.diff(c) >= 0)
    with pytest.raises(ValueError):
        encoder_variance_analysis([ConstantEncoder()], canonical_state("cartpole"), n_renderings=1)
    with pytest.raises(ValueError):
        encoder_variance_analysis([], canonical_state("cartpole"))


def hot_spot_encoder(y, x):
    """First conv sums channel 0 over its 3x3 window; the negative bias silences dark input."""
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


@pytest.mark.parametrize("spot", [(21, 61), (55, 13), (41, 41), (20, 60), (1, 82), (70, 70)])
def test_attention_map_peaks_at_planted_spot(spot):
    enc, obs = hot_spot_encoder(*spot)
    amap = attention_map(enc, obs, 0)
    assert amap.heatmap.shape == (84, 84) and amap.overlay.shape == (84, 84, 3)
    assert amap.heatmap.max() == 1.0 and amap.heatmap.min() == 0.0
    peak = np.unravel_index(np.argmax(amap.heatmap), amap.heatmap.shape)
    assert math.dist(peak, spot) <= 2.0


def test_attention_map_constant_activation_and_bad_layer():
    enc, obs = hot_spot_encoder(10, 10)
    amap = attention_map(enc, np.zeros_like(obs), 0)
    assert np.all(amap.heatmap == 0)
    with pytest.raises(ValueError):
        attention_map(enc, obs, 2)
