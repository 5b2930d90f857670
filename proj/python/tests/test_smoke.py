import json
import math

import pytest

import elicitd


def test_beta_functions():
    assert elicitd.beta_pdf(1.0, 1.0, 0.3) == pytest.approx(1.0)
    assert elicitd.beta_cdf(2.0, 2.0, 0.5) == pytest.approx(0.5)
    assert elicitd.point_entropy(0.5) == pytest.approx(1.0)


def test_fit_beta_moments():
    fit = elicitd.fit_beta([0.2, 0.4, 0.6, 0.8])
    # mean 0.5, unbiased variance 1/15
    assert fit["alpha"] == pytest.approx(1.375)
    assert fit["beta"] == pytest.approx(1.375)
    assert not fit["degenerate"]
    lo, hi = fit["ci95"]
    assert 0.2 <= lo < hi <= 0.8
    a, b = elicitd.beta_from_moments(0.5, 1.0 / 15.0)
    assert (a, b) == pytest.approx((1.375, 1.375))


def test_entropy_and_kl():
    probs = elicitd.discretize_beta(2.0, 5.0, 10)
    assert sum(probs) == pytest.approx(1.0)
    assert elicitd.kl_divergence(probs, probs) == pytest.approx(0.0, abs=1e-12)
    assert elicitd.distribution_entropy([0.55] * 10) == pytest.approx(0.0)
    spread = [(i + 0.5) / 10 for i in range(10)]
    assert elicitd.distribution_entropy(spread) == pytest.approx(1.0)


def test_ci_rule_and_f_score():
    assert elicitd.ci_correct(0.6, 0.9, 1) == (True, False)
    assert elicitd.ci_correct(0.1, 0.4, 1) == (False, False)
    assert elicitd.ci_correct(0.4, 0.9, 1)[1]
    assert elicitd.f_score(tn=5, fp=0, fn=0, tp=5) == pytest.approx(1.0)


def test_generate_panel():
    a = elicitd.generate_panel(50, K=7, seed=3)
    b = elicitd.generate_panel(50, K=7, seed=3)
    assert a == b
    assert len(a["X"]) == 50 and len(a["X"][0]) == 4
    assert all(4 <= k <= 7 for k in a["agreement"])
    with pytest.raises(elicitd.ElicitdError):
        elicitd.generate_panel(10, K=6)


def test_model_train_and_elicit():
    panel = elicitd.generate_panel(200, seed=1)
    model = elicitd.Model(4, width=8, blocks=1, dropout=0.2, seed=1)
    losses = model.fit(panel["X"], panel["y"], epochs=20, base_lr=0.05, seed=1)
    assert len(losses) == 20
    assert losses[-1] < losses[0]
    x = panel["X"][0]
    sample = model.mc_sample(x, T=30, seed=7)
    assert len(sample) == 30
    assert sample == model.mc_sample(x, T=30, seed=7)
    dist = model.elicit(x, T=30, seed=7)
    assert dist["T"] == 30
    assert 0.0 < dist["mean"] < 1.0
    assert 0.0 < model.predict(x) < 1.0
    assert json.loads(model.spec_json())


def test_pipeline_run(tmp_path):
    config = {
        "seed": 2,
        "panel": {"n": 120},
        "network": {"width": 8, "blocks": 1},
        "train": {"epochs": 10, "base_lr": 0.05},
    }
    for command in ("synth", "train", "evaluate"):
        elicitd.run(command, config, out=tmp_path)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["records"] == 24
    assert math.isfinite(report["accuracy"]["mean"])
    with pytest.raises(elicitd.ElicitdError):
        elicitd.run("synth", {"panel": {"K": 6}}, out=tmp_path / "bad")
    with pytest.raises(elicitd.ElicitdIoError):
        elicitd.run("train", {}, out=tmp_path / "missing")
