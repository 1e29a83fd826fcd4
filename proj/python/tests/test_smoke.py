import json
import math
from pathlib import Path

import numpy as np
import pytest

import autotcl

ROOT = Path(__file__).resolve().parents[2]


def test_sampler_endpoints_and_law():
    assert autotcl.concrete_sample(0.5, 0.5) == pytest.approx(0.5)
    assert autotcl.concrete_sample(0.5, 1e-12) == 0.0
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    alpha = math.log(0.3 / 0.7)
    assert autotcl.prob_zero(0.3) == pytest.approx(sig(0.5 * math.log(0.1 / 1.1) - alpha))
    assert autotcl.prob_one(0.3) == pytest.approx(1.0 - sig(0.5 * math.log(1.1 / 0.1) - alpha))
    with pytest.raises(autotcl.DomainError):
        autotcl.concrete_sample(1.0, 0.5)


def test_expected_l0_bounds():
    n = autotcl.expected_l0([0.2, 0.5, 0.9])
    assert 0.0 < n < 3.0
    assert autotcl.expected_l0([1 - 1e-6] * 4) == pytest.approx(4.0, abs=1e-3)


def test_compose_view_is_invertible():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 3))
    h = (rng.random(20) < 0.5).astype(float)
    g = rng.choice([-1.0, 1.0], 20) * rng.uniform(0.05, 1.95, 20)
    v = autotcl.compose_view(x, h, g)
    np.testing.assert_allclose(v / g[:, None], h[:, None] * x, atol=1e-12)
    with pytest.raises(autotcl.InvariantError):
        autotcl.compose_view(x, h, np.zeros(20))


def test_infonce_uniform_batch_is_log_b():
    for b in (2, 4, 8):
        z = np.ones((b, 3))
        assert autotcl.global_contrast_loss(z, z)["value"] == pytest.approx(math.log(b), abs=1e-9)


def test_loss_outputs_have_gradient_shapes():
    rng = np.random.default_rng(1)
    zx, zv = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    pi = 1 / (1 + np.exp(-rng.normal(size=(3, 10))))
    pri = autotcl.pri_loss(zx, zv, pi, 0.1)
    assert pri["grad_pi"].shape == (3, 10)
    assert pri["value"] == pytest.approx(pri["l0_term"] + pri["mmd_term"])
    trip = autotcl.temporal_triplet_loss(pi, seed=3)
    assert len(trip["triplets"]) == 3
    local = autotcl.local_contrast_loss(rng.normal(size=(2 * 12, 4)), 12, 3)
    assert local["grad_per_step"].shape == (24, 4)


def test_config_validation_names_the_key():
    with pytest.raises(autotcl.ConfigError, match="encoder.depht"):
        autotcl.normalize_config({"encoder": {"depht": 2}})
    a = autotcl.config_hash({"epochs": 3, "seed": 1})
    assert a == autotcl.config_hash({"seed": 1, "epochs": 3})
    assert autotcl.normalize_config({"epochs": 3})["epochs"] == 3


def test_train_evaluate_and_masks(tmp_path):
    cfg = {
        "encoder": {"depth": 2, "hidden_dim": 8, "repr_dim": 8},
        "aug": {"depth": 1, "hidden_dim": 8},
        "epochs": 1,
        "T": 48,
        "L": 8,
        "window_stride": 512,
        "data": {"path": str(ROOT / "data" / "ETTh1.csv"), "format": "ett_csv", "setting": "univariate"},
    }
    manifest = autotcl.train(cfg, tmp_path / "run")
    assert manifest["config_hash"] == autotcl.config_hash(cfg)
    with pytest.raises(autotcl.IoError):
        autotcl.train(cfg, tmp_path / "run")

    run = autotcl.Run(tmp_path / "run")
    assert run.epoch == 1
    x = np.sin(np.arange(48.0) / 5)[:, None]
    per_step, pooled = run.encode(x)
    assert per_step.shape == (48, 8)
    np.testing.assert_allclose(pooled, per_step.max(axis=0))
    m = run.masks(x)
    assert set(np.unique(m["h"])) <= {0.0, 1.0}
    assert np.all(np.abs(m["g"]) >= 0.05)

    csv = run.evaluate(horizons=[24])
    lines = csv.strip().splitlines()
    assert lines[0] == "method,dataset,setting,horizon,mse,mae,seed,config_hash"
    assert lines[1].startswith("autotcl,ETTh1,univariate,24,")
    meta = json.loads((tmp_path / "run" / "forecast.meta.json").read_text())
    assert meta["setting"] == "univariate"
