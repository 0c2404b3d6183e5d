import json
import math

import pytest

import tomdec


def test_uniform_hazard():
    h = tomdec.uniform_hazard(2, 5)
    assert h[:2] == [0.0, 0.0]
    assert h[2:] == pytest.approx([1 / 4, 1 / 3, 1 / 2, 1.0])
    assert tomdec.hazard_from_gap_law(tomdec.GapLaw.uniform(2, 5)) == pytest.approx(h)


def test_gibbs_and_soft_value():
    p = tomdec.gibbs_policy([1.0, 0.0], [0.5, 0.5], 1.0)
    assert p[0] == pytest.approx(math.e / (math.e + 1))
    assert tomdec.soft_value([1.0, 0.0], [0.5, 0.5], 1.0) == pytest.approx(math.log((math.e + 1) / 2))


def test_compliant_baseline_scores_zero():
    sc = tomdec.perimeter_lap(6)
    model = tomdec.MonitorModel.from_gap_law(tomdec.GapLaw.uniform(1, 3), tomdec.TokenChannel.noiseless())
    pi = tomdec.baseline("always-compliant", sc, model)
    rep = tomdec.evaluate(sc, pi, model, episodes=200)
    assert rep["kl_at_obs"] == 0.0
    assert rep["llr_at_obs"] == 0.0
    assert rep["top_k_rate"] == 1.0


def test_train_and_round_trip():
    sc = tomdec.perimeter_lap(6)
    law = tomdec.GapLaw.uniform(1, 3)
    cfg = tomdec.LearnerConfig()
    cfg.epsilon = 0.3
    cfg.episodes = 300
    pi, lam = tomdec.train(sc, law, tomdec.TokenChannel.noiseless(), cfg)
    assert lam >= 0.0
    assert pi.num_states == sc.mdp.num_states
    assert sum(pi.row(0, 0)) == pytest.approx(1.0)
    again = tomdec.AugmentedPolicy.from_json(pi.to_json())
    assert again.row(3, 1) == pi.row(3, 1)
    pi2, _ = tomdec.train(sc, law, tomdec.TokenChannel.noiseless(), cfg)
    assert pi2.to_json() == pi.to_json()


def test_config_errors():
    good = {"schema_version": 1, "scenario": {"kind": "avoid-zone"}, "learner": {"epsilon": 0.1}}
    tomdec.validate_config(json.dumps(good))
    assert len(tomdec.config_fingerprint(json.dumps(good))) == 16
    bad = {"schema_version": 1, "scenario": {"kind": "avoid-zone"}, "learner": {}}
    with pytest.raises(tomdec.ConfigError, match="learner.epsilon"):
        tomdec.validate_config(json.dumps(bad))
    with pytest.raises(ValueError):
        tomdec.TokenChannel(rho1=0.2, rho0=0.5)
