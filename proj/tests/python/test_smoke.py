import json

import numpy as np
import pytest

import slsada


@pytest.fixture(scope="module")
def pair():
    return slsada.generate_synthetic(seed=100)


def test_synthetic_shapes(pair):
    assert pair["xs"].shape == (10, 150)
    assert pair["xt"].shape == (10, 150)
    assert sorted(set(pair["ys"])) == [0, 1, 2]
    assert len(pair["yt"]) == 150


def test_run_reports_accuracy(pair):
    idx = slsada.sample_labeled_subset(pair["ys"], 5, 7, 3)
    labels = [pair["ys"][i] for i in idx]
    config = slsada.SolverConfig()
    config.k = 3
    out = slsada.run(pair["xs"], pair["xt"], 3, idx, labels, config,
                     pair["ys"], pair["yt"])
    assert 0.0 <= out["accuracy_s"] <= 1.0
    assert out["accuracy_t"] > 0.5
    assert len(out["objective_trace"]) == config.iterations
    assert np.all(np.diff(out["objective_trace"]) <= 1e-6 * np.abs(out["objective_trace"][:-1]))
    assert out["projection"].shape == (10, 3)
    assert out["embeddings_source"].shape == (3, 150)
    for i, y in zip(idx, labels):
        assert out["source_predictions"][i] == y


def test_protocol_json_is_deterministic(pair):
    config = slsada.SolverConfig()
    config.k = 3
    args = (pair["xs"], pair["xt"], pair["ys"], pair["yt"], 3, config)
    a = slsada.protocol_json(*args, repeats=2, seed=3)
    b = slsada.protocol_json(*args, repeats=2, seed=3)
    assert a == b
    report = json.loads(a)
    assert len(report["repeats"]) == 2


def test_selfcheck_passes():
    checks = slsada.selfcheck()
    assert checks
    assert all(passed for _, passed, _, _ in checks)


def test_cli_selfcheck():
    code, out, _ = slsada.cli(["selfcheck"])
    assert code == 0
    assert "FAIL" not in out


def test_errors_map_to_exceptions():
    with pytest.raises(slsada.UsageError):
        slsada.SolverConfig.preset("medium")
    assert issubclass(slsada.UsageError, slsada.Error)
    config = slsada.SolverConfig()
    with pytest.raises(slsada.UsageError):
        config.source_rule = "sideways"


def test_config_properties():
    config = slsada.SolverConfig.preset("large")
    assert config.k == 100
    assert config.lambda_ == pytest.approx(0.1)
    assert config.target_rule == "kkt"
    assert config.source_rule == "coupled"
    config.source_rule = "local"
    config.graph = "frozen"
    assert config.source_rule == "local"
    assert config.graph == "frozen"


def test_primitives():
    m0 = slsada.marginal_mmd_matrix(2, 3)
    assert np.allclose(m0.sum(axis=1), 0.0)
    z = np.array([[0.0, 1.0, 2.0]])
    w = slsada.knn_weights(z, 2)
    assert np.allclose(w, w.T)
    lap = np.diag(w.sum(axis=1)) - w
    f = slsada.propagate_labels(lap, 1, np.array([[1.0, 0.0]]))
    assert np.allclose(f, [[1.0, 0.0], [1.0, 0.0]])
