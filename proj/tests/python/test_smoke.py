import math

import numpy as np
import pytest

import smallnoise as sn


def test_model_ids():
    assert set(sn.model_ids()) == {"ou", "cir", "two_factor", "sir"}


def test_oracle_passes():
    checks = sn.oracle()
    assert checks
    assert all(c["passed"] for c in checks)


def test_simulate_is_reproducible():
    t, x = sn.simulate_sde("cir", [1.0], [1.0], 0.05, [1.0], 1.0, 20, seed=4, stream=2)
    t2, x2 = sn.simulate_sde("cir", [1.0], [1.0], 0.05, [1.0], 1.0, 20, seed=4, stream=2)
    assert t.shape == (21,)
    assert x.shape == (21, 1)
    assert np.array_equal(x, x2)
    assert t[-1] == 1.0


def test_noise_free_cir_estimate():
    t = np.linspace(0.0, 1.0, 21)
    obs = np.exp(t)[:, None]
    res = sn.estimate("cir", "cls", obs, 1.0, 0.05, ([0.1], [3.0]), ([0.1], [3.0]))
    alpha = res["parameters"][0]
    assert alpha["name"] == "alpha"
    assert abs(alpha["estimate"] - 1.0) < 1e-6
    assert res["optimizer"]["converged"]


def test_cls_matches_closed_form_on_simulated_path():
    _, x = sn.simulate_sde("cir", [1.0], [1.0], 0.05, [1.0], 1.0, 50, seed=9)
    v = x[:, 0]
    closed = math.log(np.dot(v[1:], v[:-1]) / np.dot(v[:-1], v[:-1])) / 0.02
    res = sn.estimate("cir", "cls", x, 1.0, 0.05, ([0.1], [3.0]), ([0.1], [3.0]))
    assert abs(res["parameters"][0]["estimate"] - closed) < 1e-5
    ci = res["parameters"][0]["ci_95"]
    assert ci["lower"] < res["parameters"][0]["estimate"] < ci["upper"]


def test_information_closed_form():
    ib, isig = sn.fisher_information("cir", [1.0], [1.0], [1.0], 1.0)
    assert abs(ib[0, 0] - (math.e - 1.0)) < 1e-6
    assert abs(isig[0, 0] - 2.0) < 1e-6


def test_sir_simulation_and_mle():
    traj = sn.simulate_sir(10000, 100, 0.4, 1.0 / 3.0, 50.0, seed=1)
    assert traj["states"][0] == [9900, 100]
    assert len(traj["times"]) == len(traj["events"]) == len(traj["states"]) - 1
    assert abs(traj["mle_lambda"] - 0.4) < 0.05


def test_run_mc(tmp_path):
    config = {
        "model": "cir", "alpha0": [1.0], "beta0": [1.0], "x0": [1.0], "epsilon": 0.05,
        "n_values": [10], "estimators": ["cls", "small_delta"], "replicates": 3, "base_seed": 2,
        "alpha_box": {"lower": [0.1], "upper": [3.0]}, "beta_box": {"lower": [0.1], "upper": [3.0]},
        "sim_substeps": 20, "flow_substeps": 8, "info_mesh_steps": 200,
    }
    out = sn.run_mc(config, tmp_path)
    assert out["attempted"] == 3
    kinds = {(r["kind"], r["param"]) for r in out["rows"]}
    assert ("small_delta", "beta") in kinds
    assert (tmp_path / "summary.csv").exists()


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        sn.simulate_sde("heston", [1.0], [1.0], 0.1, [1.0], 1.0, 10)
    with pytest.raises(ValueError):
        sn.run_mc({"model": "cir"})
    obs = np.ones((5, 2))
    with pytest.raises(ValueError):
        sn.estimate("cir", "cls", obs, 1.0, 0.1, ([0.1], [3.0]), ([0.1], [3.0]))
