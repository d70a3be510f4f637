import numpy as np
import pytest

from deepfem.autodiff import ConfigurationError, Tape
from deepfem.network import (
    NetworkConfig,
    eval_network,
    eval_network_jet,
    init_network,
    load_checkpoint,
    network_jets,
    param_count,
    save_checkpoint,
)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        NetworkConfig(arch="mlp")
    with pytest.raises(ConfigurationError):
        NetworkConfig(activation="selu")
    with pytest.raises(ConfigurationError):
        NetworkConfig(input_dim=3)
    with pytest.raises(ConfigurationError):
        NetworkConfig(width=0)


def test_param_count_resnet_formula():
    # embedding N*d, L blocks of N^2 + N, output N
    for N, L, d in [(10, 2, 1), (50, 6, 2), (30, 4, 1)]:
        cfg = NetworkConfig(arch="resnet", width=N, depth=L, input_dim=d)
        assert param_count(cfg) == N * d + L * (N * N + N) + N
        assert init_network(cfg).size == param_count(cfg)


def test_init_deterministic_and_biases_zero():
    cfg = NetworkConfig(width=12, depth=3, seed=42)
    p1, p2 = init_network(cfg), init_network(cfg)
    assert np.array_equal(p1.data, p2.data)
    for l in range(1, 4):
        assert np.all(p1.view(f"b{l}") == 0.0)
    assert not np.array_equal(
        p1.data, init_network(NetworkConfig(width=12, depth=3, seed=43)).data
    )


def test_eval_network_matches_manual_fnn():
    cfg = NetworkConfig(arch="fnn", width=4, depth=2, activation="tanh", input_dim=1, seed=0)
    p = init_network(cfg)
    x = np.array([[0.3], [-0.7]])
    h = np.tanh(x @ p.view("W1").T + p.view("b1"))
    h = np.tanh(h @ p.view("W2").T + p.view("b2"))
    ref = h @ p.view("a")
    assert np.allclose(eval_network(p, cfg, x), ref)


def test_eval_network_matches_manual_resnet_skips():
    # skip connections add h_{l-2} on even layers only
    cfg = NetworkConfig(arch="resnet", width=5, depth=4, activation="tanh", input_dim=2, seed=1)
    p = init_network(cfg)
    x = np.array([[0.2, 0.8]])
    h_prev2, h_prev = None, x @ p.view("V").T
    for l in range(1, 5):
        g = np.tanh(h_prev @ p.view(f"W{l}").T + p.view(f"b{l}"))
        h = g + h_prev2 if (l % 2 == 0) else g
        h_prev2, h_prev = h_prev, h
    ref = h_prev @ p.view("a")
    assert np.allclose(eval_network(p, cfg, x), ref)


@pytest.mark.parametrize("arch", ["fnn", "resnet"])
@pytest.mark.parametrize("dim", [1, 2])
def test_jet_value_matches_plain_eval(arch, dim):
    cfg = NetworkConfig(arch=arch, width=8, depth=3, activation="tanh",
                        input_dim=dim, seed=2)
    p = init_network(cfg)
    x = np.random.default_rng(0).uniform(-1, 1, (7, dim))
    v, g, h = eval_network_jet(p, cfg, x)
    assert np.allclose(v, eval_network(p, cfg, x))
    assert g.shape == (7, dim) and h.shape == (7, dim, dim)


def test_jet_spatial_derivatives_match_fd():
    cfg = NetworkConfig(arch="resnet", width=6, depth=2, activation="tanh",
                        input_dim=2, seed=3)
    p = init_network(cfg)
    x = np.random.default_rng(1).uniform(-0.5, 0.5, (5, 2))
    v, g, h = eval_network_jet(p, cfg, x)
    eps = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = eps
        fd = (eval_network(p, cfg, x + e) - eval_network(p, cfg, x - e)) / (2 * eps)
        assert np.allclose(g[:, i], fd, atol=1e-7)
        fd2 = (
            eval_network(p, cfg, x + e) - 2 * v + eval_network(p, cfg, x - e)
        ) / eps**2
        assert np.allclose(h[:, i, i], fd2, atol=1e-4)
    e0, e1 = np.array([eps, 0.0]), np.array([0.0, eps])
    cross = (
        eval_network(p, cfg, x + e0 + e1)
        - eval_network(p, cfg, x + e0 - e1)
        - eval_network(p, cfg, x - e0 + e1)
        + eval_network(p, cfg, x - e0 - e1)
    ) / (4 * eps**2)
    assert np.allclose(h[:, 0, 1], cross, atol=1e-4)
    assert np.allclose(h, np.swapaxes(h, 1, 2))  # symmetric Hessian


def test_hessian_symmetric_with_relu_cubed():
    cfg = NetworkConfig(arch="resnet", width=10, depth=4,
                        activation="relu_cubed", input_dim=2, seed=4)
    p = init_network(cfg)
    x = np.random.default_rng(2).uniform(0.1, 0.9, (11, 2))
    _, _, h = eval_network_jet(p, cfg, x)
    assert np.allclose(h, np.swapaxes(h, 1, 2))


def test_network_jets_reuses_bound_tape():
    cfg = NetworkConfig(width=4, depth=2, activation="tanh", input_dim=1, seed=5)
    p = init_network(cfg)
    tape = Tape()
    theta = tape.bind(p)
    jets = network_jets(theta, cfg, np.array([[0.4]]))
    assert jets.value.tape is tape


def test_checkpoint_round_trip(tmp_path):
    cfg = NetworkConfig(width=7, depth=2, activation="relu_cubed", input_dim=2, seed=6)
    p = init_network(cfg)
    path = tmp_path / "model.json"
    save_checkpoint(path, cfg, p)
    cfg2, p2 = load_checkpoint(path)
    assert cfg2 == cfg
    assert np.array_equal(p2.data, p.data)
    x = np.array([[0.1, 0.9]])
    assert np.allclose(eval_network(p2, cfg2, x), eval_network(p, cfg, x))


def test_checkpoint_version_guard(tmp_path):
    import json

    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"version": 99, "config": {}, "params": []}))
    with pytest.raises(ConfigurationError):
        load_checkpoint(path)
