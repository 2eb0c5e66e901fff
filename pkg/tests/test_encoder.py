import numpy as np
import pytest

from latentgrid import tensor as T
from latentgrid.encoder import EncoderConfig, RelationEncoder
from latentgrid.errors import ContractError, ParameterError
from latentgrid.tensor import Tensor

from oracles import fd_grad, rel_err


def small_encoder(n_nodes=5, in_features=6, hidden=8, layers=3, seed=0):
    cfg = EncoderConfig(n_nodes=n_nodes, in_features=in_features, hidden=hidden,
                        n_edge_types=layers)
    return RelationEncoder(cfg, np.random.default_rng(seed))


def test_config_validation():
    with pytest.raises(ParameterError):
        EncoderConfig(n_nodes=5, in_features=4, n_edge_types=0)
    with pytest.raises(ParameterError):
        EncoderConfig(n_nodes=5, in_features=4, hidden=0)
    with pytest.raises(ParameterError):
        EncoderConfig(n_nodes=1, in_features=4)


def test_logit_shape_and_trace():
    enc = small_encoder()
    trace = {}
    out = enc(Tensor(np.random.default_rng(0).normal(size=(3, 5, 6))), trace=trace)
    assert out.shape == (3, 20, 3)
    assert trace["encoder.node_embed"] == (3, 5, 8)
    assert trace["encoder.edge_hidden"] == (3, 20, 8)
    assert trace["encoder.node_update"] == (3, 5, 8)
    assert trace["encoder.edge_hidden2"] == (3, 20, 8)
    assert trace["encoder.logits"] == (3, 20, 3)


def test_identical_nodes_give_identical_edge_logits():
    enc = small_encoder().eval_mode()
    row = np.random.default_rng(1).normal(size=6)
    x = np.broadcast_to(row, (2, 5, 6)).copy()
    out = enc(Tensor(x)).data
    assert np.allclose(out, out[:, :1, :], atol=1e-6)


def test_nan_input_rejected():
    enc = small_encoder()
    x = np.zeros((2, 5, 6))
    x[0, 0, 0] = np.nan
    with pytest.raises(ContractError):
        enc(Tensor(x))


def test_deterministic_in_eval_mode():
    enc = small_encoder(seed=7).eval_mode()
    x = np.random.default_rng(2).normal(size=(2, 5, 6))
    a = enc(Tensor(x)).data
    b = enc(Tensor(x)).data
    assert np.array_equal(a, b)
    enc2 = small_encoder(seed=7).eval_mode()
    assert np.array_equal(a, enc2(Tensor(x)).data)


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    enc = small_encoder(n_nodes=6, seed=4).eval_mode()
    x = rng.normal(size=(2, 6, 6))
    perm = rng.permutation(6)
    base = enc(Tensor(x)).data
    permuted = enc(Tensor(x[:, perm])).data
    pi = enc.pairs
    for k in range(6):
        for l in range(6):
            if k == l:
                continue
            got = permuted[:, pi.row_of(k, l)]
            want = base[:, pi.row_of(int(perm[k]), int(perm[l]))]
            assert np.max(np.abs(got - want)) < 1e-5


def test_logit_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, (3, 4, 5))
    with T.precision("float64"):
        enc = small_encoder(n_nodes=4, in_features=5, hidden=6, seed=6)
        tx = Tensor(x, requires_grad=True)
        weights = rng.uniform(-1, 1, (3, 12, 3))

        def build():
            return (enc(tx) * Tensor(weights)).sum()

        build().backward()
        fd = fd_grad(lambda: float(build().data), x)
        assert rel_err(tx.grad, fd) < 1e-4

        for p in enc.parameters()[:2]:
            pfd = fd_grad(lambda: float(build().data), p.data)
            assert rel_err(p.grad, pfd) < 1e-4


def test_parameter_count_scales_with_hidden():
    small = small_encoder(hidden=4)
    large = small_encoder(hidden=8)
    assert large.n_parameters() > small.n_parameters()
    names = [n for n, _ in small.named_parameters()]
    assert "f1.lin1.w" in names and "out.w" in names
