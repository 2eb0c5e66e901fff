import numpy as np
import pytest

from latentgrid import tensor as T
from latentgrid.errors import ConfigError, ParameterError
from latentgrid.model import ModelConfig, ModelOutput, build_model
from latentgrid.tensor import Tensor

from oracles import fd_grad, rel_err


def tiny_config(**overrides):
    base = dict(
        n_nodes=4,
        n_channels=2,
        window=12,
        n_classes=3,
        n_edge_types=2,
        encoder_hidden=8,
        classifier_hidden=8,
        dilations=(1, 2),
        feat_channels=8,
        pools=((2, 2), (3, 3), (2, 2)),
        dropout=0.0,
    )
    base.update(overrides)
    return ModelConfig(**base)


def batch(cfg, b=3, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(b, cfg.n_nodes, cfg.n_channels, cfg.window))


def test_forward_output_contract():
    cfg = tiny_config()
    model = build_model(cfg, seed=0).eval_mode()
    out = model(batch(cfg))
    assert isinstance(out, ModelOutput)
    assert out.probs.shape == (3, 3)
    assert out.logits.shape == (3, 3)
    assert out.edge_logits.shape == (3, 12, 2)
    assert out.graph.z.shape == (3, 12, 2)
    assert np.allclose(out.probs.data.sum(axis=1), 1.0, atol=1e-6)


def test_eval_default_is_hard_threshold():
    cfg = tiny_config()
    model = build_model(cfg, seed=1).eval_mode()
    out = model(batch(cfg))
    assert out.graph.mode == "deterministic_threshold"
    assert set(np.unique(out.graph.z.data)) <= {0.0, 1.0}


def test_train_default_is_gumbel():
    cfg = tiny_config()
    model = build_model(cfg, seed=1)
    out = model(batch(cfg), rng=np.random.default_rng(0))
    assert out.graph.mode == "gumbel_softmax"
    assert np.allclose(out.graph.z.data.sum(axis=-1), 1.0, atol=1e-6)


def test_eval_deterministic():
    cfg = tiny_config()
    model = build_model(cfg, seed=2).eval_mode()
    x = batch(cfg)
    a = model(x).probs.data
    b = model(x).probs.data
    assert np.array_equal(a, b)


def test_training_reproducible_under_seeded_rng():
    cfg = tiny_config(dropout=0.3)
    model = build_model(cfg, seed=3)
    x = batch(cfg)
    a = model(x, rng=np.random.default_rng(5)).probs.data
    b = model(x, rng=np.random.default_rng(5)).probs.data
    assert np.array_equal(a, b)
    c = model(x, rng=np.random.default_rng(6)).probs.data
    assert not np.array_equal(a, c)


def test_nograph_variant_has_no_encoder():
    full = build_model(tiny_config(), seed=4)
    ablation = build_model(tiny_config(variant="nograph"), seed=4)
    assert ablation.encoder is None
    assert ablation.n_parameters() < full.n_parameters()
    cfg = tiny_config()
    out = ablation.eval_mode()(batch(cfg))
    assert out.edge_logits is None and out.graph is None
    assert out.probs.shape == (3, 3)


def test_baseline_extractor_variant():
    cfg = tiny_config(extractor="baseline_cnn", baseline_pools=((2, 2), (2, 2)))
    model = build_model(cfg, seed=5).eval_mode()
    out = model(batch(cfg))
    assert out.probs.shape == (3, 3)


def test_bad_input_shapes_rejected():
    cfg = tiny_config()
    model = build_model(cfg, seed=6)
    with pytest.raises(ParameterError):
        model(np.zeros((2, 4, 2)))
    with pytest.raises(ParameterError):
        model(np.zeros((2, 5, 2, 12)))


def test_config_round_trip_and_unknown_keys():
    cfg = tiny_config()
    again = ModelConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({**cfg.to_dict(), "hidden_layers": 3})
    with pytest.raises(ConfigError):
        tiny_config(variant="half_graph")
    with pytest.raises(ConfigError):
        tiny_config(extractor="transformer")


def test_full_trace_keys_present():
    cfg = tiny_config()
    model = build_model(cfg, seed=7).eval_mode()
    trace = {}
    model(batch(cfg), trace=trace)
    for key in (
        "encoder.node_embed",
        "encoder.edge_hidden",
        "encoder.logits",
        "extractor.block1",
        "extractor.block2",
        "extractor.block3",
        "classifier.edge_hidden",
        "classifier.head_hidden",
        "output",
    ):
        assert key in trace, key


@pytest.mark.parametrize("mode", ["continuous", "gumbel_softmax"])
def test_end_to_end_gradient_matches_finite_differences(mode):
    """Sampled-coordinate FD check through the whole pipeline."""
    cfg = tiny_config()
    labels = np.array([0, 2, 1])
    with T.precision("float64"):
        model = build_model(cfg, seed=8)
        x = batch(cfg, seed=9)
        tx = Tensor(x, requires_grad=True)

        def build():
            out = model(tx, mode=mode, rng=np.random.default_rng(123))
            return T.cross_entropy(out.logits, labels)

        build().backward()
        fd = fd_grad(lambda: float(build().data), x, h=1e-6,
                     coords=range(0, x.size, 37))
        assert rel_err(fd, np.where(np.isnan(fd), np.nan, tx.grad)) < 1e-4

        rng = np.random.default_rng(11)
        params = model.parameters()
        for p in (params[0], params[len(params) // 2], params[-1]):
            coords = rng.choice(p.size, size=min(10, p.size), replace=False)
            pfd = fd_grad(lambda: float(build().data), p.data, h=1e-6, coords=coords)
            assert rel_err(pfd, np.where(np.isnan(pfd), np.nan, p.grad)) < 1e-4


def test_encoder_receives_gradient_through_sampler():
    cfg = tiny_config()
    model = build_model(cfg, seed=12)
    x = batch(cfg, seed=13)
    out = model(x, mode="gumbel_softmax", rng=np.random.default_rng(1))
    loss = T.cross_entropy(out.logits, np.array([0, 1, 2]))
    loss.backward()
    enc_norm = sum(
        float(np.abs(p.grad).sum()) for p in model.encoder.parameters()
        if p.grad is not None
    )
    assert enc_norm > 0
