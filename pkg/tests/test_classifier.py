import numpy as np
import pytest

from latentgrid import tensor as T
from latentgrid.classifier import ClassifierConfig, GatedClassifier
from latentgrid.errors import ContractError, ParameterError
from latentgrid.sampler import SampledGraph
from latentgrid.tensor import Tensor


def small_classifier(n_nodes=4, in_features=5, hidden=8, n_classes=3, n_layers=2,
                     dropout=0.0, seed=0):
    cfg = ClassifierConfig(n_nodes=n_nodes, in_features=in_features, hidden=hidden,
                           n_classes=n_classes, n_layers=n_layers, dropout=dropout)
    return GatedClassifier(cfg, np.random.default_rng(seed))


def rand_feats(shape, seed=0):
    return Tensor(np.random.default_rng(seed).normal(size=shape))


def ones_z(b, e, l):
    return Tensor(np.ones((b, e, l)))


def test_config_validation():
    with pytest.raises(ParameterError):
        ClassifierConfig(n_nodes=4, in_features=5, n_classes=1)
    with pytest.raises(ParameterError):
        ClassifierConfig(n_nodes=4, in_features=5, n_layers=0)
    with pytest.raises(ParameterError):
        ClassifierConfig(n_nodes=4, in_features=5, dropout=1.0)


def test_output_rows_are_probability_vectors():
    cls = small_classifier().eval_mode()
    probs, logits = cls(rand_feats((3, 4, 5)), ones_z(3, 12, 2))
    assert probs.shape == (3, 3) and logits.shape == (3, 3)
    assert np.all(probs.data >= 0)
    assert np.allclose(probs.data.sum(axis=1), 1.0, atol=1e-6)


def test_all_zero_gates_ignore_features():
    cls = small_classifier().eval_mode()
    z = Tensor(np.zeros((2, 12, 2)))
    a, _ = cls(rand_feats((2, 4, 5), seed=1), z)
    b, _ = cls(rand_feats((2, 4, 5), seed=2), z)
    assert np.allclose(a.data, b.data, atol=1e-6)


def test_nograph_equals_explicit_all_ones():
    cls = small_classifier().eval_mode()
    feats = rand_feats((2, 4, 5), seed=3)
    direct, _ = cls(feats, ones_z(2, 12, 2))
    via_graph, _ = cls(feats, SampledGraph(ones_z(2, 12, 2), "continuous"))
    ablation, _ = cls.forward_nograph(feats)
    assert np.array_equal(direct.data, ablation.data)
    assert np.array_equal(direct.data, via_graph.data)


def test_gate_path_adds_no_parameters():
    cls = small_classifier()
    before = cls.n_parameters()
    cls.forward_nograph(rand_feats((2, 4, 5)))
    cls.eval_mode()(rand_feats((2, 4, 5)), ones_z(2, 12, 2))
    assert cls.n_parameters() == before


def test_gated_messages_linear_in_z():
    cls = small_classifier().eval_mode()
    feats = rand_feats((2, 4, 5), seed=4)
    rng = np.random.default_rng(5)
    z = rng.uniform(0.1, 1.0, (2, 12, 2))
    z_scaled = z.copy()
    z_scaled[0, 7, 1] *= 2.0

    _, m1 = cls.edge_messages(feats, Tensor(z))
    _, m2 = cls.edge_messages(feats, Tensor(z_scaled))
    # (B, L, E, H): only batch 0, layer 1, edge 7 doubles; all else identical.
    diff = m2.data - m1.data
    assert np.allclose(m2.data[0, 1, 7], 2.0 * m1.data[0, 1, 7])
    mask = np.ones_like(diff, dtype=bool)
    mask[0, 1, 7] = False
    assert np.all(diff[mask] == 0.0)


def test_node_permutation_invariance_of_readout():
    rng = np.random.default_rng(6)
    cls = small_classifier(n_nodes=5, seed=7).eval_mode()
    feats = rng.normal(size=(3, 5, 5))
    z = rng.uniform(0.0, 1.0, (3, 20, 2))
    perm = rng.permutation(5)
    pi = cls.pairs
    rowmap = pi.induced_row_permutation(perm)  # rowmap[row(k,l)] = row(p[k], p[l])
    base, _ = cls(Tensor(feats), Tensor(z))
    permuted, _ = cls(Tensor(feats[:, perm]), Tensor(z[:, rowmap]))
    assert np.max(np.abs(base.data - permuted.data)) < 1e-5


def test_shape_mismatch_rejected():
    cls = small_classifier()
    with pytest.raises(ContractError):
        cls(rand_feats((2, 4, 5)), ones_z(2, 12, 3))  # wrong layer count
    with pytest.raises(ContractError):
        cls(rand_feats((2, 3, 5)), ones_z(2, 12, 2))  # wrong node count


def test_dropout_needs_rng_in_training():
    cls = small_classifier(dropout=0.3)
    with pytest.raises(ParameterError):
        cls(rand_feats((2, 4, 5)), ones_z(2, 12, 2))
    probs, _ = cls(rand_feats((2, 4, 5)), ones_z(2, 12, 2),
                   rng=np.random.default_rng(0))
    assert probs.shape == (2, 3)


def test_trace_records_table_shapes():
    cls = small_classifier().eval_mode()
    trace = {}
    cls(rand_feats((3, 4, 5)), ones_z(3, 12, 2), trace=trace)
    assert trace["classifier.edge_hidden"] == (3, 1, 12, 8)
    assert trace["classifier.gated"] == (3, 2, 12, 8)
    assert trace["classifier.head_hidden"] == (3, 8)
    assert trace["output"] == (3, 3)
