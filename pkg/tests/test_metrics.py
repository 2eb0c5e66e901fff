"""Metrics: classification reports, graph dissimilarity vs brute-force oracles."""

import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest

from latentgrid.errors import ContractError, ParameterError
from latentgrid.metrics import (
    AccuracyReport,
    GraphSummary,
    accuracy,
    alpha_centrality,
    complement_edges,
    confusion_counts,
    d_measure,
    distance_distribution,
    graph_recovery_score,
    j_divergence,
    monte_carlo_dissimilarity,
    nnd,
    representative_graph,
    system_level_accuracy,
)
from latentgrid.pairs import PairIndex

import oracles

P4 = [(0, 1), (1, 2), (2, 3)]
K4 = list(itertools.combinations(range(4), 2))
PIN_D_P4_K4 = 0.451810334078132


def random_graph(rng, n, p=0.4, ensure_edge=True):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if ensure_edge and not edges:
        edges = [(0, 1)]
    return edges


# ---------------------------------------------------------------------------
# classification metrics


def test_all_correct_is_one():
    counts = confusion_counts([0, 1, 2, 1], [0, 1, 2, 1], n_classes=3)
    report = accuracy(counts)
    assert report.per_class == (1.0, 1.0, 1.0)
    assert report.macro == 1.0
    assert report.plain == 1.0


def test_one_vs_rest_substitution():
    # class 0: TP=3, FN=1, FP=1, TN=5 -> (3+5)/10 = 0.8
    counts = confusion_counts([0, 0, 0, 0, 1, 1, 1, 1, 1, 1],
                              [0, 0, 0, 1, 0, 1, 1, 1, 1, 1], n_classes=2)
    assert counts.one_vs_rest(0) == (3, 5, 1, 1)
    report = accuracy(counts)
    assert report.per_class[0] == pytest.approx(0.8)


def test_one_vs_rest_matches_direct_decision_count():
    rng = np.random.default_rng(0)
    y_true = rng.integers(0, 4, size=500)
    y_pred = rng.integers(0, 4, size=500)
    report = accuracy(confusion_counts(y_true, y_pred, n_classes=4))
    for k in range(4):
        direct = np.mean((y_true == k) == (y_pred == k))
        assert report.per_class[k] == pytest.approx(direct)
        assert 0.0 <= report.per_class[k] <= 1.0
    assert report.plain == pytest.approx(np.mean(y_true == y_pred))


def test_empty_evaluation_rejected():
    with pytest.raises(ContractError):
        confusion_counts([], [])
    with pytest.raises(ParameterError):
        confusion_counts([0, 1], [0])


def test_reference_accuracy_fixture_ordering():
    path = Path(__file__).parent / "fixtures" / "reference_accuracies.json"
    values = json.loads(path.read_text())["system_level_accuracy"]
    assert values["graphical_full_model"] == 0.78
    assert values["per_sensor_svm_baseline"] == 0.60
    assert values["per_sensor_cnn_baseline"] == 0.63
    best = max(values, key=values.get)
    assert best == "graphical_full_model"
    assert values["graphical_full_model"] > values["graphical_no_graph_ablation"]


def test_system_level_single_prediction_reduces_to_plain():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 3, size=200)
    preds = rng.integers(0, 3, size=200)
    got = system_level_accuracy(labels, [[p] for p in preds])
    assert got == pytest.approx(np.mean(labels == preds))


def test_system_level_one_wrong_sensor_fails_event():
    assert system_level_accuracy([2], [[2, 2, 2]]) == 1.0
    assert system_level_accuracy([2], [[2, 1, 2]]) == 0.0


def test_system_level_matches_power_law_on_independent_sensors():
    rng = np.random.default_rng(7)
    m, n_pmu, p = 20000, 3, 0.8
    labels = rng.integers(0, 4, size=m)
    correct = rng.random((m, n_pmu)) < p
    preds = np.where(correct, labels[:, None], (labels[:, None] + 1) % 4)
    got = system_level_accuracy(labels, preds)
    assert abs(got - p**n_pmu) < 0.02
    # never exceeds any single sensor's accuracy
    for j in range(n_pmu):
        assert got <= np.mean(preds[:, j] == labels) + 1e-12


# ---------------------------------------------------------------------------
# distance distributions


def test_path3_distribution():
    dd = distance_distribution(3, [(0, 1), (1, 2)])
    assert dd.shape == (3, 3)  # bins 1..2 plus unreachable
    assert np.allclose(dd[0], [0.5, 0.5, 0.0])
    assert np.allclose(dd[1], [1.0, 0.0, 0.0])


def test_complete_graph_distribution():
    dd = distance_distribution(4, K4)
    assert dd.shape == (4, 2)
    assert np.allclose(dd[:, 0], 1.0)
    assert np.allclose(dd[:, 1], 0.0)


def test_star_center_vs_leaf():
    star = [(0, 1), (0, 2), (0, 3)]
    dd = distance_distribution(4, star)
    assert np.allclose(dd[0], [1.0, 0.0, 0.0])
    assert np.allclose(dd[1], [1 / 3, 2 / 3, 0.0])
    assert not np.allclose(dd[0], dd[1])


def test_disconnected_uses_unreachable_bin():
    dd = distance_distribution(4, [(0, 1), (2, 3)])
    assert dd.shape == (4, 2)
    assert np.allclose(dd[0], [1 / 3, 2 / 3])


def test_distribution_matches_brute_force_on_small_graphs():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        edges = random_graph(rng, n, p=float(rng.uniform(0.1, 0.9)),
                             ensure_edge=False)
        mine = distance_distribution(n, edges)
        full = oracles.brute_force_distance_distribution(n, edges)
        eta = mine.shape[1] - 1
        expected = np.concatenate([full[:, :eta], full[:, -1:]], axis=1)
        assert np.allclose(mine, expected, atol=1e-12)
        assert np.allclose(full[:, eta:-1], 0.0)  # nothing beyond the diameter


# ---------------------------------------------------------------------------
# network node dispersion


def test_cycle_nnd_is_zero():
    c5 = [(i, (i + 1) % 5) for i in range(5)]
    assert nnd(5, c5) == pytest.approx(0.0, abs=1e-12)


def test_star_nnd_positive_and_relabel_invariant():
    star = [(0, 1), (0, 2), (0, 3)]
    value = nnd(4, star)
    assert value > 0
    perm = {0: 2, 1: 0, 2: 3, 3: 1}
    relabeled = [(perm[a], perm[b]) for a, b in star]
    assert nnd(4, relabeled) == pytest.approx(value, abs=1e-12)


def test_nnd_errors():
    with pytest.raises(ContractError):
        nnd(1, [])
    with pytest.raises(ContractError):
        nnd(3, [])


def test_nnd_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(3, 9))
        edges = random_graph(rng, n, p=float(rng.uniform(0.2, 0.9)))
        assert nnd(n, edges) == pytest.approx(
            oracles.brute_force_nnd(n, edges), abs=1e-10
        )


# ---------------------------------------------------------------------------
# alpha centrality


def test_alpha_centrality_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        edges = random_graph(rng, n, p=float(rng.uniform(0.1, 0.9)),
                             ensure_edge=False)
        mine = alpha_centrality(n, edges)
        ref = oracles.brute_force_alpha_centrality(n, edges)
        assert np.allclose(mine, ref, atol=1e-10)
        assert mine.sum() == pytest.approx(1.0)
        assert (mine >= 0).all()


def test_alpha_centrality_degenerate_cases_are_uniform():
    assert np.allclose(alpha_centrality(4, []), 0.25)
    c4 = [(i, (i + 1) % 4) for i in range(4)]  # regular -> constant centrality
    assert np.allclose(alpha_centrality(4, c4), 0.25)


def test_star_centrality_peaks_at_center():
    star = [(0, 1), (0, 2), (0, 3)]
    values = alpha_centrality(4, star)
    assert values[0] == values.max()
    assert np.allclose(values[1:], values[1])


# ---------------------------------------------------------------------------
# graph dissimilarity


def test_d_measure_self_is_zero_and_symmetric():
    rng = np.random.default_rng(6)
    for _ in range(20):
        n = int(rng.integers(3, 8))
        g1 = random_graph(rng, n)
        g2 = random_graph(rng, n)
        assert d_measure(n, g1, g1) == 0.0
        assert d_measure(n, g1, g2) == pytest.approx(d_measure(n, g2, g1), abs=1e-14)
        assert d_measure(n, g1, g2) >= 0.0


def test_d_measure_pinned_path_vs_complete():
    value = d_measure(4, P4, K4)
    assert value == pytest.approx(PIN_D_P4_K4, abs=1e-12)
    assert value == pytest.approx(oracles.brute_force_d_measure(4, P4, K4), abs=1e-12)


def test_d_measure_matches_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(60):
        n = int(rng.integers(3, 8))
        g1, g2 = random_graph(rng, n), random_graph(rng, n)
        assert d_measure(n, g1, g2) == pytest.approx(
            oracles.brute_force_d_measure(n, g1, g2), abs=1e-8
        )


def test_d_measure_relabel_invariance_either_side():
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = int(rng.integers(3, 8))
        g1, g2 = random_graph(rng, n), random_graph(rng, n)
        base = d_measure(n, g1, g2)
        perm = rng.permutation(n)
        g2_relabeled = [(int(perm[a]), int(perm[b])) for a, b in g2]
        assert d_measure(n, g1, g2_relabeled) == pytest.approx(base, abs=1e-8)
        g1_relabeled = [(int(perm[a]), int(perm[b])) for a, b in g1]
        assert d_measure(n, g1_relabeled, g2) == pytest.approx(base, abs=1e-8)


def test_d_measure_degenerate_names_the_term():
    with pytest.raises(ContractError, match="nnd"):
        d_measure(4, [], K4)
    with pytest.raises(ContractError, match="second"):
        d_measure(4, P4, [])
    # complete graphs are fine: the complement centrality falls back to uniform
    assert d_measure(4, K4, K4) == 0.0


def test_complement_edges():
    assert complement_edges(4, K4) == []
    assert sorted(complement_edges(3, [(0, 1)])) == [(0, 2), (1, 2)]


def test_j_divergence_properties():
    p = np.array([0.5, 0.5, 0.0])
    assert j_divergence(np.stack([p, p])) == pytest.approx(0.0)
    q = np.array([1.0, 0.0, 0.0])
    assert j_divergence(np.stack([p, q])) > 0
    assert j_divergence(np.stack([p, q])) <= math.log(2) + 1e-12


# ---------------------------------------------------------------------------
# representative graphs


def test_representative_sizes_and_frequencies():
    rng = np.random.default_rng(10)
    n = 24
    e = n * (n - 1)
    z = (rng.random((5, e, 3)) < 0.3).astype(float)
    summary = representative_graph(z, n_nodes=n)
    assert summary.frequencies.shape == (e, 3)
    assert ((summary.frequencies >= 0) & (summary.frequencies <= 1)).all()
    for layer in range(3):
        assert len(summary.representative[layer]) == math.ceil(0.10 * e) == 56


def test_identical_graphs_representative_is_their_densest_decile():
    n = 6
    pi = PairIndex(n)
    e = pi.n_pairs  # 30 rows, top decile = 3
    z = np.zeros((4, e, 1))
    active = [2, 11, 23]
    z[:, active, 0] = 1.0
    summary = representative_graph(z, n_nodes=n)
    assert list(summary.representative[0]) == active


def test_always_present_edge_ranks_first():
    rng = np.random.default_rng(11)
    n = 6
    e = n * (n - 1)
    z = (rng.random((20, e, 2)) < 0.5).astype(float)
    z[:, 17, :] = 1.0
    summary = representative_graph(z, n_nodes=n)
    for layer in range(2):
        assert 17 in summary.representative[layer]
        top_row = np.lexsort((np.arange(e), -summary.frequencies[:, layer]))[0]
        assert summary.frequencies[top_row, layer] == 1.0


def test_ties_break_lexicographically():
    n = 4
    e = n * (n - 1)  # 12 rows, top decile = 2
    z = np.full((3, e, 1), 0.5)
    summary = representative_graph(z, n_nodes=n)
    assert list(summary.representative[0]) == [0, 1]


def test_layer_edges_collapse_directions():
    n = 4
    pi = PairIndex(n)
    z = np.zeros((2, pi.n_pairs, 1))
    z[:, [pi.row_of(0, 1), pi.row_of(1, 0), pi.row_of(2, 3)], 0] = 1.0
    summary = representative_graph(z, n_nodes=n, top_fraction=0.25)
    assert summary.layer_edges(0) == [(0, 1), (2, 3)]


def test_representative_graph_validation():
    with pytest.raises(ParameterError):
        representative_graph(np.zeros((0, 12, 1)), n_nodes=4)
    with pytest.raises(ParameterError):
        representative_graph(np.zeros((2, 10, 1)), n_nodes=4)
    with pytest.raises(ParameterError):
        representative_graph(np.zeros((2, 12, 1)), n_nodes=4, top_fraction=0.0)


# ---------------------------------------------------------------------------
# graph recovery


def make_summary_from_truth(n, truth, noise=None):
    pi = PairIndex(n)
    freq = np.zeros((pi.n_pairs, 2)) if noise is None else noise
    for a, b in truth:
        for i, j in ((a, b), (b, a)):
            freq[pi.row_of(i, j), :] = 1.0
    reps = tuple(np.argsort(-freq[:, l])[:3] for l in range(freq.shape[1]))
    return GraphSummary(n, freq, reps)


def test_exact_recovery_scores_one():
    truth = [(0, 1), (1, 2), (0, 2)]
    summary = make_summary_from_truth(5, truth)
    score = graph_recovery_score(summary, truth, k=len(truth))
    assert score["precision"] == 1.0
    assert score["recall"] == 1.0


def test_random_ranking_precision_matches_density():
    rng = np.random.default_rng(12)
    n, k = 8, 10
    truth = random_graph(rng, n, p=0.25)
    e_und = n * (n - 1) // 2
    pi = PairIndex(n)
    precisions = []
    for _ in range(300):
        freq = rng.random((pi.n_pairs, 1))
        summary = GraphSummary(n, freq, (np.arange(3),))
        precisions.append(graph_recovery_score(summary, truth, k)["precision"])
    expected = len(truth) / e_und
    assert abs(np.mean(precisions) - expected) < 0.05


def test_recovery_validation():
    summary = make_summary_from_truth(5, [(0, 1)])
    with pytest.raises(ParameterError):
        graph_recovery_score(summary, [(0, 1)], k=11)  # only 10 undirected pairs
    with pytest.raises(ParameterError):
        graph_recovery_score(summary, [], k=2)


# ---------------------------------------------------------------------------
# Monte Carlo dissimilarity


def fixed_summary(n, seed):
    rng = np.random.default_rng(seed)
    pi = PairIndex(n)
    z = (rng.random((6, pi.n_pairs, 2)) < 0.4).astype(float)
    return representative_graph(z, n_nodes=n, top_fraction=0.2)


def test_identical_seeds_give_zero_dissimilarity():
    report = monte_carlo_dissimilarity(lambda seed: fixed_summary(6, 17),
                                       n_runs=3, seeds=[17, 17, 17])
    assert report["complete"]
    assert report["per_layer_mean_d"] == [0.0, 0.0]
    assert report["pooled_mean_d"] == 0.0


def test_different_seeds_give_positive_dissimilarity():
    report = monte_carlo_dissimilarity(lambda seed: fixed_summary(6, seed), n_runs=3)
    assert report["pooled_mean_d"] > 0
    assert report["pairs"] == 3
    for m in report["d_matrices"]:
        m = np.asarray(m)
        assert np.allclose(m, m.T)
        assert np.allclose(np.diag(m), 0.0)


def test_failed_runs_produce_partial_report():
    def runner(seed):
        if seed == 1:
            raise RuntimeError("boom")
        return fixed_summary(6, seed)

    report = monte_carlo_dissimilarity(runner, n_runs=3)
    assert not report["complete"]
    assert report["succeeded"] == [0, 2]
    assert report["failed"][0]["seed"] == 1
    assert "boom" in report["failed"][0]["error"]
    assert report["pooled_mean_d"] is not None  # two runs still compared

    report_single = monte_carlo_dissimilarity(runner, n_runs=2, seeds=[0, 1])
    assert report_single["pooled_mean_d"] is None
    assert report_single["pairs"] == 0


def test_monte_carlo_validation():
    with pytest.raises(ParameterError):
        monte_carlo_dissimilarity(lambda s: None, n_runs=1)
    with pytest.raises(ParameterError):
        monte_carlo_dissimilarity(lambda s: None, n_runs=3, seeds=[1, 2])
