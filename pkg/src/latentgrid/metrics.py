"""Classification metrics and graph-dissimilarity measures.

The classification side covers one-vs-rest accuracy, macro averaging, and
the system-level criterion (an event counts only if every sensor-level
prediction is right). The graph side quantifies how far apart two
undirected graphs are via a three-term dissimilarity built from node
distance distributions, network node dispersion, and alpha-centrality
profiles of the graphs and their complements, plus the Monte Carlo
reliability study over repeated training runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import ContractError, ParameterError
from .pairs import PairIndex

# ---------------------------------------------------------------------------
# classification metrics


@dataclass
class ConfusionCounts:
    """Multiclass confusion matrix, rows = true class, cols = predicted."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError(f"confusion matrix must be square, got {m.shape}")
        if (m < 0).any():
            raise ParameterError("confusion counts must be non-negative")
        self.matrix = m.astype(np.int64)

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def one_vs_rest(self, k: int):
        """(TP, TN, FP, FN) treating class k as positive."""
        m = self.matrix
        tp = int(m[k, k])
        fp = int(m[:, k].sum() - m[k, k])
        fn = int(m[k, :].sum() - m[k, k])
        tn = self.total - tp - fp - fn
        return tp, tn, fp, fn


def confusion_counts(y_true, y_pred, n_classes: int = None) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ContractError("empty evaluation set")
    if y_true.shape != y_pred.shape:
        raise ParameterError(
            f"label/prediction shape mismatch: {y_true.shape} vs {y_pred.shape}"
        )
    if n_classes is None:
        n_classes = int(max(y_true.max(), y_pred.max())) + 1
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return ConfusionCounts(matrix)


@dataclass
class AccuracyReport:
    per_class: tuple  # one-vs-rest (TP+TN)/(TP+FP+FN+TN) per class
    macro: float  # mean of per_class
    plain: float  # multiclass trace/total


def accuracy(counts: ConfusionCounts) -> AccuracyReport:
    if counts.total == 0:
        raise ContractError("empty evaluation set")
    per_class = []
    for k in range(counts.n_classes):
        tp, tn, fp, fn = counts.one_vs_rest(k)
        per_class.append((tp + tn) / (tp + tn + fp + fn))
    plain = float(np.trace(counts.matrix)) / counts.total
    return AccuracyReport(tuple(per_class), float(np.mean(per_class)), plain)


def system_level_accuracy(labels, per_event_predictions) -> float:
    """Fraction of events where every per-sensor prediction matches the label.

    `per_event_predictions` is one sequence of predictions per event; a
    single prediction per event reduces this to plain accuracy.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ContractError("empty evaluation set")
    if len(per_event_predictions) != len(labels):
        raise ParameterError(
            f"{len(labels)} labels but {len(per_event_predictions)} prediction groups"
        )
    hits = 0
    for label, preds in zip(labels, per_event_predictions):
        preds = np.atleast_1d(np.asarray(preds))
        if preds.size == 0:
            raise ParameterError("empty prediction group")
        hits += int((preds == label).all())
    return hits / len(labels)


# ---------------------------------------------------------------------------
# graph dissimilarity


def _graph_of(n_nodes: int, edges) -> nx.Graph:
    if n_nodes < 1:
        raise ParameterError(f"graph needs at least one node, got {n_nodes}")
    g = nx.Graph()
    g.add_nodes_from(range(n_nodes))
    for a, b in edges:
        a, b = int(a), int(b)
        if not (0 <= a < n_nodes and 0 <= b < n_nodes):
            raise ParameterError(f"edge ({a}, {b}) outside 0..{n_nodes - 1}")
        if a != b:
            g.add_edge(a, b)
    return g


def _distance_matrix(g: nx.Graph) -> np.ndarray:
    n = g.number_of_nodes()
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for src, lengths in nx.all_pairs_shortest_path_length(g):
        for dst, length in lengths.items():
            d[src, dst] = length
    return d


def _diameter(d: np.ndarray) -> int:
    off = d[~np.eye(len(d), dtype=bool)]
    finite = off[np.isfinite(off)]
    return int(finite.max()) if finite.size else 0


def _full_distribution(d: np.ndarray) -> np.ndarray:
    """(N, N) rows: bins for distances 1..N-1 plus a trailing unreachable bin."""
    n = len(d)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if np.isinf(d[i, j]):
                out[i, -1] += 1.0
            else:
                out[i, int(d[i, j]) - 1] += 1.0
    return out / max(n - 1, 1)


def distance_distribution(n_nodes: int, edges) -> np.ndarray:
    """Per-node histograms of shortest-path distances.

    Bins cover distances 1..diameter plus one trailing bin for unreachable
    pairs; rows are normalized over the other n-1 nodes. The diameter is
    the largest finite pairwise distance, so disconnected graphs stay
    defined via the unreachable bin.
    """
    d = _distance_matrix(_graph_of(n_nodes, edges))
    eta = _diameter(d)
    full = _full_distribution(d)
    return np.concatenate([full[:, :eta], full[:, -1:]], axis=1)


def j_divergence(dists: np.ndarray) -> float:
    """Generalized Jensen-Shannon divergence of the rows."""
    dists = np.asarray(dists, dtype=float)
    mu = dists.mean(axis=0)
    total = 0.0
    for p in dists:
        mask = p > 0
        total += float(np.sum(p[mask] * np.log(p[mask] / mu[mask])))
    # mathematically >= 0 (Jensen); rounding can dip a hair below
    return max(total / len(dists), 0.0)


def nnd(n_nodes: int, edges) -> float:
    """Network node dispersion: divergence of the per-node distance
    distributions, normalized by log(diameter + 1)."""
    if n_nodes < 2:
        raise ContractError(f"nnd needs at least two nodes, got {n_nodes}")
    d = _distance_matrix(_graph_of(n_nodes, edges))
    eta = _diameter(d)
    if eta == 0:
        raise ContractError("nnd undefined: graph has no finite pair distances "
                            "(diameter 0)")
    return j_divergence(_full_distribution(d)) / math.log(eta + 1)


def alpha_centrality(n_nodes: int, edges) -> np.ndarray:
    """Alpha-centrality profile as a distribution over nodes.

    alpha = 0.95 / lambda_max with a uniform exogenous vector; the raw
    values are min-max normalized then rescaled to sum to one. Graphs whose
    centrality is constant (no edges, or regular) give the uniform
    distribution.
    """
    g = _graph_of(n_nodes, edges)
    a = nx.to_numpy_array(g, nodelist=range(n_nodes))
    lam = float(np.max(np.abs(np.linalg.eigvalsh(a)))) if g.number_of_edges() else 0.0
    if lam <= 0:
        x = np.ones(n_nodes)
    else:
        alpha = 0.95 / lam
        x = np.linalg.solve(np.eye(n_nodes) - alpha * a.T, np.ones(n_nodes))
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        return np.full(n_nodes, 1.0 / n_nodes)
    v = (x - lo) / (hi - lo)
    return v / v.sum()


def complement_edges(n_nodes: int, edges):
    present = {(min(a, b), max(a, b)) for a, b in edges if a != b}
    return [
        (i, j)
        for i in range(n_nodes)
        for j in range(i + 1, n_nodes)
        if (i, j) not in present
    ]


def d_measure(n_nodes: int, edges1, edges2) -> float:
    """Three-term dissimilarity of two undirected graphs on the same nodes.

    0.45 * sqrt(J(mu1, mu2)/log 2)
    + 0.45 * |sqrt(nnd1) - sqrt(nnd2)|
    + 0.05 * (sqrt(J(a1, a2)/log 2) + sqrt(J(ac1, ac2)/log 2))

    where mu is the mean node distance distribution, and a/ac are the
    alpha-centrality distributions of each graph and its complement.
    """
    d1 = _distance_matrix(_graph_of(n_nodes, edges1))
    d2 = _distance_matrix(_graph_of(n_nodes, edges2))
    for tag, d in (("first", d1), ("second", d2)):
        if _diameter(d) == 0:
            raise ContractError(
                f"d_measure undefined: {tag} graph has no edges, so its nnd "
                "term (diameter 0) is undefined"
            )
    p1, p2 = _full_distribution(d1), _full_distribution(d2)
    mu1, mu2 = p1.mean(axis=0), p2.mean(axis=0)
    term1 = math.sqrt(j_divergence(np.stack([mu1, mu2])) / math.log(2))

    phi1 = j_divergence(p1) / math.log(_diameter(d1) + 1)
    phi2 = j_divergence(p2) / math.log(_diameter(d2) + 1)
    term2 = abs(math.sqrt(phi1) - math.sqrt(phi2))

    # Centrality profiles are compared as sorted value distributions so the
    # measure is invariant to node relabeling of either graph.
    a1 = np.sort(alpha_centrality(n_nodes, edges1))
    a2 = np.sort(alpha_centrality(n_nodes, edges2))
    c1 = np.sort(alpha_centrality(n_nodes, complement_edges(n_nodes, edges1)))
    c2 = np.sort(alpha_centrality(n_nodes, complement_edges(n_nodes, edges2)))
    term3 = math.sqrt(j_divergence(np.stack([a1, a2])) / math.log(2)) + math.sqrt(
        j_divergence(np.stack([c1, c2])) / math.log(2)
    )
    return 0.45 * term1 + 0.45 * term2 + 0.05 * term3


# ---------------------------------------------------------------------------
# representative graphs over an evaluation set


@dataclass
class GraphSummary:
    """Edge frequencies over an evaluation set plus the top-decile edge sets.

    frequencies: (E, L) fraction of samples where each directed pair was
    active per graph layer. representative: per layer, the indices of the
    ceil(top_fraction * E) most frequent rows, ties broken by lexicographic
    (src, dst) order (equal to row order).
    """

    n_nodes: int
    frequencies: np.ndarray
    representative: tuple
    top_fraction: float = 0.10
    d_matrix: np.ndarray = field(default=None, repr=False)

    @property
    def n_layers(self) -> int:
        return self.frequencies.shape[1]

    def layer_edges(self, layer: int):
        """Undirected edge list of the layer's representative set."""
        pi = PairIndex(self.n_nodes)
        rows = self.representative[layer]
        return sorted(
            {(min(int(pi.src[r]), int(pi.dst[r])), max(int(pi.src[r]), int(pi.dst[r])))
             for r in rows}
        )

    def undirected_frequencies(self) -> dict:
        """(i, j) -> score: directed frequencies averaged over direction and
        layers, for ranking undirected edges."""
        pi = PairIndex(self.n_nodes)
        per_row = self.frequencies.mean(axis=1)
        out = {}
        for r in range(len(per_row)):
            key = (min(int(pi.src[r]), int(pi.dst[r])),
                   max(int(pi.src[r]), int(pi.dst[r])))
            out[key] = out.get(key, 0.0) + 0.5 * float(per_row[r])
        return out


def representative_graph(z_stack, n_nodes: int, top_fraction: float = 0.10) -> GraphSummary:
    """Aggregate sampled graphs (S, E, L) into frequencies and top-decile sets."""
    z = np.asarray(z_stack, dtype=float)
    if z.ndim != 3 or z.shape[0] == 0:
        raise ParameterError(f"expected a non-empty (S, E, L) stack, got {z.shape}")
    e = n_nodes * (n_nodes - 1)
    if z.shape[1] != e:
        raise ParameterError(
            f"stack has {z.shape[1]} pair rows but n_nodes={n_nodes} implies {e}"
        )
    if not 0 < top_fraction <= 1:
        raise ParameterError(f"top_fraction must be in (0, 1], got {top_fraction}")
    freq = z.mean(axis=0)
    k = math.ceil(top_fraction * e)
    reps = []
    for layer in range(freq.shape[1]):
        order = np.lexsort((np.arange(e), -freq[:, layer]))
        reps.append(np.sort(order[:k]))
    return GraphSummary(n_nodes, freq, tuple(reps), top_fraction)


def graph_recovery_score(summary: GraphSummary, truth_edges, k: int) -> dict:
    """Precision/recall at K of the top-K undirected edges against truth."""
    scores = summary.undirected_frequencies()
    if k < 1 or k > len(scores):
        raise ParameterError(f"K must be in 1..{len(scores)}, got {k}")
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    top = {pair for pair, _ in ranked[:k]}
    truth = {(min(a, b), max(a, b)) for a, b in truth_edges}
    if not truth:
        raise ParameterError("truth graph has no edges")
    hits = len(top & truth)
    return {"k": k, "precision": hits / k, "recall": hits / len(truth)}


# ---------------------------------------------------------------------------
# Monte Carlo reliability study


def monte_carlo_dissimilarity(runner, n_runs: int, seeds=None) -> dict:
    """Train `n_runs` models via runner(seed) -> GraphSummary and report the
    mean pairwise dissimilarity of their representative graphs per layer.

    Failed runs are recorded and excluded; the report is partial if fewer
    than two runs succeed.
    """
    if n_runs < 2:
        raise ParameterError(f"need at least 2 runs, got {n_runs}")
    if seeds is None:
        seeds = list(range(n_runs))
    seeds = list(seeds)
    if len(seeds) != n_runs:
        raise ParameterError(f"{n_runs} runs but {len(seeds)} seeds")

    summaries, succeeded, failed = [], [], []
    for seed in seeds:
        try:
            summaries.append(runner(seed))
            succeeded.append(seed)
        except Exception as exc:  # partial-result contract
            failed.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})

    report = {
        "n_runs": n_runs,
        "seeds": seeds,
        "succeeded": succeeded,
        "failed": failed,
        "complete": not failed,
    }
    if len(summaries) < 2:
        report["per_layer_mean_d"] = None
        report["pooled_mean_d"] = None
        report["pairs"] = 0
        return report

    n_layers = summaries[0].n_layers
    n_nodes = summaries[0].n_nodes
    per_layer = []
    matrices = []
    for layer in range(n_layers):
        m = np.zeros((len(summaries), len(summaries)))
        values = []
        for i in range(len(summaries)):
            for j in range(i + 1, len(summaries)):
                d = d_measure(
                    n_nodes,
                    summaries[i].layer_edges(layer),
                    summaries[j].layer_edges(layer),
                )
                m[i, j] = m[j, i] = d
                values.append(d)
        matrices.append(m)
        per_layer.append(float(np.mean(values)))
    report["per_layer_mean_d"] = per_layer
    report["pooled_mean_d"] = float(np.mean(per_layer))
    report["pairs"] = len(summaries) * (len(summaries) - 1) // 2
    report["d_matrices"] = [m.tolist() for m in matrices]
    return report
