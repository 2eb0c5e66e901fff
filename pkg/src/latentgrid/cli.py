"""Command-line entry point wiring synthesis, preprocessing, training,
evaluation, inference, graph export, dissimilarity studies, and search.

Every subcommand exits 0 only on success and prints a one-line error to
stderr otherwise. All artifacts are deterministic under fixed seeds: JSON
is written with sorted keys and no timestamps, so re-runs are byte-identical
and directory digests can serve as regression checks.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config as cfg
from .checkpoint import load_model, save_model
from .dataset import graph_from_manifest, load_manifest
from .errors import ConfigError
from .metrics import (
    accuracy,
    confusion_counts,
    d_measure,
    graph_recovery_score,
    monte_carlo_dissimilarity,
    representative_graph,
)
from .model import ModelConfig, build_model
from .preprocess import (
    DEFAULT_MAX_GAP,
    Standardization,
    load_prepared,
    run_preprocess,
    split_indices,
    standardize,
)
from .synth import generate_dataset, generate_graph
from .dataset import save_dataset
from .pairs import PairIndex
from .tensor import Tensor, no_grad
from .train import (
    TrainConfig,
    evaluate_arrays,
    random_search,
    train,
    write_history,
    write_trials,
)

DATASET_FILES = ("manifest.json", "labels.csv")


def _write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    payload = cfg.load_json(_require_file(args.config, "config"))
    parsed = cfg.parse_synth_config(payload, where=str(args.config))
    g = parsed["graph"]
    graph = generate_graph(g["n_nodes"], g["target_edges"], g["seed"], g["generator"])
    samples = generate_dataset(
        graph, parsed["counts"], parsed["seed"], config=parsed["synth"]
    )
    manifest = save_dataset(
        args.out,
        samples,
        graph,
        parsed["seed"],
        parsed["synth"].noise_std,
        extra_meta={"signature": asdict(parsed["synth"])},
    )
    print(
        f"synth: wrote {manifest['n_samples']} samples "
        f"({manifest['n_nodes']} nodes) to {args.out}"
    )
    return 0


def cmd_preprocess(args) -> int:
    src = Path(args.in_dir)
    _require_file(src / "manifest.json", "dataset manifest")
    dst = Path(args.out)
    if dst.resolve() != src.resolve():
        dst.mkdir(parents=True, exist_ok=True)
        names = [f.name for f in sorted(src.iterdir()) if f.is_file()]
        for name in names:
            if name in DATASET_FILES or name.startswith(("sample_", "flags_")):
                shutil.copyfile(src / name, dst / name)
    summary = run_preprocess(dst, max_gap=args.max_gap, seed=cfg.seed_override(args.seed))
    print(
        f"preprocess: train/val/test = {summary['n_train']}/{summary['n_val']}"
        f"/{summary['n_test']}, excluded {summary['n_excluded']}"
    )
    return 0


def _check_data_matches_model(model_cfg: ModelConfig, prepared) -> None:
    n, c, t = prepared.train_x.shape[1:]
    if (n, c, t) != (model_cfg.n_nodes, model_cfg.n_channels, model_cfg.window):
        raise ConfigError(
            f"dataset shape (N, C, T)=({n}, {c}, {t}) does not match model config "
            f"({model_cfg.n_nodes}, {model_cfg.n_channels}, {model_cfg.window})"
        )


def cmd_train(args) -> int:
    payload = cfg.load_json(_require_file(args.config, "config"))
    model_cfg, train_cfg = cfg.parse_experiment_config(payload, where=str(args.config))
    prepared = load_prepared(args.data)
    _check_data_matches_model(model_cfg, prepared)

    model = build_model(model_cfg, seed=train_cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = print if args.verbose else None
    result = train(model, prepared, train_cfg, log=log)
    write_history(out / "history.csv", result)
    meta = {
        "train_config": train_cfg.to_dict(),
        "best_epoch": result.best_epoch,
        "best_val_acc": result.best_val_acc,
        "epochs_run": result.epochs_run,
        "standardization": prepared.stats.to_json(),
        "class_map": prepared.class_map,
    }
    save_model(out / "model.ckpt", model, model_cfg, meta)
    print(
        f"train: {result.epochs_run} epochs, best val acc "
        f"{result.best_val_acc:.4f} at epoch {result.best_epoch}; "
        f"checkpoint in {out}"
    )
    return 0


def _collect_graphs(model, x: np.ndarray, batch_size: int = 64):
    """Hard-threshold sampled graphs over a split; (B, E, L) or None."""
    if model.config.variant != "full":
        return None
    zs = []
    model.eval_mode()
    with no_grad():
        for start in range(0, len(x), batch_size):
            out = model(Tensor(x[start : start + batch_size]))
            zs.append(out.graph.z.data)
    return np.concatenate(zs, axis=0)


def _half_split_stability(z_stack: np.ndarray, n_nodes: int):
    """D-measure between representative graphs of the two halves of a run."""
    half = len(z_stack) // 2
    if half < 1:
        return None
    first = representative_graph(z_stack[:half], n_nodes)
    second = representative_graph(z_stack[half:], n_nodes)
    per_layer = []
    for layer in range(first.n_layers):
        try:
            per_layer.append(
                d_measure(n_nodes, first.layer_edges(layer), second.layer_edges(layer))
            )
        except ConfigError:
            per_layer.append(None)
    finite = [d for d in per_layer if d is not None]
    pooled = float(np.mean(finite)) if finite else None
    return {"per_layer": per_layer, "pooled": pooled}


def cmd_eval(args) -> int:
    model, meta = load_model(_require_file(args.model, "model checkpoint"))
    prepared = load_prepared(args.data)
    _check_data_matches_model(model.config, prepared)
    x, y = prepared.split(args.split)
    loss, acc, probs = evaluate_arrays(model, x, y, r=args.threshold)
    pred = probs.argmax(axis=1)
    n_classes = model.config.n_classes
    counts = confusion_counts(y, pred, n_classes)
    report_acc = accuracy(counts)

    index_to_class = {v: k for k, v in prepared.class_map.items()}
    per_class = {
        index_to_class[k]: report_acc.per_class[k] for k in range(n_classes)
    }

    report = {
        "split": args.split,
        "n_samples": int(len(y)),
        "loss": loss,
        "accuracy": acc,
        "per_class": per_class,
        "system_level": acc,
        "confusion_matrix": counts.matrix.tolist(),
        "precision_at_k": None,
        "d_measure_stats": None,
    }

    z_stack = _collect_graphs(model, x)
    if z_stack is not None:
        n_nodes = model.config.n_nodes
        manifest = load_manifest(args.data)
        if "graph" in manifest:
            truth = graph_from_manifest(manifest)
            truth_edges = {tuple(e) for e in truth.edge_list()}
            summary = representative_graph(z_stack, n_nodes)
            score = graph_recovery_score(summary, truth_edges, k=len(truth_edges))
            baseline = len(truth_edges) / (n_nodes * (n_nodes - 1) / 2)
            score["random_baseline"] = baseline
            report["precision_at_k"] = score
        report["d_measure_stats"] = _half_split_stability(z_stack, n_nodes)

    _write_json(args.report, report)
    print(f"eval: {args.split} accuracy {acc:.4f} over {len(y)} samples")
    return 0


def cmd_infer(args) -> int:
    model, meta = load_model(_require_file(args.model, "model checkpoint"))
    sample_path = _require_file(args.sample, "sample file")
    n, c, t = model.config.n_nodes, model.config.n_channels, model.config.window
    raw = np.fromfile(sample_path, dtype="<f4")
    if raw.size != n * c * t:
        raise ConfigError(
            f"sample has {raw.size} values; model expects N*C*T = {n * c * t}"
        )
    values = raw.reshape(1, n, c, t).astype(np.float64)
    if "standardization" in meta:
        values = Standardization.from_json(meta["standardization"]).apply(values)
    values = values.astype(np.float32)

    model.eval_mode()
    with no_grad():
        out = model(Tensor(values))
    probs = out.probs.data[0]
    class_map = meta.get("class_map") or {}
    index_to_class = {v: k for k, v in class_map.items()}
    pred = int(probs.argmax())
    label = index_to_class.get(pred, str(pred))

    edges = None
    if out.graph is not None:
        pairs = PairIndex(n)
        z = out.graph.z.data[0]  # (E, L)
        edges = [
            {
                "src": int(pairs.src[e]),
                "dst": int(pairs.dst[e]),
                "layer": int(layer),
            }
            for e in range(z.shape[0])
            for layer in range(z.shape[1])
            if z[e, layer] > 0.5
        ]
    payload = {
        "label": label,
        "probabilities": {
            index_to_class.get(k, str(k)): float(probs[k]) for k in range(len(probs))
        },
        "edges": edges,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_graphs(args) -> int:
    import csv as _csv

    model, meta = load_model(_require_file(args.model, "model checkpoint"))
    if model.config.variant != "full":
        raise ConfigError("graph export requires a full-variant model")
    prepared = load_prepared(args.data)
    _check_data_matches_model(model.config, prepared)
    x, _ = prepared.split(args.split)
    sample_ids = prepared.splits[args.split]
    z_stack = _collect_graphs(model, x)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_nodes = model.config.n_nodes
    pairs = PairIndex(n_nodes)

    with open(out / "per_sample_edges.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["sample_id", "src", "dst", "layer"])
        for row, sid in enumerate(sample_ids):
            on = np.argwhere(z_stack[row] > 0.5)
            for e, layer in on:
                writer.writerow([sid, int(pairs.src[e]), int(pairs.dst[e]), int(layer)])

    summary = representative_graph(z_stack, n_nodes)
    with open(out / "edge_frequencies.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["src", "dst", "layer", "frequency"])
        for e in range(pairs.n_pairs):
            for layer in range(summary.n_layers):
                writer.writerow(
                    [
                        int(pairs.src[e]),
                        int(pairs.dst[e]),
                        layer,
                        f"{summary.frequencies[e, layer]:.6f}",
                    ]
                )
    with open(out / "representative_edges.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["src", "dst", "layer"])
        for layer in range(summary.n_layers):
            for a, b in sorted(summary.layer_edges(layer)):
                writer.writerow([a, b, layer])
    print(
        f"graphs: wrote per-sample and representative edges for "
        f"{len(sample_ids)} samples to {out}"
    )
    return 0


def cmd_mc_dissim(args) -> int:
    payload = cfg.load_json(_require_file(args.config, "config"))
    cfg._check_schema_version(payload, str(args.config))
    cfg._check_keys(
        payload,
        {"schema_version", "synth", "experiment", "split_seed", "max_gap"},
        str(args.config),
    )
    synth_payload = dict(payload.get("synth", {}))
    synth_payload["schema_version"] = payload["schema_version"]
    parsed = cfg.parse_synth_config(synth_payload, where=f"{args.config}.synth")
    exp_payload = dict(payload.get("experiment", cfg.default_experiment_config()))
    exp_payload["schema_version"] = payload["schema_version"]
    model_cfg, train_cfg = cfg.parse_experiment_config(
        exp_payload, where=f"{args.config}.experiment"
    )
    split_seed = payload.get("split_seed", 0)

    g = parsed["graph"]
    graph = generate_graph(g["n_nodes"], g["target_edges"], g["seed"], g["generator"])
    samples = generate_dataset(
        graph, parsed["counts"], parsed["seed"], config=parsed["synth"]
    )
    from .synth import class_to_index

    cmap = class_to_index()
    x = np.stack([s.values for s in samples])
    y = np.array([cmap[s.label] for s in samples], dtype=np.int64)
    tr, va, te = split_indices(y, seed=split_seed)
    x_tr, stats = standardize(x[tr])

    class _Data:
        train_x = x_tr.astype(np.float32)
        train_y = y[tr]
        val_x = standardize(x[va], stats)[0].astype(np.float32)
        val_y = y[va]
        test_x = standardize(x[te], stats)[0].astype(np.float32)
        test_y = y[te]

    def runner(seed):
        run_cfg = TrainConfig(**{**train_cfg.to_dict(), "seed": int(seed)})
        model = build_model(model_cfg, seed=int(seed))
        train(model, _Data, run_cfg)
        z_stack = _collect_graphs(model, _Data.test_x)
        return representative_graph(z_stack, model_cfg.n_nodes)

    report = monte_carlo_dissimilarity(runner, args.runs, seeds=list(range(args.runs)))
    report.pop("d_matrices", None)
    _write_json(args.out, report)
    pooled = report.get("pooled_mean_d")
    pooled_str = f"{pooled:.4f}" if pooled is not None else "n/a"
    print(f"mc-dissim: {len(report['succeeded'])}/{args.runs} runs, pooled mean D {pooled_str}")
    return 0


def cmd_hpsearch(args) -> int:
    space_payload = cfg.load_json(_require_file(args.space, "search space"))
    space, budget, seed = cfg.parse_search_space(space_payload, where=str(args.space))
    if args.budget is not None:
        budget = args.budget
    if args.config is not None:
        exp_payload = cfg.load_json(_require_file(args.config, "config"))
        model_cfg, train_cfg = cfg.parse_experiment_config(
            exp_payload, where=str(args.config)
        )
    else:
        model_cfg, train_cfg = cfg.parse_experiment_config(
            cfg.default_experiment_config()
        )
    prepared = load_prepared(args.data)
    _check_data_matches_model(model_cfg, prepared)
    trials = random_search(space, prepared, budget, model_cfg, train_cfg, seed=seed)
    write_trials(args.out, trials)
    best = trials[0]
    print(
        f"hpsearch: {budget} trials, best val acc {best['val_acc']:.4f} "
        f"(trial {best['trial']})"
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentgrid",
        description=(
            "Latent interaction graphs and event identification for "
            "multi-sensor grid recordings."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--config", required=True, help="synth config JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="clean, split, and standardize a dataset")
    p.add_argument("--in", dest="in_dir", required=True, help="input dataset directory")
    p.add_argument("--out", required=True, help="output directory (may equal --in)")
    p.add_argument("--max-gap", type=int, default=DEFAULT_MAX_GAP)
    p.add_argument("--seed", type=int, default=0, help="split seed")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model on a preprocessed dataset")
    p.add_argument("--data", required=True, help="preprocessed dataset directory")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="run directory for checkpoint/history")
    p.add_argument("--verbose", action="store_true", help="print per-epoch lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and write a metrics report")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="preprocessed dataset directory")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--threshold", type=float, default=None, help="edge threshold r")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="classify one raw sample file (JSON to stdout)")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--sample", required=True, help="raw N*C*T float32 file")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("graphs", help="export per-sample and representative graphs")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="preprocessed dataset directory")
    p.add_argument("--out", required=True, help="output directory for CSVs")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_graphs)

    p = sub.add_parser("mc-dissim", help="repeated-training graph dissimilarity study")
    p.add_argument("--config", required=True, help="study config JSON")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=cmd_mc_dissim)

    p = sub.add_parser("hpsearch", help="random hyperparameter search")
    p.add_argument("--space", required=True, help="search space JSON")
    p.add_argument("--data", required=True, help="preprocessed dataset directory")
    p.add_argument("--budget", type=int, default=None, help="override space budget")
    p.add_argument("--config", default=None, help="base experiment config JSON")
    p.add_argument("--out", required=True, help="output trials JSON")
    p.set_defaults(func=cmd_hpsearch)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
