"""Command-line front end.

Exit codes: 0 on success, 1 on input or validation problems, 2 on usage
errors. Every file written starts with a run-manifest comment block so a
rerun with the same arguments is byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import classifier as clf
from . import dataset as ds
from . import engine, metrics, report
from .cover import (
    CommunityFileError,
    cover_from_label_sets,
    load_community_file,
    save_community_file,
)
from .graph import EdgeListError, extract_features, load_edge_list, save_edge_list

_INPUT_ERRORS = (
    EdgeListError,
    CommunityFileError,
    ds.ManifestError,
    clf.ModelFileError,
    ValueError,
    OSError,
)

_OBJECTIVE_MODES = {
    "qe": engine.ObjectiveMode.FORCE_QE,
    "wocc": engine.ObjectiveMode.FORCE_WOCC,
    "threshold": engine.ObjectiveMode.THRESHOLD,
    "model": engine.ObjectiveMode.MODEL,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        ns.func(ns)
        return 0
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("--seed", type=int, default=0, help="base random seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress chatter")

    parser = argparse.ArgumentParser(
        prog="nectarml",
        description="Overlapping community detection with a learned objective selector.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="detect communities in one graph")
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--beta", type=float, required=True, help="multi-membership looseness, >= 1")
    p.add_argument("--alpha", type=float, default=0.8, help="merge overlap ratio")
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--objective", choices=sorted(_OBJECTIVE_MODES), default="threshold")
    p.add_argument("--tr-rate", type=float, default=5.0, help="triangle-rate threshold")
    p.add_argument("--model", help="model file, required with --objective model")
    p.add_argument("--output", required=True, help="cover file to write")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", parents=[common], help="score a detected cover against truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--detected", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--best-match", action="store_true",
                   help="score only the best-matching detected community per truth community")
    p.add_argument("--format", choices=("csv", "tsv"), default="csv")
    p.add_argument("--output", help="table file; stdout when omitted")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("prune", parents=[common], help="restrict a graph to nodes covered by truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("label", parents=[common], help="build a labeled dataset from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--betas", default=",".join(str(b) for b in ds.DEFAULT_BETAS),
                   help="comma-separated beta grid")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--split-threshold", type=int, default=50000,
                   help="node count at or below which a network lands in the train split")
    p.add_argument("--best-match", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", parents=[common], help="cross-validate and fit a selector model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--metric", choices=[m.value for m in metrics.MetricKind], default="average")
    p.add_argument("--grid", required=True, help="CSV of hyperparameter points")
    p.add_argument("--learner", choices=[k.value for k in clf.LearnerKind], default="extra_trees")
    p.add_argument("--split", choices=("train", "test", "all"), default="train")
    p.add_argument("--unweighted-train", action="store_true",
                   help="ignore row weights when fitting")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="pick the objective for one graph")
    p.add_argument("--model", required=True)
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="score a model on a labeled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--weighted", action="store_true", help="weight recalls by row weight")
    p.add_argument("--split", choices=("train", "test", "all"), default="all")
    p.add_argument("--format", choices=("csv", "tsv"), default="csv")
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("feature-ig", parents=[common], help="per-feature information gain")
    p.add_argument("--dataset", required=True)
    p.add_argument("--metric", choices=[m.value for m in metrics.MetricKind], default="average")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--format", choices=("csv", "tsv"), default="csv")
    p.add_argument("--output", help="table file; a .png chart lands next to it")
    p.set_defaults(func=cmd_feature_ig)

    p = sub.add_parser("compare", parents=[common],
                       help="learned selector vs fixed rule, cell by cell")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--tr-rate", type=float, default=5.0)
    p.add_argument("--format", choices=("csv", "tsv"), default="csv")
    p.add_argument("--output", help="table file; a .png heatmap lands next to it")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", parents=[common], help="write a planted test network")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--communities", type=int, required=True)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--p-in", type=float, required=True)
    p.add_argument("--p-out", type=float, required=True)
    p.add_argument("--out-graph", required=True)
    p.add_argument("--out-truth", required=True)
    p.set_defaults(func=cmd_generate)

    return parser


def _manifest_lines(ns, *names) -> list[str]:
    pairs = [(name.replace("_", "-"), getattr(ns, name)) for name in names]
    pairs.append(("seed", ns.seed))
    return report.RunManifest.build(ns.command, pairs).header_lines()


def _say(ns, text: str) -> None:
    if not ns.quiet:
        print(text, file=sys.stderr)


def _label_sort_key(label: str):
    # numeric labels sort numerically so "10" lands after "2"
    try:
        return (0, int(label), "")
    except ValueError:
        return (1, 0, label)


def _emit_table(ns, columns, rows, header_lines) -> None:
    if ns.output:
        report.write_table(ns.output, columns, rows, fmt=ns.format, header_lines=header_lines)
        _say(ns, f"wrote {ns.output}")
    else:
        report.write_table(sys.stdout, columns, rows, fmt=ns.format, header_lines=header_lines)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_detect(ns) -> None:
    g = load_edge_list(ns.graph)
    mode = _OBJECTIVE_MODES[ns.objective]
    model = clf.load_model(ns.model) if ns.model else None
    if mode is engine.ObjectiveMode.MODEL and model is None:
        raise ValueError("--objective model requires --model")
    config = engine.EngineConfig(
        beta=ns.beta, alpha=ns.alpha, max_iter=ns.max_iter, objective_mode=mode,
        tr_rate=ns.tr_rate, model_path=ns.model, rng_seed=ns.seed,
    )
    result = engine.run(g, config, classifier=model)
    communities = [
        sorted(g.to_labels(sorted(c)), key=_label_sort_key)
        for c in result.cover.node_sets()
    ]
    lines = _manifest_lines(ns, "graph", "beta", "alpha", "max_iter", "objective",
                            "tr_rate", "model", "output")
    save_community_file(ns.output, communities, header_lines=lines)
    _say(ns, f"objective={result.objective_chosen.value} iterations={result.iterations_used} "
             f"converged={result.converged} communities={len(result.cover)} "
             f"value={result.objective_value:.6f}")


def cmd_evaluate(ns) -> None:
    g = load_edge_list(ns.graph)
    truth = cover_from_label_sets(load_community_file(ns.truth), g)
    detected = cover_from_label_sets(load_community_file(ns.detected), g)
    rep = metrics.score(detected, truth, set(range(g.n)), use_best_match=ns.best_match)
    columns = ("onmi", "omega", "avg_f1", "metrics_average")
    rows = [[rep.onmi, rep.omega, rep.avg_f1, rep.metrics_average]]
    lines = _manifest_lines(ns, "truth", "detected", "graph", "best_match", "format")
    _emit_table(ns, columns, rows, lines)


def cmd_prune(ns) -> None:
    g = load_edge_list(ns.graph)
    pruned = ds.prune_graph(g, load_community_file(ns.truth))
    lines = _manifest_lines(ns, "truth", "graph", "output")
    save_edge_list(ns.output, pruned, header_lines=lines)
    _say(ns, f"kept {pruned.n} of {g.n} nodes, {pruned.m} of {g.m} edges")


def cmd_label(ns) -> None:
    betas = ds.BetaGrid(tuple(float(tok) for tok in ns.betas.split(",") if tok.strip()))
    base = engine.EngineConfig(
        beta=betas.values[0], alpha=ns.alpha, max_iter=ns.max_iter, rng_seed=ns.seed,
    )
    lines = _manifest_lines(ns, "manifest", "betas", "alpha", "max_iter",
                            "split_threshold", "best_match", "workers", "out")
    progress = None if ns.quiet else lambda rid: print(f"labeled {rid}", file=sys.stderr)
    written, failures = ds.build_dataset(
        ns.manifest, betas, ns.out, base,
        workers=ns.workers, split_threshold=ns.split_threshold,
        use_best_match=ns.best_match, header_lines=lines, progress=progress,
    )
    _say(ns, f"wrote {written} rows to {ns.out}" +
             (f" ({len(failures)} networks failed)" if failures else ""))


def cmd_train(ns) -> None:
    kind = metrics.MetricKind(ns.metric)
    rows = ds.load_dataset(ns.dataset, metric=kind)
    if ns.split != "all":
        rows = [r for r in rows if r.split == ns.split]
    if not rows:
        raise ValueError(f"no {ns.metric} rows in the {ns.split} split of {ns.dataset}")
    grid = clf.parse_grid_file(ns.grid)
    learner = clf.LearnerKind(ns.learner)
    weighted = not ns.unweighted_train
    cv = clf.cross_validate(rows, grid, seed=ns.seed, learner=learner,
                            metric=ns.metric, weighted_train=weighted)
    model = clf.train(rows, cv.best, seed=ds.derive_seed(ns.seed, "final-fit"),
                      learner=learner, metric=ns.metric, weighted=weighted)
    lines = _manifest_lines(ns, "dataset", "metric", "grid", "learner", "split",
                            "unweighted_train", "out")
    clf.save_model(ns.out, model, header_lines=lines)
    hp = cv.best
    _say(ns, f"best point: n_estimators={hp.n_estimators} max_depth={hp.max_depth} "
             f"min_samples_split={hp.min_samples_split} min_samples_leaf={hp.min_samples_leaf}")
    _say(ns, "fold balanced accuracy: "
             + " ".join(f"{r.balanced_accuracy:.6f}" for r in cv.fold_reports)
             + f" (mean {cv.mean_ba:.6f}, std {cv.std_ba:.6f})")
    _say(ns, f"wrote {ns.out}")


def cmd_predict(ns) -> None:
    model = clf.load_model(ns.model)
    g = load_edge_list(ns.graph)
    choice, p_wocc = clf.predict(model, extract_features(g))
    print(f"{choice.value} {p_wocc:.6f}")


def cmd_eval(ns) -> None:
    model = clf.load_model(ns.model)
    rows = ds.load_dataset(ns.dataset, metric=metrics.MetricKind(model.metric))
    if ns.split != "all":
        rows = [r for r in rows if r.split == ns.split]
    if not rows:
        raise ValueError(f"no {model.metric} rows in the {ns.split} split of {ns.dataset}")
    rep = clf.evaluate(model, rows, weighted=ns.weighted)
    columns = ("metric", "split", "rows", "recall_qe", "recall_wocc",
               "balanced_accuracy", "weighted")
    rows_out = [[
        model.metric, ns.split, len(rows),
        "" if rep.recall_qe is None else rep.recall_qe,
        "" if rep.recall_wocc is None else rep.recall_wocc,
        rep.balanced_accuracy, rep.weighted,
    ]]
    lines = _manifest_lines(ns, "model", "dataset", "weighted", "split", "format")
    _emit_table(ns, columns, rows_out, lines)


def cmd_feature_ig(ns) -> None:
    rows = ds.load_dataset(ns.dataset, metric=metrics.MetricKind(ns.metric))
    if not rows:
        raise ValueError(f"no {ns.metric} rows in {ns.dataset}")
    gains = clf.information_gain(rows, bins=ns.bins)
    columns = ("feature", "information_gain")
    table_rows = [[name, gains[name]] for name in sorted(gains, key=lambda n: -gains[n])]
    lines = _manifest_lines(ns, "dataset", "metric", "bins", "format")
    _emit_table(ns, columns, table_rows, lines)
    if ns.output:
        fig_path = Path(ns.output).with_suffix(".png")
        report.render_ig_bars(fig_path, gains)
        _say(ns, f"wrote {fig_path}")


def cmd_compare(ns) -> None:
    model = clf.load_model(ns.model)
    rows = ds.load_dataset(ns.dataset, metric=metrics.MetricKind(model.metric))
    if not rows:
        raise ValueError(f"no {model.metric} rows in {ns.dataset}")
    cells = report.compare_selectors(rows, model, tr_rate=ns.tr_rate)
    columns, table_rows = report.comparison_table(cells)
    lines = _manifest_lines(ns, "dataset", "model", "tr_rate", "format")
    _emit_table(ns, columns, table_rows, lines)
    if ns.output:
        fig_path = Path(ns.output).with_suffix(".png")
        report.render_compare_heatmap(fig_path, cells)
        _say(ns, f"wrote {fig_path}")


def cmd_generate(ns) -> None:
    g, cover = ds.generate_test_network(
        ns.nodes, ns.communities, ns.overlap, ns.p_in, ns.p_out, seed=ns.seed,
    )
    # an edge list cannot carry isolated nodes, so drop them from the truth
    # side as well to keep the two files consistent
    isolated = {v for v in range(g.n) if g.degree(v) == 0}
    communities = []
    for members in cover.node_sets():
        kept = sorted(set(members) - isolated)
        if kept:
            communities.append(g.to_labels(kept))
    lines = _manifest_lines(ns, "nodes", "communities", "overlap", "p_in", "p_out",
                            "out_graph", "out_truth")
    save_edge_list(ns.out_graph, g, header_lines=lines)
    save_community_file(ns.out_truth, communities, header_lines=lines)
    _say(ns, f"wrote {ns.out_graph} ({g.n - len(isolated)} nodes, {g.m} edges) and "
             f"{ns.out_truth} ({len(communities)} communities"
             + (f", {len(isolated)} isolated nodes dropped)" if isolated else ")"))


if __name__ == "__main__":
    sys.exit(main())
