"""Command-line pipeline: corpora in, embeddings and scored predictions out.

Stages mirror the library: synth / gen-qa-pairs / extract-features /
build-graph / stats / train / predict / evaluate / sweep-eta.  Report
stages (train, evaluate, sweep-eta) render PNG figures next to their
delimited outputs.

Flags mirror the owning config's field names one-to-one in kebab-case.  A
--config JSON file holds the same settings grouped in sections ("synth",
"pairs", "features", "train", "inference"); flags given explicitly on the
command line override the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

from relqa.corpus import (
    CorpusError,
    QACorpus,
    load_qa_corpus,
    load_re_corpus,
    save_qa_corpus,
    save_re_corpus,
)
from relqa.evaluation import (
    SynthConfig,
    evaluate,
    generate_synthetic,
    load_labels,
    predictions_to_labels,
    sweep_eta,
    write_labels,
)
from relqa.features import BrownClusterMap, FeatureConfig, extract_features
from relqa.graph import (
    GraphError,
    build_graph,
    load_graph,
    save_graph,
    shared_feature_stats,
)
from relqa.inference import InferenceConfig, predict_corpus, write_predictions
from relqa.qapairs import PairGenConfig, generate_pairs
from relqa.training import (
    TrainConfig,
    TrainingDivergedError,
    load_model,
    save_model,
    train,
    write_training_log,
)

EMPTY_QA = QACorpus(sentences={}, questions=(), answers=(), pairs=())

CONFIG_SECTIONS = {
    "synth": SynthConfig,
    "pairs": PairGenConfig,
    "features": FeatureConfig,
    "train": TrainConfig,
    "inference": InferenceConfig,
}


def _explicit_dests(parser: argparse.ArgumentParser, argv: list[str]) -> set[str]:
    """Dests of options literally present on the command line."""
    seen = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    out = set()
    for action in parser._actions:
        if any(opt in seen for opt in action.option_strings):
            out.add(action.dest)
    return out


def _config_section(args, section: str) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config file must hold a JSON object")
    unknown = set(raw) - set(CONFIG_SECTIONS)
    if unknown:
        raise ValueError(f"{path}: unknown config sections {sorted(unknown)}")
    sec = raw.get(section, {})
    allowed = {f.name for f in fields(CONFIG_SECTIONS[section])}
    bad = set(sec) - allowed
    if bad:
        raise ValueError(f"{path}: unknown keys in section {section!r}: {sorted(bad)}")
    return dict(sec)


def _resolve(args, parser, argv, section: str) -> dict:
    """Config-file section merged with flags; explicit flags win."""
    merged = _config_section(args, section)
    explicit = _explicit_dests(parser, argv)
    for f in fields(CONFIG_SECTIONS[section]):
        if not hasattr(args, f.name):
            continue
        v = getattr(args, f.name)
        if f.name in explicit:
            merged[f.name] = v
        elif f.name not in merged and v is not None:
            merged[f.name] = v
    return merged


def _feature_config(args, parser, argv) -> FeatureConfig:
    values = _resolve(args, parser, argv, "features")
    lengths = values.get("prefix_lengths", (4, 8, 12))
    if isinstance(lengths, str):
        lengths = tuple(int(x) for x in lengths.split(",") if x.strip())
    values["prefix_lengths"] = tuple(lengths)
    return FeatureConfig(**values)


def _brown(args) -> BrownClusterMap | None:
    return BrownClusterMap.load(args.brown) if args.brown else None


def _add_feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=3, help="collocation window size")
    p.add_argument("--prefix-lengths", default="4,8,12", help="cluster prefix lengths, comma-separated")
    p.add_argument("--brown", default=None, help="word cluster map file")
    p.add_argument("--config", default=None, help="JSON settings file")


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# stage implementations


def _cmd_synth(args, parser, argv) -> int:
    values = _resolve(args, parser, argv, "synth")
    for key in ("num_types", "num_mentions"):
        if values.get(key) is None:
            parser.error(f"--{key.replace('_', '-')} is required (flag or config file)")
    cfg = SynthConfig(**values)
    data = generate_synthetic(cfg)
    out = _outdir(args.out)
    save_re_corpus(data.train, out / "train")
    save_re_corpus(data.test, out / "test")
    save_qa_corpus(data.qa, out / "qa")
    write_labels(data.gold, out / "gold.tsv")
    print(
        f"synthetic corpus: {len(data.train.mentions)} train mentions, "
        f"{len(data.test.mentions)} test mentions, "
        f"{len(data.qa.questions)} questions -> {out}"
    )
    return 0


def _cmd_gen_qa_pairs(args, parser, argv) -> int:
    corpus = load_qa_corpus(args.qa)
    cfg = PairGenConfig(**_resolve(args, parser, argv, "pairs"))
    paired, report = generate_pairs(corpus, cfg)
    save_qa_corpus(paired, _outdir(args.out))
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_extract_features(args, parser, argv) -> int:
    cfg = _feature_config(args, parser, argv)
    brown = _brown(args)
    rows = []
    if args.re:
        corpus = load_re_corpus(args.re)
        for m in corpus.mentions:
            fv = extract_features(m.m1, m.m2, corpus.sentence_of(m), cfg, brown)
            rows.extend((m.id, f, c) for f, c in sorted(fv))
    else:
        corpus = load_qa_corpus(args.qa)
        if not corpus.pairs:
            raise CorpusError("QA corpus has no pairs; run gen-qa-pairs first")
        for p in corpus.pairs:
            fv = extract_features(p.m1, p.m2, corpus.sentence_of(p), cfg, brown)
            rows.extend((p.id, f, c) for f, c in sorted(fv))
    with open(args.out, "w", encoding="utf-8") as fh:
        for oid, feat, count in rows:
            fh.write(f"{oid}\t{feat}\t{count}\n")
    print(f"{len(rows)} feature rows -> {args.out}")
    return 0


def _cmd_build_graph(args, parser, argv) -> int:
    re_corpus = load_re_corpus(args.re)
    qa_corpus = load_qa_corpus(args.qa) if args.qa else EMPTY_QA
    graph = build_graph(re_corpus, qa_corpus, _feature_config(args, parser, argv), _brown(args))
    save_graph(graph, _outdir(args.out))
    print(
        f"graph: {graph.num_mentions} mentions, {graph.num_pairs} pairs, "
        f"{graph.num_features} features, {len(graph.re_edges)} + {len(graph.qa_edges)} edges -> {args.out}"
    )
    return 0


def _cmd_stats(args) -> int:
    graph = load_graph(args.graph)
    stats = shared_feature_stats(graph)
    text = json.dumps(stats.as_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_train(args, parser, argv) -> int:
    values = _resolve(args, parser, argv, "train")
    if values.get("alpha") is None:
        parser.error("--alpha is required (flag or config file)")
    cfg = TrainConfig(**values)
    graph = load_graph(args.graph)
    result = train(graph, cfg)
    out = _outdir(args.out)
    save_model(result.store, out / "model.txt")
    write_training_log(result.log, out / "training_log.csv")
    from relqa.report import plot_training_curve

    plot_training_curve(result.log, out / "training_curve.png")
    last = result.log[-1]
    summary = {
        "config": asdict(cfg),
        "iterations": last.iteration,
        "final": {"O": last.O, "O_Z": last.O_Z, "O_QA": last.O_QA},
        "converged": result.stats.converged,
        "phases": [
            {"phase": p.phase, "iterations": p.iterations, "stop_reason": p.stop_reason}
            for p in result.stats.phases
        ],
        "steps": {
            "zf": result.stats.zf_steps,
            "partial_label": result.stats.pl_steps,
            "pf": result.stats.pf_steps,
            "qa_pairwise": result.stats.qa_steps,
            "qa_noop_iterations": result.stats.qa_noop_iterations,
        },
    }
    (out / "train_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"trained {last.iteration} iterations, O={last.O:.6g} "
        f"({'converged' if result.stats.converged else 'iteration cap'}) -> {out}"
    )
    return 0


def _cmd_predict(args, parser, argv) -> int:
    store = load_model(args.model)
    corpus = load_re_corpus(args.re)
    infer_cfg = InferenceConfig(**_resolve(args, parser, argv, "inference"))
    preds = predict_corpus(corpus, store, _feature_config(args, parser, argv), infer_cfg, _brown(args))
    write_predictions(preds, args.out)
    committed = sum(1 for p in preds if p.type_id != 0)
    print(f"{len(preds)} predictions ({committed} committed) -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    predicted = load_labels(args.predictions)
    gold = load_labels(args.gold)
    report = evaluate(predicted, gold)
    out = _outdir(args.out)
    (out / "metrics.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out / "metrics.txt").write_text(report.format_table() + "\n", encoding="utf-8")
    from relqa.report import plot_per_type_f1

    plot_per_type_f1(report, out / "per_type_f1.png")
    print(report.format_table())
    return 0


def _cmd_sweep_eta(args, parser, argv) -> int:
    store = load_model(args.model)
    corpus = load_re_corpus(args.re)
    gold = load_labels(args.gold)
    etas = [float(x) for x in args.etas.split(",") if x.strip()]
    if not etas:
        raise ValueError("--etas must list at least one threshold")
    infer_values = _resolve(args, parser, argv, "inference")
    infer_values["eta"] = 0.0  # sweep rethresholds the zero-threshold run
    base_cfg = InferenceConfig(**infer_values)
    preds = predict_corpus(corpus, store, _feature_config(args, parser, argv), base_cfg, _brown(args))
    points = sweep_eta(preds, gold, etas)
    out = _outdir(args.out)
    with open(out / "sweep.tsv", "w", encoding="utf-8") as fh:
        fh.write("eta\tprecision\trecall\tf1\tpredicted_non_none\n")
        for pt in points:
            r = pt.report
            fh.write(f"{pt.eta!r}\t{r.precision!r}\t{r.recall!r}\t{r.f1!r}\t{r.predicted_non_none}\n")
    from relqa.report import plot_eta_sweep

    plot_eta_sweep(points, out / "sweep.png")
    for pt in points:
        r = pt.report
        print(f"eta={pt.eta:g}: P={r.precision:.4f} R={r.recall:.4f} F1={r.f1:.4f}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="relqa",
        description="Joint relation-mention / QA-pair embedding pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", formatter_class=fmt, help="generate a synthetic corpus trio")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--num-types", type=int, default=None, help="target relation types (required)")
    p.add_argument("--num-mentions", type=int, default=None, help="training relation mentions (required)")
    p.add_argument("--num-questions", type=int, default=0, help="QA questions")
    p.add_argument("--vocab-size", type=int, default=400)
    p.add_argument("--features-per-mention", type=int, default=8)
    p.add_argument("--fp-rate", type=float, default=0.0, help="spurious candidate type rate")
    p.add_argument("--fn-rate", type=float, default=0.0, help="dropped link rate")
    p.add_argument("--qa-share", type=float, default=1.0, help="type pool fraction reused by QA")
    p.add_argument("--confusion-rate", type=float, default=0.0,
                   help="signal words drawn from the sibling type's pool")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="JSON settings file")

    p = sub.add_parser("gen-qa-pairs", formatter_class=fmt, help="mine entity-mention pairs from QA sentences")
    p.add_argument("--qa", required=True, help="QA corpus directory")
    p.add_argument("--out", required=True, help="output QA corpus directory (adds pairs.jsonl)")
    p.add_argument(
        "--neg-pairs-per-sentence", type=int, default=10, help="negative pairs per negative sentence"
    )
    p.add_argument(
        "--sample-negatives-from-positives",
        action="store_true",
        help="draw negatives from positive sentences instead (excluding the positive pair)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="JSON settings file")

    p = sub.add_parser("extract-features", formatter_class=fmt, help="dump the feature multiset per object")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--re", help="RE corpus directory")
    src.add_argument("--qa", help="QA corpus directory with pairs")
    p.add_argument("--out", required=True, help="output TSV file")
    _add_feature_flags(p)

    p = sub.add_parser("build-graph", formatter_class=fmt, help="build the shared co-occurrence graph")
    p.add_argument("--re", required=True, help="RE corpus directory")
    p.add_argument("--qa", default=None, help="QA corpus directory with pairs (omit for RE-only)")
    p.add_argument("--out", required=True, help="graph output directory")
    _add_feature_flags(p)

    p = sub.add_parser("stats", formatter_class=fmt, help="shared-feature statistics of a graph")
    p.add_argument("--graph", required=True, help="graph directory")
    p.add_argument("--out", default=None, help="optional JSON output file")

    p = sub.add_parser("train", formatter_class=fmt, help="learn embeddings from a graph")
    p.add_argument("--graph", required=True, help="graph directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None, help="JSON settings file")
    p.add_argument("--alpha", type=float, default=None, help="initial learning rate (required here or in config)")
    p.add_argument("--d", type=int, default=50, help="embedding dimension")
    p.add_argument("--lam", type=float, default=1e-4, help="L2 strength")
    p.add_argument("--negatives", type=int, default=3, help="noise samples per edge")
    p.add_argument("--re-qa-mix", type=float, default=0.5, help="probability of an RE iteration")
    p.add_argument("--max-iterations", type=int, default=200_000)
    p.add_argument("--convergence-tol", type=float, default=1e-4)
    p.add_argument("--objective-check-every", type=int, default=5_000)
    p.add_argument("--batch-size", type=int, default=1, help="sampled terms per component step")
    p.add_argument("--mode", choices=("joint", "qa_then_re", "re_then_qa"), default="joint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help=">1 trades determinism for speed")

    p = sub.add_parser("predict", formatter_class=fmt, help="predict relation types for a test corpus")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--re", required=True, help="test RE corpus directory")
    p.add_argument("--out", required=True, help="predictions TSV file")
    p.add_argument("--eta", type=float, default=0.35, help="commitment threshold")
    p.add_argument("--similarity", choices=("cosine", "dot"), default="cosine")
    _add_feature_flags(p)

    p = sub.add_parser("evaluate", formatter_class=fmt, help="score predictions against gold labels")
    p.add_argument("--predictions", required=True, help="predictions TSV")
    p.add_argument("--gold", required=True, help="gold TSV (mention id, type name)")
    p.add_argument("--out", required=True, help="report directory")

    p = sub.add_parser("sweep-eta", formatter_class=fmt, help="score one model across thresholds")
    p.add_argument("--model", required=True)
    p.add_argument("--re", required=True, help="test RE corpus directory")
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--etas", default="0.0,0.35,0.7", help="comma-separated thresholds")
    p.add_argument("--similarity", choices=("cosine", "dot"), default="cosine")
    _add_feature_flags(p)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args, parser, argv)
        if args.command == "gen-qa-pairs":
            return _cmd_gen_qa_pairs(args, parser, argv)
        if args.command == "extract-features":
            return _cmd_extract_features(args, parser, argv)
        if args.command == "build-graph":
            return _cmd_build_graph(args, parser, argv)
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "train":
            return _cmd_train(args, parser, argv)
        if args.command == "predict":
            return _cmd_predict(args, parser, argv)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        return _cmd_sweep_eta(args, parser, argv)
    except (CorpusError, GraphError, TrainingDivergedError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
