"""Command line entry point.

    provtrace <command> --config <path> [--seed N] [--out DIR]

Stage commands (ingest, reduce, walk, embed, seq, train, fit, score, report)
run one pipeline step against the single train/val/test split and cache their
artifacts; `eval` runs the full cross-validated pipeline; `synth` materializes
the built-in synthetic benchmark or a scenario file.

Exit codes: 0 success, 1 runtime failure, 2 config error, 3 missing prerequisite.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, pipeline, synth
from .config import PipelineConfig, load_config, write_template
from .errors import ConfigError, MissingArtifactError, ProvtraceError
from .ingest import emit_jsonl
from .manifest import RunManifest

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3


def _load(args: argparse.Namespace) -> PipelineConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _manifest(cfg: PipelineConfig) -> RunManifest:
    return RunManifest.load_or_new(Path(cfg.out_dir), cfg.snapshot())


def _split(manifest: RunManifest, cfg: PipelineConfig) -> pipeline.Split:
    ingest_dir = pipeline.require_stage(manifest, "ingest", "split", "ingest")
    labels = pipeline.load_labels(ingest_dir / "labels.json")
    return pipeline.linear_split(labels, cfg)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_init(args: argparse.Namespace) -> int:
    path = args.out or "provtrace.ini"
    write_template(path)
    print(f"wrote config template to {path}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out or "data/synthetic")
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    if args.scenario:
        spec = synth.load_scenario(args.scenario)
        if args.seed is not None:
            spec.seed = args.seed
        graphs = synth.generate(spec, args.count)
    else:
        graphs = synth.default_benchmark(seed)
        benign_spec, attack_spec = synth.benchmark_specs(seed)
        synth.save_scenario(benign_spec, out / "benign.scenario.ini")
        synth.save_scenario(attack_spec, out / "attack.scenario.ini")
    with open(out / "edges.jsonl", "w", encoding="utf-8") as fh:
        for line in emit_jsonl(graphs):
            fh.write(line)
            fh.write("\n")
    pipeline.write_labels({g.graph_id: g.label for g in graphs}, out / "labels.json")
    print(f"wrote {len(graphs)} graphs to {out / 'edges.jsonl'}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    res = pipeline.stage_ingest(manifest, cfg)
    manifest.save()
    print(f"ingest: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_reduce(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    ingest_dir = pipeline.require_stage(manifest, "ingest", "reduce", "ingest")
    res = pipeline.stage_reduce(manifest, cfg, ingest_dir / "graphs.jsonl")
    manifest.save()
    print(f"reduce: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_walk(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    reduce_dir = pipeline.require_stage(manifest, "reduce", "walk", "reduce")
    split = _split(manifest, cfg)
    res = pipeline.stage_walk(manifest, cfg, "linear",
                              reduce_dir / "reduced.jsonl", split.train)
    manifest.save()
    print(f"walk: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_embed(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    walk_dir = pipeline.require_stage(manifest, "linear/walk", "embed", "walk")
    res = pipeline.stage_embed(manifest, cfg, "linear", walk_dir / "walks.txt")
    manifest.save()
    print(f"embed: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_seq(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    reduce_dir = pipeline.require_stage(manifest, "reduce", "seq", "reduce")
    embed_dir = pipeline.require_stage(manifest, "linear/embed", "seq", "embed")
    res = pipeline.stage_seq(manifest, cfg, "linear", reduce_dir / "reduced.jsonl",
                             embed_dir / "embedding.json")
    manifest.save()
    print(f"seq: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    seq_dir = pipeline.require_stage(manifest, "linear/seq", "train", "seq")
    split = _split(manifest, cfg)
    res = pipeline.stage_train(manifest, cfg, "linear", seq_dir / "sequences.bin",
                               split.train)
    manifest.save()
    print(f"train: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    seq_dir = pipeline.require_stage(manifest, "linear/seq", "fit", "seq")
    train_dir = pipeline.require_stage(manifest, "linear/train", "fit", "train")
    split = _split(manifest, cfg)
    feats = pipeline.stage_features(manifest, cfg, "linear",
                                    seq_dir / "sequences.bin",
                                    train_dir / "model.ckpt")
    res = pipeline.stage_fit(manifest, cfg, "linear", feats.file("features.bin"),
                             split.train, split.val)
    manifest.save()
    print(f"fit: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    feats_dir = pipeline.require_stage(manifest, "linear/features", "score", "fit")
    fit_dir = pipeline.require_stage(manifest, f"linear/k{cfg.k}/fit", "score", "fit")
    split = _split(manifest, cfg)
    res = pipeline.stage_score(manifest, cfg, "linear", feats_dir / "features.bin",
                               fit_dir / "cluster.json", split.test)
    manifest.save()
    print(f"score: {'cache hit' if res.cache_hit else 'built'} -> {res.dir}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = _manifest(cfg)
    score_dir = pipeline.require_stage(manifest, f"linear/k{cfg.k}/score",
                                       "report", "score")
    fit_dir = pipeline.require_stage(manifest, f"linear/k{cfg.k}/fit",
                                     "report", "fit")
    res = pipeline.stage_report(manifest, cfg, "linear", score_dir / "scores.json",
                                fit_dir / "cluster.json")
    manifest.save()
    report = json.loads(res.file("report.json").read_text(encoding="utf-8"))
    print(f"report: auc_pr={report.get('auc_pr')} threshold={report.get('threshold')}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load(args)
    sweep: tuple[int, int] | None = None
    if args.sweep_k is not None:
        if len(args.sweep_k) == 0:
            sweep = (cfg.sweep_k_min, cfg.sweep_k_max)
        elif len(args.sweep_k) == 2:
            if args.sweep_k[0] > args.sweep_k[1] or args.sweep_k[0] < 2:
                raise ConfigError(f"bad sweep range {args.sweep_k}")
            sweep = (args.sweep_k[0], args.sweep_k[1])
        else:
            raise ConfigError("--sweep-k takes zero or two integers")
    manifest = pipeline.run_eval(cfg, cfg.out_dir, sweep=sweep)
    results = manifest.data["results"]
    if sweep is not None:
        for k, auc in sorted(results["mean_auc_pr_by_k"].items(), key=lambda kv: int(kv[0])):
            print(f"K={k}: mean AUC-PR={auc:.4f}")
    print(f"eval: mean AUC-PR={results['mean_auc_pr']:.4f} "
          f"over {cfg.folds} folds (K={cfg.k})")
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifest = RunManifest.load(Path(cfg.out_dir))
    violations = pipeline.audit_one_class(manifest)
    if violations:
        print(f"one-class AUDIT FAILED: {len(violations)} attack graph(s) in "
              f"training/validation: {violations[:10]}")
        return EXIT_FAILURE
    print("one-class audit passed: no attack graphs in any training or validation set")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provtrace",
        description="Provenance-graph anomaly detection pipeline",
    )
    parser.add_argument("--version", action="version", version=f"provtrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="pipeline config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default=None, help="override output directory")

    handlers = {
        "ingest": cmd_ingest, "reduce": cmd_reduce, "walk": cmd_walk,
        "embed": cmd_embed, "seq": cmd_seq, "train": cmd_train, "fit": cmd_fit,
        "score": cmd_score, "report": cmd_report, "audit": cmd_audit,
    }
    for name, handler in handlers.items():
        p = sub.add_parser(name, help=f"run the {name} stage")
        common(p)
        p.set_defaults(func=handler)

    p = sub.add_parser("eval", help="five-fold cross-validated evaluation")
    common(p)
    p.add_argument("--sweep-k", nargs="*", type=int, default=None,
                   metavar=("KMIN", "KMAX"),
                   help="sweep cluster count K (no values: use config range)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", default=None, help="dataset output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scenario", default=None, help="scenario spec file (INI)")
    p.add_argument("--count", type=int, default=10,
                   help="graphs to generate from --scenario")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("init", help="write a commented config template")
    p.add_argument("--out", default=None, help="template path")
    p.set_defaults(func=cmd_init)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ProvtraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
