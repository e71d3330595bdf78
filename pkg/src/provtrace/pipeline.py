"""Stage orchestration: content-addressed artifacts, splits, cross-validation.

Every stage writes into out/stages/<name>-<key>/ where the key hashes the
stage's input checksums and the relevant config subset; re-running with
unchanged inputs is a cache hit and a rebuilt key otherwise. The manifest
records keys, artifact checksums, split membership (for the one-class audit),
and metrics.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import autoencoder, detect, tensorio
from .config import PipelineConfig, config_digest, derive_seed, parse_id_ranges, \
    FORMAT_STREAMSPOT
from .errors import ConfigError, MissingArtifactError
from .ingest import ProvenanceGraph, emit_jsonl, graph_stats, parse_jsonl, \
    parse_reduced_jsonl, parse_streamspot, LABEL_ATTACK, LABEL_BENIGN, LABEL_UNLABELED
from .manifest import RunManifest, sha256_file
from .reduce import ReducedGraph, cpr_reduce, reduction_ratio
from .sequences import FeatureSequence, build_sequence
from .skipgram import EmbeddingTable, SkipGramConfig, train_skipgram
from .walks import WalkConfig, WalkCorpus, generate_corpus


# ---------------------------------------------------------------------------
# Stage runner
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class StageResult:
    name: str
    key: str
    dir: Path
    cache_hit: bool

    def file(self, filename: str) -> Path:
        return self.dir / filename


def run_stage(manifest: RunManifest, name: str, inputs: list[Path], params: dict,
              build: Callable[[Path], None]) -> StageResult:
    for p in inputs:
        if not Path(p).exists():
            raise MissingArtifactError(f"stage {name}: missing input {p}")
    key_material = {
        "stage": name,
        "inputs": [sha256_file(p) for p in inputs],
        "params": params,
    }
    key = config_digest(key_material)[:16]
    leaf = name.split("/")[-1]
    stage_dir = manifest.out_dir / "stages" / f"{name.replace('/', '_')}-{key}"
    marker = stage_dir / "_stage.json"

    cache_hit = False
    if marker.exists():
        try:
            cache_hit = json.loads(marker.read_text())["key"] == key
        except (json.JSONDecodeError, KeyError):
            cache_hit = False
    if not cache_hit:
        stage_dir.mkdir(parents=True, exist_ok=True)
        build(stage_dir)
        marker.write_text(json.dumps({"key": key, "stage": leaf}, sort_keys=True))
    outputs = [p for p in sorted(stage_dir.iterdir()) if p.name != "_stage.json"]
    manifest.record_stage(name, key, stage_dir, outputs, built=not cache_hit)
    return StageResult(name=name, key=key, dir=stage_dir, cache_hit=cache_hit)


def require_stage(manifest: RunManifest, name: str, needed_by: str,
                  run_first: str) -> Path:
    entry = manifest.stage_entry(name)
    if entry is None:
        raise MissingArtifactError(
            f"`{needed_by}` needs the {name} artifact; run `provtrace {run_first}` first",
            prerequisite=run_first,
        )
    rels = sorted(entry["outputs"])
    if not rels:
        raise MissingArtifactError(f"stage {name} recorded no outputs")
    return (manifest.out_dir / rels[0]).parent


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------

def write_graphs(graphs: list[ProvenanceGraph], path: Path, reduced: bool) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in emit_jsonl(graphs, reduced=reduced):
            fh.write(line)
            fh.write("\n")


def load_graphs(path: Path) -> list[ProvenanceGraph]:
    with open(path, "rb") as fh:
        return parse_reduced_jsonl(fh)


def write_labels(labels: dict[str, str], path: Path) -> None:
    path.write_text(json.dumps(labels, sort_keys=True, indent=0) + "\n",
                    encoding="utf-8")


def load_labels(path: Path) -> dict[str, str]:
    return json.loads(path.read_text(encoding="utf-8"))


def save_sequences(sequences: list[FeatureSequence], path: Path) -> None:
    tensorio.save_tensors(
        path,
        {
            "X": np.stack([s.X for s in sequences]),
            "mask": np.stack([s.mask for s in sequences]),
        },
        meta={
            "graph_ids": [s.graph_id for s in sequences],
            "labels": [s.label for s in sequences],
        },
    )


def load_sequences(path: Path) -> list[FeatureSequence]:
    meta, tensors = tensorio.load_tensors(path)
    return [
        FeatureSequence(graph_id=gid, X=tensors["X"][i], mask=tensors["mask"][i],
                        label=lab)
        for i, (gid, lab) in enumerate(zip(meta["graph_ids"], meta["labels"]))
    ]


def save_features(ids: list[str], labels: list[str], feats: np.ndarray,
                  path: Path) -> None:
    tensorio.save_tensors(path, {"features": feats.astype(np.float64)},
                          meta={"graph_ids": ids, "labels": labels})


def load_features(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    meta, tensors = tensorio.load_tensors(path)
    return meta["graph_ids"], meta["labels"], tensors["features"]


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class Split:
    name: str
    train: list[str]        # benign only
    val: list[str]          # benign only, threshold calibration
    test: list[str]         # held-out benign + all attack graphs

    def as_dict(self) -> dict:
        return {"name": self.name, "train": self.train, "val": self.val,
                "test": self.test}


def _shuffled(ids: list[str], seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    ordered = sorted(ids)
    return [ordered[i] for i in order]


def split_labels(labels: dict[str, str]) -> tuple[list[str], list[str]]:
    benign = sorted(g for g, lab in labels.items() if lab == LABEL_BENIGN)
    attack = sorted(g for g, lab in labels.items() if lab == LABEL_ATTACK)
    unlabeled = [g for g, lab in labels.items() if lab == LABEL_UNLABELED]
    if unlabeled:
        raise ConfigError(
            f"{len(unlabeled)} unlabeled graph(s); provide [data] labels or attack_ids"
        )
    return benign, attack


def linear_split(labels: dict[str, str], cfg: PipelineConfig) -> Split:
    benign, attack = split_labels(labels)
    if len(benign) < 3:
        raise ConfigError(f"need at least 3 benign graphs, got {len(benign)}")
    shuffled = _shuffled(benign, derive_seed(cfg.seed, "split"))
    n_test = max(1, round(cfg.test_fraction * len(shuffled)))
    test_benign = shuffled[:n_test]
    rest = shuffled[n_test:]
    n_val = max(1, round(cfg.val_fraction * len(rest)))
    val = rest[:n_val]
    train = rest[n_val:]
    if not train:
        raise ConfigError("split left no training graphs; lower the fractions")
    return Split(name="linear", train=train, val=val, test=test_benign + attack)


def fold_splits(labels: dict[str, str], cfg: PipelineConfig) -> list[Split]:
    benign, attack = split_labels(labels)
    if len(benign) < cfg.folds:
        raise ConfigError(f"need at least {cfg.folds} benign graphs, got {len(benign)}")
    shuffled = _shuffled(benign, derive_seed(cfg.seed, "folds"))
    chunks = [[str(g) for g in c] for c in np.array_split(shuffled, cfg.folds)]
    splits = []
    for i, test_benign in enumerate(chunks):
        rest = [g for g in shuffled if g not in set(test_benign)]
        n_val = max(1, round(cfg.val_fraction * len(rest)))
        reshuffled = _shuffled(rest, derive_seed(cfg.seed, f"fold{i}", "val"))
        val = reshuffled[:n_val]
        train = reshuffled[n_val:]
        splits.append(Split(name=f"fold{i}", train=train, val=val,
                            test=list(test_benign) + attack))
    return splits


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_ingest(manifest: RunManifest, cfg: PipelineConfig) -> StageResult:
    data_path = Path(cfg.data.path)
    if not data_path.exists():
        raise MissingArtifactError(f"[data] path {data_path} does not exist")
    inputs = [data_path]
    labels_path = Path(cfg.data.labels_path) if cfg.data.labels_path else None
    if labels_path is not None:
        inputs.append(labels_path)
    params = {"format": cfg.data.format, "attack_ids": cfg.data.attack_ids}

    def build(stage_dir: Path) -> None:
        with open(data_path, "rb") as fh:
            if cfg.data.format == FORMAT_STREAMSPOT:
                graphs = parse_streamspot(fh)
            else:
                graphs = parse_jsonl(fh)
        sidecar = load_labels(labels_path) if labels_path is not None else {}
        attack_set = parse_id_ranges(cfg.data.attack_ids) if cfg.data.attack_ids else None
        labels: dict[str, str] = {}
        for g in graphs:
            if g.graph_id in sidecar:
                g.label = sidecar[g.graph_id]
            elif attack_set is not None:
                g.label = LABEL_ATTACK if g.graph_id in attack_set else LABEL_BENIGN
            labels[g.graph_id] = g.label
        write_graphs(graphs, stage_dir / "graphs.jsonl", reduced=False)
        write_labels(labels, stage_dir / "labels.json")
        stats = {g.graph_id: json.loads(graph_stats(g).to_json()) for g in graphs}
        (stage_dir / "stats.json").write_text(
            json.dumps(stats, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    return run_stage(manifest, "ingest", inputs, params, build)


def stage_reduce(manifest: RunManifest, cfg: PipelineConfig,
                 graphs_path: Path) -> StageResult:
    params = {"enabled": cfg.reduce}

    def build(stage_dir: Path) -> None:
        graphs = load_graphs(graphs_path)
        report = {}
        out_graphs = []
        for g in graphs:
            if cfg.reduce:
                red = cpr_reduce(g)
                report[g.graph_id] = {
                    "original_edges": len(g.edges),
                    "reduced_edges": len(red.base.edges),
                    "ratio": reduction_ratio(g, red),
                }
                out_graphs.append(red.base)
            else:
                out_graphs.append(g)
        write_graphs(out_graphs, stage_dir / "reduced.jsonl", reduced=True)
        (stage_dir / "reduction.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    return run_stage(manifest, "reduce", [graphs_path], params, build)


def _walk_config(cfg: PipelineConfig, scope: str) -> WalkConfig:
    wc = WalkConfig(l=cfg.walk.l, walks_per_node=cfg.walk.walks_per_node,
                    token_mode=cfg.token_mode,
                    seed=derive_seed(cfg.seed, scope, "walk"))
    return wc


def stage_walk(manifest: RunManifest, cfg: PipelineConfig, scope: str,
               reduced_path: Path, train_ids: list[str]) -> StageResult:
    wc = _walk_config(cfg, scope)
    params = {"l": wc.l, "walks_per_node": wc.walks_per_node, "seed": wc.seed,
              "token_mode": wc.token_mode, "train_ids": sorted(train_ids)}

    def build(stage_dir: Path) -> None:
        graphs = {g.graph_id: g for g in load_graphs(reduced_path)}
        missing = [gid for gid in train_ids if gid not in graphs]
        if missing:
            raise MissingArtifactError(f"train graphs missing from {reduced_path}: "
                                       f"{missing[:5]}")
        corpus = generate_corpus([graphs[gid] for gid in sorted(train_ids)], wc)
        with open(stage_dir / "walks.txt", "w", encoding="utf-8") as fh:
            corpus.dump(fh)

    return run_stage(manifest, f"{scope}/walk" if scope else "walk",
                     [reduced_path], params, build)


def stage_embed(manifest: RunManifest, cfg: PipelineConfig, scope: str,
                walks_path: Path) -> StageResult:
    sg = SkipGramConfig(**{**_public_fields(cfg.skipgram),
                           "seed": derive_seed(cfg.seed, scope, "skipgram")})
    params = {**_public_fields(sg)}

    def build(stage_dir: Path) -> None:
        with open(walks_path, "r", encoding="utf-8") as fh:
            corpus = WalkCorpus.load(fh)
        table = train_skipgram(corpus, sg)
        table.save(stage_dir / "embedding.json")

    return run_stage(manifest, f"{scope}/embed" if scope else "embed",
                     [walks_path], params, build)


def _public_fields(obj) -> dict:
    return asdict(obj)


def stage_seq(manifest: RunManifest, cfg: PipelineConfig, scope: str,
              reduced_path: Path, table_path: Path) -> StageResult:
    params = {"n_max": cfg.model.n_max, "token_mode": cfg.token_mode}

    def build(stage_dir: Path) -> None:
        table = EmbeddingTable.load(table_path)
        graphs = load_graphs(reduced_path)
        sequences = [
            build_sequence(g, table, n_max=cfg.model.n_max, token_mode=cfg.token_mode)
            for g in sorted(graphs, key=lambda g: g.graph_id)
        ]
        save_sequences(sequences, stage_dir / "sequences.bin")

    return run_stage(manifest, f"{scope}/seq" if scope else "seq",
                     [reduced_path, table_path], params, build)


def stage_train(manifest: RunManifest, cfg: PipelineConfig, scope: str,
                sequences_path: Path, train_ids: list[str]) -> StageResult:
    model_cfg = autoencoder.ModelConfig(**{**_public_fields(cfg.model),
                                           "seed": derive_seed(cfg.seed, scope, "model")})
    train_cfg = autoencoder.TrainConfig(**{**_public_fields(cfg.train),
                                           "seed": derive_seed(cfg.seed, scope, "train")})
    params = {"model": _public_fields(model_cfg), "train": _public_fields(train_cfg),
              "train_ids": sorted(train_ids)}

    def build(stage_dir: Path) -> None:
        sequences = [s for s in load_sequences(sequences_path)
                     if s.graph_id in set(train_ids)]
        if not sequences:
            raise MissingArtifactError("no training sequences found for this split")
        model, history = autoencoder.train_autoencoder(sequences, model_cfg, train_cfg)
        autoencoder.save_checkpoint(model, stage_dir / "model.ckpt")
        with open(stage_dir / "loss_history.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "mean_loss"])
            for epoch, loss in enumerate(history):
                writer.writerow([epoch, f"{loss:.10g}"])

    return run_stage(manifest, f"{scope}/train" if scope else "train",
                     [sequences_path], params, build)


def stage_features(manifest: RunManifest, cfg: PipelineConfig, scope: str,
                   sequences_path: Path, model_path: Path) -> StageResult:
    def build(stage_dir: Path) -> None:
        sequences = load_sequences(sequences_path)
        model = autoencoder.load_checkpoint(model_path)
        feats = autoencoder.extract_features(sequences, model)
        save_features([s.graph_id for s in sequences], [s.label for s in sequences],
                      feats, stage_dir / "features.bin")

    return run_stage(manifest, f"{scope}/features" if scope else "features",
                     [sequences_path, model_path], {}, build)


def stage_fit(manifest: RunManifest, cfg: PipelineConfig, scope: str,
              features_path: Path, train_ids: list[str], val_ids: list[str],
              k: int | None = None) -> StageResult:
    k = cfg.k if k is None else k
    seed = derive_seed(cfg.seed, scope, "kmeans")
    params = {"k": k, "policy": cfg.threshold_policy, "seed": seed,
              "train_ids": sorted(train_ids), "val_ids": sorted(val_ids)}
    name = f"{scope}/k{k}/fit" if scope else f"k{k}/fit"

    def build(stage_dir: Path) -> None:
        ids, _, feats = load_features(features_path)
        index = {gid: i for i, gid in enumerate(ids)}
        train = feats[[index[g] for g in sorted(train_ids)]]
        val = feats[[index[g] for g in sorted(val_ids)]]
        model = detect.fit_kmeans(train, k=k, seed=seed)
        model = detect.calibrate_threshold(val, model, cfg.threshold_policy)
        model.save(stage_dir / "cluster.json")

    return run_stage(manifest, name, [features_path], params, build)


def stage_score(manifest: RunManifest, cfg: PipelineConfig, scope: str,
                features_path: Path, cluster_path: Path, test_ids: list[str],
                k: int | None = None) -> StageResult:
    k = cfg.k if k is None else k
    params = {"test_ids": sorted(test_ids)}
    name = f"{scope}/k{k}/score" if scope else f"k{k}/score"

    def build(stage_dir: Path) -> None:
        ids, labels, feats = load_features(features_path)
        index = {gid: i for i, gid in enumerate(ids)}
        model = detect.ClusterModel.load(cluster_path)
        scored = [
            detect.classify(gid, feats[index[gid]], labels[index[gid]], model)
            for gid in sorted(test_ids)
        ]
        with open(stage_dir / "scores.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["graph_id", "label", "score", "verdict"])
            for s in scored:
                writer.writerow([s.graph_id, s.label, f"{s.score:.12g}", s.verdict])
        payload = [
            {"graph_id": s.graph_id, "label": s.label, "score": s.score,
             "verdict": s.verdict}
            for s in scored
        ]
        (stage_dir / "scores.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    return run_stage(manifest, name, [features_path, cluster_path], params, build)


def stage_report(manifest: RunManifest, cfg: PipelineConfig, scope: str,
                 scores_path: Path, cluster_path: Path,
                 k: int | None = None) -> StageResult:
    k = cfg.k if k is None else k
    name = f"{scope}/k{k}/report" if scope else f"k{k}/report"

    def build(stage_dir: Path) -> None:
        scored = json.loads(scores_path.read_text(encoding="utf-8"))
        cluster = detect.ClusterModel.load(cluster_path)
        scores = np.asarray([s["score"] for s in scored])
        labels = [s["label"] for s in scored]
        tp = sum(1 for s in scored if s["verdict"] == "attack" and s["label"] == "attack")
        fp = sum(1 for s in scored if s["verdict"] == "attack" and s["label"] != "attack")
        tn = sum(1 for s in scored if s["verdict"] == "benign" and s["label"] != "attack")
        fn = sum(1 for s in scored if s["verdict"] == "benign" and s["label"] == "attack")
        report: dict = {
            "k": k,
            "threshold": cluster.threshold,
            "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
            "precision": tp / (tp + fp) if tp + fp else 1.0,
            "recall": tp / (tp + fn) if tp + fn else None,
            "per_graph": scored,
        }
        distinct = set(labels)
        if "attack" in distinct and len(distinct) > 1:
            curve = detect.pr_curve(scores, labels)
            report["auc_pr"] = curve.auc_pr
            with open(stage_dir / "pr_curve.csv", "w", encoding="utf-8",
                      newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["threshold", "precision", "recall"])
                for t, p, r in curve.points:
                    writer.writerow([f"{t:.12g}", f"{p:.12g}", f"{r:.12g}"])
        else:
            report["auc_pr"] = None
        (stage_dir / "report.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    return run_stage(manifest, name, [scores_path, cluster_path], {"k": k}, build)


# ---------------------------------------------------------------------------
# End-to-end flows
# ---------------------------------------------------------------------------

def _run_scope(manifest: RunManifest, cfg: PipelineConfig, scope: str,
               reduced_path: Path, split: Split,
               ks: list[int]) -> dict[int, dict]:
    """Walk -> embed -> seq -> train -> features once, then fit/score/report per K."""
    walk = stage_walk(manifest, cfg, scope, reduced_path, split.train)
    embed = stage_embed(manifest, cfg, scope, walk.file("walks.txt"))
    seq = stage_seq(manifest, cfg, scope, reduced_path, embed.file("embedding.json"))
    train = stage_train(manifest, cfg, scope, seq.file("sequences.bin"), split.train)
    feats = stage_features(manifest, cfg, scope, seq.file("sequences.bin"),
                           train.file("model.ckpt"))
    results: dict[int, dict] = {}
    for k in ks:
        fit = stage_fit(manifest, cfg, scope, feats.file("features.bin"),
                        split.train, split.val, k=k)
        scorer = stage_score(manifest, cfg, scope, feats.file("features.bin"),
                             fit.file("cluster.json"), split.test, k=k)
        rep = stage_report(manifest, cfg, scope, scorer.file("scores.json"),
                           fit.file("cluster.json"), k=k)
        results[k] = json.loads(rep.file("report.json").read_text(encoding="utf-8"))
    return results


def run_linear(cfg: PipelineConfig, out_dir: str | Path) -> RunManifest:
    """Single-split pipeline: one train/val/test partition, one K."""
    manifest = RunManifest.load_or_new(Path(out_dir), cfg.snapshot())
    ingest = stage_ingest(manifest, cfg)
    reduce_res = stage_reduce(manifest, cfg, ingest.file("graphs.jsonl"))
    labels = load_labels(ingest.file("labels.json"))
    split = linear_split(labels, cfg)
    manifest.data["audit"] = {"splits": [split.as_dict()]}
    results = _run_scope(manifest, cfg, "linear", reduce_res.file("reduced.jsonl"),
                         split, ks=[cfg.k])
    manifest.data["results"] = {"linear": results[cfg.k]}
    manifest.save()
    return manifest


def run_eval(cfg: PipelineConfig, out_dir: str | Path,
             sweep: tuple[int, int] | None = None) -> RunManifest:
    """Cross-validated evaluation; sweep=(k_min, k_max) reuses cached features."""
    manifest = RunManifest.load_or_new(Path(out_dir), cfg.snapshot())
    ingest = stage_ingest(manifest, cfg)
    reduce_res = stage_reduce(manifest, cfg, ingest.file("graphs.jsonl"))
    labels = load_labels(ingest.file("labels.json"))
    splits = fold_splits(labels, cfg)
    manifest.data["audit"] = {"splits": [s.as_dict() for s in splits]}

    ks = [cfg.k] if sweep is None else list(range(sweep[0], sweep[1] + 1))
    fold_results: list[dict[int, dict]] = []
    for split in splits:
        fold_results.append(
            _run_scope(manifest, cfg, split.name,
                       reduce_res.file("reduced.jsonl"), split, ks)
        )

    per_fold = [
        {"fold": split.name,
         "per_k": {str(k): res[k]["auc_pr"] for k in ks},
         "auc_pr": fold_results[i][cfg.k]["auc_pr"] if cfg.k in ks
         else fold_results[i][ks[0]]["auc_pr"]}
        for i, split in enumerate(splits)
    ]
    mean_by_k = {
        str(k): float(np.mean([fold_results[i][k]["auc_pr"] for i in range(len(splits))]))
        for k in ks
    }
    manifest.data["folds"] = per_fold
    manifest.data["results"] = {
        "mean_auc_pr": mean_by_k[str(cfg.k)] if str(cfg.k) in mean_by_k
        else mean_by_k[str(ks[0])],
        "mean_auc_pr_by_k": mean_by_k,
        "ks": ks,
    }

    report_dir = manifest.out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    eval_payload = {
        "folds": per_fold,
        "mean_auc_pr_by_k": mean_by_k,
        "ks": ks,
    }
    (report_dir / "eval.json").write_text(
        json.dumps(eval_payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["k", "mean_auc_pr"] + [s.name for s in splits])
    for k in ks:
        row = [k, f"{mean_by_k[str(k)]:.12g}"]
        row += [f"{fold_results[i][k]['auc_pr']:.12g}" for i in range(len(splits))]
        writer.writerow(row)
    (report_dir / "sweep.csv" if sweep is not None else report_dir / "eval.csv"
     ).write_text(buf.getvalue(), encoding="utf-8")

    manifest.save()
    return manifest


def audit_one_class(manifest: RunManifest) -> list[str]:
    """Cross-check that no attack graph leaked into train/val; returns violations."""
    labels_rel = None
    entry = manifest.stage_entry("ingest")
    if entry is None:
        raise MissingArtifactError("no ingest stage in manifest")
    for rel in entry["outputs"]:
        if rel.endswith("labels.json"):
            labels_rel = rel
    if labels_rel is None:
        raise MissingArtifactError("ingest stage has no labels.json")
    labels = load_labels(manifest.out_dir / labels_rel)
    violations = []
    for split in manifest.data.get("audit", {}).get("splits", []):
        for part in ("train", "val"):
            for gid in split[part]:
                if labels.get(gid) == LABEL_ATTACK:
                    violations.append(f"{split['name']}:{part}:{gid}")
    return violations
