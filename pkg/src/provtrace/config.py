"""Pipeline configuration: INI files, defaults, and seed derivation.

One master seed drives every stage; per-stage seeds are derived by hashing the
master seed with the stage name (and fold label), so a single integer
reproduces an entire run.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .autoencoder import ModelConfig, TrainConfig
from .errors import ConfigError
from .skipgram import SkipGramConfig
from .walks import WalkConfig, TOKEN_MODE_TYPE, TOKEN_MODE_TYPE_EDGE

FORMAT_JSONL = "jsonl"
FORMAT_STREAMSPOT = "streamspot"


def derive_seed(master: int, *labels: str) -> int:
    """Stage seed = first 8 bytes of sha256("provtrace:<master>:<labels...>")."""
    text = "provtrace:" + str(master) + "".join(":" + lab for lab in labels)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def config_digest(params: dict) -> str:
    return hashlib.sha256(
        json.dumps(params, sort_keys=True).encode("utf-8")
    ).hexdigest()


@dataclass(slots=True)
class DataConfig:
    path: str = ""
    format: str = FORMAT_JSONL
    labels_path: str | None = None
    attack_ids: str | None = None  # e.g. "300-399" or "3,7,12-20"

    def validate(self) -> None:
        if not self.path:
            raise ConfigError("[data] path is required")
        if self.format not in (FORMAT_JSONL, FORMAT_STREAMSPOT):
            raise ConfigError(f"[data] format must be jsonl or streamspot, "
                              f"got {self.format!r}")


def parse_id_ranges(spec: str) -> set[str]:
    """Expand "300-399" / "1,5,9-12" into a set of decimal id strings."""
    ids: set[str] = set()
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo_s, _, hi_s = part.partition("-")
            try:
                lo, hi = int(lo_s), int(hi_s)
            except ValueError as exc:
                raise ConfigError(f"bad id range {part!r}") from exc
            if hi < lo:
                raise ConfigError(f"bad id range {part!r}")
            ids.update(str(i) for i in range(lo, hi + 1))
        else:
            ids.add(part)
    return ids


@dataclass(slots=True)
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    out_dir: str = "runs/out"
    seed: int = 0
    reduce: bool = True
    test_fraction: float = 0.25
    val_fraction: float = 0.10
    folds: int = 5
    token_mode: str = TOKEN_MODE_TYPE
    walk: WalkConfig = field(default_factory=WalkConfig)
    skipgram: SkipGramConfig = field(default_factory=SkipGramConfig)
    model: ModelConfig = field(default_factory=lambda: ModelConfig(
        d_model=64, n_layers=2, n_heads=4, n_max=128))
    train: TrainConfig = field(default_factory=TrainConfig)
    k: int = 8
    threshold_policy: str = "max"
    sweep_k_min: int = 2
    sweep_k_max: int = 11

    def validate(self) -> None:
        self.data.validate()
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must be in (0,1), got {self.val_fraction}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.token_mode not in (TOKEN_MODE_TYPE, TOKEN_MODE_TYPE_EDGE):
            raise ConfigError(f"unknown token_mode {self.token_mode!r}")
        if self.k < 2:
            raise ConfigError(f"K must be >= 2, got {self.k}")
        if not 2 <= self.sweep_k_min <= self.sweep_k_max:
            raise ConfigError("bad sweep K range")
        self.walk.validate()
        self.skipgram.validate()
        self.model.validate()
        self.train.validate()
        if self.model.m != self.skipgram.m:
            raise ConfigError(
                f"model input dim m={self.model.m} != skip-gram m={self.skipgram.m}"
            )

    def snapshot(self) -> dict:
        """Deterministic dict view for manifests; excludes runtime placement."""
        snap = {
            "data": asdict(self.data),
            "seed": self.seed,
            "reduce": self.reduce,
            "test_fraction": self.test_fraction,
            "val_fraction": self.val_fraction,
            "folds": self.folds,
            "token_mode": self.token_mode,
            "walk": asdict(self.walk),
            "skipgram": asdict(self.skipgram),
            "model": asdict(self.model),
            "train": asdict(self.train),
            "k": self.k,
            "threshold_policy": self.threshold_policy,
            "sweep_k_min": self.sweep_k_min,
            "sweep_k_max": self.sweep_k_max,
        }
        # Stage seeds are derived from the master seed; sub-config seed fields
        # are filled at dispatch time and excluded from the snapshot.
        for sub in ("walk", "skipgram", "model", "train"):
            snap[sub].pop("seed", None)
        return snap


_GETTERS = {int: "getint", float: "getfloat", bool: "getboolean", str: "get"}


def _fill(section: configparser.SectionProxy, obj, fields: dict[str, type]) -> None:
    for name, typ in fields.items():
        if name in section:
            getter = getattr(section, _GETTERS[typ])
            try:
                setattr(obj, name, getter(name))
            except ValueError as exc:
                raise ConfigError(f"bad value for {name!r}: {section.get(name)!r}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = PipelineConfig()

    if "data" in parser:
        sec = parser["data"]
        cfg.data.path = sec.get("path", cfg.data.path)
        cfg.data.format = sec.get("format", cfg.data.format)
        cfg.data.labels_path = sec.get("labels", cfg.data.labels_path)
        cfg.data.attack_ids = sec.get("attack_ids", cfg.data.attack_ids)
    if "pipeline" in parser:
        _fill(parser["pipeline"], cfg, {
            "out_dir": str, "seed": int, "reduce": bool, "test_fraction": float,
            "val_fraction": float, "folds": int, "token_mode": str,
        })
    if "walk" in parser:
        _fill(parser["walk"], cfg.walk, {"l": int, "walks_per_node": int})
    if "skipgram" in parser:
        _fill(parser["skipgram"], cfg.skipgram, {
            "m": int, "c": int, "negatives": int, "epochs": int, "lr": float,
            "min_count": int, "batch_size": int,
        })
    if "model" in parser:
        _fill(parser["model"], cfg.model, {
            "d_model": int, "n_layers": int, "n_heads": int, "dropout": float,
            "n_max": int,
        })
        if parser["model"].get("d_ff"):
            cfg.model.d_ff = parser["model"].getint("d_ff")
        cfg.model.m = cfg.skipgram.m
    if "train" in parser:
        _fill(parser["train"], cfg.train, {
            "epochs": int, "batch_size": int, "lr": float, "grad_clip": float,
            "deterministic": bool,
        })
    if "detect" in parser:
        _fill(parser["detect"], cfg, {
            "k": int, "threshold_policy": str, "sweep_k_min": int, "sweep_k_max": int,
        })

    cfg.walk.token_mode = cfg.token_mode
    cfg.model.m = cfg.skipgram.m
    cfg.validate()
    return cfg


def write_template(path: str | Path) -> None:
    """Emit a fully commented default config (the documented schema)."""
    template = """\
# provtrace pipeline configuration (INI: key = value, grouped in sections)

[data]
# Path to the edge stream (JSONL edge format or StreamSpot TSV).
path = data/edges.jsonl
format = jsonl            # jsonl | streamspot
# Labels come from a sidecar JSON map {graph_id: "benign"|"attack"} ...
#labels = data/labels.json
# ... or from an id list/range; everything else is labeled benign.
#attack_ids = 300-399

[pipeline]
seed = 0
reduce = true             # false bypasses CPR
test_fraction = 0.25      # fraction of benign graphs held out for testing
val_fraction = 0.10       # fraction of training benign used to calibrate
folds = 5                 # cross-validation folds for `eval`
token_mode = type         # type | type_edge

[walk]
l = 10
walks_per_node = 5

[skipgram]
m = 64
c = 5
negatives = 5
epochs = 5
lr = 0.025
min_count = 1

[model]
d_model = 64              # paper-scale profile: 512 / 6 layers / 8 heads
n_layers = 2
n_heads = 4
#d_ff = 256               # defaults to 4 * d_model
dropout = 0.1
n_max = 128

[train]
epochs = 30
batch_size = 8
lr = 1e-4
grad_clip = 1.0

[detect]
k = 8
threshold_policy = max    # max | percentile:<p>
sweep_k_min = 2
sweep_k_max = 11
"""
    Path(path).write_text(template, encoding="utf-8")
