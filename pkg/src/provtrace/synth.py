"""Deterministic synthetic provenance-graph generator.

Graphs are grown by stitching weighted behavior motifs (small typed subgraph
templates) into an event stream, binding motif roles to fresh or reused nodes.
Attack scenarios weave a small infiltration motif sparsely through an
otherwise benign stream: its node and edge alphabets are the benign ones, but
its wiring produces event arrivals that never occur in benign behavior, so
nothing short of context/sequence modeling can separate the classes.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import EdgeRecord, ProvenanceGraph


@dataclass(slots=True)
class Motif:
    name: str
    weight: float
    nodes: list[tuple[str, str]]        # (role, node_type)
    edges: list[tuple[str, str, str]]   # (src_role, dst_role, edge_type)
    fresh: frozenset[str] = frozenset() # roles that never bind to existing nodes

    def validate(self, node_types: list[str], edge_types: list[str]) -> None:
        roles = {r for r, _ in self.nodes}
        if len(roles) != len(self.nodes):
            raise ConfigError(f"motif {self.name!r}: duplicate roles")
        if self.weight <= 0:
            raise ConfigError(f"motif {self.name!r}: weight must be positive")
        for _, t in self.nodes:
            if t not in node_types:
                raise ConfigError(f"motif {self.name!r}: unknown node type {t!r}")
        for s, d, t in self.edges:
            if s not in roles or d not in roles:
                raise ConfigError(f"motif {self.name!r}: edge uses unknown role")
            if t not in edge_types:
                raise ConfigError(f"motif {self.name!r}: unknown edge type {t!r}")
        if not self.fresh <= roles:
            raise ConfigError(f"motif {self.name!r}: fresh lists unknown role")


@dataclass(slots=True)
class ScenarioSpec:
    name: str
    label: str
    node_types: list[str]
    edge_types: list[str]
    motifs: list[Motif]
    min_edges: int
    max_edges: int
    reuse_rate: float = 0.5
    extra_motif: Motif | None = None
    extra_instances: tuple[int, int] = (0, 0)
    rewire_rate: float = 0.0
    rare_edge_rate: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not self.motifs:
            raise ConfigError(f"scenario {self.name!r}: no motifs")
        if not (1 <= self.min_edges <= self.max_edges):
            raise ConfigError(f"scenario {self.name!r}: bad size range")
        for m in self.motifs:
            m.validate(self.node_types, self.edge_types)
        if self.extra_motif is not None:
            self.extra_motif.validate(self.node_types, self.edge_types)
            lo, hi = self.extra_instances
            if not (0 <= lo <= hi):
                raise ConfigError(f"scenario {self.name!r}: bad extra_instances range")
        for rate in (self.reuse_rate, self.rewire_rate, self.rare_edge_rate):
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f"scenario {self.name!r}: rates must be in [0, 1]")


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

class _Stream:
    def __init__(self) -> None:
        self.node_types: dict[str, str] = {}
        self.pools: dict[str, list[str]] = {}
        self.counter = 0

    def new_node(self, node_type: str) -> str:
        node_id = f"n{self.counter:05d}"
        self.counter += 1
        self.node_types[node_id] = node_type
        self.pools.setdefault(node_type, []).append(node_id)
        return node_id


def _instantiate(motif: Motif, stream: _Stream, rng: np.random.Generator,
                 reuse_rate: float) -> list[tuple[str, str, str]]:
    binding: dict[str, str] = {}
    used: set[str] = set()
    for role, node_type in motif.nodes:
        candidates = [n for n in stream.pools.get(node_type, ()) if n not in used]
        if role not in motif.fresh and candidates and rng.random() < reuse_rate:
            node = candidates[int(rng.integers(len(candidates)))]
        else:
            node = stream.new_node(node_type)
        binding[role] = node
        used.add(node)
    return [(binding[s], binding[d], t) for s, d, t in motif.edges]


def _generate_one(spec: ScenarioSpec, graph_id: str,
                  rng: np.random.Generator) -> ProvenanceGraph:
    stream = _Stream()
    target = int(rng.integers(spec.min_edges, spec.max_edges + 1))
    weights = np.asarray([m.weight for m in spec.motifs], dtype=np.float64)
    weights = weights / weights.sum()

    chunks: list[list[tuple[str, str, str]]] = []
    total = 0
    while total < target:
        motif = spec.motifs[int(rng.choice(len(spec.motifs), p=weights))]
        chunk = _instantiate(motif, stream, rng, spec.reuse_rate)
        chunks.append(chunk)
        total += len(chunk)

    if spec.extra_motif is not None:
        lo, hi = spec.extra_instances
        n_extra = int(rng.integers(lo, hi + 1)) if hi > lo else lo
        for _ in range(n_extra):
            chunk = _instantiate(spec.extra_motif, stream, rng, spec.reuse_rate)
            # Weave the instance into the stream at a random position.
            at = int(rng.integers(len(chunks) + 1))
            chunks.insert(at, chunk)

    edges = [edge for chunk in chunks for edge in chunk]

    if spec.rewire_rate > 0:
        rewired = []
        for src, dst, etype in edges:
            if rng.random() < spec.rewire_rate:
                pool = stream.pools[stream.node_types[dst]]
                dst = pool[int(rng.integers(len(pool)))]
            rewired.append((src, dst, etype))
        edges = rewired
    if spec.rare_edge_rate > 0:
        edges = [
            (src, dst,
             spec.edge_types[int(rng.integers(len(spec.edge_types)))]
             if rng.random() < spec.rare_edge_rate else etype)
            for src, dst, etype in edges
        ]

    nodes: dict[str, str] = {}
    records: list[EdgeRecord] = []
    for seq, (src, dst, etype) in enumerate(edges):
        for n in (src, dst):
            if n not in nodes:
                nodes[n] = stream.node_types[n]
        records.append(EdgeRecord(src=src, dst=dst, edge_type=etype, seq=seq))
    graph = ProvenanceGraph(graph_id=graph_id, label=spec.label, nodes=nodes,
                            edges=records)
    graph.validate()
    return graph


def generate(spec: ScenarioSpec, count: int, id_prefix: str | None = None
             ) -> list[ProvenanceGraph]:
    """`count` graphs from one scenario; bitwise deterministic under spec.seed."""
    spec.validate()
    prefix = id_prefix if id_prefix is not None else spec.name
    graphs = []
    for i in range(count):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=spec.seed & (2**63 - 1), spawn_key=(i,))
        )
        graphs.append(_generate_one(spec, f"{prefix}-{i:03d}", rng))
    return graphs


# ---------------------------------------------------------------------------
# Built-in benchmark scenarios
# ---------------------------------------------------------------------------

_NODE_TYPES = ["process", "file", "socket"]
_EDGE_TYPES = ["fork", "exec", "read", "write", "connect", "send", "recv"]

_WORKER = Motif(
    name="worker", weight=3.0,
    nodes=[("A", "process"), ("B", "process"), ("C", "file"), ("D", "file")],
    edges=[("A", "B", "fork"), ("B", "C", "exec"), ("B", "D", "read"),
           ("B", "D", "write"), ("B", "D", "write")],
)
_NETFETCH = Motif(
    name="netfetch", weight=2.0,
    nodes=[("A", "process"), ("S", "socket"), ("F", "file")],
    edges=[("A", "S", "connect"), ("A", "S", "send"), ("S", "A", "recv"),
           ("S", "A", "recv"), ("A", "F", "write")],
)
_LOGROTATE = Motif(
    name="logrotate", weight=2.0,
    nodes=[("A", "process"), ("F", "file"), ("G", "file")],
    edges=[("A", "F", "read"), ("A", "G", "write"), ("A", "G", "write"),
           ("A", "G", "write"), ("A", "F", "read")],
)
# Reuses the benign alphabets, but "connect" arriving at a process and "exec"
# arriving at a process are wiring patterns no benign motif produces.
INFILTRATION = Motif(
    name="implant", weight=1.0,
    nodes=[("S", "socket"), ("P", "process"), ("Q", "process"),
           ("F", "file"), ("T", "socket")],
    edges=[("S", "P", "connect"), ("P", "Q", "exec"), ("Q", "F", "read"),
           ("Q", "T", "send"), ("T", "P", "recv")],
    fresh=frozenset({"S", "P", "Q", "T"}),
)

BENCHMARK_BENIGN_COUNT = 120
BENCHMARK_ATTACK_COUNT = 30


def benchmark_specs(seed: int = 0) -> tuple[ScenarioSpec, ScenarioSpec]:
    benign = ScenarioSpec(
        name="benign", label="benign",
        node_types=list(_NODE_TYPES), edge_types=list(_EDGE_TYPES),
        motifs=[_WORKER, _NETFETCH, _LOGROTATE],
        min_edges=400, max_edges=560,
        reuse_rate=0.5,
        seed=seed,
    )
    attack = replace(
        benign,
        name="attack", label="attack",
        extra_motif=INFILTRATION,
        extra_instances=(2, 4),
        seed=seed + 1,
    )
    return benign, attack


def default_benchmark(seed: int = 0) -> list[ProvenanceGraph]:
    """Fixed 120 benign + 30 attack dataset for end-to-end acceptance runs."""
    benign_spec, attack_spec = benchmark_specs(seed)
    graphs = generate(benign_spec, BENCHMARK_BENIGN_COUNT, id_prefix="benign")
    graphs += generate(attack_spec, BENCHMARK_ATTACK_COUNT, id_prefix="attack")
    return graphs


# ---------------------------------------------------------------------------
# Scenario spec files (INI dialect)
# ---------------------------------------------------------------------------

def _parse_motif(name: str, section: configparser.SectionProxy) -> Motif:
    nodes = []
    for part in section.get("nodes", "").split(","):
        part = part.strip()
        if not part:
            continue
        role, _, ntype = part.partition(":")
        if not ntype:
            raise ConfigError(f"motif {name!r}: node entry {part!r} is not role:type")
        nodes.append((role.strip(), ntype.strip()))
    edges = []
    for part in section.get("edges", "").split(","):
        part = part.strip()
        if not part:
            continue
        bits = part.split()
        if len(bits) != 3:
            raise ConfigError(f"motif {name!r}: edge entry {part!r} is not 'src type dst'")
        src, etype, dst = bits
        edges.append((src, dst, etype))
    fresh = frozenset(
        r.strip() for r in section.get("fresh", "").split(",") if r.strip()
    )
    return Motif(name=name, weight=section.getfloat("weight", 1.0),
                 nodes=nodes, edges=edges, fresh=fresh)


def load_scenario(path: str | Path) -> ScenarioSpec:
    """Load a scenario spec from its INI file format (see docs)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read scenario file {path}")
    if "scenario" not in parser:
        raise ConfigError(f"{path}: missing [scenario] section")
    sc = parser["scenario"]

    motif_sections = {
        name.split(":", 1)[1]: _parse_motif(name.split(":", 1)[1], parser[name])
        for name in parser.sections() if name.startswith("motif:")
    }
    motif_names = [m.strip() for m in sc.get("motifs", "").split(",") if m.strip()]
    missing = [m for m in motif_names if m not in motif_sections]
    if missing:
        raise ConfigError(f"{path}: undefined motif(s) {missing}")

    extra_name = sc.get("extra_motif", "").strip()
    extra = None
    if extra_name:
        if extra_name not in motif_sections:
            raise ConfigError(f"{path}: undefined extra motif {extra_name!r}")
        extra = motif_sections[extra_name]

    spec = ScenarioSpec(
        name=sc.get("name", Path(path).stem),
        label=sc.get("label", "benign"),
        node_types=[t.strip() for t in sc.get("node_types", "").split(",") if t.strip()],
        edge_types=[t.strip() for t in sc.get("edge_types", "").split(",") if t.strip()],
        motifs=[motif_sections[m] for m in motif_names],
        min_edges=sc.getint("min_edges", 100),
        max_edges=sc.getint("max_edges", 200),
        reuse_rate=sc.getfloat("reuse_rate", 0.5),
        extra_motif=extra,
        extra_instances=(sc.getint("extra_min", 0), sc.getint("extra_max", 0)),
        rewire_rate=sc.getfloat("rewire_rate", 0.0),
        rare_edge_rate=sc.getfloat("rare_edge_rate", 0.0),
        seed=sc.getint("seed", 0),
    )
    spec.validate()
    return spec


def save_scenario(spec: ScenarioSpec, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    parser["scenario"] = {
        "name": spec.name,
        "label": spec.label,
        "node_types": ", ".join(spec.node_types),
        "edge_types": ", ".join(spec.edge_types),
        "motifs": ", ".join(m.name for m in spec.motifs),
        "min_edges": str(spec.min_edges),
        "max_edges": str(spec.max_edges),
        "reuse_rate": str(spec.reuse_rate),
        "rewire_rate": str(spec.rewire_rate),
        "rare_edge_rate": str(spec.rare_edge_rate),
        "seed": str(spec.seed),
    }
    if spec.extra_motif is not None:
        parser["scenario"]["extra_motif"] = spec.extra_motif.name
        parser["scenario"]["extra_min"] = str(spec.extra_instances[0])
        parser["scenario"]["extra_max"] = str(spec.extra_instances[1])
    motifs = list(spec.motifs) + ([spec.extra_motif] if spec.extra_motif else [])
    for motif in motifs:
        parser[f"motif:{motif.name}"] = {
            "weight": str(motif.weight),
            "nodes": ", ".join(f"{r}:{t}" for r, t in motif.nodes),
            "edges": ", ".join(f"{s} {t} {d}" for s, d, t in motif.edges),
            "fresh": ", ".join(sorted(motif.fresh)),
        }
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
