"""Parse on-disk provenance edge streams into validated in-memory graphs.

Two interchange formats are supported: the 6-column StreamSpot TSV and a
generic JSONL edge format. Both produce the same ProvenanceGraph structure;
node identity is per-graph (ids may be reused across graphs).
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable

from .errors import IntegrityError, ParseError, SchemaError

LABEL_BENIGN = "benign"
LABEL_ATTACK = "attack"
LABEL_UNLABELED = "unlabeled"
VALID_LABELS = (LABEL_BENIGN, LABEL_ATTACK, LABEL_UNLABELED)


@dataclass(slots=True)
class EdgeRecord:
    src: str
    dst: str
    edge_type: str
    seq: int
    timestamp: int | None = None
    # CPR merge bookkeeping; count==1 and first_seq==seq for raw edges.
    count: int = 1

    @property
    def first_seq(self) -> int:
        return self.seq


@dataclass(slots=True)
class ProvenanceGraph:
    graph_id: str
    label: str = LABEL_UNLABELED
    # node_id -> node_type; dict preserves first-sighting order.
    nodes: dict[str, str] = field(default_factory=dict)
    edges: list[EdgeRecord] = field(default_factory=list)

    def validate(self) -> None:
        """Enforce structural invariants; raises IntegrityError on violation."""
        if self.label not in VALID_LABELS:
            raise IntegrityError(f"graph {self.graph_id}: bad label {self.label!r}")
        for node_id in self.nodes:
            if not node_id:
                raise IntegrityError(f"graph {self.graph_id}: empty node id")
        prev_seq = -1
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise IntegrityError(
                    f"graph {self.graph_id}: edge ({e.src},{e.dst}) has unknown endpoint"
                )
            if e.seq <= prev_seq:
                raise IntegrityError(
                    f"graph {self.graph_id}: seq {e.seq} not strictly increasing"
                )
            if e.count < 1:
                raise IntegrityError(f"graph {self.graph_id}: edge count {e.count} < 1")
            prev_seq = e.seq

    def out_edges(self) -> dict[str, list[EdgeRecord]]:
        """Adjacency in edge-list (seq) order."""
        adj: dict[str, list[EdgeRecord]] = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.src].append(e)
        return adj


# ---------------------------------------------------------------------------
# Shared graph assembly
# ---------------------------------------------------------------------------

class _GraphBuilder:
    """Accumulates edges per graph_id, assigning per-graph seq from line order."""

    def __init__(self) -> None:
        self.graphs: dict[str, ProvenanceGraph] = {}

    def add_edge(
        self,
        line_no: int,
        graph_id: str,
        src: str,
        src_type: str,
        dst: str,
        dst_type: str,
        edge_type: str,
        timestamp: int | None = None,
    ) -> None:
        if not src or not dst:
            raise SchemaError(line_no, "empty src or dst id")
        g = self.graphs.get(graph_id)
        if g is None:
            g = self.graphs[graph_id] = ProvenanceGraph(graph_id=graph_id)
        self._type_node(line_no, g, src, src_type)
        self._type_node(line_no, g, dst, dst_type)
        g.edges.append(
            EdgeRecord(src=src, dst=dst, edge_type=edge_type, seq=len(g.edges),
                       timestamp=timestamp)
        )

    @staticmethod
    def _type_node(line_no: int, g: ProvenanceGraph, node_id: str, node_type: str) -> None:
        seen = g.nodes.get(node_id)
        if seen is None:
            g.nodes[node_id] = node_type
        elif seen != node_type:
            # Silent type drift would corrupt embeddings downstream.
            raise IntegrityError(
                f"line {line_no}: node {node_id!r} in graph {g.graph_id!r} "
                f"re-typed {seen!r} -> {node_type!r}"
            )

    def finish(self) -> list[ProvenanceGraph]:
        for g in self.graphs.values():
            g.validate()
        return list(self.graphs.values())


def _iter_lines(stream: IO[bytes] | Iterable[bytes]) -> Iterable[tuple[int, str]]:
    for line_no, raw in enumerate(stream, 1):
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
        text = text.rstrip("\n").rstrip("\r")
        if text:
            yield line_no, text


# ---------------------------------------------------------------------------
# Parsers
# ---------------------------------------------------------------------------

def parse_streamspot(stream: IO[bytes] | Iterable[bytes]) -> list[ProvenanceGraph]:
    """Parse StreamSpot TSV: src_id, src_type, dst_id, dst_type, edge_type, graph_id."""
    builder = _GraphBuilder()
    for line_no, text in _iter_lines(stream):
        fields = text.split("\t")
        if len(fields) != 6:
            raise ParseError(line_no, f"expected 6 tab-separated fields, got {len(fields)}")
        src, src_type, dst, dst_type, edge_type, graph_id = fields
        builder.add_edge(line_no, graph_id, src, src_type, dst, dst_type, edge_type)
    return builder.finish()


_JSONL_REQUIRED = ("graph_id", "src", "src_type", "dst", "dst_type", "edge_type")


def parse_jsonl(stream: IO[bytes] | Iterable[bytes]) -> list[ProvenanceGraph]:
    """Parse the JSONL edge format; `ts` (integer nanoseconds) is optional."""
    builder = _GraphBuilder()
    for line_no, text in _iter_lines(stream):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise SchemaError(line_no, "line is not a JSON object")
        missing = [k for k in _JSONL_REQUIRED if k not in obj]
        if missing:
            raise SchemaError(line_no, f"missing required key(s): {', '.join(missing)}")
        ts = obj.get("ts")
        if ts is not None and not isinstance(ts, int):
            raise SchemaError(line_no, "ts must be an integer (nanoseconds)")
        builder.add_edge(
            line_no,
            str(obj["graph_id"]),
            str(obj["src"]),
            str(obj["src_type"]),
            str(obj["dst"]),
            str(obj["dst_type"]),
            str(obj["edge_type"]),
            timestamp=ts,
        )
    return builder.finish()


def emit_jsonl(graphs: Iterable[ProvenanceGraph], reduced: bool = False) -> Iterable[str]:
    """Yield one JSONL edge line per edge, in graph order then seq order.

    With reduced=True, merged-edge bookkeeping (`count`, `first_seq`) is
    included so reduced graphs round-trip through the same format.
    """
    for g in graphs:
        for e in g.edges:
            obj: dict = {
                "graph_id": g.graph_id,
                "src": e.src,
                "src_type": g.nodes[e.src],
                "dst": e.dst,
                "dst_type": g.nodes[e.dst],
                "edge_type": e.edge_type,
            }
            if e.timestamp is not None:
                obj["ts"] = e.timestamp
            if reduced:
                obj["count"] = e.count
                obj["first_seq"] = e.first_seq
            yield json.dumps(obj, sort_keys=True)


def parse_reduced_jsonl(stream: IO[bytes] | Iterable[bytes]) -> list[ProvenanceGraph]:
    """Parse JSONL that may carry `count`/`first_seq` keys from a reduce stage.

    `first_seq`, when present, is restored as the edge's seq so re-reducing an
    already-reduced file is byte-idempotent.
    """
    builder = _GraphBuilder()
    extras: dict[str, list[tuple[int, int | None]]] = {}
    for line_no, text in _iter_lines(stream):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
        missing = [k for k in _JSONL_REQUIRED if k not in obj]
        if missing:
            raise SchemaError(line_no, f"missing required key(s): {', '.join(missing)}")
        graph_id = str(obj["graph_id"])
        builder.add_edge(
            line_no, graph_id, str(obj["src"]), str(obj["src_type"]),
            str(obj["dst"]), str(obj["dst_type"]), str(obj["edge_type"]),
            timestamp=obj.get("ts"),
        )
        first_seq = obj.get("first_seq")
        extras.setdefault(graph_id, []).append(
            (int(obj.get("count", 1)), int(first_seq) if first_seq is not None else None)
        )
    for g in builder.graphs.values():
        for e, (count, first_seq) in zip(g.edges, extras[g.graph_id]):
            e.count = count
            if first_seq is not None:
                e.seq = first_seq
    return builder.finish()


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class StatsReport:
    nodes: int
    edges: int
    node_types: dict[str, int]
    edge_types: dict[str, int]
    max_out_degree: int
    acyclic: bool
    self_loops: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "nodes": self.nodes,
                "edges": self.edges,
                "node_types": dict(sorted(self.node_types.items())),
                "edge_types": dict(sorted(self.edge_types.items())),
                "max_out_degree": self.max_out_degree,
                "acyclic": self.acyclic,
                "self_loops": self.self_loops,
            },
            sort_keys=True,
        )


def _is_acyclic(nodes: Iterable[str], arcs: dict[str, set[str]]) -> bool:
    # Iterative DFS 3-coloring; recursion would overflow on long chains.
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    for root in color:
        if color[root] != WHITE:
            continue
        stack: list[tuple[str, Iterable[str]]] = [(root, iter(arcs.get(root, ())))]
        color[root] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == GRAY:
                    return False
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, iter(arcs.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return True


def graph_stats(graph: ProvenanceGraph) -> StatsReport:
    """Structural statistics; acyclicity is reported, never enforced."""
    node_types = Counter(graph.nodes.values())
    edge_types: Counter[str] = Counter()
    out_degree: Counter[str] = Counter()
    arcs: dict[str, set[str]] = {}
    self_loops = 0
    for e in graph.edges:
        edge_types[e.edge_type] += 1
        out_degree[e.src] += 1
        if e.src == e.dst:
            self_loops += 1
        else:
            arcs.setdefault(e.src, set()).add(e.dst)
    acyclic = self_loops == 0 and _is_acyclic(graph.nodes, arcs)
    return StatsReport(
        nodes=len(graph.nodes),
        edges=len(graph.edges),
        node_types=dict(node_types),
        edge_types=dict(edge_types),
        max_out_degree=max(out_degree.values(), default=0),
        acyclic=acyclic,
        self_loops=self_loops,
    )
