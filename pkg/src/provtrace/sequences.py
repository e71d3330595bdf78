"""Assemble per-graph node-embedding sequences in temporal order.

Nodes are ordered by the seq of their earliest incident event (ties broken by
node id); each contributes its token's input vector as one row. Graphs larger
than n_max keep evenly strided samples spanning first to last node, so the
fixed-length input still covers the whole stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .ingest import EdgeRecord, ProvenanceGraph
from .reduce import ReducedGraph
from .skipgram import EmbeddingTable
from .walks import Tokenizer

DEFAULT_N_MAX = 512


@dataclass(slots=True)
class FeatureSequence:
    graph_id: str
    X: np.ndarray       # n_max x m float32; padded rows are zero
    mask: np.ndarray    # n_max bool; False marks padding
    label: str

    @property
    def valid_length(self) -> int:
        return int(self.mask.sum())


def temporal_node_order(graph: ProvenanceGraph) -> list[str]:
    """Node ids by first-touch seq, then lexicographic id."""
    first_touch: dict[str, int] = {}
    for e in graph.edges:
        for node in (e.src, e.dst):
            if node not in first_touch:
                first_touch[node] = e.seq
    # Isolated nodes (possible in hand-built graphs) sort after all events.
    sentinel = graph.edges[-1].seq + 1 if graph.edges else 0
    return sorted(graph.nodes, key=lambda n: (first_touch.get(n, sentinel), n))


def stride_indices(n: int, n_max: int) -> list[int]:
    """Evenly strided subsample floor(i * n / n_max); identity when n <= n_max."""
    if n <= n_max:
        return list(range(n))
    return [(i * n) // n_max for i in range(n_max)]


def _first_incoming(graph: ProvenanceGraph) -> dict[str, EdgeRecord]:
    first_in: dict[str, EdgeRecord] = {}
    for e in graph.edges:
        if e.dst not in first_in:
            first_in[e.dst] = e
    return first_in


def build_sequence(reduced: ReducedGraph | ProvenanceGraph, table: EmbeddingTable,
                   n_max: int = DEFAULT_N_MAX,
                   token_mode: str = "type") -> FeatureSequence:
    """Embed a graph's nodes into a padded, masked n_max x m matrix."""
    graph = reduced.base if isinstance(reduced, ReducedGraph) else reduced
    if not graph.nodes:
        raise ContractError(f"graph {graph.graph_id!r} has no nodes")
    if n_max < 1:
        raise ContractError(f"n_max must be >= 1, got {n_max}")

    tokenizer = Tokenizer(token_mode)
    first_in = _first_incoming(graph)
    ordered = temporal_node_order(graph)
    picked = [ordered[i] for i in stride_indices(len(ordered), n_max)]

    m = table.dim
    X = np.zeros((n_max, m), dtype=np.float32)
    mask = np.zeros(n_max, dtype=bool)
    for row, node_id in enumerate(picked):
        token = tokenizer.sequence_token(graph, node_id, first_in.get(node_id))
        X[row] = table.vector(token).astype(np.float32)
        mask[row] = True
    return FeatureSequence(graph_id=graph.graph_id, X=X, mask=mask, label=graph.label)
