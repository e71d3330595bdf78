"""Directed random walks over reduced graphs and their token corpora.

Each step picks uniformly among the current node's outgoing edges (probability
1/N per edge, 0 for non-edges); a walk ends early only at a sink. Walk i of a
node is drawn from an RNG seeded by (seed, node_index, i), so corpora do not
depend on generation order and per-node generation may run in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .errors import ConfigError
from .ingest import EdgeRecord, ProvenanceGraph
from .reduce import ReducedGraph

UNK_TOKEN = "<UNK>"

TOKEN_MODE_TYPE = "type"
TOKEN_MODE_TYPE_EDGE = "type_edge"

WALK_STRATEGY_UNIFORM = "uniform"


@dataclass(slots=True)
class WalkConfig:
    l: int = 10
    walks_per_node: int = 5
    seed: int = 0
    token_mode: str = TOKEN_MODE_TYPE
    strategy: str = WALK_STRATEGY_UNIFORM

    def validate(self) -> None:
        if self.l < 1:
            raise ConfigError(f"walk length l must be >= 1, got {self.l}")
        if self.walks_per_node < 1:
            raise ConfigError(f"walks_per_node must be >= 1, got {self.walks_per_node}")
        if self.token_mode not in (TOKEN_MODE_TYPE, TOKEN_MODE_TYPE_EDGE):
            raise ConfigError(f"unknown token_mode {self.token_mode!r}")
        if self.strategy != WALK_STRATEGY_UNIFORM:
            raise ConfigError(f"unknown walk strategy {self.strategy!r}")


class Tokenizer:
    """Maps nodes to corpus tokens.

    "type" mode uses the node type alone; "type_edge" additionally qualifies a
    node by the edge type it was reached through, which disambiguates roles
    (a process reached via exec vs. via fork). Walk sources and nodes without
    incoming events fall back to the bare type.
    """

    def __init__(self, mode: str = TOKEN_MODE_TYPE):
        if mode not in (TOKEN_MODE_TYPE, TOKEN_MODE_TYPE_EDGE):
            raise ConfigError(f"unknown token_mode {mode!r}")
        self.mode = mode

    def source_token(self, graph: ProvenanceGraph, node_id: str) -> str:
        return graph.nodes[node_id]

    def step_token(self, graph: ProvenanceGraph, node_id: str, via: EdgeRecord) -> str:
        if self.mode == TOKEN_MODE_TYPE:
            return graph.nodes[node_id]
        return f"{graph.nodes[node_id]}/{via.edge_type}"

    def sequence_token(self, graph: ProvenanceGraph, node_id: str,
                       first_in: EdgeRecord | None) -> str:
        if self.mode == TOKEN_MODE_TYPE or first_in is None:
            return graph.nodes[node_id]
        return f"{graph.nodes[node_id]}/{first_in.edge_type}"


@dataclass(slots=True)
class WalkCorpus:
    walks: list[list[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.walks)

    def token_count(self) -> int:
        return sum(len(w) for w in self.walks)

    def dump(self, fh: IO[str]) -> None:
        for walk in self.walks:
            fh.write(" ".join(walk))
            fh.write("\n")

    @classmethod
    def load(cls, fh: IO[str]) -> "WalkCorpus":
        walks = [line.split() for line in fh if line.strip()]
        return cls(walks=walks)


def _node_rng(seed: int, node_index: int) -> np.random.Generator:
    # Per-node stream keyed on (seed, node); walk results are therefore
    # independent of the order source nodes are scheduled in.
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed & (2**63 - 1), spawn_key=(node_index,))
    )


def generate_walks(reduced: ReducedGraph | ProvenanceGraph,
                   config: WalkConfig) -> WalkCorpus:
    """walks_per_node uniform directed walks from every node, token-encoded."""
    config.validate()
    graph = reduced.base if isinstance(reduced, ReducedGraph) else reduced
    tokenizer = Tokenizer(config.token_mode)
    adjacency = graph.out_edges()
    walks: list[list[str]] = []
    for node_index, node_id in enumerate(graph.nodes):
        rng = _node_rng(config.seed, node_index)
        for _ in range(config.walks_per_node):
            walk = [tokenizer.source_token(graph, node_id)]
            cur = node_id
            for _ in range(config.l):
                outs = adjacency[cur]
                if not outs:
                    break
                edge = outs[int(rng.integers(len(outs)))]
                walk.append(tokenizer.step_token(graph, edge.dst, edge))
                cur = edge.dst
            walks.append(walk)
    return WalkCorpus(walks=walks)


def generate_corpus(graphs: Iterable[ReducedGraph | ProvenanceGraph],
                    config: WalkConfig) -> WalkCorpus:
    """Concatenated corpus over several graphs (training-side helper)."""
    corpus = WalkCorpus()
    for g in graphs:
        corpus.walks.extend(generate_walks(g, config).walks)
    return corpus
