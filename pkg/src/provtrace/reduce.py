"""Causality-preserving reduction: merge repeated equivalent events.

An event (u, v, t) at seq s2 merges into the previous (u, v, t) occurrence at
seq s1 < s2 only when neither u nor v appears as an endpoint of any event in
the open interval (s1, s2). Any path through the removed edge has an
equivalent path through the kept edge, so reachability between surviving
nodes is unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .ingest import EdgeRecord, ProvenanceGraph


@dataclass(slots=True)
class ReducedGraph:
    base: ProvenanceGraph
    original_edge_count: int

    @property
    def graph_id(self) -> str:
        return self.base.graph_id

    @property
    def label(self) -> str:
        return self.base.label


def cpr_reduce(graph: ProvenanceGraph) -> ReducedGraph:
    """Collapse mergeable duplicate events; identity on the empty graph.

    Node set and types are untouched; merged edges carry the occurrence count
    and keep the seq of the earliest merged event, so the output edge list
    stays sorted by (first_)seq.
    """
    merged: list[EdgeRecord] = []
    # Latest surviving group per (src, dst, type), with the seq of its most
    # recent merged occurrence; differing edge types never merge.
    open_group: dict[tuple[str, str, str], tuple[int, int]] = {}
    last_activity: dict[str, int] = {}

    for e in graph.edges:
        key = (e.src, e.dst, e.edge_type)
        prior = open_group.get(key)
        mergeable = (
            prior is not None
            and last_activity.get(e.src, -1) <= prior[1]
            and last_activity.get(e.dst, -1) <= prior[1]
        )
        if mergeable:
            idx, _ = prior  # type: ignore[misc]
            merged[idx].count += e.count
            open_group[key] = (idx, e.seq)
        else:
            open_group[key] = (len(merged), e.seq)
            merged.append(replace(e))
        last_activity[e.src] = e.seq
        last_activity[e.dst] = e.seq

    reduced = ProvenanceGraph(
        graph_id=graph.graph_id,
        label=graph.label,
        nodes=dict(graph.nodes),
        edges=merged,
    )
    reduced.validate()
    return ReducedGraph(base=reduced, original_edge_count=sum(e.count for e in graph.edges))


def reduction_ratio(original: ProvenanceGraph, reduced: ReducedGraph) -> float:
    """Reduced edge count / original edge count; 1.0 for an edgeless graph."""
    if not original.edges:
        return 1.0
    return len(reduced.base.edges) / len(original.edges)
