"""Antecedent linking and coreference-chain formation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, Span
from .model import CorefModel

NULL = None  # the null antecedent in link lists


@dataclass
class Clustering:
    doc_key: str
    clusters: list[frozenset[Span]] = field(default_factory=list)

    def __post_init__(self):
        self.clusters = [frozenset(c) for c in self.clusters]

    def mentions(self) -> set[Span]:
        return {span for cluster in self.clusters for span in cluster}


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def link_antecedents(pruned: list[Span],
                     totals: np.ndarray) -> list[tuple[Span, Span | None]]:
    """Most likely antecedent per query; ties prefer the null antecedent,
    then the earliest candidate.

    ``totals[c, q]`` is the masked score matrix over pruned spans; the
    null antecedent's score is implicitly 0.
    """
    links = []
    for b, q in enumerate(pruned):
        col = totals[:b, b]
        best: Span | None = None
        if b > 0:
            top = float(np.max(col)) if col.size else -np.inf
            if top > 0.0:
                best = pruned[int(np.argmax(col))]
        links.append((q, best))
    return links


def build_clusters(doc_key: str,
                   links: list[tuple[Span, Span | None]]) -> Clustering:
    """Connected components of the link graph; singletons are dropped."""
    spans = [q for q, _ in links]
    index = {span: i for i, span in enumerate(spans)}
    uf = UnionFind(len(spans))
    for q, c in links:
        if c is not None:
            uf.union(index[q], index[c])
    groups: dict[int, set[Span]] = {}
    for span, i in index.items():
        groups.setdefault(uf.find(i), set()).add(span)
    clusters = [frozenset(g) for g in groups.values() if len(g) >= 2]
    clusters.sort(key=lambda c: min(c))
    return Clustering(doc_key, clusters)


def predict(doc: Document, model: CorefModel) -> Clustering:
    """Prune, score, link, and cluster one document."""
    state = model.forward(doc)
    totals = state.totals(model.include_shared, model.include_expert)
    return build_clusters(doc.doc_key, link_antecedents(state.spans, totals))


def clustering_from_gold(doc: Document) -> Clustering:
    return Clustering(doc.doc_key, list(doc.gold_clusters))
