import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lingmess.corpus import Span
from lingmess.encoder import build_vocab
from lingmess.inference import (Clustering, UnionFind, build_clusters,
                                clustering_from_gold, link_antecedents,
                                predict)
from lingmess.model import CorefModel
from lingmess.synthdata import SynthSpec, generate
from lingmess.training import TrainConfig, train

from conftest import make_doc


SPANS = [Span(0, 0), Span(1, 1), Span(2, 2), Span(3, 3)]


def masked(values):
    """Upper-triangular score matrix from a dense array; rest -inf."""
    n = len(values)
    M = np.full((n, n), -np.inf)
    for a in range(n):
        for b in range(a + 1, n):
            M[a, b] = values[a][b]
    return M


# ------------------------------------------------------------- linking

def test_link_picks_argmax_over_positive_scores():
    M = masked([[0, 3.0, -1.0, 0.5],
                [0, 0, 2.0, 1.5],
                [0, 0, 0, 2.5],
                [0, 0, 0, 0]])
    links = link_antecedents(SPANS, M)
    assert links == [(SPANS[0], None),
                     (SPANS[1], SPANS[0]),
                     (SPANS[2], SPANS[1]),
                     (SPANS[3], SPANS[2])]


def test_link_prefers_null_on_nonpositive_scores():
    # all candidate scores <= 0: the null antecedent (score 0) wins,
    # including the exact tie at 0
    M = masked([[0, -1.0, 0.0],
                [0, 0, -2.0],
                [0, 0, 0]])
    links = link_antecedents(SPANS[:3], M)
    assert all(c is None for _, c in links)


def test_link_tie_between_candidates_prefers_earliest():
    M = masked([[0, 1.0, 4.0],
                [0, 0, 4.0],
                [0, 0, 0]])
    links = link_antecedents(SPANS[:3], M)
    assert links[2] == (SPANS[2], SPANS[0])


def test_link_empty_input():
    assert link_antecedents([], np.zeros((0, 0))) == []


# ----------------------------------------------------------- union-find

def test_union_find_components():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    uf.union(1, 3)
    assert len({uf.find(i) for i in (0, 1, 3, 4)}) == 1
    assert uf.find(2) != uf.find(0)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=20))
def test_union_find_matches_naive_partition(edges):
    uf = UnionFind(10)
    naive = {i: {i} for i in range(10)}
    for a, b in edges:
        uf.union(a, b)
        merged = naive[a] | naive[b]
        for i in merged:
            naive[i] = merged
    for i in range(10):
        for j in range(10):
            assert (uf.find(i) == uf.find(j)) == (j in naive[i])


# ------------------------------------------------------------ clustering

def test_build_clusters_drops_singletons():
    links = [(SPANS[0], None), (SPANS[1], SPANS[0]),
             (SPANS[2], None), (SPANS[3], None)]
    c = build_clusters("d", links)
    assert c.doc_key == "d"
    assert c.clusters == [frozenset({SPANS[0], SPANS[1]})]


def test_build_clusters_merges_chains():
    # 1 -> 0 and 2 -> 1 form one three-mention chain
    links = [(SPANS[0], None), (SPANS[1], SPANS[0]), (SPANS[2], SPANS[1]),
             (SPANS[3], None)]
    c = build_clusters("d", links)
    assert c.clusters == [frozenset(SPANS[:3])]


def test_build_clusters_orders_by_first_mention():
    links = [(SPANS[0], None), (SPANS[1], None),
             (SPANS[2], SPANS[1]), (SPANS[3], SPANS[0])]
    c = build_clusters("d", links)
    assert c.clusters == [frozenset({SPANS[0], SPANS[3]}),
                          frozenset({SPANS[1], SPANS[2]})]


def test_clustering_mentions_and_gold():
    doc = make_doc([["a", "b", "c"]], clusters=[[(0, 0), (2, 2)]],
                   doc_key="k")
    c = clustering_from_gold(doc)
    assert c.doc_key == "k"
    assert c.mentions() == {Span(0, 0), Span(2, 2)}
    assert Clustering("x", [[Span(0, 0), Span(1, 1)]]).clusters == \
        [frozenset({Span(0, 0), Span(1, 1)})]


# --------------------------------------------------------------- predict

def test_predict_runs_and_is_deterministic():
    docs = generate(SynthSpec(n_docs=1, seed=9))
    cfg = TrainConfig(d_emb=4, d_enc=4, d_hidden=4, top_lambda=1.0)
    model = CorefModel(cfg, build_vocab(docs))
    a = predict(docs[0], model)
    b = predict(docs[0], model)
    assert a.doc_key == docs[0].doc_key
    assert a.clusters == b.clusters
    for cluster in a.clusters:
        assert len(cluster) >= 2


def test_predict_recovers_gold_after_overfitting():
    docs = generate(SynthSpec(n_docs=1, seed=1))
    cfg = TrainConfig(d_emb=12, d_enc=12, d_hidden=12, top_lambda=1.0,
                      epochs=300, learning_rate=3e-3, seed=3)
    model, _ = train(docs, cfg)
    got = predict(docs[0], model)
    assert set(got.clusters) == set(clustering_from_gold(docs[0]).clusters)
