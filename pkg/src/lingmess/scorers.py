"""Span scoring heads.

The mention head scores a single span from its start/end token vectors
(two dot products plus a biaffine term). Antecedent heads score a
(candidate, query) pair as a sum of four bilinear forms over projected
start/end vectors; there is one shared head and one head per routing
category. Scores for all categories are computed for every pair and the
relevant one is selected by a category mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .categorizer import CATEGORIES, Category, SpanFeatures, categorize_features
from .corpus import Document, MentionPair, Span
from .numerics import ParamStore, gelu, gelu_prime

MENTION_FIELDS = ("W_s", "W_e", "v_s", "v_e", "B")
ANTECEDENT_FIELDS = ("W_s", "W_e", "B_ss", "B_es", "B_se", "B_ee")


@dataclass
class MentionHead:
    prefix: str
    W_s: np.ndarray
    W_e: np.ndarray
    v_s: np.ndarray
    v_e: np.ndarray
    B: np.ndarray

    @classmethod
    def bind(cls, store: ParamStore, prefix: str) -> "MentionHead":
        return cls(prefix, *(store[f"{prefix}.{f}"] for f in MENTION_FIELDS))


@dataclass
class AntecedentHead:
    prefix: str
    W_s: np.ndarray
    W_e: np.ndarray
    B_ss: np.ndarray
    B_es: np.ndarray
    B_se: np.ndarray
    B_ee: np.ndarray

    @classmethod
    def bind(cls, store: ParamStore, prefix: str) -> "AntecedentHead":
        return cls(prefix, *(store[f"{prefix}.{f}"] for f in ANTECEDENT_FIELDS))


def precedes(c: Span, q: Span) -> bool:
    return c.start < q.start or (c.start == q.start and c.end < q.end)


# ---------------------------------------------------------------------------
# Reference per-pair path (used by tests, diagnostics, and the masked-matrix
# equivalence checks).

def mention_score(span: Span, X: np.ndarray, head: MentionHead) -> float:
    ms = gelu(head.W_s @ X[span.start])
    me = gelu(head.W_e @ X[span.end])
    return float(ms @ head.v_s + me @ head.v_e + ms @ head.B @ me)


def antecedent_score(pair: MentionPair, X: np.ndarray,
                     head: AntecedentHead) -> float:
    c, q = pair.candidate, pair.query
    a_s_c = gelu(head.W_s @ X[c.start])
    a_e_c = gelu(head.W_e @ X[c.end])
    a_s_q = gelu(head.W_s @ X[q.start])
    a_e_q = gelu(head.W_e @ X[q.end])
    return float(a_s_c @ head.B_ss @ a_s_q + a_e_c @ head.B_es @ a_s_q
                 + a_s_c @ head.B_se @ a_e_q + a_e_c @ head.B_ee @ a_e_q)


@dataclass
class PairScoreBreakdown:
    f_m_c: float
    f_m_q: float
    f_a_shared: float
    f_a_expert: float
    category: Category
    total: float

    def to_json(self) -> dict:
        return {
            "f_m_c": self.f_m_c,
            "f_m_q": self.f_m_q,
            "f_a_shared": self.f_a_shared,
            "f_a_expert": self.f_a_expert,
            "category": self.category.value,
            "total": self.total,
        }


def pair_score(pair: MentionPair, X: np.ndarray, doc: Document,
               mention_head: MentionHead, shared_head: AntecedentHead,
               expert_heads: dict[Category, AntecedentHead],
               router=None) -> PairScoreBreakdown:
    """Full score breakdown for one (candidate, query) pair.

    ``router`` maps (candidate, query) spans to a Category; the default
    is the linguistic rule function.
    """
    if router is None:
        category = categorize_features(SpanFeatures(pair.candidate, doc),
                                       SpanFeatures(pair.query, doc))
    else:
        category = router(pair.candidate, pair.query)
    f_m_c = mention_score(pair.candidate, X, mention_head)
    f_m_q = mention_score(pair.query, X, mention_head)
    f_a_shared = antecedent_score(pair, X, shared_head)
    f_a_expert = antecedent_score(pair, X, expert_heads[category])
    return PairScoreBreakdown(
        f_m_c, f_m_q, f_a_shared, f_a_expert, category,
        f_m_c + f_m_q + f_a_shared + f_a_expert)


# ---------------------------------------------------------------------------
# Vectorized path: project once per head, score all pairs with matrix
# products, select expert values by a one-hot category mask.

class Projections:
    """Per-token start/end projections for one head, with backward."""

    def __init__(self, store: ParamStore, prefix: str, X: np.ndarray):
        self.prefix = prefix
        self.W_s = store[f"{prefix}.W_s"]
        self.W_e = store[f"{prefix}.W_e"]
        self.Sz = X @ self.W_s.T
        self.Ez = X @ self.W_e.T
        self.S = gelu(self.Sz)
        self.E = gelu(self.Ez)

    def backward(self, dS: np.ndarray, dE: np.ndarray, store: ParamStore,
                 X: np.ndarray) -> np.ndarray:
        dSz = dS * gelu_prime(self.Sz)
        dEz = dE * gelu_prime(self.Ez)
        store.grad(f"{self.prefix}.W_s")[...] += dSz.T @ X
        store.grad(f"{self.prefix}.W_e")[...] += dEz.T @ X
        return dSz @ self.W_s + dEz @ self.W_e


def mention_scores_vec(P: np.ndarray, Q: np.ndarray,
                       head: MentionHead) -> np.ndarray:
    """Scores of spans given projected start rows P and end rows Q."""
    return P @ head.v_s + Q @ head.v_e + np.einsum("ij,ij->i", P @ head.B, Q)


def mention_scores_vec_backward(g: np.ndarray, P: np.ndarray, Q: np.ndarray,
                                head: MentionHead, store: ParamStore):
    """Returns (dP, dQ); accumulates v_s/v_e/B gradients."""
    store.grad(f"{head.prefix}.v_s")[...] += P.T @ g
    store.grad(f"{head.prefix}.v_e")[...] += Q.T @ g
    store.grad(f"{head.prefix}.B")[...] += P.T @ (g[:, None] * Q)
    dP = np.outer(g, head.v_s) + g[:, None] * (Q @ head.B.T)
    dQ = np.outer(g, head.v_e) + g[:, None] * (P @ head.B)
    return dP, dQ


def pair_matrix(Pc, Qc, Pq, Qq, head: AntecedentHead) -> np.ndarray:
    """Antecedent scores for all (candidate, query) combinations.

    Pc/Qc are projected start/end rows of the candidate spans, Pq/Qq of
    the query spans; result[c, q] is the head's score for that pair.
    """
    return (Pc @ head.B_ss @ Pq.T + Qc @ head.B_es @ Pq.T
            + Pc @ head.B_se @ Qq.T + Qc @ head.B_ee @ Qq.T)


def pair_matrix_backward(G: np.ndarray, Pc, Qc, Pq, Qq,
                         head: AntecedentHead, store: ParamStore):
    """Returns (dPc, dQc, dPq, dQq); accumulates the four B gradients.

    G[c, q] is dLoss/dScore; invalid cells must already be zero.
    """
    store.grad(f"{head.prefix}.B_ss")[...] += Pc.T @ G @ Pq
    store.grad(f"{head.prefix}.B_es")[...] += Qc.T @ G @ Pq
    store.grad(f"{head.prefix}.B_se")[...] += Pc.T @ G @ Qq
    store.grad(f"{head.prefix}.B_ee")[...] += Qc.T @ G @ Qq
    GP = G @ Pq
    GQ = G @ Qq
    GTP = G.T @ Pc
    GTQ = G.T @ Qc
    dPc = GP @ head.B_ss.T + GQ @ head.B_se.T
    dQc = GP @ head.B_es.T + GQ @ head.B_ee.T
    dPq = GTP @ head.B_ss + GTQ @ head.B_es
    dQq = GTP @ head.B_se + GTQ @ head.B_ee
    return dPc, dQc, dPq, dQq


def score_matrix_masked(candidates: list[Span], queries: list[Span],
                        X: np.ndarray, doc: Document,
                        mention_head: MentionHead,
                        shared_head: AntecedentHead,
                        expert_heads: dict[Category, AntecedentHead],
                        router=None,
                        include_shared: bool = True,
                        include_expert: bool = True) -> np.ndarray:
    """Total F(c, q) for every cell; cells where c does not precede q are -inf.

    All expert heads are evaluated for every cell and the routed one is
    selected with a one-hot mask. ``router`` maps (candidate, query)
    spans to a Category; the default is the linguistic rule function.
    """
    if router is None:
        c_feats = [SpanFeatures(s, doc) for s in candidates]
        q_feats = [SpanFeatures(s, doc) for s in queries]
        feats = {s: f for s, f in zip(candidates, c_feats)}
        feats.update(zip(queries, q_feats))

        def router(c, q):
            return categorize_features(feats[c], feats[q])

    c_starts = np.array([s.start for s in candidates], dtype=np.intp)
    c_ends = np.array([s.end for s in candidates], dtype=np.intp)
    q_starts = np.array([s.start for s in queries], dtype=np.intp)
    q_ends = np.array([s.end for s in queries], dtype=np.intp)

    m_proj_s = gelu(X @ mention_head.W_s.T)
    m_proj_e = gelu(X @ mention_head.W_e.T)
    fm_c = mention_scores_vec(m_proj_s[c_starts], m_proj_e[c_ends], mention_head)
    fm_q = mention_scores_vec(m_proj_s[q_starts], m_proj_e[q_ends], mention_head)

    total = fm_c[:, None] + fm_q[None, :]
    if include_shared:
        S = gelu(X @ shared_head.W_s.T)
        E = gelu(X @ shared_head.W_e.T)
        total = total + pair_matrix(S[c_starts], E[c_ends],
                                    S[q_starts], E[q_ends], shared_head)
    if include_expert:
        cat = np.full((len(candidates), len(queries)), -1, dtype=np.intp)
        for a, c in enumerate(candidates):
            for b, q in enumerate(queries):
                if precedes(c, q):
                    cat[a, b] = CATEGORIES.index(router(c, q))
        expert_total = np.zeros_like(total)
        for t_idx, t in enumerate(CATEGORIES):
            head = expert_heads[t]
            S = gelu(X @ head.W_s.T)
            E = gelu(X @ head.W_e.T)
            A = pair_matrix(S[c_starts], E[c_ends], S[q_starts], E[q_ends], head)
            expert_total += np.where(cat == t_idx, A, 0.0)
        total = total + expert_total

    valid = np.array([[precedes(c, q) for q in queries] for c in candidates])
    return np.where(valid, total, -np.inf)
