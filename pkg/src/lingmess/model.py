"""Model assembly: parameter construction, routing, and document scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .categorizer import (CATEGORIES, Category, SpanFeatures,
                          categorize_features)
from .corpus import Document, Span, enumerate_spans
from .encoder import EncodeCache, Vocab, encode
from .numerics import ParamStore, derive_seed, fan_in_uniform
from .scorers import (AntecedentHead, MentionHead, Projections,
                      mention_scores_vec, pair_matrix)

ROUTING_MODES = ("linguistic", "random", "shared_only", "experts_only")
LOSS_MODES = ("full", "coref_only")

EXPERT_PREFIXES = {t: f"expert.{t.value}" for t in CATEGORIES}


def build_params(cfg, vocab: Vocab) -> ParamStore:
    """All learnable tensors, seeded deterministically per tensor name."""
    store = ParamStore()

    def add(name: str, shape: tuple[int, ...], fan_in: int):
        store.add(name, fan_in_uniform(shape, fan_in, derive_seed(cfg.seed, name)))

    d_emb, d_enc, h = cfg.d_emb, cfg.d_enc, cfg.d_hidden
    add("embed", (len(vocab), d_emb), d_emb)
    add("enc.W", (d_enc, 3 * d_emb), 3 * d_emb)
    add("enc.b", (d_enc,), 3 * d_emb)
    add("mention.W_s", (h, d_enc), d_enc)
    add("mention.W_e", (h, d_enc), d_enc)
    add("mention.v_s", (h,), h)
    add("mention.v_e", (h,), h)
    add("mention.B", (h, h), h)
    for prefix in ["shared"] + [EXPERT_PREFIXES[t] for t in CATEGORIES]:
        add(f"{prefix}.W_s", (h, d_enc), d_enc)
        add(f"{prefix}.W_e", (h, d_enc), d_enc)
        for b in ("B_ss", "B_es", "B_se", "B_ee"):
            add(f"{prefix}.{b}", (h, h), h)
    return store


def prune_count(top_lambda: float, n_spans: int) -> int:
    return int(np.ceil(top_lambda * n_spans))


@dataclass
class DocState:
    """Forward-pass state for one document: scores plus backward caches."""

    doc: Document
    spans: list[Span]               # pruned spans in document order
    starts: np.ndarray
    ends: np.ndarray
    enc: EncodeCache
    m_proj: Projections
    Pm: np.ndarray                  # mention-head start rows per span
    Qm: np.ndarray
    fm: np.ndarray                  # (n,) mention scores of pruned spans
    all_spans: list[Span]
    fm_all: np.ndarray
    cat: np.ndarray                 # (n, n) category index, -1 where invalid
    proj: dict[str, Projections] = field(default_factory=dict)
    P: dict[str, np.ndarray] = field(default_factory=dict)
    Q: dict[str, np.ndarray] = field(default_factory=dict)
    A: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.spans)

    @property
    def valid(self) -> np.ndarray:
        # Spans are in (start, end) order, so "candidate precedes query"
        # is exactly the strict upper triangle.
        return np.triu(np.ones((self.n, self.n), dtype=bool), k=1)

    def pair_sums(self) -> np.ndarray:
        return self.fm[:, None] + self.fm[None, :]

    def totals(self, include_shared: bool, include_expert: bool) -> np.ndarray:
        """F matrix under the configured score composition; invalid cells -inf."""
        total = self.pair_sums()
        if include_shared:
            total = total + self.A["shared"]
        if include_expert:
            expert = np.zeros_like(total)
            for t_idx, t in enumerate(CATEGORIES):
                A = self.A[EXPERT_PREFIXES[t]]
                expert += np.where(self.cat == t_idx, A, 0.0)
            total = total + expert
        return np.where(self.valid, total, -np.inf)

    def totals_shared(self) -> np.ndarray:
        return np.where(self.valid, self.pair_sums() + self.A["shared"], -np.inf)

    def totals_expert(self, t: Category) -> np.ndarray:
        return np.where(self.valid,
                        self.pair_sums() + self.A[EXPERT_PREFIXES[t]], -np.inf)


class CorefModel:
    def __init__(self, cfg, vocab: Vocab, store: ParamStore | None = None):
        if cfg.routing_mode not in ROUTING_MODES:
            raise ValueError(f"unknown routing_mode {cfg.routing_mode!r}")
        self.cfg = cfg
        self.vocab = vocab
        self.store = store if store is not None else build_params(cfg, vocab)
        self.mention_head = MentionHead.bind(self.store, "mention")
        self.shared_head = AntecedentHead.bind(self.store, "shared")
        self.expert_heads = {
            t: AntecedentHead.bind(self.store, EXPERT_PREFIXES[t])
            for t in CATEGORIES
        }

    @property
    def include_shared(self) -> bool:
        return self.cfg.routing_mode != "experts_only"

    @property
    def include_expert(self) -> bool:
        return self.cfg.routing_mode not in ("shared_only",)

    def category_matrix(self, spans: list[Span], doc: Document) -> np.ndarray:
        """Category index per valid (candidate, query) cell, -1 elsewhere."""
        n = len(spans)
        cat = np.full((n, n), -1, dtype=np.intp)
        if self.cfg.routing_mode == "random":
            codes = [ord(doc.tokens[s.end].text[-1]) & 0xFF for s in spans]
            for a in range(n):
                for b in range(a + 1, n):
                    cat[a, b] = (codes[a] + codes[b]) % 6
        else:
            feats = [SpanFeatures(s, doc) for s in spans]
            for a in range(n):
                for b in range(a + 1, n):
                    cat[a, b] = CATEGORIES.index(
                        categorize_features(feats[a], feats[b]))
        return cat

    def router(self, doc: Document):
        """(candidate, query) -> Category callable under the routing mode."""
        if self.cfg.routing_mode == "random":
            def route(c: Span, q: Span) -> Category:
                code = ((ord(doc.tokens[c.end].text[-1]) & 0xFF)
                        + (ord(doc.tokens[q.end].text[-1]) & 0xFF))
                return CATEGORIES[code % 6]
            return route

        def route(c: Span, q: Span) -> Category:
            return categorize_features(SpanFeatures(c, doc), SpanFeatures(q, doc))
        return route

    def forward(self, doc: Document, spans: list[Span] | None = None) -> DocState:
        """Encode, prune (unless spans are given), and score all pairs."""
        cfg = self.cfg
        enc = encode(doc, self.store, self.vocab)
        X = enc.X
        m_proj = Projections(self.store, "mention", X)

        all_spans = enumerate_spans(doc, cfg.max_span_width)
        starts_all = np.array([s.start for s in all_spans], dtype=np.intp)
        ends_all = np.array([s.end for s in all_spans], dtype=np.intp)
        fm_all = mention_scores_vec(m_proj.S[starts_all], m_proj.E[ends_all],
                                    self.mention_head)
        if spans is None:
            k = prune_count(cfg.top_lambda, len(all_spans))
            top = sorted(range(len(all_spans)),
                         key=lambda i: (-fm_all[i], all_spans[i].start,
                                        all_spans[i].end))[:k]
            keep = sorted(top)
            spans = [all_spans[i] for i in keep]
        starts = np.array([s.start for s in spans], dtype=np.intp)
        ends = np.array([s.end for s in spans], dtype=np.intp)
        Pm = m_proj.S[starts]
        Qm = m_proj.E[ends]
        fm = mention_scores_vec(Pm, Qm, self.mention_head)

        state = DocState(doc, spans, starts, ends, enc, m_proj, Pm, Qm, fm,
                         all_spans, fm_all,
                         self.category_matrix(spans, doc))
        prefixes = []
        if self.include_shared:
            prefixes.append("shared")
        if self.include_expert:
            prefixes.extend(EXPERT_PREFIXES[t] for t in CATEGORIES)
        for prefix in prefixes:
            proj = Projections(self.store, prefix, X)
            P = proj.S[starts]
            Q = proj.E[ends]
            head = (self.shared_head if prefix == "shared"
                    else AntecedentHead.bind(self.store, prefix))
            state.proj[prefix] = proj
            state.P[prefix] = P
            state.Q[prefix] = Q
            state.A[prefix] = pair_matrix(P, Q, P, Q, head)
        return state
