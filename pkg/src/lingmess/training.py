"""Candidate generation, loss functions, manual backpropagation, and the
optimization loop with dynamic token batching."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .categorizer import CATEGORIES, Category
from .corpus import Document, Span
from .encoder import build_vocab, encode_backward
from .model import EXPERT_PREFIXES, LOSS_MODES, ROUTING_MODES, CorefModel, DocState
from .numerics import ParamStore, log_softmax
from .scorers import (AntecedentHead, mention_scores_vec_backward,
                      pair_matrix_backward)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    top_lambda: float = 0.4
    max_span_width: int = 10
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 100
    token_budget_train: int = 5000
    token_budget_eval: int = 10000
    seed: int = 12345
    d_emb: int = 32
    d_enc: int = 32
    d_hidden: int = 64
    min_count: int = 1
    routing_mode: str = "linguistic"
    loss_mode: str = "full"

    def __post_init__(self):
        if not 0.0 < self.top_lambda <= 1.0:
            raise ValueError("top_lambda must be in (0, 1]")
        for name in ("max_span_width", "epochs", "token_budget_train",
                     "token_budget_eval", "d_emb", "d_enc", "d_hidden"):
            if getattr(self, name) < (0 if name == "epochs" else 1):
                raise ValueError(f"{name} must be positive")
        if self.routing_mode not in ROUTING_MODES:
            raise ValueError(f"routing_mode must be one of {ROUTING_MODES}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path: str) -> TrainConfig:
    """Read a config file: JSON object, or flat ``key=value`` lines."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
    return TrainConfig.from_dict({k: _coerce(k, v) for k, v in raw.items()})


_DEFAULTS = TrainConfig()


def _coerce(name: str, value):
    """Coerce a raw config value to the type of the field's default."""
    if name not in TrainConfig.__dataclass_fields__:
        return value
    default = getattr(_DEFAULTS, name)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return str(value)


# ---------------------------------------------------------------------------
# Candidate sets and gold antecedents.

@dataclass
class CandidateSet:
    """Pruned spans preceding the query; the null antecedent is implicit."""

    query: Span
    candidates: list[Span]


def candidate_sets(pruned: list[Span]) -> list[CandidateSet]:
    return [CandidateSet(q, list(pruned[:i])) for i, q in enumerate(pruned)]


def restricted_candidates(cs: CandidateSet, t: Category,
                          doc: Document, router) -> CandidateSet:
    """Candidates of category t only; the null antecedent stays implicit."""
    kept = [c for c in cs.candidates if router(c, cs.query) is t]
    return CandidateSet(cs.query, kept)


def gold_cluster_ids(spans: list[Span], doc: Document) -> np.ndarray:
    """Cluster id per span, -1 for spans that are not gold mentions."""
    lookup = {span: cid for cid, cluster in enumerate(doc.gold_clusters)
              for span in cluster}
    return np.array([lookup.get(s, -1) for s in spans], dtype=np.intp)


# ---------------------------------------------------------------------------
# Loss functions. Scores vectors contain the candidate scores followed by
# the null-antecedent score (fixed 0); gold is a set of indices into that
# vector. Losses are negated log-marginals, minimized.

def marginal_nll(scores: np.ndarray, gold: set[int]) -> tuple[float, np.ndarray]:
    if not gold:
        raise ValueError("gold set must be nonempty (use the null antecedent)")
    logp = log_softmax(scores)
    gold_idx = np.fromiter(sorted(gold), dtype=np.intp)
    gold_logp = logp[gold_idx]
    m = float(np.max(gold_logp))
    lse_gold = m + math.log(float(np.sum(np.exp(gold_logp - m))))
    grad = np.exp(logp)
    grad[gold_idx] -= np.exp(gold_logp - lse_gold)
    return -lse_gold, grad


def coref_loss(scores: np.ndarray, gold: set[int]) -> tuple[float, np.ndarray]:
    """Marginal log-likelihood loss over the full candidate set with F scores."""
    return marginal_nll(scores, gold)


def shared_loss(scores: np.ndarray, gold: set[int]) -> tuple[float, np.ndarray]:
    """Same functional form, over F_s scores."""
    return marginal_nll(scores, gold)


def expert_loss(scores: np.ndarray, gold: set[int]) -> tuple[float, np.ndarray]:
    """Same functional form, over F_t scores restricted to category t."""
    return marginal_nll(scores, gold)


# ---------------------------------------------------------------------------
# Full-document loss with manual backpropagation.

def _loss_families(model: CorefModel) -> list[str]:
    cfg = model.cfg
    if cfg.routing_mode == "shared_only":
        return ["shared"]
    fams = ["coref"]
    if cfg.loss_mode == "full":
        if model.include_shared:
            fams.append("shared")
        fams.append("experts")
    return fams


def document_loss(doc: Document, model: CorefModel,
                  backward: bool = True) -> tuple[float, int]:
    """Sum of per-query losses; optionally accumulates gradients.

    Returns (loss, number of queries).
    """
    store = model.store
    state = model.forward(doc)
    n = state.n
    cluster_of = gold_cluster_ids(state.spans, doc)
    families = _loss_families(model)

    F = state.totals(model.include_shared, model.include_expert) \
        if "coref" in families else None
    Fs = state.totals_shared() if "shared" in families else None
    Ft = {t: state.totals_expert(t) for t in CATEGORIES} \
        if "experts" in families else None

    G_F = np.zeros((n, n))
    G_Fs = np.zeros((n, n))
    G_Ft = {t: np.zeros((n, n)) for t in CATEGORIES}
    total = 0.0

    for b in range(n):
        gold = {a for a in range(b)
                if cluster_of[b] >= 0 and cluster_of[a] == cluster_of[b]}
        if F is not None:
            scores = np.append(F[:b, b], 0.0)
            loss, grad = coref_loss(scores, gold or {b})
            total += loss
            G_F[:b, b] += grad[:b]
        if Fs is not None:
            scores = np.append(Fs[:b, b], 0.0)
            loss, grad = shared_loss(scores, gold or {b})
            total += loss
            G_Fs[:b, b] += grad[:b]
        if Ft is not None:
            for t_idx, t in enumerate(CATEGORIES):
                members = np.flatnonzero(state.cat[:b, b] == t_idx)
                scores = np.append(Ft[t][members, b], 0.0)
                gold_t = {i for i, a in enumerate(members) if a in gold}
                loss, grad = expert_loss(scores, gold_t or {len(members)})
                total += loss
                G_Ft[t][members, b] += grad[:len(members)]

    if backward:
        _document_backward(state, model, G_F, G_Fs, G_Ft)
    return total, n


def _document_backward(state: DocState, model: CorefModel,
                       G_F: np.ndarray, G_Fs: np.ndarray,
                       G_Ft: dict[Category, np.ndarray]):
    store = model.store
    n = state.n
    d_fm = np.zeros(n)
    head_G: dict[str, np.ndarray] = {}

    for G in [G_F, G_Fs] + [G_Ft[t] for t in CATEGORIES]:
        d_fm += G.sum(axis=1) + G.sum(axis=0)
    if model.include_shared:
        head_G["shared"] = G_F + G_Fs
    else:
        head_G["shared"] = G_Fs  # all zero when the family is off
    if model.include_expert:
        for t_idx, t in enumerate(CATEGORIES):
            head_G[EXPERT_PREFIXES[t]] = (G_F * (state.cat == t_idx)) + G_Ft[t]
    else:
        for t in CATEGORIES:
            head_G[EXPERT_PREFIXES[t]] = G_Ft[t]

    X = state.enc.X
    dX = np.zeros_like(X)

    dPm, dQm = mention_scores_vec_backward(d_fm, state.Pm, state.Qm,
                                           model.mention_head, store)
    dS_tok = np.zeros_like(state.m_proj.S)
    dE_tok = np.zeros_like(state.m_proj.E)
    np.add.at(dS_tok, state.starts, dPm)
    np.add.at(dE_tok, state.ends, dQm)
    dX += state.m_proj.backward(dS_tok, dE_tok, store, X)

    for prefix, G in head_G.items():
        if prefix not in state.proj or not G.any():
            continue
        head = AntecedentHead.bind(store, prefix)
        P, Q = state.P[prefix], state.Q[prefix]
        dPc, dQc, dPq, dQq = pair_matrix_backward(G, P, Q, P, Q, head, store)
        dP = dPc + dPq
        dQ = dQc + dQq
        dS_tok = np.zeros_like(state.proj[prefix].S)
        dE_tok = np.zeros_like(state.proj[prefix].E)
        np.add.at(dS_tok, state.starts, dP)
        np.add.at(dE_tok, state.ends, dQ)
        dX += state.proj[prefix].backward(dS_tok, dE_tok, store, X)

    encode_backward(state.enc, dX, store)


def total_loss(doc: Document, model: CorefModel) -> tuple[float, int]:
    """Loss with gradients accumulated into the model's parameter store."""
    return document_loss(doc, model, backward=True)


# ---------------------------------------------------------------------------
# Optimizer and training loop.

class Adam:
    def __init__(self, store: ParamStore, lr: float, beta1: float,
                 beta2: float, eps: float):
        self.store = store
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(store[name]) for name in store.names()}
        self.v = {name: np.zeros_like(store[name]) for name in store.names()}

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name in self.store.names():
            g = self.store.grad(name)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            self.store[name][...] -= self.lr * (m / bc1) / (
                np.sqrt(v / bc2) + self.eps)


def batches(docs: list[Document], token_budget: int):
    """Greedy in-order batching: add documents until the budget is exceeded."""
    batch: list[Document] = []
    used = 0
    for doc in docs:
        if batch and used + len(doc) > token_budget:
            yield batch
            batch, used = [], 0
        batch.append(doc)
        used += len(doc)
    if batch:
        yield batch


def prune_mentions(doc: Document, model: CorefModel) -> list[Span]:
    """Top-scoring spans under the mention scorer, in document order."""
    return model.forward(doc).spans


def train(docs: list[Document], cfg: TrainConfig,
          model: CorefModel | None = None,
          log_fn=None) -> tuple[CorefModel, list[dict]]:
    """Adam training over all documents; returns the model and per-epoch log.

    The logged loss is the per-query mean of the summed objective.
    """
    if not docs:
        raise ValueError("no training documents")
    if model is None:
        vocab = build_vocab(docs, cfg.min_count)
        model = CorefModel(cfg, vocab)
    opt = Adam(model.store, cfg.learning_rate, cfg.adam_beta1,
               cfg.adam_beta2, cfg.adam_eps)
    log = []
    for epoch in range(cfg.epochs):
        epoch_loss = 0.0
        epoch_queries = 0
        for batch in batches(docs, cfg.token_budget_train):
            model.store.zero_grads()
            for doc in batch:
                loss, n_q = document_loss(doc, model)
                epoch_loss += loss
                epoch_queries += n_q
            if not math.isfinite(epoch_loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}; reduce the learning rate")
            opt.step()
        entry = {"epoch": epoch,
                 "loss": epoch_loss / max(epoch_queries, 1),
                 "queries": epoch_queries}
        log.append(entry)
        if log_fn:
            log_fn(entry)
    return model, log
