"""Coreference evaluation: MUC, B3, CEAF-phi4, LEA, the CoNLL average,
per-category pairwise P/R/F1, and a paired permutation test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .categorizer import CATEGORIES, Category, SpanFeatures, categorize_features
from .corpus import Document
from .inference import Clustering
from .model import CorefModel


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "f1": self.f1}


def _ratio(num: float, den: float) -> float:
    return 0.0 if den == 0 else num / den


def _as_pairs(key, response) -> list[tuple[list, list]]:
    """Normalize arguments to per-document (key clusters, response clusters)."""
    if isinstance(key, Clustering):
        key, response = [key], [response]
    by_key = {c.doc_key: c for c in response}
    pairs = []
    for k in key:
        r = by_key.get(k.doc_key, Clustering(k.doc_key, []))
        pairs.append(([set(c) for c in k.clusters],
                      [set(c) for c in r.clusters]))
    return pairs


def _muc_half(primary: list[set], secondary: list[set]) -> tuple[float, float]:
    num = den = 0.0
    mention_to_cluster = {m: i for i, c in enumerate(secondary) for m in c}
    for cluster in primary:
        partitions = {mention_to_cluster.get(m, ("twinless", m))
                      for m in cluster}
        num += len(cluster) - len(partitions)
        den += len(cluster) - 1
    return num, den


def muc(key, response) -> PRF:
    """Link-based metric over minimal cluster partitions."""
    r_num = r_den = p_num = p_den = 0.0
    for k, r in _as_pairs(key, response):
        n, d = _muc_half(k, r)
        r_num += n
        r_den += d
        n, d = _muc_half(r, k)
        p_num += n
        p_den += d
    return PRF(_ratio(p_num, p_den), _ratio(r_num, r_den))


def _b3_half(primary: list[set], secondary: list[set]) -> tuple[float, float]:
    num = den = 0.0
    mention_to_cluster = {m: c for c in secondary for m in c}
    for cluster in primary:
        for m in cluster:
            other = mention_to_cluster.get(m, {m})
            num += len(cluster & other) / len(cluster)
            den += 1
    return num, den


def b_cubed(key, response) -> PRF:
    """Per-mention overlap metric; twinless mentions act as singletons."""
    r_num = r_den = p_num = p_den = 0.0
    for k, r in _as_pairs(key, response):
        n, d = _b3_half(k, r)
        r_num += n
        r_den += d
        n, d = _b3_half(r, k)
        p_num += n
        p_den += d
    return PRF(_ratio(p_num, p_den), _ratio(r_num, r_den))


def _phi4(a: set, b: set) -> float:
    return 2.0 * len(a & b) / (len(a) + len(b))


def ceaf_phi4(key, response) -> PRF:
    """Optimal one-to-one entity alignment under the phi4 similarity."""
    sim_total = 0.0
    n_key = n_resp = 0
    for k, r in _as_pairs(key, response):
        n_key += len(k)
        n_resp += len(r)
        if k and r:
            sim = np.array([[_phi4(ke, re) for re in r] for ke in k])
            rows, cols = linear_sum_assignment(sim, maximize=True)
            sim_total += float(sim[rows, cols].sum())
    return PRF(_ratio(sim_total, n_resp), _ratio(sim_total, n_key))


def _lea_resolved(cluster: set, secondary: list[set]) -> float:
    if len(cluster) == 1:
        return 1.0 if any(cluster & other for other in secondary) else 0.0
    return sum(len(cluster & other) * (len(cluster & other) - 1) / 2.0
               for other in secondary)


def _lea_links(cluster: set) -> float:
    n = len(cluster)
    return 1.0 if n == 1 else n * (n - 1) / 2.0


def _lea_half(primary: list[set], secondary: list[set]) -> tuple[float, float]:
    num = den = 0.0
    for cluster in primary:
        num += len(cluster) * _lea_resolved(cluster, secondary) / _lea_links(cluster)
        den += len(cluster)
    return num, den


def lea(key, response) -> PRF:
    """Link-based entity-aware metric; singleton entities count a self-link."""
    r_num = r_den = p_num = p_den = 0.0
    for k, r in _as_pairs(key, response):
        n, d = _lea_half(k, r)
        r_num += n
        r_den += d
        n, d = _lea_half(r, k)
        p_num += n
        p_den += d
    return PRF(_ratio(p_num, p_den), _ratio(r_num, r_den))


@dataclass
class EvalReport:
    muc: PRF
    b3: PRF
    ceaf_phi4: PRF
    lea: PRF
    per_category: dict[Category, PRF] | None = None

    @property
    def conll_f1(self) -> float:
        return (self.muc.f1 + self.b3.f1 + self.ceaf_phi4.f1) / 3.0

    def to_json(self) -> dict:
        out = {"muc": self.muc.to_json(), "b3": self.b3.to_json(),
               "ceaf_phi4": self.ceaf_phi4.to_json(), "lea": self.lea.to_json(),
               "conll_f1": self.conll_f1}
        if self.per_category is not None:
            out["per_category"] = {t.value: prf.to_json()
                                   for t, prf in self.per_category.items()}
        return out

    def format_table(self) -> str:
        rows = [("MUC", self.muc), ("B3", self.b3),
                ("CEAF_phi4", self.ceaf_phi4), ("LEA", self.lea)]
        lines = [f"{'metric':<12}{'R':>8}{'P':>8}{'F1':>8}"]
        for name, prf in rows:
            lines.append(f"{name:<12}{prf.recall * 100:>8.2f}"
                         f"{prf.precision * 100:>8.2f}{prf.f1 * 100:>8.2f}")
        lines.append(f"{'CoNLL avg':<12}{'':>8}{'':>8}{self.conll_f1 * 100:>8.2f}")
        if self.per_category is not None:
            lines.append("")
            lines.append(f"{'category':<14}{'P':>8}{'R':>8}{'F1':>8}")
            for t, prf in self.per_category.items():
                lines.append(f"{t.value:<14}{prf.precision * 100:>8.2f}"
                             f"{prf.recall * 100:>8.2f}{prf.f1 * 100:>8.2f}")
        return "\n".join(lines)


def evaluate_clusterings(key: list[Clustering],
                         response: list[Clustering]) -> EvalReport:
    return EvalReport(muc(key, response), b_cubed(key, response),
                      ceaf_phi4(key, response), lea(key, response))


def conll_f1(key, response) -> float:
    return evaluate_clusterings(
        key if isinstance(key, list) else [key],
        response if isinstance(response, list) else [response]).conll_f1


def per_document_conll_f1(key: list[Clustering],
                          response: list[Clustering]) -> list[float]:
    by_key = {c.doc_key: c for c in response}
    return [conll_f1(k, by_key.get(k.doc_key, Clustering(k.doc_key, [])))
            for k in key]


def pairwise_by_category(docs: list[Document], model: CorefModel,
                         restrict_to_pruned: bool = False) -> dict[Category, PRF]:
    """Pairwise diagnostic over ordered gold-mention pairs.

    A pair counts as predicted positive when its total score exceeds 0;
    actual positive when both mentions share a gold cluster. Buckets are
    the linguistic categories regardless of the model's routing mode.
    """
    counts = {t: [0, 0, 0] for t in CATEGORIES}  # tp, fp, fn
    for doc in docs:
        mentions = sorted({s for c in doc.gold_clusters for s in c})
        if len(mentions) < 2:
            continue
        if restrict_to_pruned:
            pruned = set(model.forward(doc).spans)
            mentions = [m for m in mentions if m in pruned]
            if len(mentions) < 2:
                continue
        cluster_of = {m: i for i, c in enumerate(doc.gold_clusters) for m in c}
        state = model.forward(doc, spans=mentions)
        F = state.totals(model.include_shared, model.include_expert)
        feats = [SpanFeatures(m, doc) for m in mentions]
        for a in range(len(mentions)):
            for b in range(a + 1, len(mentions)):
                bucket = categorize_features(feats[a], feats[b])
                predicted = F[a, b] > 0.0
                actual = cluster_of[mentions[a]] == cluster_of[mentions[b]]
                if predicted and actual:
                    counts[bucket][0] += 1
                elif predicted:
                    counts[bucket][1] += 1
                elif actual:
                    counts[bucket][2] += 1
    out = {}
    for t, (tp, fp, fn) in counts.items():
        out[t] = PRF(_ratio(tp, tp + fp), _ratio(tp, tp + fn))
    return out


def permutation_test(per_doc_f1_a: list[float], per_doc_f1_b: list[float],
                     resamples: int = 10000, seed: int = 0) -> float:
    """Two-sided paired sign-flip test on the mean difference."""
    if len(per_doc_f1_a) != len(per_doc_f1_b):
        raise ValueError("paired score lists must have equal length")
    if resamples < 1000:
        raise ValueError("resamples must be >= 1000")
    diffs = np.asarray(per_doc_f1_a, dtype=np.float64) - np.asarray(
        per_doc_f1_b, dtype=np.float64)
    observed = abs(float(diffs.mean()))
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(resamples, diffs.size))
    resampled = np.abs((signs * diffs).mean(axis=1))
    hits = int(np.count_nonzero(resampled >= observed))
    return (1 + hits) / (resamples + 1)
