"""Deterministic synthetic corpus generator.

Six document templates, cycled over the requested number of documents.
Each template has unambiguous gold clusters by construction and yields
both co-referring and non-co-referring mention pairs, so a memorizing
model can reach perfect scores and every expert sees training signal.

The templates are arranged so that every non-co-referring pair of gold
mentions gets direct training pressure toward a non-positive score:
either the later mention opens its cluster (so its training target is
the null antecedent), or the pair's category differs from the category
of every true antecedent of the later mention (so the expert for that
category also targets the null antecedent). Pairs outside both cases
receive only relative-ranking pressure and can drift to arbitrary
positive scores, which would spoil pairwise precision even for a model
that clusters the corpus perfectly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .categorizer import CATEGORIES, Category, SpanFeatures, categorize_features
from .corpus import Document, document_from_sentences
from .numerics import SplitMix64


class GenerationError(RuntimeError):
    """The template library failed to cover all categories."""


@dataclass(frozen=True)
class SynthSpec:
    n_docs: int
    seed: int = 2024

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValueError("n_docs must be positive")


_OBJECTS_A = ("report", "essay", "draft", "letter")
_OBJECTS_B = ("keys", "gloves", "wallet", "badge")
_ADJ_A = ("ready", "calm", "tired", "glad")
_FIRST_F = ("Anna", "Maria", "Lucia", "Elena")
_NAMES_F = (("Anna", "Smith"), ("Maria", "Lopez"),
            ("Lucia", "Klein"), ("Elena", "Moreau"))
_NAMES_M = (("Marco", "Vidal"), ("Greg", "Mason"),
            ("Omar", "Nagy"), ("Diego", "Costa"))
_ORGS_A = ("Acme", "Globex", "Initech", "Umbrella")
_ORGS_B = ("OPEC", "FIFA", "NASA", "UNESCO")
_PLACES = ("Dayton", "Oslo", "Lagos", "Quito")
_REGIONS = ("region", "valley", "county", "province")
_AREAS = ("area", "district", "zone", "basin")
_LEADERS = (("Bill", "Clinton"), ("Golda", "Meir"),
            ("Nelson", "Mandela"), ("Indira", "Gandhi"))
_TITLES = ("President", "Premier", "Chancellor", "Minister")
_VERBS = ("spoke", "waved", "paused", "nodded")


def _template_pron_c(pick):
    # {I, my} then {Anna, I}: the compatible-pronoun negatives
    # (I, I) and (my, I) point at a query whose true antecedent
    # is a name, so the pron-pron-c expert targets null for them.
    sentences = [
        ["``", "I", "finished", "my", pick(_OBJECTS_A), "''", "."],
        [pick(_FIRST_F), "replied", ",", "``", "I", "agree", "''", "."],
    ]
    clusters = [[(1, 1), (3, 3)], [(7, 7), (11, 11)]]
    return sentences, clusters


def _template_pron_nc(pick):
    # {I, he} then {She, her}: every incompatible-pronoun negative
    # either opens the second cluster or points at "her", whose true
    # antecedent pair (She, her) is compatible.
    sentences = [
        ["``", "I", "am", pick(_ADJ_A), "''", ",", "he", "said", "."],
        ["She", "lost", "her", pick(_OBJECTS_B), "."],
    ]
    clusters = [[(1, 1), (6, 6)], [(9, 9), (11, 11)]]
    return sentences, clusters


def _template_ent_pron(pick):
    # {Anna Smith, She}, {Marco Vidal, Vidal}, {I, she}: entity-pronoun
    # negatives point at cluster openers or at queries whose true
    # antecedents pair as contains or pron-pron-nc.
    f1, f2 = pick(_NAMES_F)
    m1, m2 = pick(_NAMES_M)
    sentences = [
        [f1, f2, "arrived", "."],
        ["She", "sat", "down", "."],
        [m1, m2, "waved", "."],
        [m2, "smiled", "."],
        ["``", "I", "agree", "''", ",", "she", "said", "."],
    ]
    clusters = [[(0, 1), (4, 4)], [(8, 9), (12, 12)], [(16, 16), (20, 20)]]
    return sentences, clusters


def _template_match(pick):
    # Two exact-repetition clusters with disjoint content words: the
    # cross-cluster pairs are category other, never match.
    org_a = pick(_ORGS_A)
    org_b = pick(_ORGS_B)
    sentences = [
        ["The", org_a, "board", "met", "."],
        ["The", org_a, "board", "adjourned", "."],
        ["The", org_b, "panel", "convened", "."],
        ["The", org_b, "panel", "voted", "."],
    ]
    clusters = [[(0, 2), (5, 7)], [(10, 12), (15, 17)]]
    return sentences, clusters


def _template_match_negative(pick):
    # One place name shared by three clusters: {Dayton, It},
    # {The region, Dayton}, {The Dayton area, Dayton}. The match
    # negatives point at queries whose true antecedents pair as
    # other or contains, so the match expert targets null for them.
    place = pick(_PLACES)
    sentences = [
        [place, "prospered", "."],
        ["It", "grew", "."],
        ["The", pick(_REGIONS), "struggled", "."],
        [place, "recovered", "."],
        ["The", place, pick(_AREAS), "expanded", "."],
        [place, "thrived", "."],
    ]
    clusters = [[(0, 0), (3, 3)], [(6, 7), (10, 10)],
                [(13, 15), (18, 18)]]
    return sentences, clusters


def _template_other(pick):
    # {Bill Clinton, The President} plus a contains cluster: all
    # cross-cluster pairs are category other with safe targets.
    p1, p2 = pick(_LEADERS)
    n1, n2 = pick(_NAMES_M)
    sentences = [
        [p1, p2, pick(_VERBS), "."],
        ["The", pick(_TITLES), "smiled", "."],
        [n1, n2, "arrived", "."],
        [n2, "left", "."],
    ]
    clusters = [[(0, 1), (4, 5)], [(8, 9), (12, 12)]]
    return sentences, clusters


TEMPLATES = (_template_pron_c, _template_pron_nc, _template_ent_pron,
             _template_match, _template_match_negative, _template_other)


def category_pair_counts(docs: list[Document]) -> dict[Category, list[int]]:
    """[positive, negative] gold-mention-pair counts per category."""
    counts = {t: [0, 0] for t in CATEGORIES}
    for doc in docs:
        mentions = sorted({s for c in doc.gold_clusters for s in c})
        cluster_of = {m: i for i, c in enumerate(doc.gold_clusters) for m in c}
        feats = [SpanFeatures(m, doc) for m in mentions]
        for a in range(len(mentions)):
            for b in range(a + 1, len(mentions)):
                t = categorize_features(feats[a], feats[b])
                positive = cluster_of[mentions[a]] == cluster_of[mentions[b]]
                counts[t][0 if positive else 1] += 1
    return counts


def generate_ambiguous(spec: SynthSpec) -> list[Document]:
    """Harder split: each document concatenates two template instances.

    The second half's mentions act as distractors for the first half's
    (and vice versa), adding cross-template negative pairs whose queries
    already have true antecedents of the same category. Resolving those
    is where routing quality shows up, so this split separates the
    training configurations that the plain split cannot.
    """
    base = generate(SynthSpec(n_docs=2 * spec.n_docs, seed=spec.seed))
    docs = []
    for i in range(spec.n_docs):
        a, b = base[2 * i], base[2 * i + 1]
        offset = len(a.tokens)
        sentences = a.sentences() + b.sentences()
        clusters = [[(s.start, s.end) for s in sorted(c)]
                    for c in a.gold_clusters]
        clusters += [[(s.start + offset, s.end + offset) for s in sorted(c)]
                     for c in b.gold_clusters]
        docs.append(document_from_sentences(
            f"synth-amb-{spec.seed}-{i:03d}", sentences, clusters))
    return docs


def generate(spec: SynthSpec) -> list[Document]:
    rng = SplitMix64(spec.seed)

    def pick(options):
        return options[rng.next_uint64() % len(options)]

    docs = []
    for i in range(spec.n_docs):
        sentences, clusters = TEMPLATES[i % len(TEMPLATES)](pick)
        docs.append(document_from_sentences(
            f"synth-{spec.seed}-{i:03d}", sentences, clusters))

    counts = category_pair_counts(docs)
    # One full template cycle guarantees every category appears with both
    # polarities; three cycles guarantee at least five of each.
    if spec.n_docs >= len(TEMPLATES):
        missing = [t.value for t, (pos, neg) in counts.items()
                   if pos == 0 or neg == 0]
        if missing:
            raise GenerationError(f"no pair coverage for: {missing}")
    if spec.n_docs >= 3 * len(TEMPLATES):
        short = [t.value for t, (pos, neg) in counts.items()
                 if pos < 5 or neg < 5]
        if short:
            raise GenerationError(f"fewer than 5 pos/neg pairs for: {short}")
    return docs
