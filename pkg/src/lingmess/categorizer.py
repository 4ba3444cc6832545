"""Deterministic routing of mention pairs into six categories.

A pair of pronouns routes to PronPronC or PronPronNC depending on
group compatibility; a pronoun paired with any other span routes to
EntPron; the remaining pairs are compared on their content-word sets
(Match / Contains / Other).
"""

from __future__ import annotations

from enum import Enum

from .corpus import Document, MentionPair, Span


class Category(Enum):
    PRON_PRON_C = "pron-pron-c"
    PRON_PRON_NC = "pron-pron-nc"
    ENT_PRON = "ent-pron"
    MATCH = "match"
    CONTAINS = "contains"
    OTHER = "other"


# Fixed order used for expert indexing and for the random-routing mapping.
CATEGORIES: tuple[Category, ...] = tuple(Category)

_PRONOUN_GROUPS: dict[int, tuple[str, ...]] = {
    1: ("i", "me", "my", "mine", "myself"),
    2: ("you", "your", "yours", "yourself", "yourselves"),
    3: ("he", "him", "his", "himself"),
    4: ("she", "her", "hers", "herself"),
    5: ("it", "its", "itself"),
    6: ("we", "us", "our", "ours", "ourselves"),
    7: ("they", "them", "their", "themselves"),
    8: ("that", "this"),
}

PRONOUN_TABLE: dict[str, int] = {
    word: gid for gid, words in _PRONOUN_GROUPS.items() for word in words
}

STOP_WORDS: frozenset[str] = frozenset({
    "'s", "a", "all", "an", "and", "at", "for", "from", "in", "into",
    "more", "of", "on", "or", "some", "the", "these", "those",
})


def pronoun_groups() -> dict[int, tuple[str, ...]]:
    return dict(_PRONOUN_GROUPS)


def is_pronoun(span: Span, doc: Document) -> bool:
    """True iff the span is a single token listed in the pronoun table."""
    if span.start != span.end:
        return False
    return doc.tokens[span.start].text.lower() in PRONOUN_TABLE


def pronouns_compatible(a: str, b: str) -> bool:
    try:
        return PRONOUN_TABLE[a.lower()] == PRONOUN_TABLE[b.lower()]
    except KeyError as err:
        raise ValueError(f"not a known pronoun: {err.args[0]!r}") from err


def content_words(span: Span, doc: Document) -> frozenset[str]:
    """Lowercased token texts of the span minus the stop-word set."""
    return frozenset(
        t.text.lower() for t in doc.tokens[span.start:span.end + 1]
    ) - STOP_WORDS


class SpanFeatures:
    """Precomputed routing features for one span (pronoun text or content set)."""

    __slots__ = ("pronoun", "content")

    def __init__(self, span: Span, doc: Document):
        self.pronoun = (doc.tokens[span.start].text.lower()
                        if is_pronoun(span, doc) else None)
        self.content = None if self.pronoun else content_words(span, doc)


def categorize_features(c: SpanFeatures, q: SpanFeatures) -> Category:
    if c.pronoun and q.pronoun:
        if PRONOUN_TABLE[c.pronoun] == PRONOUN_TABLE[q.pronoun]:
            return Category.PRON_PRON_C
        return Category.PRON_PRON_NC
    if c.pronoun or q.pronoun:
        return Category.ENT_PRON
    # Spans whose content-word sets are empty carry no lexical evidence:
    # they never yield Match or Contains.
    if not c.content or not q.content:
        return Category.OTHER
    if c.content == q.content:
        return Category.MATCH
    if c.content < q.content or q.content < c.content:
        return Category.CONTAINS
    return Category.OTHER


def categorize(pair: MentionPair, doc: Document) -> Category:
    """The rule-based routing function over a (candidate, query) pair."""
    return categorize_features(SpanFeatures(pair.candidate, doc),
                               SpanFeatures(pair.query, doc))


def _last_char_code(span: Span, doc: Document) -> int:
    # Multi-byte codepoints contribute their lowest byte.
    return ord(doc.tokens[span.end].text[-1]) & 0xFF


def categorize_random(pair: MentionPair, doc: Document) -> Category:
    """Content-independent pseudo-random routing for the ablation baseline.

    Category index = (code of the last character of each span's last
    token, summed) mod 6, over the fixed category order.
    """
    code = _last_char_code(pair.candidate, doc) + _last_char_code(pair.query, doc)
    return CATEGORIES[code % 6]
