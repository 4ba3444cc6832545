"""Document model, span arithmetic, and corpus ingestion.

Two on-disk formats are supported: a JSONL format (one document per
line with ``doc_key``, ``sentences`` and ``clusters`` fields) and the
CoNLL-2012 coreference column format. Spans are inclusive token index
ranges ``[start, end]`` everywhere.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field


class CorpusError(ValueError):
    """Malformed or invalid corpus input."""


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive token range [start, end] over the flattened document."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise CorpusError(f"invalid span [{self.start},{self.end}]")

    @property
    def width(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Token:
    text: str
    sentence_index: int
    doc_index: int


@dataclass(frozen=True)
class MentionPair:
    """Ordered pair: candidate strictly precedes query in the document."""

    candidate: Span
    query: Span

    def __post_init__(self):
        c, q = self.candidate, self.query
        if not (c.start < q.start or (c.start == q.start and c.end < q.end)):
            raise CorpusError(f"candidate {c} does not precede query {q}")


@dataclass
class Document:
    doc_key: str
    tokens: list[Token]
    gold_clusters: list[frozenset[Span]] = field(default_factory=list)

    def __post_init__(self):
        self.gold_clusters = [frozenset(c) for c in self.gold_clusters]
        n = len(self.tokens)
        for i, tok in enumerate(self.tokens):
            if tok.doc_index != i:
                raise CorpusError(
                    f"{self.doc_key}: token doc_index {tok.doc_index} at position {i}")
            if not tok.text:
                raise CorpusError(f"{self.doc_key}: empty token text at {i}")
        seen: set[Span] = set()
        for cluster in self.gold_clusters:
            if not cluster:
                raise CorpusError(f"{self.doc_key}: empty gold cluster")
            for span in cluster:
                if span.end >= n:
                    raise CorpusError(
                        f"{self.doc_key}: span [{span.start},{span.end}] out of bounds "
                        f"(document has {n} tokens)")
                if span in seen:
                    raise CorpusError(
                        f"{self.doc_key}: span [{span.start},{span.end}] appears in "
                        f"multiple gold clusters")
                seen.add(span)

    def __len__(self) -> int:
        return len(self.tokens)

    def words(self, span: Span) -> list[str]:
        return [t.text for t in self.tokens[span.start:span.end + 1]]

    def sentences(self) -> list[list[str]]:
        """Token texts grouped by sentence, in document order."""
        out: list[list[str]] = []
        for tok in self.tokens:
            if tok.sentence_index == len(out):
                out.append([])
            out[tok.sentence_index].append(tok.text)
        return out

    def sentence_bounds(self) -> list[tuple[int, int]]:
        """Per-sentence (first, last) flattened token indices, inclusive."""
        bounds: list[tuple[int, int]] = []
        for tok in self.tokens:
            if tok.sentence_index == len(bounds):
                bounds.append((tok.doc_index, tok.doc_index))
            else:
                first, _ = bounds[tok.sentence_index]
                bounds[tok.sentence_index] = (first, tok.doc_index)
        return bounds


def _tokens_from_sentences(sentences: list[list[str]]) -> list[Token]:
    tokens = []
    for s_idx, sent in enumerate(sentences):
        if not sent:
            raise CorpusError(f"sentence {s_idx} is empty")
        for word in sent:
            tokens.append(Token(word, s_idx, len(tokens)))
    return tokens


def document_from_sentences(doc_key: str, sentences: list[list[str]],
                            clusters: list[list[tuple[int, int]]]) -> Document:
    gold = [frozenset(Span(int(s), int(e)) for s, e in cluster) for cluster in clusters]
    return Document(doc_key, _tokens_from_sentences(sentences), gold)


def _as_text_lines(stream):
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw


def parse_jsonl(stream) -> list[Document]:
    """Parse one document per line; extra JSON fields are ignored."""
    docs = []
    for lineno, line in enumerate(_as_text_lines(stream), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise CorpusError(f"line {lineno}: malformed JSON ({err.msg})") from err
        try:
            doc = document_from_sentences(obj["doc_key"], obj["sentences"],
                                          obj.get("clusters", []))
        except KeyError as err:
            raise CorpusError(f"line {lineno}: missing field {err}") from err
        except CorpusError as err:
            raise CorpusError(f"line {lineno}: {err}") from err
        docs.append(doc)
    return docs


def document_to_json(doc: Document, extra: dict | None = None) -> dict:
    clusters = sorted(
        sorted((span.start, span.end) for span in cluster)
        for cluster in doc.gold_clusters)
    obj = {
        "doc_key": doc.doc_key,
        "sentences": doc.sentences(),
        "clusters": [[[s, e] for s, e in cluster] for cluster in clusters],
    }
    if extra:
        obj.update(extra)
    return obj


def serialize_jsonl(docs: list[Document]) -> str:
    return "".join(json.dumps(document_to_json(d), ensure_ascii=False) + "\n"
                   for d in docs)


def parse_conll2012(stream) -> list[Document]:
    """Parse the CoNLL-2012 column format, coreference column last.

    Bracket notation: ``(id`` opens, ``id)`` closes the most recent
    unclosed bracket with the same id, ``(id)`` is a single-token
    mention, ``-`` is empty; multiple entries are pipe-separated.
    """
    docs: list[Document] = []
    in_doc = False
    doc_key = ""
    sentences: list[list[str]] = []
    current: list[str] = []
    open_brackets: dict[int, list[int]] = {}
    clusters: dict[int, list[tuple[int, int]]] = {}
    tok_idx = 0

    def finish_doc():
        nonlocal sentences, current, open_brackets, clusters, tok_idx
        if current:
            sentences.append(current)
        dangling = [cid for cid, starts in open_brackets.items() if starts]
        if dangling:
            raise CorpusError(
                f"{doc_key}: unclosed coref bracket(s) for id(s) {sorted(dangling)}")
        spans = sorted(clusters.items())
        docs.append(document_from_sentences(
            doc_key, sentences, [v for _, v in spans]))
        sentences, current = [], []
        open_brackets, clusters = {}, {}
        tok_idx = 0

    for lineno, line in enumerate(_as_text_lines(stream), start=1):
        line = line.rstrip("\n")
        if line.startswith("#begin document"):
            in_doc = True
            doc_key = line[len("#begin document"):].strip().strip("()").strip()
            continue
        if line.startswith("#end document"):
            if not in_doc:
                raise CorpusError(f"line {lineno}: #end document outside a document")
            finish_doc()
            in_doc = False
            continue
        if not in_doc:
            continue
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        cols = line.split()
        if len(cols) < 4:
            raise CorpusError(f"line {lineno}: expected at least 4 columns")
        word = cols[3]
        coref = cols[-1]
        if coref != "-":
            for part in coref.split("|"):
                opens = part.startswith("(")
                closes = part.endswith(")")
                cid_str = part.strip("()")
                if not cid_str.isdigit():
                    raise CorpusError(f"line {lineno}: bad coref entry {part!r}")
                cid = int(cid_str)
                if opens:
                    open_brackets.setdefault(cid, []).append(tok_idx)
                if closes:
                    starts = open_brackets.get(cid)
                    if not starts:
                        raise CorpusError(
                            f"line {lineno}: close without open for id {cid}")
                    start = starts.pop()
                    clusters.setdefault(cid, []).append((start, tok_idx))
        current.append(word)
        tok_idx += 1

    if in_doc:
        raise CorpusError("stream ended inside a document (missing #end document)")
    return docs


def enumerate_spans(doc: Document, max_width: int) -> list[Span]:
    """All within-sentence spans up to max_width, ordered by (start, end)."""
    if max_width < 1:
        raise ValueError("max_width must be >= 1")
    spans = []
    for first, last in doc.sentence_bounds():
        for start in range(first, last + 1):
            for end in range(start, min(start + max_width - 1, last) + 1):
                spans.append(Span(start, end))
    spans.sort()
    return spans
