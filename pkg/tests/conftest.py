import os

import pytest

from lingmess.corpus import Span, document_from_sentences

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def data_path(*parts: str) -> str:
    return os.path.join(DATA_DIR, *parts)


def make_doc(sentences, clusters=(), doc_key="test"):
    return document_from_sentences(doc_key, [list(s) for s in sentences],
                                   [list(c) for c in clusters])


def span(start, end=None) -> Span:
    return Span(start, start if end is None else end)


@pytest.fixture
def tiny_doc():
    return make_doc([["Anna", "Smith", "slept", "."], ["She", "woke", "up", "."]],
                    [[(0, 1), (4, 4)]])
