"""Toy trainable contextual encoder.

Each token vector is produced from a window of three embeddings
(previous, current, next token within the same sentence, zero-padded
at sentence edges) passed through a single GeLU layer.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Document
from .numerics import ParamStore, gelu, gelu_prime


class Vocab:
    """Lowercased token type -> id; id 0 is UNK, id 1 is PAD."""

    UNK = 0
    PAD = 1
    RESERVED = ("<unk>", "<pad>")

    def __init__(self, types: list[str]):
        self.tokens = list(self.RESERVED) + list(types)
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("duplicate vocabulary entries")

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._ids.get(token.lower(), self.UNK)

    def to_list(self) -> list[str]:
        return list(self.tokens)

    @classmethod
    def from_list(cls, tokens: list[str]) -> "Vocab":
        if tuple(tokens[:2]) != cls.RESERVED:
            raise ValueError("vocabulary list must start with <unk>, <pad>")
        return cls(tokens[2:])


def build_vocab(docs: list[Document], min_count: int = 1) -> Vocab:
    """Token types with count >= min_count, by (descending count, string)."""
    if not docs:
        raise ValueError("cannot build a vocabulary from zero documents")
    counts = Counter(tok.text.lower() for doc in docs for tok in doc.tokens)
    types = sorted((t for t, c in counts.items() if c >= min_count),
                   key=lambda t: (-counts[t], t))
    return Vocab(types)


@dataclass
class EncodeCache:
    """Forward-pass intermediates needed by the backward pass."""

    ids: np.ndarray      # (n,) vocab ids
    left: np.ndarray     # (n,) index of previous in-sentence token, -1 if none
    right: np.ndarray    # (n,) index of next in-sentence token, -1 if none
    U: np.ndarray        # (n, 3*d_emb) concatenated window embeddings
    Z: np.ndarray        # (n, d_enc) pre-activations
    X: np.ndarray        # (n, d_enc) token vectors


def encode(doc: Document, store: ParamStore, vocab: Vocab) -> EncodeCache:
    E = store["embed"]
    W = store["enc.W"]
    b = store["enc.b"]
    d_emb = E.shape[1]
    n = len(doc)
    ids = np.array([vocab.id(t.text) for t in doc.tokens], dtype=np.intp)
    sent = np.array([t.sentence_index for t in doc.tokens], dtype=np.intp)
    idx = np.arange(n)
    left = np.where((idx > 0) & (np.roll(sent, 1) == sent), idx - 1, -1)
    right = np.where((idx < n - 1) & (np.roll(sent, -1) == sent), idx + 1, -1)
    left[0] = -1
    if n:
        right[-1] = -1
    U = np.zeros((n, 3 * d_emb))
    U[:, d_emb:2 * d_emb] = E[ids]
    has_l = left >= 0
    has_r = right >= 0
    U[has_l, :d_emb] = E[ids[left[has_l]]]
    U[has_r, 2 * d_emb:] = E[ids[right[has_r]]]
    Z = U @ W.T + b
    return EncodeCache(ids, left, right, U, Z, gelu(Z))


def encode_backward(cache: EncodeCache, dX: np.ndarray, store: ParamStore):
    """Accumulate embedding and mixer gradients given dLoss/dX."""
    W = store["enc.W"]
    d_emb = store["embed"].shape[1]
    dZ = dX * gelu_prime(cache.Z)
    store.grad("enc.b")[...] += dZ.sum(axis=0)
    store.grad("enc.W")[...] += dZ.T @ cache.U
    dU = dZ @ W
    dE = store.grad("embed")
    np.add.at(dE, cache.ids, dU[:, d_emb:2 * d_emb])
    has_l = cache.left >= 0
    has_r = cache.right >= 0
    np.add.at(dE, cache.ids[cache.left[has_l]], dU[has_l, :d_emb])
    np.add.at(dE, cache.ids[cache.right[has_r]], dU[has_r, 2 * d_emb:])
