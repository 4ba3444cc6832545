"""Self-describing JSON checkpoints with exact float round-tripping."""

from __future__ import annotations

import json

import numpy as np

from .encoder import Vocab
from .model import CorefModel
from .numerics import ParamStore
from .training import TrainConfig

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def checkpoint_bytes(model: CorefModel) -> bytes:
    obj = {
        "format_version": FORMAT_VERSION,
        "config": model.cfg.to_dict(),
        "vocab": model.vocab.to_list(),
        "params": {
            name: {
                "shape": list(model.store[name].shape),
                "data": model.store[name].reshape(-1).tolist(),
            }
            for name in model.store.names()
        },
    }
    # repr-based float serialization round-trips float64 exactly.
    return (json.dumps(obj, sort_keys=True, separators=(",", ":"),
                       ensure_ascii=False) + "\n").encode("utf-8")


def save_checkpoint(path: str, model: CorefModel):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model))


def load_checkpoint(path: str) -> CorefModel:
    with open(path, "rb") as fh:
        obj = json.loads(fh.read().decode("utf-8"))
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r} "
            f"(expected {FORMAT_VERSION})")
    cfg = TrainConfig.from_dict(obj["config"])
    vocab = Vocab.from_list(obj["vocab"])
    store = ParamStore()
    expected = CorefModel(cfg, vocab)  # defines names and shapes
    for name in expected.store.names():
        if name not in obj["params"]:
            raise CheckpointError(f"missing parameter {name!r}")
        entry = obj["params"][name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != expected.store[name].shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {arr.shape}, expected "
                f"{expected.store[name].shape}")
        store.add(name, arr)
    extra = set(obj["params"]) - set(expected.store.names())
    if extra:
        raise CheckpointError(f"unexpected parameters: {sorted(extra)}")
    return CorefModel(cfg, vocab, store)
