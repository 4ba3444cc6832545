"""Dense float64 numerics: activations, bilinear forms, a named parameter
store with gradient slots, a seeded initializer, and a finite-difference
gradient checker."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_MASK64 = (1 << 64) - 1


def gelu(x):
    """x * Phi(x) with the exact erf-based standard normal CDF."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + special.erf(x / _SQRT2))


def gelu_prime(x):
    """d/dx gelu(x) = Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + special.erf(x / _SQRT2))
    return cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def bilinear(u, B, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if u.shape != (B.shape[0],) or v.shape != (B.shape[1],):
        raise ValueError(
            f"dimension mismatch: u{u.shape} B{B.shape} v{v.shape}")
    return float(u @ B @ v)


def log_softmax(scores) -> np.ndarray:
    """Stable log-probabilities; -inf inputs stay -inf (masked entries)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty score vector")
    m = np.max(s)
    if m == -np.inf:
        raise ValueError("all scores are -inf: no valid candidate")
    with np.errstate(invalid="ignore"):
        z = s - m
    z[s == -np.inf] = -np.inf
    lse = np.log(np.sum(np.exp(z)))
    return z - lse


class SplitMix64:
    """Tiny deterministic PRNG (splitmix64), stable across platforms."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1)."""
        return np.array([self.next_uint64() >> 11 for _ in range(n)],
                        dtype=np.float64) * 2.0 ** -53


def derive_seed(base_seed: int, name: str) -> int:
    """Stable per-tensor seed from a base seed and a tensor name."""
    h = 0xCBF29CE484222325  # FNV-1a 64-bit
    for byte in name.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return SplitMix64(base_seed ^ h).next_uint64()


def fan_in_uniform(shape: tuple[int, ...], fan_in: int, seed: int) -> np.ndarray:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    rng = SplitMix64(seed)
    scale = 1.0 / math.sqrt(fan_in)
    size = int(np.prod(shape))
    return ((rng.uniforms(size) * 2.0 - 1.0) * scale).reshape(shape)


class ParamStore:
    """Named float64 tensors with parallel gradient slots.

    Iteration order is insertion order and deterministic; parameter
    arrays are updated in place so outside views stay valid.
    """

    def __init__(self):
        self._params: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.ascontiguousarray(value, dtype=np.float64)
        self._params[name] = arr
        self._grads[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self):
        for g in self._grads.values():
            g[...] = 0.0

    def n_entries(self) -> int:
        return sum(p.size for p in self._params.values())


def check_gradients(loss_and_grad, store: ParamStore, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad(store)`` must zero the store's gradients, run a full
    forward/backward pass, and return the scalar loss.
    """
    if not 0.0 < eps <= 1e-3:
        raise ValueError("eps must be in (0, 1e-3]")
    loss = loss_and_grad(store)
    if not math.isfinite(loss):
        raise ValueError(f"non-finite loss {loss}")
    analytic = {name: store.grad(name).copy() for name in store.names()}
    worst = 0.0
    for name in store.names():
        flat = store[name].reshape(-1)
        aflat = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = loss_and_grad(store)
            flat[idx] = orig - eps
            f_minus = loss_and_grad(store)
            flat[idx] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise ValueError("non-finite loss at perturbed parameters")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = aflat[idx]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst
