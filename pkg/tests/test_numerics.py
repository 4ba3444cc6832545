import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import erf

from lingmess.numerics import (ParamStore, SplitMix64, bilinear,
                               check_gradients, derive_seed, fan_in_uniform,
                               gelu, gelu_prime, log_softmax)

FLOATS = st.floats(min_value=-20, max_value=20, allow_nan=False)


# ----------------------------------------------------------------- gelu

def test_gelu_reference_values():
    assert gelu(0.0) == 0.0
    x = np.array([-2.0, -0.5, 0.5, 2.0])
    want = x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    assert np.allclose(gelu(x), want, rtol=0, atol=0)


@given(FLOATS)
def test_gelu_prime_matches_finite_difference(x):
    h = 1e-6
    num = (gelu(x + h) - gelu(x - h)) / (2 * h)
    assert gelu_prime(x) == pytest.approx(num, abs=1e-6)


# ------------------------------------------------------------- bilinear

def test_bilinear_is_u_B_v():
    u = np.array([1.0, 2.0])
    v = np.array([3.0, 4.0, 5.0])
    B = np.arange(6, dtype=float).reshape(2, 3)
    assert bilinear(u, B, v) == pytest.approx(u @ B @ v)
    with pytest.raises(ValueError):
        bilinear(u, B, np.ones(2))


# ---------------------------------------------------------- log_softmax

@given(st.lists(FLOATS, min_size=1, max_size=8), FLOATS)
def test_log_softmax_shift_invariance_and_normalization(scores, shift):
    s = np.array(scores)
    out = log_softmax(s)
    assert np.exp(out).sum() == pytest.approx(1.0, abs=1e-12)
    shifted = log_softmax(s + shift)
    assert np.allclose(out, shifted, atol=1e-9)


def test_log_softmax_passes_minus_inf_through():
    out = log_softmax(np.array([0.0, -np.inf, 1.0]))
    assert out[1] == -np.inf
    assert np.exp(out).sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        log_softmax(np.array([-np.inf, -np.inf]))


# ------------------------------------------------------------------ rng

def test_splitmix64_is_deterministic_and_seed_sensitive():
    a = SplitMix64(42)
    b = SplitMix64(42)
    assert [a.next_uint64() for _ in range(5)] == \
        [b.next_uint64() for _ in range(5)]
    assert SplitMix64(43).next_uint64() != SplitMix64(42).next_uint64()


def test_splitmix64_uniforms_in_unit_interval():
    u = SplitMix64(7).uniforms(1000)
    assert u.shape == (1000,)
    assert np.all((u >= 0.0) & (u < 1.0))
    assert abs(u.mean() - 0.5) < 0.05


def test_derive_seed_depends_on_name_and_base():
    assert derive_seed(1, "embed") != derive_seed(1, "enc.W")
    assert derive_seed(1, "embed") != derive_seed(2, "embed")
    assert derive_seed(1, "embed") == derive_seed(1, "embed")


def test_fan_in_uniform_bounds_and_determinism():
    w = fan_in_uniform((50, 40), fan_in=40, seed=9)
    limit = 1.0 / math.sqrt(40)
    assert w.shape == (50, 40)
    assert np.all(np.abs(w) <= limit)
    assert np.array_equal(w, fan_in_uniform((50, 40), fan_in=40, seed=9))


# ------------------------------------------------------------ ParamStore

def test_param_store_tracks_entries_in_order():
    store = ParamStore()
    a = store.add("a", np.zeros(3))
    b = store.add("b", np.ones((2, 2)))
    assert store.names() == ["a", "b"]
    assert store["a"] is a and store["b"] is b
    assert store.n_entries() == 3 + 4
    store.grad("a")[:] = 5.0
    store.zero_grads()
    assert np.all(store.grad("a") == 0.0)
    with pytest.raises(KeyError):
        store["missing"]
    with pytest.raises(ValueError):
        store.add("a", np.zeros(1))


# -------------------------------------------------------- check_gradients

def test_check_gradients_accepts_correct_gradient():
    store = ParamStore()
    x = store.add("x", np.array([1.0, -2.0, 0.5]))

    def loss_and_grad(s):
        store.zero_grads()
        store.grad("x")[:] = 2 * x * np.cos(x * x)
        return float(np.sum(np.sin(x * x)))

    assert check_gradients(loss_and_grad, store, eps=1e-5) < 1e-7


def test_check_gradients_flags_wrong_gradient():
    store = ParamStore()
    x = store.add("x", np.array([1.0, -2.0]))

    def loss_and_grad(s):
        store.zero_grads()
        store.grad("x")[:] = x  # wrong: should be 2x
        return float(np.sum(x * x))

    assert check_gradients(loss_and_grad, store, eps=1e-5) > 0.1
