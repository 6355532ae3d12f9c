import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import toeplitz

from oamqkd import privacy
from oamqkd.privacy import SecureLengthBudget, ToeplitzSeed


def _dense_oracle(seed: ToeplitzSeed, x):
    # scipy builds T from its first column and first row
    col = seed.bits[seed.n_in - 1:]
    row = seed.bits[:seed.n_in][::-1]
    return (toeplitz(col, row).astype(np.int64) @ np.asarray(x, dtype=np.int64)) % 2


def test_seed_length_checked():
    with pytest.raises(ValueError):
        ToeplitzSeed(np.zeros(9, dtype=np.uint8), 8, 3)
    with pytest.raises(ValueError):
        ToeplitzSeed(np.full(10, 2), 8, 3)


def test_hash_shape_mismatch():
    seed = ToeplitzSeed.random(8, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        privacy.toeplitz_hash(np.zeros(7), seed)
    with pytest.raises(ValueError):
        privacy.toeplitz_hash(np.zeros(8), seed, n_out=4)


def test_matrix_is_toeplitz():
    seed = ToeplitzSeed.random(6, 4, np.random.default_rng(1))
    m = seed.matrix()
    assert m.shape == (4, 6)
    for i in range(1, 4):
        np.testing.assert_array_equal(m[i, 1:], m[i - 1, :-1])


def test_zero_input_zero_output():
    seed = ToeplitzSeed.random(100, 40, np.random.default_rng(2))
    assert not privacy.toeplitz_hash(np.zeros(100, dtype=np.uint8), seed).any()


def test_eight_to_three_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        seed = ToeplitzSeed.random(8, 3, rng)
        x = rng.integers(0, 2, 8)
        np.testing.assert_array_equal(privacy.toeplitz_hash(x, seed), _dense_oracle(seed, x))
        np.testing.assert_array_equal((seed.matrix().astype(int) @ x) % 2, _dense_oracle(seed, x))


@pytest.mark.parametrize("n_in,n_out", [(3000, 1500), (5000, 2000)])
def test_fft_path_matches_dense_oracle(n_in, n_out):
    rng = np.random.default_rng(n_in)
    seed = ToeplitzSeed.random(n_in, n_out, rng)
    x = rng.integers(0, 2, n_in)
    assert seed.bits.size * n_in > privacy._DIRECT_LIMIT
    np.testing.assert_array_equal(privacy.toeplitz_hash(x, seed), _dense_oracle(seed, x))


@given(st.integers(1, 200), st.integers(0, 120), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_hash_is_gf2_linear(n_in, n_out, s):
    rng = np.random.default_rng(s)
    seed = ToeplitzSeed.random(n_in, n_out, rng)
    a = rng.integers(0, 2, n_in).astype(np.uint8)
    b = rng.integers(0, 2, n_in).astype(np.uint8)
    ha, hb = privacy.toeplitz_hash(a, seed), privacy.toeplitz_hash(b, seed)
    np.testing.assert_array_equal(privacy.toeplitz_hash(a ^ b, seed), ha ^ hb)
    np.testing.assert_array_equal(privacy.toeplitz_hash(a, seed), ha)


def test_output_bits_uniform_over_seeds():
    rng = np.random.default_rng(4)
    x = rng.integers(0, 2, 64)
    out = np.array([privacy.toeplitz_hash(x, ToeplitzSeed.random(64, 16, rng)) for _ in range(10_000)])
    assert np.all(np.abs(out.mean(axis=0) - 0.5) < 0.02)


def test_secure_length_examples():
    assert privacy.secure_length(SecureLengthBudget(1000, 2.05, 0.35, 300, 50)) == 1350
    assert privacy.secure_length(SecureLengthBudget(1, 2.05, 0.35)) == 1
    assert privacy.secure_length(SecureLengthBudget(100, 2.05, 0.35)) / 100 == pytest.approx(1.7)
    assert privacy.secure_length(SecureLengthBudget(1000, 1.0, 1.0)) == 0
    assert privacy.secure_length(SecureLengthBudget(1000, 0.5, 1.0)) == 0
    assert privacy.secure_length(SecureLengthBudget(10, 2.05, 0.35, 1000)) == 0


def test_secure_length_rejects_negative():
    with pytest.raises(ValueError):
        SecureLengthBudget(-1, 2.0, 0.3)


@given(st.integers(1, 10_000), st.floats(0.01, 3.0), st.floats(0.0, 3.0), st.integers(0, 5000))
@settings(max_examples=100, deadline=None)
def test_secure_length_shortens_key(n, i_ab, i_ae, leak):
    out = privacy.secure_length(SecureLengthBudget(n, i_ab, i_ae, leak))
    if i_ae > 0 or leak > 0:
        assert out < n * i_ab or out == 0
    assert out >= 0


def test_digest_distinguishes_length():
    a = np.zeros(8, dtype=np.uint8)
    b = np.zeros(9, dtype=np.uint8)
    assert privacy.key_bytes(a) == b"\x00"
    assert privacy.key_digest(a) != privacy.key_digest(b)
