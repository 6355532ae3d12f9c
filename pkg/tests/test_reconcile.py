import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oamqkd import reconcile
from oamqkd.reconcile import CascadeConfig, LocalParityOracle, ReconciliationError


def planted(n, qber, seed):
    rng = np.random.default_rng(seed)
    alice = rng.integers(0, 2, n).astype(np.uint8)
    bob = alice.copy()
    flips = rng.choice(n, size=int(round(qber * n)), replace=False)
    bob[flips] ^= 1
    return alice, bob


def test_block_parity_examples():
    assert reconcile.block_parity([]) == 0
    assert reconcile.block_parity([1]) == 1
    assert reconcile.block_parity([1, 1, 0, 1], 1, 3) == 1
    with pytest.raises(IndexError):
        reconcile.block_parity([1, 0], 1, 3)


@given(st.lists(st.integers(0, 1), min_size=0, max_size=64))
def test_block_parity_matches_xor_oracle(bits):
    expected = 0
    for b in bits:
        expected ^= b
    assert reconcile.block_parity(bits) == expected


def test_auto_block_size():
    assert reconcile.auto_block_size(0.105, 10_000) == 7
    assert reconcile.auto_block_size(0.0, 500) == 500
    assert CascadeConfig().block_sizes(10_000, 0.105) == [7, 14, 28, 56]


def test_first_pass_is_identity_order():
    perms = reconcile.pass_permutations(50, 4, 1)
    np.testing.assert_array_equal(perms[0], np.arange(50))
    assert all(sorted(p) == list(range(50)) for p in perms)


def test_binary_locate_eight_bits():
    alice = np.zeros(8, dtype=np.uint8)
    for pos in range(8):
        bob = alice.copy()
        bob[pos] = 1
        oracle = LocalParityOracle(alice, [np.arange(8)])
        idx, queries = reconcile.binary_locate(oracle, bob, (0, 8), 0)
        assert idx == pos
        assert queries <= 3
        assert oracle.leaked_bits == queries


def test_binary_locate_planted_cases():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 300))
        alice = rng.integers(0, 2, n).astype(np.uint8)
        bob = alice.copy()
        start = int(rng.integers(0, n - 1))
        end = int(rng.integers(start + 1, n + 1))
        pos = int(rng.integers(start, end))
        bob[pos] ^= 1
        oracle = LocalParityOracle(alice, [np.arange(n)])
        idx, queries = reconcile.binary_locate(oracle, bob, (start, end),
                                               reconcile.block_parity(alice, start, end))
        assert idx == pos
        assert queries <= math.ceil(math.log2(end - start))
        assert oracle.leaked_bits == queries


def test_binary_locate_rejects_matching_parity():
    alice = np.zeros(8, dtype=np.uint8)
    oracle = LocalParityOracle(alice, [np.arange(8)])
    with pytest.raises(ReconciliationError):
        reconcile.binary_locate(oracle, alice.copy(), (0, 8), 0)


def test_identical_inputs_leak_only_block_parities():
    alice, _ = planted(10_000, 0.0, 1)
    res = reconcile.cascade(alice, alice.copy(), CascadeConfig(), qber=0.0)
    assert res.corrections == 0
    assert res.binary_queries == 0
    assert res.leaked_bits == 4  # one whole-key parity per pass
    res = reconcile.cascade(alice, alice.copy(), CascadeConfig(initial_block_size=100))
    sizes = CascadeConfig(initial_block_size=100).block_sizes(10_000, None)
    assert res.leaked_bits == sum(math.ceil(10_000 / k) for k in sizes)
    assert res.binary_queries == 0


def test_cascade_requires_qber_or_block_size():
    a, b = planted(100, 0.05, 2)
    with pytest.raises(ValueError):
        reconcile.cascade(a, b)
    with pytest.raises(ValueError):
        reconcile.cascade(a, b[:-1], qber=0.05)


def test_leakage_equals_transcript_parity_count():
    a, b = planted(5000, 0.08, 3)
    perms = reconcile.pass_permutations(5000, 4, 7)
    oracle = LocalParityOracle(a, perms)
    res = reconcile.cascade_bob(b, CascadeConfig(seed=7), oracle, 0.08, perms)
    assert res.leaked_bits == sum(len(ans) for _, _, ans in oracle.transcript)
    assert res.parity_exchanges == len(oracle.transcript)
    np.testing.assert_array_equal(res.corrected, a)


def test_back_tracking_fixes_even_error_blocks():
    # two errors in one first-pass block are invisible there and only found through later passes
    n = 64
    alice = np.zeros(n, dtype=np.uint8)
    bob = alice.copy()
    bob[[1, 2]] = 1
    res = reconcile.cascade(alice, bob, CascadeConfig(initial_block_size=8, seed=3))
    assert res.converged


@pytest.mark.parametrize("qber", [0.01, 0.05, 0.105, 0.15])
def test_convergence_rate(qber):
    ok = 0
    for trial in range(100):
        a, b = planted(2000, qber, 1000 + trial)
        res = reconcile.cascade(a, b, CascadeConfig(seed=trial), qber=qber)
        ok += bool(res.converged)
    assert ok >= 99


def test_cascade_is_deterministic():
    a, b = planted(3000, 0.1, 4)
    r1 = reconcile.cascade(a, b, CascadeConfig(seed=5), qber=0.1)
    r2 = reconcile.cascade(a, b, CascadeConfig(seed=5), qber=0.1)
    np.testing.assert_array_equal(r1.corrected, r2.corrected)
    assert r1.leaked_bits == r2.leaked_bits


def test_empty_key():
    empty = np.zeros(0, dtype=np.uint8)
    res = reconcile.cascade(empty, empty, qber=0.1)
    assert res.leaked_bits == 0 and res.converged


def test_binary_entropy():
    assert reconcile.binary_entropy(0.5) == 1.0
    assert reconcile.binary_entropy(0.0) == 0.0
    assert reconcile.binary_entropy(0.105) == pytest.approx(0.4846, abs=1e-4)
