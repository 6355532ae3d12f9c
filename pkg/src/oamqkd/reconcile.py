"""Cascade error correction with exact accounting of disclosed parities.

Bob drives the protocol and holds the noisy key; Alice only answers parity
queries through a :class:`ParityOracle`.  A query names a pass and a list
of half-open ranges ``[start, end)`` over that pass's permuted ordering.
Pass 0 uses the key order as given, later passes use seeded shuffles known
to both parties.  Every parity Alice discloses is counted once; parities
Bob can infer (the sibling of a queried half) are cached without leakage.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ReconciliationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CascadeConfig:
    passes: int = 4
    initial_block_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError("cascade needs at least one pass")
        if self.initial_block_size is not None and self.initial_block_size < 1:
            raise ValueError("block size must be positive")

    def block_sizes(self, n: int, qber: float | None) -> list[int]:
        k1 = self.initial_block_size or auto_block_size(qber, n)
        return [max(1, min(k1 * 2 ** p, n)) for p in range(self.passes)]


def auto_block_size(qber: float | None, n: int) -> int:
    if qber is None or qber <= 0:
        return max(n, 1)
    return max(1, min(round(0.73 / qber), n))


def pass_permutations(n: int, passes: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    perms = [np.arange(n)]
    for _ in range(1, passes):
        perms.append(rng.permutation(n))
    return perms


def block_parity(bits, start: int = 0, end: int | None = None) -> int:
    bits = np.asarray(bits)
    end = len(bits) if end is None else end
    if not 0 <= start <= end <= len(bits):
        raise IndexError(f"range [{start}, {end}) outside key of length {len(bits)}")
    return int(np.bitwise_xor.reduce(bits[start:end].astype(np.uint8), initial=0))


class ParityOracle:
    """Alice's side of the parity exchange.  Subclasses implement ``_ask``."""

    def __init__(self):
        self.leaked_bits = 0
        self.exchanges = 0

    def query(self, pass_index: int, ranges: Sequence[tuple[int, int]]) -> list[int]:
        if not ranges:
            return []
        answer = self._ask(pass_index, list(ranges))
        if len(answer) != len(ranges):
            raise ReconciliationError(f"asked {len(ranges)} parities, got {len(answer)}")
        self.leaked_bits += len(ranges)
        self.exchanges += 1
        return answer

    def _ask(self, pass_index: int, ranges: list[tuple[int, int]]) -> list[int]:
        raise NotImplementedError

    def finish(self) -> None:
        """Signal that no more queries will follow."""


def parities_for(bits: np.ndarray, perm: np.ndarray, ranges) -> list[int]:
    """Parities of ``bits[perm[start:end]]`` for each range; also Alice's answer."""
    permuted = np.asarray(bits, dtype=np.uint8)[perm]
    cum = np.concatenate(([0], np.cumsum(permuted, dtype=np.int64)))
    n = len(permuted)
    out = []
    for start, end in ranges:
        if not 0 <= start < end <= n:
            raise IndexError(f"range [{start}, {end}) outside key of length {n}")
        out.append(int((cum[end] - cum[start]) & 1))
    return out


class LocalParityOracle(ParityOracle):
    """Answers from Alice's key held in the same process."""

    def __init__(self, alice_bits, permutations: Sequence[np.ndarray]):
        super().__init__()
        self.alice = np.asarray(alice_bits, dtype=np.uint8)
        self.permutations = permutations
        self.transcript: list[tuple[int, list[tuple[int, int]], list[int]]] = []

    def _ask(self, pass_index, ranges):
        ans = parities_for(self.alice, self.permutations[pass_index], ranges)
        self.transcript.append((pass_index, ranges, ans))
        return ans


@dataclass
class ReconciliationResult:
    corrected: np.ndarray
    leaked_bits: int
    parity_exchanges: int
    corrections: int
    binary_queries: int
    residual_errors: int | None = None

    @property
    def converged(self) -> bool | None:
        return None if self.residual_errors is None else self.residual_errors == 0


class _Bob:
    def __init__(self, bits, sizes, perms, oracle: ParityOracle):
        self.bits = np.array(bits, dtype=np.uint8)
        self.n = len(self.bits)
        self.sizes = sizes
        self.perms = perms
        self._inv: dict[int, np.ndarray] = {}
        self.oracle = oracle
        self.known: dict[tuple[int, int, int], int] = {}
        self.binary_queries = 0
        self.corrections = 0

    def parity(self, p, start, end) -> int:
        return int(self.bits[self.perms[p][start:end]].sum() & 1)

    def ask(self, p, ranges) -> None:
        todo = [r for r in dict.fromkeys(ranges) if (p, *r) not in self.known]
        for r, a in zip(todo, self.oracle.query(p, todo)):
            self.known[(p, *r)] = a

    def block_of(self, p, i) -> tuple[int, int, int]:
        if p not in self._inv:
            self._inv[p] = np.argsort(self.perms[p])
        pos = int(self._inv[p][i])
        start = pos - pos % self.sizes[p]
        return p, start, min(start + self.sizes[p], self.n)

    def mismatched(self, blk) -> bool:
        return self.parity(*blk) != self.known[blk]

    def locate(self, p, blocks) -> list[int]:
        """Binary search every odd block of pass ``p`` in lockstep."""
        active = [[s, e, self.known[(p, s, e)]] for s, e in blocks]
        for s, e, a in active:
            if self.parity(p, s, e) == a:
                raise ReconciliationError(f"block [{s}, {e}) of pass {p} has matching parity")
        while True:
            wide = [b for b in active if b[1] - b[0] > 1]
            if not wide:
                break
            halves = [(lo, (lo + hi) // 2) for lo, hi, _ in wide]
            before = self.oracle.leaked_bits
            self.ask(p, halves)
            self.binary_queries += self.oracle.leaked_bits - before
            for b, (lo, mid) in zip(wide, halves):
                left = self.known[(p, lo, mid)]
                right = b[2] ^ left
                self.known.setdefault((p, mid, b[1]), right)
                if self.parity(p, lo, mid) != left:
                    b[1], b[2] = mid, left
                else:
                    b[0], b[2] = mid, right
        return [int(self.perms[p][s]) for s, _, _ in active]

    def run(self) -> None:
        odd: set[tuple[int, int, int]] = set()
        for p, size in enumerate(self.sizes):
            blocks = [(s, min(s + size, self.n)) for s in range(0, self.n, size)]
            self.ask(p, blocks)
            odd.update((p, s, e) for s, e in blocks if self.mismatched((p, s, e)))
            while odd:
                # smallest blocks first: cheapest searches, and they make later ones odd
                q = min(b[0] for b in odd)
                group = sorted((s, e) for r, s, e in odd if r == q)
                for i in self.locate(q, group):
                    self.bits[i] ^= 1
                    self.corrections += 1
                    for r in range(p + 1):
                        blk = self.block_of(r, i)
                        if self.mismatched(blk):
                            odd.add(blk)
                        else:
                            odd.discard(blk)


def binary_locate(oracle: ParityOracle, bob_bits, block: tuple[int, int], alice_parity: int,
                  pass_index: int = 0, permutation: np.ndarray | None = None) -> tuple[int, int]:
    """Find one error in a block whose parity disagrees with Alice's.

    Returns ``(index, queries)`` where ``index`` is into ``bob_bits`` and
    ``queries`` is the number of parities disclosed, at most
    ``ceil(log2(block length))``.
    """
    bob_bits = np.asarray(bob_bits, dtype=np.uint8)
    n = len(bob_bits)
    perm = np.arange(n) if permutation is None else np.asarray(permutation)
    perms = {pass_index: perm}
    bob = _Bob(bob_bits, {pass_index: 1}, perms, oracle)
    start, end = block
    if not 0 <= start < end <= n:
        raise IndexError(f"block [{start}, {end}) outside key of length {n}")
    bob.known[(pass_index, start, end)] = int(alice_parity)
    (index,) = bob.locate(pass_index, [(start, end)])
    return index, bob.binary_queries


def cascade_bob(bob_bits, config: CascadeConfig, oracle: ParityOracle, qber: float | None = None,
                permutations: Sequence[np.ndarray] | None = None) -> ReconciliationResult:
    """Run Cascade from Bob's side against any parity oracle."""
    bits = np.asarray(bob_bits, dtype=np.uint8)
    n = len(bits)
    if n == 0:
        return ReconciliationResult(bits.copy(), 0, 0, 0, 0)
    sizes = config.block_sizes(n, qber)
    perms = permutations if permutations is not None else pass_permutations(n, config.passes, config.seed)
    bob = _Bob(bits, sizes, perms, oracle)
    bob.run()
    oracle.finish()
    return ReconciliationResult(bob.bits, oracle.leaked_bits, oracle.exchanges, bob.corrections,
                                bob.binary_queries)


def cascade(alice_bits, bob_bits, config: CascadeConfig = CascadeConfig(),
            qber: float | None = None) -> ReconciliationResult:
    """In-process Cascade; also reports the true residual error count."""
    alice = np.asarray(alice_bits, dtype=np.uint8)
    bob = np.asarray(bob_bits, dtype=np.uint8)
    if alice.shape != bob.shape:
        raise ValueError(f"key lengths differ: {alice.size} vs {bob.size}")
    if qber is None and config.initial_block_size is None:
        raise ValueError("need a QBER estimate or an explicit initial block size")
    perms = pass_permutations(len(alice), config.passes, config.seed)
    oracle = LocalParityOracle(alice, perms)
    result = cascade_bob(bob, config, oracle, qber, perms)
    result.residual_errors = int(np.count_nonzero(result.corrected != alice))
    return result


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)
