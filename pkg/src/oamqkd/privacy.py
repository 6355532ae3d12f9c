"""Privacy amplification with Toeplitz hashing, and the final key length."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

# below this many multiply-adds np.convolve is exact and fast enough
_DIRECT_LIMIT = 4_000_000


@dataclass(frozen=True)
class ToeplitzSeed:
    bits: np.ndarray
    n_in: int
    n_out: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if self.n_in < 1 or self.n_out < 0:
            raise ValueError(f"invalid hash shape {self.n_out}x{self.n_in}")
        if bits.size != self.n_in + self.n_out - 1:
            raise ValueError(f"seed has {bits.size} bits, need n_in + n_out - 1 = {self.n_in + self.n_out - 1}")
        if np.any(bits > 1):
            raise ValueError("seed must be a bit string")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def random(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "ToeplitzSeed":
        return cls(rng.integers(0, 2, size=max(n_in + n_out - 1, 0), dtype=np.uint8), n_in, n_out)

    def matrix(self) -> np.ndarray:
        """Dense ``n_out x n_in`` matrix, entry [i, j] = bits[i - j + n_in - 1]."""
        i, j = np.indices((self.n_out, self.n_in))
        return self.bits[i - j + self.n_in - 1]


def toeplitz_hash(bits, seed: ToeplitzSeed, n_out: int | None = None) -> np.ndarray:
    x = np.asarray(bits, dtype=np.uint8)
    if n_out is None:
        n_out = seed.n_out
    if x.size != seed.n_in or n_out != seed.n_out:
        raise ValueError(f"seed is for {seed.n_in}->{seed.n_out} bits, got {x.size}->{n_out}")
    if n_out == 0:
        return np.zeros(0, dtype=np.uint8)
    n = x.size
    if seed.bits.size * n <= _DIRECT_LIMIT:
        conv = np.convolve(seed.bits.astype(np.int64), x.astype(np.int64))
    else:
        conv = np.rint(fftconvolve(seed.bits.astype(float), x.astype(float))).astype(np.int64)
    return (conv[n - 1:n - 1 + n_out] & 1).astype(np.uint8)


@dataclass(frozen=True)
class SecureLengthBudget:
    n_sift_symbols: int
    bits_per_symbol: float
    eve_bits_per_symbol: float
    ec_leakage: int = 0
    safety_margin: int = 0

    def __post_init__(self):
        for name in ("n_sift_symbols", "bits_per_symbol", "eve_bits_per_symbol", "ec_leakage", "safety_margin"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def secure_length(budget: SecureLengthBudget) -> int:
    gain = budget.bits_per_symbol - budget.eve_bits_per_symbol
    if gain <= 0:
        return 0
    raw = math.floor(budget.n_sift_symbols * gain + 1e-9)
    return max(raw - budget.ec_leakage - budget.safety_margin, 0)


def key_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def key_digest(bits) -> str:
    b = np.asarray(bits, dtype=np.uint8)
    h = hashlib.sha256(len(b).to_bytes(8, "big") + key_bytes(b))
    return h.hexdigest()
