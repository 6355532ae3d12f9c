"""Symbol/bit conversion, the shared pre-reconciliation shuffle and the OTP demo."""
from __future__ import annotations

import warnings

import numpy as np


class KeyReuseWarning(UserWarning):
    """The one-time-pad key was shorter than the message and had to be repeated."""


def bits_per_symbol(d: int) -> int:
    return max(1, int(d - 1).bit_length())


def symbols_to_bits(symbols, d: int = 7) -> np.ndarray:
    """Big-endian fixed-width binary of each symbol, concatenated."""
    sym = np.asarray(symbols, dtype=np.int64)
    if sym.size and (sym.min() < 0 or sym.max() >= d):
        raise ValueError(f"symbols must lie in 0..{d - 1}")
    width = bits_per_symbol(d)
    shifts = np.arange(width - 1, -1, -1)
    return ((sym[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def bits_to_words(bits, d: int = 7) -> np.ndarray:
    """Inverse of :func:`symbols_to_bits` without the alphabet check."""
    width = bits_per_symbol(d)
    b = np.asarray(bits, dtype=np.int64)
    if b.size % width:
        raise ValueError(f"bit count {b.size} is not a multiple of {width}")
    return b.reshape(-1, width) @ (1 << np.arange(width - 1, -1, -1))


def bits_to_symbols(bits, d: int = 7) -> np.ndarray:
    words = bits_to_words(bits, d)
    if words.size and words.max() >= d:
        raise ValueError(f"bit pattern decodes to {words.max()}, outside the alphabet of size {d}")
    return words


def shuffle_permutation(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)


def shared_shuffle(bits, seed: int) -> np.ndarray:
    b = np.asarray(bits)
    return b[shuffle_permutation(len(b), seed)]


def shared_unshuffle(bits, seed: int) -> np.ndarray:
    b = np.asarray(bits)
    out = np.empty_like(b)
    out[shuffle_permutation(len(b), seed)] = b
    return out


def _keystream(key_bits, nbits: int) -> np.ndarray:
    key = np.asarray(key_bits, dtype=np.uint8)
    if key.size == 0:
        raise ValueError("one-time pad needs a non-empty key")
    if key.size < nbits:
        warnings.warn(f"key of {key.size} bits repeated to cover {nbits} message bits; "
                      "a reused pad is not secure", KeyReuseWarning, stacklevel=3)
        key = np.resize(key, nbits)
    return key[:nbits]


def otp_encrypt(data: bytes, key_bits) -> bytes:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return np.packbits(bits ^ _keystream(key_bits, bits.size)).tobytes()


otp_decrypt = otp_encrypt
