"""Byte- and bit-level views over a payload, shared by every randomness test."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ByteStream:
    """Immutable byte payload with cached numpy views.

    Bit order is MSB-first within each byte. Numpy views are materialized
    lazily and cached; the instance is safe to share across workers.
    """

    data: bytes

    def __post_init__(self):
        if isinstance(self.data, (bytearray, memoryview)):
            object.__setattr__(self, "data", bytes(self.data))
        elif not isinstance(self.data, bytes):
            raise TypeError("ByteStream expects a bytes-like payload")

    def __len__(self) -> int:
        return len(self.data)

    @property
    def length_bytes(self) -> int:
        return len(self.data)

    @property
    def n_bits(self) -> int:
        return len(self.data) * 8

    @cached_property
    def byte_array(self) -> np.ndarray:
        """Read-only uint8 view of the payload."""
        return np.frombuffer(self.data, dtype=np.uint8)

    @cached_property
    def bit_array(self) -> np.ndarray:
        """MSB-first 0/1 expansion, one uint8 per bit."""
        return np.unpackbits(self.byte_array)


def from_bytes(data) -> ByteStream:
    """Wrap a bytes-like object; ByteStream instances pass through unchanged."""
    if isinstance(data, ByteStream):
        return data
    return ByteStream(data)


def byte_histogram(s: ByteStream) -> np.ndarray:
    """Counts of each byte value 0..255; sums to length_bytes."""
    s = from_bytes(s)
    return np.bincount(s.byte_array, minlength=256).astype(np.int64)


def bits(s: ByteStream) -> np.ndarray:
    """The stream's bits, most-significant bit of each byte first."""
    return from_bytes(s).bit_array


def split_blocks(s: ByteStream, block_bits: int) -> list[np.ndarray]:
    """Consecutive full blocks of block_bits bits; a trailing partial block is discarded."""
    if block_bits < 1:
        raise ValueError("block_bits must be a positive integer")
    s = from_bytes(s)
    n_blocks = s.n_bits // block_bits
    ba = s.bit_array
    return [ba[i * block_bits:(i + 1) * block_bits] for i in range(n_blocks)]


def pack_bits(bit_seq) -> bytes:
    """Inverse of bits(): repack an MSB-first 0/1 sequence whose length is a multiple of 8."""
    arr = np.asarray(bit_seq, dtype=np.uint8)
    if arr.size % 8:
        raise ValueError("bit count must be a multiple of 8")
    return np.packbits(arr).tobytes()
