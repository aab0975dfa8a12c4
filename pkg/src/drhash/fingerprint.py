"""Fixed-width folding of variable-length DRH bit strings."""
from __future__ import annotations

from dataclasses import dataclass

FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h = ((h ^ b) * FNV64_PRIME) & _MASK64
    return h


def pack_bits(bits: str) -> bytes:
    """8-byte little-endian bit length, then the bits MSB-first, zero-padded to a byte."""
    if set(bits) - {"0", "1"}:
        raise ValueError("bit string may only contain '0' and '1'")
    n = len(bits)
    body = int(bits + "0" * (-n % 8), 2).to_bytes((n + 7) // 8, "big") if n else b""
    return n.to_bytes(8, "little") + body


@dataclass(frozen=True)
class DrhFingerprint:
    value: int
    drh_bit_len: int
    window_len: int = 0

    def hex(self) -> str:
        return f"{self.value:016x}"


def fold(bits: str, window_len: int = 0) -> DrhFingerprint:
    """64-bit FNV-1a of the length-prefixed packed bits."""
    return DrhFingerprint(fnv1a_64(pack_bits(bits)), len(bits), window_len)
