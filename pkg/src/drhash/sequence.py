"""Nucleotide alphabet and sequence I/O.

Symbols are stored as 2-bit codes in ``uint8`` arrays: A=0, C=1, G=2, T=3.
"""
from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

SYMBOLS = "ACGT"

_LUT = np.full(256, 255, dtype=np.uint8)
for _code, _ch in enumerate(SYMBOLS):
    _LUT[ord(_ch)] = _code
    _LUT[ord(_ch.lower())] = _code

SequenceLike = Union[str, bytes, np.ndarray]


class SequenceParseError(ValueError):
    """Raised when input contains a byte outside the nucleotide alphabet."""

    def __init__(self, position: int, byte: int):
        self.position = position
        self.byte = byte
        super().__init__(f"invalid nucleotide byte {byte!r} ({chr(byte)!r}) at byte offset {position}")


def encode(seq: SequenceLike) -> np.ndarray:
    """Convert text (or an existing code array) into a ``uint8`` code array."""
    if isinstance(seq, np.ndarray):
        if seq.size and int(seq.max()) > 3:
            raise ValueError("code array holds values outside 0..3")
        return np.ascontiguousarray(seq, dtype=np.uint8)
    if isinstance(seq, str):
        seq = seq.encode("ascii", errors="strict")
    raw = np.frombuffer(seq, dtype=np.uint8)
    codes = _LUT[raw]
    bad = np.flatnonzero(codes == 255)
    if bad.size:
        pos = int(bad[0])
        raise SequenceParseError(pos, int(raw[pos]))
    return codes


def decode(codes: np.ndarray) -> str:
    return "".join(SYMBOLS[c] for c in np.asarray(codes, dtype=np.uint8))


def parse_text(data: bytes) -> np.ndarray:
    """Parse plain ASCII or FASTA bytes into codes.

    Lines starting with ``>`` are skipped and line terminators are ignored.
    Every other byte must be one of ``ACGTacgt``; errors report the byte offset
    within ``data``.
    """
    chunks = []
    offset = 0
    for line in data.splitlines(keepends=True):
        start = offset
        offset += len(line)
        if line.startswith(b">"):
            continue
        body = line.rstrip(b"\r\n")
        try:
            chunks.append(encode(body))
        except SequenceParseError as exc:
            raise SequenceParseError(start + exc.position, exc.byte) from None
    if not chunks:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate(chunks)


def read_sequence(path: Union[str, Path]) -> np.ndarray:
    return parse_text(Path(path).read_bytes())


def random_sequence(rng: np.random.Generator, length: int) -> np.ndarray:
    """I.i.d. uniform nucleotides."""
    return rng.integers(0, 4, size=length, dtype=np.uint8)
