"""Maps from hash blocks to codeword blocks.

Two backends are available:

* ``XORSHIFT``: a 16-bit state machine. For hash block ``h`` the new state is
  ``rotl16(state ^ t[h], n)``; its ``n`` low bits, read two at a time from the
  most significant pair (00=A, 01=C, 10=G, 11=T), are the emitted block.
* ``TANS``: a tANS decoding table over 4-mers. A step reads ``nbBits`` hash
  bits to move to ``newX_base + bits`` and emits that state's 4-mer, which
  shapes codewords toward a 4-mer frequency model.

All pseudorandom choices come from SplitMix64 so tables are identical on every
platform.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from .sequence import SequenceLike, encode

DEFAULT_SEED = 0x5EED
DEFAULT_N = 8
DEFAULT_BLOCK_SIZE = 4

TANS_TABLE_LOG = 8
TANS_TABLE_SIZE = 1 << TANS_TABLE_LOG
TANS_ALPHABET = 256
TANS_BLOCK_SYMBOLS = 4

_MASK64 = (1 << 64) - 1


class Backend(enum.IntEnum):
    XORSHIFT = 0
    TANS = 1


def splitmix64(seed: int):
    """Infinite generator of SplitMix64 outputs."""
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


@dataclass(frozen=True)
class CodebookConfig:
    """Codebook parameters; everything a query needs to rebuild the same codebook.

    ``model_counts`` is only used by the tANS backend: 256 counts over 4-mers
    (index = 4-mer read as a base-4 number, first symbol most significant),
    normalized to sum to 256. ``None`` means the uniform model.
    """

    backend: Backend = Backend.XORSHIFT
    n: int = DEFAULT_N
    block_size: int = DEFAULT_BLOCK_SIZE
    seed: int = DEFAULT_SEED
    model_counts: Optional[Tuple[int, ...]] = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "backend", Backend(self.backend))
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        if self.backend is Backend.XORSHIFT:
            if self.n % 2 or not 2 <= self.n <= 16:
                raise ValueError(f"n must be even and in 2..16, got {self.n}")
            if not 1 <= self.block_size < self.n:
                raise ValueError(f"block_size must satisfy 1 <= block_size < n, got {self.block_size}")
        else:
            if self.model_counts is not None:
                counts = tuple(int(c) for c in self.model_counts)
                if len(counts) != TANS_ALPHABET or min(counts) < 0 or sum(counts) != TANS_TABLE_SIZE:
                    raise ValueError("model_counts must be 256 non-negative counts summing to 256")
                object.__setattr__(self, "model_counts", None if counts == (1,) * TANS_ALPHABET else counts)

    @property
    def symbols_per_block(self) -> int:
        return self.n // 2 if self.backend is Backend.XORSHIFT else TANS_BLOCK_SYMBOLS

    @property
    def rate(self) -> float:
        """Hash bits per sequence bit (XorShift only; tANS rates vary per state)."""
        return self.block_size / self.n

    def initial_state(self) -> int:
        return 0 if self.backend is Backend.XORSHIFT else TANS_TABLE_SIZE

    def blocks_for(self, seq_len: int) -> int:
        """Number of blocks whose codeword covers ``seq_len`` symbols."""
        k = self.symbols_per_block
        return -(-seq_len // k)


# XorShift backend -----------------------------------------------------------------------------------------------------
@lru_cache(maxsize=64)
def _ttable(seed: int, block_size: int, n: int) -> np.ndarray:
    # The top n bits of t[h] become the emitted block, so they are kept
    # distinct: from a fixed state, distinct hashes give distinct blocks.
    entries = []
    seen = set()
    for z in splitmix64(seed):
        v = z >> 48
        top = v >> (16 - n)
        if top in seen:
            continue
        seen.add(top)
        entries.append(v)
        if len(entries) == 1 << block_size:
            break
    out = np.array(entries, dtype=np.uint16)
    out.flags.writeable = False
    return out


def make_ttable(cfg: CodebookConfig) -> np.ndarray:
    """t-table: hash block value -> 16-bit word, pseudorandom and deterministic in ``seed``."""
    return _ttable(cfg.seed, cfg.block_size, cfg.n)


def _rotl16(x: int, r: int) -> int:
    r %= 16
    return ((x << r) | (x >> (16 - r))) & 0xFFFF


def _bits_to_codes(value: int, nbits: int) -> np.ndarray:
    return np.array([(value >> (nbits - 2 - 2 * k)) & 3 for k in range(nbits // 2)], dtype=np.uint8)


def en_dec_xorshift(state: int, hash_value: int, cfg: CodebookConfig) -> Tuple[np.ndarray, int]:
    """One XorShift step: returns ``(block codes, new state)``."""
    if not 0 <= hash_value < 1 << cfg.block_size:
        raise ValueError(f"hash block {hash_value} out of range for block_size={cfg.block_size}")
    if not 0 <= state <= 0xFFFF:
        raise ValueError("state must be a 16-bit value")
    t = int(make_ttable(cfg)[hash_value])
    new_state = _rotl16(state ^ t, cfg.n)
    return _bits_to_codes(new_state & ((1 << cfg.n) - 1), cfg.n), new_state


# tANS backend ---------------------------------------------------------------------------------------------------------
def normalize_counts(raw: Sequence[int], total: int = TANS_TABLE_SIZE) -> Tuple[int, ...]:
    """Scale counts to sum to ``total``; every symbol seen at least once keeps a count >= 1.

    Rounding slack is settled on the largest entries, ties by lower index.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (TANS_ALPHABET,) or (raw < 0).any():
        raise ValueError("expected 256 non-negative counts")
    if raw.sum() == 0:
        raw = np.ones(TANS_ALPHABET)
    present = raw > 0
    if present.sum() > total:
        raise ValueError("more distinct symbols than table slots")
    counts = np.where(present, np.maximum(1, np.floor(raw * total / raw.sum())), 0).astype(np.int64)
    order = sorted(range(TANS_ALPHABET), key=lambda s: (-raw[s], s))
    diff = total - int(counts.sum())
    i = 0
    while diff != 0:
        s = order[i % len(order)]
        if diff > 0:
            counts[s] += 1
            diff -= 1
        elif counts[s] > 1:
            counts[s] -= 1
            diff += 1
        i += 1
    return tuple(int(c) for c in counts)


def kmer_model(reference: SequenceLike) -> Tuple[int, ...]:
    """Normalized counts of the non-overlapping 4-mers of ``reference``."""
    codes = encode(reference)
    k = len(codes) // TANS_BLOCK_SYMBOLS
    blocks = codes[:k * TANS_BLOCK_SYMBOLS].reshape(k, TANS_BLOCK_SYMBOLS).astype(np.int64)
    idx = blocks @ np.array([64, 16, 4, 1])
    raw = np.bincount(idx, minlength=TANS_ALPHABET)
    return normalize_counts(raw)


@dataclass(frozen=True)
class TansTable:
    """Decoding table indexed by ``state - TANS_TABLE_SIZE``."""

    counts: Tuple[int, ...]
    symbol: np.ndarray
    new_x_base: np.ndarray
    nb_bits: np.ndarray

    @property
    def size(self) -> int:
        return len(self.symbol)


def build_tans_table(counts: Optional[Sequence[int]] = None) -> TansTable:
    """Spread symbols with stride ``5/8 * L + 3`` and derive per-state ``(symbol, newX_base, nbBits)``."""
    counts = tuple([1] * TANS_ALPHABET) if counts is None else tuple(int(c) for c in counts)
    return _tans_table(counts)


@lru_cache(maxsize=16)
def _tans_table(counts: Tuple[int, ...]) -> TansTable:
    size = TANS_TABLE_SIZE
    if sum(counts) != size:
        raise ValueError("counts must sum to the table size")
    step = (size * 5) // 8 + 3
    spread = np.empty(size, dtype=np.int32)
    pos = 0
    for s, c in enumerate(counts):
        for _ in range(c):
            spread[pos] = s
            pos = (pos + step) % size
    nxt = list(counts)
    symbol = np.empty(size, dtype=np.int32)
    base = np.empty(size, dtype=np.int32)
    nb = np.empty(size, dtype=np.int32)
    for i in range(size):
        s = int(spread[i])
        xs = nxt[s]
        nxt[s] += 1
        bits = TANS_TABLE_LOG - (xs.bit_length() - 1)
        symbol[i] = s
        nb[i] = bits
        base[i] = xs << bits
    for a in (symbol, base, nb):
        a.flags.writeable = False
    return TansTable(counts, symbol, base, nb)


def tans_table_for(cfg: CodebookConfig) -> TansTable:
    return build_tans_table(cfg.model_counts)


def kmer_codes(symbol: int) -> np.ndarray:
    return _bits_to_codes(symbol, 2 * TANS_BLOCK_SYMBOLS)


def en_dec_tans(state: int, hash_bits: str, table: TansTable) -> Tuple[np.ndarray, int]:
    """One tANS step: read ``hash_bits`` (exactly ``nbBits(state)`` of them), emit the 4-mer of the new state."""
    i = state - table.size
    if not 0 <= i < table.size:
        raise ValueError(f"tANS state {state} outside [{table.size}, {2 * table.size})")
    need = int(table.nb_bits[i])
    if len(hash_bits) != need or set(hash_bits) - {"0", "1"}:
        raise ValueError(f"state {state} consumes exactly {need} hash bits, got {hash_bits!r}")
    new_state = int(table.new_x_base[i]) + (int(hash_bits, 2) if need else 0)
    return kmer_codes(int(table.symbol[new_state - table.size])), new_state


# Shared ---------------------------------------------------------------------------------------------------------------
def block_bit_count(state: int, cfg: CodebookConfig) -> int:
    """Hash bits consumed by one expansion from ``state``."""
    if cfg.backend is Backend.XORSHIFT:
        return cfg.block_size
    return int(tans_table_for(cfg).nb_bits[state - TANS_TABLE_SIZE])


def en_dec(state: int, hash_value: int, cfg: CodebookConfig) -> Tuple[np.ndarray, int]:
    """Backend-independent step taking the hash block as an integer."""
    if cfg.backend is Backend.XORSHIFT:
        return en_dec_xorshift(state, hash_value, cfg)
    nb = block_bit_count(state, cfg)
    if not 0 <= hash_value < 1 << nb:
        raise ValueError(f"hash block {hash_value} out of range for {nb} bits")
    return en_dec_tans(state, format(hash_value, f"0{nb}b") if nb else "", tans_table_for(cfg))


@dataclass(frozen=True)
class KernelTables:
    """Flat arrays consumed by the search kernel for either backend."""

    backend: int
    n: int
    ttable: np.ndarray
    tans_symbols: np.ndarray  # (table size, 4) codes of each state's 4-mer
    tans_base: np.ndarray
    tans_nb: np.ndarray
    initial_state: int
    symbols_per_block: int
    max_children: int


@lru_cache(maxsize=64)
def kernel_tables(cfg: CodebookConfig) -> KernelTables:
    empty_i32 = np.zeros(1, dtype=np.int32)
    if cfg.backend is Backend.XORSHIFT:
        return KernelTables(0, cfg.n, make_ttable(cfg).astype(np.int64), np.zeros((1, 4), dtype=np.uint8),
                            empty_i32, empty_i32, 0, cfg.n // 2, 1 << cfg.block_size)
    table = tans_table_for(cfg)
    syms = np.stack([kmer_codes(int(s)) for s in table.symbol])
    return KernelTables(1, 2 * TANS_BLOCK_SYMBOLS, np.zeros(1, dtype=np.int64), syms,
                        table.new_x_base.astype(np.int32), table.nb_bits.astype(np.int32),
                        TANS_TABLE_SIZE, TANS_BLOCK_SYMBOLS, 1 << int(table.nb_bits.max()))
