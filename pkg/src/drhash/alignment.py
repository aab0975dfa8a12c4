"""Needleman-Wunsch alignment metric.

The distance between prefixes is filled row by row::

    M[0, j] = j * c_g,  M[i, 0] = i * c_g
    M[i, j] = min(M[i, j-1] + c_g, M[i-1, j] + c_g, M[i-1, j-1] + c_s * [S_i != T_j])

With strictly positive gap and substitution costs this is a metric on
sequences. ``extend_row`` exposes the row recurrence so a search can grow a
codeword one block at a time while carrying a single row of ``M``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .sequence import SequenceLike, encode

#: Sentinel for cells outside the stored band.
INF = 1 << 29
#: Upper bound on a single operation cost.
MAX_OP_COST = 1 << 16

DEFAULT_GAP_COST = 2
DEFAULT_SUB_COST = 3
DEFAULT_BAND = 16


class BandCollapseError(ValueError):
    """A row has no finite cell left, so the extension cannot be built."""


@dataclass(frozen=True)
class AlignmentParams:
    """Integer costs of the metric plus the optional band half-width.

    ``band=None`` disables banding. With banding on, after each symbol only
    cells within ``band`` positions of the (leftmost) row minimum are kept.
    """

    c_g: int = DEFAULT_GAP_COST
    c_s: int = DEFAULT_SUB_COST
    band: Optional[int] = DEFAULT_BAND

    def __post_init__(self):
        for name in ("c_g", "c_s"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise TypeError(f"{name} must be an integer, got {v!r}")
            if not 0 < v <= MAX_OP_COST:
                raise ValueError(f"{name} must be in 1..{MAX_OP_COST}, got {v}")
        if self.band is not None and self.band < 1:
            raise ValueError(f"band must be a positive integer or None, got {self.band}")

    @property
    def band_width(self) -> int:
        """Band as stored in kernels and files: 0 means disabled."""
        return 0 if self.band is None else int(self.band)

    def unbanded(self) -> "AlignmentParams":
        return AlignmentParams(self.c_g, self.c_s, None)


@dataclass(frozen=True)
class DistRow:
    """One row of ``M``: ``cells[k]`` is the distance to the SEQ prefix of length ``offset + k``."""

    offset: int
    cells: np.ndarray

    @property
    def min(self) -> int:
        return int(self.cells.min())

    def full(self, seq_len: int) -> np.ndarray:
        """Dense row of length ``seq_len + 1`` with ``INF`` outside the band."""
        out = np.full(seq_len + 1, INF, dtype=np.int32)
        out[self.offset:self.offset + len(self.cells)] = self.cells
        return out

    def __eq__(self, other):
        if not isinstance(other, DistRow):
            return NotImplemented
        return self.offset == other.offset and np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return f"DistRow(offset={self.offset}, cells={self.cells.tolist()})"


# Kernels --------------------------------------------------------------------------------------------------------------
@njit(cache=True, nogil=True)
def _init_row(row, seq_len, cg, band):
    """Fill ``row`` with ``j * cg``; returns the stored range (lo, hi)."""
    hi = seq_len
    if band > 0 and band < seq_len:
        hi = band
    for j in range(hi + 1):
        row[j] = j * cg
    return 0, hi


@njit(cache=True, nogil=True)
def _sub_costs(seq, cs):
    """``out[sym, j]`` = cost of aligning ``sym`` against ``seq[j]``."""
    out = np.empty((4, seq.shape[0]), dtype=np.int32)
    for sym in range(4):
        for j in range(seq.shape[0]):
            out[sym, j] = 0 if seq[j] == sym else cs
    return out


@njit(cache=True, nogil=True)
def _extend_symbol(old, olo, ohi, new, sub, cg, band):
    """Grow the codeword by one symbol whose substitution costs against SEQ are ``sub``.

    Only ``old[olo:ohi+1]`` is read; everything else counts as INF. Returns
    ``(row_min, lo, hi)`` of the new row.
    """
    n = sub.shape[0]
    v = old[olo] + cg
    new[olo] = v
    best = v
    arg = olo
    prev = v
    for j in range(olo + 1, ohi + 1):
        v = old[j] + cg
        d = old[j - 1] + sub[j - 1]
        if d < v:
            v = d
        c = prev + cg
        if c < v:
            v = c
        new[j] = v
        prev = v
        if v < best:
            best = v
            arg = j
    last = ohi
    if ohi < n:
        v = old[ohi] + sub[ohi]
        c = prev + cg
        if c < v:
            v = c
        new[ohi + 1] = v
        prev = v
        if v < best:
            best = v
            arg = ohi + 1
        # beyond ohi + 1 only the strictly increasing gap chain remains
        last = n
        if band > 0 and arg + band < n:
            last = arg + band
        if last < ohi + 1:
            last = ohi + 1
        for j in range(ohi + 2, last + 1):
            prev += cg
            new[j] = prev
    lo = olo
    hi = last
    if band > 0:
        if arg - band > lo:
            lo = arg - band
        if arg + band < hi:
            hi = arg + band
    return best, lo, hi


@njit(cache=True, nogil=True)
def _nw_distance(s, t, cg, cs):
    m = t.shape[0]
    a = np.empty(m + 1, dtype=np.int32)
    b = np.empty(m + 1, dtype=np.int32)
    _init_row(a, m, cg, 0)
    sub = _sub_costs(t, cs)
    for i in range(s.shape[0]):
        _extend_symbol(a, 0, m, b, sub[s[i]], cg, 0)
        a, b = b, a
    return a[m]


# Public API -----------------------------------------------------------------------------------------------------------
def _check_cost_range(len_a: int, len_b: int, p: AlignmentParams) -> None:
    if (len_a + len_b + 1) * max(p.c_g, p.c_s) >= INF:
        raise OverflowError(
            f"sequences of length {len_a} and {len_b} can exceed the cost range at c_g={p.c_g}, c_s={p.c_s}")


def nw_distance(s: SequenceLike, t: SequenceLike, p: AlignmentParams = AlignmentParams()) -> int:
    """Exact (unbanded) alignment distance ``M[|S|, |T|]``."""
    a, b = encode(s), encode(t)
    _check_cost_range(len(a), len(b), p)
    return int(_nw_distance(a, b, p.c_g, p.c_s))


def initial_row(seq_len: int, p: AlignmentParams = AlignmentParams()) -> DistRow:
    """Row of ``M`` for the empty codeword prefix."""
    if seq_len < 0:
        raise ValueError("seq_len must be non-negative")
    _check_cost_range(seq_len, 0, p)
    row = np.empty(seq_len + 1, dtype=np.int32)
    lo, hi = _init_row(row, seq_len, p.c_g, p.band_width)
    return DistRow(lo, row[lo:hi + 1].copy())


def extend_row(row: DistRow, block: SequenceLike, seq: SequenceLike,
               p: AlignmentParams = AlignmentParams()) -> DistRow:
    """Extend ``row`` (the row of some codeword prefix P against ``seq``) to the row of ``P + block``."""
    block, seq = encode(block), encode(seq)
    if len(block) == 0:
        raise ValueError("block must be non-empty")
    if len(row.cells) == 0:
        raise BandCollapseError("row has no stored cells")
    if row.offset < 0 or row.offset + len(row.cells) > len(seq) + 1:
        raise ValueError("row does not fit the sequence")
    old = row.full(len(seq))
    new = np.empty_like(old)
    lo, hi = row.offset, row.offset + len(row.cells) - 1
    sub = _sub_costs(seq, p.c_s)
    for sym in block:
        _, lo, hi = _extend_symbol(old, lo, hi, new, sub[sym], p.c_g, p.band_width)
        old, new = new, old
    return DistRow(int(lo), old[lo:hi + 1].copy())
