"""Beam search for the codewords closest to a sequence.

The search grows a tree of codeword prefixes, one hash block per depth. Each
active node carries a row of the alignment matrix against the query, so a
child's distances come from extending its parent's row by the decoded block.
Before expanding a depth, only the ``max_active`` nodes with the smallest
prefix distance ``min(row)`` are kept (bucketed threshold, ties by the
lexicographic order of the hash blocks). Expanded nodes are archived in a
cheap append-only history of ``(parent, hash)`` pairs used to read back the
hash path of the winning leaves.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .alignment import (INF, AlignmentParams, DistRow, _check_cost_range, _init_row,
                        extend_row, initial_row, nw_distance)
from .codebook import TANS_TABLE_SIZE, Backend, CodebookConfig, block_bit_count, en_dec, kernel_tables
from .fingerprint import DrhFingerprint, fold
from .sequence import SequenceLike, encode as encode_seq

log = logging.getLogger(__name__)

DEFAULT_MAX_ACTIVE = 100
DEFAULT_CANDIDATES = 4
DEFAULT_SLACK = 3
DEFAULT_WIDENING = True

_POOL_FACTOR = 4


class BeamExtinctError(RuntimeError):
    """Every node was pruned before the last depth."""

    def __init__(self, depth: int):
        self.depth = depth
        super().__init__(f"beam went extinct at depth {depth}; widen the band")


@dataclass(frozen=True)
class EncoderConfig:
    """Search parameters.

    With ``widening`` on, beams of width ``max_active`` and of every power of
    ten below it are searched and their candidates merged, so the best
    distance never gets worse as ``max_active`` grows through powers of ten
    (a single beam does not guarantee that).
    """

    max_active: int = DEFAULT_MAX_ACTIVE
    n_candidates: int = DEFAULT_CANDIDATES
    candidate_slack: int = DEFAULT_SLACK
    codebook: CodebookConfig = field(default_factory=CodebookConfig)
    alignment: AlignmentParams = field(default_factory=AlignmentParams)
    widening: bool = DEFAULT_WIDENING

    def __post_init__(self):
        object.__setattr__(self, "widening", bool(self.widening))
        if self.max_active < 1:
            raise ValueError("max_active must be >= 1")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.candidate_slack < 0:
            raise ValueError("candidate_slack must be >= 0")

    def beam_widths(self) -> Tuple[int, ...]:
        """Widths searched by ``encode``, widest first."""
        widths = [self.max_active]
        if self.widening:
            w = 1
            while w < self.max_active:
                widths.append(w)
                w *= 10
            widths[1:] = sorted(widths[1:], reverse=True)
        return tuple(widths)


@dataclass(frozen=True)
class DrhSequence:
    """One hash path (root to leaf) and the exact distance of its codeword to the query."""

    blocks: Tuple[int, ...]
    bits: str
    final_distance: int

    def fingerprint(self, window_len: int = 0) -> DrhFingerprint:
        return fold(self.bits, window_len)


@dataclass
class SearchNode:
    parent: int
    state: int
    dist: DistRow
    hash: int

    @property
    def min_dist(self) -> int:
        return self.dist.min


@dataclass(frozen=True)
class HistoryNode:
    parent: int
    hash: int


# Kernels --------------------------------------------------------------------------------------------------------------
@njit(cache=True, nogil=True)
def _max_dist(mins, m, budget):
    """Bucketed threshold: the largest ``t`` with ``#{v < t} <= budget`` (INF entries ignored)."""
    lo = INF
    hi = -1
    for i in range(m):
        v = mins[i]
        if v < INF:
            if v < lo:
                lo = v
            if v > hi:
                hi = v
    if hi < 0:
        return INF
    hist = np.zeros(hi - lo + 1, dtype=np.int64)
    for i in range(m):
        v = mins[i]
        if v < INF:
            hist[v - lo] += 1
    total = 0
    for b in range(hi - lo + 1):
        if total + hist[b] > budget:
            return lo + b
        total += hist[b]
    return hi + 1


@njit(cache=True, nogil=True)
def _admit(mins, m, budget, out):
    """Indices (ascending) of the ``budget`` best nodes; boundary ties go to lower indices."""
    t = _max_dist(mins, m, budget)
    below = 0
    for i in range(m):
        if mins[i] < t:
            below += 1
    room = budget - below
    k = 0
    for i in range(m):
        v = mins[i]
        if v < t:
            out[k] = i
            k += 1
        elif v == t and v < INF and room > 0:
            out[k] = i
            k += 1
            room -= 1
    return k


@njit(cache=True, nogil=True, inline="always")
def _track(nj, j, best, arg, nc):
    for c in range(nc):
        v = nj[c]
        better = v < best[c]
        best[c] = v if better else best[c]
        arg[c] = j if better else arg[c]


@njit(cache=True, nogil=True)
def _expand_group(parent, plo, phi, syms, nc, seq, cs, cg, band, a, b, lo, hi, best, arg):
    """Extend one parent row by the blocks ``syms[:, c]`` of all its ``nc`` children at once.

    Rows live column-wise in ``a``/``b`` (cell, child) so the inner loops run
    across siblings. Cells outside a child's band hold INF, which reproduces
    the scalar banded recurrence exactly. Returns the buffer holding the rows.
    """
    n = seq.shape[0]
    for j in range(plo, phi + 1):
        v = parent[j]
        aj = a[j]
        for c in range(nc):
            aj[c] = v
    for c in range(nc):
        lo[c] = plo
        hi[c] = phi
    rlo = plo
    rhi = phi
    old = a
    new = b
    for q in range(syms.shape[0]):
        sq = syms[q]
        o0 = old[rlo]
        n0 = new[rlo]
        for c in range(nc):
            n0[c] = o0[c] + cg
            best[c] = n0[c]
            arg[c] = rlo
        for j in range(rlo + 1, rhi + 1):
            oj = old[j]
            oj1 = old[j - 1]
            nj = new[j]
            nj1 = new[j - 1]
            sj = seq[j - 1]
            for c in range(nc):
                v = oj[c] + cg
                d = oj1[c] + (0 if sq[c] == sj else cs)
                e = nj1[c] + cg
                nj[c] = min(v, min(d, e))
        top = rhi
        if rhi < n:
            oj1 = old[rhi]
            nj1 = new[rhi]
            nj = new[rhi + 1]
            sj = seq[rhi]
            for c in range(nc):
                d = oj1[c] + (0 if sq[c] == sj else cs)
                e = nj1[c] + cg
                nj[c] = min(d, e)
            # the rest is the strictly increasing gap chain: no new minimum
            top = n if band == 0 else min(n, rhi + 1 + band)
            for j in range(rhi + 2, top + 1):
                nj = new[j]
                nj1 = new[j - 1]
                for c in range(nc):
                    nj[c] = nj1[c] + cg
        for j in range(rlo, rhi + 2 if rhi < n else rhi + 1):
            _track(new[j], j, best, arg, nc)
        nlo = top
        nhi = rlo
        for c in range(nc):
            l = lo[c]
            h = top
            if band > 0:
                if arg[c] - band > l:
                    l = arg[c] - band
                if arg[c] + band < h:
                    h = arg[c] + band
            lo[c] = l
            hi[c] = h
            if l < nlo:
                nlo = l
            if h > nhi:
                nhi = h
        for j in range(rlo, top + 1):
            nj = new[j]
            for c in range(nc):
                keep = (j >= lo[c]) & (j <= hi[c])
                nj[c] = nj[c] if keep else INF
        rlo = nlo
        rhi = nhi
        old, new = new, old
    return old


@njit(cache=True, nogil=True)
def _beam_search(seq, backend, n, ttab, tsyms, tbase, tnb, init_state, spb, nblocks, max_children,
                 cg, cs, band, max_active):
    width = seq.shape[0] + 1
    cap = max_active * max_children
    prev_rows = np.empty((cap, width), dtype=np.int32)
    cur_rows = np.empty((cap, width), dtype=np.int32)
    prev_lo = np.empty(cap, dtype=np.int64)
    prev_hi = np.empty(cap, dtype=np.int64)
    prev_min = np.empty(cap, dtype=np.int64)
    prev_state = np.empty(cap, dtype=np.int64)
    prev_parent = np.empty(cap, dtype=np.int64)
    prev_hash = np.empty(cap, dtype=np.int64)
    cur_lo = np.empty(cap, dtype=np.int64)
    cur_hi = np.empty(cap, dtype=np.int64)
    cur_min = np.empty(cap, dtype=np.int64)
    cur_state = np.empty(cap, dtype=np.int64)
    cur_parent = np.empty(cap, dtype=np.int64)
    cur_hash = np.empty(cap, dtype=np.int64)
    hist_parent = np.empty(nblocks * max_active + 1, dtype=np.int64)
    hist_hash = np.empty(nblocks * max_active + 1, dtype=np.int64)
    sel = np.empty(cap, dtype=np.int64)
    syms = np.empty((spb, max_children), dtype=np.uint8)
    states = np.empty(max_children, dtype=np.int64)
    a = np.empty((width, max_children), dtype=np.int32)
    b = np.empty((width, max_children), dtype=np.int32)
    g_lo = np.empty(max_children, dtype=np.int64)
    g_hi = np.empty(max_children, dtype=np.int64)
    g_best = np.empty(max_children, dtype=np.int32)
    g_arg = np.empty(max_children, dtype=np.int64)
    tsize = tsyms.shape[0]

    lo, hi = _init_row(prev_rows[0], width - 1, cg, band)
    prev_lo[0] = lo
    prev_hi[0] = hi
    prev_min[0] = 0
    prev_state[0] = init_state
    prev_parent[0] = -1
    prev_hash[0] = -1
    nprev = 1
    nhist = 0
    status = -1

    for depth in range(nblocks):
        nsel = _admit(prev_min, nprev, max_active, sel)
        if nsel == 0:
            status = depth
            break
        ncur = 0
        for k in range(nsel):
            i = sel[k]
            hist_parent[nhist] = prev_parent[i]
            hist_hash[nhist] = prev_hash[i]
            st = prev_state[i]
            if backend == 0:
                nch = ttab.shape[0]
            else:
                nch = 1 << tnb[st - tsize]
            for h in range(nch):
                if backend == 0:
                    x = st ^ ttab[h]
                    states[h] = ((x << n) | (x >> (16 - n))) & 0xFFFF
                    e = x >> (16 - n)
                    for q in range(spb):
                        syms[q, h] = (e >> (n - 2 - 2 * q)) & 3
                else:
                    ns = tbase[st - tsize] + h
                    states[h] = ns
                    for q in range(spb):
                        syms[q, h] = tsyms[ns - tsize, q]
            rows = _expand_group(prev_rows[i], prev_lo[i], prev_hi[i], syms, nch, seq, cs, cg, band,
                                 a, b, g_lo, g_hi, g_best, g_arg)
            for h in range(nch):
                row = cur_rows[ncur]
                for j in range(g_lo[h], g_hi[h] + 1):
                    row[j] = rows[j, h]
                cur_lo[ncur] = g_lo[h]
                cur_hi[ncur] = g_hi[h]
                cur_min[ncur] = g_best[h]
                cur_state[ncur] = states[h]
                cur_parent[ncur] = nhist
                cur_hash[ncur] = h
                ncur += 1
            nhist += 1
        prev_rows, cur_rows = cur_rows, prev_rows
        prev_lo, cur_lo = cur_lo, prev_lo
        prev_hi, cur_hi = cur_hi, prev_hi
        prev_min, cur_min = cur_min, prev_min
        prev_state, cur_state = cur_state, prev_state
        prev_parent, cur_parent = cur_parent, prev_parent
        prev_hash, cur_hash = cur_hash, prev_hash
        nprev = ncur

    last = width - 1
    final = np.full(nprev, INF, dtype=np.int64)
    for i in range(nprev):
        if prev_lo[i] <= last and last <= prev_hi[i]:
            final[i] = prev_rows[i, last]
    return (status, final, prev_min[:nprev], prev_parent[:nprev], prev_hash[:nprev], prev_state[:nprev],
            prev_rows[:nprev], prev_lo[:nprev], prev_hi[:nprev], hist_parent[:nhist], hist_hash[:nhist])


@njit(cache=True, nogil=True)
def _replay(blocks, backend, n, ttab, tsyms, tbase, init_state, spb):
    """Codeword of a hash block path, same step as the search kernel."""
    out = np.empty(blocks.shape[0] * spb, dtype=np.uint8)
    st = init_state
    tsize = tsyms.shape[0]
    for k in range(blocks.shape[0]):
        h = blocks[k]
        if backend == 0:
            x = st ^ ttab[h]
            st = ((x << n) | (x >> (16 - n))) & 0xFFFF
            e = x >> (16 - n)
            for q in range(spb):
                out[k * spb + q] = (e >> (n - 2 - 2 * q)) & 3
        else:
            st = tbase[st - tsize] + h
            for q in range(spb):
                out[k * spb + q] = tsyms[st - tsize, q]
    return out


# Search result --------------------------------------------------------------------------------------------------------
@dataclass
class SearchResult:
    """Raw kernel output: the final leaves and the history arena."""

    final: np.ndarray
    leaf_min: np.ndarray
    leaf_parent: np.ndarray
    leaf_hash: np.ndarray
    leaf_state: np.ndarray
    leaf_rows: np.ndarray
    leaf_lo: np.ndarray
    leaf_hi: np.ndarray
    history: Sequence[HistoryNode]
    hist_parent: np.ndarray
    hist_hash: np.ndarray

    def path(self, leaf: int) -> Tuple[int, ...]:
        blocks = [int(self.leaf_hash[leaf])]
        p = int(self.leaf_parent[leaf])
        while p >= 0 and self.hist_hash[p] >= 0:
            blocks.append(int(self.hist_hash[p]))
            p = int(self.hist_parent[p])
        return tuple(reversed(blocks))

    def leaf_row(self, leaf: int) -> DistRow:
        lo, hi = int(self.leaf_lo[leaf]), int(self.leaf_hi[leaf])
        return DistRow(lo, self.leaf_rows[leaf, lo:hi + 1].copy())


def search(seq: SequenceLike, cfg: EncoderConfig = EncoderConfig(), width: Optional[int] = None) -> SearchResult:
    """Run one beam search (``width`` defaults to ``max_active``) and return every final leaf (unranked)."""
    codes = encode_seq(seq)
    if len(codes) == 0:
        raise ValueError("cannot encode an empty sequence")
    cb = cfg.codebook
    tabs = kernel_tables(cb)
    nblocks = cb.blocks_for(len(codes))
    al = cfg.alignment
    _check_cost_range(len(codes), nblocks * tabs.symbols_per_block, al)
    out = _beam_search(codes, tabs.backend, tabs.n, tabs.ttable, tabs.tans_symbols, tabs.tans_base,
                       tabs.tans_nb, tabs.initial_state, tabs.symbols_per_block, nblocks, tabs.max_children,
                       al.c_g, al.c_s, al.band_width, width or cfg.max_active)
    status = out[0]
    if status >= 0:
        raise BeamExtinctError(int(status))
    hp, hh = out[9], out[10]
    history = _HistoryView(hp, hh)
    return SearchResult(out[1], out[2], out[3], out[4], out[5], out[6], out[7], out[8], history, hp, hh)


class _HistoryView(Sequence):
    def __init__(self, parent, hash_):
        self._p, self._h = parent, hash_

    def __len__(self):
        return len(self._p)

    def __getitem__(self, i):
        return HistoryNode(int(self._p[i]), int(self._h[i]))


# Public API -----------------------------------------------------------------------------------------------------------
def blocks_to_bits(blocks: Sequence[int], cfg: CodebookConfig) -> str:
    if cfg.backend is Backend.XORSHIFT:
        return "".join(format(h, f"0{cfg.block_size}b") for h in blocks)
    state = cfg.initial_state()
    out = []
    for h in blocks:
        width = block_bit_count(state, cfg)
        out.append(format(h, f"0{width}b") if width else "")
        _, state = en_dec(state, h, cfg)
    return "".join(out)


def bits_to_blocks(bits: str, cfg: CodebookConfig) -> Tuple[int, ...]:
    state = cfg.initial_state()
    pos = 0
    blocks = []
    while pos < len(bits):
        width = block_bit_count(state, cfg)
        if width == 0:
            raise ValueError("zero-width hash block cannot be delimited in a bit string")
        if pos + width > len(bits):
            raise ValueError(f"trailing partial block: {len(bits) - pos} of {width} bits")
        h = int(bits[pos:pos + width], 2)
        blocks.append(h)
        _, state = en_dec(state, h, cfg)
        pos += width
    return tuple(blocks)


def reconstruct_blocks(blocks: Sequence[int], cfg: CodebookConfig) -> np.ndarray:
    tabs = kernel_tables(cfg)
    arr = np.asarray(blocks, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or (cfg.backend is Backend.XORSHIFT and arr.max() >= 1 << cfg.block_size)):
        raise ValueError("hash block out of range")
    if cfg.backend is Backend.TANS:
        state = cfg.initial_state()
        for h in arr:  # range check per state; cheap next to the replay itself
            if h >= 1 << block_bit_count(state, cfg):
                raise ValueError(f"hash block {h} out of range for state {state}")
            state = int(tabs.tans_base[state - TANS_TABLE_SIZE]) + int(h)
    return _replay(arr, tabs.backend, tabs.n, tabs.ttable, tabs.tans_symbols, tabs.tans_base,
                   tabs.initial_state, tabs.symbols_per_block)


def reconstruct(bits: str, cfg: CodebookConfig = CodebookConfig()) -> np.ndarray:
    """Replay the codebook from its initial state over the hash blocks in ``bits``."""
    if set(bits) - {"0", "1"}:
        raise ValueError("bit string may only contain '0' and '1'")
    return reconstruct_blocks(bits_to_blocks(bits, cfg), cfg)


def _score_leaves(codes: np.ndarray, cfg: EncoderConfig, width: int) -> List[Tuple[int, Tuple[int, ...]]]:
    """Exact distances of the best leaves of one beam, as ``(distance, blocks)``."""
    res = search(codes, cfg, width)
    final = res.final
    finite = np.flatnonzero(final < INF)
    limit = _POOL_FACTOR * cfg.n_candidates
    if finite.size:
        order = finite[np.lexsort((finite, final[finite]))]
        best = int(final[order[0]])
        pool = order[final[order] <= best + cfg.candidate_slack][:limit]
    else:
        # the band slid off the last column for every leaf (narrow beams);
        # fall back to the best prefix distances, re-scored exactly below
        pool = np.lexsort((np.arange(len(final)), res.leaf_min))[:limit]
    cb = cfg.codebook
    scored = []
    for leaf in pool:
        blocks = res.path(int(leaf))
        d = nw_distance(reconstruct_blocks(blocks, cb), codes, cfg.alignment)
        scored.append((d, blocks))
    return scored


def encode(seq: SequenceLike, cfg: EncoderConfig = EncoderConfig()) -> List[DrhSequence]:
    """DRH candidates for ``seq``, best first.

    In each beam, leaves are ranked by the last cell of their row (distance
    of the whole codeword to the whole query, or the row minimum if no leaf's
    band reaches the last cell); the best few are re-scored exactly without
    the band. Over all beams, distinct paths within ``candidate_slack`` of the
    best are returned, ordered by (distance, bit string).
    """
    codes = encode_seq(seq)
    cb = cfg.codebook
    scored = {item for w in cfg.beam_widths() for item in _score_leaves(codes, cfg, w)}
    top = min(d for d, _ in scored)
    out = sorted((DrhSequence(blocks, blocks_to_bits(blocks, cb), d)
                  for d, blocks in scored if d <= top + cfg.candidate_slack),
                 key=lambda c: (c.final_distance, c.bits))
    return out[:cfg.n_candidates]


def select_max_dist(min_dists: Sequence[int], budget: int) -> int:
    """Largest bucket boundary ``t`` such that at most ``budget`` entries are ``< t``."""
    arr = np.asarray(min_dists, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("min_dists must be non-empty")
    if budget < 1:
        raise ValueError("budget must be positive")
    return int(_max_dist(arr, arr.size, budget))


def root_node(seq: SequenceLike, cfg: EncoderConfig = EncoderConfig()) -> SearchNode:
    return SearchNode(-1, cfg.codebook.initial_state(), initial_row(len(encode_seq(seq)), cfg.alignment), -1)


def expand(node: SearchNode, seq: SequenceLike, cfg: EncoderConfig,
           history: Optional[List[HistoryNode]] = None) -> List[SearchNode]:
    """Children of ``node``, one per hash block value; archives ``node`` in ``history``."""
    codes = encode_seq(seq)
    if history is None:
        history = []
    history.append(HistoryNode(node.parent, node.hash))
    me = len(history) - 1
    cb = cfg.codebook
    children = []
    for h in range(1 << block_bit_count(node.state, cb)):
        block, new_state = en_dec(node.state, h, cb)
        children.append(SearchNode(me, new_state, extend_row(node.dist, block, codes, cfg.alignment), h))
    return children
