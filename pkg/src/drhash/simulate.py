"""Monte-Carlo and analytic experiments around the rate/distortion trade-off.

Every experiment is a deterministic function of its ``seed``: per-trial
generators are derived as ``default_rng([seed, stream, trial])`` so results do
not depend on how trials are distributed over workers.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, IO, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .alignment import nw_distance
from .codebook import TANS_TABLE_SIZE, Backend, CodebookConfig, block_bit_count, kernel_tables
from .encoder import EncoderConfig, encode, reconstruct, reconstruct_blocks
from .index import DrhIndex, IndexConfig, build_index
from .sequence import random_sequence

DMAX_PERCENTILE = 99.0
DEFAULT_TRIALS = 200

_STREAM_REFERENCE = 0
_STREAM_TRIAL = 1


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def rate_distortion_curve(ds: Iterable[float]) -> List[Tuple[float, float]]:
    """``R(D) = 1 - h(D)`` for binary sequences under normalized Hamming distance."""
    out = []
    for d in ds:
        if not 0.0 < d <= 0.5:
            raise ValueError(f"distortion {d} outside (0, 1/2]")
        out.append((d, 1.0 - binary_entropy(d)))
    return out


@dataclass
class DistortionHistogram:
    """Histogram of distances to the nearest codeword.

    ``counts[k]`` counts samples in ``[k * bin_width, (k + 1) * bin_width)``;
    the raw samples are kept for exact quantiles.
    """

    bin_width: float
    counts: List[int]
    samples: np.ndarray = field(repr=False)

    @classmethod
    def from_samples(cls, samples: Sequence[float], bin_width: float) -> "DistortionHistogram":
        samples = np.asarray(samples)
        bins = np.floor(np.round(samples / bin_width, 9)).astype(np.int64)
        counts = np.bincount(bins, minlength=1) if len(bins) else np.zeros(1, dtype=np.int64)
        return cls(bin_width, [int(c) for c in counts], samples)

    @property
    def sample_count(self) -> int:
        return len(self.samples)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def quantile(self, q: float) -> float:
        """Empirical quantile (inverted CDF: an actual sample value)."""
        return float(np.quantile(self.samples, q, method="inverted_cdf"))

    @property
    def d_max(self) -> float:
        return self.quantile(DMAX_PERCENTILE / 100.0)

    def iqr(self) -> float:
        return self.quantile(0.75) - self.quantile(0.25)


# Binary Hamming toy ---------------------------------------------------------------------------------------------------
MAX_TOY_BITS = 20


def hamming_toy_experiment(length: int, rate: float, trials: int, seed: int) -> DistortionHistogram:
    """Nearest-codeword normalized Hamming distance with a random codebook of ``2^(rate*length)`` words.

    The nearest codeword is found by exhaustive search. ``rate=1`` uses the
    whole space as codebook.
    """
    if not 1 <= length <= MAX_TOY_BITS:
        raise ValueError(f"length must be in 1..{MAX_TOY_BITS} to enumerate the codebook")
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must be in (0, 1]")
    size = int(round(2 ** (rate * length)))
    rng = np.random.default_rng([seed, _STREAM_REFERENCE])
    if rate == 1.0:
        book = np.arange(1 << length, dtype=np.uint32)
    else:
        book = rng.integers(0, 1 << length, size=size, dtype=np.uint32)
    words = np.random.default_rng([seed, _STREAM_TRIAL]).integers(0, 1 << length, size=trials, dtype=np.uint32)
    best = np.full(trials, length, dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, trials))
    for i in range(0, len(book), chunk):
        d = np.bitwise_count(words[:, None] ^ book[None, i:i + chunk]).min(axis=1)
        np.minimum(best, d, out=best)
    return DistortionHistogram.from_samples(best / length, 1.0 / length)


# DRH distortion -------------------------------------------------------------------------------------------------------
def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def codebook_sequence(rng: np.random.Generator, length: int, cfg: CodebookConfig) -> np.ndarray:
    """Codeword of a uniformly random hash path; ``length`` must be a whole number of blocks."""
    if length % cfg.symbols_per_block:
        raise ValueError(f"length {length} is not a multiple of {cfg.symbols_per_block} symbols per block")
    tabs = kernel_tables(cfg)
    state, blocks = cfg.initial_state(), []
    for _ in range(cfg.blocks_for(length)):
        h = int(rng.integers(0, 1 << block_bit_count(state, cfg)))
        blocks.append(h)
        if cfg.backend is Backend.XORSHIFT:
            continue
        state = int(tabs.tans_base[state - TANS_TABLE_SIZE]) + h
    return reconstruct_blocks(blocks, cfg)


def drh_distortion_histogram(lens: Sequence[int], encoder: EncoderConfig = EncoderConfig(),
                             trials: int = DEFAULT_TRIALS, seed: int = 0, threads: int = 1,
                             source: str = "random") -> Dict[int, DistortionHistogram]:
    """Distance from sequences to their best DRH codeword, per sequence length (bin width 1).

    ``source="random"`` draws i.i.d. uniform sequences; ``"codebook"`` draws
    codewords themselves (a sanity check: every distance is 0).
    """
    if source not in ("random", "codebook"):
        raise ValueError(f"unknown source {source!r}")
    out = {}
    for length in lens:
        def one(t, length=length):
            rng = np.random.default_rng([seed, _STREAM_TRIAL, length, t])
            if source == "random":
                seq = random_sequence(rng, length)
            else:
                seq = codebook_sequence(rng, length, encoder.codebook)
            return encode(seq, encoder)[0].final_distance
        out[int(length)] = DistortionHistogram.from_samples(_map(one, range(trials), threads), 1)
    return out


# Mutations and recall -------------------------------------------------------------------------------------------------
@dataclass(frozen=True)
class MutationModel:
    """Independent per-position edits.

    Before each source symbol an insertion happens with ``p_ins``; the symbol
    itself is deleted with ``p_del`` or else substituted with ``p_sub``.
    The same uniforms are drawn whatever the probabilities, so for one seed
    the edits at a lower rate are a subset of those at a higher rate.
    """

    p_sub: float = 0.0
    p_ins: float = 0.0
    p_del: float = 0.0

    def __post_init__(self):
        for name in ("p_sub", "p_ins", "p_del"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")

    def apply(self, seq: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = len(seq)
        u = rng.random((n, 3))
        shift = rng.integers(1, 4, size=n)
        ins_sym = rng.integers(0, 4, size=n)
        out = []
        for i in range(n):
            if u[i, 0] < self.p_ins:
                out.append(ins_sym[i])
            if u[i, 1] < self.p_del:
                continue
            s = int(seq[i])
            if u[i, 2] < self.p_sub:
                s = (s + int(shift[i])) % 4
            out.append(s)
        return np.array(out, dtype=np.uint8)


@dataclass
class RecallTrial:
    position: int
    read_window_distance: int
    collided: bool
    rank: Optional[int] = None
    read_code_distance: Optional[int] = None
    window_code_distance: Optional[int] = None

    @property
    def triangle_ok(self) -> Optional[bool]:
        if not self.collided:
            return None
        return self.read_window_distance <= self.read_code_distance + self.window_code_distance


@dataclass
class RecallResult:
    recall: float
    trials: List[RecallTrial]

    @property
    def collisions(self) -> List[RecallTrial]:
        return [t for t in self.trials if t.collided]


def random_reference(ref_len: int, seed: int) -> np.ndarray:
    return random_sequence(np.random.default_rng([seed, _STREAM_REFERENCE]), ref_len)


def collision_recall(ref_len: int, window_len: int, mut: MutationModel, encoder: EncoderConfig = EncoderConfig(),
                     trials: int = DEFAULT_TRIALS, seed: int = 0, threads: int = 1,
                     index: Optional[DrhIndex] = None) -> RecallResult:
    """Fraction of mutated windows whose query returns their true position.

    Each trial picks a window start, mutates the reference from there (with a
    margin so deletions still leave ``window_len`` symbols) and queries the
    first ``window_len`` mutated symbols. A prebuilt ``index`` over
    ``random_reference(ref_len, seed)`` may be passed to share it across calls.
    """
    reference = random_reference(ref_len, seed)
    if index is None:
        index = build_index(reference, IndexConfig((window_len,), 1, encoder), threads=threads)
    else:
        index.check_compatible(encoder)
    margin = window_len // 4
    if ref_len < window_len + margin:
        raise ValueError("reference too short for the window length")
    codebook = encoder.codebook

    def one(t):
        rng = np.random.default_rng([seed, _STREAM_TRIAL, t])
        pos = int(rng.integers(0, ref_len - window_len - margin + 1))
        window = reference[pos:pos + window_len]
        read = mut.apply(reference[pos:pos + window_len + margin], rng)[:window_len]
        d_rw = nw_distance(read, window, encoder.alignment)
        hit = next((h for h in index.query(read, limit=None)
                    if h.position == pos and h.window_len == window_len), None)
        if hit is None:
            return RecallTrial(pos, d_rw, False)
        code = reconstruct(hit.bits, codebook)
        return RecallTrial(pos, d_rw, True, hit.rank, nw_distance(read, code, encoder.alignment),
                           nw_distance(window, code, encoder.alignment))

    results = _map(one, range(trials), threads)
    recall = sum(r.collided for r in results) / trials if trials else 0.0
    return RecallResult(recall, results)


# CSV ------------------------------------------------------------------------------------------------------------------
def write_csv(stream: IO[str], header: Sequence[str], rows: Iterable[Sequence], params: Dict[str, object]) -> None:
    """Parameters as ``# key=value`` comment lines, then a header row and the data."""
    for k, v in params.items():
        stream.write(f"# {k}={v}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)


def histogram_rows(hist: DistortionHistogram) -> List[Tuple]:
    return [(round(k * hist.bin_width, 9), c) for k, c in enumerate(hist.counts)]


def recall_rows(result: RecallResult) -> List[Tuple]:
    return [(t.position, t.read_window_distance, int(t.collided), "" if t.rank is None else t.rank,
             "" if t.read_code_distance is None else t.read_code_distance,
             "" if t.window_code_distance is None else t.window_code_distance) for t in result.trials]
