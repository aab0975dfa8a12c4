"""On-disk database of DRH fingerprints over all windows of a reference.

File layout (little-endian)::

    header   magic "DRH1", version u16, backend u8, n u8, block_size u8, seed u64,
             c_g u32, c_s u32, band u32 (0 = off), window count u16, window lengths u32[],
             stride u32, candidates u8, slack u32, max_active u32, widening u8,
             [tANS only: 256 x u32 model counts], record count u64, CRC32 of the above u32
    records  (fingerprint u64, position u64, window_len u32) sorted ascending
    trailer  CRC32 of the record bytes u32

Lookups are binary searches over the sorted fingerprint column.
"""
from __future__ import annotations

import io
import logging
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .alignment import AlignmentParams
from .codebook import Backend, CodebookConfig, TANS_ALPHABET
from .encoder import EncoderConfig, encode
from .sequence import SequenceLike, encode as encode_seq

log = logging.getLogger(__name__)

MAGIC = b"DRH1"
FORMAT_VERSION = 1
DEFAULT_WINDOW_LENS = (64,)
DEFAULT_STRIDE = 1
DEFAULT_LIMIT = 100
#: Reads are encoded at every indexed window length within this fraction of the read length.
WINDOW_TOLERANCE = 0.2

RECORD_DTYPE = np.dtype([("fingerprint", "<u8"), ("position", "<u8"), ("window_len", "<u4")])


class IndexFormatError(ValueError):
    """The file is not a readable index (bad magic, truncation, unknown version)."""


class IndexCorruptError(IndexFormatError):
    """A checksum did not match."""


class IndexMismatchError(ValueError):
    """The runtime encoder configuration differs from the one the index was built with."""


class IndexRecord(NamedTuple):
    fingerprint: int
    position: int
    window_len: int


class QueryHit(NamedTuple):
    position: int
    window_len: int
    rank: int
    bits: str


@dataclass(frozen=True)
class IndexConfig:
    window_lens: Tuple[int, ...] = DEFAULT_WINDOW_LENS
    stride: int = DEFAULT_STRIDE
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        object.__setattr__(self, "window_lens", tuple(sorted(set(int(w) for w in self.window_lens))))
        if not self.window_lens:
            raise ValueError("at least one window length is required")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        k = self.encoder.codebook.symbols_per_block
        if min(self.window_lens) < k:
            raise ValueError(f"window lengths must be >= {k} symbols")


# Header (de)serialization ---------------------------------------------------------------------------------------------
def _pack_header(cfg: IndexConfig, n_records: int) -> bytes:
    enc = cfg.encoder
    cb, al = enc.codebook, enc.alignment
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<HBBBQ", FORMAT_VERSION, int(cb.backend), cb.n, cb.block_size, cb.seed))
    out.write(struct.pack("<III", al.c_g, al.c_s, al.band_width))
    out.write(struct.pack("<H", len(cfg.window_lens)))
    out.write(struct.pack(f"<{len(cfg.window_lens)}I", *cfg.window_lens))
    out.write(struct.pack("<IBIIB", cfg.stride, enc.n_candidates, enc.candidate_slack, enc.max_active,
                          int(enc.widening)))
    if cb.backend is Backend.TANS:
        counts = cb.model_counts if cb.model_counts is not None else (1,) * TANS_ALPHABET
        out.write(struct.pack(f"<{TANS_ALPHABET}I", *counts))
    out.write(struct.pack("<Q", n_records))
    body = out.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise IndexFormatError(f"truncated index header at byte offset {self.pos}")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals


def _unpack_header(buf: bytes) -> Tuple[IndexConfig, int, int]:
    """Returns ``(config, record count, header length)``."""
    if buf[:4] != MAGIC:
        raise IndexFormatError("bad magic: not a DRH index")
    r = _Reader(buf)
    r.pos = 4
    version, backend, n, block_size, seed = r.take("<HBBBQ")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported index format version {version}")
    cg, cs, band = r.take("<III")
    (nw,) = r.take("<H")
    window_lens = r.take(f"<{nw}I")
    stride, n_cand, slack, max_active, widening = r.take("<IBIIB")
    counts = None
    if backend == Backend.TANS:
        counts = r.take(f"<{TANS_ALPHABET}I")
    (n_records,) = r.take("<Q")
    body_end = r.pos
    (crc,) = r.take("<I")
    if zlib.crc32(buf[:body_end]) != crc:
        raise IndexCorruptError(f"header checksum mismatch (header ends at byte offset {body_end})")
    if backend == Backend.TANS and counts == (1,) * TANS_ALPHABET:
        counts = None
    codebook = CodebookConfig(Backend(backend), n, block_size, seed, counts)
    alignment = AlignmentParams(cg, cs, band or None)
    enc = EncoderConfig(max_active, n_cand, slack, codebook, alignment, bool(widening))
    return IndexConfig(window_lens, stride, enc), n_records, r.pos


# Index ----------------------------------------------------------------------------------------------------------------
class DrhIndex:
    """Sorted fingerprint records plus the configuration that produced them."""

    def __init__(self, config: IndexConfig, records: np.ndarray):
        if records.dtype != RECORD_DTYPE:
            raise TypeError("records must use RECORD_DTYPE")
        self.config = config
        self.records = records
        self._keys = np.ascontiguousarray(records["fingerprint"])

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return f"DrhIndex(records={len(self)}, window_lens={self.config.window_lens}, stride={self.config.stride})"

    # persistence
    def to_bytes(self) -> bytes:
        body = self.records.tobytes()
        return _pack_header(self.config, len(self.records)) + body + struct.pack("<I", zlib.crc32(body))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, buf: bytes) -> "DrhIndex":
        cfg, n_records, start = _unpack_header(buf)
        end = start + n_records * RECORD_DTYPE.itemsize
        if end + 4 != len(buf):
            raise IndexFormatError(
                f"expected {n_records} records ending at byte offset {end + 4}, file has {len(buf)} bytes")
        (crc,) = struct.unpack_from("<I", buf, end)
        if zlib.crc32(buf[start:end]) != crc:
            raise IndexCorruptError(f"record checksum mismatch (records at byte offsets {start}..{end})")
        records = np.frombuffer(buf, dtype=RECORD_DTYPE, count=n_records, offset=start)
        return cls(cfg, records)

    @classmethod
    def open(cls, path: Union[str, Path]) -> "DrhIndex":
        return cls.from_bytes(Path(path).read_bytes())

    # queries
    def lookup(self, fingerprint: int) -> List[IndexRecord]:
        """All records with ``fingerprint`` (binary search)."""
        key = np.uint64(fingerprint)
        lo = int(np.searchsorted(self._keys, key, side="left"))
        hi = int(np.searchsorted(self._keys, key, side="right"))
        return [IndexRecord(int(r["fingerprint"]), int(r["position"]), int(r["window_len"]))
                for r in self.records[lo:hi]]

    def check_compatible(self, encoder: EncoderConfig) -> None:
        if encoder != self.config.encoder:
            raise IndexMismatchError(
                f"encoder configuration {encoder} differs from the index header {self.config.encoder}")

    def query_lengths(self, read_len: int) -> List[int]:
        return [w for w in self.config.window_lens
                if w <= read_len and abs(w - read_len) <= WINDOW_TOLERANCE * read_len]

    def query(self, read: SequenceLike, limit: Optional[int] = DEFAULT_LIMIT,
              encoder: Optional[EncoderConfig] = None) -> List[QueryHit]:
        """Positions whose windows share a DRH with ``read``.

        The read's prefix is encoded at every indexed window length close to
        its own length. Hits are deduplicated per (position, window length),
        keeping the best candidate rank, and ordered by (rank, position).
        """
        if encoder is not None:
            self.check_compatible(encoder)
        codes = encode_seq(read)
        found: Dict[Tuple[int, int], Tuple[int, str]] = {}
        for wl in self.query_lengths(len(codes)):
            for rank, cand in enumerate(encode(codes[:wl], self.config.encoder)):
                for rec in self.lookup(cand.fingerprint().value):
                    key = (rec.position, rec.window_len)
                    if key not in found or rank < found[key][0]:
                        found[key] = (rank, cand.bits)
        hits = sorted((QueryHit(pos, wl, rank, bits) for (pos, wl), (rank, bits) in found.items()),
                      key=lambda h: (h.rank, h.position, h.window_len))
        return hits if limit is None else hits[:limit]


# Build ----------------------------------------------------------------------------------------------------------------
def window_starts(ref_len: int, cfg: IndexConfig) -> List[Tuple[int, int]]:
    """All ``(position, window_len)`` pairs covered by the index."""
    return [(pos, wl) for wl in cfg.window_lens for pos in range(0, ref_len - wl + 1, cfg.stride)]


def _encode_shard(codes: np.ndarray, windows: Sequence[Tuple[int, int]], enc: EncoderConfig,
                  progress: Optional[Callable[[int], None]]) -> np.ndarray:
    rows = []
    for k, (pos, wl) in enumerate(windows):
        seen = set()
        for cand in encode(codes[pos:pos + wl], enc):
            fp = cand.fingerprint().value
            if fp not in seen:
                seen.add(fp)
                rows.append((fp, pos, wl))
        if progress is not None and (k + 1) % 1000 == 0:
            progress(1000)
    if progress is not None:
        progress(len(windows) % 1000)
    return np.array(rows, dtype=RECORD_DTYPE)


def build_index(reference: SequenceLike, cfg: IndexConfig = IndexConfig(), threads: int = 1,
                shards: Optional[int] = None, progress: Optional[Callable[[int], None]] = None) -> DrhIndex:
    """Encode every window of ``reference`` and return the sorted index.

    Windows are split into ``shards`` contiguous chunks (default: ``threads``)
    encoded independently; the merged result does not depend on either count.
    """
    codes = encode_seq(reference)
    if len(codes) < max(cfg.window_lens):
        raise ValueError(f"reference length {len(codes)} is shorter than window length {max(cfg.window_lens)}")
    windows = window_starts(len(codes), cfg)
    shards = max(1, shards or threads)
    bounds = np.linspace(0, len(windows), shards + 1).astype(int)
    chunks = [windows[bounds[i]:bounds[i + 1]] for i in range(shards)]
    log.info("encoding %d windows in %d shard(s)", len(windows), shards)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ch: _encode_shard(codes, ch, cfg.encoder, progress), chunks))
    else:
        parts = [_encode_shard(codes, ch, cfg.encoder, progress) for ch in chunks]
    records = np.concatenate(parts) if parts else np.zeros(0, dtype=RECORD_DTYPE)
    order = np.lexsort((records["window_len"], records["position"], records["fingerprint"]))
    return DrhIndex(cfg, records[order])
