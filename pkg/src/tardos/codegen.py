"""Codebook generation and persistence.

A codebook is the secret pair (bias vector p, n x m bit matrix X). Rows are
user codewords; entry (j, i) is Bernoulli(p_i). Every row is generated from
its own random stream keyed by (seed, TAG_ROW, row index), so a single row
can be regenerated without touching the others and generation parallelizes
with bit-identical output for any worker count.

File format (all integers little-endian):

    magic "TRDC" | u32 version | u64 seed | u32 params_len | params key=value
    text | u64 m | m float64 biases | u64 n | u32 words_per_row | n*words u64
    packed row-major bits (64 per word, little-endian bit order) | u64 CRC-64

The trailing checksum is CRC-64/XZ over every preceding byte.
"""

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (CapacityError, CodebookChecksumError, CodebookFormatError,
                     CodebookTruncatedError, CodebookVersionError, ParameterError)
from .model import BiasDistribution, ARCSINE, SchemeParams
from .rng import TAG_BIAS, TAG_ROW, stream

MAGIC = b"TRDC"
VERSION = 1

# Default memory budget for a single codebook: 2^33 matrix bits = 1 GiB packed.
DEFAULT_MAX_BITS = 1 << 33

_SUPPORT_SLOP = 1e-12

# ---------------------------------------------------------------------------
# CRC-64/XZ (reflected poly 0xC96C5795D7870F42, init/xorout all-ones).
# Implemented slice-by-8 against a bytewise reference; check value:
# crc64(b"123456789") == 0x995DC9BBDF1939FA.

_CRC_POLY_REFLECTED = 0xC96C5795D7870F42
_CRC_MASK = (1 << 64) - 1


def _crc_tables():
    base = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ _CRC_POLY_REFLECTED if crc & 1 else crc >> 1
        base.append(crc)
    tables = [base]
    for k in range(1, 8):
        prev = tables[k - 1]
        tables.append([(prev[i] >> 8) ^ base[prev[i] & 0xFF] for i in range(256)])
    return tables


_CRC_TABLES = _crc_tables()


def crc64(data, crc=0):
    """CRC-64/XZ of ``data``; pass a previous result as ``crc`` to chain."""
    t0, t1, t2, t3, t4, t5, t6, t7 = _CRC_TABLES
    state = (crc ^ _CRC_MASK) & _CRC_MASK
    buf = bytes(data)
    head = len(buf) - len(buf) % 8
    if head:
        for word in np.frombuffer(buf[:head], dtype="<u8").tolist():
            v = state ^ word
            state = (t7[v & 0xFF] ^ t6[(v >> 8) & 0xFF] ^ t5[(v >> 16) & 0xFF]
                     ^ t4[(v >> 24) & 0xFF] ^ t3[(v >> 32) & 0xFF] ^ t2[(v >> 40) & 0xFF]
                     ^ t1[(v >> 48) & 0xFF] ^ t0[v >> 56])
    for byte in buf[head:]:
        state = (state >> 8) ^ t0[(state ^ byte) & 0xFF]
    return state ^ _CRC_MASK


def crc64_bytewise(data, crc=0):
    """Reference bytewise implementation (kept for cross-checking)."""
    t0 = _CRC_TABLES[0]
    state = (crc ^ _CRC_MASK) & _CRC_MASK
    for byte in bytes(data):
        state = (state >> 8) ^ t0[(state ^ byte) & 0xFF]
    return state ^ _CRC_MASK


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiasVector:
    """The secret per-column probabilities, with the cutoff they honor."""

    p: np.ndarray
    t: float

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)
        if arr.ndim != 1 or arr.size < 1:
            raise ParameterError("bias vector must be a nonempty 1-d array")
        if not 0.0 < self.t < 0.5:
            raise ParameterError("cutoff t must lie in (0, 1/2)")
        lo, hi = self.t - _SUPPORT_SLOP, 1.0 - self.t + _SUPPORT_SLOP
        if not np.all(np.isfinite(arr)) or arr.min() < lo or arr.max() > hi:
            raise ParameterError("bias values must lie within [t, 1-t]")

    @property
    def m(self):
        return self.p.size


def sample_bias(m, t, seed):
    """Draw m i.i.d. biases from the arcsine density on [t, 1-t].

    Uses p = sin^2(r) with r uniform on [t', pi/2 - t']; stream (seed, bias tag).
    """
    if m < 1:
        raise ParameterError("m must be at least 1")
    dist = BiasDistribution(ARCSINE, t=t)
    return BiasVector(p=dist.sample(int(m), stream(seed, TAG_BIAS)), t=t)


def _words_per_row(m):
    return (m + 63) // 64


def _pack_row(bits, words):
    out = np.zeros(words * 8, dtype=np.uint8)
    packed = np.packbits(bits, bitorder="little")
    out[:packed.size] = packed
    return out.view("<u8")


def row_bits(bias, seed, j):
    """Regenerate row ``j`` alone: Bernoulli(p_i) from stream (seed, row tag, j)."""
    rng = stream(seed, TAG_ROW, j)
    return (rng.random(bias.m) < bias.p).astype(np.uint8)


@dataclass(frozen=True)
class Codebook:
    """Immutable codebook: bias vector plus packed codeword rows."""

    bias: BiasVector
    rows: np.ndarray  # shape (n, words), dtype <u8, little-endian bit order
    seed: int
    params: SchemeParams | None = None

    def __post_init__(self):
        arr = np.asarray(self.rows)
        if arr.dtype != np.dtype("<u8") or arr.ndim != 2:
            raise ParameterError("rows must be a 2-d array of little-endian 64-bit words")
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)
        if arr.shape[1] != _words_per_row(self.bias.m):
            raise ParameterError("packed row width disagrees with bias length")
        if self.params is not None:
            if self.params.n != arr.shape[0] or self.params.m != self.bias.m:
                raise ParameterError("codebook dimensions disagree with params")

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def m(self):
        return self.bias.m

    def block_bits(self, lo, hi):
        """Unpacked rows lo..hi-1 as a (hi-lo, m) uint8 array."""
        raw = self.rows[lo:hi].view(np.uint8)
        return np.unpackbits(raw, axis=1, count=self.m, bitorder="little")

    def row(self, j):
        return self.block_bits(j, j + 1)[0]

    def select_bits(self, indices):
        """Unpacked rows for an arbitrary index list, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise ParameterError("user index out of range")
        raw = self.rows[idx].view(np.uint8)
        return np.unpackbits(raw, axis=1, count=self.m, bitorder="little")


def gen_matrix(n, bias, seed, params=None, threads=1, max_bits=DEFAULT_MAX_BITS):
    """Generate the n x m codeword matrix over ``bias``, packed 64 bits/word.

    Entry (j, i) is an independent Bernoulli(bias.p[i]) draw taken from row
    stream j, so the result is identical for every ``threads`` value.
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    if n * bias.m > max_bits:
        raise CapacityError(
            f"codebook of {n} x {bias.m} bits exceeds the budget of {max_bits} bits")
    words = _words_per_row(bias.m)
    rows = np.empty((n, words), dtype="<u8")

    def fill(lo, hi):
        for j in range(lo, hi):
            rows[j] = _pack_row(row_bits(bias, seed, j), words)

    threads = max(1, int(threads))
    if threads == 1 or n < 4:
        fill(0, n)
    else:
        block = max(1, math.ceil(n / threads))
        bounds = [(lo, min(lo + block, n)) for lo in range(0, n, block)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: fill(*b), bounds))
    return Codebook(bias=bias, rows=rows, seed=int(seed), params=params)


def save_codebook(cb, path):
    """Write ``cb`` to ``path`` in the versioned binary format."""
    params_blob = cb.params.kv_text().encode("utf-8") if cb.params is not None else b""
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<Q", cb.seed),
        struct.pack("<I", len(params_blob)),
        params_blob,
        struct.pack("<Q", cb.m),
        cb.bias.p.astype("<f8").tobytes(),
        struct.pack("<Q", cb.n),
        struct.pack("<I", cb.rows.shape[1]),
        cb.rows.astype("<u8").tobytes(),
    ]
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<Q", crc64(body)))


class _Cursor:
    def __init__(self, buf):
        self.buf = buf
        self.off = 0

    def take(self, k, what):
        if self.off + k > len(self.buf):
            raise CodebookTruncatedError(f"file ends inside {what}")
        out = self.buf[self.off:self.off + k]
        self.off += k
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what):
        return struct.unpack("<Q", self.take(8, what))[0]


def load_codebook(path):
    """Read a codebook written by :func:`save_codebook`, verifying the checksum."""
    with open(path, "rb") as fh:
        blob = fh.read()
    cur = _Cursor(blob)
    if cur.take(4, "magic") != MAGIC:
        raise CodebookFormatError("not a codebook file (bad magic)")
    version = cur.u32("version")
    if version != VERSION:
        raise CodebookVersionError(f"unsupported codebook version {version}")
    seed = cur.u64("seed")
    params_blob = cur.take(cur.u32("params length"), "params block")
    m = cur.u64("bias length")
    bias_raw = cur.take(8 * m, "bias block")
    n = cur.u64("row count")
    words = cur.u32("words per row")
    matrix_raw = cur.take(8 * n * words, "bit matrix")
    stored_crc = cur.u64("checksum")
    if cur.off != len(blob):
        raise CodebookFormatError("trailing bytes after checksum")
    if crc64(blob[:cur.off - 8]) != stored_crc:
        raise CodebookChecksumError("checksum mismatch: file is corrupt")

    params = SchemeParams.from_kv_text(params_blob.decode("utf-8")) if params_blob else None
    p = np.frombuffer(bias_raw, dtype="<f8").copy()
    if words != _words_per_row(m):
        raise CodebookFormatError("words per row disagrees with bias length")
    rows = np.frombuffer(matrix_raw, dtype="<u8").reshape(n, words).copy()
    t = params.t if params is not None else _infer_cutoff(p)
    return Codebook(bias=BiasVector(p=p, t=t), rows=rows, seed=seed, params=params)


def _infer_cutoff(p):
    # Params-less files: recover the tightest cutoff consistent with the data.
    edge = min(float(p.min()), 1.0 - float(p.max()))
    return min(max(edge, 1e-12), 0.25)
