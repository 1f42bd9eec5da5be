"""Accusation scoring and tracing.

Given a pirate copy y, user j's accusation sum only collects evidence in the
columns where y shows a 1:

    S_j = sum over {i : y_i = 1} of (g1(p_i) if X_ji = 1 else g0(p_i)).

A user is accused exactly when S_j > Z (strict: a score equal to the threshold
is not an accusation). The coalition's collective sum adds the member scores,
which in column terms is S = sum over {i : y_i = 1} of
(x_i g1(p_i) + (c - x_i) g0(p_i)) with x_i the count of ones among the
coalition's rows.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import g0, g1

# Rows per scoring block; fixed so that output is independent of thread count.
_BLOCK = 256


@dataclass(frozen=True)
class PirateCopy:
    """A forged m-bit copy."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)
        if arr.ndim != 1 or arr.size < 1:
            raise ParameterError("pirate copy must be a nonempty 1-d bit array")
        if arr.max(initial=0) > 1:
            raise ParameterError("pirate copy must be binary")

    @property
    def m(self):
        return self.bits.size

    def to_text(self):
        return "".join("1" if b else "0" for b in self.bits.tolist())

    @classmethod
    def from_text(cls, text):
        chars = [ch for ch in text if not ch.isspace()]
        if not chars or any(ch not in "01" for ch in chars):
            raise ParameterError("pirate copy text must contain only 0/1 and whitespace")
        return cls(bits=np.frombuffer("".join(chars).encode(), dtype=np.uint8) - ord("0"))


def _bits_of(y):
    return y.bits if isinstance(y, PirateCopy) else np.asarray(y, dtype=np.uint8)


def _score_pieces(y, p):
    """Mask of evidence columns plus (per-column weight delta, constant part).

    With w = g1 - g0 on the y=1 columns and base = sum of g0 there, any row's
    score is base + <row restricted to the mask, w>.
    """
    yb = _bits_of(y)
    if yb.size != p.size:
        raise ParameterError("pirate copy length disagrees with bias length")
    mask = yb == 1
    p1 = p[mask]
    w = g1(p1) - g0(p1)
    base = float(np.sum(g0(p1)))
    return mask, w, base


def score_user(row, y, bias):
    """Accusation sum of a single codeword row against pirate copy ``y``."""
    r = np.asarray(row, dtype=np.uint8)
    if r.size != bias.m:
        raise ParameterError("row length disagrees with bias length")
    mask, w, base = _score_pieces(y, bias.p)
    return base + float(r[mask].astype(np.float64) @ w)


def coalition_score(rows, y, bias):
    """Collective sum of the coalition owning ``rows`` (one row per member)."""
    r = np.asarray(rows, dtype=np.uint8)
    if r.ndim != 2 or r.shape[0] < 1:
        raise ParameterError("coalition rows must form a nonempty 2-d array")
    if r.shape[1] != bias.m:
        raise ParameterError("row length disagrees with bias length")
    mask, w, base = _score_pieces(y, bias.p)
    x = r[:, mask].sum(axis=0, dtype=np.int64)
    return float(x @ w) + r.shape[0] * base


@dataclass(frozen=True)
class AccusationReport:
    """Scores for every user plus the accused set under threshold Z."""

    scores: np.ndarray
    threshold: float
    accused: np.ndarray  # sorted user indices with score strictly above Z
    coalition_score: float | None = None

    def accused_set(self):
        return set(self.accused.tolist())

    def to_csv(self, fh):
        fh.write("user_id,score,accused\n")
        accused = np.zeros(self.scores.size, dtype=bool)
        accused[self.accused] = True
        for j, (s, a) in enumerate(zip(self.scores.tolist(), accused.tolist())):
            fh.write(f"{j},{s!r},{1 if a else 0}\n")


def trace(cb, y, Z, threads=1, coalition=None):
    """Score every user of codebook ``cb`` against ``y`` and apply threshold Z.

    Runs over 64-bit packed rows in fixed-size blocks; ``threads`` only
    distributes blocks, so results are identical for any worker count. When
    ``coalition`` (user indices) is given, the report carries their collective
    sum as well.
    """
    if math.isnan(Z):
        raise ParameterError("threshold must be a real number or +/-inf")
    p = cb.bias.p
    mask, w, base = _score_pieces(y, p)
    wfull = np.zeros(p.size, dtype=np.float64)
    wfull[mask] = w
    scores = np.empty(cb.n, dtype=np.float64)

    def run_block(lo):
        hi = min(lo + _BLOCK, cb.n)
        scores[lo:hi] = cb.block_bits(lo, hi).astype(np.float64) @ wfull + base

    starts = range(0, cb.n, _BLOCK)
    threads = max(1, int(threads))
    if threads == 1:
        for lo in starts:
            run_block(lo)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, starts))

    accused = np.flatnonzero(scores > Z).astype(np.int64)
    cscore = None
    if coalition is not None:
        cscore = coalition_score(cb.select_bits(coalition), y, cb.bias)
    return AccusationReport(scores=scores, threshold=float(Z), accused=accused,
                            coalition_score=cscore)
