"""Collusion strategies and pirate-copy forgery.

A coalition of c users sees, per column, only its own bits; in a column where
all c agree the forged bit is forced to that value (marking condition). In a
detectable column with x ones among the coalition, the forged bit is 1 with
probability psi(x), independently per column. A strategy is therefore a table
psi(0..c) with psi(0) = 0 and psi(c) = 1. Tables are column-symmetric and
column-independent; adaptive per-column adversaries are out of scope.

Built-in strategies:
  extremal    psi(x) = 1 for every x >= 1 (emit 1 whenever possible)
  interleave  psi(x) = x / c (copy a uniformly chosen member's bit)
  majority    most common bit; fair coin at an exact tie
  minority    least common bit among the detectable column's values; coin at tie
  coin        fair coin in every detectable column
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import TAG_FORGE, stream
from .tracer import PirateCopy

KINDS = ("extremal", "interleave", "majority", "minority", "coin")


def strategy_psi(kind, c):
    """The psi table of a named strategy for coalition size ``c``."""
    if c < 1:
        raise ParameterError("coalition size must be at least 1")
    x = np.arange(c + 1, dtype=np.float64)
    if kind == "extremal":
        psi = (x > 0).astype(np.float64)
    elif kind == "interleave":
        psi = x / c
    elif kind == "majority":
        psi = np.where(2 * x > c, 1.0, 0.0) + np.where(2 * x == c, 0.5, 0.0)
    elif kind == "minority":
        psi = np.where(2 * x < c, 1.0, 0.0) + np.where(2 * x == c, 0.5, 0.0)
    elif kind == "coin":
        psi = np.full(c + 1, 0.5)
    else:
        raise ParameterError(f"unknown strategy kind {kind!r}")
    # Undetectable columns are forced regardless of the shape above.
    psi[0] = 0.0
    psi[c] = 1.0
    return psi


@dataclass(frozen=True)
class Strategy:
    """A forgery rule: kind label, coalition size, psi table of length c+1."""

    kind: str
    c: int
    psi: tuple

    def __post_init__(self):
        table = np.asarray(self.psi, dtype=np.float64)
        if table.ndim != 1 or table.size != self.c + 1:
            raise ParameterError("psi table must have length c + 1")
        if not np.all(np.isfinite(table)) or table.min() < 0.0 or table.max() > 1.0:
            raise ParameterError("psi values must be probabilities")
        if table[0] != 0.0 or table[self.c] != 1.0:
            raise ParameterError("marking condition requires psi(0) = 0 and psi(c) = 1")
        object.__setattr__(self, "psi", tuple(float(v) for v in table))

    @classmethod
    def from_kind(cls, kind, c):
        if kind not in KINDS:
            raise ParameterError(f"unknown strategy kind {kind!r}")
        return cls(kind=kind, c=int(c), psi=tuple(strategy_psi(kind, c)))

    @classmethod
    def from_table(cls, table, kind="custom"):
        table = tuple(float(v) for v in table)
        return cls(kind=kind, c=len(table) - 1, psi=table)

    @classmethod
    def from_csv(cls, text_or_path):
        """Load a custom table from CSV rows ``x, psi(x)``.

        Accepts a path or raw CSV text; an optional header row is skipped.
        Every x in 0..c must appear exactly once.
        """
        if "\n" in str(text_or_path) or "," in str(text_or_path):
            text = str(text_or_path)
        else:
            with open(text_or_path, "r", encoding="utf-8") as fh:
                text = fh.read()
        entries = {}
        for row in csv.reader(io.StringIO(text)):
            if not row or not "".join(row).strip():
                continue
            try:
                x = int(row[0])
            except ValueError:
                continue  # header row
            if len(row) < 2:
                raise ParameterError("psi CSV rows must be 'x, psi(x)'")
            if x in entries:
                raise ParameterError(f"duplicate x = {x} in psi CSV")
            entries[x] = float(row[1])
        if not entries:
            raise ParameterError("psi CSV holds no rows")
        c = max(entries)
        if sorted(entries) != list(range(c + 1)):
            raise ParameterError("psi CSV must cover every x in 0..c exactly once")
        return cls.from_table([entries[x] for x in range(c + 1)])

    def table(self):
        return np.asarray(self.psi, dtype=np.float64)


def forge(coalition_rows, strategy, seed=None, rng=None):
    """Forge a pirate copy from the coalition's rows under ``strategy``.

    Per column: count x ones among the rows; emit 1 with probability psi(x),
    with the undetectable cases x = 0 and x = c forced to 0 and 1. Coin flips
    come from stream (seed, forge tag), so the copy is seed-reproducible;
    callers managing their own streams pass ``rng`` instead of ``seed``.
    """
    rows = np.asarray(coalition_rows, dtype=np.uint8)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ParameterError("coalition rows must form a nonempty 2-d array")
    if rows.max(initial=0) > 1:
        raise ParameterError("coalition rows must be binary")
    if isinstance(strategy, str):
        strategy = Strategy.from_kind(strategy, rows.shape[0])
    if strategy.c != rows.shape[0]:
        raise ParameterError("strategy table size disagrees with coalition size")
    if (seed is None) == (rng is None):
        raise ParameterError("pass exactly one of seed and rng")
    if rng is None:
        rng = stream(seed, TAG_FORGE)
    x = rows.sum(axis=0, dtype=np.int64)
    prob = strategy.table()[x]
    u = rng.random(rows.shape[1])
    y = (u < prob).astype(np.uint8)
    y[x == 0] = 0
    y[x == strategy.c] = 1
    return PirateCopy(bits=y)
