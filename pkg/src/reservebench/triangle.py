# src/reservebench/triangle.py
"""
Run-off triangles.

A Triangle is an immutable n x n array of claim amounts.  Rows are accident
years, columns development years.  With ``Mask.UPPER`` only cells with
``i + j <= n - 1`` (0-based) exist; touching any other cell through
``Triangle.cell`` is a MaskError.  Undefined cells are stored as 0.0 so that
vectorised code can sum whole rows, but they are never exposed as data.

Row/column numbers in error messages are 1-based, matching the CSV file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .errors import MaskError, NegativeIncrement, ParseError, ShapeError

FloatArray = NDArray[np.float64]


class Flavor(str, Enum):
    INCREMENTAL = "incremental"
    CUMULATIVE = "cumulative"


class Mask(str, Enum):
    UPPER = "upper"
    FULL = "full"


@lru_cache(maxsize=64)
def upper_mask(n: int) -> NDArray[np.bool_]:
    """Boolean n x n array, True on observed cells (i + j <= n - 1)."""
    i, j = np.indices((n, n))
    out = (i + j) <= n - 1
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def lower_mask(n: int) -> NDArray[np.bool_]:
    out = ~upper_mask(n)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def next_diagonal_mask(n: int) -> NDArray[np.bool_]:
    """Cells paid in the next calendar year: i + j == n (0-based)."""
    i, j = np.indices((n, n))
    out = (i + j) == n
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Triangle:
    cells: FloatArray
    flavor: Flavor = Flavor.INCREMENTAL
    mask: Mask = Mask.UPPER

    def __post_init__(self) -> None:
        cells = np.array(self.cells, dtype=np.float64)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
            raise ShapeError(f"triangle must be square, got shape {cells.shape}")
        n = cells.shape[0]
        if n < 2:
            raise ShapeError(f"triangle dimension must be >= 2, got {n}")
        if self.mask is Mask.UPPER:
            cells[lower_mask(n)] = 0.0
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> int:
        return int(self.cells.shape[0])

    @property
    def defined(self) -> NDArray[np.bool_]:
        if self.mask is Mask.FULL:
            return np.ones((self.n, self.n), dtype=bool)
        return upper_mask(self.n)

    def cell(self, i: int, j: int) -> float:
        """0-based cell access."""
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"cell ({i}, {j}) outside a {self.n}x{self.n} triangle")
        if self.mask is Mask.UPPER and i + j > self.n - 1:
            raise MaskError(f"cell ({i + 1}, {j + 1}) lies in the unobserved lower triangle")
        return float(self.cells[i, j])

    def values(self) -> FloatArray:
        """Defined cells in row-major order."""
        return self.cells[self.defined]

    def with_cells(self, cells: FloatArray) -> Triangle:
        return Triangle(cells, self.flavor, self.mask)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Triangle):
            return NotImplemented
        return (
            self.flavor is other.flavor
            and self.mask is other.mask
            and np.array_equal(self.cells, other.cells)
        )

    def __hash__(self) -> int:
        return hash((self.flavor, self.mask, self.cells.tobytes()))

    def __repr__(self) -> str:
        return f"Triangle(n={self.n}, flavor={self.flavor.value}, mask={self.mask.value})"


@dataclass(frozen=True)
class UltimateClaim:
    value: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError(f"ultimate claim must be finite, got {self.value!r}")

    def __float__(self) -> float:
        return self.value


# ---------------------------------------------------------------------- #
# Conversions
# ---------------------------------------------------------------------- #
def to_cumulative(t: Triangle) -> Triangle:
    if t.flavor is not Flavor.INCREMENTAL:
        raise ValueError("to_cumulative expects an incremental triangle")
    return Triangle(np.cumsum(t.cells, axis=1), Flavor.CUMULATIVE, t.mask)


def to_incremental(t: Triangle) -> Triangle:
    if t.flavor is not Flavor.CUMULATIVE:
        raise ValueError("to_incremental expects a cumulative triangle")
    inc = np.diff(t.cells, axis=1, prepend=0.0)
    return Triangle(inc, Flavor.INCREMENTAL, t.mask)


def as_cumulative(t: Triangle) -> Triangle:
    return t if t.flavor is Flavor.CUMULATIVE else to_cumulative(t)


def as_incremental(t: Triangle) -> Triangle:
    return t if t.flavor is Flavor.INCREMENTAL else to_incremental(t)


def upper(t: Triangle) -> Triangle:
    """Masked restriction of a triangle to its observed part."""
    return Triangle(t.cells, t.flavor, Mask.UPPER)


# ---------------------------------------------------------------------- #
# Aggregates
# ---------------------------------------------------------------------- #
def ultimate(t: Triangle) -> UltimateClaim:
    if t.mask is not Mask.FULL:
        raise MaskError("ultimate claim needs the full square, got an upper triangle")
    cum = as_cumulative(t)
    return UltimateClaim(float(cum.cells[:, -1].sum()))


def latest_diagonal(t: Triangle) -> FloatArray:
    """C_{i, n-i+1} for every row (last observed cumulative amount)."""
    cum = as_cumulative(t).cells
    n = t.n
    return cum[np.arange(n), n - 1 - np.arange(n)].copy()


def diagonal_sum(t: Triangle) -> float:
    return float(latest_diagonal(t).sum())


def next_diagonal_sum(t: Triangle) -> float:
    """Sum of the increments paid in the next calendar year."""
    if t.mask is not Mask.FULL:
        raise MaskError("next-year payments need the full square")
    inc = as_incremental(t).cells
    return float(inc[next_diagonal_mask(t.n)].sum())


def validate(t: Triangle, non_negative: bool = False) -> None:
    """Check the optional non-negativity invariant.

    Cumulative rows are then non-decreasing by construction, so a single
    pass over the increments covers both flavors.
    """
    if not np.all(np.isfinite(t.values())):
        raise ShapeError("triangle contains non-finite cells")
    if not non_negative:
        return
    inc = as_incremental(t)
    bad = np.argwhere((inc.cells < 0) & inc.defined)
    if bad.size:
        i, j = (int(x) for x in bad[0])
        raise NegativeIncrement(i + 1, j + 1, float(inc.cells[i, j]))


# ---------------------------------------------------------------------- #
# CSV
# ---------------------------------------------------------------------- #
def parse_csv(
    text: bytes | str,
    flavor: Flavor = Flavor.INCREMENTAL,
    skip_header: bool = False,
) -> Triangle:
    """Parse a triangle from CSV text.

    Row i (1-based) holds either n values (full square) or n - i + 1 values
    (upper triangle); n is the length of the first row.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"not UTF-8: {e}", row=1) from None
    lines = text.splitlines()
    first_line = 1
    if skip_header and lines:
        lines = lines[1:]
        first_line = 2
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ShapeError("no data rows")

    rows: list[list[float]] = []
    for offset, fields in enumerate(csv.reader(lines)):
        lineno = first_line + offset
        if not fields or all(not f.strip() for f in fields):
            raise ParseError("empty row", row=lineno)
        parsed = []
        for col, raw in enumerate(fields, start=1):
            try:
                value = float(raw.strip())
            except ValueError:
                raise ParseError(f"not a number: {raw!r}", row=lineno, column=col) from None
            if not np.isfinite(value):
                raise ParseError(f"non-finite value: {raw!r}", row=lineno, column=col)
            parsed.append(value)
        rows.append(parsed)

    n = len(rows[0])
    lengths = [len(r) for r in rows]
    if n < 2 or len(rows) != n:
        raise ShapeError(f"{len(rows)} rows with {n} values in the first row fit no n x n layout")
    if all(length == n for length in lengths):
        mask = Mask.FULL
    elif all(length == n - i for i, length in enumerate(lengths)):
        mask = Mask.UPPER
    else:
        raise ShapeError(f"row lengths {lengths} match neither a square nor an upper triangle")

    cells = np.zeros((n, n))
    for i, r in enumerate(rows):
        cells[i, : len(r)] = r
    return Triangle(cells, flavor, mask)


def emit_csv(t: Triangle) -> str:
    lines = []
    for i in range(t.n):
        width = t.n if t.mask is Mask.FULL else t.n - i
        lines.append(",".join(repr(float(v)) for v in t.cells[i, :width]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------- #
# Prediction targets
# ---------------------------------------------------------------------- #
class Target(str, Enum):
    ULTIMATE_CLAIM = "ultimate_claim"
    NEXT_YEAR_PAYMENTS = "next_year_payments"


def future_cells(n: int, target: Target) -> NDArray[np.bool_]:
    """Unobserved cells whose payments make up the target."""
    return lower_mask(n) if target is Target.ULTIMATE_CLAIM else next_diagonal_mask(n)


def observed_part(t: Triangle, target: Target) -> float:
    """Already-paid amount included in the target."""
    return diagonal_sum(t) if target is Target.ULTIMATE_CLAIM else 0.0


def target_value(full: Triangle, target: Target) -> float:
    if target is Target.ULTIMATE_CLAIM:
        return ultimate(full).value
    return next_diagonal_sum(full)
