"""Lattice data: alphabets, grids, boundary policies, padding.

A grid is a rectangular array of symbol indices over a finite alphabet.
Cells may be masked (sentinel ``MASKED == -1``): masked cells are never
used as center sites, and when they appear inside a neighborhood they are
read as a configurable substitute symbol.

Three boundary policies control which sites have fully resolvable
neighborhoods at a given depth:

* ``INTERIOR_ONLY`` - only sites at least ``depth`` cells from every edge;
* ``MIRROR`` - all sites, neighborhoods read from a mirror-padded extension;
* ``BUFFER`` - all sites, neighborhoods read from a larger outer grid that
  physically surrounds the core.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    EmptyInputError,
    MarginError,
    OutOfBoundsError,
    ParseError,
    ShapeError,
)

MASKED = -1


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of at least two distinct symbol labels.

    The position of a label is its symbol index; grids store indices,
    not labels.
    """

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise ParseError("alphabet needs at least two symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ParseError("alphabet symbols must be distinct")
        for s in self.symbols:
            if not s or any(ch.isspace() for ch in s):
                raise ParseError(f"bad alphabet symbol {s!r}: empty or contains whitespace")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, label: str) -> int:
        try:
            return self.symbols.index(label)
        except ValueError:
            raise ParseError(f"unknown symbol {label!r}") from None

    def label(self, index: int) -> str:
        if not 0 <= index < len(self.symbols):
            raise OutOfBoundsError(f"symbol index {index} outside alphabet of size {len(self.symbols)}")
        return self.symbols[index]

    @staticmethod
    def from_spec(spec: str) -> "Alphabet":
        """Parse a comma-separated label list, e.g. ``"white,black"``."""
        return Alphabet(tuple(tok.strip() for tok in spec.split(",") if tok.strip()))


class Grid:
    """Rectangular array of symbol indices with optional masked cells.

    Cells hold values in ``{MASKED} | {0..alphabet.size-1}``.  The cell
    array is kept read-only; derive modified grids through the
    constructors rather than writing in place.
    """

    def __init__(self, cells: np.ndarray, alphabet: Alphabet):
        cells = np.asarray(cells)
        if cells.ndim != 2 or cells.size == 0:
            raise ShapeError(f"grid cells must be a non-empty 2D array, got shape {cells.shape}")
        if not np.issubdtype(cells.dtype, np.integer):
            raise ParseError(f"grid cells must be integers, got dtype {cells.dtype}")
        lo, hi = int(cells.min()), int(cells.max())
        if lo < MASKED or hi >= alphabet.size:
            raise OutOfBoundsError(
                f"cell values must lie in [{MASKED}, {alphabet.size - 1}], found range [{lo}, {hi}]"
            )
        arr = cells.astype(np.int8, copy=True)
        arr.setflags(write=False)
        self.cells = arr
        self.alphabet = alphabet

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    @property
    def mask(self) -> np.ndarray:
        """Boolean array, True where a cell is masked."""
        return self.cells == MASKED

    @property
    def n_unmasked(self) -> int:
        return int((self.cells != MASKED).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid)
            and self.alphabet == other.alphabet
            and self.cells.shape == other.cells.shape
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __repr__(self) -> str:
        return f"Grid({self.rows}x{self.cols}, |A|={self.alphabet.size}, masked={int(self.mask.sum())})"


class Boundary(Enum):
    INTERIOR_ONLY = "interior"
    MIRROR = "mirror"
    BUFFER = "buffer"


@dataclass(frozen=True)
class BoundaryPolicy:
    """How neighborhoods near the edge are resolved.

    ``BUFFER`` carries the outer grid and the row/column of the core's
    top-left cell inside it (``None`` centers the core).
    """

    boundary: Boundary
    outer: Grid | None = None
    core_origin: tuple[int, int] | None = None

    @staticmethod
    def interior_only() -> "BoundaryPolicy":
        return BoundaryPolicy(Boundary.INTERIOR_ONLY)

    @staticmethod
    def mirror() -> "BoundaryPolicy":
        return BoundaryPolicy(Boundary.MIRROR)

    @staticmethod
    def buffer(outer: Grid, core_origin: tuple[int, int] | None = None) -> "BoundaryPolicy":
        return BoundaryPolicy(Boundary.BUFFER, outer=outer, core_origin=core_origin)


def load_grid(path, alphabet: Alphabet, mask_token: str = "NA") -> Grid:
    """Read a whitespace-separated grid of symbol labels.

    Each line is one row; ``mask_token`` marks masked cells.  Raises
    ``EMPTY_INPUT`` for an empty file, ``SHAPE_ERROR`` for ragged rows and
    ``PARSE_ERROR`` for unknown labels.
    """
    if mask_token in alphabet.symbols:
        raise ParseError(f"mask token {mask_token!r} collides with an alphabet symbol")
    rows: list[list[int]] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read grid file {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            row = []
            for tok in toks:
                if tok == mask_token:
                    row.append(MASKED)
                else:
                    try:
                        row.append(alphabet.index(tok))
                    except ParseError:
                        raise ParseError(f"{path}:{lineno}: unknown symbol {tok!r}") from None
            rows.append(row)
    if not rows:
        raise EmptyInputError(f"{path}: no grid rows found")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ShapeError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
    return Grid(np.array(rows, dtype=np.int8), alphabet)


def save_grid(grid: Grid, path, mask_token: str = "NA") -> None:
    """Write a grid in the format read by :func:`load_grid`."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in range(grid.rows):
            labels = [
                mask_token if v == MASKED else grid.alphabet.label(int(v))
                for v in grid.cells[r]
            ]
            fh.write(" ".join(labels) + "\n")


def mirror_pad(grid: Grid, margin: int) -> Grid:
    """Extend a grid by reflection without duplicating the edge row/column.

    The first padded row above the grid equals original row 1 (not row 0),
    matching reflection about the edge cell itself.  Requires
    ``0 <= margin <= min(rows, cols) - 1``; masked cells reflect as masked.
    """
    if margin < 0:
        raise MarginError(f"margin must be non-negative, got {margin}")
    if margin > min(grid.rows, grid.cols) - 1:
        raise MarginError(
            f"margin {margin} too large for {grid.rows}x{grid.cols} grid "
            f"(needs margin <= {min(grid.rows, grid.cols) - 1})"
        )
    if margin == 0:
        return Grid(grid.cells, grid.alphabet)
    padded = np.pad(grid.cells, margin, mode="reflect")
    return Grid(padded, grid.alphabet)


def _buffer_geometry(grid: Grid, policy: BoundaryPolicy) -> tuple[int, int]:
    """Resolve and validate the core origin inside the outer grid."""
    outer = policy.outer
    if outer is None:
        raise MarginError("BUFFER policy requires an outer grid")
    if outer.alphabet != grid.alphabet:
        raise MarginError("buffer outer grid uses a different alphabet")
    if policy.core_origin is None:
        r0 = (outer.rows - grid.rows) // 2
        c0 = (outer.cols - grid.cols) // 2
    else:
        r0, c0 = policy.core_origin
    if r0 < 0 or c0 < 0 or r0 + grid.rows > outer.rows or c0 + grid.cols > outer.cols:
        raise MarginError(
            f"core {grid.rows}x{grid.cols} at origin ({r0}, {c0}) does not fit "
            f"inside outer {outer.rows}x{outer.cols}"
        )
    core_view = outer.cells[r0 : r0 + grid.rows, c0 : c0 + grid.cols]
    if not np.array_equal(core_view, grid.cells):
        raise MarginError("outer grid does not contain the core grid at the stated origin")
    return r0, c0


def _resolved(grid: Grid, depth: int, policy: BoundaryPolicy) -> tuple[np.ndarray, int, int]:
    """Return (array, row offset, col offset) so that core site (r, c) reads
    neighborhoods from array[r + off_r + dr, c + off_c + dc].

    Guarantees every valid center's depth-``depth`` neighborhood stays
    inside the returned array.
    """
    if depth < 0:
        raise OutOfBoundsError(f"depth must be non-negative, got {depth}")
    if policy.boundary is Boundary.INTERIOR_ONLY:
        return grid.cells, 0, 0
    if policy.boundary is Boundary.MIRROR:
        return mirror_pad(grid, depth).cells, depth, depth
    r0, c0 = _buffer_geometry(grid, policy)
    outer = policy.outer
    top, left = r0, c0
    bottom = outer.rows - (r0 + grid.rows)
    right = outer.cols - (c0 + grid.cols)
    if min(top, left, bottom, right) < depth:
        raise MarginError(
            f"buffer margins (top={top}, left={left}, bottom={bottom}, right={right}) "
            f"must all be >= depth {depth}"
        )
    return outer.cells, r0, c0


def valid_centers(grid: Grid, depth: int, policy: BoundaryPolicy) -> set[tuple[int, int]]:
    """Sites usable as neighborhood centers at the given depth.

    Masked sites are never centers.  Under ``INTERIOR_ONLY`` the site must
    additionally be at least ``depth`` cells from every edge; ``MIRROR``
    and ``BUFFER`` admit every unmasked site (after validating that the
    padding/outer margins support the depth).
    """
    arr = _center_mask(grid, depth, policy)
    rr, cc = np.nonzero(arr)
    return set(zip(rr.tolist(), cc.tolist()))


def _center_mask(grid: Grid, depth: int, policy: BoundaryPolicy) -> np.ndarray:
    """Boolean (rows, cols) array of valid centers; shared with counting."""
    _resolved(grid, depth, policy)
    ok = grid.cells != MASKED
    if policy.boundary is Boundary.INTERIOR_ONLY and depth > 0:
        inner = np.zeros_like(ok)
        if grid.rows > 2 * depth and grid.cols > 2 * depth:
            inner[depth : grid.rows - depth, depth : grid.cols - depth] = True
        ok &= inner
    return ok


def random_grid(rows: int, cols: int, alphabet: Alphabet, rng: np.random.Generator,
                probs=None) -> Grid:
    """Fill a grid iid from ``probs`` (uniform when omitted)."""
    p = None if probs is None else np.asarray(probs, dtype=float)
    cells = rng.choice(alphabet.size, size=(rows, cols), p=p).astype(np.int8)
    return Grid(cells, alphabet)


def checkerboard_grid(rows: int, cols: int, alphabet: Alphabet,
                      flip_prob: float = 0.0, rng: np.random.Generator | None = None) -> Grid:
    """Two-symbol checkerboard with optional iid symbol-flip noise."""
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    cells = ((rr + cc) % 2).astype(np.int8)
    if flip_prob > 0.0:
        if rng is None:
            raise ParseError("flip_prob > 0 requires an rng")
        flips = rng.random((rows, cols)) < flip_prob
        noise = rng.integers(0, alphabet.size, size=(rows, cols))
        cells = np.where(flips, noise, cells).astype(np.int8)
    return Grid(cells, alphabet)


def iter_sites(grid: Grid):
    """Row-major (r, c) scan over every cell."""
    return itertools.product(range(grid.rows), range(grid.cols))
