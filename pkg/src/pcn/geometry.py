"""Frame geometry and context keys.

The order-``j`` frame of a site is the square ring of the ``8j`` cells at
Chebyshev distance exactly ``j``.  A depth-``d`` neighborhood stacks the
frames of orders ``1..d`` (``4d^2 + 4d`` cells).  A frame is summarized
either by its per-symbol count vector (``COUNT`` mode, translation and
rotation invariant) or by the full symbol sequence in canonical ring order
(``POSITION`` mode).

Canonical ring order is the row-major scan of the ring: top row left to
right, then each middle row's left cell then right cell, then the bottom
row left to right.

A :class:`ContextKey` chains frames of consecutive orders ``1..k``; the
empty chain is the root (every site matches it).  Key ``a`` is a *suffix*
of key ``b`` when ``a``'s frames are a prefix of ``b``'s chain; suffixes
are exactly the coarser contexts a site also matches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ModeError, OutOfBoundsError, ParseError
from .grid import MASKED, BoundaryPolicy, Grid, _center_mask, _resolved


class Mode(Enum):
    COUNT = "count"
    POSITION = "position"

    @staticmethod
    def parse(name: str) -> "Mode":
        try:
            return Mode(name.lower())
        except ValueError:
            raise ModeError(f"unknown mode {name!r}; expected 'count' or 'position'") from None


def frame_offsets(order: int) -> tuple[tuple[int, int], ...]:
    """(dr, dc) offsets of the order-``j`` ring in canonical order (8j of them)."""
    if order < 1:
        raise OutOfBoundsError(f"frame order must be >= 1, got {order}")
    return tuple(
        (dr, dc)
        for dr in range(-order, order + 1)
        for dc in range(-order, order + 1)
        if max(abs(dr), abs(dc)) == order
    )


def neighborhood_size(depth: int) -> int:
    """Total cells in frames 1..depth: ``4*depth**2 + 4*depth``."""
    if depth < 0:
        raise OutOfBoundsError(f"depth must be >= 0, got {depth}")
    return 4 * depth * depth + 4 * depth


def num_classes(order: int, alphabet_size: int, mode: Mode) -> int:
    """Distinct frame keys of one order: multisets for COUNT, sequences for POSITION."""
    if order < 1:
        raise OutOfBoundsError(f"frame order must be >= 1, got {order}")
    if alphabet_size < 2:
        raise OutOfBoundsError(f"alphabet size must be >= 2, got {alphabet_size}")
    n = 8 * order
    if mode is Mode.COUNT:
        return math.comb(n + alphabet_size - 1, alphabet_size - 1)
    return alphabet_size**n


def max_leaves(depth: int, alphabet_size: int, mode: Mode) -> int:
    """Leaf count of the complete depth-``d`` tree (1 when depth is 0)."""
    if depth < 0:
        raise OutOfBoundsError(f"depth must be >= 0, got {depth}")
    if mode is Mode.COUNT:
        return math.prod(num_classes(k, alphabet_size, mode) for k in range(1, depth + 1))
    return alphabet_size ** neighborhood_size(depth)


def compositions(total: int, parts: int):
    """All ``parts``-tuples of non-negative ints summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class FrameKey:
    """One summarized frame.

    COUNT payload: per-symbol counts (length = alphabet size, sum = 8*order).
    POSITION payload: symbol indices in canonical ring order (length 8*order).
    """

    order: int
    mode: Mode
    payload: tuple[int, ...]

    def __post_init__(self):
        if self.order < 1:
            raise OutOfBoundsError(f"frame order must be >= 1, got {self.order}")
        if any((not isinstance(v, int)) or v < 0 for v in self.payload):
            raise ParseError(f"frame payload must be non-negative ints, got {self.payload}")
        if self.mode is Mode.COUNT:
            if len(self.payload) < 2:
                raise ParseError("COUNT payload needs one entry per alphabet symbol (>= 2)")
            if sum(self.payload) != 8 * self.order:
                raise ParseError(
                    f"COUNT payload sums to {sum(self.payload)}, expected {8 * self.order}"
                )
        else:
            if len(self.payload) != 8 * self.order:
                raise ParseError(
                    f"POSITION payload has {len(self.payload)} entries, expected {8 * self.order}"
                )

    def __str__(self) -> str:
        if self.mode is Mode.COUNT:
            return f"j{self.order}:" + ",".join(str(v) for v in self.payload)
        return f"j{self.order}:" + " ".join(str(v) for v in self.payload)


@dataclass(frozen=True)
class ContextKey:
    """Chain of frames of consecutive orders 1..k; empty chain is the root."""

    mode: Mode
    frames: tuple[FrameKey, ...]

    def __post_init__(self):
        for i, fk in enumerate(self.frames):
            if fk.order != i + 1:
                raise ParseError(
                    f"frame {i} has order {fk.order}, expected consecutive orders from 1"
                )
            if fk.mode is not self.mode:
                raise ModeError(f"frame {fk} does not match key mode {self.mode.value}")
        if self.mode is Mode.COUNT and self.frames:
            widths = {len(fk.payload) for fk in self.frames}
            if len(widths) != 1:
                raise ParseError(f"COUNT frames disagree on alphabet size: {sorted(widths)}")

    @property
    def order(self) -> int:
        return len(self.frames)

    @property
    def is_root(self) -> bool:
        return not self.frames

    def parent(self) -> "ContextKey":
        if self.is_root:
            raise OutOfBoundsError("root key has no parent")
        return ContextKey(self.mode, self.frames[:-1])

    def child(self, frame: FrameKey) -> "ContextKey":
        return ContextKey(self.mode, self.frames + (frame,))

    def sort_key(self):
        return tuple(fk.payload for fk in self.frames)

    def __str__(self) -> str:
        if self.is_root:
            return "root"
        return "|".join(str(fk) for fk in self.frames)

    @staticmethod
    def root(mode: Mode) -> "ContextKey":
        return ContextKey(mode, ())

    @staticmethod
    def from_string(text: str, mode: Mode) -> "ContextKey":
        text = text.strip()
        if text == "root" or text == "":
            return ContextKey.root(mode)
        frames = []
        for part in text.split("|"):
            head, sep, body = part.partition(":")
            if not sep or not head.startswith("j"):
                raise ParseError(f"bad frame {part!r}: expected 'j<order>:<payload>'")
            try:
                order = int(head[1:])
            except ValueError:
                raise ParseError(f"bad frame order in {part!r}") from None
            toks = body.split(",") if mode is Mode.COUNT else body.split()
            try:
                payload = tuple(int(t) for t in toks)
            except ValueError:
                raise ParseError(f"bad frame payload in {part!r}") from None
            frames.append(FrameKey(order, mode, payload))
        return ContextKey(mode, tuple(frames))


def is_suffix(a: ContextKey, b: ContextKey) -> bool:
    """True when ``a``'s frame chain is a prefix of ``b``'s (root matches all)."""
    if a.mode is not b.mode:
        raise ModeError(f"cannot compare {a.mode.value} key with {b.mode.value} key")
    return b.frames[: len(a.frames)] == a.frames


def frame_key_from_ring(ring: list[int], order: int, mode: Mode, alphabet_size: int) -> FrameKey:
    """Summarize raw ring symbol values into a FrameKey."""
    if mode is Mode.COUNT:
        counts = [0] * alphabet_size
        for v in ring:
            counts[v] += 1
        return FrameKey(order, mode, tuple(counts))
    return FrameKey(order, mode, tuple(ring))


def extract_context(
    grid: Grid,
    site: tuple[int, int],
    depth: int,
    mode: Mode,
    policy: BoundaryPolicy | None = None,
    substitute: int = 0,
) -> ContextKey:
    """Depth-``d`` context key of one site.

    The site must be a valid center under the policy (default
    ``INTERIOR_ONLY``).  Masked cells inside the neighborhood read as the
    ``substitute`` symbol index.
    """
    if policy is None:
        policy = BoundaryPolicy.interior_only()
    if not 0 <= substitute < grid.alphabet.size:
        raise OutOfBoundsError(f"substitute index {substitute} outside alphabet")
    r, c = site
    if not (0 <= r < grid.rows and 0 <= c < grid.cols):
        raise OutOfBoundsError(f"site {site} outside {grid.rows}x{grid.cols} grid")
    if not _center_mask(grid, depth, policy)[r, c]:
        raise OutOfBoundsError(f"site {site} is not a valid center at depth {depth}")
    arr, off_r, off_c = _resolved(grid, depth, policy)
    frames = []
    for j in range(1, depth + 1):
        ring = []
        for dr, dc in frame_offsets(j):
            v = int(arr[r + off_r + dr, c + off_c + dc])
            ring.append(substitute if v == MASKED else v)
        frames.append(frame_key_from_ring(ring, j, mode, grid.alphabet.size))
    return ContextKey(mode, tuple(frames))
