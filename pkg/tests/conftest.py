import math

import numpy as np
import pytest

from pcn import (
    Alphabet,
    BoundaryPolicy,
    ContextKey,
    FrameKey,
    Grid,
    MASKED,
    Mode,
    Pcn,
    PcnDist,
)


def logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


@pytest.fixture
def binary_alphabet():
    return Alphabet(("w", "b"))


def variable_truth_model() -> Pcn:
    """Depth-2 binary model that widens only the middle first-order classes.

    First-order classes 3, 4 and 5 carry second-order laws
    ``logistic(0.2 * (b1 + b2 - 12))``; every other class keeps the
    first-order law ``logistic(0.2 * (b1 - 4))``.
    """
    alpha = Alphabet(("w", "b"))
    leaves = {}
    for b1 in range(9):
        fk1 = FrameKey(1, Mode.COUNT, (8 - b1, b1))
        if b1 in (3, 4, 5):
            for b2 in range(17):
                fk2 = FrameKey(2, Mode.COUNT, (16 - b2, b2))
                p = logistic(0.2 * (b1 + b2 - 12))
                leaves[ContextKey(Mode.COUNT, (fk1, fk2))] = PcnDist((1 - p, p))
        else:
            p = logistic(0.2 * (b1 - 4))
            leaves[ContextKey(Mode.COUNT, (fk1,))] = PcnDist((1 - p, p))
    return Pcn(alpha, Mode.COUNT, 2, leaves)


def variable_truth_law(key: ContextKey) -> float:
    """Black probability the variable-depth truth assigns to a leaf key."""
    b1 = key.frames[0].payload[1]
    if len(key.frames) == 1:
        return logistic(0.2 * (b1 - 4))
    b2 = key.frames[1].payload[1]
    return logistic(0.2 * (b1 + b2 - 12))


def full_truth_model(g=0.8, cap=2.5, c0=0.3, c1=0.5) -> Pcn:
    """Complete depth-2 binary model with all 153 second-order leaves.

    The law is centered per first-order class so that both sparse and
    dense textures keep within-class contrast:
    ``logit p = clip(g * (b1 - 4), +-cap) + slope(b1) * (b2 - 2 * b1)``
    with ``slope`` rising linearly from ``c0`` at class 4 to ``c1`` at the
    extreme classes.
    """
    alpha = Alphabet(("w", "b"))
    leaves = {}
    for b1 in range(9):
        fk1 = FrameKey(1, Mode.COUNT, (8 - b1, b1))
        slope = c0 + (c1 - c0) * abs(b1 - 4) / 4.0
        base = max(-cap, min(cap, g * (b1 - 4)))
        for b2 in range(17):
            fk2 = FrameKey(2, Mode.COUNT, (16 - b2, b2))
            p = logistic(base + slope * (b2 - 2.0 * b1))
            leaves[ContextKey(Mode.COUNT, (fk1, fk2))] = PcnDist((1 - p, p))
    return Pcn(alpha, Mode.COUNT, 2, leaves)


def ring_cells(order: int):
    """Perimeter offsets of the (2j+1)^2 box, scanned row by row."""
    cells = []
    for dr in range(-order, order + 1):
        for dc in range(-order, order + 1):
            if max(abs(dr), abs(dc)) == order:
                cells.append((dr, dc))
    return cells


def reflect_index(idx: int, n: int, margin: int) -> int:
    """Source row/col of a padded index under edge reflection."""
    src = idx - margin
    if src < 0:
        src = -src
    if src >= n:
        src = 2 * n - 2 - src
    return src


def brute_force_counts(grid: Grid, depth: int, mode: Mode,
                       policy: BoundaryPolicy | None = None,
                       substitute: int = 0):
    """Per-chain (n_occ, center_counts) from a direct site-by-site scan.

    Independent of the counting module: resolves boundaries itself (via
    reflect_index for MIRROR, outer-array indexing for BUFFER) and builds
    the chain of every prefix order explicitly.
    """
    if policy is None:
        policy = BoundaryPolicy.interior_only()
    a = grid.alphabet.size
    cells = grid.cells
    kind = policy.boundary.value

    def read(r, c):
        if kind == "interior":
            v = cells[r, c]
        elif kind == "mirror":
            v = cells[reflect_index(r + depth, grid.rows, depth),
                      reflect_index(c + depth, grid.cols, depth)]
        else:
            outer = policy.outer
            if policy.core_origin is None:
                r0 = (outer.rows - grid.rows) // 2
                c0 = (outer.cols - grid.cols) // 2
            else:
                r0, c0 = policy.core_origin
            v = outer.cells[r + r0, c + c0]
        return substitute if v == MASKED else int(v)

    table: dict[tuple, list] = {}

    def bump(chain_key, center):
        rec = table.setdefault(chain_key, [0, [0] * a])
        rec[0] += 1
        rec[1][center] += 1

    for r in range(grid.rows):
        for c in range(grid.cols):
            if cells[r, c] == MASKED:
                continue
            if kind == "interior" and not (
                depth <= r < grid.rows - depth and depth <= c < grid.cols - depth
            ):
                continue
            chain = []
            for j in range(1, depth + 1):
                ring = [read(r + dr, c + dc) for dr, dc in ring_cells(j)]
                if mode is Mode.COUNT:
                    payload = [0] * a
                    for v in ring:
                        payload[v] += 1
                    chain.append(tuple(payload))
                else:
                    chain.append(tuple(ring))
            center = int(cells[r, c])
            for cut in range(depth + 1):
                bump(tuple(chain[:cut]), center)
    return {k: (v[0], tuple(v[1])) for k, v in table.items()}


def chain_of(key: ContextKey) -> tuple:
    return tuple(fk.payload for fk in key.frames)
