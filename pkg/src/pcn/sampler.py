"""Single-site Monte Carlo simulation of a fitted or hand-specified model.

Each sweep visits every site once (row-major or a per-sweep random
permutation) and redraws the site's symbol conditionally on its current
neighborhood, read from a live mirror-padded copy of the lattice so
border sites always see a full neighborhood.  The default update draws
directly from the model law (heat bath); the alternative proposes a
uniform symbol and accepts with probability ``min(1, q(prop)/q(cur))``,
accepting outright when ``q(cur) == 0``.

Randomness comes from a counter-based Philox generator keyed by the
config seed, so runs are reproducible across platforms.  A per-sweep
trace of first-order count-class frequencies supports convergence
diagnostics via :func:`stabilized`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    CandidateError,
    EmptySampleError,
    InsufficientTraceError,
    MarginError,
    ParseError,
    ShapeError,
)
from .geometry import ContextKey, Mode, compositions, frame_offsets
from .grid import MASKED, Grid
from .model import Pcn

_FORCE_PYTHON = False
_DENSE_LIMIT = 4_000_000  # max entries in the dense child table
_KEY_LIMIT = 2**62


class UpdateRule(Enum):
    HEAT_BATH = "heat-bath"
    METROPOLIS = "metropolis"


class ScanOrder(Enum):
    RASTER = "raster"
    RANDOM = "random"


class InitMode(Enum):
    RANDOM_UNIFORM = "random"
    GRID = "grid"


@dataclass
class SimConfig:
    rows: int
    cols: int
    sweeps: int
    seed: int
    update: UpdateRule = UpdateRule.HEAT_BATH
    scan: ScanOrder = ScanOrder.RASTER
    init: InitMode = InitMode.RANDOM_UNIFORM
    init_grid: Grid | None = None
    freeze_mask: bool = True
    substitute: int = 0
    trace_every: int = 1  # 0 disables per-sweep tracing (initial row only)


@dataclass
class ConvergenceTrace:
    """Recorded first-order count-class frequencies along the run.

    Row 0 is the initial state.  ``max_diff[t]`` is the largest absolute
    frequency change against the previously recorded row (NaN at row 0).
    """

    class_payloads: tuple[tuple[int, ...], ...]
    sweeps: np.ndarray
    freqs: np.ndarray
    max_diff: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.sweeps.shape[0])

    def to_csv(self) -> str:
        out = io.StringIO()
        names = ["f_" + "-".join(str(v) for v in p) for p in self.class_payloads]
        out.write(",".join(["sweep"] + names + ["max_diff"]) + "\n")
        for t in range(self.n_rows):
            cells = [str(int(self.sweeps[t]))]
            cells += [repr(float(v)) for v in self.freqs[t]]
            cells.append("" if math.isnan(self.max_diff[t]) else repr(float(self.max_diff[t])))
            out.write(",".join(cells) + "\n")
        return out.getvalue()


def stabilized(trace: ConvergenceTrace, threshold: float = 1e-3) -> int | None:
    """First recorded sweep whose frequency change drops below ``threshold``.

    Returns None when the trace never stabilizes; raises
    ``INSUFFICIENT_TRACE`` when fewer than two rows were recorded.
    """
    if trace.n_rows < 2:
        raise InsufficientTraceError(
            f"stabilization needs at least 2 trace rows, got {trace.n_rows}"
        )
    for t in range(1, trace.n_rows):
        if trace.max_diff[t] < threshold:
            return int(trace.sweeps[t])
    return None


class _Tables:
    """Model tree flattened for the sweep kernel."""

    def __init__(self, pcn: Pcn, substitute: int):
        a = pcn.alphabet.size
        depth = pcn.depth
        stored = dict(pcn.internals)
        stored.update(pcn.leaves)
        keys = set(stored)
        for key in list(keys):
            for cut in range(len(key.frames)):
                keys.add(ContextKey(pcn.mode, key.frames[:cut]))
        ordered = sorted(keys, key=lambda k: (k.order, k.sort_key()))
        ids = {k: i for i, k in enumerate(ordered)}
        n = len(ordered)

        self.count_mode = pcn.mode is Mode.COUNT
        if self.count_mode:
            base = 8 * max(depth, 1) + 1
            self.powb = np.array([base**s for s in range(a)], dtype=np.int64)
            stride = int(base**a)
        else:
            self.powb = np.zeros(a, dtype=np.int64)
            stride = int(a ** (8 * max(depth, 1)))
        self.stride = stride
        self.has_dist = np.zeros(n, dtype=np.uint8)
        self.is_leaf = np.zeros(n, dtype=np.uint8)
        self.cdf = np.zeros((n, a), dtype=np.float64)
        self.pmf = np.zeros((n, a), dtype=np.float64)
        for key, dist in stored.items():
            i = ids[key]
            self.has_dist[i] = 1
            if key in pcn.leaves:
                self.is_leaf[i] = 1
            self.pmf[i] = dist.probs
            self.cdf[i] = np.cumsum(dist.probs)

        entries = []
        for key in ordered:
            if key.is_root:
                continue
            parent = ids[ContextKey(pcn.mode, key.frames[:-1])]
            code = self._pack(key.frames[-1].payload, a)
            entries.append((parent, code, ids[key]))
        self.n_nodes = n
        self.kernel_ok = n * stride < _KEY_LIMIT
        self.use_dense = self.kernel_ok and n * stride <= _DENSE_LIMIT
        if self.use_dense:
            self.dense = np.full((n, stride), -1, dtype=np.int64)
            for parent, code, child in entries:
                self.dense[parent, code] = child
            self.child_map = None
        else:
            self.dense = np.full((1, 1), -1, dtype=np.int64)
            self.child_map = {parent * stride + code: child for parent, code, child in entries}

        offs = []
        starts = [0]
        for j in range(1, depth + 1):
            offs.extend(frame_offsets(j))
            starts.append(len(offs))
        self.offs_dr = np.array([o[0] for o in offs], dtype=np.int64)
        self.offs_dc = np.array([o[1] for o in offs], dtype=np.int64)
        self.order_start = np.array(starts, dtype=np.int64)
        self.depth = depth
        self.a = a
        self.substitute = substitute

    def _pack(self, payload: tuple[int, ...], a: int) -> int:
        if self.count_mode:
            return int(sum(payload[s] * int(self.powb[s]) for s in range(a)))
        code = 0
        for v in payload:
            code = code * a + v
        return code


def _sweep_python(padded, rows, cols, m, metropolis, freeze_masked, order, u1, u2, tb: _Tables):
    """Plain-Python twin of the compiled sweep (same arithmetic)."""
    a = tb.a
    for t in range(order.shape[0]):
        site = int(order[t])
        r, c = site // cols, site % cols
        pr, pc = r + m, c + m
        cur = int(padded[pr, pc])
        if cur < 0 and freeze_masked:
            continue
        node = 0
        best = 0 if tb.has_dist[0] == 1 else -1
        if tb.is_leaf[0] == 0:
            for j in range(1, tb.depth + 1):
                code = 0
                for k in range(tb.order_start[j - 1], tb.order_start[j]):
                    v = int(padded[pr + tb.offs_dr[k], pc + tb.offs_dc[k]])
                    if v < 0:
                        v = tb.substitute
                    if tb.count_mode:
                        code += int(tb.powb[v])
                    else:
                        code = code * a + v
                if tb.use_dense:
                    nxt = int(tb.dense[node, code])
                    if nxt < 0:
                        break
                    node = nxt
                else:
                    nxt = tb.child_map.get(node * tb.stride + code, -1)
                    if nxt < 0:
                        break
                    node = nxt
                if tb.has_dist[node] == 1:
                    best = node
                if tb.is_leaf[node] == 1:
                    break
        if best < 0:
            continue
        if metropolis:
            prop = int(u1[t] * a)
            if prop >= a:
                prop = a - 1
            if cur >= 0:
                qc = tb.pmf[best, cur]
                if qc > 0.0 and u2[t] >= tb.pmf[best, prop] / qc:
                    continue
            val = prop
        else:
            u = u1[t]
            val = 0
            while val < a - 1 and u >= tb.cdf[best, val]:
                val += 1
        if val == cur:
            continue
        rows_img = [pr]
        if 1 <= r <= m:
            rows_img.append(m - r)
        if rows - 1 - m <= r <= rows - 2:
            rows_img.append(m + 2 * rows - 2 - r)
        cols_img = [pc]
        if 1 <= c <= m:
            cols_img.append(m - c)
        if cols - 1 - m <= c <= cols - 2:
            cols_img.append(m + 2 * cols - 2 - c)
        for ri in rows_img:
            for cj in cols_img:
                padded[ri, cj] = val
    return padded


def _order1_codes(padded: np.ndarray, rows: int, cols: int, m: int, a: int, substitute: int):
    """Base-9 packed first-order count class of every core site."""
    pow9 = 9 ** np.arange(a, dtype=np.int64)
    codes = np.zeros((rows, cols), dtype=np.int64)
    for dr, dc in frame_offsets(1):
        vals = padded[m + dr : m + dr + rows, m + dc : m + dc + cols].astype(np.int64)
        np.putmask(vals, vals == MASKED, substitute)
        codes += pow9[vals]
    return codes


class _TraceBuilder:
    def __init__(self, a: int):
        self.payloads = tuple(compositions(8, a))
        codes = np.array(
            [sum(p[s] * 9**s for s in range(a)) for p in self.payloads], dtype=np.int64
        )
        self.perm = np.argsort(codes, kind="stable")
        self.sorted_codes = codes[self.perm]
        self.rows: list[np.ndarray] = []
        self.sweeps: list[int] = []

    def record(self, sweep: int, padded, rows, cols, m, a, substitute) -> None:
        codes = _order1_codes(padded, rows, cols, m, a, substitute)
        live = padded[m : m + rows, m : m + cols] != MASKED
        idx = np.searchsorted(self.sorted_codes, codes[live])
        counts_sorted = np.bincount(idx, minlength=len(self.payloads))
        counts = np.zeros(len(self.payloads), dtype=np.int64)
        counts[self.perm] = counts_sorted
        total = max(int(live.sum()), 1)
        self.rows.append(counts / total)
        self.sweeps.append(sweep)

    def finish(self) -> ConvergenceTrace:
        freqs = np.vstack(self.rows)
        diffs = np.full(len(self.rows), np.nan)
        for t in range(1, len(self.rows)):
            diffs[t] = float(np.max(np.abs(freqs[t] - freqs[t - 1])))
        return ConvergenceTrace(
            class_payloads=self.payloads,
            sweeps=np.array(self.sweeps, dtype=np.int64),
            freqs=freqs,
            max_diff=diffs,
        )


def _validate(pcn: Pcn, config: SimConfig) -> None:
    if config.sweeps < 0:
        raise ParseError(f"sweeps must be >= 0, got {config.sweeps}")
    if config.seed < 0:
        raise ParseError(f"seed must be >= 0, got {config.seed}")
    if min(config.rows, config.cols) < max(2 * pcn.depth + 1, 2):
        raise MarginError(
            f"{config.rows}x{config.cols} lattice too small for depth {pcn.depth} "
            f"(needs at least {max(2 * pcn.depth + 1, 2)} per side)"
        )
    if not 0 <= config.substitute < pcn.alphabet.size:
        raise ParseError(f"substitute index {config.substitute} outside alphabet")
    if config.init is InitMode.GRID:
        g = config.init_grid
        if g is None:
            raise ParseError("init mode GRID requires init_grid")
        if (g.rows, g.cols) != (config.rows, config.cols):
            raise ShapeError(
                f"init grid is {g.rows}x{g.cols}, config wants {config.rows}x{config.cols}"
            )
        if g.alphabet != pcn.alphabet:
            raise ParseError("init grid alphabet differs from model alphabet")
        if g.n_unmasked == 0 and config.freeze_mask:
            raise EmptySampleError("every cell is masked and frozen; nothing to simulate")
    elif config.init_grid is not None:
        raise ParseError("init_grid given but init mode is not GRID")
    if not (pcn.has_root_fallback() or pcn.is_complete()):
        raise CandidateError(
            "model has no root fallback law and is not complete; "
            "unseen contexts could not be resolved"
        )


def simulate(pcn: Pcn, config: SimConfig, snapshot_cb=None) -> tuple[Grid, ConvergenceTrace]:
    """Run ``config.sweeps`` full-lattice sweeps and return the final grid.

    ``snapshot_cb(sweep, grid)`` (when given) is called on the initial
    state and after every sweep.  The returned trace holds first-order
    class frequencies recorded every ``config.trace_every`` sweeps.
    """
    _validate(pcn, config)
    rows, cols, a = config.rows, config.cols, pcn.alphabet.size
    rng = np.random.Generator(np.random.Philox(config.seed))
    if config.init is InitMode.RANDOM_UNIFORM:
        cells = rng.integers(0, a, size=(rows, cols)).astype(np.int8)
    else:
        cells = config.init_grid.cells.astype(np.int8, copy=True)
    m = max(pcn.depth, 1)
    padded = np.pad(cells, m, mode="reflect").astype(np.int8)

    tables = _Tables(pcn, config.substitute)
    metropolis = config.update is UpdateRule.METROPOLIS
    use_kernel = tables.kernel_ok and not _FORCE_PYTHON
    if use_kernel:
        from ._kernels import build_child_map, empty_child_map, run_sweep

        if tables.use_dense:
            child_map = empty_child_map()
        else:
            items = sorted(tables.child_map.items())
            child_map = build_child_map(
                np.array([k for k, _ in items], dtype=np.int64),
                np.array([v for _, v in items], dtype=np.int64),
            )

    tracer = _TraceBuilder(a)
    tracer.record(0, padded, rows, cols, m, a, config.substitute)
    if snapshot_cb is not None:
        snapshot_cb(0, Grid(padded[m : m + rows, m : m + cols].copy(), pcn.alphabet))

    n_sites = rows * cols
    raster = np.arange(n_sites, dtype=np.int64)
    empty_u = np.zeros(0, dtype=np.float64)
    for sweep in range(1, config.sweeps + 1):
        if config.scan is ScanOrder.RANDOM:
            order = rng.permutation(n_sites).astype(np.int64)
        else:
            order = raster
        u1 = rng.random(n_sites)
        u2 = rng.random(n_sites) if metropolis else empty_u
        if use_kernel:
            run_sweep(
                padded, rows, cols, m, tables.depth, a, tables.substitute,
                metropolis, config.freeze_mask, order, u1, u2,
                tables.offs_dr, tables.offs_dc, tables.order_start,
                tables.count_mode, tables.powb, tables.use_dense, tables.dense,
                child_map, tables.stride, tables.has_dist, tables.is_leaf,
                tables.cdf, tables.pmf,
            )
        else:
            _sweep_python(
                padded, rows, cols, m, metropolis, config.freeze_mask, order, u1, u2, tables
            )
        if config.trace_every > 0 and (sweep % config.trace_every == 0 or sweep == config.sweeps):
            tracer.record(sweep, padded, rows, cols, m, a, config.substitute)
        if snapshot_cb is not None:
            snapshot_cb(sweep, Grid(padded[m : m + rows, m : m + cols].copy(), pcn.alphabet))

    grid = Grid(padded[m : m + rows, m : m + cols].copy(), pcn.alphabet)
    return grid, tracer.finish()
