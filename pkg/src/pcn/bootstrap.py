"""Parametric bootstrap intervals for the fitted conditional laws.

Each replicate simulates a lattice ``2*delta`` larger than the base size
per axis, then re-estimates the conditional laws on the central
``base_rows x base_cols`` core, reading neighborhoods from the simulated
ring (buffer policy) so no core site is dropped.  Replicate ``i`` uses
seed ``seed XOR i``.  Per context and symbol, the 2.5/50/97.5 percent
points of the replicate estimates are taken with the median-unbiased
quantile rule ``h = (n + 1/3) p + 1/3`` (linear interpolation, clamped to
the sample range).

With ``refit=True`` each replicate is additionally pruned from scratch
and only replicates whose selected leaf set matches the model's are kept;
the exclusion count is reported on the table.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .counting import build_count_tree, node_lookup
from .errors import DeltaError, EmptyInputError, EmptySampleError, OutOfBoundsError, ParseError
from .geometry import ContextKey
from .grid import BoundaryPolicy, Grid, mirror_pad
from .model import Pcn
from .sampler import InitMode, ScanOrder, SimConfig, UpdateRule, simulate
from .selection import compute_scores, prune


def quantile_median_unbiased(values, p: float) -> float:
    """Median-unbiased sample quantile (Hyndman-Fan type 8).

    ``h = (n + 1/3) p + 1/3`` clamped to ``[1, n]``, linear interpolation
    between the order statistics around ``h``.
    """
    xs = sorted(float(v) for v in values)
    n = len(xs)
    if n == 0:
        raise EmptyInputError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise OutOfBoundsError(f"quantile level must be in [0, 1], got {p}")
    h = (n + 1.0 / 3.0) * p + 1.0 / 3.0
    h = min(max(h, 1.0), float(n))
    lo = int(math.floor(h))
    frac = h - lo
    hi = min(lo + 1, n)
    return xs[lo - 1] + frac * (xs[hi - 1] - xs[lo - 1])


@dataclass
class BootConfig:
    b: int
    delta: int
    base_rows: int
    base_cols: int
    sweeps: int
    seed: int
    update: UpdateRule = UpdateRule.HEAT_BATH
    scan: ScanOrder = ScanOrder.RASTER
    refit: bool = False
    start: Grid | None = None
    substitute: int = 0
    workers: int = 1


@dataclass(frozen=True)
class CiRow:
    key: ContextKey
    symbol: str
    lower: float | None
    median: float | None
    upper: float | None
    n_replicates: int
    median_n_occ: float = 0.0  # median replicate occurrence count of the context


@dataclass
class CiTable:
    """Interval rows per (context, symbol), plus replicate bookkeeping."""

    rows: list[CiRow]
    b_requested: int
    b_included: int
    b_excluded: int
    row_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.row_index = {(str(r.key), r.symbol): r for r in self.rows}

    def row(self, key, symbol: str) -> CiRow:
        return self.row_index[(str(key), symbol)]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("context,symbol,lower,median,upper,n_replicates\n")
        for r in self.rows:
            stats = [
                "" if v is None else repr(float(v))
                for v in (r.lower, r.median, r.upper)
            ]
            out.write(",".join([str(r.key), r.symbol] + stats + [str(r.n_replicates)]) + "\n")
        return out.getvalue()


def _replicate_estimates(pcn: Pcn, config: BootConfig, index: int):
    """One replicate: simulate, count the core, optionally refit.

    Returns (estimates or None-if-excluded); estimates map leaf key to
    (n_occ, probs tuple).
    """
    outer_rows = config.base_rows + 2 * config.delta
    outer_cols = config.base_cols + 2 * config.delta
    if config.start is not None:
        init_grid = mirror_pad(config.start, config.delta)
        init_mode = InitMode.GRID
    else:
        init_grid = None
        init_mode = InitMode.RANDOM_UNIFORM
    sim_cfg = SimConfig(
        rows=outer_rows,
        cols=outer_cols,
        sweeps=config.sweeps,
        seed=config.seed ^ index,
        update=config.update,
        scan=config.scan,
        init=init_mode,
        init_grid=init_grid,
        substitute=config.substitute,
        trace_every=0,
    )
    outer, _ = simulate(pcn, sim_cfg)
    d = config.delta
    core = Grid(outer.cells[d : d + config.base_rows, d : d + config.base_cols], pcn.alphabet)
    tree = build_count_tree(
        core,
        pcn.depth,
        pcn.mode,
        policy=BoundaryPolicy.buffer(outer),
        substitute=config.substitute,
    )
    if config.refit:
        scores = compute_scores(tree, tree.n_total)
        refitted = prune(tree, scores, tree.n_total)
        if set(refitted.leaves) != set(pcn.leaves):
            return None
    est = {}
    for key in pcn.leaf_keys():
        node = node_lookup(tree, key)
        if node is not None and node.n_occ > 0:
            est[key] = (node.n_occ, tuple(c / node.n_occ for c in node.center_counts))
    return est


def bootstrap_ci(pcn: Pcn, config: BootConfig) -> CiTable:
    """Bootstrap 95 percent intervals (plus medians) for every leaf law."""
    if config.b < 1:
        raise ParseError(f"replicate count must be >= 1, got {config.b}")
    if config.delta <= pcn.depth:
        raise DeltaError(
            f"delta {config.delta} must exceed the model depth {pcn.depth}"
        )
    if config.seed < 0:
        raise ParseError(f"seed must be >= 0, got {config.seed}")
    if config.start is not None and (
        (config.start.rows, config.start.cols) != (config.base_rows, config.base_cols)
    ):
        raise ParseError(
            f"start grid is {config.start.rows}x{config.start.cols}, "
            f"base size is {config.base_rows}x{config.base_cols}"
        )

    indices = range(config.b)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda i: _replicate_estimates(pcn, config, i), indices))
    else:
        results = [_replicate_estimates(pcn, config, i) for i in indices]

    included = [r for r in results if r is not None]
    excluded = config.b - len(included)
    if not included:
        raise EmptySampleError("every bootstrap replicate was excluded by the refit filter")

    a = pcn.alphabet.size
    rows: list[CiRow] = []
    for key in pcn.leaf_keys():
        samples = [est[key] for est in included if key in est]
        n_obs = len(samples)
        occ_median = quantile_median_unbiased([n for n, _ in samples], 0.5) if n_obs else 0.0
        for s in range(a):
            label = pcn.alphabet.label(s)
            if n_obs == 0:
                rows.append(CiRow(key, label, None, None, None, 0))
            else:
                vals = [probs[s] for _, probs in samples]
                rows.append(
                    CiRow(
                        key,
                        label,
                        quantile_median_unbiased(vals, 0.025),
                        quantile_median_unbiased(vals, 0.5),
                        quantile_median_unbiased(vals, 0.975),
                        n_obs,
                        occ_median,
                    )
                )
    return CiTable(rows=rows, b_requested=config.b, b_included=len(included), b_excluded=excluded)
