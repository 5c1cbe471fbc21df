import itertools

import numpy as np
import pytest

import pcn.sampler
from pcn import (
    Alphabet,
    ContextKey,
    FrameKey,
    Grid,
    InitMode,
    MASKED,
    Mode,
    Pcn,
    PcnDist,
    ScanOrder,
    SimConfig,
    UpdateRule,
    simulate,
    stabilized,
)
from pcn.errors import (
    CandidateError,
    EmptySampleError,
    InsufficientTraceError,
    MarginError,
    ParseError,
    ShapeError,
)

from conftest import variable_truth_model


def flat_model(p=0.5):
    alpha = Alphabet(("w", "b"))
    return Pcn(alpha, Mode.COUNT, 0,
               leaves={ContextKey.root(Mode.COUNT): PcnDist(probs=(1 - p, p))})


def position_model():
    """Complete depth-1 position model with a hash-valued law per pattern."""
    alpha = Alphabet(("w", "b"))
    leaves = {}
    for i, pattern in enumerate(itertools.product(range(2), repeat=8)):
        p = 0.1 + 0.8 * ((13 * i) % 256) / 255.0
        key = ContextKey(Mode.POSITION, (FrameKey(1, Mode.POSITION, pattern),))
        leaves[key] = PcnDist(probs=(1 - p, p))
    return Pcn(alpha, Mode.POSITION, 1, leaves)


def masked_init(rows, cols, seed):
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, 2, size=(rows, cols)).astype(np.int8)
    cells[rng.random((rows, cols)) < 0.1] = MASKED
    return Grid(cells, Alphabet(("w", "b")))


def test_seed_determinism():
    model = variable_truth_model()
    config = SimConfig(rows=24, cols=20, sweeps=5, seed=99)
    g1, t1 = simulate(model, config)
    g2, t2 = simulate(model, config)
    assert np.array_equal(g1.cells, g2.cells)
    assert np.array_equal(t1.freqs, t2.freqs)
    g3, _ = simulate(model, SimConfig(rows=24, cols=20, sweeps=5, seed=100))
    assert not np.array_equal(g1.cells, g3.cells)


@pytest.mark.parametrize("update", [UpdateRule.HEAT_BATH, UpdateRule.METROPOLIS])
@pytest.mark.parametrize("scan", [ScanOrder.RASTER, ScanOrder.RANDOM])
def test_python_twin_matches_kernel(update, scan, monkeypatch):
    model = variable_truth_model()
    config = SimConfig(rows=14, cols=12, sweeps=3, seed=7, update=update, scan=scan)
    fast, fast_trace = simulate(model, config)
    monkeypatch.setattr(pcn.sampler, "_FORCE_PYTHON", True)
    slow, slow_trace = simulate(model, config)
    assert np.array_equal(fast.cells, slow.cells)
    assert np.array_equal(fast_trace.freqs, slow_trace.freqs)


def test_python_twin_matches_kernel_position(monkeypatch):
    model = position_model()
    config = SimConfig(rows=12, cols=12, sweeps=3, seed=3)
    fast, _ = simulate(model, config)
    monkeypatch.setattr(pcn.sampler, "_FORCE_PYTHON", True)
    slow, _ = simulate(model, config)
    assert np.array_equal(fast.cells, slow.cells)


def test_python_twin_matches_kernel_masked(monkeypatch):
    model = variable_truth_model()
    init = masked_init(13, 11, seed=5)
    config = SimConfig(rows=13, cols=11, sweeps=3, seed=8,
                       init=InitMode.GRID, init_grid=init, substitute=1)
    fast, _ = simulate(model, config)
    monkeypatch.setattr(pcn.sampler, "_FORCE_PYTHON", True)
    slow, _ = simulate(model, config)
    assert np.array_equal(fast.cells, slow.cells)


def test_masked_cells_frozen():
    model = variable_truth_model()
    init = masked_init(16, 16, seed=11)
    config = SimConfig(rows=16, cols=16, sweeps=4, seed=2,
                       init=InitMode.GRID, init_grid=init)
    out, _ = simulate(model, config)
    assert np.array_equal(out.cells == MASKED, init.cells == MASKED)
    touched = (init.cells != MASKED)
    assert (out.cells[touched] >= 0).all()


def test_masked_cells_resampled_when_unfrozen():
    model = variable_truth_model()
    init = masked_init(16, 16, seed=11)
    config = SimConfig(rows=16, cols=16, sweeps=4, seed=2,
                       init=InitMode.GRID, init_grid=init, freeze_mask=False)
    out, _ = simulate(model, config)
    assert (out.cells >= 0).all()


def test_zero_sweeps_returns_init():
    model = flat_model()
    init = masked_init(10, 10, seed=4)
    out, trace = simulate(model, SimConfig(rows=10, cols=10, sweeps=0, seed=1,
                                           init=InitMode.GRID, init_grid=init))
    assert np.array_equal(out.cells, init.cells)
    assert trace.n_rows == 1
    with pytest.raises(InsufficientTraceError):
        stabilized(trace)


def test_degenerate_law_fills_lattice():
    out, _ = simulate(flat_model(p=1.0), SimConfig(rows=8, cols=8, sweeps=1, seed=0))
    assert (out.cells == 1).all()


def test_trace_rows_and_csv():
    model = flat_model(p=0.4)
    _, trace = simulate(model, SimConfig(rows=20, cols=20, sweeps=10, seed=6, trace_every=3))
    # rows: sweep 0, 3, 6, 9 and the forced final sweep 10
    assert list(trace.sweeps) == [0, 3, 6, 9, 10]
    assert trace.freqs.shape == (5, 9)
    assert np.isnan(trace.max_diff[0])
    assert np.allclose(trace.freqs.sum(axis=1), 1.0)
    csv = trace.to_csv()
    header = csv.splitlines()[0].split(",")
    assert header[0] == "sweep" and header[-1] == "max_diff"
    assert header[1] == "f_0-8" and header[9] == "f_8-0"
    assert len(csv.splitlines()) == 6

    _, silent = simulate(model, SimConfig(rows=20, cols=20, sweeps=5, seed=6, trace_every=0))
    assert silent.n_rows == 1


def test_stabilized_detects_flat_runs():
    # a frozen lattice never changes, so the first recorded diff is zero
    model = flat_model(p=1.0)
    _, trace = simulate(model, SimConfig(rows=12, cols=12, sweeps=4, seed=1))
    assert stabilized(trace) in (1, 2)


def test_incomplete_model_needs_root_fallback():
    alpha = Alphabet(("w", "b"))
    law = PcnDist(probs=(0.5, 0.5))
    keys = [ContextKey(Mode.COUNT, (FrameKey(1, Mode.COUNT, (8 - b, b)),)) for b in range(9)]
    partial = Pcn(alpha, Mode.COUNT, 1, leaves={k: law for k in keys[:5]})
    with pytest.raises(CandidateError):
        simulate(partial, SimConfig(rows=10, cols=10, sweeps=1, seed=0))
    # the same leaves plus a root fallback law are acceptable
    with_root = Pcn(alpha, Mode.COUNT, 1, leaves={k: law for k in keys[:5]},
                    internals={ContextKey.root(Mode.COUNT): law})
    out, _ = simulate(with_root, SimConfig(rows=10, cols=10, sweeps=1, seed=0))
    assert out.cells.shape == (10, 10)


def test_config_validation():
    model = variable_truth_model()
    with pytest.raises(ParseError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=-1, seed=0))
    with pytest.raises(ParseError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=1, seed=-5))
    with pytest.raises(MarginError):
        simulate(model, SimConfig(rows=4, cols=10, sweeps=1, seed=0))
    with pytest.raises(ParseError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=1, seed=0, substitute=2))
    with pytest.raises(ParseError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=1, seed=0, init=InitMode.GRID))
    wrong_shape = masked_init(9, 9, seed=0)
    with pytest.raises(ShapeError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=1, seed=0,
                                  init=InitMode.GRID, init_grid=wrong_shape))
    stray = masked_init(10, 10, seed=0)
    with pytest.raises(ParseError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=1, seed=0, init_grid=stray))
    other_alpha = Grid(np.zeros((10, 10), dtype=np.int8), Alphabet(("x", "y")))
    with pytest.raises(ParseError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=1, seed=0,
                                  init=InitMode.GRID, init_grid=other_alpha))
    all_masked = Grid(np.full((10, 10), MASKED, dtype=np.int8), Alphabet(("w", "b")))
    with pytest.raises(EmptySampleError):
        simulate(model, SimConfig(rows=10, cols=10, sweeps=1, seed=0,
                                  init=InitMode.GRID, init_grid=all_masked))


def test_snapshot_callback():
    model = flat_model(p=0.5)
    init = masked_init(10, 10, seed=9)
    seen = []
    out, _ = simulate(
        model,
        SimConfig(rows=10, cols=10, sweeps=3, seed=5, init=InitMode.GRID, init_grid=init),
        snapshot_cb=lambda sweep, grid: seen.append((sweep, grid.cells.copy())),
    )
    assert [s for s, _ in seen] == [0, 1, 2, 3]
    assert np.array_equal(seen[0][1], init.cells)
    assert np.array_equal(seen[-1][1], out.cells)
