import numpy as np
import pytest

from pcn import (
    Alphabet,
    Boundary,
    BoundaryPolicy,
    Grid,
    MASKED,
    load_grid,
    mirror_pad,
    save_grid,
    valid_centers,
)
from pcn.errors import (
    EmptyInputError,
    MarginError,
    OutOfBoundsError,
    ParseError,
    ShapeError,
)
from pcn.grid import checkerboard_grid, random_grid

from conftest import reflect_index


def test_alphabet_validation():
    alpha = Alphabet(("w", "b"))
    assert alpha.size == 2
    assert alpha.index("b") == 1
    assert alpha.label(0) == "w"
    with pytest.raises(ParseError):
        Alphabet(("w",))
    with pytest.raises(ParseError):
        Alphabet(("w", "w"))
    with pytest.raises(ParseError):
        Alphabet(("w", "a b"))
    with pytest.raises(ParseError):
        alpha.index("x")
    with pytest.raises(OutOfBoundsError):
        alpha.label(2)
    assert Alphabet.from_spec(" w, b ,c ") == Alphabet(("w", "b", "c"))


def test_grid_validation(binary_alphabet):
    grid = Grid(np.zeros((2, 3), dtype=np.int64), binary_alphabet)
    assert (grid.rows, grid.cols) == (2, 3)
    assert grid.cells.dtype == np.int8
    with pytest.raises(ValueError):
        grid.cells[0, 0] = 1  # read-only
    with pytest.raises(ShapeError):
        Grid(np.zeros((0, 3), dtype=np.int8), binary_alphabet)
    with pytest.raises(ShapeError):
        Grid(np.zeros(4, dtype=np.int8), binary_alphabet)
    with pytest.raises(ParseError):
        Grid(np.zeros((2, 2), dtype=float), binary_alphabet)
    with pytest.raises(OutOfBoundsError):
        Grid(np.full((2, 2), 2, dtype=np.int8), binary_alphabet)
    with pytest.raises(OutOfBoundsError):
        Grid(np.full((2, 2), -2, dtype=np.int8), binary_alphabet)


def test_grid_mask_accounting(binary_alphabet):
    cells = np.array([[0, MASKED], [1, 1]], dtype=np.int8)
    grid = Grid(cells, binary_alphabet)
    assert grid.mask.sum() == 1
    assert grid.n_unmasked == 3


def test_grid_file_roundtrip(tmp_path, binary_alphabet):
    cells = np.array([[0, 1, MASKED], [1, 0, 0]], dtype=np.int8)
    grid = Grid(cells, binary_alphabet)
    path = tmp_path / "g.txt"
    save_grid(grid, path)
    assert load_grid(path, binary_alphabet) == grid
    text = path.read_text()
    assert "NA" in text and "w" in text and "b" in text


def test_load_grid_errors(tmp_path, binary_alphabet):
    p = tmp_path / "bad.txt"
    p.write_text("")
    with pytest.raises(EmptyInputError):
        load_grid(p, binary_alphabet)
    p.write_text("w b\nw\n")
    with pytest.raises(ShapeError):
        load_grid(p, binary_alphabet)
    p.write_text("w q\n")
    with pytest.raises(ParseError):
        load_grid(p, binary_alphabet)
    p.write_text("w b\n")
    with pytest.raises(ParseError):
        load_grid(p, binary_alphabet, mask_token="b")


def test_mirror_pad_frozen(binary_alphabet):
    alpha = Alphabet(tuple(str(i) for i in range(9)))
    grid = Grid(np.arange(9, dtype=np.int8).reshape(3, 3), alpha)
    padded = mirror_pad(grid, 1)
    expected = np.array(
        [
            [4, 3, 4, 5, 4],
            [1, 0, 1, 2, 1],
            [4, 3, 4, 5, 4],
            [7, 6, 7, 8, 7],
            [4, 3, 4, 5, 4],
        ],
        dtype=np.int8,
    )
    assert np.array_equal(padded.cells, expected)


def test_mirror_pad_margin_bounds(binary_alphabet):
    grid = Grid(np.zeros((3, 4), dtype=np.int8), binary_alphabet)
    assert mirror_pad(grid, 0) == grid
    mirror_pad(grid, 2)
    with pytest.raises(MarginError):
        mirror_pad(grid, 3)
    with pytest.raises(MarginError):
        mirror_pad(grid, -1)


def test_mirror_pad_matches_reflection_oracle(binary_alphabet):
    rng = np.random.default_rng(7)
    for _ in range(20):
        rows = int(rng.integers(2, 9))
        cols = int(rng.integers(2, 9))
        margin = int(rng.integers(0, min(rows, cols)))
        cells = rng.integers(0, 2, size=(rows, cols)).astype(np.int8)
        cells[rng.random((rows, cols)) < 0.2] = MASKED
        grid = Grid(cells, binary_alphabet)
        padded = mirror_pad(grid, margin).cells
        for r in range(rows + 2 * margin):
            for c in range(cols + 2 * margin):
                assert padded[r, c] == cells[
                    reflect_index(r, rows, margin), reflect_index(c, cols, margin)
                ]


def test_valid_centers_interior(binary_alphabet):
    cells = np.zeros((5, 6), dtype=np.int8)
    cells[2, 2] = MASKED
    grid = Grid(cells, binary_alphabet)
    centers = valid_centers(grid, 1, BoundaryPolicy.interior_only())
    assert (0, 0) not in centers
    assert (1, 1) in centers
    assert (2, 2) not in centers  # masked
    assert len(centers) == 3 * 4 - 1
    assert valid_centers(grid, 2, BoundaryPolicy.interior_only()) == {(2, 3)}


def test_valid_centers_interior_too_deep(binary_alphabet):
    grid = Grid(np.zeros((4, 4), dtype=np.int8), binary_alphabet)
    assert valid_centers(grid, 2, BoundaryPolicy.interior_only()) == set()


def test_valid_centers_mirror_and_buffer(binary_alphabet):
    cells = np.zeros((4, 4), dtype=np.int8)
    cells[0, 0] = MASKED
    grid = Grid(cells, binary_alphabet)
    centers = valid_centers(grid, 2, BoundaryPolicy.mirror())
    assert len(centers) == 15  # every unmasked site

    outer = Grid(np.zeros((8, 8), dtype=np.int8), binary_alphabet)
    inner = Grid(np.zeros((4, 4), dtype=np.int8), binary_alphabet)
    centers = valid_centers(inner, 2, BoundaryPolicy.buffer(outer))
    assert len(centers) == 16


def test_buffer_geometry_errors(binary_alphabet):
    inner = Grid(np.ones((3, 3), dtype=np.int8), binary_alphabet)
    with pytest.raises(MarginError):
        valid_centers(inner, 1, BoundaryPolicy(Boundary.BUFFER))  # outer missing
    outer = Grid(np.zeros((5, 5), dtype=np.int8), binary_alphabet)
    with pytest.raises(MarginError):
        # outer does not contain the all-ones core
        valid_centers(inner, 1, BoundaryPolicy.buffer(outer))
    cells = np.zeros((5, 5), dtype=np.int8)
    cells[1:4, 1:4] = 1
    outer = Grid(cells, binary_alphabet)
    assert len(valid_centers(inner, 1, BoundaryPolicy.buffer(outer))) == 9
    with pytest.raises(MarginError):
        valid_centers(inner, 2, BoundaryPolicy.buffer(outer))  # margin 1 < depth 2
    with pytest.raises(MarginError):
        valid_centers(inner, 1, BoundaryPolicy.buffer(outer, core_origin=(3, 3)))


def test_random_and_checkerboard_grids(binary_alphabet):
    rng = np.random.default_rng(3)
    g1 = random_grid(6, 7, binary_alphabet, np.random.default_rng(11), probs=(0.25, 0.75))
    g2 = random_grid(6, 7, binary_alphabet, np.random.default_rng(11), probs=(0.25, 0.75))
    assert g1 == g2
    assert set(np.unique(g1.cells)) <= {0, 1}

    board = checkerboard_grid(4, 4, binary_alphabet)
    assert board.cells[0, 0] == 0 and board.cells[0, 1] == 1
    noisy = checkerboard_grid(8, 8, binary_alphabet, flip_prob=0.3, rng=rng)
    assert noisy.cells.shape == (8, 8)
    with pytest.raises(ParseError):
        checkerboard_grid(4, 4, binary_alphabet, flip_prob=0.5)
