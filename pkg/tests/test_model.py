import numpy as np
import pytest

from pcn import (
    Alphabet,
    ContextKey,
    FitConfig,
    FrameKey,
    Mode,
    Pcn,
    PcnDist,
    fit,
)
from pcn.errors import CandidateError, ModeError, ParseError
from pcn.grid import random_grid

from conftest import full_truth_model, variable_truth_model


def key1(payload):
    return ContextKey(Mode.COUNT, (FrameKey(1, Mode.COUNT, payload),))


def all_first_order_keys():
    return [key1((8 - b, b)) for b in range(9)]


def flat_model(alphabet, p=0.5):
    return Pcn(
        alphabet=alphabet,
        mode=Mode.COUNT,
        depth=0,
        leaves={ContextKey.root(Mode.COUNT): PcnDist(probs=(1 - p, p))},
    )


def test_validation_rejects_bad_models(binary_alphabet):
    root = ContextKey.root(Mode.COUNT)
    good = PcnDist(probs=(0.4, 0.6))
    with pytest.raises(CandidateError):
        Pcn(binary_alphabet, Mode.COUNT, 0, leaves={})
    with pytest.raises(ParseError):
        Pcn(binary_alphabet, Mode.COUNT, 0, leaves={root: PcnDist(probs=(0.4, 0.7))})
    with pytest.raises(ParseError):
        Pcn(binary_alphabet, Mode.COUNT, 0, leaves={root: PcnDist(probs=(1.0,))})
    with pytest.raises(ParseError):
        # leaf deeper than the declared depth
        Pcn(binary_alphabet, Mode.COUNT, 0, leaves={key1((8, 0)): good})
    with pytest.raises(ModeError):
        Pcn(
            binary_alphabet,
            Mode.POSITION,
            1,
            leaves={key1((8, 0)): good},
        )
    with pytest.raises(CandidateError):
        # root is both a leaf and an internal fallback
        Pcn(binary_alphabet, Mode.COUNT, 1, leaves={root: good}, internals={root: good})
    with pytest.raises(CandidateError):
        # leaf set is not suffix-free: root covers the order-1 key
        Pcn(binary_alphabet, Mode.COUNT, 1, leaves={root: good, key1((8, 0)): good})
    with pytest.raises(CandidateError):
        # internal node below a leaf
        Pcn(
            binary_alphabet,
            Mode.COUNT,
            1,
            leaves={root: good},
            internals={key1((8, 0)): good},
        )


def test_lookup_fallback_order(binary_alphabet):
    root = ContextKey.root(Mode.COUNT)
    deep = ContextKey(
        Mode.COUNT,
        (FrameKey(1, Mode.COUNT, (8, 0)), FrameKey(2, Mode.COUNT, (16, 0))),
    )
    model = Pcn(
        binary_alphabet,
        Mode.COUNT,
        2,
        leaves={deep: PcnDist(probs=(0.9, 0.1))},
        internals={
            root: PcnDist(probs=(0.5, 0.5)),
            key1((8, 0)): PcnDist(probs=(0.7, 0.3)),
        },
    )
    found, dist = model.lookup(deep)
    assert found == deep and dist.probs == (0.9, 0.1)
    # sibling second-order context falls back to the stored order-1 ancestor
    sibling = ContextKey(
        Mode.COUNT,
        (FrameKey(1, Mode.COUNT, (8, 0)), FrameKey(2, Mode.COUNT, (15, 1))),
    )
    found, dist = model.lookup(sibling)
    assert found == key1((8, 0)) and dist.probs == (0.7, 0.3)
    # unrelated context falls back to the root
    found, dist = model.lookup(key1((0, 8)))
    assert found == root and dist.probs == (0.5, 0.5)
    with pytest.raises(ModeError):
        model.lookup(ContextKey.root(Mode.POSITION))
    bare = Pcn(binary_alphabet, Mode.COUNT, 1,
               leaves={key1((8 - b, b)): PcnDist(probs=(0.5, 0.5)) for b in range(9)})
    with pytest.raises(CandidateError):
        bare.lookup(ContextKey.root(Mode.COUNT))


def test_completeness_predicates(binary_alphabet):
    law = PcnDist(probs=(0.5, 0.5))
    full = Pcn(binary_alphabet, Mode.COUNT, 1,
               leaves={k: law for k in all_first_order_keys()})
    assert full.is_complete()
    assert not full.has_root_fallback()
    partial = Pcn(binary_alphabet, Mode.COUNT, 1,
                  leaves={k: law for k in all_first_order_keys()[:-1]})
    assert not partial.is_complete()
    assert flat_model(binary_alphabet).is_complete()
    assert flat_model(binary_alphabet).has_root_fallback()


def test_json_roundtrip_fitted(binary_alphabet):
    rng = np.random.default_rng(21)
    grid = random_grid(25, 25, binary_alphabet, rng)
    model, _ = fit(grid, FitConfig(depth=2))
    clone = Pcn.from_json(model.to_json())
    assert clone == model
    assert clone.to_json() == model.to_json()
    # counts metadata survives the trip
    some_leaf = model.leaf_keys()[0]
    assert clone.leaves[some_leaf].n_occ == model.leaves[some_leaf].n_occ
    assert clone.leaves[some_leaf].counts == model.leaves[some_leaf].counts


def test_json_roundtrip_hand_specified():
    alpha = Alphabet(("w", "b"))
    model = flat_model(alpha, p=0.3)
    clone = Pcn.from_json(model.to_json())
    assert clone == model
    assert clone.leaves[ContextKey.root(Mode.COUNT)].n_occ is None


def test_from_json_rejects_garbage():
    with pytest.raises(ParseError):
        Pcn.from_json("not json")
    with pytest.raises(ParseError):
        Pcn.from_json('{"format": "something-else/1"}')


def test_to_dot(binary_alphabet):
    model = variable_truth_model()
    dot = model.to_dot()
    assert dot.startswith("digraph pcn {")
    assert dot.rstrip().endswith("}")
    assert "peripheries=2" in dot
    # every stored node appears exactly once as a declaration
    n_nodes = len(model.all_keys())
    assert dot.count("[label=") == n_nodes

    # models with a stored root hang their leaves off it
    law = PcnDist(probs=(0.5, 0.5))
    rooted = Pcn(
        binary_alphabet,
        Mode.COUNT,
        1,
        leaves={k: law for k in all_first_order_keys()},
        internals={ContextKey.root(Mode.COUNT): law},
    )
    fdot = rooted.to_dot()
    assert '"root" [label="root' in fdot
    assert '"root" -> "j1:' in fdot
    assert fdot.count('"root" -> ') == 9


def test_truth_model_shapes():
    model = variable_truth_model()
    leaves = model.leaf_keys()
    assert sum(1 for k in leaves if k.order == 1) == 6
    assert sum(1 for k in leaves if k.order == 2) == 51
    assert model.is_complete()
    full = full_truth_model()
    full_leaves = full.leaf_keys()
    assert len(full_leaves) == 153
    assert all(k.order == 2 for k in full_leaves)
    assert full.is_complete()
