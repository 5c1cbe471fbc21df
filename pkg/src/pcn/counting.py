"""Occurrence counting over neighborhood chains.

A count tree records, for every context chain observed in a grid, how many
valid centers matched it (``n_occ``) and the distribution of the center
symbol over those matches (``center_counts``).  All counting is done at a
single fixed depth ``D``: a site either contributes to the full chain of
its order-1..D prefixes or (when it is not a valid center) to none of
them.  This keeps the hierarchy exactly consistent: an internal node's
``n_occ`` equals the sum over its children whenever the node has children.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import EmptySampleError, MergeError, ModeError, ParseError
from .geometry import ContextKey, FrameKey, Mode, frame_offsets
from .grid import MASKED, Alphabet, BoundaryPolicy, Grid, _center_mask, _resolved

FORMAT_COUNT_TREE = "pcn-count-tree/1"


class CountNode:
    """One observed context chain: occurrences and center-symbol counts."""

    __slots__ = ("key", "n_occ", "center_counts", "children")

    def __init__(self, key: ContextKey, alphabet_size: int):
        self.key = key
        self.n_occ = 0
        self.center_counts = [0] * alphabet_size
        self.children: dict[FrameKey, "CountNode"] = {}

    def sorted_children(self) -> list["CountNode"]:
        return [self.children[fk] for fk in sorted(self.children, key=lambda f: f.payload)]

    def __repr__(self) -> str:
        return f"CountNode({self.key}, n={self.n_occ}, counts={self.center_counts})"


class CountTree:
    """Count tree plus the metadata needed to interpret its keys."""

    def __init__(self, root: CountNode, alphabet: Alphabet, mode: Mode, depth: int):
        self.root = root
        self.alphabet = alphabet
        self.mode = mode
        self.depth = depth

    @property
    def n_total(self) -> int:
        return self.root.n_occ

    def iter_nodes(self):
        """Depth-first walk in canonical child order, root first."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.sorted_children()))

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountTree):
            return False
        if (self.alphabet, self.mode, self.depth) != (other.alphabet, other.mode, other.depth):
            return False
        a = [(str(n.key), n.n_occ, n.center_counts) for n in self.iter_nodes()]
        b = [(str(n.key), n.n_occ, n.center_counts) for n in other.iter_nodes()]
        return a == b


def node_lookup(tree: CountTree, key: ContextKey) -> CountNode | None:
    """Walk the chain of ``key``; None when the chain was never observed."""
    if key.mode is not tree.mode:
        raise ModeError(f"cannot look up a {key.mode.value} key in a {tree.mode.value} tree")
    node = tree.root
    for fk in key.frames:
        node = node.children.get(fk)
        if node is None:
            return None
    return node


def _frame_payloads(
    arr: np.ndarray,
    rr: np.ndarray,
    cc: np.ndarray,
    depth: int,
    mode: Mode,
    alphabet_size: int,
    substitute: int,
) -> list[list[tuple[int, ...]]]:
    """Per order (1..depth), the per-center frame payload tuples."""
    n = rr.shape[0]
    per_order = []
    for j in range(1, depth + 1):
        offs = frame_offsets(j)
        if mode is Mode.COUNT:
            counts = np.zeros((n, alphabet_size), dtype=np.int64)
            sel = np.arange(n)
            for dr, dc in offs:
                vals = arr[rr + dr, cc + dc].astype(np.int64)
                np.putmask(vals, vals == MASKED, substitute)
                counts[sel, vals] += 1
            per_order.append([tuple(row) for row in counts.tolist()])
        else:
            cols = []
            for dr, dc in offs:
                vals = arr[rr + dr, cc + dc].astype(np.int64)
                np.putmask(vals, vals == MASKED, substitute)
                cols.append(vals)
            seq = np.stack(cols, axis=1)
            per_order.append([tuple(row) for row in seq.tolist()])
    return per_order


def _tree_from_chains(
    chains: dict[tuple, list[int]],
    alphabet: Alphabet,
    mode: Mode,
    depth: int,
) -> CountTree:
    """Insert aggregated full-depth chains, accumulating every prefix."""
    root = CountNode(ContextKey.root(mode), alphabet.size)
    for chain, counts in chains.items():
        n = sum(counts)
        node = root
        node.n_occ += n
        for a in range(alphabet.size):
            node.center_counts[a] += counts[a]
        key = root.key
        for order, payload in enumerate(chain, start=1):
            fk = FrameKey(order, mode, payload)
            key = key.child(fk)
            child = node.children.get(fk)
            if child is None:
                child = CountNode(key, alphabet.size)
                node.children[fk] = child
            child.n_occ += n
            for a in range(alphabet.size):
                child.center_counts[a] += counts[a]
            node = child
    return CountTree(root, alphabet, mode, depth)


def build_count_tree(
    grid: Grid,
    depth: int,
    mode: Mode,
    policy: BoundaryPolicy | None = None,
    workers: int = 1,
    substitute: int = 0,
) -> CountTree:
    """Count every valid center's depth-``depth`` chain.

    ``workers`` splits the center list into that many contiguous shards,
    counts each shard separately and folds the partial trees with
    :func:`merge_count_trees`; the result is byte-identical for any worker
    count.  Raises ``EMPTY_SAMPLE`` when no site qualifies as a center.
    """
    if policy is None:
        policy = BoundaryPolicy.interior_only()
    if workers < 1:
        raise ParseError(f"workers must be >= 1, got {workers}")
    if not 0 <= substitute < grid.alphabet.size:
        raise ParseError(f"substitute index {substitute} outside alphabet")
    mask = _center_mask(grid, depth, policy)
    rr, cc = np.nonzero(mask)
    if rr.size == 0:
        raise EmptySampleError(
            f"no valid centers in {grid.rows}x{grid.cols} grid at depth {depth}"
        )
    arr, off_r, off_c = _resolved(grid, depth, policy)
    rr_a = rr + off_r
    cc_a = cc + off_c
    syms = arr[rr_a, cc_a].astype(np.int64).tolist()
    per_order = _frame_payloads(arr, rr_a, cc_a, depth, mode, grid.alphabet.size, substitute)

    n = rr.size
    bounds = [(n * w) // workers for w in range(workers + 1)]
    partials = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        chains: dict[tuple, list[int]] = {}
        size = grid.alphabet.size
        for i in range(lo, hi):
            chain = tuple(per_order[j][i] for j in range(depth))
            counts = chains.get(chain)
            if counts is None:
                counts = [0] * size
                chains[chain] = counts
            counts[syms[i]] += 1
        partials.append(_tree_from_chains(chains, grid.alphabet, mode, depth))
    tree = partials[0]
    for part in partials[1:]:
        tree = merge_count_trees(tree, part)
    return tree


def _merge_nodes(x: CountNode, y: CountNode, alphabet_size: int) -> CountNode:
    out = CountNode(x.key, alphabet_size)
    out.n_occ = x.n_occ + y.n_occ
    out.center_counts = [a + b for a, b in zip(x.center_counts, y.center_counts)]
    keys = sorted(set(x.children) | set(y.children), key=lambda f: f.payload)
    for fk in keys:
        cx, cy = x.children.get(fk), y.children.get(fk)
        if cx is None:
            out.children[fk] = _copy_node(cy, alphabet_size)
        elif cy is None:
            out.children[fk] = _copy_node(cx, alphabet_size)
        else:
            out.children[fk] = _merge_nodes(cx, cy, alphabet_size)
    return out


def _copy_node(node: CountNode, alphabet_size: int) -> CountNode:
    out = CountNode(node.key, alphabet_size)
    out.n_occ = node.n_occ
    out.center_counts = list(node.center_counts)
    for fk in sorted(node.children, key=lambda f: f.payload):
        out.children[fk] = _copy_node(node.children[fk], alphabet_size)
    return out


def merge_count_trees(a: CountTree, b: CountTree) -> CountTree:
    """Pool two count trees cell-wise (commutative and associative)."""
    if a.alphabet != b.alphabet:
        raise MergeError("cannot merge count trees over different alphabets")
    if a.mode is not b.mode:
        raise MergeError(f"cannot merge {a.mode.value} tree with {b.mode.value} tree")
    if a.depth != b.depth:
        raise MergeError(f"cannot merge depth-{a.depth} tree with depth-{b.depth} tree")
    return CountTree(_merge_nodes(a.root, b.root, a.alphabet.size), a.alphabet, a.mode, a.depth)


def count_tree_to_json(tree: CountTree) -> str:
    nodes = [
        {"key": str(n.key), "n_occ": n.n_occ, "center_counts": list(n.center_counts)}
        for n in tree.iter_nodes()
    ]
    doc = {
        "format": FORMAT_COUNT_TREE,
        "alphabet": list(tree.alphabet.symbols),
        "mode": tree.mode.value,
        "depth": tree.depth,
        "n_total": tree.n_total,
        "nodes": nodes,
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def count_tree_from_json(text: str) -> CountTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad count tree JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_COUNT_TREE:
        raise ParseError(f"not a count tree artifact (format={doc.get('format')!r})")
    alphabet = Alphabet(tuple(doc["alphabet"]))
    mode = Mode.parse(doc["mode"])
    depth = int(doc["depth"])
    root = CountNode(ContextKey.root(mode), alphabet.size)
    nodes = {str(root.key): root}
    for rec in doc["nodes"]:
        key = ContextKey.from_string(rec["key"], mode)
        if key.order > depth:
            raise ParseError(f"node {key} deeper than tree depth {depth}")
        if key.is_root:
            node = root
        else:
            parent = nodes.get(str(key.parent()))
            if parent is None:
                raise ParseError(f"node {key} listed before its parent")
            node = CountNode(key, alphabet.size)
            parent.children[key.frames[-1]] = node
            nodes[str(key)] = node
        node.n_occ = int(rec["n_occ"])
        node.center_counts = [int(v) for v in rec["center_counts"]]
        if node.n_occ != sum(node.center_counts) or node.n_occ < 0:
            raise ParseError(f"node {key}: n_occ does not match center counts")
    tree = CountTree(root, alphabet, mode, depth)
    if int(doc["n_total"]) != tree.n_total:
        raise ParseError("n_total does not match root occurrence count")
    return tree
