"""Model selection: penalized pseudo-likelihood scoring and tree pruning.

Each count-tree node gets a local ``keep_score``: its maximized log
pseudo-likelihood contribution minus a per-leaf complexity charge of
``(|A| - 1)/2 * log(n)``.  A bottom-up dynamic program then decides, node
by node, whether keeping the node as a leaf beats the best split into its
observed children (``split = 0`` keeps the leaf, ties included;
``split = 1`` expands).  Reading the decisions top-down yields the optimal
leaf set, and the root's accumulated value equals minus the penalized
criterion of that leaf set exactly, so the dynamic program is a true
argmin over all feasible subtrees.  ``exhaustive_pic_oracle`` re-derives
the same argmin by brute-force enumeration through an independent
arithmetic route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .counting import CountNode, CountTree, build_count_tree
from .errors import CandidateError, ModeError, TooLargeError
from .geometry import ContextKey, Mode
from .grid import BoundaryPolicy, Grid
from .model import Pcn, PcnDist


@dataclass(frozen=True)
class ScoredNode:
    """Per-node output of the dynamic program."""

    key: ContextKey
    n_occ: int
    keep_score: float
    best: float
    split: int


@dataclass(frozen=True)
class PicReport:
    """Penalized criterion of one leaf set: pic = -log_mpl + penalty."""

    pic: float
    log_mpl: float
    penalty: float
    leaf_count: int
    penalty_count: int


@dataclass
class FitConfig:
    depth: int | None = None
    mode: Mode = Mode.COUNT
    policy: BoundaryPolicy | None = None
    substitute: int = 0
    workers: int = 1
    penalty: str = "centers"  # "centers": evaluated sites; "sites": rows*cols

    def resolve_policy(self) -> BoundaryPolicy:
        return self.policy if self.policy is not None else BoundaryPolicy.interior_only()


def default_depth(n: int) -> int:
    """Default fit depth ``max(1, floor((ln n)^(1/4)))`` from the sample size."""
    if n < 1:
        return 1
    return max(1, int(math.floor(math.log(n) ** 0.25)))


def leaf_score(node: CountNode, penalty_count: int, alphabet_size: int) -> float:
    """Penalized score of keeping one node as a leaf; 0 when unobserved.

    Equals ``sum_a count_a * log(count_a / n_occ)`` minus the per-leaf
    charge ``(|A| - 1)/2 * log(penalty_count)``.
    """
    if node.n_occ == 0:
        return 0.0
    total = -0.5 * (alphabet_size - 1) * math.log(penalty_count)
    for c in node.center_counts:
        if c > 0:
            total += c * math.log(c / node.n_occ)
    return total


def _validate_candidate(tree: CountTree, keys: list[ContextKey]) -> list[CountNode]:
    """Check the keys form a partition of observed contexts; return their nodes."""
    from .counting import node_lookup

    if not keys:
        raise CandidateError("candidate leaf set is empty")
    nodes = []
    for key in keys:
        if key.mode is not tree.mode:
            raise ModeError(f"candidate key {key} does not match tree mode {tree.mode.value}")
        node = node_lookup(tree, key)
        if node is None or node.n_occ == 0:
            raise CandidateError(f"candidate leaf {key} was never observed")
        nodes.append(node)
    chains = {key.frames for key in keys}
    if len(chains) != len(keys):
        raise CandidateError("candidate leaf set contains duplicate keys")
    for key in keys:
        for cut in range(len(key.frames)):
            if key.frames[:cut] in chains:
                shorter = ContextKey(tree.mode, key.frames[:cut])
                raise CandidateError(f"candidate leaf {shorter} is a suffix of candidate leaf {key}")

    def check_cover(node: CountNode) -> None:
        if node.key.frames in chains:
            return
        if not node.children or node.key.order >= tree.depth:
            raise CandidateError(f"observed context {node.key} is not covered by any candidate leaf")
        for child in node.sorted_children():
            check_cover(child)

    check_cover(tree.root)
    return nodes


def log_mpl(tree: CountTree, candidate) -> float:
    """Log maximized pseudo-likelihood of a candidate leaf set."""
    keys = sorted(candidate, key=ContextKey.sort_key)
    nodes = _validate_candidate(tree, keys)
    total = 0.0
    for node in nodes:
        for c in node.center_counts:
            if c > 0:
                total += c * math.log(c / node.n_occ)
    return total


def pic(tree: CountTree, candidate, penalty_count: int | None = None) -> PicReport:
    """Penalized criterion of a candidate leaf set (natural log)."""
    if penalty_count is None:
        penalty_count = tree.n_total
    keys = sorted(candidate, key=ContextKey.sort_key)
    mpl = log_mpl(tree, keys)
    penalty = 0.5 * (tree.alphabet.size - 1) * len(keys) * math.log(penalty_count)
    return PicReport(
        pic=-mpl + penalty,
        log_mpl=mpl,
        penalty=penalty,
        leaf_count=len(keys),
        penalty_count=penalty_count,
    )


def compute_scores(tree: CountTree, penalty_count: int | None = None) -> dict[ContextKey, ScoredNode]:
    """Run the bottom-up dynamic program over every observed node.

    ``best`` is the best achievable score for the node's subtree; ``split``
    is 1 when expanding strictly beats keeping the node as a leaf.
    """
    if penalty_count is None:
        penalty_count = tree.n_total
    a = tree.alphabet.size
    scores: dict[ContextKey, ScoredNode] = {}

    def visit(node: CountNode) -> ScoredNode:
        p = leaf_score(node, penalty_count, a)
        if node.key.order >= tree.depth or not node.children:
            sn = ScoredNode(node.key, node.n_occ, p, p, 0)
        else:
            split_total = sum(visit(child).best for child in node.sorted_children())
            if p >= split_total:
                sn = ScoredNode(node.key, node.n_occ, p, p, 0)
            else:
                sn = ScoredNode(node.key, node.n_occ, p, split_total, 1)
        scores[node.key] = sn
        return sn

    visit(tree.root)
    return scores


def prune(
    tree: CountTree,
    scores: dict[ContextKey, ScoredNode] | None = None,
    penalty_count: int | None = None,
) -> Pcn:
    """Read the dynamic program top-down into a fitted model.

    Descends only through nodes with ``split == 1``; every stop is a leaf
    with the empirical conditional law ``count_a / n_occ``.  Ancestor
    nodes keep their empirical laws too, as fallbacks for contexts never
    observed in the training grid.
    """
    if scores is None:
        scores = compute_scores(tree, penalty_count)
    leaves: dict[ContextKey, PcnDist] = {}
    internals: dict[ContextKey, PcnDist] = {}

    def emit(node: CountNode) -> PcnDist:
        probs = tuple(c / node.n_occ for c in node.center_counts)
        return PcnDist(probs=probs, n_occ=node.n_occ, counts=tuple(node.center_counts))

    def descend(node: CountNode) -> None:
        if scores[node.key].split == 0:
            leaves[node.key] = emit(node)
        else:
            internals[node.key] = emit(node)
            for child in node.sorted_children():
                descend(child)

    descend(tree.root)
    depth = max((k.order for k in leaves), default=0)
    return Pcn(alphabet=tree.alphabet, mode=tree.mode, depth=depth, leaves=leaves, internals=internals)


def fit(grid: Grid, config: FitConfig | None = None) -> tuple[Pcn, PicReport]:
    """Count, score and prune in one call.

    When ``config.depth`` is None the depth defaults to
    ``default_depth(#unmasked sites)``.
    """
    if config is None:
        config = FitConfig()
    depth = config.depth if config.depth is not None else default_depth(grid.n_unmasked)
    tree = build_count_tree(
        grid,
        depth,
        config.mode,
        policy=config.resolve_policy(),
        workers=config.workers,
        substitute=config.substitute,
    )
    penalty_count = tree.n_total if config.penalty == "centers" else grid.rows * grid.cols
    scores = compute_scores(tree, penalty_count)
    model = prune(tree, scores, penalty_count)
    report = pic(tree, model.leaf_keys(), penalty_count)
    return model, report


@dataclass
class OracleResult:
    """Brute-force argmin over every feasible leaf set."""

    leaf_keys: tuple[ContextKey, ...]
    report: PicReport
    n_candidates: int
    runner_up_pic: float | None = None
    _scores: dict = field(default_factory=dict, repr=False)


def _count_candidates(node: CountNode, depth: int) -> int:
    total = 1
    if node.children and node.key.order < depth:
        prod = 1
        for child in node.sorted_children():
            prod *= _count_candidates(child, depth)
        total += prod
    return total


def _enumerate_leaf_sets(node: CountNode, depth: int):
    """Yield every feasible leaf set of the subtree, leaf option first."""
    yield (node.key,)
    if node.children and node.key.order < depth:
        children = node.sorted_children()

        def rec(i: int):
            if i == len(children):
                yield ()
                return
            for head in _enumerate_leaf_sets(children[i], depth):
                for tail in rec(i + 1):
                    yield head + tail

        yield from rec(0)


def exhaustive_pic_oracle(
    tree: CountTree,
    penalty_count: int | None = None,
    bound: int = 10**7,
) -> OracleResult:
    """Score every feasible leaf set through :func:`pic` and return the argmin.

    Ties keep the first candidate in enumeration order (shallower trees
    first).  ``runner_up_pic`` is the best score among the other
    candidates, so ``runner_up_pic - report.pic`` is the optimality gap.
    Raises ``TOO_LARGE`` when the candidate count exceeds ``bound``.
    """
    n_candidates = _count_candidates(tree.root, tree.depth)
    if n_candidates > bound:
        raise TooLargeError(
            f"{n_candidates} candidate leaf sets exceed the bound {bound}"
        )
    best_keys = None
    best: PicReport | None = None
    runner_up = None
    for cand in _enumerate_leaf_sets(tree.root, tree.depth):
        report = pic(tree, cand, penalty_count)
        if best is None or report.pic < best.pic:
            if best is not None:
                runner_up = best.pic if runner_up is None else min(runner_up, best.pic)
            best, best_keys = report, cand
        else:
            runner_up = report.pic if runner_up is None else min(runner_up, report.pic)
    keys = tuple(sorted(best_keys, key=ContextKey.sort_key))
    return OracleResult(leaf_keys=keys, report=best, n_candidates=n_candidates, runner_up_pic=runner_up)
