"""Variable-order context-neighborhood models on 2D lattices.

Fit frame-structured context trees by penalized pseudo-likelihood, sample
from fitted or hand-specified models by single-site Monte Carlo updates,
and attach bootstrap confidence intervals to the estimated conditional
laws.
"""

from .bootstrap import BootConfig, CiTable, bootstrap_ci, quantile_median_unbiased
from .counting import (
    CountNode,
    CountTree,
    build_count_tree,
    count_tree_from_json,
    count_tree_to_json,
    merge_count_trees,
    node_lookup,
)
from .errors import PcnError
from .geometry import (
    ContextKey,
    FrameKey,
    Mode,
    extract_context,
    frame_offsets,
    is_suffix,
    max_leaves,
    neighborhood_size,
    num_classes,
)
from .grid import (
    MASKED,
    Alphabet,
    Boundary,
    BoundaryPolicy,
    Grid,
    load_grid,
    mirror_pad,
    save_grid,
    valid_centers,
)
from .model import Pcn, PcnDist
from .sampler import ConvergenceTrace, InitMode, ScanOrder, SimConfig, UpdateRule, simulate, stabilized
from .selection import (
    FitConfig,
    OracleResult,
    PicReport,
    ScoredNode,
    compute_scores,
    default_depth,
    exhaustive_pic_oracle,
    fit,
    leaf_score,
    log_mpl,
    pic,
    prune,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "BootConfig",
    "Boundary",
    "BoundaryPolicy",
    "CiTable",
    "ContextKey",
    "ConvergenceTrace",
    "CountNode",
    "CountTree",
    "FitConfig",
    "FrameKey",
    "Grid",
    "InitMode",
    "MASKED",
    "Mode",
    "OracleResult",
    "Pcn",
    "PcnDist",
    "PcnError",
    "PicReport",
    "ScanOrder",
    "ScoredNode",
    "SimConfig",
    "UpdateRule",
    "bootstrap_ci",
    "build_count_tree",
    "compute_scores",
    "count_tree_from_json",
    "count_tree_to_json",
    "default_depth",
    "exhaustive_pic_oracle",
    "extract_context",
    "fit",
    "frame_offsets",
    "is_suffix",
    "leaf_score",
    "load_grid",
    "log_mpl",
    "max_leaves",
    "merge_count_trees",
    "mirror_pad",
    "neighborhood_size",
    "node_lookup",
    "num_classes",
    "pic",
    "prune",
    "quantile_median_unbiased",
    "save_grid",
    "simulate",
    "stabilized",
    "valid_centers",
]
