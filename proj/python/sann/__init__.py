"""Data-dependent spherical LSH index for approximate near neighbor search."""

try:
    from sann._sann import *  # noqa: F401,F403  (installed package layout)
    from sann._sann import Index  # noqa: F401
except ImportError:  # pragma: no cover - in-tree test layout
    from _sann import *  # noqa: F401,F403
    from _sann import Index  # noqa: F401

__all__ = [
    "Index",
    "predicted_log_inv_collision",
    "gaussian_tail_bounds",
    "project_between_spheres",
    "default_T",
    "default_num_trees",
    "jl_default_target",
    "estimate_pair_collision",
    "estimate_conditional_collision",
    "estimate_grid_collision",
    "smallest_enclosing_ball",
    "jl_reduce",
    "hamming_embed",
    "vdc_best_center",
    "find_dense_ball",
    "gen_random_instance",
]
