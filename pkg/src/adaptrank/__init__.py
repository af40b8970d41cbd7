"""Ranking with adaptive neighbors: learn the graph and the scores together."""

from .affinity import (
    GammaResult,
    SparseAffinity,
    assign_all_neighbors,
    assign_neighbors_row,
    compute_gamma,
    laplacian,
    pairwise_sq_dists,
    row_gamma,
)
from .baselines import KernelGraphConfig, euclidean_rank, load_score_file, manifold_rank
from .dataset import (
    CsvParseError,
    LabeledDataset,
    NormalizeResult,
    as_data_matrix,
    gen_three_rings,
    gen_two_moons,
    load_csv,
    normalize,
    save_csv,
    subset_per_class,
)
from .evaluation import (
    EvalError,
    EvalReport,
    evaluate_method,
    precision_recall_at_k,
    sweep_k,
)
from .ranking import (
    RankConfig,
    RankResult,
    SolverError,
    objective_value,
    query_indicator,
    ran_solve,
    rank_order,
    solve_scores,
)

__version__ = "0.1.0"

__all__ = [
    "CsvParseError",
    "EvalError",
    "EvalReport",
    "GammaResult",
    "KernelGraphConfig",
    "LabeledDataset",
    "NormalizeResult",
    "RankConfig",
    "RankResult",
    "SolverError",
    "SparseAffinity",
    "as_data_matrix",
    "assign_all_neighbors",
    "assign_neighbors_row",
    "compute_gamma",
    "euclidean_rank",
    "evaluate_method",
    "gen_three_rings",
    "gen_two_moons",
    "laplacian",
    "load_csv",
    "load_score_file",
    "manifold_rank",
    "normalize",
    "objective_value",
    "pairwise_sq_dists",
    "precision_recall_at_k",
    "query_indicator",
    "ran_solve",
    "rank_order",
    "row_gamma",
    "save_csv",
    "solve_scores",
    "subset_per_class",
    "sweep_k",
]
