"""Reference ranking methods: raw Euclidean distance and fixed-graph diffusion.

Both are deterministic pure functions used as comparison points for the
adaptive solver. The diffusion baseline builds a Gaussian-kernel graph
once (bandwidth fixed or from the median pairwise distance), normalizes
it symmetrically, and solves the damped linear system in closed form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .affinity import pairwise_sq_dists
from .dataset import as_data_matrix
from .ranking import SolverError, _validate_query

__all__ = [
    "KernelGraphConfig",
    "euclidean_rank",
    "load_score_file",
    "manifold_rank",
    "median_pairwise_distance",
]


@dataclass(frozen=True)
class KernelGraphConfig:
    """Fixed-graph baseline parameters.

    ``sigma=None`` selects the median pairwise distance heuristic.
    ``k_sparsify`` optionally restricts the kernel graph to k nearest
    neighbors (then symmetrized by elementwise max); off by default.
    """

    sigma: float | None = None
    k_sparsify: int | None = None
    alpha: float = 0.99

    def __post_init__(self):
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.k_sparsify is not None and self.k_sparsify < 1:
            raise ValueError(f"k_sparsify must be >= 1, got {self.k_sparsify}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


def euclidean_rank(data: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Negated Euclidean distance to the nearest query (higher = closer)."""
    data = as_data_matrix(data)
    y = _validate_query(y, data.shape[0])
    queries = np.flatnonzero(y == 1)
    sq = pairwise_sq_dists(data)[:, queries]
    return -np.sqrt(sq.min(axis=1))


def median_pairwise_distance(data: np.ndarray) -> float:
    """Median of all pairwise Euclidean distances (i < j pairs)."""
    data = as_data_matrix(data)
    sq = pairwise_sq_dists(data)
    upper = np.sqrt(sq[np.triu_indices(sq.shape[0], k=1)])
    return float(np.median(upper))


def manifold_rank(
    data: np.ndarray, y: np.ndarray, cfg: KernelGraphConfig = KernelGraphConfig()
) -> np.ndarray:
    """Diffusion scores on a fixed Gaussian-kernel graph.

    Builds ``w_ij = exp(-||x_i - x_j||^2 / (2 sigma^2))`` with zero
    diagonal, optionally k-NN sparsified and max-symmetrized, normalizes
    by degree on both sides, and solves ``(I - alpha * W_norm) f = y``.
    Isolated vertices (zero degree after kernel underflow) keep a zero
    normalized row. Scores are nonnegative and solved to a relative
    residual of 1e-8.
    """
    data = as_data_matrix(data)
    n = data.shape[0]
    y = _validate_query(y, n)
    sigma = cfg.sigma if cfg.sigma is not None else median_pairwise_distance(data)
    sq = pairwise_sq_dists(data)
    weights = np.exp(-sq / (2.0 * sigma * sigma))
    np.fill_diagonal(weights, 0.0)

    if cfg.k_sparsify is not None:
        keep = min(cfg.k_sparsify, n - 1)
        nearest = np.argsort(sq + np.diag(np.full(n, np.inf)), axis=1, kind="stable")
        sparsified = np.zeros_like(weights)
        rows = np.repeat(np.arange(n), keep)
        cols = nearest[:, :keep].ravel()
        sparsified[rows, cols] = weights[rows, cols]
        weights = np.maximum(sparsified, sparsified.T)

    degrees = weights.sum(axis=1)
    inv_sqrt = np.zeros(n)
    positive = degrees > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(degrees[positive])
    normalized = inv_sqrt[:, None] * weights * inv_sqrt[None, :]

    system = np.eye(n) - cfg.alpha * normalized
    f = np.linalg.solve(system, y)
    residual = np.linalg.norm(system @ f - y)
    bound = 1e-8 * np.linalg.norm(y)
    if residual > bound:
        raise SolverError(
            f"diffusion solve residual {residual:.3e} above bound {bound:.3e}",
            residual=residual,
        )
    return f


def load_score_file(path, n: int | None = None) -> np.ndarray:
    """Read an ``index,score`` CSV of externally computed ranking scores.

    Every index must appear exactly once; ``n`` (when given) fixes the
    expected length.
    """
    path = Path(path)
    entries: dict[int, float] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        for r, record in enumerate(csv.reader(handle), start=1):
            if not record:
                continue
            if len(record) != 2:
                raise ValueError(f"{path}: row {r}: expected 'index,score'")
            try:
                idx, score = int(record[0]), float(record[1])
            except ValueError:
                raise ValueError(f"{path}: row {r}: non-numeric entry") from None
            if idx in entries:
                raise ValueError(f"{path}: duplicate index {idx}")
            entries[idx] = score
    if not entries:
        raise ValueError(f"{path}: empty score file")
    size = n if n is not None else max(entries) + 1
    if sorted(entries) != list(range(size)):
        raise ValueError(f"{path}: indices must cover 0..{size - 1} exactly")
    return np.array([entries[i] for i in range(size)])
