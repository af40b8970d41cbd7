"""Joint learning of ranking scores and the neighbor graph.

The solver alternates two exact steps: scores come from the sparse
symmetric positive-definite system ``(2*lam*L + U) f = U y`` (U carries a
huge weight on query rows, pinning their scores near 1), and the affinity
rows are refit against distances augmented with the squared score
differences. Each step minimizes the same joint objective, so with a
frozen regularizer the objective trace is non-increasing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .affinity import (
    GammaResult,
    SparseAffinity,
    assign_all_neighbors,
    laplacian,
    pairwise_sq_dists,
)
from .dataset import as_data_matrix

__all__ = [
    "QueryVector",
    "RankConfig",
    "RankResult",
    "SolverError",
    "objective_value",
    "query_indicator",
    "ran_solve",
    "rank_order",
    "solve_scores",
]


class SolverError(RuntimeError):
    """Linear solve failed to reach the residual tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def query_indicator(n: int, queries: Iterable[int]) -> np.ndarray:
    """Binary indicator vector with 1 at every query index."""
    queries = list(queries)
    if not queries:
        raise ValueError("need at least one query index")
    y = np.zeros(n)
    for q in queries:
        if not 0 <= q < n:
            raise ValueError(f"query index {q} out of range for n={n}")
        y[q] = 1.0
    return y


def _validate_query(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n,):
        raise ValueError(f"query vector must have length {n}, got shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("query vector entries must be 0 or 1")
    if not np.any(y == 1):
        raise ValueError("query vector must mark at least one query")
    return y


# Kept for type clarity at call sites; a query vector is a plain 0/1 array.
QueryVector = np.ndarray


@dataclass(frozen=True)
class RankConfig:
    """Solver parameters.

    ``query_weight`` stands in for the infinite fidelity weight on query
    rows and must stay large (>= 1e6) for query scores to pin near 1.
    ``gamma_override`` freezes the per-row regularizer at one positive
    value; by default it adapts to the current distances every iteration.
    """

    k: int
    lam: float = 1.0
    query_weight: float = 1e8
    max_iters: int = 50
    tol: float = 1e-6
    gamma_override: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.query_weight < 1e6:
            raise ValueError(
                f"query_weight must be >= 1e6, got {self.query_weight}"
            )
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.gamma_override is not None and self.gamma_override <= 0:
            raise ValueError(
                f"gamma_override must be positive, got {self.gamma_override}"
            )


@dataclass(frozen=True)
class RankResult:
    """Scores plus the learned graph and convergence diagnostics."""

    f: np.ndarray
    S: SparseAffinity
    gamma: GammaResult
    iterations: int
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False

    def to_json_dict(self) -> dict:
        return {
            "scores": [float(v) for v in self.f],
            "iterations": self.iterations,
            "converged": self.converged,
            "objective_trace": [float(v) for v in self.objective_trace],
            "gamma_mean": float(self.gamma.mean),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


def _fidelity_weights(y: np.ndarray, query_weight: float) -> np.ndarray:
    return np.where(y == 1.0, query_weight, 1.0)


def solve_scores(L, y, lam: float, query_weight: float) -> np.ndarray:
    """Solve ``(2*lam*L + U) f = U y`` for the ranking scores.

    The system matrix is symmetric positive definite (L is PSD, U a
    positive diagonal), so a unique solution exists. The result is
    checked against the residual bound ``1e-8 * ||U y||`` with one pass
    of iterative refinement; failure raises :class:`SolverError` carrying
    the achieved residual.
    """
    L = sparse.csr_matrix(L)
    n = L.shape[0]
    y = _validate_query(y, n)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    u = _fidelity_weights(y, query_weight)
    rhs = u * y
    system = (2.0 * lam) * L + sparse.diags(u)
    solver = splu(system.tocsc())
    f = solver.solve(rhs)
    bound = 1e-8 * np.linalg.norm(rhs)
    residual = np.linalg.norm(system @ f - rhs)
    if residual > bound:
        f = f + solver.solve(rhs - system @ f)
        residual = np.linalg.norm(system @ f - rhs)
    if residual > bound:
        raise SolverError(
            f"score solve residual {residual:.3e} above bound {bound:.3e}",
            residual=residual,
        )
    return f


def _objective(dx, S: SparseAffinity, gamma: GammaResult, f, y, lam, query_weight) -> float:
    mat = S.matrix
    fit = float(mat.multiply(dx).sum())
    sq_rows = np.asarray(mat.multiply(mat).sum(axis=1)).ravel()
    regularizer = float(gamma.per_row @ sq_rows)
    smooth = 2.0 * lam * float(f @ (laplacian(S) @ f))
    u = _fidelity_weights(y, query_weight)
    resid = f - y
    fidelity = float(u @ (resid * resid))
    return fit + regularizer + smooth + fidelity


def objective_value(
    data: np.ndarray,
    S: SparseAffinity,
    f: np.ndarray,
    y: np.ndarray,
    cfg: RankConfig,
    gamma: GammaResult,
) -> float:
    """Joint objective: neighbor fit + regularizer + smoothness + fidelity.

    ``sum_ij (||x_i - x_j||^2 s_ij + gamma_i s_ij^2) + 2 lam f'Lf
    + (f - y)' U (f - y)`` with per-row gamma weights.
    """
    data = as_data_matrix(data)
    y = _validate_query(y, data.shape[0])
    f = np.asarray(f, dtype=np.float64)
    return _objective(
        pairwise_sq_dists(data), S, gamma, f, y, cfg.lam, cfg.query_weight
    )


def ran_solve(
    data: np.ndarray,
    y: np.ndarray,
    cfg: RankConfig,
    sq_dists: np.ndarray | None = None,
) -> RankResult:
    """Alternate score solves and neighbor refits until the scores settle.

    Starts from the score-free neighbor assignment, then loops: solve the
    fidelity-weighted Laplacian system for f, refit every affinity row
    against the score-augmented distances, and record the objective.
    Stops when the relative change of f drops below ``cfg.tol`` or after
    ``cfg.max_iters`` iterations. Pass ``sq_dists`` to reuse a
    precomputed feature-distance matrix across repeated solves.
    """
    data = as_data_matrix(data)
    n = data.shape[0]
    y = _validate_query(y, n)
    if not cfg.k <= n - 1:
        raise ValueError(f"k must be <= n-1 = {n - 1}, got {cfg.k}")
    dx = pairwise_sq_dists(data) if sq_dists is None else sq_dists
    gamma_mode = "auto" if cfg.gamma_override is None else cfg.gamma_override

    S, gamma = assign_all_neighbors(data, None, cfg.lam, cfg.k, gamma_mode, sq_dists=dx)
    trace: list[float] = []
    f_prev: np.ndarray | None = None
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        iterations += 1
        f = solve_scores(laplacian(S), y, cfg.lam, cfg.query_weight)
        if not np.isfinite(f).all():
            raise SolverError(
                f"non-finite scores at iteration {iterations}"
            )
        S, gamma = assign_all_neighbors(
            data, f, cfg.lam, cfg.k, gamma_mode, sq_dists=dx
        )
        trace.append(_objective(dx, S, gamma, f, y, cfg.lam, cfg.query_weight))
        if f_prev is not None:
            change = np.linalg.norm(f - f_prev) / max(np.linalg.norm(f_prev), 1e-12)
            if change < cfg.tol:
                converged = True
                f_prev = f
                break
        f_prev = f
    return RankResult(
        f=f_prev,
        S=S,
        gamma=gamma,
        iterations=iterations,
        objective_trace=trace,
        converged=converged,
    )


def rank_order(f: np.ndarray, exclude: Iterable[int] = ()) -> np.ndarray:
    """Indices sorted by score descending, ties broken by ascending index.

    ``exclude`` removes indices (typically the queries) from the result.
    """
    f = np.asarray(f, dtype=np.float64)
    excluded = set(int(i) for i in exclude)
    for i in excluded:
        if not 0 <= i < f.shape[0]:
            raise ValueError(f"exclude index {i} out of range")
    order = np.argsort(-f, kind="stable")
    if not excluded:
        return order
    return order[~np.isin(order, list(excluded))]
