"""Learned sparse affinity rows and the graph Laplacian built from them.

Each data point receives a probability distribution over candidate
neighbors by minimizing ``sum_j(d_ij * s_ij + gamma_i * s_ij^2)`` on the
probability simplex. The minimizer is the Euclidean projection of
``-d_i / (2 * gamma_i)`` onto the simplex; choosing ``gamma_i`` from the
gap between the k-th and (k+1)-th smallest distances makes that
projection land on exactly the k nearest candidates, which is what keeps
the graph sparse without a bandwidth parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .dataset import as_data_matrix

__all__ = [
    "GammaResult",
    "SparseAffinity",
    "assign_all_neighbors",
    "assign_neighbors_row",
    "compute_gamma",
    "laplacian",
    "pairwise_sq_dists",
    "row_gamma",
]


@dataclass(frozen=True)
class GammaResult:
    """Per-row regularization strengths and their arithmetic mean."""

    per_row: np.ndarray
    mean: float

    def __post_init__(self):
        per_row = np.asarray(self.per_row, dtype=np.float64)
        if per_row.ndim != 1:
            raise ValueError("per_row must be 1-D")
        if np.any(per_row < 0) or not np.isfinite(per_row).all():
            raise ValueError("per-row gamma values must be finite and >= 0")
        object.__setattr__(self, "per_row", per_row)
        object.__setattr__(self, "mean", float(self.mean))

    @classmethod
    def from_rows(cls, per_row: np.ndarray) -> "GammaResult":
        per_row = np.asarray(per_row, dtype=np.float64)
        return cls(per_row, float(per_row.mean()))

    @classmethod
    def constant(cls, value: float, n: int) -> "GammaResult":
        return cls(np.full(n, float(value)), float(value))


@dataclass(frozen=True)
class SparseAffinity:
    """Row-sparse learned similarity matrix.

    Every row lies on the probability simplex with at most ``k`` nonzero
    entries and a zero diagonal (no self-neighbor).
    """

    matrix: sparse.csr_matrix
    k: int

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def validate(self, tol: float = 1e-10) -> None:
        """Check simplex, sparsity, and zero-diagonal invariants."""
        mat = self.matrix
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"matrix must be square, got {mat.shape}")
        row_sums = np.asarray(mat.sum(axis=1)).ravel()
        if np.max(np.abs(row_sums - 1.0)) > tol:
            raise ValueError("affinity rows must sum to 1")
        if mat.data.size and (mat.data.min() < 0 or mat.data.max() > 1 + tol):
            raise ValueError("affinity weights must lie in [0, 1]")
        per_row_nnz = np.diff(mat.indptr)
        if per_row_nnz.max(initial=0) > self.k:
            raise ValueError(f"rows must have at most k={self.k} nonzeros")
        if np.any(mat.diagonal() != 0):
            raise ValueError("affinity diagonal must be zero")

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def save_coo_csv(self, path) -> None:
        """Write the nonzero entries as ``i,j,weight`` triplets."""
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8") as handle:
            for i, j, w in zip(coo.row, coo.col, coo.data):
                handle.write(f"{i},{j},{repr(float(w))}\n")


def pairwise_sq_dists(data: np.ndarray) -> np.ndarray:
    """Symmetric matrix of squared Euclidean distances with zero diagonal."""
    data = as_data_matrix(data)
    sq_norms = np.einsum("ij,ij->i", data, data)
    dists = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (data @ data.T)
    np.maximum(dists, 0.0, out=dists)
    dists = 0.5 * (dists + dists.T)
    np.fill_diagonal(dists, 0.0)
    return dists


def _candidate_view(dists: np.ndarray, self_index: int | None):
    """Candidate distances with the self entry removed, plus their indices."""
    dists = np.asarray(dists, dtype=np.float64)
    if dists.ndim != 1:
        raise ValueError("distance vector must be 1-D")
    if not np.isfinite(dists).all() or np.any(dists < 0):
        raise ValueError("distances must be finite and >= 0")
    indices = np.arange(dists.shape[0])
    if self_index is not None:
        if not 0 <= self_index < dists.shape[0]:
            raise ValueError(f"self_index {self_index} out of range")
        keep = indices != self_index
        return dists[keep], indices[keep]
    return dists, indices


def row_gamma(dists, k: int, self_index: int | None = None) -> float:
    """Regularizer for one row: half the gap ``k*d_(k+1) - sum of k smallest``.

    When k equals the candidate count the (k+1)-th distance is taken equal
    to the k-th (the continuous limit of the usual rule). Tied distances
    can legitimately produce 0.
    """
    cand, _ = _candidate_view(dists, self_index)
    m = cand.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    sorted_d = np.sort(cand, kind="stable")
    d_next = sorted_d[k] if k < m else sorted_d[k - 1]
    return float(0.5 * (k * d_next - sorted_d[:k].sum()))


def _project_simplex(values: np.ndarray) -> np.ndarray:
    """Euclidean projection of one vector onto the probability simplex."""
    srt = np.sort(values)[::-1]
    csum = np.cumsum(srt) - 1.0
    positions = np.arange(1, values.shape[0] + 1)
    support = np.nonzero(srt - csum / positions > 0)[0][-1] + 1
    threshold = csum[support - 1] / support
    return np.maximum(values - threshold, 0.0)


def assign_neighbors_row(
    dists,
    k: int,
    gamma: float | str = "auto",
    self_index: int | None = None,
) -> np.ndarray:
    """Solve one row's neighbor-assignment subproblem in closed form.

    Candidates are the entries of ``dists`` excluding ``self_index``,
    sorted ascending with ties broken by original index. With
    ``gamma="auto"`` the adaptive choice from :func:`row_gamma` is used
    and the result puts positive weight on exactly the k nearest
    candidates (strictly fewer only on boundary ties); a tied gamma of 0
    falls back to uniform 1/k weights on the first k. A numeric gamma
    solves the same subproblem restricted to the k nearest candidates
    exactly (simplex projection).

    Returns a dense weight vector aligned with ``dists``; the self entry,
    if any, is 0.
    """
    cand, cand_idx = _candidate_view(dists, self_index)
    m = cand.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    order = np.argsort(cand, kind="stable")
    top = cand[order[:k]]

    if gamma == "auto":
        d_next = cand[order[k]] if k < m else top[-1]
        gamma_val = 0.5 * (k * d_next - top.sum())
        if gamma_val <= 0.0:
            weights = np.full(k, 1.0 / k)
        else:
            shift = 1.0 / k + top.sum() / (2.0 * k * gamma_val)
            weights = np.maximum(shift - top / (2.0 * gamma_val), 0.0)
    else:
        gamma_val = float(gamma)
        if gamma_val <= 0:
            raise ValueError(f"gamma must be positive, got {gamma_val}")
        weights = _project_simplex(-top / (2.0 * gamma_val))

    row = np.zeros(np.asarray(dists).shape[0])
    row[cand_idx[order[:k]]] = weights
    return row


def _row_distances(data, scores, lam, sq_dists=None) -> np.ndarray:
    dx = pairwise_sq_dists(data) if sq_dists is None else sq_dists
    if scores is None:
        return dx.copy()
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (dx.shape[0],):
        raise ValueError(
            f"scores must have length {dx.shape[0]}, got shape {scores.shape}"
        )
    diff = scores[:, None] - scores[None, :]
    return dx + lam * np.square(diff)


def assign_all_neighbors(
    data: np.ndarray,
    scores: np.ndarray | None = None,
    lam: float = 0.0,
    k: int = 5,
    gamma: float | str = "auto",
    sq_dists: np.ndarray | None = None,
) -> tuple[SparseAffinity, GammaResult]:
    """Assign adaptive neighbors for every row at once.

    Row distances are squared Euclidean feature distances plus, when
    ranking scores are supplied, ``lam`` times the squared score
    differences. Equivalent to calling :func:`assign_neighbors_row` per
    row (vectorized; same tie-breaking). ``sq_dists`` accepts a
    precomputed feature-distance matrix so repeated solves on the same
    data skip that work. Returns the sparse affinity together with the
    per-row regularizers actually used.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    dists = _row_distances(data, scores, lam, sq_dists)
    n = dists.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")

    np.fill_diagonal(dists, np.inf)
    order = np.argsort(dists, axis=1, kind="stable")
    top_idx = order[:, :k]
    top = np.take_along_axis(dists, top_idx, axis=1)
    top_sum = top.sum(axis=1)

    if gamma == "auto":
        if k < n - 1:
            d_next = np.take_along_axis(dists, order[:, k : k + 1], axis=1).ravel()
        else:
            d_next = top[:, -1]
        gammas = 0.5 * (k * d_next - top_sum)
        degenerate = gammas <= 0.0
        safe = np.where(degenerate, 1.0, gammas)
        shift = 1.0 / k + top_sum / (2.0 * k * safe)
        weights = np.maximum(shift[:, None] - top / (2.0 * safe[:, None]), 0.0)
        weights[degenerate] = 1.0 / k
        gammas = np.maximum(gammas, 0.0)
        gamma_result = GammaResult.from_rows(gammas)
    else:
        gamma_val = float(gamma)
        if gamma_val <= 0:
            raise ValueError(f"gamma must be positive, got {gamma_val}")
        weights = _project_rows_simplex(-top / (2.0 * gamma_val))
        gamma_result = GammaResult.constant(gamma_val, n)

    mask = weights > 0.0
    rows = np.repeat(np.arange(n), mask.sum(axis=1))
    matrix = sparse.csr_matrix(
        (weights[mask], (rows, top_idx[mask])), shape=(n, n)
    )
    return SparseAffinity(matrix, k), gamma_result


def _project_rows_simplex(values: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean projection onto the probability simplex."""
    n, width = values.shape
    srt = -np.sort(-values, axis=1)
    csum = np.cumsum(srt, axis=1) - 1.0
    positions = np.arange(1, width + 1)
    active = srt - csum / positions > 0
    support = width - np.argmax(active[:, ::-1], axis=1)
    threshold = csum[np.arange(n), support - 1] / support
    return np.maximum(values - threshold[:, None], 0.0)


def compute_gamma(data: np.ndarray, k: int, sq_dists: np.ndarray | None = None) -> GammaResult:
    """Per-row regularizers from feature distances only, plus their mean."""
    dists = pairwise_sq_dists(data) if sq_dists is None else sq_dists.copy()
    n = dists.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    np.fill_diagonal(dists, np.inf)
    sorted_d = np.sort(dists, axis=1)
    top_sum = sorted_d[:, :k].sum(axis=1)
    d_next = sorted_d[:, k] if k < n - 1 else sorted_d[:, k - 1]
    gammas = np.maximum(0.5 * (k * d_next - top_sum), 0.0)
    return GammaResult.from_rows(gammas)


def laplacian(S) -> sparse.csr_matrix:
    """Graph Laplacian ``degree - symmetrized affinity`` of a learned graph.

    Accepts a :class:`SparseAffinity` or any (sparse) square matrix. The
    result is symmetric positive semidefinite with zero row sums, and its
    quadratic form satisfies
    ``2 * v @ L @ v == sum_ij (v_i - v_j)^2 * s_ij``.
    """
    mat = S.matrix if isinstance(S, SparseAffinity) else sparse.csr_matrix(S)
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"affinity must be square, got {mat.shape}")
    sym = (mat + mat.T) * 0.5
    degrees = np.asarray(sym.sum(axis=1)).ravel()
    return (sparse.diags(degrees) - sym).tocsr()
