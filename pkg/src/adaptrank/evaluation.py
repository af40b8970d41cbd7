"""Leave-one-query-out retrieval evaluation and neighbor-count sweeps.

Every point takes a turn as the query; the method ranks the rest and
precision/recall at a cutoff are averaged over queries (relevance =
same class label). Query evaluations are independent, so they can run
in parallel with order-stable aggregation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from joblib import Parallel, delayed

from .affinity import pairwise_sq_dists
from .baselines import KernelGraphConfig, euclidean_rank, load_score_file, manifold_rank
from .dataset import LabeledDataset
from .ranking import RankConfig, query_indicator, ran_solve, rank_order

__all__ = [
    "EvalError",
    "EvalReport",
    "RankingMethod",
    "evaluate_method",
    "external_scores_method",
    "euclidean_method",
    "manifold_method",
    "precision_recall_at_k",
    "ran_method",
    "sweep_k",
]

# A ranking method maps (data, query indicator) to one score per point.
RankingMethod = Callable[[np.ndarray, np.ndarray], np.ndarray]


class EvalError(RuntimeError):
    """A ranking method failed while evaluating a query."""


@dataclass(frozen=True)
class EvalReport:
    """Per-query and mean retrieval percentages for one method."""

    method: str
    at_k: int
    per_query: list[tuple[int, float, float]]
    mean_precision: float
    mean_recall: float
    config_echo: dict

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "at_k": self.at_k,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "per_query": [
                {"query": q, "precision": p, "recall": r}
                for q, p, r in self.per_query
            ],
            "config": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def summary_row(self) -> str:
        """One CSV row ``method,at_k,precision,recall`` (2-decimal percents)."""
        return (
            f"{self.method},{self.at_k},"
            f"{self.mean_precision:.2f},{self.mean_recall:.2f}"
        )


def precision_recall_at_k(
    ranking: Sequence[int],
    labels: np.ndarray,
    query_label: int,
    at_k: int,
) -> tuple[float, float]:
    """Precision and recall (percent) of the top ``at_k`` ranked points.

    ``ranking`` must already exclude the query itself. Recall divides by
    the total number of relevant points in the ranking; if there are
    none, recall is undefined and this raises.
    """
    ranking = np.asarray(ranking, dtype=np.int64)
    labels = np.asarray(labels)
    if not 1 <= at_k <= ranking.shape[0]:
        raise ValueError(f"at_k must be in [1, {ranking.shape[0]}], got {at_k}")
    relevant = labels[ranking] == query_label
    total_relevant = int(relevant.sum())
    if total_relevant == 0:
        raise ValueError(f"no points share label {query_label}; recall undefined")
    hits = int(relevant[:at_k].sum())
    return 100.0 * hits / at_k, 100.0 * hits / total_relevant


def _score_query(method, data, query: int):
    try:
        return np.asarray(method(data, query_indicator(data.shape[0], [query])))
    except Exception as exc:
        raise EvalError(f"method failed on query {query}: {exc}") from exc


def evaluate_method(
    dataset: LabeledDataset,
    method: RankingMethod,
    at_k: int,
    method_name: str = "method",
    config_echo: dict | None = None,
    n_jobs: int = 1,
) -> EvalReport:
    """Use each point as query once and average precision/recall at ``at_k``.

    ``method`` is any callable of (data, query indicator) returning one
    score per point. ``n_jobs > 1`` evaluates queries in parallel; the
    report is identical either way.
    """
    labels = dataset.labels
    counts = {int(c): int((labels == c).sum()) for c in np.unique(labels)}
    thin = [c for c, size in counts.items() if size < 2]
    if thin:
        raise ValueError(f"every class needs >= 2 members; too small: {thin}")
    if not 1 <= at_k <= dataset.n - 1:
        raise ValueError(f"at_k must be in [1, {dataset.n - 1}], got {at_k}")

    queries = range(dataset.n)
    if n_jobs > 1:
        scores = Parallel(n_jobs=n_jobs)(
            delayed(_score_query)(method, dataset.data, q) for q in queries
        )
    else:
        scores = [_score_query(method, dataset.data, q) for q in queries]

    per_query: list[tuple[int, float, float]] = []
    for q, f in zip(queries, scores):
        order = rank_order(f, exclude=[q])
        precision, recall = precision_recall_at_k(
            order, labels, int(labels[q]), at_k
        )
        per_query.append((q, precision, recall))
    mean_p = float(np.mean([p for _, p, _ in per_query]))
    mean_r = float(np.mean([r for _, _, r in per_query]))
    return EvalReport(
        method=method_name,
        at_k=at_k,
        per_query=per_query,
        mean_precision=mean_p,
        mean_recall=mean_r,
        config_echo=dict(config_echo or {}),
    )


def ran_method(cfg: RankConfig) -> RankingMethod:
    """Adaptive-neighbor ranking as an evaluation method.

    Caches the pairwise feature distances for the data matrix it last
    saw, since leave-one-out evaluation re-ranks the same points for
    every query.
    """
    memo: tuple[np.ndarray, np.ndarray] | None = None

    def method(data: np.ndarray, y: np.ndarray) -> np.ndarray:
        nonlocal memo
        if memo is None or memo[0] is not data:
            memo = (data, pairwise_sq_dists(data))
        return ran_solve(data, y, cfg, sq_dists=memo[1]).f

    return method


def euclidean_method() -> RankingMethod:
    return euclidean_rank


def manifold_method(cfg: KernelGraphConfig = KernelGraphConfig()) -> RankingMethod:
    def method(data: np.ndarray, y: np.ndarray) -> np.ndarray:
        return manifold_rank(data, y, cfg)

    return method


def external_scores_method(directory) -> RankingMethod:
    """Scores precomputed elsewhere, one ``query_<i>.csv`` file per query.

    Lets methods outside this package be compared on the same protocol.
    """
    directory = Path(directory)

    def method(data: np.ndarray, y: np.ndarray) -> np.ndarray:
        queries = np.flatnonzero(y == 1)
        if queries.size != 1:
            raise ValueError("external score files are per single query")
        return load_score_file(
            directory / f"query_{int(queries[0])}.csv", n=data.shape[0]
        )

    return method


def sweep_k(
    dataset: LabeledDataset,
    k_values: Sequence[int],
    cfg: RankConfig,
    at_k: int,
    n_jobs: int = 1,
) -> list[tuple[int, EvalReport]]:
    """Evaluate the adaptive ranker at each neighbor count in turn."""
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise ValueError("k_values must not be empty")
    for k in k_values:
        if not 1 <= k <= dataset.n - 1:
            raise ValueError(f"k={k} invalid for n={dataset.n}")
    results = []
    for k in k_values:
        cfg_k = replace(cfg, k=k)
        report = evaluate_method(
            dataset,
            ran_method(cfg_k),
            at_k,
            method_name=f"ran(k={k})",
            config_echo={"k": k, "lam": cfg_k.lam, "at_k": at_k},
            n_jobs=n_jobs,
        )
        results.append((k, report))
    return results
