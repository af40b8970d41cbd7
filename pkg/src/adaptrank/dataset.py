"""Synthetic manifold generators, CSV interchange, and feature normalization.

All randomness flows through ``numpy.random.default_rng`` (PCG64) seeded
explicitly, so identical arguments reproduce bit-identical datasets on any
platform. The canonical interchange format is a plain UTF-8 CSV with comma
separators, ``.`` decimals, no header, and the class label as the last
column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CsvParseError",
    "LabeledDataset",
    "NormalizeResult",
    "as_data_matrix",
    "gen_three_rings",
    "gen_two_moons",
    "load_csv",
    "normalize",
    "save_csv",
    "subset_per_class",
]


class CsvParseError(ValueError):
    """Raised when a CSV file cannot be parsed into a dataset."""


def as_data_matrix(values) -> np.ndarray:
    """Validate and return an n x d float64 feature matrix.

    Requires n >= 2 points, d >= 1 features and finite entries.
    """
    data = np.asarray(values, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"data matrix must be 2-D, got shape {data.shape}")
    n, d = data.shape
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if d < 1:
        raise ValueError("need at least 1 feature")
    if not np.isfinite(data).all():
        raise ValueError("data matrix contains NaN or Inf")
    return data


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus one integer class label per point."""

    data: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        data = as_data_matrix(self.data)
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != data.shape[0]:
            raise ValueError(
                f"labels must be 1-D with length {data.shape[0]}, "
                f"got shape {labels.shape}"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("labels must be integers")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def gen_two_moons(n_per_moon: int, noise_sd: float, seed: int) -> LabeledDataset:
    """Generate two interleaved half-moons in 2-D.

    The upper moon traces (cos t, sin t) and the lower moon
    (1 - cos t, 0.5 - sin t) for t evenly spaced over [0, pi]; isotropic
    Gaussian noise with standard deviation ``noise_sd`` is added per
    coordinate. Labels are 0 for the upper moon and 1 for the lower.
    """
    if n_per_moon < 2:
        raise ValueError(f"n_per_moon must be >= 2, got {n_per_moon}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    t = np.linspace(0.0, np.pi, n_per_moon)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    points = np.vstack([upper, lower])
    rng = np.random.default_rng(seed)
    points = points + noise_sd * rng.standard_normal(points.shape)
    labels = np.repeat(np.array([0, 1], dtype=np.int64), n_per_moon)
    return LabeledDataset(points, labels)


def gen_three_rings(
    n_per_ring: int,
    radii: tuple[float, float, float],
    noise_sd: float,
    seed: int,
) -> LabeledDataset:
    """Generate three concentric rings in 2-D, labeled 0/1/2 inside out.

    Angles are evenly spaced over [0, 2*pi); Gaussian noise with standard
    deviation ``noise_sd`` is added per coordinate.
    """
    if n_per_ring < 2:
        raise ValueError(f"n_per_ring must be >= 2, got {n_per_ring}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    radii = tuple(float(r) for r in radii)
    if len(radii) != 3:
        raise ValueError(f"need exactly 3 radii, got {len(radii)}")
    if min(radii) <= 0:
        raise ValueError(f"radii must be positive, got {radii}")
    if not (radii[0] < radii[1] < radii[2]):
        raise ValueError(f"radii must be strictly increasing, got {radii}")
    t = np.linspace(0.0, 2.0 * np.pi, n_per_ring, endpoint=False)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    points = np.vstack([r * circle for r in radii])
    rng = np.random.default_rng(seed)
    points = points + noise_sd * rng.standard_normal(points.shape)
    labels = np.repeat(np.arange(3, dtype=np.int64), n_per_ring)
    return LabeledDataset(points, labels)


def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise CsvParseError(
            f"row {row}, column {col}: non-numeric cell {text!r}"
        ) from None


def load_csv(path, label_column: int | None = None) -> LabeledDataset:
    """Load a rectangular numeric CSV into a labeled dataset.

    Rows become points. If ``label_column`` is given (0-based, negatives
    count from the end), that column supplies the integer labels and is
    excluded from the features; otherwise labels default to all-zero.
    Malformed input raises :class:`CsvParseError` naming the offending
    row and column (1-based in messages).
    """
    path = Path(path)
    rows: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as handle:
        for r, record in enumerate(csv.reader(handle), start=1):
            if not record:
                continue
            parsed = [_parse_cell(cell.strip(), r, c) for c, cell in enumerate(record, start=1)]
            if rows and len(parsed) != len(rows[0]):
                raise CsvParseError(
                    f"row {r}: expected {len(rows[0])} columns, got {len(parsed)}"
                )
            rows.append(parsed)
    if not rows:
        raise CsvParseError(f"{path}: empty file")
    table = np.asarray(rows, dtype=np.float64)
    n, width = table.shape
    if label_column is None:
        return LabeledDataset(table, np.zeros(n, dtype=np.int64))
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise ValueError(f"label_column {label_column} out of range for {width} columns")
    raw_labels = table[:, col]
    if not np.all(raw_labels == np.round(raw_labels)):
        bad = int(np.argmax(raw_labels != np.round(raw_labels)))
        raise CsvParseError(
            f"row {bad + 1}, column {col + 1}: label {raw_labels[bad]!r} is not an integer"
        )
    features = np.delete(table, col, axis=1)
    return LabeledDataset(features, raw_labels.astype(np.int64))


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write a dataset as headerless CSV with the label as last column.

    Floats are written with ``repr`` so that ``load_csv`` round-trips
    bit-identically.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        for point, label in zip(dataset.data, dataset.labels):
            cells = [repr(float(v)) for v in point] + [str(int(label))]
            handle.write(",".join(cells) + "\n")


@dataclass(frozen=True)
class NormalizeResult:
    """Normalized feature matrix plus indices left at zero scale.

    ``zero_variance`` lists the rows (per-point mode) or columns
    (per-feature mode) whose variance was zero: they are centered and
    left unscaled rather than raising an error.
    """

    values: np.ndarray
    zero_variance: tuple[int, ...]


def normalize(data: np.ndarray, mode: str = "zscore_per_point") -> NormalizeResult:
    """Rescale a feature matrix to zero mean and unit variance.

    ``zscore_per_point`` standardizes each row, ``zscore_per_feature``
    each column (population variance), and ``none`` returns the input
    unchanged.
    """
    data = as_data_matrix(data)
    if mode == "none":
        return NormalizeResult(data, ())
    if mode == "zscore_per_point":
        axis = 1
    elif mode == "zscore_per_feature":
        axis = 0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    mean = data.mean(axis=axis, keepdims=True)
    sd = data.std(axis=axis, keepdims=True)
    flat_sd = sd.ravel()
    degenerate = tuple(int(i) for i in np.flatnonzero(flat_sd == 0.0))
    safe_sd = np.where(sd == 0.0, 1.0, sd)
    return NormalizeResult((data - mean) / safe_sd, degenerate)


def subset_per_class(
    dataset: LabeledDataset, per_class: int, seed: int | None = None
) -> LabeledDataset:
    """Select ``per_class`` points from every class.

    With ``seed=None`` the first ``per_class`` occurrences of each class
    are kept (in input order); with a seed they are sampled without
    replacement. Classes with fewer members than requested are rejected.
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed) if seed is not None else None
    keep: list[np.ndarray] = []
    for cls in np.unique(dataset.labels):
        members = np.flatnonzero(dataset.labels == cls)
        if members.size < per_class:
            raise ValueError(
                f"class {cls} has {members.size} members, need {per_class}"
            )
        if rng is None:
            chosen = members[:per_class]
        else:
            chosen = np.sort(rng.choice(members, size=per_class, replace=False))
        keep.append(chosen)
    order = np.concatenate(keep)
    return LabeledDataset(dataset.data[order], dataset.labels[order])
