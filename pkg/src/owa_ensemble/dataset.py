"""Dataset container, CSV ingestion, and synthetic data generation.

The ingestion schema is a flat CSV with one header row: an optional ``id``
column (dropped from the features), a binary label column (``Class`` by
default), and any number of numeric feature columns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError

ID_COLUMN = "id"
DEFAULT_LABEL = "Class"


@dataclass
class Dataset:
    """In-memory feature matrix with binary labels."""

    feature_names: list
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError("feature matrix and labels disagree on sample count")
        if self.X.shape[1] != len(self.feature_names):
            raise DataError("feature matrix and feature names disagree on feature count")
        if not np.all(np.isfinite(self.X)):
            raise DataError("feature matrix contains non-finite values")
        bad = ~np.isin(self.y, (0, 1))
        if bad.any():
            row = int(np.nonzero(bad)[0][0])
            raise DataError(f"labels must be 0 or 1; data row {row} has {self.y[row]}")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def restrict(self, names) -> "Dataset":
        """Return a copy containing only the named features, in that order."""
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise DataError(f"dataset is missing required feature columns: {missing}")
        cols = [self.feature_names.index(n) for n in names]
        return Dataset(list(names), self.X[:, cols].copy(), self.y.copy())


def load_csv(path, label_column: str = DEFAULT_LABEL) -> Dataset:
    """Load a dataset from CSV, validating the schema cell by cell.

    Raises DataError with a row/column diagnostic for the first offending
    cell; row numbers are 0-based data rows (the header is not counted).
    """
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DataError(f"empty file: {path}") from None
    except (ValueError, pd.errors.ParserError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    if label_column not in frame.columns:
        raise DataError(
            f"schema error: label column {label_column!r} not found in {path} "
            f"(columns: {list(frame.columns)})"
        )
    if len(frame) == 0:
        raise DataError(f"no data rows in {path}")

    labels_raw = pd.to_numeric(frame[label_column], errors="coerce")
    bad = labels_raw.isna() | ~labels_raw.isin((0, 1))
    if bad.any():
        row = int(np.nonzero(bad.to_numpy())[0][0])
        raise DataError(
            f"label-domain error: data row {row} has {label_column}="
            f"{frame[label_column].iloc[row]!r}, expected 0 or 1"
        )
    y = labels_raw.to_numpy(dtype=int)

    feature_cols = [c for c in frame.columns if c not in (label_column, ID_COLUMN)]
    if not feature_cols:
        raise DataError(f"no feature columns in {path}")
    X = np.empty((len(frame), len(feature_cols)), dtype=float)
    for j, col in enumerate(feature_cols):
        values = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.nonzero(bad)[0][0])
            raise DataError(
                f"non-numeric or non-finite value at data row {row}, "
                f"column {col!r}: {frame[col].iloc[row]!r}"
            )
        X[:, j] = values
    return Dataset(feature_cols, X, y)


def synth_dataset(
    n_samples: int,
    n_informative: int = 5,
    n_noise: int = 15,
    class_separation: float = 2.0,
    seed: int = 0,
):
    """Generate a two-class Gaussian mixture in the ingestion schema.

    Informative features are unit-variance Gaussians whose class-1 mean is
    offset by ``class_separation``; noise features are standard normal and
    independent of the label. Classes are balanced. Returns (header, rows)
    where rows are lists of python scalars ready for CSV writing.
    """
    if n_samples < 10:
        raise ConfigError(f"n_samples must be >= 10, got {n_samples}")
    if n_informative < 1 or n_noise < 0:
        raise ConfigError("need n_informative >= 1 and n_noise >= 0")
    if not np.isfinite(class_separation):
        raise ConfigError("class_separation must be finite")

    rng = np.random.default_rng(seed)
    n1 = n_samples // 2
    y = rng.permutation(np.repeat((0, 1), (n_samples - n1, n1)))
    informative = rng.normal(size=(n_samples, n_informative)) + y[:, None] * class_separation
    noise = rng.normal(size=(n_samples, n_noise))

    header = (
        [ID_COLUMN]
        + [f"inf{i + 1}" for i in range(n_informative)]
        + [f"noise{i + 1}" for i in range(n_noise)]
        + [DEFAULT_LABEL]
    )
    rows = []
    for i in range(n_samples):
        row = [i]
        row.extend(float(v) for v in informative[i])
        row.extend(float(v) for v in noise[i])
        row.append(int(y[i]))
        rows.append(row)
    return header, rows


def write_synth_csv(path, **kwargs) -> None:
    """Write a synthetic dataset; byte-identical for identical arguments."""
    header, rows = synth_dataset(**kwargs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, int) else repr(v) for v in row])


def feature_correlation_matrix(data: Dataset) -> np.ndarray:
    """Pearson correlation between feature columns.

    Zero-variance columns get correlation 0 against everything else and 1
    with themselves.
    """
    X = data.X
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = centered / safe
    corr = unit.T @ unit
    zero = norms == 0.0
    corr[zero, :] = 0.0
    corr[:, zero] = 0.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)
