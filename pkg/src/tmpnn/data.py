"""Datasets: generators, CSV ingestion, splits, and regression metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    """A feature matrix X (N x n), target matrix Y (N x m), and column names."""

    X: np.ndarray
    Y: np.ndarray
    feature_names: list[str]
    target_names: list[str]

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.Y.ndim == 1:
            self.Y = self.Y[:, None]
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(f"X has {self.X.shape[0]} rows, Y has {self.Y.shape[0]}")
        if self.X.shape[0] < 1:
            raise ValueError("dataset is empty")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.Y)):
            raise ValueError("dataset contains non-finite values")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length does not match X width")
        if len(self.target_names) != self.Y.shape[1]:
            raise ValueError("target_names length does not match Y width")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_targets(self) -> int:
        return self.Y.shape[1]

    def take(self, idx: np.ndarray) -> "Dataset":
        """Row subset by index array."""
        return Dataset(self.X[idx], self.Y[idx],
                       list(self.feature_names), list(self.target_names))


def gen_friedman1(n_samples: int, n_unimportant: int = 0,
                  noise_std: float = 0.0, seed: int = 0) -> Dataset:
    """The Friedman-1 synthetic regression problem.

    Features are uniform on [0, 1]; the first five drive the target

        y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise_std * e

    with e standard normal, and any additional features are irrelevant
    uniform noise columns.

    Args:
        n_samples: number of rows, >= 1.
        n_unimportant: extra U(0, 1) feature columns appended after the
            five informative ones.
        noise_std: standard deviation of the additive Gaussian noise.
        seed: RNG seed; equal seeds give bit-identical datasets.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n_unimportant < 0:
        raise ValueError("n_unimportant must be >= 0")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n_samples, 5 + n_unimportant))
    y = (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
         + 20.0 * (X[:, 2] - 0.5) ** 2
         + 10.0 * X[:, 3] + 5.0 * X[:, 4])
    if noise_std > 0:
        y = y + noise_std * rng.standard_normal(n_samples)
    names = [f"x{i + 1}" for i in range(X.shape[1])]
    return Dataset(X, y[:, None], names, ["y"])


def gen_noisy_linear(n_samples: int, x_range: tuple[float, float] = (-1.0, 1.0),
                     seed: int = 0) -> Dataset:
    """One uniform feature with y = x + U(-0.25, 0.25) noise."""
    lo, hi = x_range
    if not lo < hi:
        raise ValueError(f"x_range must satisfy lo < hi, got {x_range}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=n_samples)
    y = x + rng.uniform(-0.25, 0.25, size=n_samples)
    return Dataset(x[:, None], y[:, None], ["x"], ["y"])


def _detect_delimiter(line: str) -> str | None:
    """Pick the delimiter: semicolon, comma, or whitespace (None)."""
    if ";" in line:
        return ";"
    if "," in line:
        return ","
    return None


def _split_line(line: str, delim: str | None) -> list[str]:
    if delim is None:
        return line.split()
    return [cell.strip() for cell in line.split(delim)]


def load_table(path) -> tuple[list[str], np.ndarray]:
    """Read a numeric table with auto-detected delimiter and optional header.

    The delimiter is semicolon, comma, or whitespace, whichever the first
    line uses.  A first row with non-numeric cells becomes the column
    names; otherwise columns are named c1, c2, ...

    Returns:
        (names, values) with values of shape (rows, columns).

    Raises:
        ValueError: empty table, ragged row, missing value, or
            non-numeric cell (with row and column position).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise ValueError(f"{path}: file contains no data")

    delim = _detect_delimiter(lines[0])
    first = _split_line(lines[0], delim)

    def numeric(cells: list[str]) -> bool:
        try:
            [float(c) for c in cells]
            return True
        except ValueError:
            return False

    if numeric(first):
        names = [f"c{i + 1}" for i in range(len(first))]
        body = lines
    else:
        names = first
        body = lines[1:]
    if not body:
        raise ValueError(f"{path}: no data rows after the header")

    width = len(names)
    rows = np.empty((len(body), width), dtype=np.float64)
    for r, line in enumerate(body):
        cells = _split_line(line, delim)
        if len(cells) != width:
            raise ValueError(f"{path}: row {r + 1} has {len(cells)} cells, "
                             f"expected {width}")
        for c, cell in enumerate(cells):
            if cell == "":
                raise ValueError(f"{path}: missing value at row {r + 1}, "
                                 f"column {names[c]!r}")
            try:
                rows[r, c] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {cell!r} at "
                                 f"row {r + 1}, column {names[c]!r}") from None
    return names, rows


def load_csv(path, target_columns) -> Dataset:
    """Load a numeric table, designating some columns as targets.

    Parsing as load_table.  Column order is preserved: target columns
    become Y, the rest X.

    Args:
        path: file to read.
        target_columns: either a list of column names, or a positive int
            meaning "the last that many columns".

    Raises:
        ValueError: parse errors as load_table, or an unknown target name
            (the error lists the available names).
    """
    names, rows = load_table(path)
    width = len(names)
    if isinstance(target_columns, int):
        if not 1 <= target_columns < width:
            raise ValueError(f"target count {target_columns} must be in "
                             f"[1, {width - 1}]")
        target_names = names[-target_columns:]
    else:
        target_names = list(target_columns)
        for name in target_names:
            if name not in names:
                raise ValueError(f"unknown target column {name!r}; available: "
                                 f"{', '.join(names)}")
    t_idx = [names.index(n) for n in target_names]
    f_idx = [i for i in range(width) if i not in t_idx]
    return Dataset(rows[:, f_idx], rows[:, t_idx],
                   [names[i] for i in f_idx], target_names)


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset as a comma-separated file with a header row.

    Floats are written in shortest round-trip form, so a save/load cycle
    reproduces values exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.feature_names) + list(dataset.target_names))
        for xr, yr in zip(dataset.X, dataset.Y):
            writer.writerow([repr(float(v)) for v in xr] +
                            [repr(float(v)) for v in yr])


def split_random(dataset: Dataset, test_fraction: float,
                 seed: int = 0) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive random train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be strictly between 0 and 1")
    n = dataset.n_samples
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.take(np.sort(perm[n_test:])), dataset.take(np.sort(perm[:n_test]))


def split_quantile(dataset: Dataset, column: str,
                   quantile: float) -> tuple[Dataset, Dataset]:
    """Extrapolation split: test rows lie strictly above a column quantile.

    The column may be a feature or a target, so out-of-distribution tests
    can be run against either side of the mapping.
    """
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must be strictly between 0 and 1")
    if column in dataset.feature_names:
        values = dataset.X[:, dataset.feature_names.index(column)]
    elif column in dataset.target_names:
        values = dataset.Y[:, dataset.target_names.index(column)]
    else:
        names = list(dataset.feature_names) + list(dataset.target_names)
        raise ValueError(f"unknown column {column!r}; available: "
                         f"{', '.join(names)}")
    threshold = np.quantile(values, quantile)
    test_mask = values > threshold
    if test_mask.all() or not test_mask.any():
        raise ValueError(f"quantile split on {column!r} left one side empty")
    idx = np.arange(dataset.n_samples)
    return dataset.take(idx[~test_mask]), dataset.take(idx[test_mask])


def metric_mse(y_true, y_pred) -> float:
    """Mean squared error over every entry of the target matrix."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    return float(np.mean((y_true - y_pred) ** 2))


def metric_r2(y_true, y_pred) -> float:
    """Coefficient of determination, averaged uniformly over targets.

    Each target column gets its own 1 - SS_res/SS_tot score; the result is
    their plain mean.  A constant true column makes the score undefined.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.ndim == 1:
        y_true = y_true[:, None]
    if y_pred.ndim == 1:
        y_pred = y_pred[:, None]
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    ss_tot = np.sum((y_true - y_true.mean(axis=0)) ** 2, axis=0)
    if np.any(ss_tot == 0.0):
        raise ValueError("R^2 is undefined for a constant true target column")
    ss_res = np.sum((y_true - y_pred) ** 2, axis=0)
    return float(np.mean(1.0 - ss_res / ss_tot))
