"""CSV dataset helpers shared by the CLI and the evaluation harness.

The on-disk schema is a header row ``f0,...,f{d-1},label`` followed by one
numeric row per example. Schema problems raise ConfigError with the file
and line so the CLI can exit 2 with a usable message.
"""

from __future__ import annotations

import csv
import os
from typing import Optional

import numpy as np

from .core import ConfigError

__all__ = ["load_dataset", "save_dataset", "feature_header"]


def feature_header(num_features: int) -> list[str]:
    return [f"f{i}" for i in range(num_features)] + ["label"]


def load_dataset(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read a labeled CSV into (X, y)."""
    path = str(path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file, expected a header row") from None
        d = len(header) - 1
        if d < 1 or header != feature_header(d):
            raise ConfigError(
                f"{path}: line 1: header must be f0..f{max(d - 1, 0)},label, got {header}"
            )
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ConfigError(
                    f"{path}: line {lineno}: expected {d + 1} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row[:-1]])
                labels.append(int(float(row[-1])))
            except ValueError as exc:
                raise ConfigError(f"{path}: line {lineno}: non-numeric cell ({exc})") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float), np.asarray(labels, dtype=int)


def save_dataset(
    path: str | os.PathLike, X: np.ndarray, y: Optional[np.ndarray] = None
) -> None:
    """Write (X, y) in the CLI schema; labels default to zeros."""
    X = np.asarray(X, dtype=float)
    labels = np.zeros(len(X), dtype=int) if y is None else np.asarray(y, dtype=int)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(feature_header(X.shape[1]))
        for row, lab in zip(X, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])
