"""Datasets with certified norm bounds, plus the CSV + metadata file format.

A dataset is an (n, d) feature matrix and an (n,) label vector together with
a certified bound on feature norms and a label bound. Files are plain text:
one CSV row per point, ``y,x1,...,xd``, with a JSON sidecar carrying
``{n, d, x_bound, y_bound, rank, generator, seed, ...}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["Dataset", "save_dataset", "load_dataset", "metadata_path"]

_NORM_SLACK = 1.0 + 1e-9


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    x_bound: float
    y_bound: float

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be a vector with one entry per row")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite entries")
        if not np.all(np.isfinite(labels)):
            raise ValueError("labels contain non-finite entries")
        norms = np.linalg.norm(features, axis=1)
        worst = float(norms.max(initial=0.0))
        if worst > self.x_bound * _NORM_SLACK:
            raise ValueError(
                f"certified feature bound violated: max norm {worst} > {self.x_bound}"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def replace_point(self, index: int, x: np.ndarray, y: float) -> "Dataset":
        """A copy with one point swapped out (used by stability diagnostics)."""
        features = self.features.copy()
        labels = self.labels.copy()
        features[index] = x
        labels[index] = y
        return Dataset(features, labels, self.x_bound, self.y_bound)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.x_bound, self.y_bound)


def metadata_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(p.suffix + ".meta.json")


def save_dataset(dataset: Dataset, csv_path, metadata: dict | None = None) -> None:
    """Write the CSV rows and the JSON sidecar next to them."""
    p = Path(csv_path)
    rows = np.column_stack([dataset.labels, dataset.features])
    with open(p, "w") as fh:
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
    meta = {
        "n": dataset.n,
        "d": dataset.d,
        "x_bound": dataset.x_bound,
        "y_bound": dataset.y_bound,
    }
    if metadata:
        meta.update(metadata)
    with open(metadata_path(p), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(csv_path) -> tuple[Dataset, dict]:
    p = Path(csv_path)
    rows = np.loadtxt(p, delimiter=",", ndmin=2)
    with open(metadata_path(p)) as fh:
        meta = json.load(fh)
    dataset = Dataset(
        features=rows[:, 1:],
        labels=rows[:, 0],
        x_bound=float(meta["x_bound"]),
        y_bound=float(meta["y_bound"]),
    )
    if dataset.n != meta["n"] or dataset.d != meta["d"]:
        raise ValueError("metadata does not match the CSV contents")
    return dataset, meta
