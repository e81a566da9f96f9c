from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .tsne import EmbeddingLayout


def export_scatter(layout: EmbeddingLayout, path, title: str = "") -> tuple[Path, Path]:
    """Write ``<path>.csv`` (x, y, label, source) and ``<path>.svg``."""
    from ..plotting import scatter

    base = Path(path)
    if base.suffix in (".csv", ".svg"):
        base = base.with_suffix("")
    csv_path, svg_path = base.with_suffix(".csv"), base.with_suffix(".svg")
    with open(csv_path, "w", newline="") as fh:
        fh.write("x,y,label,source\n")
        for (x, y), lab, src in zip(layout.Y, layout.labels, layout.source):
            fh.write(f"{x:.12g},{y:.12g},{lab},{src}\n")
    scatter(layout.Y[:, 0], layout.Y[:, 1], layout.labels, layout.source, svg_path, title)
    return csv_path, svg_path


def read_scatter_csv(path) -> EmbeddingLayout:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    Y = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    source = np.array([r["source"] for r in rows])
    return EmbeddingLayout(Y, labels, source, float("nan"))
