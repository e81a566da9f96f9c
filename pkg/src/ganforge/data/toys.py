"""Procedural stand-in datasets: stroke glyphs and two-class lung fields."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset

SIZE = 64

# Each glyph is a list of strokes in unit coordinates (y down).
# ("line", (x0, y0), (x1, y1)) or ("arc", (cx, cy), r, start_deg, end_deg)
GLYPHS = [
    [("arc", (0.5, 0.5), 0.28, 0, 360)],
    [("line", (0.5, 0.15), (0.5, 0.85)), ("line", (0.35, 0.3), (0.5, 0.15))],
    [("arc", (0.5, 0.35), 0.2, 180, 360), ("line", (0.7, 0.35), (0.3, 0.85)), ("line", (0.3, 0.85), (0.72, 0.85))],
    [("arc", (0.48, 0.32), 0.17, 200, 450), ("arc", (0.48, 0.66), 0.19, 270, 520)],
    [("line", (0.62, 0.15), (0.25, 0.62)), ("line", (0.25, 0.62), (0.78, 0.62)), ("line", (0.62, 0.15), (0.62, 0.85))],
    [("line", (0.7, 0.15), (0.32, 0.15)), ("line", (0.32, 0.15), (0.3, 0.45)), ("arc", (0.48, 0.63), 0.21, 230, 500)],
    [("arc", (0.5, 0.64), 0.2, 0, 360), ("arc", (0.62, 0.5), 0.36, 180, 265)],
    [("line", (0.25, 0.18), (0.75, 0.18)), ("line", (0.75, 0.18), (0.42, 0.85))],
    [("arc", (0.5, 0.32), 0.16, 0, 360), ("arc", (0.5, 0.67), 0.19, 0, 360)],
    [("arc", (0.5, 0.36), 0.2, 0, 360), ("line", (0.7, 0.36), (0.55, 0.86))],
]


def _stroke_points(stroke, step=0.01) -> np.ndarray:
    if stroke[0] == "line":
        (x0, y0), (x1, y1) = stroke[1], stroke[2]
        n = max(2, int(np.hypot(x1 - x0, y1 - y0) / step))
        t = np.linspace(0, 1, n)
        return np.stack([x0 + t * (x1 - x0), y0 + t * (y1 - y0)], axis=1)
    (cx, cy), r, a0, a1 = stroke[1], stroke[2], stroke[3], stroke[4]
    n = max(4, int(np.deg2rad(abs(a1 - a0)) * r / step))
    th = np.deg2rad(np.linspace(a0, a1, n))
    return np.stack([cx + r * np.cos(th), cy + r * np.sin(th)], axis=1)


def _render(points: np.ndarray, width_px: float) -> np.ndarray:
    grid = (np.arange(SIZE) + 0.5) / SIZE
    gx, gy = np.meshgrid(grid, grid)
    pix = np.stack([gx.ravel(), gy.ravel()], axis=1)
    d2 = ((pix[:, None, :] - points[None, :, :]) ** 2).sum(-1).min(axis=1)
    dist = np.sqrt(d2) * SIZE
    ink = np.clip(0.5 * width_px + 0.5 - dist, 0.0, 1.0)
    return ink.reshape(SIZE, SIZE)


def _glyph_sample(template, noise: float, rng) -> np.ndarray:
    pts = np.concatenate([_stroke_points(s) for s in template])
    width = 3.5
    if noise > 0:
        ang = rng.normal(0, 0.12 * noise)
        scale = 1 + rng.normal(0, 0.08 * noise)
        shear = rng.normal(0, 0.1 * noise)
        shift = rng.normal(0, 0.04 * noise, 2)
        c, s = np.cos(ang), np.sin(ang)
        mat = scale * np.array([[c, -s], [s, c]]) @ np.array([[1, shear], [0, 1]])
        pts = (pts - 0.5) @ mat.T + 0.5 + shift
        # smooth elastic warp
        freq = rng.uniform(2, 4, (2, 2))
        phase = rng.uniform(0, 2 * np.pi, (2, 2))
        amp = 0.025 * noise
        pts = pts + amp * np.stack(
            [
                np.sin(freq[0, 0] * np.pi * pts[:, 1] + phase[0, 0]) * np.cos(freq[0, 1] * np.pi * pts[:, 0] + phase[0, 1]),
                np.sin(freq[1, 0] * np.pi * pts[:, 0] + phase[1, 0]) * np.cos(freq[1, 1] * np.pi * pts[:, 1] + phase[1, 1]),
            ],
            axis=1,
        )
        width = max(1.5, width + rng.normal(0, 1.0 * noise))
    return _render(pts, width)


def synth_glyphs(n_classes: int = 3, per_class: int = 64, noise: float = 0.5, seed=0, channels: int = 3) -> Dataset:
    """Handwriting-like stroke glyphs, ``per_class`` samples for each class."""
    if not 1 <= n_classes <= len(GLYPHS):
        raise ValueError(f"n_classes must be in 1..{len(GLYPHS)}")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    images = np.zeros((n_classes * per_class, channels, SIZE, SIZE))
    labels = np.repeat(np.arange(n_classes), per_class)
    for i, label in enumerate(labels):
        ink = _glyph_sample(GLYPHS[label], noise, rng)
        images[i] = 2.0 * ink[None] - 1.0
    return Dataset(
        np.clip(images, -1, 1),
        labels,
        [f"glyph{c}" for c in range(n_classes)],
        provenance=f"toy:glyphs(classes={n_classes},per_class={per_class},noise={noise},seed={seed})",
        meta={"channels": channels},
    )


def _ellipse(gx, gy, cx, cy, rx, ry) -> np.ndarray:
    r = ((gx - cx) / rx) ** 2 + ((gy - cy) / ry) ** 2
    return np.clip((1.0 - r) * 6.0, 0.0, 1.0)


def _lung_sample(label: int, noise: float, rng) -> np.ndarray:
    grid = (np.arange(SIZE) + 0.5) / SIZE
    gx, gy = np.meshgrid(grid, grid)
    j = (lambda s: rng.normal(0, s * noise)) if noise > 0 else (lambda s: 0.0)
    body = _ellipse(gx, gy, 0.5 + j(0.02), 0.55 + j(0.02), 0.42 + j(0.02), 0.48 + j(0.02))
    img = -1.0 + 1.3 * body
    lungs = np.zeros_like(gx)
    centers = []
    for side in (-1, 1):
        cx = 0.5 + side * (0.18 + j(0.015))
        cy = 0.52 + j(0.02)
        rx, ry = 0.13 + j(0.01), 0.3 + j(0.02)
        centers.append((cx, cy, rx, ry))
        lungs = np.maximum(lungs, _ellipse(gx, gy, cx, cy, rx, ry))
    img = img - 0.9 * lungs
    spine = np.exp(-((gx - 0.5) / 0.03) ** 2) * body
    img = img + 0.4 * spine
    if label == 1:
        n_blobs = 2 if noise == 0 else 1 + int(rng.integers(1, 3))
        for b in range(n_blobs):
            cx, cy, rx, ry = centers[b % 2]
            bx = cx + (0.0 if noise == 0 else rng.uniform(-0.5, 0.5) * rx)
            by = cy + 0.12 + (0.0 if noise == 0 else rng.uniform(-0.3, 0.3) * ry)
            rad = 0.07 + (0.0 if noise == 0 else rng.uniform(0, 0.03))
            img = img + 0.8 * np.exp(-(((gx - bx) ** 2 + (gy - by) ** 2) / (2 * rad**2))) * lungs
    if noise > 0:
        img = img + rng.normal(0, 0.05 * noise, img.shape)
    return np.clip(img, -1.0, 1.0)


def synth_lungfields(per_class: int = 64, noise: float = 0.5, seed=0, n_classes: int = 2) -> Dataset:
    """Radiograph-like lung fields; class 1 carries bright opacity blobs."""
    if n_classes != 2:
        raise ValueError("lung-field toy has exactly 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(2), per_class)
    images = np.stack([_lung_sample(int(l), noise, rng)[None] for l in labels])
    return Dataset(
        images,
        labels,
        ["normal", "opacity"],
        provenance=f"toy:lungfields(per_class={per_class},noise={noise},seed={seed})",
        meta={"channels": 1},
    )
