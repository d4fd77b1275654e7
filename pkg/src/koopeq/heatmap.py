"""Deterministic PNG rendering without a plotting stack.

Space-time heatmaps use a fixed viridis-like colormap with linear scaling
to the data range; x is time (columns), y is space (rows, index 0 at the
bottom). Output is 8-bit RGB with no ancillary chunks, so identical data
yields byte-identical files.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

# viridis anchor colors, linearly interpolated
_ANCHORS = np.array([
    (0.267004, 0.004874, 0.329415),
    (0.282623, 0.140926, 0.457517),
    (0.253935, 0.265254, 0.529983),
    (0.206756, 0.371758, 0.553117),
    (0.163625, 0.471133, 0.558148),
    (0.127568, 0.566949, 0.550556),
    (0.134692, 0.658636, 0.517649),
    (0.266941, 0.748751, 0.440573),
    (0.477504, 0.821444, 0.318195),
    (0.741388, 0.873449, 0.149561),
    (0.993248, 0.906157, 0.143936),
])


def colormap(t: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to RGB bytes via the anchor table."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    pos = t * (len(_ANCHORS) - 1)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, len(_ANCHORS) - 1)
    frac = (pos - i0)[..., None]
    rgb = _ANCHORS[i0] * (1 - frac) + _ANCHORS[i1] * frac
    return (rgb * 255 + 0.5).astype(np.uint8)


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def write_png(path, rgb: np.ndarray):
    """Write an (H, W, 3) uint8 array as an 8-bit RGB PNG."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got {rgb.shape}")
    height, width = rgb.shape[:2]
    raw = b"".join(b"\x00" + rgb[r].tobytes() for r in range(height))
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(b"\x89PNG\r\n\x1a\n")
        fh.write(_png_chunk(b"IHDR", ihdr))
        fh.write(_png_chunk(b"IDAT", zlib.compress(raw, 9)))
        fh.write(_png_chunk(b"IEND", b""))


def render_heatmap(values: np.ndarray, vmin=None, vmax=None,
                   space_scale: int = 8, time_scale: int = 1) -> np.ndarray:
    """Rasterize (snapshots, n) trajectory values as an RGB image.

    Rows are space (grid index 0 at the bottom), columns are time. Each
    grid cell becomes space_scale x time_scale pixels.
    """
    V = np.asarray(values, dtype=float)
    if V.ndim != 2:
        raise ValueError(f"expected (snapshots, n) array, got {V.shape}")
    finite = V[np.isfinite(V)]
    lo = float(finite.min()) if vmin is None and finite.size else (vmin or 0.0)
    hi = float(finite.max()) if vmax is None and finite.size else (vmax or 1.0)
    if hi <= lo:
        hi = lo + 1.0
    norm = (np.nan_to_num(V, nan=lo, posinf=hi, neginf=lo) - lo) / (hi - lo)
    img = colormap(norm.T[::-1])  # (n, S, 3): space rows, time columns
    img = np.repeat(img, max(1, space_scale), axis=0)
    img = np.repeat(img, max(1, time_scale), axis=1)
    return img


def save_heatmap(values: np.ndarray, path, vmin=None, vmax=None,
                 space_scale: int = 8, time_scale: int = 1):
    write_png(path, render_heatmap(values, vmin, vmax, space_scale, time_scale))


def render_curves(series, width: int = 640, height: int = 480,
                  log_y: bool = True) -> np.ndarray:
    """Plot one polyline per (xs, ys) pair on a white canvas.

    A minimal, deterministic chart (no text); axis ranges go in the JSON
    sidecar written next to it.
    """
    img = np.full((height, width, 3), 255, dtype=np.uint8)
    all_x = np.concatenate([np.asarray(xs, dtype=float) for xs, _ in series])
    all_y = np.concatenate([np.asarray(ys, dtype=float) for _, ys in series])
    if log_y:
        all_y = np.log10(np.maximum(all_y, 1e-300))
    x0, x1 = float(all_x.min()), float(all_x.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    margin = 20
    colors = ((31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
              (148, 103, 189), (140, 86, 75))

    def to_px(x, y):
        px = margin + (x - x0) / (x1 - x0) * (width - 1 - 2 * margin)
        py = height - 1 - margin - (y - y0) / (y1 - y0) * (height - 1 - 2 * margin)
        return px, py

    for idx, (xs, ys) in enumerate(series):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if log_y:
            ys = np.log10(np.maximum(ys, 1e-300))
        color = colors[idx % len(colors)]
        pts = [to_px(x, y) for x, y in zip(xs, ys)]
        for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
            steps = int(max(abs(bx - ax), abs(by - ay))) + 1
            for t in np.linspace(0.0, 1.0, steps + 1):
                cx = int(round(ax + (bx - ax) * t))
                cy = int(round(ay + (by - ay) * t))
                img[max(0, cy - 1):cy + 2, max(0, cx - 1):cx + 2] = color
    return img
