"""Tiny raster plots (trace, histogram, autocorrelation) as 16-bit gray arrays.

Plots are white-on-black: background 0, ink 65535.
"""

from __future__ import annotations

import numpy as np

INK = 65535


def _rows(values, lo, hi, height):
    if hi <= lo:
        return np.full(np.shape(values), (height - 1) // 2, dtype=np.int64)
    frac = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)
    return np.clip(np.rint((1.0 - frac) * (height - 1)), 0, height - 1).astype(np.int64)


def trace_plot(values, width: int = 400, height: int = 120) -> np.ndarray:
    """Series against iteration, resampled to `width` columns, auto-scaled."""
    values = np.asarray(values, dtype=np.float64)
    img = np.zeros((height, width), dtype=np.int64)
    if values.size == 0:
        return img
    cols = np.arange(width)
    idx = np.minimum((cols * values.size) // width, values.size - 1)
    rows = _rows(values[idx], values.min(), values.max(), height)
    for x in range(width):
        r0 = rows[x]
        r1 = rows[x - 1] if x > 0 else r0
        img[min(r0, r1): max(r0, r1) + 1, x] = INK
    return img


def histogram_plot(values, bins: int = 40, width: int = 400, height: int = 120) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    img = np.zeros((height, width), dtype=np.int64)
    if values.size == 0:
        return img
    counts, _ = np.histogram(values, bins=bins)
    tops = _rows(counts, 0, counts.max(), height)
    edges = np.linspace(0, width, bins + 1).astype(np.int64)
    for k in range(bins):
        if counts[k] > 0:
            img[tops[k]:, edges[k]:edges[k + 1]] = INK
    return img


def acf_plot(acf, col_width: int = 4, height: int = 121) -> np.ndarray:
    """Stem plot on a fixed [-1, 1] axis; lag k occupies columns ``k*col_width`` onwards.

    Row 0 corresponds to an autocorrelation of 1.0, the middle row to 0.
    """
    acf = np.asarray(acf, dtype=np.float64)
    img = np.zeros((height, acf.size * col_width), dtype=np.int64)
    zero = _rows([0.0], -1.0, 1.0, height)[0]
    rows = _rows(acf, -1.0, 1.0, height)
    for k, r in enumerate(rows):
        img[min(r, zero): max(r, zero) + 1, k * col_width: k * col_width + col_width - 1] = INK
    return img
