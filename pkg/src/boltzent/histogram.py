"""Uniform-cell histograms in one or more dimensions and their plug-in entropy.

Counts are stored sparsely: ``indices`` holds the occupied integer cell
coordinates (one row per cell, lexicographically sorted) and ``counts`` the
matching occupancies.  The bin lattice is anchored at the componentwise
sample minimum, which makes the entropy exactly translation invariant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _histnd
from .distributions import Sample
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class HistogramEstimate:
    bin_width: float
    origin: np.ndarray
    indices: np.ndarray  # (m, d) int64, sorted, unique
    counts: np.ndarray  # (m,) int64, all > 0
    n: int
    dim: int

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(i) for i in idx): int(c) for idx, c in zip(self.indices, self.counts)}

    def density(self) -> np.ndarray:
        """Per occupied cell density ``n_c / (N * dv^d)``."""
        return self.counts / (self.n * self.bin_width**self.dim)


def _as_array(sample) -> np.ndarray:
    data = sample.data if isinstance(sample, Sample) else np.asarray(sample, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] == 0:
        raise InvalidArgumentError("sample must be a nonempty N x d array")
    return data


def _merge_cells(idx: np.ndarray, weights: np.ndarray | None = None):
    """Collapse duplicate cell rows into (unique rows, summed counts)."""
    if idx.shape[1] == 1:
        keys = idx[:, 0]
        order = None
        if np.any(keys[1:] < keys[:-1]):
            order = np.argsort(keys, kind="stable")
            keys = keys[order]
        brk = np.flatnonzero(keys[1:] != keys[:-1]) + 1
        starts = np.concatenate(([0], brk))
        if weights is None:
            counts = np.diff(np.concatenate((starts, [keys.size])))
        else:
            w = weights if order is None else weights[order]
            counts = np.add.reduceat(w, starts)
        return keys[starts][:, None], counts.astype(np.int64)
    uniq, inv = np.unique(idx, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    if weights is None:
        counts = np.bincount(inv, minlength=uniq.shape[0])
    else:
        counts = np.bincount(inv, weights=weights, minlength=uniq.shape[0])
    return uniq, counts.astype(np.int64)


def _merge_cells_nd(idx: np.ndarray):
    # fold d integer coordinates into one int64 key; cheaper than unique(axis=0)
    span = idx.max(axis=0) + 1
    if float(np.prod(span.astype(float))) >= 2.0**62:
        return _merge_cells(idx)
    key = idx[:, 0].copy()
    for j in range(1, idx.shape[1]):
        key *= span[j]
        key += idx[:, j]
    total = int(np.prod(span.astype(float)))
    if total <= 4 * key.size + 2**20:
        # small lattice: dense counting beats sorting
        dense = np.bincount(key, minlength=total)
        ukey = np.flatnonzero(dense)
        counts = dense[ukey]
    else:
        key.sort()
        brk = np.flatnonzero(key[1:] != key[:-1]) + 1
        starts = np.concatenate(([0], brk))
        counts = np.diff(np.concatenate((starts, [key.size])))
        ukey = key[starts]
    out = np.empty((ukey.size, idx.shape[1]), dtype=np.int64)
    for j in range(idx.shape[1] - 1, -1, -1):
        out[:, j] = ukey % span[j]
        ukey = ukey // span[j]
    return out, counts.astype(np.int64)


def build_histogram(sample, bin_width: float, origin=None) -> HistogramEstimate:
    """Count points per cell ``floor((x - origin) / bin_width)``.

    ``origin`` defaults to the componentwise sample minimum.  Passing an
    explicit origin is only meant for anchoring-sensitivity studies.
    """
    if not (bin_width > 0) or not math.isfinite(bin_width):
        raise InvalidArgumentError(f"bin_width must be positive and finite, got {bin_width}")
    data = _as_array(sample)
    n, d = data.shape
    origin = data.min(axis=0) if origin is None else np.asarray(origin, dtype=float).reshape(d)
    idx = np.floor((data - origin) / bin_width).astype(np.int64)
    if d == 1:
        indices, counts = _merge_cells(idx)
    else:
        shift = idx.min(axis=0)
        indices, counts = _merge_cells_nd(idx - shift)
        indices += shift
    return HistogramEstimate(float(bin_width), origin.copy(), indices, counts, n, d)


def histogram_entropy(h: HistogramEstimate) -> float:
    """``-sum_c (n_c/N) ln(n_c / (N dv^d))`` over occupied cells."""
    c = h.counts.astype(float)
    # ln(N dv^d) - (1/N) sum n_c ln n_c, the same sum regrouped
    return math.log(h.n) + h.dim * math.log(h.bin_width) - float(np.dot(c, np.log(c))) / h.n


def coarsen(h: HistogramEstimate, factor: int) -> HistogramEstimate:
    """Merge ``factor**d`` neighbouring cells; the origin is kept."""
    if int(factor) != factor or factor < 2:
        raise InvalidArgumentError(f"coarsening factor must be an integer >= 2, got {factor}")
    factor = int(factor)
    idx = np.floor_divide(h.indices, factor)
    indices, counts = _merge_cells(idx, h.counts)
    return HistogramEstimate(h.bin_width * factor, h.origin.copy(), indices, counts, h.n, h.dim)


def sorted_histogram_entropy_1d(sorted_x: np.ndarray, bin_width: float) -> float:
    """Entropy of a 1D histogram from presorted data without building the estimate.

    Identical to ``histogram_entropy(build_histogram(x, bin_width))``; used by
    the curve sweeps where the same sample is binned at many widths.
    """
    n = sorted_x.size
    idx = np.floor((sorted_x - sorted_x[0]) / bin_width).astype(np.int64)
    brk = np.flatnonzero(idx[1:] != idx[:-1]) + 1
    counts = np.diff(np.concatenate(([0], brk, [n]))).astype(float)
    return math.log(n) + math.log(bin_width) - float(np.dot(counts, np.log(counts))) / n


def histogram_entropy_nd(data: np.ndarray, bin_width: float) -> float:
    """Entropy of a d-dimensional histogram anchored at the sample minimum.

    Same value as ``histogram_entropy(build_histogram(data, bin_width))``
    without materialising the cells; used by the curve sweeps.
    """
    data = np.ascontiguousarray(data, dtype=float)
    n, d = data.shape
    s = _histnd.count_log_sum(data, data.min(axis=0), float(bin_width))
    return math.log(n) + d * math.log(bin_width) - s / n


def dump_histogram(h: HistogramEstimate, csv_path) -> None:
    """Write cell counts to CSV and a JSON header next to it (debugging aid)."""
    csv_path = Path(csv_path)
    cols = [f"i{j}" for j in range(h.dim)]
    rows = np.column_stack((h.indices, h.counts))
    np.savetxt(csv_path, rows, fmt="%d", delimiter=",", header=",".join(cols + ["count"]), comments="")
    meta = {"bin_width": h.bin_width, "origin": h.origin.tolist(), "n": h.n, "dim": h.dim}
    csv_path.with_suffix(".json").write_text(json.dumps(meta, indent=2))
