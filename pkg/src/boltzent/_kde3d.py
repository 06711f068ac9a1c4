"""Compiled product-kernel routines for d > 1.

Kernel codes: 0 Epanechnikov, 1 uniform, 2 Gaussian.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np


@nb.njit(cache=True, inline="always")
def _kernel(u, kernel):
    if kernel == 0:
        return 0.75 * (1.0 - u * u) if abs(u) < 1.0 else 0.0
    if kernel == 1:
        return 0.5 if abs(u) < 1.0 else 0.0
    return math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


@nb.njit(cache=True, inline="always")
def _kernel_cdf(u, kernel):
    # integral of the kernel from -inf to u
    if kernel == 2:
        return 0.5 * math.erfc(-u / math.sqrt(2.0))
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    if kernel == 0:
        return 0.5 + 0.75 * (u - u * u * u / 3.0)
    return 0.5 * (u + 1.0)


@nb.njit(cache=True, fastmath=True)
def _scatter7(grid, wts, first, dims):
    # compact kernels at step h/3 touch exactly 7 cells per axis
    for a in range(7):
        wa = wts[0, a]
        for b in range(7):
            wab = wa * wts[1, b]
            base = ((first[0] + a) * dims[1] + first[1] + b) * dims[2] + first[2]
            for c in range(7):
                grid[base + c] += wab * wts[2, c]


@nb.njit(cache=True)
def _scatter(grid, wts, first, count, dims):
    for a in range(count[0]):
        wa = wts[0, a]
        if wa == 0.0:
            continue
        base_a = (first[0] + a) * dims[1]
        for b in range(count[1]):
            wab = wa * wts[1, b]
            if wab == 0.0:
                continue
            base = (base_a + first[1] + b) * dims[2] + first[2]
            for c in range(count[2]):
                grid[base + c] += wab * wts[2, c]


@nb.njit(cache=True)
def grid_entropy(pts, h, kernel, reach, lo, step, dims):
    """Entropy and mass of the estimate averaged over the cells of a dense grid.

    Cell ``k`` along axis ``j`` is ``[lo_j + k*step, lo_j + (k+1)*step)``.
    Each point deposits the exact integral of its kernel over every cell it
    touches, so the discrete density keeps unit mass per point.  The grid
    must extend at least ``reach*h`` plus one cell beyond the data.
    """
    n, d = pts.shape
    grid = np.zeros(dims[0] * dims[1] * dims[2])
    width = int(math.ceil(2.0 * reach * h / step)) + 2
    wts = np.zeros((3, max(width, 7)))
    first = np.zeros(3, dtype=np.int64)
    count = np.ones(3, dtype=np.int64)
    fixed = d == 3 and kernel != 2 and abs(step * 3.0 - h) <= 1e-12 * h
    if d == 2:
        # planar data: a single dummy layer along the third axis
        wts[2, 0] = 1.0
    for i in range(n):
        for j in range(d):
            x = pts[i, j]
            k0 = int(math.floor((x - reach * h - lo[j]) / step))
            k1 = k0 + 6 if fixed else int(math.floor((x + reach * h - lo[j]) / step))
            if k0 < 0:
                k0 = 0
            if k1 > dims[j] - 1:
                k1 = dims[j] - 1
            first[j] = k0
            count[j] = k1 - k0 + 1
            prev = _kernel_cdf((lo[j] + k0 * step - x) / h, kernel)
            for k in range(k0, k1 + 1):
                cur = _kernel_cdf((lo[j] + (k + 1) * step - x) / h, kernel)
                wts[j, k - k0] = (cur - prev) / step
                prev = cur
        if fixed and count[0] == 7 and count[1] == 7 and count[2] == 7:
            _scatter7(grid, wts, first, dims)
        else:
            _scatter(grid, wts, first, count, dims)
    vol = step ** d
    ent = 0.0
    comp = 0.0
    mass = 0.0
    for k in range(grid.size):
        f = grid[k]
        if f > 0.0:
            f /= n
            # compensated accumulation of -f ln f
            term = -f * math.log(f) * vol - comp
            t = ent + term
            comp = (t - ent) - term
            ent = t
            mass += f * vol
    return ent, mass


@nb.njit(cache=True)
def build_cells(pts, cell):
    """Sort points into cubic cells of side ``cell``.

    Returns the point order, the sorted unique cell keys, the start offset of
    each key in the ordered points, the integer lower corner and the span
    used to fold coordinates into keys.
    """
    n, d = pts.shape
    corner = np.empty(d)
    for j in range(d):
        corner[j] = pts[:, j].min()
    coords = np.empty((n, d), dtype=np.int64)
    span = np.ones(d, dtype=np.int64)
    for j in range(d):
        mx = 0
        for i in range(n):
            c = int(math.floor((pts[i, j] - corner[j]) / cell))
            coords[i, j] = c
            if c > mx:
                mx = c
        # one spare cell on each side so neighbour keys never wrap
        span[j] = mx + 3
    keys = np.empty(n, dtype=np.int64)
    for i in range(n):
        k = 0
        for j in range(d):
            k = k * span[j] + coords[i, j] + 1
        keys[i] = k
    order = np.argsort(keys, kind="mergesort")
    skeys = keys[order]
    nuniq = 1
    for i in range(1, n):
        if skeys[i] != skeys[i - 1]:
            nuniq += 1
    ukeys = np.empty(nuniq, dtype=np.int64)
    starts = np.empty(nuniq + 1, dtype=np.int64)
    ukeys[0] = skeys[0]
    starts[0] = 0
    u = 1
    for i in range(1, n):
        if skeys[i] != skeys[i - 1]:
            ukeys[u] = skeys[i]
            starts[u] = i
            u += 1
    starts[nuniq] = n
    return order, ukeys, starts, corner, span


@nb.njit(cache=True)
def cell_density(pts, order, ukeys, starts, corner, span, cell, offsets,
                 h, kernel, reach, queries, exclude_self):
    """Product-kernel density at each query using the neighbouring cells only."""
    n, d = pts.shape
    out = np.empty(queries.shape[0])
    qc = np.empty(d, dtype=np.int64)
    k_self = _kernel(0.0, kernel) ** d
    for q in range(queries.shape[0]):
        inside = True
        for j in range(d):
            c = int(math.floor((queries[q, j] - corner[j]) / cell))
            # queries outside the occupied cell range see no points
            if c < -1 or c > span[j] - 2:
                inside = False
            qc[j] = c
        acc = 0.0
        if inside:
            for o in range(offsets.shape[0]):
                key = 0
                ok = True
                for j in range(d):
                    c = qc[j] + offsets[o, j] + 1
                    if c < 0 or c >= span[j]:
                        ok = False
                    key = key * span[j] + c
                if not ok:
                    continue
                pos = np.searchsorted(ukeys, key)
                if pos >= ukeys.size or ukeys[pos] != key:
                    continue
                for t in range(starts[pos], starts[pos + 1]):
                    i = order[t]
                    w = 1.0
                    for j in range(d):
                        u = (queries[q, j] - pts[i, j]) / h
                        if abs(u) >= reach:
                            w = 0.0
                            break
                        w *= _kernel(u, kernel)
                    acc += w
        if exclude_self:
            out[q] = (acc - k_self) / ((n - 1) * h ** d)
        else:
            out[q] = acc / (n * h ** d)
    return out


@nb.njit(cache=True)
def brute_density(pts, h, kernel, queries):
    n, d = pts.shape
    out = np.empty(queries.shape[0])
    for q in range(queries.shape[0]):
        acc = 0.0
        for i in range(n):
            w = 1.0
            for j in range(d):
                w *= _kernel((queries[q, j] - pts[i, j]) / h, kernel)
            acc += w
        out[q] = acc / (n * h ** d)
    return out
