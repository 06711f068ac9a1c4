"""Compiled cell counting for multidimensional histogram entropy sweeps."""

import math

import numba as nb
import numpy as np


@nb.njit(cache=True)
def count_log_sum(data, origin, bin_width):
    """``sum_c n_c ln n_c`` over occupied cells of side ``bin_width``."""
    n, d = data.shape
    idx = np.empty((n, d), dtype=np.int64)
    span = np.zeros(d, dtype=np.int64)
    for i in range(n):
        for j in range(d):
            k = int(math.floor((data[i, j] - origin[j]) / bin_width))
            idx[i, j] = k
            if k + 1 > span[j]:
                span[j] = k + 1
    total = 1.0
    for j in range(d):
        total *= span[j]
    keys = np.empty(n, dtype=np.int64)
    if total < 2.0**62:
        for i in range(n):
            key = idx[i, 0]
            for j in range(1, d):
                key = key * span[j] + idx[i, j]
            keys[i] = key
    else:
        # lattice too large to fold exactly: sort rows lexicographically instead
        order = np.argsort(idx[:, d - 1], kind="mergesort")
        for j in range(d - 2, -1, -1):
            col = idx[order, j]
            order = order[np.argsort(col, kind="mergesort")]
        acc = 0.0
        run = 1
        for t in range(1, n + 1):
            same = t < n
            if same:
                for j in range(d):
                    if idx[order[t], j] != idx[order[t - 1], j]:
                        same = False
                        break
            if same:
                run += 1
            else:
                acc += run * math.log(run)
                run = 1
        return acc
    acc = 0.0
    if total <= 4.0 * n + 2.0**20:
        counts = np.zeros(int(total), dtype=np.int64)
        for i in range(n):
            counts[keys[i]] += 1
        for c in counts:
            if c > 1:
                acc += c * math.log(c)
        return acc
    # sparse lattice: open-addressing hash count, linear probing
    size = 1
    while size < 2 * n:
        size *= 2
    mask = size - 1
    table = np.full(size, -1, dtype=np.int64)
    counts = np.zeros(size, dtype=np.int64)
    for i in range(n):
        key = keys[i]
        slot = (key * 0x9E3779B97F4A7C15) & mask
        while table[slot] != -1 and table[slot] != key:
            slot = (slot + 1) & mask
        table[slot] = key
        counts[slot] += 1
    for c in counts:
        if c > 1:
            acc += c * math.log(c)
    return acc
