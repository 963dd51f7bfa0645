"""Circular window kernels over Z/M.

Shared numpy machinery for "sum/all over {x + d : d in offsets} (mod M)"
computed for every x at once.  Offsets are compressed into maximal runs of
consecutive residues so each run costs one prefix-sum pass.
"""

from __future__ import annotations

import numpy as np


def offset_runs(offsets, modulus: int) -> list[tuple[int, int]]:
    """Maximal runs [lo, hi] of consecutive residues covering offsets mod M.

    Multiplicities are preserved by returning one run per repeat; callers
    pass deduplicated offsets when sets are intended.
    """
    res = sorted(int(o) % modulus for o in offsets)
    runs: list[tuple[int, int]] = []
    for r in res:
        if runs and runs[-1][1] + 1 == r:
            runs[-1] = (runs[-1][0], r)
        else:
            runs.append((r, r))
    return runs


def circular_window_sums(values: np.ndarray, offsets, modulus: int) -> np.ndarray:
    """out[x] = sum(values[(x + d) % M] for d in offsets), for all x."""
    m = modulus
    v = np.asarray(values)
    runs = offset_runs(offsets, m)
    span = max(hi for _, hi in runs) + 1
    ext = np.concatenate([v, v[:span]])
    prefix = np.concatenate([[0], np.cumsum(ext, dtype=np.int64)])
    x = np.arange(m)
    out = np.zeros(m, dtype=np.int64)
    for lo, hi in runs:
        out += prefix[x + hi + 1] - prefix[x + lo]
    return out


def circular_window_all(mask: np.ndarray, offsets, modulus: int) -> np.ndarray:
    """out[x] = all(mask[(x + d) % M] for d in offsets)."""
    offs = [int(o) for o in offsets]
    counts = circular_window_sums(mask.astype(np.int8), offs, modulus)
    return counts == len(offs)
