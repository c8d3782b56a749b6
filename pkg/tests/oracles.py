"""Independent reference computations shared by several test modules."""

import itertools

import numpy as np


def brute_force_isotonic(y, lo, hi, w=None):
    """Exhaustive minimizer of sum w (x - y)^2 over lo <= x_1 <= ... <= x_n <= hi.

    The search runs over every nondecreasing vector whose entries are drawn
    from a finite candidate set that provably contains the optimum: the
    bounds and the clamped weighted means of all contiguous blocks of y.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if n == 0:
        return y.copy()
    cands = {lo, hi}
    for a in range(n):
        for b in range(a + 1, n + 1):
            m = np.dot(w[a:b], y[a:b]) / w[a:b].sum()
            cands.add(float(min(max(m, lo), hi)))
    grid = np.array(sorted(cands))
    best, best_x = np.inf, None
    combos = np.array(list(itertools.combinations_with_replacement(range(len(grid)), n)))
    X = grid[combos]
    cost = ((X - y) ** 2 * w).sum(axis=1)
    k = int(np.argmin(cost))
    best, best_x = cost[k], X[k]
    return best_x


def grid_isotonic(y, lo, hi, step):
    """Best nondecreasing vector on the grid lo, lo + step, ..., hi (plain search)."""
    levels = np.arange(lo, hi + step / 2, step)
    combos = np.array(list(itertools.combinations_with_replacement(range(len(levels)), len(y))))
    X = levels[combos]
    cost = ((X - np.asarray(y)) ** 2).sum(axis=1)
    return X[int(np.argmin(cost))], float(cost.min())
