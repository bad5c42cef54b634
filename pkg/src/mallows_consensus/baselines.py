"""Fast consensus heuristics: average-rank sort, greedy descent, random pivot."""

from __future__ import annotations

import numpy as np

from .perm import Permutation
from .search import Mode, greedy_descent
from .stats import QMatrix


def fv(Q: QMatrix) -> Permutation:
    """Sort items by column sum of Q (average rank minus one), ascending.

    No local search around the sorted order; O(n^2).
    """
    qbar = Q.q.sum(axis=0)
    return Permutation(tuple(int(i) for i in np.argsort(qbar, kind="stable")))


def css_greedy(Q: QMatrix) -> Permutation:
    """Greedy descent of the search tree: at each level take the unused item
    with the smallest remaining column sum."""
    return greedy_descent(Q, Mode.constant()).pi0


def acn_pivot(Q: QMatrix, seed: int | np.random.Generator | None = None) -> Permutation:
    """Randomized pivot ordering.

    A uniformly chosen pivot splits the remaining items: ``l`` goes before
    the pivot when ``Q[l, pivot] > 1/2``, otherwise after (ties go after).
    Both sides are ordered recursively.
    """
    rng = np.random.default_rng(seed)
    q = Q.q
    out: list[int] = []
    # explicit stack keeps deep recursions off the interpreter stack
    stack: list[list[int] | int] = [list(range(Q.n))]
    while stack:
        top = stack.pop()
        if isinstance(top, int):
            out.append(top)
            continue
        if len(top) <= 1:
            out.extend(top)
            continue
        pivot = top[int(rng.integers(len(top)))]
        left = [l for l in top if l != pivot and q[l, pivot] > 0.5]
        right = [l for l in top if l != pivot and not q[l, pivot] > 0.5]
        stack.append(right)
        stack.append(pivot)
        stack.append(left)
    return Permutation(tuple(out))
