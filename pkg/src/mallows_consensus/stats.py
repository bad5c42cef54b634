"""Pairwise precedence statistics and the likelihood they determine."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import log_psi_j
from .perm import FormatError, Permutation, compose, inverse, v_code

EQ_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QMatrix:
    """``q[i, k]`` is the fraction of rankings placing item i before item k.

    ``N`` is the number of rankings summarized, or 0 for a synthetic matrix.
    """

    q: np.ndarray
    N: int = 0

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise ValueError("Q must be a non-empty square matrix")
        check_q(q)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "N", int(self.N))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @classmethod
    def uniform(cls, n: int) -> QMatrix:
        """All off-diagonal entries 1/2 (the fully symmetric matrix)."""
        q = np.full((n, n), 0.5)
        np.fill_diagonal(q, 0.0)
        return cls(q)


def check_q(q: np.ndarray, tol: float = EQ_TOL) -> None:
    """Raise unless ``q + q.T`` is 1 off the diagonal, 0 on it, entries in [0, 1]."""
    n = q.shape[0]
    if np.any(np.abs(np.diag(q)) > tol):
        raise ValueError("Q must have a zero diagonal")
    s = q + q.T
    off = ~np.eye(n, dtype=bool)
    if np.any(np.abs(s[off] - 1.0) > tol):
        raise ValueError("Q[i, k] + Q[k, i] must equal 1 off the diagonal")
    if np.any(q < -tol) or np.any(q > 1 + tol):
        raise ValueError("Q entries must lie in [0, 1]")


def _as_orders(sample) -> np.ndarray:
    if isinstance(sample, np.ndarray):
        orders = np.asarray(sample, dtype=np.int64)
        if orders.ndim != 2:
            raise ValueError("expected a 2-d array of item orders")
        return orders
    sample = list(sample)
    if not sample:
        raise ValueError("empty sample")
    n = sample[0].n
    if any(p.n != n for p in sample):
        raise ValueError("rankings of mixed sizes")
    return np.array([p.order for p in sample], dtype=np.int64)


def q_matrix(sample: Sequence[Permutation] | np.ndarray) -> QMatrix:
    """Empirical precedence matrix of a sample of rankings.

    Accepts Permutations or an ``(N, n)`` array of 0-based item orders.
    """
    orders = _as_orders(sample)
    N, n = orders.shape
    if N == 0:
        raise ValueError("empty sample")
    ranks = np.empty_like(orders)
    ranks[np.arange(N)[:, None], orders] = np.arange(n)[None, :]
    counts = np.zeros((n, n), dtype=np.int64)
    # chunked to bound memory at N * n^2 booleans
    step = max(1, 2_000_000 // (n * n))
    for a in range(0, N, step):
        r = ranks[a:a + step]
        counts += (r[:, :, None] < r[:, None, :]).sum(axis=0)
    return QMatrix(counts / N, N)


def v_bar(Q: QMatrix, pi0: Permutation) -> np.ndarray:
    """Expected V-code of the data relative to ``pi0``.

    Entry j sums ``Q[l, r_j]`` over items l ranked after ``r_j`` in pi0.
    """
    if Q.n != pi0.n:
        raise ValueError(f"size mismatch: {Q.n} != {pi0.n}")
    order = np.asarray(pi0.order)
    m = Q.q[np.ix_(order, order)]
    # m[a, b] = Q[r_a, r_b]; V_j sums rows a > j of column j
    return np.triu(m.T, k=1).sum(axis=1)[:-1]


def v_bar_direct(sample: Sequence[Permutation], pi0: Permutation) -> np.ndarray:
    """Sample average of ``V(pi_i pi0^-1)``; reference for :func:`v_bar`."""
    inv = inverse(pi0)
    codes = np.array([v_code(compose(p, inv)).v for p in sample], dtype=float)
    return codes.mean(axis=0)


def log_likelihood(Q: QMatrix, N: int, theta: Sequence[float], pi0: Permutation) -> float:
    """``-N * sum_j [theta_j Vbar_j + ln psi_j(theta_j)]``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (Q.n - 1,):
        raise ValueError(f"theta must have length {Q.n - 1}")
    if np.any(theta < 0):
        raise ValueError("theta must be non-negative")
    vb = v_bar(Q, pi0)
    n = Q.n
    lp = sum(log_psi_j(t, n - j) for j, t in enumerate(theta))
    return -N * (float(np.dot(theta, vb)) + lp)


def nonneg_theta_center(Q: QMatrix, tol: float = 1e-12) -> Permutation:
    """A center whose every ML theta is non-negative.

    Repeatedly takes the lowest-index remaining column whose sum over the
    remaining rows is at most ``(remaining - 1) / 2``; such a column always
    exists because the remaining entries sum to ``k (k - 1) / 2``.
    """
    remaining = list(range(Q.n))
    order = []
    q = Q.q
    while remaining:
        half = 0.5 * (len(remaining) - 1)
        idx = np.asarray(remaining)
        sums = q[np.ix_(idx, idx)].sum(axis=0)
        pick = next(k for k, s in enumerate(sums) if s <= half + tol)
        order.append(remaining.pop(pick))
    return Permutation(tuple(order))


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def parse_q_csv(lines: Iterable[str], path: str | None = None, first_line: int = 1,
                tol: float = EQ_TOL) -> QMatrix:
    """Parse n rows of n comma-separated values, checking the pair constraints."""
    rows = []
    for lineno, line in enumerate(lines, start=first_line):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append((lineno, [float(x) for x in line.split(",")]))
        except ValueError:
            raise FormatError("non-numeric Q entry", lineno, path) from None
    if not rows:
        raise FormatError("empty Q matrix", path=path)
    n = len(rows)
    for lineno, row in rows:
        if len(row) != n:
            raise FormatError(f"expected {n} columns, got {len(row)}", lineno, path)
    q = np.array([r for _, r in rows])
    for a, (lineno, row) in enumerate(rows):
        if abs(q[a, a]) > tol:
            raise FormatError("diagonal entry must be 0", lineno, path)
        for b in range(n):
            if b != a and abs(q[a, b] + q[b, a] - 1.0) > tol:
                raise FormatError(f"Q[{a + 1},{b + 1}] + Q[{b + 1},{a + 1}] != 1", lineno, path)
            if not -tol <= q[a, b] <= 1 + tol:
                raise FormatError("entries must lie in [0, 1]", lineno, path)
    return QMatrix(q)


def read_q_csv(path: str | Path) -> QMatrix:
    with open(path) as fh:
        return parse_q_csv(fh, str(path))


def format_q_csv(Q: QMatrix) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in Q.q)


def write_q_csv(path: str | Path, Q: QMatrix) -> None:
    Path(path).write_text(format_q_csv(Q))
