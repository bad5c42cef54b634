"""Permutations, V-codes (inversion tables) and Kendall-type distances.

Items are 0-based internally. A :class:`Permutation` is stored by its item
order (most preferred first); the rank-of-item view is derived once at
construction. Text I/O uses 1-based item ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations as _itertools_permutations
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class FormatError(ValueError):
    """A malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass(frozen=True)
class Permutation:
    """A ranking of ``n`` items.

    ``order[k]`` is the item at rank ``k`` and ``ranks[i]`` is the rank of
    item ``i``; both are 0-based.
    """

    order: tuple[int, ...]
    ranks: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        order = tuple(int(x) for x in self.order)
        n = len(order)
        if n == 0:
            raise ValueError("a permutation needs at least one item")
        ranks = [-1] * n
        for k, item in enumerate(order):
            if not 0 <= item < n or ranks[item] != -1:
                raise ValueError(f"not a permutation of 0..{n - 1}: {order}")
            ranks[item] = k
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "ranks", tuple(ranks))

    @classmethod
    def identity(cls, n: int) -> Permutation:
        return cls(tuple(range(n)))

    @classmethod
    def from_ranks(cls, ranks: Sequence[int]) -> Permutation:
        """Build from the rank-of-item view (``ranks[i]`` = rank of item i)."""
        order = [0] * len(ranks)
        for item, k in enumerate(ranks):
            order[int(k)] = item
        return cls(tuple(order))

    @classmethod
    def from_items(cls, items: Iterable[int]) -> Permutation:
        """Build from 1-based item ids listed in preference order."""
        return cls(tuple(int(x) - 1 for x in items))

    @property
    def n(self) -> int:
        return len(self.order)

    def to_items(self) -> list[int]:
        """1-based item ids in preference order."""
        return [x + 1 for x in self.order]

    def __len__(self) -> int:
        return len(self.order)

    def __str__(self) -> str:
        return " ".join(str(x) for x in self.to_items())


@dataclass(frozen=True)
class VCode:
    """Inversion table ``v`` of length ``n - 1``.

    ``v[i]`` counts the items larger than ``i`` placed before ``i``; it lies in
    ``0..n-1-i`` (0-based ``i``).
    """

    v: tuple[int, ...]

    def __post_init__(self):
        v = tuple(int(x) for x in self.v)
        n = len(v) + 1
        for i, x in enumerate(v):
            if not 0 <= x <= n - 1 - i:
                raise ValueError(f"V-code entry {i} = {x} outside 0..{n - 1 - i}")
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return len(self.v) + 1

    def __iter__(self) -> Iterator[int]:
        return iter(self.v)

    def __len__(self) -> int:
        return len(self.v)


def _check_sizes(p: Permutation, q: Permutation) -> None:
    if p.n != q.n:
        raise ValueError(f"size mismatch: {p.n} != {q.n}")


def all_permutations(n: int) -> Iterator[Permutation]:
    """All ``n!`` permutations in lexicographic item-order."""
    for order in _itertools_permutations(range(n)):
        yield Permutation(order)


def kendall_distance(p: Permutation, q: Permutation) -> int:
    """Number of item pairs ordered differently by ``p`` and ``q``."""
    _check_sizes(p, q)
    # relabel q's order through p's ranks and count inversions
    seq = [p.ranks[item] for item in q.order]
    count = 0
    for a in range(len(seq)):
        sa = seq[a]
        for b in range(a + 1, len(seq)):
            if sa > seq[b]:
                count += 1
    return count


def v_code(p: Permutation) -> VCode:
    n = p.n
    v = [0] * (n - 1)
    placed: list[int] = []
    for item in p.order:
        if item < n - 1:
            v[item] = sum(1 for other in placed if other > item)
        placed.append(item)
    return VCode(tuple(v))


def decode_v(code: VCode | Sequence[int]) -> Permutation:
    """Inverse of :func:`v_code`, by insertion from the largest item down."""
    if not isinstance(code, VCode):
        code = VCode(tuple(code))
    n = code.n
    order = [n - 1]
    for item in range(n - 2, -1, -1):
        # every item already placed is larger than ``item``
        order.insert(code.v[item], item)
    return Permutation(tuple(order))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Function composition on ranks: ``(p q)(i) = p(q(i))``."""
    _check_sizes(p, q)
    return Permutation.from_ranks([p.ranks[q.ranks[i]] for i in range(p.n)])


def inverse(p: Permutation) -> Permutation:
    return Permutation.from_ranks(p.order)


def generalized_distance(p: Permutation, p0: Permutation, theta: Sequence[float]) -> float:
    """Sum of ``theta[j] * V_j(p p0^-1)``; Kendall distance when theta is all ones."""
    _check_sizes(p, p0)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (p.n - 1,):
        raise ValueError(f"theta must have length {p.n - 1}")
    if np.any(theta < 0):
        raise ValueError("theta must be non-negative")
    v = v_code(compose(p, inverse(p0))).v
    return float(np.dot(theta, v)) if v else 0.0


def q_of_perm(p: Permutation) -> np.ndarray:
    """0/1 precedence matrix: entry (i, k) is 1 when i is ranked before k."""
    r = np.asarray(p.ranks)
    return (r[:, None] < r[None, :]).astype(float)


# ---------------------------------------------------------------------------
# Rankings text format
# ---------------------------------------------------------------------------

def parse_rankings(lines: Iterable[str], path: str | None = None) -> list[Permutation]:
    """Parse one ranking per line (1-based ids, most preferred first).

    Blank lines and lines starting with ``#`` are skipped.
    """
    out = []
    n = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            items = [int(tok) for tok in line.split()]
        except ValueError:
            raise FormatError("non-integer item id", lineno, path) from None
        if n is None:
            n = len(items)
        elif len(items) != n:
            raise FormatError(f"expected {n} items, got {len(items)}", lineno, path)
        if sorted(items) != list(range(1, n + 1)):
            raise FormatError(f"not a permutation of 1..{n}", lineno, path)
        out.append(Permutation.from_items(items))
    return out


def read_rankings(path: str | Path) -> list[Permutation]:
    with open(path) as fh:
        rankings = parse_rankings(fh, str(path))
    if not rankings:
        raise FormatError("no rankings found", path=str(path))
    return rankings


def format_rankings(rankings: Iterable[Permutation]) -> str:
    return "".join(f"{p}\n" for p in rankings)


def write_rankings(path: str | Path, rankings: Iterable[Permutation]) -> None:
    Path(path).write_text(format_rankings(rankings))
