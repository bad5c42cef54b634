"""Best-first search for the central ranking (and optionally theta).

Nodes are prefixes ``(r_1, ..., r_j)`` of the central ranking's item order.
The per-level statistic ``V_j`` of a prefix is the sum of ``Q[l, r_j]`` over
items ``l`` not yet placed; a node's cost is ``sum_l theta_l V_l``. Children
get their ``V`` in O(1) from the ``V`` of the parent's sibling (the "uncle")
minus one ``Q`` entry, so each expanding node hands its table of child
``V`` values down to its children.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .model import THETA_CAP, ThetaTable, _log_psi_array, _solve_theta_array, default_theta_table, log_psi_j, solve_theta
from .perm import Permutation
from .stats import QMatrix, v_bar

HEURISTICS = ("zero", "known_theta", "constant_theta")
BOUNDS = ("child", "parent")
BRUTE_FORCE_MAX_N = 10


@dataclass(frozen=True)
class Mode:
    """What the search optimizes.

    ``known``: fixed theta vector. ``constant``: theta identically 1, i.e. the
    Kemeny consensus ranking. ``joint``: theta re-estimated at every node from
    that node's ``V``. With ``full_nll`` (the default for :meth:`joint`) each
    level also pays ``ln psi_j(theta_j)``, making the cost the per-sample
    negative log-likelihood; without it the cost is ``sum theta_j V_j`` alone,
    which is minimized by centers whose levels all sit at the uniform mean
    (theta clamps to 0 there) and so is not an ML criterion.
    """

    kind: str
    theta: tuple[float, ...] | None = None
    full_nll: bool = True
    table: ThetaTable | None = field(default=None, compare=False)
    exact: bool = False
    theta_cap: float = THETA_CAP

    def __post_init__(self):
        if self.kind not in ("known", "constant", "joint"):
            raise ValueError(f"unknown mode {self.kind!r}")
        if self.kind == "known":
            if self.theta is None:
                raise ValueError("known mode needs a theta vector")
            theta = tuple(float(t) for t in self.theta)
            if any(not math.isfinite(t) or t < 0 for t in theta):
                raise ValueError("theta must be finite and non-negative")
            object.__setattr__(self, "theta", theta)
        elif self.theta is not None:
            raise ValueError(f"{self.kind} mode takes no theta")

    @classmethod
    def known(cls, theta: Sequence[float]) -> Mode:
        return cls("known", tuple(theta))

    @classmethod
    def constant(cls) -> Mode:
        return cls("constant")

    @classmethod
    def joint(cls, full_nll: bool = True, table: ThetaTable | None = None, exact: bool = False,
              theta_cap: float = THETA_CAP) -> Mode:
        return cls("joint", None, full_nll, table, exact, theta_cap)

    @property
    def name(self) -> str:
        return self.kind

    def theta_vector(self, n: int) -> np.ndarray | None:
        """Fixed theta for known/constant modes, ``None`` in joint mode."""
        if self.kind == "known":
            if len(self.theta) != n - 1:
                raise ValueError(f"theta has length {len(self.theta)}, expected {n - 1}")
            return np.asarray(self.theta)
        if self.kind == "constant":
            return np.ones(n - 1)
        return None

    def estimator(self, n: int) -> Callable[[float, int], float]:
        """Scalar ``(v, m) -> theta`` used in joint mode."""
        if self.exact:
            cap = self.theta_cap
            return lambda v, m: solve_theta(min(max(v, 0.0), m - 1), m, cap)
        table = self.table if self.table is not None else default_theta_table(n)
        if table.m_max < n:
            raise ValueError(f"theta table covers m <= {table.m_max}, need {n}")
        return table.lookup

    def estimator_array(self, n: int) -> Callable[[np.ndarray, int], np.ndarray]:
        if self.exact:
            cap = self.theta_cap
            return lambda v, m: _solve_theta_array(np.clip(v, 0.0, m - 1), m, cap)
        table = self.table if self.table is not None else default_theta_table(n)
        return table.lookup_array


class SearchNode(NamedTuple):
    """A prefix of the central ranking with its search bookkeeping.

    ``uncle`` maps each item that may follow ``prefix[:-1]`` to the ``V`` it
    would have there; the table is shared by all siblings.
    """

    prefix: tuple[int, ...]
    level: int
    v: float
    theta: float
    cost: float
    bound: float
    uncle: dict | None


@dataclass
class SearchResult:
    pi0: Permutation
    theta: tuple[float, ...]
    cost: float
    nodes_expanded: int
    nodes_created: int
    optimal: bool
    q_reads: int = 0
    max_level: int = 0
    frontier: list = field(default_factory=list, repr=False)
    wall_time: float = 0.0

    def record(self, **extra) -> dict:
        """Flat statistics record for CSV/JSON output (1-based pi0)."""
        rec = {
            "cost": self.cost,
            "nodes_expanded": self.nodes_expanded,
            "nodes_created": self.nodes_created,
            "wall_time": self.wall_time,
            "optimal": self.optimal,
            "pi0": str(self.pi0),
        }
        rec.update(extra)
        return rec


# ---------------------------------------------------------------------------
# Objective evaluation
# ---------------------------------------------------------------------------

def level_costs(vb: np.ndarray, mode: Mode, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-level theta and cost for a V-bar vector (length n-1)."""
    fixed = mode.theta_vector(n)
    if fixed is not None:
        return fixed, fixed * vb
    est = mode.estimator(n)
    theta = np.array([est(float(v), n - j) for j, v in enumerate(vb)])
    cost = theta * vb
    if mode.full_nll:
        cost = cost + np.array([log_psi_j(t, n - j) for j, t in enumerate(theta)])
    return theta, cost


def objective(Q: QMatrix, pi0: Permutation, mode: Mode) -> tuple[float, np.ndarray]:
    """Cost of ``pi0`` under ``mode`` computed from scratch, and its theta."""
    vb = v_bar(Q, pi0)
    theta, cost = level_costs(vb, mode, Q.n)
    return float(cost.sum()), theta


# ---------------------------------------------------------------------------
# Heuristics
# ---------------------------------------------------------------------------

def heuristic_zero(node=None) -> float:
    return 0.0


def heuristic_known_theta(level: int, v_min: float, theta: Sequence[float], q_max: float) -> float:
    """Lower bound on the cost to go below a node at ``level``.

    ``v_min`` is the smallest ``V`` among the node's children; any later
    level ``j'`` loses at most ``q_max`` per item placed since, so
    ``V_j' >= max(v_min - (j' - level) q_max, 0)``.
    """
    n = len(theta) + 1
    total = 0.0
    for jp in range(level + 1, n):
        a = v_min - (jp - level) * q_max
        if a <= 0:
            break
        total += theta[jp - 1] * a
    return total


def pairwise_min_sorted(Q: QMatrix) -> np.ndarray:
    """Ascending ``min(Q[i,k], Q[k,i])`` over the n(n-1)/2 unordered pairs."""
    iu = np.triu_indices(Q.n, k=1)
    return np.sort(np.minimum(Q.q[iu], Q.q.T[iu]))


def constant_theta_table(sorted_q: np.ndarray, n: int) -> np.ndarray:
    """``h[j]`` = sum of the ``(n-j-1)(n-j)/2`` smallest pair values, j = 0..n."""
    prefix = np.concatenate([[0.0], np.cumsum(sorted_q)])
    h = np.zeros(n + 1)
    for j in range(n):
        h[j] = prefix[(n - j - 1) * (n - j) // 2]
    return h


def heuristic_constant_theta(level: int, sorted_q: np.ndarray, n: int) -> float:
    """Cost-to-go bound for theta = 1: each pair contributes at most once below ``level``."""
    k = max(n - level - 1, 0) * (n - level) // 2
    return float(np.sum(sorted_q[:k]))


def check_heuristic(mode: Mode, heuristic: str, n: int) -> None:
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    if heuristic == "zero":
        return
    if mode.kind == "joint":
        raise ValueError("joint mode only supports the zero heuristic")
    if heuristic == "constant_theta":
        theta = mode.theta_vector(n)
        if len(theta) and np.ptp(theta) > 0:
            raise ValueError("constant_theta heuristic needs a constant theta")


# ---------------------------------------------------------------------------
# The search
# ---------------------------------------------------------------------------

class _Searcher:
    def __init__(self, Q: QMatrix, mode: Mode, heuristic: str = "zero", bound: str = "child"):
        if bound not in BOUNDS:
            raise ValueError(f"bound must be one of {BOUNDS}")
        n = Q.n
        check_heuristic(mode, heuristic, n)
        self.Q = Q
        self.n = n
        self.mode = mode
        self.heuristic = heuristic
        self.bound = bound
        self.q = Q.q.tolist()
        self.q_reads = 0
        self.created = 0
        self.expanded = 0
        self.fixed_theta = mode.theta_vector(n)
        self.theta_list = None if self.fixed_theta is None else self.fixed_theta.tolist()
        self.estimate = None if self.fixed_theta is not None else mode.estimator(n)
        self.full_nll = mode.kind == "joint" and mode.full_nll
        if heuristic == "known_theta":
            off = Q.q[~np.eye(n, dtype=bool)]
            self.q_max = float(off.max()) if off.size else 0.0
        if heuristic == "constant_theta":
            scale = float(self.fixed_theta[0]) if n > 1 else 0.0
            self.h_level = (scale * constant_theta_table(pairwise_min_sorted(Q), n)).tolist()

    def root(self) -> SearchNode:
        return SearchNode((), 0, 0.0, 0.0, 0.0, 0.0, None)

    def child_v_table(self, node: SearchNode) -> dict:
        """``V`` of every child of ``node``, from the uncle table."""
        q = self.q
        n = self.n
        if node.level == 0:
            table = {}
            for x in range(n):
                table[x] = sum(q[l][x] for l in range(n) if l != x)
            self.q_reads += n * (n - 1)
            return table
        last = node.prefix[-1]
        row = q[last]
        table = {x: u - row[x] for x, u in node.uncle.items() if x != last}
        self.q_reads += len(table)
        return table

    def _theta_and_inc(self, v: float, level: int) -> tuple[float, float]:
        # ``level`` is the 1-based level of the child; V ranges over 0..n-level
        m = self.n - level + 1
        if self.theta_list is not None:
            t = self.theta_list[level - 1]
            return t, t * v
        t = self.estimate(v, m)
        inc = t * v
        if self.full_nll:
            inc += log_psi_j(t, m)
        return t, inc

    def _heuristics(self, node: SearchNode, table: dict) -> tuple[float, float]:
        """(A at the parent, A usable directly for each child)."""
        j = node.level
        if self.heuristic == "zero":
            return 0.0, 0.0
        if self.heuristic == "constant_theta":
            return self.h_level[j], self.h_level[j + 1]
        v_min = min(table.values())
        a_parent = heuristic_known_theta(j, v_min, self.theta_list, self.q_max)
        first = max(v_min - self.q_max, 0.0)
        a_child = a_parent - self.theta_list[j] * first if j < self.n - 1 else 0.0
        return a_parent, max(a_child, 0.0)

    def children(self, node: SearchNode) -> list[SearchNode]:
        table = self.child_v_table(node)
        a_parent, a_child = self._heuristics(node, table)
        extra = a_parent if self.bound == "parent" else a_child
        level = node.level + 1
        n = self.n
        out = []
        for x in sorted(table):
            v = table[x]
            t, inc = self._theta_and_inc(v, level)
            cost = node.cost + inc
            prefix = node.prefix + (x,)
            if level == n - 1:
                # the last item is forced and has V = 0
                (last,) = (y for y in table if y != x)
                prefix = prefix + (last,)
                bound = cost + (extra if self.bound == "parent" else 0.0)
                out.append(SearchNode(prefix, n, v, t, cost, bound, None))
            else:
                out.append(SearchNode(prefix, level, v, t, cost, cost + extra, table))
        self.created += len(out)
        return out

    def greedy_child(self, node: SearchNode) -> SearchNode:
        """Child with the smallest ``V`` (lowest item on ties)."""
        kids = self.children(node)
        return min(kids, key=lambda c: (c.v, c.prefix))

    def greedy_complete(self, node: SearchNode) -> SearchNode:
        while node.level < self.n:
            self.expanded += 1
            node = self.greedy_child(node)
        return node

    def theta_of(self, node: SearchNode) -> tuple[float, ...]:
        if self.fixed_theta is not None:
            return tuple(self.theta_list)
        perm = Permutation(node.prefix)
        vb = v_bar(self.Q, perm)
        est = self.estimate
        return tuple(est(min(max(float(v), 0.0), self.n - j - 1), self.n - j) for j, v in enumerate(vb))

    def result(self, node: SearchNode, optimal: bool, frontier: list, t0: float, max_level: int) -> SearchResult:
        return SearchResult(
            pi0=Permutation(node.prefix),
            theta=self.theta_of(node),
            cost=node.cost,
            nodes_expanded=self.expanded,
            nodes_created=self.created,
            optimal=optimal,
            q_reads=self.q_reads,
            max_level=max(max_level, node.level),
            frontier=frontier,
            wall_time=time.perf_counter() - t0,
        )

    def trivial(self, t0: float) -> SearchResult:
        return SearchResult(Permutation((0,)), (), 0.0, 0, 0, True, wall_time=time.perf_counter() - t0)

    def run(self, budget: int | None = None, time_limit: float | None = None, upper: float | None = None):
        """Best-first search. Returns ``(goal_or_None, heap, max_level)``.

        Children whose bound exceeds ``upper`` (the cost of a known complete
        ranking) are counted as created but never queued; with admissible
        bounds they could not be expanded before the goal anyway.
        """
        limit = math.inf if upper is None else upper + 1e-9 * max(1.0, abs(upper))
        heap: list = []
        root = self.root()
        heapq.heappush(heap, (root.bound, 0, root.prefix, root))
        max_level = 0
        t0 = time.perf_counter()
        while heap:
            bound, neg_level, prefix, node = heap[0]
            if node.level == self.n:
                heapq.heappop(heap)
                return node, heap, max_level
            if budget is not None and self.expanded >= budget:
                break
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                break
            heapq.heappop(heap)
            self.expanded += 1
            for child in self.children(node):
                max_level = max(max_level, child.level)
                if child.bound <= limit:
                    heapq.heappush(heap, (child.bound, -child.level, child.prefix, child))
        return None, heap, max_level

    def incumbent(self) -> SearchNode:
        """Greedy complete ranking, computed off the books (counters untouched)."""
        saved = (self.created, self.expanded, self.q_reads)
        node = self.greedy_complete(self.root())
        self.created, self.expanded, self.q_reads = saved
        return node


def _validate(Q: QMatrix, budget: int | None) -> None:
    if Q is None or Q.n == 0:
        raise ValueError("empty Q matrix")
    if budget is not None and budget <= 0:
        raise ValueError("budget must be positive")


def searchpi(Q: QMatrix, mode: Mode | None = None, heuristic: str = "zero", budget: int | None = None,
             bound: str = "child", time_limit: float | None = None, prune: bool = True) -> SearchResult:
    """Best-first search for the optimal central ranking under ``mode``.

    ``budget`` caps node expansions. If it (or ``time_limit``) runs out, the
    cheapest complete ranking known is returned with ``optimal=False``: the
    greedy ranking or a complete node generated by the search. ``frontier``
    then holds the open nodes.

    With ``prune`` the greedy ranking's cost also caps which children are
    queued; this saves memory and changes neither the expansions nor the
    answer.

    ``bound="parent"`` applies the parent's cost-to-go bound to every child
    instead of the child's own bound; it double counts one level and can
    return a suboptimal ranking with the non-zero heuristics. Pruning is off
    in that case since its bounds are not lower bounds.
    """
    mode = mode or Mode.constant()
    _validate(Q, budget)
    t0 = time.perf_counter()
    s = _Searcher(Q, mode, heuristic, bound)
    if s.n == 1:
        return s.trivial(t0)
    best_known = s.incumbent()
    upper = best_known.cost if prune and bound == "child" else None
    goal, heap, max_level = s.run(budget, time_limit, upper)
    if goal is not None:
        return s.result(goal, True, [], t0, max_level)
    frontier = [entry[3] for entry in heap]
    done = [nd for nd in frontier if nd.level == s.n] + [best_known]
    best = min(done, key=lambda nd: (nd.cost, nd.prefix))
    return s.result(best, False, frontier, t0, max_level)


def bf_css(Q: QMatrix, mode: Mode | None = None, node_budget: int = 10 ** 6, heuristic: str = "zero",
           bound: str = "child", time_limit: float | None = None) -> SearchResult:
    """Budgeted best-first search followed by greedy completion.

    When the budget runs out, the open node of greatest depth (smallest bound
    on ties) is completed by always taking the smallest-``V`` child.
    """
    mode = mode or Mode.constant()
    _validate(Q, node_budget)
    t0 = time.perf_counter()
    s = _Searcher(Q, mode, heuristic, bound)
    if s.n == 1:
        return s.trivial(t0)
    goal, heap, max_level = s.run(node_budget, time_limit)
    if goal is not None:
        return s.result(goal, True, [], t0, max_level)
    frontier = [entry[3] for entry in heap]
    start = min(frontier, key=lambda nd: (-nd.level, nd.bound, nd.prefix))
    best = s.greedy_complete(start)
    return s.result(best, False, frontier, t0, max_level)


def greedy_descent(Q: QMatrix, mode: Mode | None = None) -> SearchResult:
    """Pure greedy path: one expansion per level, smallest ``V`` child each time."""
    mode = mode or Mode.constant()
    _validate(Q, None)
    t0 = time.perf_counter()
    s = _Searcher(Q, mode, "zero")
    if s.n == 1:
        return s.trivial(t0)
    goal = s.greedy_complete(s.root())
    return s.result(goal, False, [], t0, goal.level)


def child_v(parent: SearchNode, next_item: int, Q: QMatrix) -> float:
    """``V`` of ``parent + (next_item,)`` via the uncle table (O(1))."""
    if next_item in parent.prefix:
        raise ValueError(f"item {next_item} already in prefix")
    if parent.level == 0:
        return float(sum(Q.q[l, next_item] for l in range(Q.n) if l != next_item))
    return parent.uncle[next_item] - Q.q[parent.prefix[-1], next_item]


def expand_tree(Q: QMatrix, mode: Mode | None = None, heuristic: str = "zero"):
    """Yield ``(node, children)`` for every internal node of the full tree.

    For small ``n`` only; used to audit the recursion and the heuristics.
    """
    mode = mode or Mode.constant()
    s = _Searcher(Q, mode, heuristic, "child")
    stack = [s.root()]
    while stack:
        node = stack.pop()
        if node.level == s.n:
            continue
        kids = s.children(node)
        yield node, kids
        stack.extend(kids)


# ---------------------------------------------------------------------------
# Brute force oracle
# ---------------------------------------------------------------------------

def brute_force(Q: QMatrix, mode: Mode | None = None, tie_tol: float = 1e-12) -> SearchResult:
    """Evaluate every ranking; lowest lexicographic order wins ties."""
    mode = mode or Mode.constant()
    n = Q.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}")
    t0 = time.perf_counter()
    if n == 1:
        return SearchResult(Permutation((0,)), (), 0.0, 0, 0, True)
    q = Q.q
    fixed = mode.theta_vector(n)
    est = None if fixed is not None else mode.estimator_array(n)
    lower = np.tril(np.ones((n, n), dtype=bool), k=-1)
    best_cost, best_order = math.inf, None
    perms = itertools.permutations(range(n))
    chunk = 40320
    count = 0
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        count += len(block)
        m = q[block[:, :, None], block[:, None, :]]  # m[p, a, b] = Q[r_a, r_b]
        vb = np.where(lower[None], m, 0.0).sum(axis=1)[:, :-1]
        if fixed is not None:
            cost = vb @ fixed
        else:
            cost = np.zeros(len(block))
            for j in range(n - 1):
                t = est(vb[:, j], n - j)
                cost += t * vb[:, j]
                if mode.full_nll:
                    cost += _log_psi_array(t, n - j)
        k = int(np.argmin(cost))
        c = float(cost[k])
        if c < best_cost - tie_tol:
            first = int(np.flatnonzero(cost <= c + tie_tol)[0])
            best_cost, best_order = float(cost[first]), tuple(block[first].tolist())
    pi0 = Permutation(best_order)
    cost, theta = objective(Q, pi0, mode)
    return SearchResult(pi0, tuple(theta.tolist()), cost, 0, count, True,
                        wall_time=time.perf_counter() - t0)
