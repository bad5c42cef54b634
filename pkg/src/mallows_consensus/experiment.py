"""Replicated algorithm comparisons on synthetic ranking data."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .baselines import acn_pivot, css_greedy, fv
from .model import GMModel, sample_orders
from .perm import Permutation
from .search import BRUTE_FORCE_MAX_N, HEURISTICS, Mode, bf_css, brute_force, check_heuristic, objective, searchpi
from .stats import QMatrix, q_matrix

log = logging.getLogger(__name__)

REGIMES = ("concentrated", "near_uniform", "random_q")
ALGORITHMS = ("bf", "bf_css", "css", "fv", "acn", "brute")
MODES = ("constant", "known", "joint")

REGIME_DEFAULTS = {
    "concentrated": {"theta": 1.0, "N": 5000},
    "near_uniform": {"theta": 0.003, "N": 100},
    "random_q": {"theta": None, "N": 0},
}

COLUMNS = [
    "replication", "seed", "regime", "algorithm", "mode", "heuristic", "n", "N",
    "cost", "cost_ratio", "nodes_expanded", "nodes_created", "wall_time", "optimal",
    "recovered", "pi0", "true_pi0",
]


@dataclass
class ExperimentConfig:
    regime: str = "concentrated"
    n: int = 8
    N: int | None = None
    theta: float | Sequence[float] | None = None
    n_iter: int = 10
    seed: int = 0
    algorithms: tuple[str, ...] = ("bf", "bf_css", "css", "fv", "acn")
    budget: int = 10 ** 6
    bf_budget: int | None = None
    heuristic: str = "zero"
    mode: str = "constant"
    ref_algo: str | None = None
    timing: bool = False
    audit: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        defaults = REGIME_DEFAULTS[self.regime]
        if self.regime == "random_q":
            if self.theta is not None:
                raise ValueError("random_q regime takes no theta")
            if self.mode == "known":
                raise ValueError("known mode needs a generating theta; not available for random_q")
            self.N = 0
        else:
            if self.theta is None:
                self.theta = defaults["theta"]
            if self.N is None:
                self.N = defaults["N"]
            if self.N < 1:
                raise ValueError("N must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")
        self.algorithms = tuple(self.algorithms)
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ValueError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if "brute" in self.algorithms and self.n > BRUTE_FORCE_MAX_N:
            raise ValueError(f"brute needs n <= {BRUTE_FORCE_MAX_N}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"heuristic must be one of {HEURISTICS}")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.ref_algo is None:
            self.ref_algo = "bf_css" if "bf_css" in self.algorithms else self.algorithms[0]
        if self.ref_algo not in self.algorithms:
            raise ValueError("ref_algo must be one of the selected algorithms")
        if self.theta is not None:
            self.theta_vector()
        check_heuristic(self.search_mode(), self.heuristic, self.n)

    def theta_vector(self) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if theta.size == 1:
            theta = np.full(self.n - 1, theta[0])
        if theta.shape != (self.n - 1,):
            raise ValueError(f"theta needs 1 or {self.n - 1} values")
        if np.any(theta < 0):
            raise ValueError("theta must be non-negative")
        return theta

    def search_mode(self) -> Mode:
        if self.mode == "known":
            return Mode.known(self.theta_vector())
        if self.mode == "joint":
            return Mode.joint()
        return Mode.constant()


def generate(config: ExperimentConfig, rng: np.random.Generator) -> tuple[QMatrix, Permutation | None]:
    """Data for one replication: the precedence matrix and the true center."""
    n = config.n
    if config.regime == "random_q":
        upper = rng.random((n, n))
        q = np.triu(upper, k=1)
        q = q + np.tril(1.0 - q.T, k=-1)
        return QMatrix(q), None
    pi0 = Permutation(tuple(rng.permutation(n).tolist()))
    model = GMModel(pi0, tuple(config.theta_vector()))
    return q_matrix(sample_orders(model, config.N, rng)), pi0


def _run_algorithm(name: str, Q: QMatrix, mode: Mode, config: ExperimentConfig, seed: int) -> dict:
    n = Q.n
    t0 = time.perf_counter()
    expanded = created = 0
    optimal = False
    if name == "bf":
        res = searchpi(Q, mode, config.heuristic, budget=config.bf_budget)
        pi0, cost = res.pi0, res.cost
        expanded, created, optimal = res.nodes_expanded, res.nodes_created, res.optimal
    elif name == "bf_css":
        res = bf_css(Q, mode, config.budget, config.heuristic)
        pi0, cost = res.pi0, res.cost
        expanded, created, optimal = res.nodes_expanded, res.nodes_created, res.optimal
    elif name == "brute":
        res = brute_force(Q, mode)
        pi0, cost = res.pi0, res.cost
        created, optimal = res.nodes_created, True
    else:
        if name == "fv":
            pi0 = fv(Q)
        elif name == "css":
            pi0 = css_greedy(Q)
            expanded = n - 1
        else:
            pi0 = acn_pivot(Q, seed)
        cost = objective(Q, pi0, mode)[0]
    wall = time.perf_counter() - t0
    if config.audit:
        check = objective(Q, pi0, mode)[0]
        if not math.isclose(check, cost, rel_tol=1e-9, abs_tol=1e-9):
            raise AssertionError(f"{name}: reported cost {cost} but recomputed {check}")
    return {
        "algorithm": name,
        "pi0": pi0,
        "cost": cost,
        "nodes_expanded": expanded,
        "nodes_created": created,
        "optimal": optimal,
        "wall_time": wall,
    }


def run_replication(config: ExperimentConfig, rep: int) -> list[dict]:
    seed = config.seed + rep
    rng = np.random.default_rng(seed)
    Q, true_pi0 = generate(config, rng)
    mode = config.search_mode()
    results = [_run_algorithm(a, Q, mode, config, seed) for a in config.algorithms]
    ref_cost = next(r["cost"] for r in results if r["algorithm"] == config.ref_algo)
    rows = []
    for r in results:
        if ref_cost > 0:
            ratio = r["cost"] / ref_cost
        else:
            ratio = 1.0 if r["cost"] == 0 else math.inf
        rows.append({
            "replication": rep,
            "seed": seed,
            "regime": config.regime,
            "algorithm": r["algorithm"],
            "mode": config.mode,
            "heuristic": config.heuristic if r["algorithm"] in ("bf", "bf_css") else "",
            "n": config.n,
            "N": config.N,
            "cost": r["cost"],
            "cost_ratio": ratio,
            "nodes_expanded": r["nodes_expanded"],
            "nodes_created": r["nodes_created"],
            "wall_time": r["wall_time"] if config.timing else "",
            "optimal": r["optimal"],
            "recovered": "" if true_pi0 is None else r["pi0"] == true_pi0,
            "pi0": str(r["pi0"]),
            "true_pi0": "" if true_pi0 is None else str(true_pi0),
        })
    return rows


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """One row per (replication, algorithm), ordered by replication then algorithm."""
    log.info("experiment regime=%s n=%d N=%s theta=%s iters=%d",
             config.regime, config.n, config.N, config.theta, config.n_iter)
    reps = range(config.n_iter)
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            chunks = list(pool.map(run_replication, [config] * config.n_iter, reps))
    else:
        chunks = [run_replication(config, rep) for rep in reps]
    return [row for chunk in chunks for row in chunk]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()
