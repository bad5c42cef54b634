"""Conjugate prior over (pi0, theta) and MAP estimation.

The prior with strength ``nu`` and precedence matrix ``Gamma`` has
unnormalized log density ``-nu * [sum_j theta_j Vbar_j(Gamma, pi0) + ln psi(theta)]``.
Conditioning on N rankings with precedence matrix Q replaces
``(nu, Gamma)`` by ``(N + nu, (N Q + nu Gamma) / (N + nu))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import GMModel, log_pmf, log_psi
from .perm import FormatError, Permutation, all_permutations, q_of_perm
from .search import Mode, SearchResult, searchpi
from .stats import QMatrix, format_q_csv, parse_q_csv, q_matrix, v_bar

ENUMERATION_MAX_N = 8


@dataclass(frozen=True)
class PriorParams:
    nu: float
    gamma: QMatrix

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    @property
    def n(self) -> int:
        return self.gamma.n


def _check_theta(theta, n: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n - 1,):
        raise ValueError(f"theta must have length {n - 1}")
    if np.any(theta < 0):
        raise ValueError("theta must be non-negative")
    return theta


def log_prior(params: PriorParams, pi0: Permutation, theta: Sequence[float]) -> float:
    """Unnormalized log prior density."""
    if pi0.n != params.n:
        raise ValueError(f"size mismatch: {pi0.n} != {params.n}")
    theta = _check_theta(theta, params.n)
    return -params.nu * (float(np.dot(theta, v_bar(params.gamma, pi0))) + log_psi(theta))


def permutation_matrix(pi0: Permutation) -> np.ndarray:
    """``P[a, r_a] = 1`` where ``r_a`` is the item at rank a."""
    n = pi0.n
    P = np.zeros((n, n))
    P[np.arange(n), pi0.order] = 1.0
    return P


def trace_statistic(gamma: np.ndarray, pi0: Permutation, theta: Sequence[float]) -> float:
    """``trace(G_inf P Gamma P^T Theta)`` with ``G_inf`` the identity's 0/1
    precedence matrix and ``Theta = diag(theta, 0)``."""
    n = pi0.n
    g_inf = q_of_perm(Permutation.identity(n))
    P = permutation_matrix(pi0)
    Theta = np.diag(np.append(np.asarray(theta, dtype=float), 0.0))
    return float(np.trace(g_inf @ P @ np.asarray(gamma) @ P.T @ Theta))


def log_prior_trace(params: PriorParams, pi0: Permutation, theta: Sequence[float]) -> float:
    theta = _check_theta(theta, params.n)
    return -params.nu * (trace_statistic(params.gamma.q, pi0, theta) + log_psi(theta))


def posterior_update(params: PriorParams, sample: Sequence[Permutation] | np.ndarray) -> PriorParams:
    if len(sample) == 0:
        return params
    Q = q_matrix(sample)
    if Q.n != params.n:
        raise ValueError(f"size mismatch: {Q.n} != {params.n}")
    N = Q.N
    nu = N + params.nu
    gamma = (N * Q.q + params.nu * params.gamma.q) / nu
    return PriorParams(nu, QMatrix(gamma))


def blended_q(params: PriorParams, sample: Sequence[Permutation] | np.ndarray) -> QMatrix:
    """Precedence matrix the MAP search runs on."""
    return posterior_update(params, sample).gamma


def map_estimate(params: PriorParams, sample: Sequence[Permutation] | np.ndarray,
                 mode: Mode | None = None, heuristic: str = "zero", **kwargs) -> SearchResult:
    return searchpi(blended_q(params, sample), mode or Mode.joint(), heuristic, **kwargs)


def expected_q(model: GMModel) -> QMatrix:
    """``E[Q(pi)]`` under the model, by enumeration (n <= 8)."""
    if model.n > ENUMERATION_MAX_N:
        raise ValueError(f"enumeration limited to n <= {ENUMERATION_MAX_N}")
    acc = np.zeros((model.n, model.n))
    for p in all_permutations(model.n):
        acc += np.exp(log_pmf(model, p)) * q_of_perm(p)
    # remove rounding drift so the matrix satisfies the pair constraints exactly
    acc = 0.5 * (acc + (1.0 - acc.T))
    np.fill_diagonal(acc, 0.0)
    return QMatrix(acc)


def read_prior(path: str | Path) -> PriorParams:
    """``nu`` on the first line, then the Gamma matrix as CSV."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError("empty prior file", path=str(path))
    try:
        nu = float(lines[0])
    except ValueError:
        raise FormatError("first line must be nu", 1, str(path)) from None
    gamma = parse_q_csv(lines[1:], str(path), first_line=2)
    return PriorParams(nu, gamma)


def write_prior(path: str | Path, params: PriorParams) -> None:
    Path(path).write_text(f"{params.nu!r}\n" + format_q_csv(params.gamma))
