"""Consensus ranking and parameter estimation under the generalized Mallows model."""

from .baselines import acn_pivot, css_greedy, fv
from .model import (
    THETA_CAP,
    GMModel,
    ThetaTable,
    build_theta_table,
    log_pmf,
    log_psi,
    log_psi_j,
    marginal_v_pmf,
    mean_v,
    psi_j,
    sample,
    solve_theta,
)
from .perm import (
    FormatError,
    Permutation,
    VCode,
    compose,
    decode_v,
    generalized_distance,
    inverse,
    kendall_distance,
    q_of_perm,
    v_code,
)
from .prior import PriorParams, log_prior, map_estimate, posterior_update
from .search import Mode, SearchNode, SearchResult, bf_css, brute_force, child_v, searchpi
from .stats import QMatrix, log_likelihood, nonneg_theta_center, q_matrix, v_bar

__version__ = "0.1.0"

__all__ = [
    "acn_pivot",
    "css_greedy",
    "fv",
    "THETA_CAP",
    "GMModel",
    "ThetaTable",
    "build_theta_table",
    "log_pmf",
    "log_psi",
    "log_psi_j",
    "marginal_v_pmf",
    "mean_v",
    "psi_j",
    "sample",
    "solve_theta",
    "FormatError",
    "Permutation",
    "VCode",
    "compose",
    "decode_v",
    "generalized_distance",
    "inverse",
    "kendall_distance",
    "q_of_perm",
    "v_code",
    "PriorParams",
    "log_prior",
    "map_estimate",
    "posterior_update",
    "Mode",
    "SearchNode",
    "SearchResult",
    "bf_css",
    "brute_force",
    "child_v",
    "searchpi",
    "QMatrix",
    "log_likelihood",
    "nonneg_theta_center",
    "q_matrix",
    "v_bar",
]
