"""The generalized Mallows model.

Each ``V_j(pi pi0^-1)`` follows an independent truncated geometric law on
``0..m-1`` with ``m = n - j + 1`` (1-based ``j``), so normalization, means and
sampling all reduce to per-coordinate formulas in ``(theta_j, m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .perm import FormatError, Permutation, compose, decode_v, inverse, v_code

THETA_CAP = 50.0
_SERIES_EPS = 1e-6


@dataclass(frozen=True)
class GMModel:
    """Central ranking ``pi0`` and dispersion vector ``theta`` (length n-1)."""

    pi0: Permutation
    theta: tuple[float, ...]

    def __post_init__(self):
        theta = tuple(float(t) for t in np.broadcast_to(np.asarray(self.theta, float), (self.pi0.n - 1,)))
        if any(not math.isfinite(t) or t < 0 for t in theta):
            raise ValueError("theta must be finite and non-negative")
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.pi0.n


# ---------------------------------------------------------------------------
# Per-coordinate formulas
# ---------------------------------------------------------------------------

def log_psi_j(theta_j: float, m: int) -> float:
    """``ln sum_{r<m} exp(-theta_j r)``, stable for any real theta_j."""
    if m < 1:
        raise ValueError("m must be positive")
    if m == 1:
        return 0.0
    t = float(theta_j)
    if abs(t) < _SERIES_EPS:
        return math.log(m) - 0.5 * (m - 1) * t + (m * m - 1) * t * t / 24.0
    if t < 0:
        # reverse the support: sum e^{-t r} = e^{-t (m-1)} sum e^{t r}
        return -(m - 1) * t + log_psi_j(-t, m)
    return math.log(-math.expm1(-m * t)) - math.log(-math.expm1(-t))


def _log_psi_array(theta: np.ndarray, m: int) -> np.ndarray:
    """Vector :func:`log_psi_j` for non-negative theta."""
    t = np.asarray(theta, dtype=float)
    if m == 1:
        return np.zeros_like(t)
    out = np.empty_like(t)
    small = t < _SERIES_EPS
    ts = t[small]
    out[small] = math.log(m) - 0.5 * (m - 1) * ts + (m * m - 1) * ts * ts / 24.0
    tb = t[~small]
    out[~small] = np.log(-np.expm1(-m * tb)) - np.log(-np.expm1(-tb))
    return out


def psi_j(theta_j: float, m: int) -> float:
    """Normalizer ``(1 - e^{-m theta}) / (1 - e^{-theta})``; equals m at theta = 0."""
    return math.exp(log_psi_j(theta_j, m))


def log_psi(theta: Sequence[float]) -> float:
    """``ln psi(theta)`` for a full vector of length n-1."""
    n = len(theta) + 1
    return sum(log_psi_j(t, n - j) for j, t in enumerate(theta))


def marginal_v_pmf(theta_j: float, m: int, r: int) -> float:
    """``P[V_j = r] = exp(-theta_j r) / psi_j(theta_j)`` for ``0 <= r < m``."""
    if not 0 <= r <= m - 1:
        raise ValueError(f"r = {r} outside 0..{m - 1}")
    return math.exp(-theta_j * r - log_psi_j(theta_j, m))


def mean_v(theta_j: float, m: int) -> float:
    """Expected ``V_j`` under the truncated geometric with ``m`` support points."""
    t = float(theta_j)
    if m <= 1:
        return 0.0
    if abs(t) < _SERIES_EPS:
        return 0.5 * (m - 1) - (m * m - 1) * t / 12.0 + (m ** 4 - 1) * t ** 3 / 720.0
    if t * m > 700.0:
        # second term underflows; first one is e^{-t}/(1-e^{-t})
        return 1.0 / math.expm1(t)
    return 1.0 / math.expm1(t) - m / math.expm1(m * t)


def _mean_v_array(theta: np.ndarray, m: int) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < _SERIES_EPS
    ts = t[small]
    out[small] = 0.5 * (m - 1) - (m * m - 1) * ts / 12.0 + (m ** 4 - 1) * ts ** 3 / 720.0
    tb = t[~small]
    with np.errstate(over="ignore"):
        out[~small] = 1.0 / np.expm1(tb) - m / np.expm1(m * tb)
    return out


def solve_theta(v_bar: float, m: int, theta_cap: float = THETA_CAP, tol: float = 1e-13) -> float:
    """Invert :func:`mean_v` in ``theta``, restricted to ``[0, theta_cap]``.

    Means at or above the uniform value ``(m-1)/2`` give 0; means at or below
    ``mean_v(theta_cap, m)`` give ``theta_cap``. Bisection on the monotone
    mean until the bracket is narrower than ``tol``.
    """
    if m < 2:
        raise ValueError("theta is only defined for m >= 2")
    if not -1e-9 <= v_bar <= m - 1 + 1e-9:
        raise ValueError(f"v_bar = {v_bar} outside [0, {m - 1}]")
    if v_bar >= 0.5 * (m - 1):
        return 0.0
    if v_bar <= mean_v(theta_cap, m):
        return float(theta_cap)
    lo, hi = 0.0, float(theta_cap)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_v(mid, m) > v_bar:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def _solve_theta_array(v_bar: np.ndarray, m: int, theta_cap: float = THETA_CAP) -> np.ndarray:
    v = np.asarray(v_bar, dtype=float)
    lo = np.zeros_like(v)
    hi = np.full_like(v, theta_cap)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        above = _mean_v_array(mid, m) > v
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    out = 0.5 * (lo + hi)
    out[v >= 0.5 * (m - 1)] = 0.0
    out[v <= mean_v(theta_cap, m)] = theta_cap
    return out


# ---------------------------------------------------------------------------
# Tabulated inverse
# ---------------------------------------------------------------------------

TABLE_VERSION = 1


class ThetaTable:
    """Tabulated inverse of :func:`mean_v`, keyed by the support size ``m``.

    For each ``m`` a uniform grid on ``[0, (m-1)/2]`` with spacing
    ``resolution * m`` stores the residual ``theta - ln(1 + 1/v)``. The
    residual is smooth where theta itself has a log singularity at ``v = 0``,
    so linear interpolation of it stays accurate over the whole range.
    """

    def __init__(self, m_max: int, resolution: float = 1e-3, theta_cap: float = THETA_CAP,
                 _grids: dict | None = None):
        if m_max < 2:
            raise ValueError("m_max must be at least 2")
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.m_max = int(m_max)
        self.resolution = float(resolution)
        self.theta_cap = float(theta_cap)
        self._floor = {}
        self._grids = {}
        if _grids is None:
            for m in range(2, self.m_max + 1):
                v = self._grid(m)
                with np.errstate(divide="ignore"):
                    base = np.log1p(1.0 / v)
                theta = _solve_theta_array(v, m, self.theta_cap)
                resid = theta - base
                resid[0] = 0.0
                self._grids[m] = resid
        else:
            self._grids = {m: np.asarray(r, dtype=float) for m, r in _grids.items()}
        for m in self._grids:
            self._floor[m] = mean_v(self.theta_cap, m)

    def _step(self, m: int) -> float:
        return self.resolution * m

    def _grid(self, m: int) -> np.ndarray:
        half = 0.5 * (m - 1)
        k = int(math.ceil(half / self._step(m)))
        return np.linspace(0.0, half, k + 1)

    def _check_m(self, m: int) -> None:
        if m not in self._grids:
            raise ValueError(f"table covers m in 2..{self.m_max}, got {m}")

    def lookup(self, v_bar: float, m: int) -> float:
        self._check_m(m)
        half = 0.5 * (m - 1)
        if v_bar >= half:
            return 0.0
        if v_bar <= self._floor[m]:
            return self.theta_cap
        resid = self._grids[m]
        pos = v_bar / half * (len(resid) - 1)
        k = min(int(pos), len(resid) - 2)
        frac = pos - k
        r = resid[k] * (1.0 - frac) + resid[k + 1] * frac
        theta = math.log1p(1.0 / v_bar) + r
        return min(max(theta, 0.0), self.theta_cap)

    def lookup_array(self, v_bar: np.ndarray, m: int) -> np.ndarray:
        self._check_m(m)
        v = np.asarray(v_bar, dtype=float)
        half = 0.5 * (m - 1)
        resid = self._grids[m]
        grid = np.linspace(0.0, half, len(resid))
        vc = np.clip(v, 0.0, half)
        with np.errstate(divide="ignore"):
            theta = np.log1p(1.0 / vc) + np.interp(vc, grid, resid)
        theta = np.clip(theta, 0.0, self.theta_cap)
        theta[v >= half] = 0.0
        theta[v <= self._floor[m]] = self.theta_cap
        return theta

    __call__ = lookup

    def save(self, path: str | Path) -> None:
        """Text layout::

            # theta-table v1
            m_max resolution theta_cap
            m count
            r_0 r_1 ... r_{count-1}
            ...
        """
        lines = [f"# theta-table v{TABLE_VERSION}",
                 f"{self.m_max} {self.resolution!r} {self.theta_cap!r}"]
        for m in sorted(self._grids):
            resid = self._grids[m]
            lines.append(f"{m} {len(resid)}")
            lines.append(" ".join(repr(float(x)) for x in resid))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> ThetaTable:
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0].strip() != f"# theta-table v{TABLE_VERSION}":
            raise FormatError("missing or unsupported theta-table header", 1, str(path))
        try:
            m_max, resolution, cap = lines[1].split()
            grids = {}
            i = 2
            while i < len(lines):
                m, count = (int(x) for x in lines[i].split())
                resid = [float(x) for x in lines[i + 1].split()]
                if len(resid) != count:
                    raise FormatError(f"expected {count} values", i + 2, str(path))
                grids[m] = resid
                i += 2
        except (ValueError, IndexError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"malformed theta table: {exc}", path=str(path)) from None
        return cls(int(m_max), float(resolution), float(cap), _grids=grids)


def build_theta_table(m_max: int, resolution: float = 1e-3, theta_cap: float = THETA_CAP) -> ThetaTable:
    return ThetaTable(m_max, resolution, theta_cap)


@lru_cache(maxsize=None)
def _cached_table(m_max: int) -> ThetaTable:
    return ThetaTable(m_max)


def default_theta_table(n: int) -> ThetaTable:
    """Shared table covering every level of an ``n``-item problem."""
    size = 64
    while size < n:
        size *= 2
    return _cached_table(size)


# ---------------------------------------------------------------------------
# Probabilities and sampling
# ---------------------------------------------------------------------------

def log_pmf(model: GMModel, p: Permutation) -> float:
    if p.n != model.n:
        raise ValueError(f"size mismatch: {p.n} != {model.n}")
    v = v_code(compose(p, inverse(model.pi0))).v
    return -float(np.dot(model.theta, v)) - log_psi(model.theta)


def sample_v(theta: Sequence[float], size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` independent V-codes, shape ``(size, n-1)``, by inverse CDF."""
    theta = np.asarray(theta, dtype=float)
    n = len(theta) + 1
    out = np.empty((size, n - 1), dtype=np.int64)
    u = rng.random((size, n - 1))
    for j, t in enumerate(theta):
        m = n - j
        if t < _SERIES_EPS:
            r = np.floor(u[:, j] * m)
        else:
            # CDF(r) = (1 - e^{-t(r+1)}) / (1 - e^{-t m})
            r = np.floor(-np.log1p(u[:, j] * np.expm1(-t * m)) / t)
        out[:, j] = np.clip(r, 0, m - 1)
    return out


def decode_v_array(codes: np.ndarray) -> np.ndarray:
    """Vectorized :func:`decode_v` over rows; returns item orders ``(size, n)``."""
    codes = np.asarray(codes, dtype=np.int64)
    size, n1 = codes.shape
    n = n1 + 1
    orders = np.full((size, n), n - 1, dtype=np.int64)
    rows = np.arange(size)
    for item in range(n - 2, -1, -1):
        length = n - 1 - item  # items already placed
        pos = codes[:, item]
        # shift the tail right by one, then write the new item
        cols = np.arange(length, 0, -1)
        for c in cols:
            mask = pos < c
            orders[mask, c] = orders[mask, c - 1]
        orders[rows, pos] = item
    return orders


def sample_orders(model: GMModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """Sample item orders (0-based, shape ``(size, n)``) from the model."""
    codes = sample_v(model.theta, size, rng)
    sigma = decode_v_array(codes)
    # pi = sigma pi0: the item at rank k of pi is pi0.order[sigma.order[k]]
    return np.asarray(model.pi0.order, dtype=np.int64)[sigma]


def sample(model: GMModel, size: int, seed: int | np.random.Generator | None = None) -> list[Permutation]:
    rng = np.random.default_rng(seed)
    return [Permutation(tuple(row)) for row in sample_orders(model, size, rng).tolist()]


def sample_one_slow(model: GMModel, rng: np.random.Generator) -> Permutation:
    """Single draw via :func:`decode_v` and :func:`compose`; reference path for tests."""
    code = sample_v(model.theta, 1, rng)[0]
    return compose(decode_v(code.tolist()), model.pi0)


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------

def read_model(path: str | Path) -> GMModel:
    """Read ``n``, then pi0 (1-based item order), then the n-1 theta values."""
    lines = [ln for ln in Path(path).read_text().splitlines()]
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip() and not ln.lstrip().startswith("#")]
    if len(body) < 2:
        raise FormatError("model file needs n, pi0 and theta lines", path=str(path))
    lineno, text = body[0]
    try:
        n = int(text)
    except ValueError:
        raise FormatError("first line must be the integer n", lineno, str(path)) from None
    lineno, text = body[1]
    try:
        items = [int(x) for x in text.split()]
    except ValueError:
        raise FormatError("pi0 must be integer item ids", lineno, str(path)) from None
    if sorted(items) != list(range(1, n + 1)):
        raise FormatError(f"pi0 is not a permutation of 1..{n}", lineno, str(path))
    if n == 1:
        theta: list[float] = []
    else:
        if len(body) < 3:
            raise FormatError("missing theta line", path=str(path))
        lineno, text = body[2]
        try:
            theta = [float(x) for x in text.split()]
        except ValueError:
            raise FormatError("theta values must be numbers", lineno, str(path)) from None
        if len(theta) == 1 and n > 2:
            theta = theta * (n - 1)
        if len(theta) != n - 1:
            raise FormatError(f"expected {n - 1} theta values", lineno, str(path))
        if any(t < 0 for t in theta):
            raise FormatError("theta values must be non-negative", lineno, str(path))
    return GMModel(Permutation.from_items(items), tuple(theta))


def write_model(path: str | Path, model: GMModel) -> None:
    theta = " ".join(repr(t) for t in model.theta)
    Path(path).write_text(f"{model.n}\n{model.pi0}\n{theta}\n")
