"""Model primitives for scenario-based multi-institution risk.

Conventions used throughout the package:

* A system of N institutions on a finite scenario space of size M is stored
  institution-major: ``positions[i, j]`` is the profit/loss of institution i
  in scenario j.  Positive numbers are gains.
* A capital allocation Y is an N x M matrix of the same orientation.  The
  admissible allocations have a scenario-independent total, so the price of
  an allocation is that common column sum.
* Aggregation functions map the N per-institution outcomes of one scenario
  to a single real number and are increasing and concave in each position.
* Acceptance criteria decide whether the M aggregated outcomes (weighted by
  the scenario probabilities) are good enough.

Numerical tolerances are centralized here so every module agrees on what
"equal" means.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Shared tolerances.
PROB_TOL = 1e-12          # scenario probabilities must sum to 1 within this
SYM_TOL = 1e-12           # symmetry check for covariance matrices
PSD_TOL = 1e-10           # smallest admissible eigenvalue shift for covariances
CLEARING_TOL = 1e-12      # fixed-point iteration stopping rule
CLEARING_MAX_ITER = 100_000
ACCEPT_TOL = 1e-9         # slack when checking acceptability of an outcome
CONSTANT_SUM_TOL = 1e-9   # scenario-total constancy of admissible allocations


class InfeasibleError(Exception):
    """The optimization problem has no admissible solution."""


class ConvergenceError(Exception):
    """An iterative scheme failed to reach its tolerance."""


def _as_float_array(a, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# scenario space / positions
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ScenarioSpace:
    """Finite probability space: M scenarios with strictly positive weights."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = _as_float_array(self.probabilities, "probabilities", 1)
        if p.size < 1:
            raise ValueError("need at least one scenario")
        if np.any(p <= 0.0):
            raise ValueError("scenario probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"scenario probabilities sum to {p.sum()!r}, not 1")
        self.probabilities = p

    @property
    def m(self) -> int:
        return self.probabilities.size

    def expectation(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(self.probabilities @ z)


@dataclass(eq=False)
class RiskVector:
    """Positions of N institutions over a common scenario space (N x M)."""

    space: ScenarioSpace
    positions: np.ndarray

    def __post_init__(self):
        x = _as_float_array(self.positions, "positions", 2)
        if x.shape[1] != self.space.m:
            raise ValueError(
                f"positions have {x.shape[1]} scenarios, space has {self.space.m}"
            )
        if x.shape[0] < 1:
            raise ValueError("need at least one institution")
        self.positions = x

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def m(self) -> int:
        return self.positions.shape[1]

    def shifted(self, y) -> "RiskVector":
        """Positions after adding an allocation (N x M or broadcastable)."""
        return RiskVector(self.space, self.positions + np.asarray(y, dtype=float))


@dataclass(eq=False)
class GaussianSystem:
    """Jointly normal positions: mean vector and covariance matrix."""

    mu: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = _as_float_array(self.mu, "mu", 1)
        q = _as_float_array(self.cov, "cov", 2)
        n = mu.size
        if q.shape != (n, n):
            raise ValueError(f"cov has shape {q.shape}, expected ({n}, {n})")
        if np.max(np.abs(q - q.T)) > SYM_TOL:
            raise ValueError("cov must be symmetric")
        if np.any(np.diag(q) <= 0.0):
            raise ValueError("cov must have strictly positive diagonal")
        try:
            np.linalg.cholesky(q + PSD_TOL * np.eye(n))
        except np.linalg.LinAlgError:
            raise ValueError("cov is not positive semidefinite") from None
        self.mu = mu
        self.cov = q

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def sigma(self) -> np.ndarray:
        """Marginal standard deviations."""
        return np.sqrt(np.diag(self.cov))


# ---------------------------------------------------------------------------
# aggregation functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sum:
    """Total profit/loss: the most permissive aggregation."""

    def per_scenario(self, x: np.ndarray) -> np.ndarray:
        return x.sum(axis=0)


@dataclass(eq=False)
class ShortfallSum:
    """Sum of shortfalls below per-institution critical levels d.

    Lambda(x) = -sum_i (x_i - d_i)^- ; always <= 0, zero iff nobody is short.
    """

    d: np.ndarray

    def __post_init__(self):
        self.d = _as_float_array(self.d, "d", 1)

    def per_scenario(self, x: np.ndarray) -> np.ndarray:
        short = np.minimum(x - self.d[:, None], 0.0)
        return short.sum(axis=0)


@dataclass(eq=False)
class ExponentialLoss:
    """Lambda(x) = -sum_i exp(-alpha_i x_i), alpha_i > 0.  Always < 0."""

    alpha: np.ndarray

    def __post_init__(self):
        a = _as_float_array(self.alpha, "alpha", 1)
        if np.any(a <= 0.0):
            raise ValueError("alpha must be strictly positive")
        self.alpha = a

    def per_scenario(self, x: np.ndarray) -> np.ndarray:
        return -np.exp(-self.alpha[:, None] * x).sum(axis=0)


@dataclass(eq=False)
class GainLossWeighted:
    """Piecewise-linear aggregation penalizing losses and crediting capped gains.

    Lambda(x) = -sum_i alpha_i x_i^-  +  sum_i beta_i (x_i - v_i)^+
    with alpha_i > beta_i >= 0 (losses hurt more than excess gains help).
    """

    alpha: np.ndarray
    beta: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        a = _as_float_array(self.alpha, "alpha", 1)
        b = _as_float_array(self.beta, "beta", 1)
        v = _as_float_array(self.v, "v", 1)
        if not (a.size == b.size == v.size):
            raise ValueError("alpha, beta, v must have matching length")
        if np.any(b < 0.0) or np.any(a <= b):
            raise ValueError("need alpha_i > beta_i >= 0")
        if np.any(v < 0.0):
            raise ValueError("gain thresholds v must be nonnegative")
        self.alpha, self.beta, self.v = a, b, v

    def per_scenario(self, x: np.ndarray) -> np.ndarray:
        loss = np.minimum(x, 0.0)          # x^- with a sign: -x^- = min(x, 0)
        gain = np.maximum(x - self.v[:, None], 0.0)
        return (self.alpha[:, None] * loss + self.beta[:, None] * gain).sum(axis=0)


@dataclass(eq=False)
class EisenbergNoe:
    """Aggregation through an interbank clearing network.

    pi[i, k] is the share of institution i's nominal obligations owed to k;
    rows sum to at most 1 and the spectral radius must be < 1 so that the
    clearing problem is contracting.  The aggregated outcome of a scenario is
    minus the total cleared loss of the system when the scenario's losses
    (-x) are pushed through the network, which makes the map increasing in x.
    """

    pi: np.ndarray

    def __post_init__(self):
        p = _as_float_array(self.pi, "pi", 2)
        if p.shape[0] != p.shape[1]:
            raise ValueError("pi must be square")
        if np.any(p < 0.0):
            raise ValueError("pi must be nonnegative")
        if np.any(p.sum(axis=1) > 1.0 + PROB_TOL):
            raise ValueError("rows of pi must sum to at most 1")
        if spectral_radius(p) >= 1.0:
            raise ValueError("spectral radius of pi must be < 1")
        self.pi = p

    def per_scenario(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[1])
        for j in range(x.shape[1]):
            out[j] = -clearing_vector(self.pi, -x[:, j]).sum()
        return out


Aggregation = Sum | ShortfallSum | ExponentialLoss | GainLossWeighted | EisenbergNoe


def spectral_radius(a: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest |eigenvalue| of a nonnegative matrix, by power iteration."""
    n = a.shape[0]
    # strictly positive start vector; for nonnegative a the iteration converges
    # to the Perron root
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(max_iter):
        w = a @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        w /= norm
        lam_new = float(w @ (a @ w))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return abs(lam_new)
        lam, v = lam_new, w
    return abs(lam)


def clearing_vector(pi: np.ndarray, x) -> np.ndarray:
    """Least nonnegative solution of y = (x + pi @ y)^+.

    x holds the institutions' net outside losses (positive = owes money).
    Monotone Picard iteration from 0: the map is isotone and, for spectral
    radius < 1, contracting, so the iterates increase to the least fixed point.
    """
    pi = np.asarray(pi, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x)
    for _ in range(CLEARING_MAX_ITER):
        y_next = np.maximum(x + pi @ y, 0.0)
        if np.max(np.abs(y_next - y)) <= CLEARING_TOL:
            return y_next
        y = y_next
    raise ConvergenceError("clearing iteration did not converge")


def aggregate(lam: Aggregation, x) -> float:
    """Aggregated outcome of a single scenario (x is the N-vector of positions)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("aggregate takes one scenario; use aggregate_scenarios")
    return float(lam.per_scenario(x[:, None])[0])


def aggregate_scenarios(lam: Aggregation, positions: np.ndarray) -> np.ndarray:
    """Aggregated outcomes of all scenarios of an N x M position matrix."""
    x = np.asarray(positions, dtype=float)
    if x.ndim != 2:
        raise ValueError("positions must be N x M")
    return lam.per_scenario(x)


# ---------------------------------------------------------------------------
# acceptance criteria
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpectationFloor:
    """Accept when E[Z] >= b.  The budget parameter gamma > 0 maps to b = -gamma."""

    b: float


@dataclass(frozen=True)
class WorstCase:
    """Accept when Z >= 0 in every scenario."""


@dataclass(frozen=True)
class ExpectedShortfall:
    """Accept when ES at the given tail level is <= 0."""

    level: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("tail level must lie in (0, 1)")


AcceptanceCriterion = ExpectationFloor | WorstCase | ExpectedShortfall


def is_acceptable(criterion: AcceptanceCriterion, space: ScenarioSpace, z) -> bool:
    """Decide acceptability of aggregated outcomes z (length M), with slack ACCEPT_TOL."""
    z = np.asarray(z, dtype=float)
    if isinstance(criterion, ExpectationFloor):
        return space.expectation(z) >= criterion.b - ACCEPT_TOL
    if isinstance(criterion, WorstCase):
        return float(z.min()) >= -ACCEPT_TOL
    if isinstance(criterion, ExpectedShortfall):
        from .closed_forms import expected_shortfall  # noqa: PLC0415 (cycle)

        return expected_shortfall(z, space.probabilities, criterion.level) <= ACCEPT_TOL
    raise TypeError(f"unknown acceptance criterion {criterion!r}")


# ---------------------------------------------------------------------------
# allocations
# ---------------------------------------------------------------------------

def allocation_price(y: np.ndarray, tol: float = CONSTANT_SUM_TOL) -> float:
    """Price of an admissible allocation: its scenario-independent column total.

    Raises ValueError when the column totals actually vary, i.e. when y is not
    in the admissible class.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        return float(y.sum())
    totals = y.sum(axis=0)
    spread = float(totals.max() - totals.min())
    if spread > tol * max(1.0, float(np.abs(totals).max())):
        raise ValueError(f"allocation total varies across scenarios (spread {spread:g})")
    return float(totals.mean())


def dominates(y1, y2, tol: float = 1e-12) -> bool:
    """Componentwise y1 >= y2 (used to compare allocations/outcomes)."""
    a = np.asarray(y1, dtype=float)
    b = np.asarray(y2, dtype=float)
    return bool(np.all(a >= b - tol))


@dataclass(eq=False)
class RiskResult:
    """Outcome of a risk-measure computation.

    rho        -- optimal total capital
    allocation -- an optimal (or near-optimal) N x M allocation, when available
    ranking    -- institutions ordered by expected allocation, largest first
    diagnostics-- solver metadata (method, iterations, residuals, ...)
    """

    rho: float
    allocation: np.ndarray | None = None
    ranking: tuple[int, ...] = ()
    diagnostics: dict = field(default_factory=dict)


def rank_by_expected_allocation(space: ScenarioSpace, y: np.ndarray) -> tuple[int, ...]:
    """Institution indices by decreasing E[Y_i]; ties broken by lower index."""
    ey = np.asarray(y, dtype=float) @ space.probabilities
    order = np.lexsort((np.arange(ey.size), -ey))
    return tuple(int(i) for i in order)
