"""Closed-form risk measures on finite scenario spaces.

Three families of total-capital measures for the shortfall aggregation
Lambda(x) = -sum_i (x_i - d_i)^-:

* ``rho_ag``             -- capital injected *after* aggregation,
* ``rho_deterministic``  -- scenario-independent per-institution capital,
* ``rho_constrained``    -- scenario-dependent capital with per-institution
                            floors and scenario-constant total.

All three have exact expressions in terms of scenario-wise maxima, so no
optimization is run here.  The worst-case acceptance and the expected-shortfall
acceptance lead to identical values for the two "before aggregation" measures
(an outcome that is <= 0 everywhere has nonpositive ES only if it vanishes),
hence those take no criterion argument.
"""
from __future__ import annotations

import numpy as np

from .core import (
    AcceptanceCriterion,
    ExpectedShortfall,
    RiskVector,
    WorstCase,
)

DEFAULT_ES_LEVEL = 0.05


def expected_shortfall(z, probabilities, level: float = DEFAULT_ES_LEVEL) -> float:
    """Discrete ES of outcome z at tail level q (positive = risky).

    Uses the lower q-quantile v = inf{x : P(z <= x) >= q} and averages the
    strict left tail plus the remaining quantile mass:

        ES_q(z) = -(1/q) * ( sum_{z_j < v} p_j z_j + (q - P(z < v)) * v ).

    For a constant outcome c this returns -c.
    """
    z = np.asarray(z, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    if z.shape != p.shape or z.ndim != 1:
        raise ValueError("z and probabilities must be 1-d of equal length")
    if not 0.0 < level < 1.0:
        raise ValueError("tail level must lie in (0, 1)")
    order = np.argsort(z, kind="stable")
    zs, ps = z[order], p[order]
    cum = np.cumsum(ps)
    # first index where cumulative mass reaches the tail level (float guard)
    idx = int(np.searchsorted(cum, level - 1e-15))
    v = zs[idx]
    below = zs < v
    mass_below = float(ps[below].sum())
    tail_sum = float(ps[below] @ zs[below]) + (level - mass_below) * v
    return -tail_sum / level


def _shortfall_outcomes(x: RiskVector, d: np.ndarray) -> np.ndarray:
    """Per-scenario aggregated shortfall: -sum_i (X_i - d_i)^-  (length M, <= 0)."""
    return np.minimum(x.positions - d[:, None], 0.0).sum(axis=0)


def _critical_levels(x: RiskVector, d) -> np.ndarray:
    if d is None:
        return np.zeros(x.n)
    d = np.asarray(d, dtype=float)
    if d.shape != (x.n,):
        raise ValueError("critical levels d must have one entry per institution")
    return d


def rho_ag(
    x: RiskVector,
    criterion: AcceptanceCriterion = WorstCase(),
    d=None,
) -> float:
    """Capital added to the *aggregated* outcome.

    rho = inf{ c : Lambda(X) + c acceptable }.  For worst-case acceptance this
    is the largest scenario shortfall; for ES acceptance it is the ES of the
    aggregated outcome.
    """
    d = _critical_levels(x, d)
    z = _shortfall_outcomes(x, d)
    if isinstance(criterion, WorstCase):
        return float(-z.min())
    if isinstance(criterion, ExpectedShortfall):
        return expected_shortfall(z, x.space.probabilities, criterion.level)
    raise ValueError("rho_ag supports WorstCase and ExpectedShortfall acceptance")


def rho_deterministic(x: RiskVector, d=None) -> tuple[float, np.ndarray]:
    """Cheapest deterministic per-institution capital making every scenario safe.

    m_hat_i = max_j (d_i - X_ij); returns (sum of m_hat, m_hat).  The value is
    the same under worst-case and under expected-shortfall acceptance.
    """
    d = _critical_levels(x, d)
    m_hat = (d[:, None] - x.positions).max(axis=1)
    return float(m_hat.sum()), m_hat


def rho_constrained(x: RiskVector, floors, d=None) -> tuple[float, np.ndarray]:
    """Scenario-dependent capital with per-institution floors gamma_i <= 0.

    Institution i may be charged down to gamma_i in good scenarios (gamma_i =
    -inf removes the floor).  The admissible total must be scenario-constant,
    so the optimum is the worst scenario's total requirement:

        rho = max_j sum_i max(d_i - X_ij, gamma_i)

    Returns (rho, requirement matrix L with L_ij = max(d_i - X_ij, gamma_i)).
    An optimal allocation keeps every institution at its requirement and parks
    the slack (rho - column total) anywhere, e.g. with institution 0.
    """
    d = _critical_levels(x, d)
    g = np.asarray(floors, dtype=float)
    if g.shape != (x.n,):
        raise ValueError("floors must have one entry per institution")
    if np.any(g > 0.0):
        raise ValueError("floors must be <= 0")
    requirement = np.maximum(d[:, None] - x.positions, g[:, None])
    rho = float(requirement.sum(axis=0).max())
    return rho, requirement


def constrained_allocation(x: RiskVector, floors, d=None) -> np.ndarray:
    """An optimal allocation for rho_constrained (slack parked with institution 0)."""
    rho, req = rho_constrained(x, floors, d)
    y = req.copy()
    y[0] += rho - req.sum(axis=0)
    return y
