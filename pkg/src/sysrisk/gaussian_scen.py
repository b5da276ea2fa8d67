"""Scenario-dependent capital for jointly normal positions.

The admissible allocations here are two-valued: institution i receives

    Y_i = m_i + alpha_i * 1{S <= d},      sum_i alpha_i = 0,

where S = sum_i X_i is the aggregated system position and d the distress
trigger.  The total capital is sum m_i in both states, so rho = sum m_i; the
alpha transfer re-shuffles capital toward institutions that suffer most when
the system as a whole is down.

First-order conditions (budget constraint sum_i E[(X_i + Y_i - d_i)^-] = gamma
active, multiplier lambda < 0):

  * equal shortfall pressure: the probability of institution i being short,
        P(X_i < d_i - m_i - alpha_i, S <= d) + P(X_i < d_i - m_i, S > d)
      = F_i(d_i - m_i - alpha_i, d) + Phi((d_i - mu_i - m_i)/sigma_i)
        - F_i(d_i - m_i, d),                                  all equal,
  * equal joint tail mass in the distressed state,
        F_i(d_i - m_i - alpha_i, d)                           all equal,

with F_i(x, y) = P(X_i <= x, S <= y), a bivariate normal probability.  The
solver runs a damped Newton iteration on these 2N-1 equations plus the budget
constraint.

The bivariate CDF itself is evaluated by integrating the exact single-integral
reduction with fixed-order Gauss-Legendre panels; no library routine offers
the 1e-12 absolute accuracy wanted here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import ConvergenceError, GaussianSystem
from .gaussian_det import norm_pdf, optimal_deterministic, shortfall_expectation

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_CUTOFF = 9.0            # |x| beyond which Phi(x) is 0/1 to < 1e-18
BINORM_TOL = 1e-12
QUAD_TOL = 1e-10
NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 200


def _panels(f, a: float, b: float, n_panels: int) -> float:
    """Integral of f over [a, b] with n_panels 64-point Gauss-Legendre panels."""
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    xs = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = f(xs.ravel()).reshape(xs.shape)
    return float((vals @ _GL_WEIGHTS) @ half)


def binorm_cdf(h: float, k: float, r: float) -> float:
    """P(Z1 <= h, Z2 <= k) for standard normals with correlation r.

    Exact reduction  integral_{-inf}^{h} phi(x) Phi((k - r x)/sqrt(1-r^2)) dx,
    integrated with Gauss-Legendre panels whose width shrinks with sqrt(1-r^2)
    so the inner transition stays resolved.  Absolute error <= 1e-12.
    |r| = 1 collapses to the comonotone/antimonotone closed forms.
    """
    if math.isnan(h) or math.isnan(k) or math.isnan(r):
        return math.nan
    if not -1.0 - 1e-12 <= r <= 1.0 + 1e-12:
        raise ValueError("correlation must lie in [-1, 1]")
    r = min(1.0, max(-1.0, r))
    if r >= 1.0 - 1e-15:
        return float(ndtr(min(h, k)))
    if r <= -1.0 + 1e-15:
        return float(max(0.0, ndtr(h) + ndtr(k) - 1.0))
    if h <= -_CUTOFF or k <= -_CUTOFF:
        return 0.0
    if k >= _CUTOFF:
        return float(ndtr(h))
    if h >= _CUTOFF:
        return float(ndtr(k))
    s = math.sqrt((1.0 - r) * (1.0 + r))
    a, b = -_CUTOFF, min(h, _CUTOFF)
    # inner Phi varies on the x-scale s/|r|; keep several panels per transition
    width = min(0.5, 3.0 * s / max(abs(r), 0.1))
    n_panels = max(1, int(math.ceil((b - a) / width)))

    def f(x):
        return norm_pdf(x) * ndtr((k - r * x) / s)

    return float(min(1.0, max(0.0, _panels(f, a, b, n_panels))))


@dataclass(eq=False)
class _JointGeometry:
    """Joint law of each (X_i, S), S = sum X_i, for a Gaussian system."""

    mu: np.ndarray
    sigma: np.ndarray
    mu_s: float
    sigma_s: float
    cov_is: np.ndarray      # cov(X_i, S) = row sums of the covariance
    corr_is: np.ndarray

    @classmethod
    def of(cls, system: GaussianSystem) -> "_JointGeometry":
        cov_is = system.cov.sum(axis=1)
        var_s = float(system.cov.sum())
        if var_s <= 0.0:
            raise ValueError("aggregated position has zero variance")
        sigma_s = math.sqrt(var_s)
        sigma = system.sigma
        return cls(
            mu=system.mu,
            sigma=sigma,
            mu_s=float(system.mu.sum()),
            sigma_s=sigma_s,
            cov_is=cov_is,
            corr_is=np.clip(cov_is / (sigma * sigma_s), -1.0, 1.0),
        )

    def joint_cdf(self, i: int, x: float, y: float) -> float:
        """F_i(x, y) = P(X_i <= x, S <= y)."""
        return binorm_cdf(
            (x - self.mu[i]) / self.sigma[i],
            (y - self.mu_s) / self.sigma_s,
            float(self.corr_is[i]),
        )

    def tail_moment(self, i: int, lo: float, hi: float, y: float) -> float:
        """Oriented integral of x * f_{X_i}(x) * P(S <= y | X_i = x) over [lo, hi].

        The conditional S | X_i = x is normal with mean mu_s + (c_i/sigma_i^2)
        (x - mu_i) and variance sigma_s^2 - c_i^2/sigma_i^2, so the double
        integral over the joint density reduces to one smooth 1-d integral.
        Refined by panel doubling until successive values agree to 1e-10.
        """
        if lo == hi:
            return 0.0
        sign = 1.0
        if lo > hi:
            lo, hi, sign = hi, lo, -1.0
        mu_i, s_i = self.mu[i], self.sigma[i]
        lo = max(lo, mu_i - 9.5 * s_i)
        hi = min(hi, mu_i + 9.5 * s_i)
        if lo >= hi:
            return 0.0
        slope = self.cov_is[i] / s_i**2
        cond_var = self.sigma_s**2 - self.cov_is[i] ** 2 / s_i**2
        cond_sd = math.sqrt(max(cond_var, 1e-300))

        def f(x):
            cond_mu = self.mu_s + slope * (x - mu_i)
            return x * norm_pdf((x - mu_i) / s_i) / s_i * ndtr((y - cond_mu) / cond_sd)

        n = max(2, int(math.ceil((hi - lo) / (0.25 * s_i))))
        value = _panels(f, lo, hi, n)
        for _ in range(6):
            n *= 2
            refined = _panels(f, lo, hi, n)
            if abs(refined - value) <= QUAD_TOL:
                return sign * refined
            value = refined
        raise ConvergenceError("tail moment quadrature did not stabilize")


def psi_two_state(
    system: GaussianSystem,
    m,
    alpha,
    d=None,
    trigger: float = 0.0,
) -> float:
    """Expected total shortfall under the two-state allocation (m, alpha).

    Psi(m, alpha) = sum_i E[(X_i + m_i + alpha_i 1{S <= trigger} - d_i)^-]
                  = sum_i [ psi_i(m_i)
                            + (m_i - d_i)      F_i(d_i - m_i,           trigger)
                            - (m_i + alpha_i - d_i) F_i(d_i - m_i - alpha_i, trigger)
                            + T_i ],
    with T_i the oriented tail moment over [d_i - m_i - alpha_i, d_i - m_i].
    alpha = 0 reproduces the deterministic budget sum_i psi_i(m_i).
    """
    geo = _JointGeometry.of(system)
    m = np.asarray(m, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    n = system.n
    if m.shape != (n,) or alpha.shape != (n,):
        raise ValueError("m and alpha must have one entry per institution")
    if abs(alpha.sum()) > 1e-10 * max(1.0, float(np.abs(alpha).max())):
        raise ValueError("alpha must sum to zero")
    d = np.zeros(n) if d is None else np.asarray(d, dtype=float)
    total = 0.0
    for i in range(n):
        total += shortfall_expectation(m[i], geo.mu[i], geo.sigma[i], d[i])
        if alpha[i] != 0.0:
            total += (m[i] - d[i]) * geo.joint_cdf(i, d[i] - m[i], trigger)
            total -= (m[i] + alpha[i] - d[i]) * geo.joint_cdf(
                i, d[i] - m[i] - alpha[i], trigger
            )
            total += geo.tail_moment(i, d[i] - m[i] - alpha[i], d[i] - m[i], trigger)
    return total


@dataclass(eq=False)
class TwoStateSolution:
    m: np.ndarray            # capital in the calm state (S > trigger)
    alpha: np.ndarray        # distress-state transfer (sums to zero)
    rho: float               # total capital = sum m
    lam: float               # budget multiplier (negative)
    trigger: float
    gamma: float
    d: np.ndarray
    residual: float          # sup-norm of the first-order system at the solution
    iterations: int
    converged: bool

    @property
    def calm_allocation(self) -> np.ndarray:
        """Capital held by each institution when S > trigger (equals m)."""
        return self.m

    @property
    def distress_allocation(self) -> np.ndarray:
        """Capital held by each institution when S <= trigger (m + alpha).

        This is the better-identified half of the solution: near the optimum
        the objective is extremely flat along shifts that move capital
        between the calm-state components while keeping the distressed ones
        fixed, so distress-state numbers are the ones worth quoting.
        """
        return self.m + self.alpha

    @property
    def transfer_size(self) -> float:
        """Largest absolute distress transfer, a scale for the reshuffle."""
        return float(np.abs(self.alpha).max())


def solve_two_state(
    system: GaussianSystem,
    gamma: float,
    d=None,
    trigger: float = 0.0,
) -> TwoStateSolution:
    """Optimal two-state allocation by damped Newton on the first-order system.

    Unknowns are m (N) and the first N-1 transfers (the last is minus their
    sum).  Starts from the deterministic optimum with a small alpha
    perturbation; a second attempt with the opposite perturbation is made if
    the first stalls.  Convergence: residual sup-norm <= 1e-8.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    n = system.n
    if n < 2:
        raise ValueError("need at least two institutions to transfer capital")
    d_arr = np.zeros(n) if d is None else np.asarray(d, dtype=float)
    det = optimal_deterministic(system, gamma, d_arr)   # also proves feasibility
    geo = _JointGeometry.of(system)

    def full_alpha(a_head: np.ndarray) -> np.ndarray:
        return np.append(a_head, -a_head.sum())

    def residuals(z: np.ndarray) -> np.ndarray:
        m = z[:n]
        alpha = full_alpha(z[n:])
        pressure = np.empty(n)   # P(institution i short) under the allocation
        tail = np.empty(n)       # F_i at the distressed-state kink
        for i in range(n):
            zi = (d_arr[i] - geo.mu[i] - m[i]) / geo.sigma[i]
            tail[i] = geo.joint_cdf(i, d_arr[i] - m[i] - alpha[i], trigger)
            pressure[i] = (
                tail[i]
                + float(ndtr(zi))
                - geo.joint_cdf(i, d_arr[i] - m[i], trigger)
            )
        out = np.empty(2 * n - 1)
        out[: n - 1] = pressure[:-1] - pressure[-1]
        out[n - 1 : 2 * n - 2] = tail[:-1] - tail[-1]
        out[2 * n - 2] = psi_two_state(system, m, alpha, d_arr, trigger) - gamma
        return out

    def attempt(z0: np.ndarray):
        z = z0.copy()
        res = residuals(z)
        best = float(np.abs(res).max())
        for it in range(1, NEWTON_MAX_ITER + 1):
            if best <= NEWTON_TOL:
                return z, best, it - 1, True
            jac = np.empty((z.size, z.size))
            for j in range(z.size):
                h = 1e-6 * max(1.0, abs(z[j]))
                zp = z.copy()
                zp[j] += h
                jac[:, j] = (residuals(zp) - res) / h
            try:
                step = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(jac, -res, rcond=None)[0]
            scale = 1.0
            for _ in range(9):
                cand = z + scale * step
                cres = residuals(cand)
                cbest = float(np.abs(cres).max())
                if cbest < best:
                    z, res, best = cand, cres, cbest
                    break
                scale *= 0.5
            else:
                return z, best, it, False   # stalled
        return z, best, NEWTON_MAX_ITER, best <= NEWTON_TOL

    z0 = np.concatenate([det.m, np.zeros(n - 1)])
    z0[n] = 1e-3
    z, residual, iters, ok = attempt(z0)
    if not ok:
        z0[n] = -1e-3
        z2, r2, it2, ok2 = attempt(z0)
        if ok2 or r2 < residual:
            z, residual, iters, ok = z2, r2, iters + it2, ok2
    m = z[:n]
    alpha = full_alpha(z[n:])
    denom = (
        float(ndtr((d_arr[-1] - geo.mu[-1] - m[-1]) / geo.sigma[-1]))
        - geo.joint_cdf(n - 1, d_arr[-1] - m[-1], trigger)
        + geo.joint_cdf(n - 1, d_arr[-1] - m[-1] - alpha[-1], trigger)
    )
    lam = -1.0 / denom if abs(denom) > 1e-14 else math.nan
    return TwoStateSolution(
        m=m,
        alpha=alpha,
        rho=float(m.sum()),
        lam=lam,
        trigger=trigger,
        gamma=gamma,
        d=d_arr,
        residual=residual,
        iterations=iters,
        converged=bool(ok),
    )
