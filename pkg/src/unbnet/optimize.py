"""Design rules: repetition count, BS/band resource bound, band-selection probabilities."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .analytic import _harmonic0, compositions, harmonic
from .model import DerivedParams, NetworkConfig


class OptimalRepetitions(NamedTuple):
    n: int
    saturated: bool     # no N <= N_max met the condition; n == N_max


@dataclass(frozen=True)
class SimplexPoint:
    p: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool = True
    nu: float | None = None      # equality multiplier, when known in closed form


class ConvergenceWarning(UserWarning):
    pass


def repetition_ratio(d: DerivedParams, cfg: NetworkConfig) -> float:
    """Incumbent-to-UNB interference ratio a3/a2 that decides the repetition count."""
    a2 = cfg.beta_T * (cfg.beta_F * cfg.b / (cfg.M * cfg.B)) * d.lambda_T * cfg.lambda_IoT
    a3 = d.incumbent_term
    if a2 == 0:
        if a3 == 0:
            raise ValueError("no interferers at all: any N works, use N* = 1")
        raise ValueError("no UNB interferers: the ratio is undefined (success grows with N)")
    return a3 / a2


def optimal_repetitions(d: DerivedParams, cfg: NetworkConfig, N_max: int = 60) -> OptimalRepetitions:
    """Smallest N with (1+N) H_N - N >= a3/a2.

    The left side is increasing in N, so this N maximises H_N / (a2 N + a3).
    Equality marks a tie between N and N+1, resolved toward fewer repetitions.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    ratio = repetition_ratio(d, cfg)
    H = 0.0
    for n in range(1, N_max + 1):
        H += 1.0 / n
        if (1 + n) * H - n >= ratio:
            return OptimalRepetitions(n, False)
    return OptimalRepetitions(N_max, True)


def min_resource_product(eps: float, d: DerivedParams, cfg: NetworkConfig,
                         nearest: bool = False) -> float:
    """Smallest M * lambda_B reaching success probability eps with one transmission."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if cfg.N != 1:
        raise ValueError("the resource bound is stated for N = 1")
    c = ((cfg.beta_T * d.lambda_T * cfg.beta_F * (cfg.b / cfg.B) * cfg.lambda_IoT
          + d.P_hat_I ** d.delta * d.lambda_dtilde_I) * cfg.tau ** d.delta / d.xi)
    g = eps / (1 - eps) if nearest else -math.log1p(-eps)
    return c * g


def bs_density_reduction(eps: float) -> float:
    """lambda_B(no association) / lambda_B(nearest BS) at the same target eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return (1 - eps) / eps * -math.log1p(-eps)


def band_costs(d: DerivedParams, cfg: NetworkConfig) -> np.ndarray:
    """c_m = xi tau^-delta H_N lambda_B / (UNB + incumbent density in band m)."""
    dens = d.lambda_tilde_IoT + d.band_incumbent_terms
    return d.xi * cfg.tau ** -d.delta * harmonic(cfg.N) * cfg.lambda_B / dens


def _selection(c, log_nu):
    return np.maximum(0.0, (np.log(c) - log_nu) / c)


def kkt_residual_constrained(c, p, nu) -> float:
    """Largest violation of stationarity / complementary slackness for sum exp(-c p)."""
    grad = c * np.exp(-c * p)         # minus the objective gradient
    active = p > 0
    r_active = np.abs(nu - grad[active]).max(initial=0.0)
    r_zero = np.maximum(0.0, grad[~active] - nu).max(initial=0.0)
    return float(max(r_active, r_zero, abs(p.sum() - 1.0)))


def optimize_band_constrained(c, rtol: float = 1e-12, max_iter: int = 200) -> SimplexPoint:
    """Minimise sum_m exp(-c_m p_m) over the simplex (water-filling in log space).

    p_m = max{0, ln(c_m/nu)/c_m}; the total decreases in nu, and the bracket
    [min c e^-c, max c] always contains the root. Bisection runs on log(nu)
    because c e^-c underflows for large costs.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or c.size == 0 or np.any(~(c > 0)):
        raise ValueError("band costs must be positive")
    if c.size == 1:
        return SimplexPoint(np.ones(1), float(np.exp(-c[0])), 0.0, 0, True, float(c[0] * np.exp(-c[0])))
    lo, hi = float(np.min(np.log(c) - c)), float(np.max(np.log(c)))
    it = 0
    # |d log nu| <= rtol is a relative tolerance on nu
    while it < max_iter and hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if _selection(c, mid).sum() > 1.0:
            lo = mid
        else:
            hi = mid
        it += 1
    assert hi - lo <= rtol, "bisection on nu did not converge"
    log_nu = 0.5 * (lo + hi)
    p = _selection(c, log_nu)
    p /= p.sum()
    nu = math.exp(log_nu)
    return SimplexPoint(p, float(np.exp(-c * p).sum()), kkt_residual_constrained(c, p, nu), it, True, nu)


def project_simplex(y) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p = 1} (sort-based)."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


@dataclass(frozen=True)
class HoppedProblem:
    """sum_i w_i exp(-A_i . p) with A[i, m] = H_{n_im} * r_m."""

    weights: np.ndarray
    A: np.ndarray

    @classmethod
    def from_params(cls, d: DerivedParams, cfg: NetworkConfig) -> "HoppedProblem":
        table = compositions(cfg.N, cfg.M)
        dens = d.lambda_tilde_IoT + d.band_incumbent_terms
        r = d.xi * cfg.tau ** -d.delta * cfg.lambda_B / dens
        H = np.array([_harmonic0(n) for n in range(cfg.N + 1)])
        return cls(table.weights, H[table.counts] * r)

    def value(self, p) -> float:
        return float(self.weights @ np.exp(-self.A @ p))

    def gradient(self, p) -> np.ndarray:
        e = self.weights * np.exp(-self.A @ p)
        return -(self.A.T @ e)


def simplex_kkt_residual(grad, p, support_tol: float = 1e-10) -> float:
    """For min f on the simplex: grad_m equals min grad on the support, grad_m >= it off support."""
    grad = np.asarray(grad, dtype=float)
    nu = grad[p > support_tol].mean() if np.any(p > support_tol) else grad.min()
    on = p > support_tol
    r_on = np.abs(grad[on] - nu).max(initial=0.0)
    r_off = np.maximum(0.0, nu - grad[~on]).max(initial=0.0)
    return float(max(r_on, r_off))


def optimize_band_hopped(d: DerivedParams, cfg: NetworkConfig, tol: float = 1e-8,
                         max_iter: int = 100_000, problem: HoppedProblem | None = None) -> SimplexPoint:
    """Projected gradient with Armijo backtracking on the band-hopped objective."""
    prob = HoppedProblem.from_params(d, cfg) if problem is None else problem
    M = prob.A.shape[1]
    p = np.full(M, 1.0 / M)
    f = prob.value(p)
    step = 1.0
    best = (f, p)
    for it in range(1, max_iter + 1):
        g = prob.gradient(p)
        # gradient mapping at unit step decides convergence
        if np.linalg.norm(p - project_simplex(p - g)) < tol:
            break
        step *= 2.0
        while True:
            q = project_simplex(p - step * g)
            fq = prob.value(q)
            if fq <= f + g @ (q - p) + (0.5 / step) * np.dot(q - p, q - p) or step < 1e-30:
                break
            step *= 0.5
        if np.array_equal(q, p):
            break
        p, f = q, fq
        if f < best[0]:
            best = (f, p)
    else:
        warnings.warn("band-hopped optimisation hit its iteration cap; returning best iterate",
                      ConvergenceWarning, stacklevel=2)
        f, p = best
        return SimplexPoint(p, f, simplex_kkt_residual(prob.gradient(p), p), max_iter, False)
    return SimplexPoint(p, f, simplex_kkt_residual(prob.gradient(p), p), it, True)
