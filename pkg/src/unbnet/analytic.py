"""Closed-form success probabilities and transmission capacities.

All ``ps_*`` functions assume an interference-limited network (noise
ignored) except :func:`ps_exact_with_noise`, which integrates the radial
expressions numerically with the noise factor kept.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

from .model import (DerivedParams, Hopping, IncumbentConfig, IncumbentKind, NetworkConfig,
                    Protocol, ProtocolSpec, derive_params)

MAX_N = 60
MAX_COMPOSITIONS = 10**6


class DegenerateWarning(UserWarning):
    """A probability was returned for a degenerate input (no BSs, no interferers)."""


class QuadratureError(RuntimeError):
    def __init__(self, message, abserr):
        self.abserr = abserr
        super().__init__(f"{message} (achieved error estimate {abserr:.3g})")


class Capacity(NamedTuple):
    density: float      # devices per km^2
    clamped: bool       # True when the closed form went negative and was set to 0


@dataclass(frozen=True)
class CompositionTable:
    counts: np.ndarray   # (n_compositions, M) integer, each row sums to N
    weights: np.ndarray  # multinomial probabilities, M**-N * N!/prod(n_m!)

    def __len__(self):
        return len(self.weights)


def harmonic(N: int) -> float:
    if N < 1 or int(N) != N:
        raise ValueError("harmonic number needs N >= 1")
    return math.fsum(1.0 / k for k in range(1, int(N) + 1))


def _harmonic0(n: int) -> float:
    return 0.0 if n == 0 else harmonic(n)


def _check_N(N: int) -> int:
    N = int(N)
    if not 1 <= N <= MAX_N:
        raise ValueError(f"N must lie in [1, {MAX_N}] for the alternating sums")
    return N


def alternating_sum(N: int, term: Callable[[int], float], start: int = 0) -> float:
    """sum_{k=start..N} C(N,k) (-1)^k term(k), exact binomials and fsum."""
    return math.fsum(math.comb(N, k) * (-1) ** k * term(k) for k in range(start, N + 1))


def _total_density(d: DerivedParams) -> float:
    return d.lambda_tilde_IoT + d.incumbent_term


def ps_nearest(d: DerivedParams, cfg: NetworkConfig) -> float:
    """Success probability with nearest-BS association and random hopping."""
    N = _check_N(cfg.N)
    if cfg.lambda_B == 0:
        warnings.warn("no BSs: success probability is 0", DegenerateWarning, stacklevel=2)
        return 0.0
    a = cfg.tau ** d.delta * _total_density(d) / (d.xi * cfg.lambda_B)
    # k = 0 term is exactly 1 and cancels the leading one
    ps = -alternating_sum(N, lambda k: 1.0 / (1.0 + k * a), start=1)
    return min(1.0, max(0.0, ps))


def ps_no_assoc(d: DerivedParams, cfg: NetworkConfig) -> float:
    """Success probability with no BS association (broadcast), random hopping."""
    N = _check_N(cfg.N)
    if cfg.lambda_B == 0:
        return 0.0
    dens = _total_density(d)
    if dens == 0:
        warnings.warn("no interferers in an interference-limited model: success probability is 1",
                      DegenerateWarning, stacklevel=2)
        return 1.0
    return -math.expm1(-d.xi * cfg.tau ** -d.delta * harmonic(N) * cfg.lambda_B / dens)


def ps_pn_nearest(d: DerivedParams, cfg: NetworkConfig) -> float:
    """Nearest-BS association with pseudorandom (shared-pattern) hopping."""
    N = _check_N(cfg.N)
    if cfg.lambda_B == 0:
        warnings.warn("no BSs: success probability is 0", DegenerateWarning, stacklevel=2)
        return 0.0
    scale = cfg.tau ** d.delta / (d.xi * cfg.lambda_B)

    def term(k):
        return 1.0 / (1.0 + scale * (k ** d.delta * d.lambda_tilde_IoT + k * d.incumbent_term))

    ps = -alternating_sum(N, term, start=1)
    return min(1.0, max(0.0, ps))


def ps_pn_no_assoc(d: DerivedParams, cfg: NetworkConfig) -> float:
    """No BS association with pseudorandom hopping."""
    N = _check_N(cfg.N)
    if cfg.lambda_B == 0:
        return 0.0
    if d.lambda_tilde_IoT == 0 and d.incumbent_term == 0:
        warnings.warn("no interferers in an interference-limited model: success probability is 1",
                      DegenerateWarning, stacklevel=2)
        return 1.0
    # weights sum to one, so every term is at most 1 whatever the density scale
    dens = _total_density(d)
    w_iot, w_inc = d.lambda_tilde_IoT / dens, d.incumbent_term / dens
    s = alternating_sum(N, lambda k: 1.0 / (k ** d.delta * w_iot + k * w_inc), start=1)
    with np.errstate(over="ignore"):
        scale = d.xi * cfg.tau ** -d.delta * cfg.lambda_B / dens
    ps = -math.expm1(scale * s) if s else 0.0
    return min(1.0, max(0.0, ps))


def _simplex(p, M) -> np.ndarray:
    if p is None:
        return np.full(M, 1.0 / M)
    p = np.asarray(p, dtype=float)
    if p.shape != (M,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"p must be a probability vector of length M={M}")
    return p


def band_rates(d: DerivedParams, cfg: NetworkConfig, p=None) -> np.ndarray:
    """Per-band exponent xi*tau^-delta*p_m*lambda_B / (interferer density in band m), per unit H."""
    p = _simplex(p, cfg.M)
    dens = d.lambda_tilde_IoT + d.band_incumbent_terms
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rate = d.xi * cfg.tau ** -d.delta * p * cfg.lambda_B / dens
    # a band with BSs but no interferers decodes with certainty
    return np.where(dens == 0, np.where(p * cfg.lambda_B > 0, np.inf, 0.0), rate)


def ps_band_constrained(d: DerivedParams, cfg: NetworkConfig, p=None) -> float:
    """All N repetitions in one uniformly chosen band; BSs listen to band m w.p. p_m."""
    N = _check_N(cfg.N)
    rates = band_rates(d, cfg, p)
    fail = np.exp(-harmonic(N) * rates)
    return float(1.0 - math.fsum(fail) / cfg.M)


def compositions(N: int, M: int) -> CompositionTable:
    """Every way of spreading N repetitions over M bands with its multinomial weight."""
    N, M = int(N), int(M)
    if N < 0 or M < 1:
        raise ValueError("need N >= 0 and M >= 1")
    size = math.comb(N + M - 1, M - 1)
    if size > MAX_COMPOSITIONS:
        raise ValueError(
            f"{size} compositions of N={N} over M={M} exceed the {MAX_COMPOSITIONS} guard; "
            "use the Monte Carlo simulator instead")
    counts = np.empty((size, M), dtype=np.int64)
    weights = np.empty(size)
    total = M ** N
    fN = math.factorial(N)
    # stars and bars: choose M-1 bar positions among N+M-1 slots
    for row, bars in enumerate(itertools.combinations(range(N + M - 1), M - 1)):
        edges = (-1,) + bars + (N + M - 1,)
        comp = [edges[i + 1] - edges[i] - 1 for i in range(M)]
        counts[row] = comp
        coef = fN
        for n in comp:
            coef //= math.factorial(n)
        weights[row] = coef / total
    return CompositionTable(counts, weights)


def ps_band_hopped(d: DerivedParams, cfg: NetworkConfig, p=None,
                   table: CompositionTable | None = None) -> float:
    """Each repetition picks its band independently; BSs listen to band m w.p. p_m."""
    N = _check_N(cfg.N)
    rates = band_rates(d, cfg, p)
    table = compositions(N, cfg.M) if table is None else table
    H = np.array([_harmonic0(n) for n in range(N + 1)])
    with np.errstate(invalid="ignore"):
        # H_0 = 0 with an infinite rate means that band saw no repetition
        contrib = np.where(table.counts == 0, 0.0, H[table.counts] * rates)
    success = -np.expm1(-contrib.sum(axis=1))
    return float(math.fsum(table.weights * success))


def _check_gamma(gamma):
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")


def _clamped(value: float) -> Capacity:
    if value < 0:
        return Capacity(0.0, True)
    return Capacity(value, False)


def tc_nearest(gamma: float, d: DerivedParams, cfg: NetworkConfig) -> Capacity:
    """Transmission capacity with nearest-BS association, single transmission."""
    _check_gamma(gamma)
    if cfg.N != 1:
        raise ValueError("closed-form nearest-BS capacity needs N=1; use tc_numeric")
    pre = gamma * cfg.M * cfg.B / (cfg.beta_T * cfg.beta_F * cfg.b * d.lambda_T)
    inner = d.xi * cfg.tau ** -d.delta * cfg.lambda_B / (gamma / (1 - gamma)) - d.incumbent_term
    return _clamped(pre * inner)


def _tc_broadcast(gamma, d, cfg, bands, incumbent):
    pre = gamma * bands * cfg.B / (cfg.beta_T * cfg.beta_F * cfg.b * d.lambda_T)
    L = math.log(1.0 / (1.0 - gamma))
    inner = (d.xi * cfg.tau ** -d.delta * harmonic(cfg.N) * cfg.lambda_B / (cfg.N * L)
             - incumbent / cfg.N)
    return _clamped(pre * inner)


def tc_no_assoc(gamma: float, d: DerivedParams, cfg: NetworkConfig) -> Capacity:
    """Transmission capacity with no BS association (any N)."""
    _check_gamma(gamma)
    return _tc_broadcast(gamma, d, cfg, cfg.M, d.incumbent_term)


def tc_band_constrained(gamma: float, d: DerivedParams, cfg: NetworkConfig,
                        inc: IncumbentConfig) -> Capacity:
    """Band-constrained capacity for Type-I incumbents and uniform band selection."""
    _check_gamma(gamma)
    if inc.kind is not IncumbentKind.TYPE_I:
        raise ValueError("closed-form band-constrained capacity is for Type-I incumbents; "
                         "use tc_numeric")
    # M*min{1, B_I/(M B)} == min{M, B_I/B}; written so M=1 reproduces tc_no_assoc bit for bit
    incumbent = d.P_hat_I ** d.delta * (min(cfg.M, inc.B_I0 / cfg.B) * inc.lambda_I0)
    return _tc_broadcast(gamma, d, cfg, 1, incumbent)


def success_probability(cfg: NetworkConfig, inc: IncumbentConfig | None,
                        proto: ProtocolSpec) -> float:
    """Dispatch to the closed form matching ``proto``."""
    d = derive_params(cfg, inc)
    pn = proto.hopping is Hopping.PN
    if proto.protocol is Protocol.NEAREST_BS:
        return ps_pn_nearest(d, cfg) if pn else ps_nearest(d, cfg)
    if proto.protocol in (Protocol.NO_ASSOCIATION, Protocol.BENCHMARK_MULTIBAND):
        return ps_pn_no_assoc(d, cfg) if pn else ps_no_assoc(d, cfg)
    if pn:
        raise ValueError("PN hopping has no closed form for band-constrained/band-hopped access")
    if proto.protocol is Protocol.BAND_CONSTRAINED:
        return ps_band_constrained(d, cfg, proto.p)
    return ps_band_hopped(d, cfg, proto.p)


def tc_numeric(gamma: float, cfg: NetworkConfig, inc: IncumbentConfig | None,
               proto: ProtocolSpec, upper: float | None = None) -> Capacity:
    """Capacity gamma * F^-1(gamma) by root-finding the device density.

    Success probability decreases in the device density, so the root is
    bracketed between 0 and an upper density grown geometrically.
    """
    _check_gamma(gamma)

    def excess(lam):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateWarning)
            return success_probability(cfg.replace(lambda_IoT=lam), inc, proto) - gamma

    if excess(0.0) <= 0:
        return Capacity(0.0, True)
    hi = upper or max(cfg.lambda_B, 1e-9) * 1e3
    while excess(hi) > 0:
        hi *= 10
        if hi > 1e30:
            raise RuntimeError("could not bracket the capacity root")
    lam = optimize.brentq(excess, 0.0, hi, xtol=1e-12, rtol=1e-13, maxiter=500)
    return Capacity(gamma * lam, False)


def capacity(gamma: float, cfg: NetworkConfig, inc: IncumbentConfig | None,
             proto: ProtocolSpec) -> Capacity:
    """Closed-form capacity where one exists for ``proto``, numeric inversion otherwise."""
    inc = IncumbentConfig.none() if inc is None else inc
    if proto.hopping is Hopping.RANDOM:
        d = derive_params(cfg, inc)
        if proto.protocol is Protocol.NEAREST_BS and cfg.N == 1:
            return tc_nearest(gamma, d, cfg)
        if proto.protocol in (Protocol.NO_ASSOCIATION, Protocol.BENCHMARK_MULTIBAND):
            return tc_no_assoc(gamma, d, cfg)
        uniform = proto.p is None or np.allclose(proto.p, 1.0 / cfg.M, rtol=0, atol=1e-15)
        if proto.protocol is Protocol.BAND_CONSTRAINED and inc.kind is IncumbentKind.TYPE_I and uniform:
            return tc_band_constrained(gamma, d, cfg, inc)
    return tc_numeric(gamma, cfg, inc, proto)


def _radial(f, tail, scale, epsabs=1e-9):
    """Integrate f on [0, inf) by truncating at U with tail(U) <= 1e-12 * integral."""
    U = scale
    for _ in range(200):
        val, err = integrate.quad(f, 0.0, U, epsabs=epsabs, epsrel=1e-12, limit=500)
        if tail(U) <= 1e-12 * max(abs(val), 1e-300):
            break
        U *= 2.0
    else:
        raise QuadratureError("radial integral did not reach its tail tolerance", err)
    if err > max(epsabs, 1e-10 * abs(val)):
        raise QuadratureError("radial quadrature did not converge", err)
    return val


def ps_exact_with_noise(d: DerivedParams, cfg: NetworkConfig,
                        protocol: Protocol = Protocol.NO_ASSOCIATION) -> float:
    """Random-hopping success probability with thermal noise retained.

    Integrates over u = pi x^2 (x the BS distance); per-repetition failure
    at distance x is 1 - exp(-a u - tau P_hat_N x^alpha).
    """
    N = _check_N(cfg.N)
    if cfg.lambda_B == 0:
        return 0.0
    a = cfg.tau ** d.delta * _total_density(d) / d.xi
    c = cfg.tau * d.P_hat_N * math.pi ** (-cfg.alpha / 2)
    s = cfg.alpha / 2

    def per_rep_fail(u):
        return -math.expm1(-a * u - c * u ** s)

    if protocol is Protocol.NEAREST_BS:
        lam = cfg.lambda_B

        def f(u):
            return lam * math.exp(-lam * u) * per_rep_fail(u) ** N

        q = _radial(f, lambda U: math.exp(-lam * U), 1.0 / lam)
        return min(1.0, max(0.0, 1.0 - q))

    if protocol not in (Protocol.NO_ASSOCIATION, Protocol.BENCHMARK_MULTIBAND):
        raise ValueError("exact-with-noise path covers nearest-BS and no-association access")
    if a == 0 and c == 0:
        return 1.0

    def g(u):
        # 1 - Q(u)^N, the probability a BS at that distance decodes some repetition
        q = per_rep_fail(u)
        return 1.0 if q == 0 else -math.expm1(N * math.log(q))

    def tail(U):
        bounds = []
        if a > 0:
            bounds.append(N * math.exp(-a * U) / a)
        if c > 0:
            bounds.append(N * math.exp(-c * U ** s) / (c * s * U ** (s - 1)))
        return min(bounds)

    scale = 1.0 / a if a > 0 else c ** (-1 / s)
    integral = _radial(g, tail, scale)
    return -math.expm1(-cfg.lambda_B * integral)
