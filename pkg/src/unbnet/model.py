"""Network, incumbent and protocol parameters plus the derived densities.

Units are fixed throughout the package: Hz, seconds, watts, km and
densities per km^2. dB values only appear at the configuration-file and
CLI boundary (see :mod:`unbnet.config`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Protocol(enum.Enum):
    NEAREST_BS = "nearest"
    NO_ASSOCIATION = "no-association"
    BENCHMARK_MULTIBAND = "benchmark"
    BAND_CONSTRAINED = "band-constrained"
    BAND_HOPPED = "band-hopped"

    @classmethod
    def parse(cls, name: str) -> "Protocol":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "nearestbs": cls.NEAREST_BS,
            "nearest-bs": cls.NEAREST_BS,
            "noassociation": cls.NO_ASSOCIATION,
            "no-assoc": cls.NO_ASSOCIATION,
            "sigfox": cls.NO_ASSOCIATION,
            "benchmarkmultiband": cls.BENCHMARK_MULTIBAND,
            "benchmark-multiband": cls.BENCHMARK_MULTIBAND,
            "bandconstrained": cls.BAND_CONSTRAINED,
            "bandhopped": cls.BAND_HOPPED,
        }
        if key in aliases:
            return aliases[key]
        return cls(key)


class Hopping(enum.Enum):
    RANDOM = "random"
    PN = "pn"


class IncumbentKind(enum.Enum):
    TYPE_I = "type1"
    TYPE_II = "type2"

    @classmethod
    def parse(cls, name: str) -> "IncumbentKind":
        key = name.strip().lower().replace("-", "").replace("_", "")
        table = {"type1": cls.TYPE_I, "typei": cls.TYPE_I, "i": cls.TYPE_I, "1": cls.TYPE_I,
                 "type2": cls.TYPE_II, "typeii": cls.TYPE_II, "ii": cls.TYPE_II, "2": cls.TYPE_II}
        try:
            return table[key]
        except KeyError:
            raise ValueError(f"unknown incumbent kind {name!r}") from None


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and protocol parameters of the UNB network."""

    b: float = 600.0                 # UNB signal bandwidth, Hz
    B: float = 200e3                 # multiplexing band, Hz
    M: int = 5                       # number of multiplexing bands
    N: int = 3                       # repetitions per packet
    K: int = 6                       # unique packets per reporting period
    T_tot: float = 3600.0            # reporting period, s
    T: float = 26 * 8 / 600.0        # single transmission duration, s
    P_IoT: float = 10 ** (14 / 10) * 1e-3   # W
    P_N: float = 10 ** (-146 / 10) * 1e-3   # W, over b
    lambda_B: float = 0.04           # BS density, per km^2
    lambda_IoT: float = 30e3 * 0.04  # device density, per km^2
    alpha: float = 3.5
    tau: float = 1.0                 # linear SINR threshold
    beta_T: float = 2.0
    beta_F: float = 2.0
    f_c: float = 902.2e6             # bookkeeping only

    def replace(self, **changes) -> "NetworkConfig":
        from dataclasses import replace
        return replace(self, **changes)

    @property
    def lambda_T(self) -> float:
        return self.K * self.T / self.T_tot

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha


@dataclass(frozen=True)
class IncumbentConfig:
    """Interfering (incumbent) networks.

    Type-I is a single network of bandwidth ``B_I0`` anywhere in the
    ``M*B`` spectrum. Type-II has one network per multiplexing band, given
    as parallel tuples ``B_I`` and ``lambda_I`` of length ``M``.
    Densities are effective active densities (activity already folded in).
    """

    kind: IncumbentKind = IncumbentKind.TYPE_I
    P_I: float = 10 ** (14 / 10) * 1e-3
    B_I0: float = 125e3
    lambda_I0: float = 0.0
    B_I: tuple = ()
    lambda_I: tuple = ()

    def replace(self, **changes) -> "IncumbentConfig":
        from dataclasses import replace
        return replace(self, **changes)

    @classmethod
    def none(cls) -> "IncumbentConfig":
        return cls(kind=IncumbentKind.TYPE_I, lambda_I0=0.0)

    @classmethod
    def type2(cls, B_I, lambda_I, P_I=10 ** (14 / 10) * 1e-3) -> "IncumbentConfig":
        return cls(kind=IncumbentKind.TYPE_II, P_I=P_I,
                   B_I=tuple(float(x) for x in B_I),
                   lambda_I=tuple(float(x) for x in lambda_I))

    def band_bandwidths(self, M: int) -> np.ndarray:
        if self.kind is IncumbentKind.TYPE_I:
            return np.full(M, float(self.B_I0))
        return np.asarray(self.B_I, dtype=float)

    def band_densities(self, M: int) -> np.ndarray:
        if self.kind is IncumbentKind.TYPE_I:
            return np.full(M, float(self.lambda_I0))
        return np.asarray(self.lambda_I, dtype=float)


@dataclass(frozen=True)
class ProtocolSpec:
    protocol: Protocol = Protocol.NO_ASSOCIATION
    hopping: Hopping = Hopping.RANDOM
    p: tuple | None = None

    def selection(self, M: int) -> np.ndarray:
        """Band-selection probabilities for BSs, uniform when unset."""
        if self.p is None:
            return np.full(M, 1.0 / M)
        return np.asarray(self.p, dtype=float)


@dataclass(frozen=True)
class DerivedParams:
    lambda_T: float
    delta: float
    xi: float
    P_hat_I: float              # Type-I value; band mean for Type-II
    P_hat_N: float
    lambda_tilde_IoT: float
    lambda_tilde_I: float
    lambda_dtilde_I: float
    # P_hat_I^delta * lambda_tilde_I, band-averaged for Type-II
    incumbent_term: float
    # per-band P_hat_I,m^delta * (incumbent density seen inside band m)
    band_incumbent_terms: np.ndarray = field(repr=False)


def xi_of(delta: float) -> float:
    return math.sin(math.pi * delta) / (delta * math.pi)


def validate(cfg: NetworkConfig, inc: IncumbentConfig | None = None,
             proto: ProtocolSpec | None = None) -> list[str]:
    """Return every violated invariant as a message naming the field."""
    v = []
    if not cfg.b > 0:
        v.append("b must be positive")
    if not cfg.b < cfg.B:
        v.append("b must be smaller than B")
    for name in ("M", "N", "K"):
        val = getattr(cfg, name)
        if int(val) != val or val < 1:
            v.append(f"{name} must be a positive integer")
    if not cfg.alpha > 2:
        v.append("alpha must exceed 2")
    if not cfg.tau > 0:
        v.append("tau must be positive")
    for name in ("T_tot", "T", "P_IoT", "P_N", "lambda_B", "lambda_IoT"):
        if not getattr(cfg, name) >= 0:
            v.append(f"{name} must be non-negative")
    if not cfg.P_IoT > 0:
        v.append("P_IoT must be positive")
    if not cfg.T_tot > 0:
        v.append("T_tot must be positive")
    for name in ("beta_T", "beta_F"):
        if not 1.0 <= getattr(cfg, name) <= 2.0:
            v.append(f"{name} must lie in [1, 2]")
    if cfg.T_tot > 0 and cfg.K * cfg.T > cfg.T_tot:
        v.append("K*T must not exceed T_tot (duty cycle)")

    if inc is not None:
        if not inc.P_I >= 0:
            v.append("P_I must be non-negative")
        if inc.kind is IncumbentKind.TYPE_I:
            if not inc.B_I0 > 0:
                v.append("B_I0 must be positive")
            if not inc.lambda_I0 >= 0:
                v.append("lambda_I0 must be non-negative")
        else:
            if len(inc.B_I) != cfg.M or len(inc.lambda_I) != cfg.M:
                v.append(f"Type-II B_I and lambda_I must have length M={cfg.M}")
            if any(not (0 < x <= cfg.B) for x in inc.B_I):
                v.append("each Type-II B_I must lie in (0, B]")
            if any(not x >= 0 for x in inc.lambda_I):
                v.append("Type-II lambda_I entries must be non-negative")

    if proto is not None:
        if proto.hopping is Hopping.PN and proto.protocol not in (
                Protocol.NEAREST_BS, Protocol.NO_ASSOCIATION, Protocol.BENCHMARK_MULTIBAND):
            v.append("PN hopping is only defined for nearest-BS and no-association access")
        if proto.p is not None:
            p = np.asarray(proto.p, dtype=float)
            if p.shape != (cfg.M,):
                v.append(f"p must have length M={cfg.M}")
            elif np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                v.append("p must be non-negative and sum to 1")
    return v


def check(cfg, inc=None, proto=None) -> None:
    violations = validate(cfg, inc, proto)
    if violations:
        raise ConfigError(violations)


def derive_params(cfg: NetworkConfig, inc: IncumbentConfig | None = None) -> DerivedParams:
    """Turn raw configuration into the quantities the closed forms consume."""
    inc = IncumbentConfig.none() if inc is None else inc
    check(cfg, inc)
    lam_T = cfg.K * cfg.T / cfg.T_tot
    delta = 2.0 / cfg.alpha
    lt_iot = cfg.N * cfg.beta_T * lam_T * (cfg.beta_F * cfg.b / (cfg.M * cfg.B)) * cfg.lambda_IoT
    P_hat_N = cfg.P_N / cfg.P_IoT

    if inc.kind is IncumbentKind.TYPE_I:
        P_hat_I = inc.P_I * cfg.b / inc.B_I0 / cfg.P_IoT
        lt_I = min(1.0, inc.B_I0 / (cfg.M * cfg.B)) * inc.lambda_I0
        ldt_I = inc.B_I0 / cfg.B * inc.lambda_I0
        term = P_hat_I ** delta * lt_I
        band_terms = np.full(cfg.M, term)
    else:
        BI = np.asarray(inc.B_I, dtype=float)
        lI = np.asarray(inc.lambda_I, dtype=float)
        ph_bands = inc.P_I * cfg.b / BI / cfg.P_IoT
        l_bands = BI / cfg.B * lI
        lt_I = float(np.mean(l_bands))
        ldt_I = float(np.sum(BI * lI) / cfg.B)
        P_hat_I = float(np.mean(ph_bands))
        band_terms = ph_bands ** delta * l_bands
        term = float(np.mean(band_terms))

    return DerivedParams(
        lambda_T=lam_T, delta=delta, xi=xi_of(delta),
        P_hat_I=P_hat_I, P_hat_N=P_hat_N,
        lambda_tilde_IoT=lt_iot, lambda_tilde_I=lt_I, lambda_dtilde_I=ldt_I,
        incumbent_term=term, band_incumbent_terms=band_terms,
    )


def default_scenario(lambda_B: float = 0.04, M: int = 5, N: int = 3, kind: str = "type1",
                     devices_per_bs: float = 30e3, incumbents_per_bs: float = 1e3,
                     **overrides) -> tuple[NetworkConfig, IncumbentConfig]:
    """Default evaluation scenario: Sigfox US parameters with LoRa-like incumbents.

    Device density is ``devices_per_bs * lambda_B``; the incumbent effective
    density is ``incumbents_per_bs * lambda_T * lambda_B`` in every band.
    """
    cfg = NetworkConfig(M=M, N=N, lambda_B=lambda_B,
                        lambda_IoT=devices_per_bs * lambda_B, **overrides)
    lam_I = incumbents_per_bs * cfg.lambda_T * lambda_B
    if IncumbentKind.parse(kind) is IncumbentKind.TYPE_I:
        inc = IncumbentConfig(kind=IncumbentKind.TYPE_I, B_I0=125e3, lambda_I0=lam_I)
    else:
        inc = IncumbentConfig.type2([125e3] * M, [lam_I] * M)
    return cfg, inc
