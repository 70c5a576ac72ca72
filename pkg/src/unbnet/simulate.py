"""Monte Carlo engine for UNB uplink success probability.

Each realization places the typical device at the origin, draws BSs,
interfering UNB packets and incumbents on a disc, and records the largest
SINR the typical packet reaches at any BS allowed to decode it. Success at
threshold tau is ``max_sinr >= tau``, so one run yields a whole curve.

Randomness comes from counter-based Philox substreams keyed by
(seed, realization, stream); results do not depend on the worker count.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (Hopping, IncumbentConfig, IncumbentKind, NetworkConfig, Protocol,
                    ProtocolSpec, check)
from .pointproc import sample_hppp, uniform_disc
from .traffic import Access, Packets, candidate_traffic, carrier_hz, generate_traffic, overlap

log = logging.getLogger(__name__)

Z95 = 1.959963984540054

STREAM_BS, STREAM_TRAFFIC, STREAM_INCUMBENT, STREAM_FADING = range(4)


class SimulationError(RuntimeError):
    def __init__(self, index, cause):
        self.index = index
        super().__init__(f"realization {index}: {cause!r}")


@dataclass(frozen=True)
class SimConfig:
    realizations: int = 10_000
    seed: int = 0
    region_radius: float | None = None    # km, disc for devices and incumbents; default 3*bs_radius
    bs_radius: float | None = None        # km, disc for candidate BSs; default 10/sqrt(pi lambda_B)
    noise_enabled: bool = True
    access: str | None = None             # async/time-slotted/freq-slotted/sync; None: from betas
    sinr_record: bool = True
    workers: int = 1
    dump_path: str | None = None

    def replace(self, **changes) -> "SimConfig":
        from dataclasses import replace
        return replace(self, **changes)


def default_bs_radius(lambda_B: float) -> float:
    """Ten times the mean nearest-BS distance 1/(2 sqrt(lambda_B)), roughly."""
    return 10.0 / math.sqrt(math.pi * lambda_B) if lambda_B > 0 else 1.0


def default_radius(lambda_B: float) -> float:
    # interference beyond R decays like R^(2-alpha); at one BS radius the
    # missing tail still shifts P_s by a few percent for alpha = 3.5
    return 3.0 * default_bs_radius(lambda_B)


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class SuccessEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n_realizations: int
    n_success: int
    n_no_bs: int
    tau: float
    max_sinr: np.ndarray | None = field(default=None, repr=False)
    interferer_counts: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_samples(cls, max_sinr: np.ndarray, tau: float, n_no_bs: int = 0,
                     counts=None, keep: bool = True) -> "SuccessEstimate":
        n = len(max_sinr)
        k = int(np.count_nonzero(max_sinr >= tau))
        lo, hi = wilson_interval(k, n)
        return cls(k / n if n else 0.0, lo, hi, n, k, n_no_bs, tau,
                   max_sinr if keep else None, counts)

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low

    def at(self, tau: float) -> "SuccessEstimate":
        """Estimate at another threshold from the recorded max-SINR samples."""
        if self.max_sinr is None:
            raise ValueError("max-SINR samples were not recorded")
        return SuccessEstimate.from_samples(self.max_sinr, tau, self.n_no_bs,
                                            self.interferer_counts)

    def curve(self, taus) -> np.ndarray:
        if self.max_sinr is None:
            raise ValueError("max-SINR samples were not recorded")
        s = np.sort(self.max_sinr)
        return 1.0 - np.searchsorted(s, np.asarray(taus, dtype=float), side="left") / len(s)

    def sinr_quantile_db(self, q: float) -> float:
        """q-quantile of the max-SINR distribution in dB (q=0.5: median, 0.05: cell edge)."""
        if self.max_sinr is None:
            raise ValueError("max-SINR samples were not recorded")
        with np.errstate(divide="ignore"):
            return float(10 * np.log10(np.quantile(self.max_sinr, q)))


def substream(seed: int, index: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class _Context:
    cfg: NetworkConfig
    inc: IncumbentConfig
    proto: ProtocolSpec
    access: Access
    radius: float
    bs_radius: float
    seed: int
    noise: float
    record: bool

    @property
    def banded(self) -> bool:
        return self.proto.protocol in (Protocol.BAND_CONSTRAINED, Protocol.BAND_HOPPED)


@dataclass
class _Outcome:
    max_sinr: float
    no_bs: bool
    counts: np.ndarray
    record: dict | None = None


def _typical_start(ctx: _Context, rng) -> float:
    cfg = ctx.cfg
    if ctx.access.time_slotted:
        unit = cfg.N * cfg.T if ctx.proto.hopping is Hopping.PN else cfg.T
        return float(rng.integers(0, max(1, int(cfg.T_tot // unit)))) * unit
    return float(rng.random() * cfg.T_tot)


def _interferer_window(ctx: _Context, t0: float):
    """Expected number of other packets whose burst can touch the typical one, and a start sampler."""
    cfg = ctx.cfg
    rate = cfg.lambda_IoT * math.pi * ctx.radius**2 * cfg.K / cfg.T_tot
    NT = cfg.N * cfg.T
    if ctx.access.time_slotted:
        if ctx.proto.hopping is Hopping.PN:
            # bursts aligned to frames of N slots; only the same frame overlaps
            return rate * NT, lambda n, rng: np.full(n, t0)
        return (rate * cfg.T * (2 * cfg.N - 1),
                lambda n, rng: t0 + rng.integers(-(cfg.N - 1), cfg.N, size=n) * cfg.T)
    return rate * 2 * NT, lambda n, rng: t0 - NT + 2 * NT * rng.random(n)


def _hits(ctx: _Context, typ: Packets, others: Packets) -> np.ndarray:
    """(P, N_theirs, N_ours) collision indicator between repetitions."""
    cfg = ctx.cfg
    N = cfg.N
    if ctx.proto.hopping is Hopping.PN:
        # burst-level time overlap holds by construction; hop n meets hop n
        same = overlap(0.0, others.carrier, 0.0, typ.carrier[0], cfg, Access(False, ctx.access.freq_slotted),
                       others.channel, typ.channel[0])
        hits = np.zeros((len(others), N, N), dtype=bool)
        idx = np.arange(N)
        hits[:, idx, idx] = same
        return hits
    rep = np.arange(N) * cfg.T
    t_theirs = (others.start[:, None] + rep[None, :])[:, :, None]
    t_ours = (typ.start[0] + rep)[None, None, :]
    return overlap(t_theirs, others.carrier[:, :, None], t_ours, typ.carrier[0][None, None, :],
                   cfg, ctx.access, others.channel[:, :, None], typ.channel[0][None, None, :])


def _incumbents(ctx: _Context, carrier: float, band: int, area: float, rng):
    """Incumbents whose occupied band covers ``carrier``; fresh for every repetition."""
    cfg, inc = ctx.cfg, ctx.inc
    if inc.kind is IncumbentKind.TYPE_I:
        lam, width, lo, span = inc.lambda_I0, inc.B_I0, 0.0, cfg.M * cfg.B
        p_hat = inc.P_I * cfg.b / inc.B_I0 / cfg.P_IoT
    else:
        lam, width = inc.lambda_I[band], inc.B_I[band]
        lo, span = band * cfg.B, cfg.B
        p_hat = inc.P_I * cfg.b / width / cfg.P_IoT
    if lam == 0:
        return np.empty((0, 2)), np.empty(0), p_hat
    n = rng.poisson(lam * area)
    centre = lo + rng.random(n) * span
    if width >= span:
        covers = np.ones(n, dtype=bool)
    else:
        # incumbent channels wrap around the span so coverage is uniform in frequency
        d = np.abs(centre - carrier) % span
        covers = np.minimum(d, span - d) < width / 2
    k = int(np.count_nonzero(covers))
    return uniform_disc(k, ctx.radius, rng), centre[covers], p_hat


def _sqdist(a, b):
    """(len(a), len(b)) squared distances."""
    dx = a[:, 0, None] - b[None, :, 0]
    dy = a[:, 1, None] - b[None, :, 1]
    return dx * dx + dy * dy


def _realize(ctx: _Context, index: int) -> _Outcome:
    cfg, proto = ctx.cfg, ctx.proto
    N, M = cfg.N, cfg.M
    ea = cfg.alpha / 2
    area = math.pi * ctx.radius**2
    rng_bs = substream(ctx.seed, index, STREAM_BS)
    rng_tr = substream(ctx.seed, index, STREAM_TRAFFIC)
    rng_inc = substream(ctx.seed, index, STREAM_INCUMBENT)
    rng_fad = substream(ctx.seed, index, STREAM_FADING)

    bs = sample_hppp(cfg.lambda_B, ctx.bs_radius, rng_bs)
    nb = len(bs)
    bs_band = rng_bs.choice(M, size=nb, p=proto.selection(M)) if ctx.banded else None

    constrained = proto.protocol is Protocol.BAND_CONSTRAINED
    t0 = _typical_start(ctx, rng_tr)
    typ = generate_traffic(cfg, [t0], proto.hopping, rng_tr, ctx.access, constrained)
    mean, starts = _interferer_window(ctx, t0)
    others = candidate_traffic(cfg, typ, lambda n: starts(n, rng_tr), mean, proto.hopping, rng_tr,
                               ctx.access, constrained)
    hits = _hits(ctx, typ, others)
    counts = hits.sum(axis=(0, 1))
    involved = np.flatnonzero(hits.any(axis=(1, 2)))
    pos = uniform_disc(len(involved), ctx.radius, rng_tr)
    record = None
    if ctx.record:
        record = {"index": index, "bs": bs.tolist(),
                  "bs_band": None if bs_band is None else bs_band.tolist(),
                  "typical": {"start": t0, "carrier_hz": carrier_hz(cfg, typ.carrier[0]).tolist(),
                              "band": typ.band[0].tolist()},
                  "interferers": [{"pos": pos[u].tolist(), "start": float(others.start[i]),
                                   "carrier_hz": carrier_hz(cfg, others.carrier[i]).tolist()}
                                  for u, i in enumerate(involved)],
                  "incumbents": []}
    if nb == 0:
        return _Outcome(-math.inf, True, counts, record)

    d2_bs = np.einsum("ij,ij->i", bs, bs)
    if proto.protocol is Protocol.NEAREST_BS:
        cols = np.array([int(np.argmin(d2_bs))])
    else:
        cols = np.arange(nb)
    bs_eval = bs[cols]
    gain_bs = d2_bs[cols] ** -ea
    # interferer link fading is per (packet, BS), shared by that packet's repetitions
    fade_u = rng_fad.standard_exponential((len(involved), len(cols)))
    gain_u = fade_u * _sqdist(pos, bs_eval) ** -ea
    # mult[n, u]: how many repetitions of packet u land on our repetition n
    mult = hits[involved].sum(axis=1).T.astype(float)
    unb = mult @ gain_u

    best = -math.inf
    for n in range(N):
        if bs_band is None:
            elig = slice(None)
        else:
            elig = np.flatnonzero(bs_band[cols] == typ.band[0, n])
        zk, zc, p_hat_I = _incumbents(ctx, typ.carrier[0, n], int(typ.band[0, n]), area, rng_inc)
        targets = bs_eval[elig]
        ne = len(targets)
        fade_k = rng_fad.standard_exponential((len(zk), ne))
        h = rng_fad.standard_exponential(ne)
        if record is not None:
            record["incumbents"].append({"pos": zk.tolist(), "centre_hz": carrier_hz(cfg, zc).tolist()})
        if ne == 0:
            continue
        interference = ctx.noise + unb[n, elig]
        if len(zk):
            interference = interference + p_hat_I * (fade_k * _sqdist(zk, targets) ** -ea).sum(axis=0)
        signal = h * gain_bs[elig]
        with np.errstate(divide="ignore"):
            sinr = np.where(interference > 0, signal / np.where(interference > 0, interference, 1.0),
                            np.inf)
        best = max(best, float(sinr.max()))
    if record is not None:
        record["max_sinr"] = best if math.isfinite(best) else str(best)
    return _Outcome(best, False, counts, record)


def _run_chunk(ctx: _Context, start: int, stop: int):
    sinr = np.empty(stop - start)
    no_bs = 0
    counts = np.empty((stop - start, ctx.cfg.N), dtype=np.int64)
    records = [] if ctx.record else None
    for i in range(start, stop):
        try:
            out = _realize(ctx, i)
        except Exception as exc:  # noqa: BLE001 - re-raised with the index attached
            raise SimulationError(i, exc) from exc
        sinr[i - start] = out.max_sinr
        counts[i - start] = out.counts
        no_bs += out.no_bs
        if records is not None:
            records.append(out.record)
    return sinr, no_bs, counts, records


def _context(cfg, inc, proto, sim) -> _Context:
    inc = IncumbentConfig.none() if inc is None else inc
    check(cfg, inc, proto)
    if sim.realizations < 1:
        raise ValueError("realizations must be >= 1")
    access = Access.parse(sim.access) if sim.access else Access.from_betas(cfg.beta_T, cfg.beta_F)
    if (cfg.beta_T, cfg.beta_F) != access.betas:
        log.warning("simulated access %s differs from the configured betas (%s, %s)",
                    sim.access, cfg.beta_T, cfg.beta_F)
    bs_radius = sim.bs_radius if sim.bs_radius is not None else default_bs_radius(cfg.lambda_B)
    radius = sim.region_radius if sim.region_radius is not None else 3.0 * bs_radius
    if not radius > 0:
        raise ValueError("region_radius must be positive")
    if not 0 < bs_radius <= radius:
        raise ValueError("bs_radius must be positive and at most region_radius")
    noise = cfg.P_N / cfg.P_IoT if sim.noise_enabled else 0.0
    return _Context(cfg, inc, proto, access, float(radius), float(bs_radius), int(sim.seed), noise,
                    sim.dump_path is not None)


def run(cfg: NetworkConfig, inc: IncumbentConfig | None, proto: ProtocolSpec,
        sim: SimConfig = SimConfig()) -> SuccessEstimate:
    """Estimate the success probability at ``cfg.tau`` over ``sim.realizations`` draws."""
    ctx = _context(cfg, inc, proto, sim)
    R = sim.realizations
    workers = max(1, int(sim.workers))
    if workers == 1:
        parts = [_run_chunk(ctx, 0, R)]
    else:
        bounds = np.linspace(0, R, min(R, 4 * workers) + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [ctx] * (len(bounds) - 1), bounds[:-1], bounds[1:]))
    sinr = np.concatenate([p[0] for p in parts])
    no_bs = sum(p[1] for p in parts)
    counts = np.concatenate([p[2] for p in parts])
    if sim.dump_path is not None:
        with open(sim.dump_path, "w", encoding="utf-8") as fh:
            for part in parts:
                for rec in part[3]:
                    fh.write(json.dumps(rec) + "\n")
    if no_bs:
        log.info("%d of %d realizations had no BS in the region", no_bs, R)
    est = SuccessEstimate.from_samples(sinr, cfg.tau, no_bs, counts, keep=sim.sinr_record)
    return est
