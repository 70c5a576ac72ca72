"""Time-frequency marks of UNB packets and the overlap predicate.

Carriers are stored as offsets in [0, M*B) from the lower spectrum edge;
``carrier_hz`` maps them to absolute frequencies around ``f_c``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Hopping, NetworkConfig

GOLDEN = 0.6180339887498949

ACCESS_BETAS = {
    "async": (2.0, 2.0),
    "time-slotted": (1.0, 2.0),
    "freq-slotted": (2.0, 1.0),
    "sync": (1.0, 1.0),
}


@dataclass(frozen=True)
class Access:
    time_slotted: bool
    freq_slotted: bool

    @classmethod
    def parse(cls, name: str) -> "Access":
        try:
            bt, bf = ACCESS_BETAS[name]
        except KeyError:
            raise ValueError(f"unknown access case {name!r}; pick one of {sorted(ACCESS_BETAS)}") from None
        return cls(bt == 1.0, bf == 1.0)

    @classmethod
    def from_betas(cls, beta_T: float, beta_F: float) -> "Access":
        if beta_T not in (1.0, 2.0) or beta_F not in (1.0, 2.0):
            raise ValueError("the simulator models slotted (beta=1) or unslotted (beta=2) access only")
        return cls(beta_T == 1.0, beta_F == 1.0)

    @property
    def betas(self) -> tuple[float, float]:
        return (1.0 if self.time_slotted else 2.0, 1.0 if self.freq_slotted else 2.0)


@dataclass
class Packets:
    """Marks of P packets with N repetitions each.

    ``start`` is the burst start time (s); repetition n starts at
    ``start + n*T``. ``carrier`` is (P, N) in Hz offsets; ``channel`` the
    grid index when frequency is slotted (else -1); ``band`` the band of
    each repetition. ``pattern`` is the PN code index (or frequency offset
    when unslotted), None for random hopping.
    """

    start: np.ndarray
    carrier: np.ndarray
    channel: np.ndarray
    band: np.ndarray
    pattern: np.ndarray | None = None

    def __len__(self):
        return len(self.start)

    def take(self, idx) -> "Packets":
        return Packets(self.start[idx], self.carrier[idx], self.channel[idx], self.band[idx],
                       None if self.pattern is None else self.pattern[idx])


def channels_per_band(cfg: NetworkConfig) -> int:
    return int(cfg.B // cfg.b)


def hop_offsets(cfg: NetworkConfig, freq_slotted: bool) -> np.ndarray:
    """Shared PN hop sequence: per-repetition offsets applied to every pattern."""
    n = np.arange(cfg.N)
    if freq_slotted:
        C = cfg.M * channels_per_band(cfg)
        return (n * int(round(GOLDEN * C))) % C
    return (n * GOLDEN % 1.0) * cfg.M * cfg.B


def generate_traffic(cfg: NetworkConfig, starts, hopping: Hopping, rng: np.random.Generator,
                     access: Access, band_constrained: bool = False) -> Packets:
    """Carrier marks for packets beginning at ``starts``.

    Random hopping draws every repetition's carrier independently (inside
    one band per packet when ``band_constrained``). PN hopping draws one
    pattern per packet; all patterns follow the same hop sequence, so two
    packets share every channel iff they share the pattern.
    """
    starts = np.asarray(starts, dtype=float)
    P, N, M, B, b = len(starts), cfg.N, cfg.M, cfg.B, cfg.b
    W = M * B
    Cb = channels_per_band(cfg)
    pattern = None
    if hopping is Hopping.PN:
        if band_constrained:
            raise ValueError("PN hopping is not defined for band-constrained access")
        hops = hop_offsets(cfg, access.freq_slotted)
        if access.freq_slotted:
            pattern = rng.integers(0, M * Cb, size=P)
            channel = (pattern[:, None] + hops[None, :]) % (M * Cb)
            band = channel // Cb
            carrier = band * B + (channel % Cb + 0.5) * b
        else:
            pattern = rng.random(P) * W
            carrier = (pattern[:, None] + hops[None, :]) % W
            band = np.minimum((carrier // B).astype(np.int64), M - 1)
            channel = np.full((P, N), -1, dtype=np.int64)
        return Packets(starts, carrier, channel, band, pattern)

    if band_constrained:
        band = np.repeat(rng.integers(0, M, size=(P, 1)), N, axis=1)
    else:
        band = rng.integers(0, M, size=(P, N))
    if access.freq_slotted:
        local = rng.integers(0, Cb, size=(P, N))
        channel = band * Cb + local
        carrier = band * B + (local + 0.5) * b
    else:
        carrier = band * B + rng.random((P, N)) * B
        channel = np.full((P, N), -1, dtype=np.int64)
    return Packets(starts, carrier, channel, band, pattern)


def _merge(lo, hi):
    """Disjoint sorted intervals covering the union of [lo_i, hi_i)."""
    order = np.argsort(lo)
    out = []
    for a, b in zip(lo[order], hi[order]):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        elif b > a:
            out.append([a, b])
    return np.array(out, dtype=float).reshape(-1, 2)


class _Target:
    """Carrier values in [lo, hi) (or channel indices when discrete) that collide with ours."""

    def __init__(self, lo, hi, intervals=None, points=None):
        self.lo, self.hi = lo, hi
        self.intervals, self.points = intervals, points
        if points is not None:
            self.measure = len(points) / (hi - lo)
        else:
            self.measure = float((intervals[:, 1] - intervals[:, 0]).sum()) / (hi - lo)

    def inside(self, x):
        if self.points is not None:
            return np.isin(x, self.points)
        idx = np.searchsorted(self.intervals[:, 0], x, side="right") - 1
        ok = idx >= 0
        idx = np.maximum(idx, 0)
        return ok & (x < self.intervals[idx, 1]) if len(self.intervals) else np.zeros(np.shape(x), bool)

    def draw_in(self, n, rng):
        if self.points is not None:
            return self.points[rng.integers(0, len(self.points), size=n)]
        w = self.intervals[:, 1] - self.intervals[:, 0]
        k = rng.choice(len(w), size=n, p=w / w.sum())
        return self.intervals[k, 0] + rng.random(n) * w[k]

    def draw_any(self, n, rng):
        if self.points is not None:
            return rng.integers(self.lo, self.hi, size=n)
        return self.lo + rng.random(n) * (self.hi - self.lo)

    def draw_out(self, n, rng):
        x = self.draw_any(n, rng)
        bad = self.inside(x)
        while bad.any():
            x[bad] = self.draw_any(int(bad.sum()), rng)
            bad = self.inside(x)
        return x


def _first_hit(P, N, u, rng):
    """Index of the first success among N Bernoulli(u) trials, given at least one."""
    w = (1 - u) ** np.arange(N) * u
    return rng.choice(N, size=P, p=w / w.sum())


def _marks_given_hit(P, N, target: _Target, rng):
    """(P, N) independent uniform marks conditioned on at least one landing in ``target``."""
    x = target.draw_any(P * N, rng).reshape(P, N)
    if P == 0:
        return x
    j = _first_hit(P, N, target.measure, rng)
    before = np.arange(N)[None, :] < j[:, None]
    x[before] = target.draw_out(int(before.sum()), rng)
    x[np.arange(P), j] = target.draw_in(P, rng)
    return x


def candidate_traffic(cfg: NetworkConfig, typ: Packets, starts_for, mean_count: float,
                      hopping: Hopping, rng: np.random.Generator, access: Access,
                      band_constrained: bool = False) -> Packets:
    """Other packets whose carriers can collide with the typical packet ``typ``.

    Equivalent in law to drawing Poisson(``mean_count``) packets with
    ``generate_traffic`` and keeping those with at least one repetition on a
    colliding carrier (or PN pattern). ``starts_for(n)`` draws n start times.
    """
    P0, N, M, B, b = len(typ), cfg.N, cfg.M, cfg.B, cfg.b
    assert P0 == 1
    W = M * B
    Cb = channels_per_band(cfg)
    if hopping is Hopping.PN:
        if access.freq_slotted:
            pattern = np.full(rng.poisson(mean_count / (M * Cb)), typ.pattern[0])
        else:
            n = rng.poisson(mean_count * 2 * b / W)
            pattern = (typ.pattern[0] - b + 2 * b * rng.random(n)) % W
        hops = hop_offsets(cfg, access.freq_slotted)
        if access.freq_slotted:
            channel = (pattern[:, None] + hops[None, :]) % (M * Cb)
            band = channel // Cb
            carrier = band * B + (channel % Cb + 0.5) * b
        else:
            carrier = (pattern[:, None] + hops[None, :]) % W
            band = np.minimum((carrier // B).astype(np.int64), M - 1)
            channel = np.full((len(pattern), N), -1, dtype=np.int64)
        return Packets(starts_for(len(pattern)), carrier, channel, band, pattern)

    ours_c, ours_ch = typ.carrier[0], typ.channel[0]
    if band_constrained:
        ranges = [(m * B, (m + 1) * B, m) for m in range(M)]
    else:
        ranges = [(0.0, float(W), None)]
    targets = []
    for lo, hi, m in ranges:
        if access.freq_slotted:
            clo, chi = (m * Cb, (m + 1) * Cb) if m is not None else (0, M * Cb)
            pts = np.unique(ours_ch[(ours_ch >= clo) & (ours_ch < chi)])
            targets.append(_Target(clo, chi, points=pts))
        else:
            iv = _merge(np.maximum(ours_c - b, lo), np.minimum(ours_c + b, hi))
            targets.append(_Target(lo, hi, intervals=iv))
    q = np.array([1 - (1 - t.measure) ** N for t in targets])
    n = rng.poisson(mean_count * q.mean())
    which = rng.choice(len(targets), size=n, p=q / q.sum()) if n else np.zeros(0, int)
    carrier = np.empty((n, N))
    channel = np.full((n, N), -1, dtype=np.int64)
    for k, t in enumerate(targets):
        sel = np.flatnonzero(which == k)
        x = _marks_given_hit(len(sel), N, t, rng)
        if access.freq_slotted:
            channel[sel] = x
        else:
            carrier[sel] = x
    if access.freq_slotted:
        band = channel // Cb
        carrier = band * B + (channel % Cb + 0.5) * b
    else:
        band = np.minimum((carrier // B).astype(np.int64), M - 1)
    return Packets(starts_for(n), carrier, channel, band, None)


def overlap(t_a, f_a, t_b, f_b, cfg: NetworkConfig, access: Access, ch_a=None, ch_b=None):
    """Whether transmissions (start t, carrier f) collide; broadcasts over arrays.

    Unslotted: |dt| < T (resp. |df| < b), strict. Slotted: same time slot
    (equal start) and, for frequency, the same channel index.
    """
    if access.time_slotted:
        t_hit = np.isclose(np.asarray(t_a) - np.asarray(t_b), 0.0, atol=1e-9 * cfg.T)
    else:
        t_hit = np.abs(np.asarray(t_a) - np.asarray(t_b)) < cfg.T
    if access.freq_slotted:
        if ch_a is None or ch_b is None:
            f_hit = np.isclose(np.asarray(f_a) - np.asarray(f_b), 0.0, atol=1e-6 * cfg.b)
        else:
            f_hit = np.asarray(ch_a) == np.asarray(ch_b)
    else:
        f_hit = np.abs(np.asarray(f_a) - np.asarray(f_b)) < cfg.b
    return t_hit & f_hit


def carrier_hz(cfg: NetworkConfig, offsets) -> np.ndarray:
    """Absolute carrier frequency; offsets span [f_c - (MB+b)/2, f_c + (MB-b)/2)."""
    return cfg.f_c - (cfg.M * cfg.B + cfg.b) / 2 + np.asarray(offsets)
