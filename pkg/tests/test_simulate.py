import json
import math

import numpy as np
import pytest
from scipy import stats
from statsmodels.stats.proportion import proportion_confint

from unbnet import Hopping, Protocol, ProtocolSpec, derive_params, default_scenario
from unbnet import simulate as S
from unbnet.pointproc import sample_hppp, uniform_disc
from unbnet.traffic import (ACCESS_BETAS, Access, Packets, candidate_traffic, carrier_hz,
                            generate_traffic, overlap)


# ------------------------------------------------------------ point processes

def test_hppp_count_mean_and_variance():
    rng = np.random.default_rng(3)
    density, radius = 0.5, 6.0
    mu = density * math.pi * radius ** 2
    counts = np.array([len(sample_hppp(density, radius, rng)) for _ in range(20000)])
    assert counts.mean() == pytest.approx(mu, rel=0.05)
    assert counts.var(ddof=1) == pytest.approx(mu, rel=0.05)


def test_hppp_points_uniform_on_disc():
    rng = np.random.default_rng(4)
    pts = uniform_disc(20000, 3.0, rng)
    r = np.hypot(pts[:, 0], pts[:, 1])
    assert r.max() <= 3.0
    # area fraction (r/R)^2 is uniform; angle is uniform
    assert stats.kstest((r / 3.0) ** 2, "uniform").pvalue > 1e-3
    assert stats.kstest((np.arctan2(pts[:, 1], pts[:, 0]) + np.pi) / (2 * np.pi), "uniform").pvalue > 1e-3


def test_hppp_empty_and_invalid():
    rng = np.random.default_rng(0)
    assert sample_hppp(0.0, 5.0, rng).shape == (0, 2)
    with pytest.raises(ValueError):
        sample_hppp(-1.0, 5.0, rng)


# ------------------------------------------------------------ traffic marks

def test_overlap_is_strict():
    cfg, _ = default_scenario(M=1)
    a = Access(False, False)
    T, b = cfg.T, cfg.b
    assert overlap(0.0, 1000.0, 0.999 * T, 1000.0 + 0.999 * b, cfg, a)
    assert not overlap(0.0, 1000.0, T, 1000.0, cfg, a)
    assert not overlap(0.0, 1000.0, 0.0, 1000.0 + b, cfg, a)
    slotted = Access(True, True)
    assert overlap(2 * T, 0.0, 2 * T, 0.0, cfg, slotted, 4, 4)
    assert not overlap(2 * T, 0.0, 3 * T, 0.0, cfg, slotted, 4, 4)
    assert not overlap(2 * T, 0.0, 2 * T, 0.0, cfg, slotted, 4, 5)


@pytest.mark.parametrize("case", sorted(ACCESS_BETAS))
def test_pairwise_collision_probability(case):
    """Two single transmissions at uniform times and carriers, against the exact finite-window value."""
    cfg, _ = default_scenario(M=1, N=1)
    cfg = cfg.replace(B=10 * cfg.b)
    access = Access.parse(case)
    rng = np.random.default_rng(5)
    n, slots = 400000, 10
    if access.time_slotted:
        ta, tb = rng.integers(0, slots, size=(2, n)) * cfg.T
        p_time = 1 / slots
    else:
        ta, tb = rng.random((2, n)) * slots * cfg.T
        p_time = 2 / slots - 1 / slots ** 2
    pa = generate_traffic(cfg, ta, Hopping.RANDOM, rng, access)
    pb = generate_traffic(cfg, tb, Hopping.RANDOM, rng, access)
    hit = overlap(ta, pa.carrier[:, 0], tb, pb.carrier[:, 0], cfg, access, pa.channel[:, 0], pb.channel[:, 0])
    w = cfg.b / cfg.B
    p_freq = w if access.freq_slotted else 2 * w - w * w
    expected = p_time * p_freq
    assert abs(hit.mean() - expected) < 4 * math.sqrt(expected / n)


def test_pn_patterns_share_every_hop():
    cfg, _ = default_scenario(M=5, N=4)
    rng = np.random.default_rng(6)
    for access in (Access(False, True), Access(False, False)):
        p = generate_traffic(cfg, np.zeros(200), Hopping.PN, rng, access)
        same = p.pattern[:, None] == p.pattern[None, :]
        for n in range(cfg.N):
            eq = np.isclose(p.carrier[:, None, n], p.carrier[None, :, n])
            assert np.array_equal(eq, same)


def test_carriers_stay_in_bands():
    cfg, _ = default_scenario(M=5, N=3)
    rng = np.random.default_rng(7)
    for hopping in Hopping:
        for fs in (False, True):
            p = generate_traffic(cfg, np.zeros(1000), hopping, rng, Access(False, fs))
            assert np.all((p.carrier >= 0) & (p.carrier < cfg.M * cfg.B))
            assert np.array_equal(p.band, (p.carrier // cfg.B).astype(int))
            hz = carrier_hz(cfg, p.carrier)
            assert np.all(np.abs(hz - cfg.f_c) <= (cfg.M * cfg.B + cfg.b) / 2)
    bc = generate_traffic(cfg, np.zeros(500), Hopping.RANDOM, rng, Access(False, False), band_constrained=True)
    assert np.all(bc.band == bc.band[:, :1])


def _hits_per_rep(cfg, access, typ, others):
    rep = np.arange(cfg.N) * cfg.T
    t_o = (others.start[:, None] + rep)[:, :, None]
    t_t = (typ.start[0] + rep)[None, None, :]
    h = overlap(t_o, others.carrier[:, :, None], t_t, typ.carrier[0][None, None, :], cfg, access,
                others.channel[:, :, None], typ.channel[0][None, None, :])
    return h.sum(axis=(0, 1))


@pytest.mark.parametrize("case", ["async", "sync"])
@pytest.mark.parametrize("constrained", [False, True])
def test_candidate_sampler_matches_brute_force(case, constrained):
    """Frequency pre-thinning must not change the law of the collision counts."""
    cfg, _ = default_scenario(M=2, N=3)
    access = Access.parse(case)
    rng = np.random.default_rng(8)
    mean = 3000.0
    NT = cfg.N * cfg.T

    def starts(n):
        if access.time_slotted:
            return rng.integers(-(cfg.N - 1), cfg.N, size=n) * cfg.T
        return -NT + 2 * NT * rng.random(n)

    fast, slow = [], []
    for _ in range(3000):
        typ = generate_traffic(cfg, [0.0], Hopping.RANDOM, rng, access, constrained)
        cand = candidate_traffic(cfg, typ, starts, mean, Hopping.RANDOM, rng, access, constrained)
        fast.append(_hits_per_rep(cfg, access, typ, cand))
        full = generate_traffic(cfg, starts(rng.poisson(mean)), Hopping.RANDOM, rng, access, constrained)
        slow.append(_hits_per_rep(cfg, access, typ, full))
    fast, slow = np.array(fast, float), np.array(slow, float)
    se = np.sqrt(fast.var(axis=0) / len(fast) + slow.var(axis=0) / len(slow))
    assert np.all(np.abs(fast.mean(axis=0) - slow.mean(axis=0)) < 4 * se + 1e-12)
    # whole-burst law, which carries the dependence between repetitions
    assert stats.ks_2samp(fast.sum(axis=1), slow.sum(axis=1)).pvalue > 1e-3
    assert fast.sum(axis=1).var() == pytest.approx(slow.sum(axis=1).var(), rel=0.15)


# ------------------------------------------------------------ engine

@pytest.mark.parametrize("case", sorted(ACCESS_BETAS))
@pytest.mark.parametrize("hopping", list(Hopping))
def test_thinned_density_matches_expected(case, hopping):
    bt, bf = ACCESS_BETAS[case]
    cfg, inc = default_scenario(M=5, beta_T=bt, beta_F=bf)
    est = S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS, hopping),
                S.SimConfig(realizations=1500, seed=1, access=case))
    radius = S.default_radius(cfg.lambda_B)
    empirical = est.interferer_counts.mean(axis=0) / (math.pi * radius ** 2)
    expected = derive_params(cfg, inc).lambda_tilde_IoT
    assert np.all(np.abs(empirical / expected - 1) < 0.03)


def test_thinned_density_single_band():
    cfg, inc = default_scenario(M=1)
    est = S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS), S.SimConfig(realizations=1500, seed=2))
    r = S.default_radius(cfg.lambda_B)
    assert est.interferer_counts.mean() / (math.pi * r * r) == pytest.approx(
        derive_params(cfg, inc).lambda_tilde_IoT, rel=0.03)


def test_same_seed_same_result_any_worker_count():
    cfg, inc = default_scenario(M=2)
    proto = ProtocolSpec(Protocol.NO_ASSOCIATION)
    one = S.run(cfg, inc, proto, S.SimConfig(realizations=48, seed=99, workers=1))
    eight = S.run(cfg, inc, proto, S.SimConfig(realizations=48, seed=99, workers=8))
    again = S.run(cfg, inc, proto, S.SimConfig(realizations=48, seed=99, workers=1))
    assert np.array_equal(one.max_sinr, eight.max_sinr)
    assert np.array_equal(one.max_sinr, again.max_sinr)
    other = S.run(cfg, inc, proto, S.SimConfig(realizations=48, seed=100))
    assert not np.array_equal(one.max_sinr, other.max_sinr)


def test_realizations_use_independent_substreams():
    a = S.substream(5, 0, S.STREAM_BS).random(4)
    b = S.substream(5, 1, S.STREAM_BS).random(4)
    c = S.substream(5, 0, S.STREAM_FADING).random(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    assert np.array_equal(a, S.substream(5, 0, S.STREAM_BS).random(4))


def test_wilson_interval_against_reference():
    for k, n in ((0, 10), (3, 10), (9000, 10000), (10000, 10000), (512, 1000)):
        lo, hi = S.wilson_interval(k, n)
        rlo, rhi = proportion_confint(k, n, alpha=0.05, method="wilson")
        assert lo == pytest.approx(rlo, abs=1e-9) and hi == pytest.approx(rhi, abs=1e-9)


def test_wilson_width_at_ten_thousand():
    lo, hi = S.wilson_interval(9000, 10000)
    assert hi - lo < 0.015


def test_curve_and_at_agree():
    cfg, inc = default_scenario(M=5)
    est = S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS), S.SimConfig(realizations=200, seed=3))
    taus = [0.1, 1.0, 10.0]
    assert np.allclose(est.curve(taus), [est.at(t).p_hat for t in taus])
    assert est.at(1.0).n_success == int((est.max_sinr >= 1.0).sum())
    assert est.curve([0.0])[0] == 1.0


def test_no_association_not_worse_than_nearest():
    cfg, inc = default_scenario(M=1)
    sim = S.SimConfig(realizations=600, seed=11)
    near = S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS), sim)
    broad = S.run(cfg, inc, ProtocolSpec(Protocol.NO_ASSOCIATION), sim)
    for tau in (0.1, 1.0, 10.0):
        a, b = near.at(tau), broad.at(tau)
        assert b.p_hat >= a.p_hat - max(a.width, b.width)


def test_benchmark_receives_whole_spectrum():
    cfg, inc = default_scenario(M=5)
    sim = S.SimConfig(realizations=300, seed=12)
    bench = S.run(cfg, inc, ProtocolSpec(Protocol.BENCHMARK_MULTIBAND), sim)
    bc = S.run(cfg, inc, ProtocolSpec(Protocol.BAND_CONSTRAINED), sim)
    assert bench.sinr_quantile_db(0.5) > bc.sinr_quantile_db(0.5)


def test_region_without_bs_is_failure():
    cfg, inc = default_scenario(M=1, lambda_B=1e-6)
    est = S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS),
                S.SimConfig(realizations=20, seed=1, region_radius=5.0, bs_radius=5.0))
    assert est.n_no_bs > 15
    assert est.p_hat <= 1 - est.n_no_bs / 20


def test_errors_carry_realization_index(monkeypatch):
    cfg, inc = default_scenario(M=1)
    real = S._realize

    def broken(ctx, index):
        if index == 3:
            raise FloatingPointError("boom")
        return real(ctx, index)

    monkeypatch.setattr(S, "_realize", broken)
    with pytest.raises(S.SimulationError) as err:
        S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS), S.SimConfig(realizations=6))
    assert err.value.index == 3


@pytest.mark.parametrize("bad", [dict(realizations=0), dict(region_radius=-1.0),
                                 dict(region_radius=1.0, bs_radius=2.0), dict(access="ofdma")])
def test_bad_simulation_settings(bad):
    cfg, inc = default_scenario(M=1)
    with pytest.raises(ValueError):
        S.run(cfg, inc, ProtocolSpec(), S.SimConfig(**bad))


def test_dump_records(tmp_path):
    cfg, inc = default_scenario(M=5)
    path = tmp_path / "dump.jsonl"
    sim = S.SimConfig(realizations=5, seed=4, dump_path=str(path))
    est = S.run(cfg, inc, ProtocolSpec(Protocol.BAND_HOPPED), sim)
    lines = path.read_text().splitlines()
    assert len(lines) == 5
    R = S.default_radius(cfg.lambda_B)
    for i, line in enumerate(lines):
        rec = json.loads(line)
        assert rec["index"] == i
        assert set(rec) >= {"bs", "bs_band", "typical", "interferers", "incumbents", "max_sinr"}
        assert len(rec["incumbents"]) == cfg.N
        assert len(rec["bs_band"]) == len(rec["bs"])
        for x, y in rec["bs"]:
            assert math.hypot(x, y) <= S.default_bs_radius(cfg.lambda_B)
        for it in rec["interferers"]:
            assert math.hypot(*it["pos"]) <= R
        assert float(rec["max_sinr"]) == est.max_sinr[i]


def test_simulated_pn_not_better_than_random():
    cfg, inc = default_scenario(M=1)
    sim = S.SimConfig(realizations=1500, seed=21)
    r = S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS), sim)
    pn = S.run(cfg, inc, ProtocolSpec(Protocol.NEAREST_BS, Hopping.PN), sim)
    for tau in (0.3, 1.0, 3.0, 10.0):
        a, b = r.at(tau), pn.at(tau)
        assert b.p_hat <= a.p_hat + max(a.width, b.width)
