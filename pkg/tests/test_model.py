import math

import numpy as np
import pytest

from unbnet import (ConfigError, Hopping, IncumbentConfig, IncumbentKind, NetworkConfig, Protocol,
                    ProtocolSpec, derive_params, default_scenario, validate)
from unbnet.model import xi_of


def test_activity_fraction_default_timing():
    cfg = NetworkConfig()
    assert cfg.T == pytest.approx(0.34667, abs=1e-5)
    assert cfg.lambda_T == pytest.approx(5.7778e-4, rel=1e-4)
    assert derive_params(cfg).lambda_T == cfg.lambda_T


def test_delta_xi_alpha_four():
    d = derive_params(NetworkConfig(alpha=4.0))
    assert d.delta == 0.5
    assert d.xi == pytest.approx(2 / math.pi, rel=1e-14)


@pytest.mark.parametrize("alpha", [2.1, 3.0, 3.5, 5.0, 8.0])
def test_delta_xi_ranges(alpha):
    d = derive_params(NetworkConfig(alpha=alpha))
    assert 0 < d.delta < 1
    assert 0 < d.xi < 1


def test_type1_effective_density_partial_cover():
    cfg, inc = default_scenario(M=5)
    d = derive_params(cfg, inc)
    assert d.lambda_tilde_I == pytest.approx(0.125 * inc.lambda_I0, rel=1e-15)
    assert d.lambda_dtilde_I == pytest.approx(125e3 / 200e3 * inc.lambda_I0)


def test_type1_wideband_incumbent_is_capped():
    cfg = NetworkConfig(M=2)
    inc = IncumbentConfig(kind=IncumbentKind.TYPE_I, B_I0=1e6, lambda_I0=0.3)
    assert validate(cfg, inc) == []
    assert derive_params(cfg, inc).lambda_tilde_I == 0.3


def test_type2_band_average():
    cfg = NetworkConfig(M=2)
    inc = IncumbentConfig.type2([100e3, 200e3], [1.0, 2.0])
    d = derive_params(cfg, inc)
    assert d.lambda_tilde_I == pytest.approx(0.5 * (0.5 * 1.0 + 1.0 * 2.0))
    assert d.lambda_dtilde_I == pytest.approx((100e3 * 1.0 + 200e3 * 2.0) / 200e3)
    ph = inc.P_I * cfg.b / np.array([100e3, 200e3]) / cfg.P_IoT
    assert np.allclose(d.band_incumbent_terms, ph ** d.delta * np.array([0.5, 2.0]))


def test_unb_thinned_density():
    cfg = NetworkConfig(M=5, N=3, lambda_IoT=1200.0)
    d = derive_params(cfg)
    expected = 3 * 2 * cfg.lambda_T * (2 * 600 / 1e6) * 1200.0
    assert d.lambda_tilde_IoT == pytest.approx(expected, rel=1e-14)
    assert d.lambda_tilde_IoT <= cfg.lambda_IoT


def test_normalised_powers():
    cfg, inc = default_scenario()
    d = derive_params(cfg, inc)
    assert d.P_hat_N == pytest.approx(10 ** (-16.0), rel=1e-12)
    assert d.P_hat_I == pytest.approx(600 / 125e3, rel=1e-12)


def test_validation_lists_every_violation():
    cfg = NetworkConfig(b=3e5, alpha=2.0, tau=0.0, beta_T=3.0, M=0, K=100000)
    msgs = validate(cfg)
    for needle in ("b must be smaller than B", "alpha must exceed 2", "tau must be positive",
                   "beta_T", "M must be a positive integer", "duty cycle"):
        assert any(needle in m for m in msgs), needle
    with pytest.raises(ConfigError) as err:
        derive_params(cfg)
    assert len(err.value.violations) == len(msgs)


def test_type2_length_must_match_bands():
    msgs = validate(NetworkConfig(M=5), IncumbentConfig.type2([125e3] * 3, [1.0] * 3))
    assert any("length M=5" in m for m in msgs)


def test_type2_bandwidth_bounded_by_band():
    msgs = validate(NetworkConfig(M=1), IncumbentConfig.type2([300e3], [1.0]))
    assert any("B_I" in m for m in msgs)


def test_pn_only_for_single_set_protocols():
    cfg = NetworkConfig()
    assert validate(cfg, None, ProtocolSpec(Protocol.NEAREST_BS, Hopping.PN)) == []
    msgs = validate(cfg, None, ProtocolSpec(Protocol.BAND_HOPPED, Hopping.PN))
    assert any("PN" in m for m in msgs)


@pytest.mark.parametrize("p", [(0.5, 0.5), (0.3, 0.3, 0.3, 0.3, -0.2), (0.5, 0.2, 0.2, 0.2, 0.2)])
def test_selection_vector_checked(p):
    msgs = validate(NetworkConfig(M=5), None, ProtocolSpec(Protocol.BAND_CONSTRAINED, p=p))
    assert any(m.startswith("p must") for m in msgs)


def test_protocol_names():
    assert Protocol.parse("sigfox") is Protocol.NO_ASSOCIATION
    assert Protocol.parse("NearestBS") is Protocol.NEAREST_BS
    assert Protocol.parse("band_hopped") is Protocol.BAND_HOPPED
    with pytest.raises(ValueError):
        Protocol.parse("mesh")
    assert IncumbentKind.parse("Type-II") is IncumbentKind.TYPE_II


def test_xi_matches_gamma_identity():
    # sin(pi d)/(pi d) = 1/(Gamma(1+d) Gamma(1-d))
    for delta in (0.1, 0.4, 2 / 3.5, 0.9):
        assert xi_of(delta) == pytest.approx(1 / (math.gamma(1 + delta) * math.gamma(1 - delta)), rel=1e-13)


def test_default_scenario_scales_with_bs_density():
    cfg, inc = default_scenario(lambda_B=0.1, M=1)
    assert cfg.lambda_IoT == pytest.approx(3000.0)
    assert inc.lambda_I0 == pytest.approx(1e3 * cfg.lambda_T * 0.1)
