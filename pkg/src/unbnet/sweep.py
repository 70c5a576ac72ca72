"""Parameter sweeps producing table rows for the analytic and Monte Carlo paths."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from . import analytic, config
from .model import ConfigError, Hopping, Protocol, ProtocolSpec
from .simulate import run

VARIABLES = ("tau_db", "M", "N", "gamma", "lambda_IoT", "lambda_I")
INTEGER_VARIABLES = {"M", "N"}

# keys in a raw config that compete with the swept variable
_SHADOWED = {
    "tau_db": ("tau", "tau_db"),
    "lambda_IoT": ("lambda_IoT", "devices_per_bs"),
    "lambda_I": ("lambda_I0", "lambda_I", "incumbents_per_bs"),
}


def parse_range(text: str) -> list[float]:
    """``a:b:step`` (inclusive of b up to rounding) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range {text!r} must look like start:stop:step")
        a, b, step = (float(x) for x in parts)
        if step == 0 or (b - a) * step < 0:
            raise ValueError(f"range {text!r} is empty")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return [a + k * step for k in range(n)]
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise ValueError("range is empty")
    return values


def parse_protocol(text: str) -> ProtocolSpec:
    """``name`` or ``name:hopping``, e.g. ``nearest:pn``."""
    name, _, hop = text.partition(":")
    return ProtocolSpec(Protocol.parse(name), Hopping(hop.strip().lower()) if hop else Hopping.RANDOM)


@dataclass
class SweepSpec:
    variable: str | None = None
    values: list = field(default_factory=list)
    protocols: list = field(default_factory=list)
    out: str | None = None

    def __post_init__(self):
        if self.variable is None:
            if self.values:
                raise ValueError("values given without a variable")
            return
        if self.variable not in VARIABLES:
            raise ValueError(f"cannot sweep {self.variable!r}; choose one of {', '.join(VARIABLES)}")
        if not self.values:
            raise ValueError("sweep range is empty")
        if self.variable in INTEGER_VARIABLES:
            if any(v != int(v) or v < 1 for v in self.values):
                raise ValueError(f"{self.variable} takes positive integers")
            self.values = [int(v) for v in self.values]
        if self.variable == "gamma" and any(not 0 < v < 1 for v in self.values):
            raise ValueError("gamma must lie in (0, 1)")

    def points(self):
        return [None] if self.variable is None else list(self.values)


def experiment_at(raw: dict, variable: str | None, value) -> tuple[config.Experiment, float | None]:
    """Experiment with the swept variable set; returns (experiment, gamma or None)."""
    raw = dict(raw)
    gamma = None
    if variable == "gamma":
        gamma = float(value)
    elif variable is not None:
        for key in _SHADOWED.get(variable, ()):
            raw.pop(key, None)
        if variable == "lambda_I":
            exp = config.build(raw)
            raw["lambda_I0" if exp.inc.kind.value == "type1" else "lambda_I"] = float(value)
            if "incumbent_kind" not in raw:
                raw["incumbent_kind"] = exp.inc.kind.value
        else:
            raw[variable] = value
    return config.build(raw), gamma


def _label(variable):
    return variable or "point"


def analytic_rows(raw: dict, spec: SweepSpec, protocols):
    for value in spec.points():
        for proto in protocols:
            exp, gamma = experiment_at(raw, spec.variable, value)
            exp_proto = _with_p(proto, exp)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", analytic.DegenerateWarning)
                if gamma is None:
                    metric, v = "p_s", analytic.success_probability(exp.cfg, exp.inc, exp_proto)
                else:
                    metric, v = "capacity", analytic.capacity(gamma, exp.cfg, exp.inc, exp_proto).density
            yield _row(spec, value, proto, "analytic", metric, v)
            if gamma is not None:
                yield _row(spec, value, proto, "analytic", "devices_per_bs", v / exp.cfg.lambda_B)


def mc_rows(raw: dict, spec: SweepSpec, protocols, sim_overrides: dict):
    """Monte Carlo rows. A tau sweep reuses one run per protocol (max-SINR samples)."""
    if spec.variable == "gamma":
        raise ValueError("gamma sweeps are analytic only (capacity inversion)")
    for proto in protocols:
        if spec.variable == "tau_db":
            exp, _ = experiment_at(raw, None, None)
            est = run(exp.cfg, exp.inc, _with_p(proto, exp), exp.sim.replace(sinr_record=True, **sim_overrides))
            for value in spec.points():
                yield _mc_row(spec, value, proto, est.at(10 ** (value / 10)))
            continue
        for value in spec.points():
            exp, _ = experiment_at(raw, spec.variable, value)
            est = run(exp.cfg, exp.inc, _with_p(proto, exp), exp.sim.replace(**sim_overrides))
            yield _mc_row(spec, value, proto, est)


def _with_p(proto: ProtocolSpec, exp: config.Experiment) -> ProtocolSpec:
    """Carry the configured band-selection vector over to multiband protocols."""
    if proto.p is None and exp.proto.p is not None and len(exp.proto.p) == exp.cfg.M:
        return ProtocolSpec(proto.protocol, proto.hopping, exp.proto.p)
    return proto


def _row(spec, value, proto, method, metric, v, lo=None, hi=None, n=None):
    return {_label(spec.variable): "" if value is None else value,
            "protocol": proto.protocol.value, "hopping": proto.hopping.value,
            "method": method, "metric": metric, "value": v,
            "wilson_lo": "" if lo is None else lo, "wilson_hi": "" if hi is None else hi,
            "realizations": "" if n is None else n}


def _mc_row(spec, value, proto, est):
    return _row(spec, value, proto, "mc", "p_s", est.p_hat, est.ci_low, est.ci_high, est.n_realizations)


def joined_rows(analytic_list, mc_list, variable):
    """Pair analytic and mc rows on (point, protocol, hopping) and add |difference|."""
    key = _label(variable)
    mc = {(r[key], r["protocol"], r["hopping"]): r for r in mc_list}
    for a in analytic_list:
        m = mc.get((a[key], a["protocol"], a["hopping"]))
        if m is None or a["metric"] != "p_s":
            continue
        yield {key: a[key], "protocol": a["protocol"], "hopping": a["hopping"],
               "analytic": a["value"], "mc": m["value"], "wilson_lo": m["wilson_lo"],
               "wilson_hi": m["wilson_hi"], "abs_diff": abs(a["value"] - m["value"]),
               "realizations": m["realizations"]}


def check_protocols(protocols, spec: SweepSpec):
    if not protocols:
        raise ValueError("no protocols given")
    for proto in protocols:
        if proto.hopping is Hopping.PN and proto.protocol in (Protocol.BAND_CONSTRAINED,
                                                              Protocol.BAND_HOPPED):
            raise ConfigError([f"PN hopping is not defined for {proto.protocol.value}"])

