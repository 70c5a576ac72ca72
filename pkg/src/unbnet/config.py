"""Flat key-value experiment files (YAML or JSON) and their dB conventions.

Keys match the dataclass field names exactly (case-sensitive). A key with a
``_db`` suffix (``tau_db``) or ``_dbm`` suffix (``P_IoT_dbm``, ``P_N_dbm``,
``P_I_dbm``) is converted to linear units (W for dBm) here and nowhere else.

Densities can be given per km^2 or relative to the BS density:
``devices_per_bs`` sets lambda_IoT = devices_per_bs * lambda_B and
``incumbents_per_bs`` sets the incumbent density to
incumbents_per_bs * lambda_T * lambda_B (a scalar, or one value per band).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .model import (ConfigError, Hopping, IncumbentConfig, IncumbentKind, NetworkConfig,
                    Protocol, ProtocolSpec, check, default_scenario)
from .simulate import SimConfig

NETWORK_KEYS = {f.name for f in dataclasses.fields(NetworkConfig)}
SIM_KEYS = {f.name for f in dataclasses.fields(SimConfig)} - {"dump_path"}
INCUMBENT_KEYS = {"incumbent_kind", "P_I", "B_I0", "lambda_I0", "B_I", "lambda_I", "incumbents_per_bs"}
PROTOCOL_KEYS = {"protocol", "hopping", "p"}
EXTRA_KEYS = {"devices_per_bs"}
DB_KEYS = {"tau_db": "tau"}
DBM_KEYS = {"P_IoT_dbm": "P_IoT", "P_N_dbm": "P_N", "P_I_dbm": "P_I"}


def db_to_linear(x: float) -> float:
    return 10.0 ** (float(x) / 10.0)


def dbm_to_watts(x: float) -> float:
    return 1e-3 * db_to_linear(x)


@dataclass
class Experiment:
    cfg: NetworkConfig
    inc: IncumbentConfig
    proto: ProtocolSpec = field(default_factory=ProtocolSpec)
    sim: SimConfig = field(default_factory=SimConfig)


def read_mapping(path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError([f"{path}: cannot parse: {exc}"]) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: expected a mapping of keys to values"])
    return data


def _normalise(raw: dict) -> tuple[dict, list[str]]:
    """Convert dB keys, report unknown keys and duplicates of the same quantity."""
    known = NETWORK_KEYS | SIM_KEYS | INCUMBENT_KEYS | PROTOCOL_KEYS | EXTRA_KEYS
    out, errors = {}, []
    for key, value in raw.items():
        if key in DB_KEYS or key in DBM_KEYS:
            target = DB_KEYS.get(key) or DBM_KEYS[key]
            conv = db_to_linear if key in DB_KEYS else dbm_to_watts
            if target in raw:
                errors.append(f"both {key} and {target} given")
                continue
            try:
                out[target] = conv(value)
            except (TypeError, ValueError):
                errors.append(f"{key} must be a number, got {value!r}")
        elif key in known:
            out[key] = value
        else:
            errors.append(f"unknown key {key!r}")
    if "devices_per_bs" in out and "lambda_IoT" in out:
        errors.append("both devices_per_bs and lambda_IoT given")
    return out, errors


def _as_tuple(value, M: int, name: str, errors: list) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    try:
        return (float(value),) * M
    except (TypeError, ValueError):
        errors.append(f"{name} must be a number or a list of numbers")
        return ()


def build(raw: dict, base: Experiment | None = None) -> Experiment:
    """Experiment from a flat mapping; unspecified values come from ``base`` (default scenario)."""
    values, errors = _normalise(raw)
    if base is None:
        cfg0, inc0 = default_scenario()
        base = Experiment(cfg0, inc0)
        # default densities follow lambda_B, as in the default scenario
        if "lambda_IoT" not in values:
            values.setdefault("devices_per_bs", 30e3)
        if values.get("incumbent_kind", "type1") != "none" and not {"lambda_I0", "lambda_I"} & values.keys():
            values.setdefault("incumbents_per_bs", 1e3)

    net = {k: values[k] for k in NETWORK_KEYS & values.keys()}
    for k in ("M", "N", "K"):
        if k in net:
            if isinstance(net[k], bool) or float(net[k]) != int(net[k]):
                errors.append(f"{k} must be an integer")
            net[k] = int(net[k])
    try:
        cfg = base.cfg.replace(**net)
    except TypeError as exc:
        raise ConfigError([str(exc)]) from None
    if "devices_per_bs" in values:
        cfg = cfg.replace(lambda_IoT=float(values["devices_per_bs"]) * cfg.lambda_B)

    inc = base.inc
    if INCUMBENT_KEYS & values.keys():
        kind_name = values.get("incumbent_kind", inc.kind.value)
        if kind_name == "none":
            inc = IncumbentConfig.none()
        else:
            try:
                kind = IncumbentKind.parse(kind_name)
            except ValueError as exc:
                raise ConfigError([str(exc)]) from None
            inc = inc if kind is inc.kind else IncumbentConfig(kind=kind, P_I=inc.P_I)
            if "P_I" in values:
                inc = inc.replace(P_I=float(values["P_I"]))
            per_bs = values.get("incumbents_per_bs")
            if kind is IncumbentKind.TYPE_I:
                if "B_I0" in values:
                    inc = inc.replace(B_I0=float(values["B_I0"]))
                if per_bs is not None:
                    inc = inc.replace(lambda_I0=float(per_bs) * cfg.lambda_T * cfg.lambda_B)
                if "lambda_I0" in values:
                    inc = inc.replace(lambda_I0=float(values["lambda_I0"]))
            else:
                B_I = values.get("B_I", inc.B_I or 125e3)
                inc = inc.replace(B_I=_as_tuple(B_I, cfg.M, "B_I", errors))
                if per_bs is not None:
                    inc = inc.replace(lambda_I=tuple(v * cfg.lambda_T * cfg.lambda_B for v in
                                                     _as_tuple(per_bs, cfg.M, "incumbents_per_bs", errors)))
                if "lambda_I" in values:
                    inc = inc.replace(lambda_I=_as_tuple(values["lambda_I"], cfg.M, "lambda_I", errors))
                if not inc.lambda_I:
                    inc = inc.replace(lambda_I=(0.0,) * cfg.M)

    proto = base.proto
    try:
        if "protocol" in values:
            proto = dataclasses.replace(proto, protocol=Protocol.parse(values["protocol"]))
        if "hopping" in values:
            proto = dataclasses.replace(proto, hopping=Hopping(str(values["hopping"]).lower()))
    except ValueError as exc:
        errors.append(str(exc))
    if "p" in values:
        proto = dataclasses.replace(proto, p=_as_tuple(values["p"], cfg.M, "p", errors))

    sim = base.sim.replace(**{k: values[k] for k in SIM_KEYS & values.keys()})
    if errors:
        raise ConfigError(errors)
    check(cfg, inc, proto)
    return Experiment(cfg, inc, proto, sim)


def load(path=None, overrides: dict | None = None) -> Experiment:
    raw = read_mapping(path) if path is not None else {}
    raw.update(overrides or {})
    return build(raw)
