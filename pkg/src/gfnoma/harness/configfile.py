"""Flat key=value files with units in the key names."""
from dataclasses import asdict, fields
import math

from ..network import ConfigError, NetworkConfig, dbm_to_watts, watts_to_dbm

# file key -> (config field, to SI, from SI)
_KEYS = {
    "n_devices": ("n_devices", float, float),
    "preamble_len": ("preamble_len", int, int),
    "data_symbols": ("data_symbols", int, int),
    "d0_m": ("d0", float, float),
    "d1_m": ("d1", float, float),
    "alpha": ("alpha", float, float),
    "noise_dbm": ("noise_power", lambda v: dbm_to_watts(float(v)), watts_to_dbm),
    "tx_power_dbm": ("tx_power", lambda v: dbm_to_watts(float(v)), watts_to_dbm),
    "p_act": ("p_act", float, float),
    "c1": ("c1", float, float),
    "c2": ("c2", float, float),
    "c3": ("c3", float, float),
    "p_static_mw": ("p_static", lambda v: float(v) * 1e-3, lambda w: w * 1e3),
    "p_dynamic_mw": ("p_dynamic", lambda v: float(v) * 1e-3, lambda w: w * 1e3),
    "antenna_eff": ("antenna_eff", float, float),
    "m_subbands": ("m_subbands", int, int),
    "eps_tail": ("eps_tail", float, float),
}
CONFIG_KEYS = frozenset(_KEYS)


def parse_pairs(text, source="<text>"):
    """key=value lines; '#' starts a comment; later keys override earlier ones."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def config_from_pairs(pairs, base=None):
    """Build a NetworkConfig from file keys; unknown keys are ignored here."""
    kw = {}
    for key, value in pairs.items():
        if key in _KEYS:
            name, conv, _ = _KEYS[key]
            try:
                kw[name] = conv(value)
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {value!r}") from e
    base = base or NetworkConfig()
    if "n_devices" in kw and float(kw["n_devices"]).is_integer():
        kw["n_devices"] = int(kw["n_devices"])
    return base.with_(**kw)


def read_config(path):
    with open(path, encoding="utf-8") as fh:
        pairs = parse_pairs(fh.read(), str(path))
    extra = {k: v for k, v in pairs.items() if k not in _KEYS}
    return config_from_pairs(pairs), extra


def format_config(config, extra=None):
    lines = []
    values = asdict(config)
    for key, (name, _, back) in _KEYS.items():
        v = back(values[name])
        if isinstance(v, float):
            v = int(v) if v.is_integer() and abs(v) < 1e15 else repr(round(v, 12))
        lines.append(f"{key}={v}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def write_config(config, path, extra=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_config(config, extra))
