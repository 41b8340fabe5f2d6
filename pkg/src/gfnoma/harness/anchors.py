"""Anchor files for calibration.

Plain config lines set the base configuration; each ``anchor:`` line lists
overrides (same keys and units) plus the target ``p_per``::

    tx_power_dbm=20
    anchor: n_devices=355 p_per=0.9
    anchor: tx_power_dbm=14.5 p_per=0.9
"""
from ..network import ConfigError
from .configfile import config_from_pairs, parse_pairs


def parse_anchors(text, source="<anchors>"):
    base_lines, anchor_lines = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("anchor:"):
            anchor_lines.append((lineno, line[len("anchor:"):]))
        else:
            base_lines.append(line)
    pairs = parse_pairs("\n".join(base_lines), source)
    base = config_from_pairs(pairs)
    anchors = []
    for lineno, body in anchor_lines:
        kv = {}
        for tok in body.split():
            if "=" not in tok:
                raise ConfigError(f"{source}:{lineno}: bad anchor token {tok!r}")
            k, v = tok.split("=", 1)
            kv[k] = v
        if "p_per" not in kv:
            raise ConfigError(f"{source}:{lineno}: anchor needs p_per=")
        target = float(kv.pop("p_per"))
        anchors.append((config_from_pairs(kv, base), target))
    if not anchors:
        raise ConfigError(f"{source}: no anchor lines")
    return base, anchors


def read_anchors(path):
    with open(path, encoding="utf-8") as fh:
        return parse_anchors(fh.read(), str(path))
