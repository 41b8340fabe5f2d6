"""Parameter sweeps and CSV output."""
import csv
from dataclasses import dataclass, field
import io
import math
import os

import numpy as np

from ..network import ConfigError, NetworkConfig, dbm_to_watts
from .configfile import config_from_pairs, parse_pairs, CONFIG_KEYS
from .montecarlo import DETECTORS, OUTPUTS, Report, report_meta, run_point

CSV_HEADER = ("sweep_var", "value", "metric", "source", "mean", "ci_lo", "ci_hi")

# sweep variable -> (config field, value converter)
SWEEP_VARS = {
    "N": ("n_devices", int),
    "P": ("tx_power", dbm_to_watts),
    "D1": ("d1", float),
    "M": ("preamble_len", int),
    "sigma2": ("noise_power", dbm_to_watts),
    "M_SB": ("m_subbands", int),
    "alpha": ("alpha", float),
}


@dataclass
class ExperimentSpec:
    base: NetworkConfig
    sweep_var: str
    grid: tuple
    trials: int = 100
    seed: int = 0
    detectors: tuple = ("ta_omp",)
    outputs: tuple = ("p_per",)
    density: float = None          # devices per m^2, for apce
    workers: int = 1
    out: str = None

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"unknown sweep variable {self.sweep_var!r}")
        g = tuple(float(v) for v in self.grid)
        if not g or list(g) != sorted(g):
            raise ConfigError("grid must be nonempty and sorted")
        self.grid = g
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        bad = set(self.detectors) - set(DETECTORS)
        if bad:
            raise ConfigError(f"unknown detectors {sorted(bad)}")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ConfigError(f"unknown outputs {sorted(bad)}")

    def config_at(self, value):
        name, conv = SWEEP_VARS[self.sweep_var]
        return self.base.with_(**{name: conv(value)})


def parse_grid(text):
    """'a:b:step' (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        a, b, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ConfigError("grid step must be positive")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return tuple(a + i * step for i in range(n))
    return tuple(float(t) for t in text.split(",") if t.strip())


def _names(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def read_spec(path):
    with open(path, encoding="utf-8") as fh:
        pairs = parse_pairs(fh.read(), str(path))
    try:
        base = config_from_pairs(pairs)
        density = pairs.get("density_per_km2")
        out = pairs.get("out")
        if out and not os.path.isabs(out):
            out = os.path.join(os.path.dirname(os.path.abspath(path)), out)
        return ExperimentSpec(
            base=base,
            sweep_var=pairs["sweep_var"],
            grid=parse_grid(pairs["grid"]),
            trials=int(pairs.get("trials", 100)),
            seed=int(pairs.get("seed", 0)),
            detectors=_names(pairs.get("detectors", "ta_omp")),
            outputs=_names(pairs.get("outputs", "p_per")),
            density=float(density) * 1e-6 if density else None,
            workers=int(pairs.get("workers", 1)),
            out=out,
        )
    except KeyError as e:
        raise ConfigError(f"missing key {e.args[0]}") from e
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e


def run_sweep(spec):
    rows = []
    for i, v in enumerate(spec.grid):
        cfg = spec.config_at(v)
        rows.append(run_point(cfg, spec.detectors, spec.trials, spec.seed, point_index=i,
                              outputs=spec.outputs, density=spec.density, value=v,
                              workers=spec.workers))
    return Report(spec.sweep_var, rows, report_meta(spec.base, spec.seed))


def _fmt(x):
    return repr(float(x))


def report_rows(report):
    for row in report.rows:
        for metric, val in row.analytic.items():
            yield (report.sweep_var, _fmt(row.value), metric, "analytic", _fmt(val), _fmt(val), _fmt(val))
        for (source, metric), st in row.empirical.items():
            yield (report.sweep_var, _fmt(row.value), metric, source,
                   _fmt(st.mean), _fmt(st.ci_lo), _fmt(st.ci_hi))


def write_csv(report, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report_rows(report):
        w.writerow(r)


def sweep(spec, path=None):
    """Run the sweep and write the long-format CSV; returns the Report."""
    report = run_sweep(spec)
    path = path or spec.out
    if path is None:
        raise ConfigError("no output path given")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_csv(report, fh)
    return report


def csv_text(report):
    buf = io.StringIO()
    write_csv(report, buf)
    return buf.getvalue()
