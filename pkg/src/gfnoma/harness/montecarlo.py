"""Frame-level Monte Carlo of the full preamble + data chain."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math
import time

import numpy as np

from .. import analysis
from ..aud import (AudOutcome, Event, amp_threshold, empirical_nmse, k_max, lasso_ista,
                   ls_estimate, reg_param, ta_omp, ta_sp)
from ..network import intensity, sample_realization
from ..phy import (complex_gaussian, gen_gaussian_preambles, qpsk_slice,
                   synth_frame, zc_pool)
from ..rate import ofdma_rates, op_preamble_collision, sic_rates, subband_assignment

DETECTORS = ("ta_omp", "ta_sp", "lasso", "zc_op_baseline", "oracle")
OUTPUTS = ("p_per", "nmse", "rate", "ee", "apce", "ser")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class Stat:
    mean: float
    ci_lo: float
    ci_hi: float
    n: int


@dataclass
class ReportRow:
    value: float
    analytic: dict
    empirical: dict            # (source, metric) -> Stat
    failures: dict
    trials: int


@dataclass
class Report:
    sweep_var: str
    rows: list
    meta: dict = field(default_factory=dict)


def trial_rng(seed, point_index, trial_index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(point_index, trial_index)))


def setup_rng(seed, point_index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(point_index,)))


def mean_ci(values):
    """Mean with a normal-approximation 95% interval; compensated sums."""
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 0:
        return Stat(math.nan, math.nan, math.nan, 0)
    m = math.fsum(x) / n
    if n == 1:
        return Stat(m, m, m, 1)
    var = math.fsum((x - m) ** 2) / (n - 1)
    h = Z95 * math.sqrt(var / n)
    return Stat(m, m - h, m + h, n)


def ratio_ci(num, den):
    """Ratio of means sum(num)/sum(den) with a delta-method 95% interval."""
    a = np.asarray(num, dtype=float)
    b = np.asarray(den, dtype=float)
    n = a.size
    if n == 0 or math.fsum(b) == 0:
        return Stat(math.nan, math.nan, math.nan, n)
    r = math.fsum(a) / math.fsum(b)
    if n == 1:
        return Stat(r, r, r, 1)
    resid = a - r * b
    se = math.sqrt(math.fsum(resid ** 2) / (n - 1) / n) / (math.fsum(b) / n)
    return Stat(r, r - Z95 * se, r + Z95 * se, n)


@dataclass
class _Setup:
    phi: np.ndarray
    zc: np.ndarray
    bands: np.ndarray


def _setup(config, seed, point_index):
    rng = setup_rng(seed, point_index)
    n = int(round(config.n_devices))
    phi = gen_gaussian_preambles(config.preamble_len, n, rng).entries
    zc = zc_pool(config.preamble_len).entries
    bands = subband_assignment(n, config.m_subbands, rng)
    return _Setup(phi, zc, bands)


def _sic_decode(y_data, phi, order, q_hat):
    """Symbol-level SIC on the data phase with estimated coefficients."""
    y = y_data.copy()
    decisions = np.zeros((len(order), y.shape[1]), dtype=complex)
    for i, (n, c) in enumerate(zip(order, q_hat)):
        col = phi[:, n]
        s = qpsk_slice(col.conj() @ y / c)
        decisions[i] = s
        y -= np.outer(col * c, s)
    return decisions


def _zc_detect(config, realization, q, setup, threshold, rng):
    """Orthogonal-pool baseline: returns (detected devices, q_hat, event)."""
    ids = realization.identities
    pool = setup.zc.shape[1]
    choice, collided = op_preamble_collision(len(ids), pool, rng)
    y = setup.zc[:, choice] @ q[ids] + complex_gaussian(config.preamble_len, rng, config.noise_power)
    z = setup.zc.conj().T @ y
    hits = np.abs(z) > threshold
    used = np.zeros(pool, dtype=bool)
    used[choice] = True
    ok = hits[choice] & ~collided
    det = ids[ok]
    if not collided.any() and np.array_equal(hits, used):
        event = Event.PERFECT
    elif (hits & ~used).any():
        event = Event.MIXED
    else:
        event = Event.MISSED
    return det, z[choice[ok]], event


def _one_trial(config, detectors, outputs, setup, seed, point_index, t, params):
    rng = trial_rng(seed, point_index, t)
    real = sample_realization(config, rng)
    frame = synth_frame(real, setup.phi, config, rng)
    q = frame.q
    ids = real.identities
    active = (ids, q[ids])
    noise = config.preamble_len * config.noise_power
    thr, km, gam = params
    out = {}
    for det in detectors:
        rec = {}
        try:
            if det == "zc_op_baseline":
                found, q_hat, event = _zc_detect(config, real, q, setup, thr, rng)
                found = np.asarray(found, dtype=int)
            else:
                if det == "ta_omp":
                    o = ta_omp(frame.y0, setup.phi, thr, config.noise_power)
                elif det == "ta_sp":
                    o = ta_sp(frame.y0, setup.phi, thr, km, config.noise_power)
                elif det == "lasso":
                    o = lasso_ista(frame.y0, setup.phi, gam, threshold=thr)
                else:  # threshold the true coefficients
                    strong = ids[np.abs(q[ids]) >= thr]
                    o = AudOutcome(tuple(strong.tolist()), ls_estimate(frame.y0, setup.phi, strong))
                o = o.against(ids)
                event = o.event
                if det == "oracle" and len(ids) > km:
                    event = Event.MIXED  # beyond the supported sparsity
                found = np.asarray(o.detected, dtype=int)
                q_hat = ls_estimate(frame.y0, setup.phi, found) if found.size else o.q_hat
        except (np.linalg.LinAlgError, ValueError, ArithmeticError):
            out[det] = {"failed": 1.0, "p_per": 0.0}
            continue
        rec["p_per"] = 1.0 if event == Event.PERFECT else 0.0
        good = event in (Event.PERFECT, Event.MISSED)
        if "nmse" in outputs and good and found.size:
            qt = q[found]
            err = np.vdot(qt - q_hat, qt - q_hat).real
            rec["nmse"] = empirical_nmse(qt, q_hat)
            rec["nmse_err"] = err / found.size
            rec["nmse_pow"] = np.vdot(qt, qt).real
            rec["nmse_j"] = float(found.size)
        if "rate" in outputs:
            rec["rate"] = sic_rates(active, found, noise).aggregate if good else 0.0
            rec["rate_oma"] = (ofdma_rates(active, found, setup.bands, config).aggregate
                               if good else 0.0)
        if "ser" in outputs and good and found.size:
            order = np.lexsort((found, -np.abs(q_hat)))
            dec = _sic_decode(frame.y_data, setup.phi, found[order], q_hat[order])
            pos = {int(n): i for i, n in enumerate(ids)}
            sent = frame.tx_symbols[[pos[int(n)] for n in found[order]]]
            rec["ser"] = float(np.mean(np.abs(dec - sent) > 1e-9))
        out[det] = rec
    return out


def _run_chunk(args):
    config, detectors, outputs, seed, point_index, lo, hi = args
    setup = _setup(config, seed, point_index)
    params = (amp_threshold(config), k_max(config), reg_param(config))
    return [_one_trial(config, detectors, outputs, setup, seed, point_index, t, params)
            for t in range(lo, hi)]


def analytic_columns(config, outputs, density=None):
    cols = {}
    if "p_per" in outputs:
        cols["p_per"] = analysis.p_per(config)
    if "nmse" in outputs:
        cols["nmse"] = analysis.avg_nmse(config)
    if "rate" in outputs:
        cols["rate"] = analysis.avg_rate(config)
    if "ee" in outputs:
        cols["ee"] = analysis.ee(config)
    if "apce" in outputs:
        cols["apce"] = (analysis.apce(config, density) if density is not None
                        else config.n_devices * analysis.p_per(config))
    return cols


def _aggregate(config, detectors, outputs, trials, records, density):
    emp = {}
    fails = {}
    for det in detectors:
        recs = [r[det] for r in records]
        fails[det] = int(sum(r.get("failed", 0) for r in recs))
        pper = mean_ci([r["p_per"] for r in recs])
        if "p_per" in outputs:
            emp[(det, "p_per")] = pper
        if "ee" in outputs:
            k = config.p_act / analysis.avg_power_dev(config)
            emp[(det, "ee")] = Stat(k * pper.mean, k * pper.ci_lo, k * pper.ci_hi, pper.n)
        if "apce" in outputs:
            n = config.n_devices
            emp[(det, "apce")] = Stat(n * pper.mean, n * pper.ci_lo, n * pper.ci_hi, pper.n)
        if "nmse" in outputs:
            sel = [r for r in recs if "nmse" in r]
            emp[(det, "nmse")] = mean_ci([r["nmse"] for r in sel])
            # error per coefficient over power per detected device
            pooled = ratio_ci([r["nmse_err"] for r in sel], [r["nmse_pow"] for r in sel])
            jbar = (math.fsum(r["nmse_j"] for r in sel) / len(sel)) if sel else math.nan
            emp[(det, "nmse_pooled")] = Stat(pooled.mean * jbar, pooled.ci_lo * jbar,
                                             pooled.ci_hi * jbar, pooled.n)
        if "rate" in outputs:
            ok = [r for r in recs if "rate" in r]
            emp[(det, "rate")] = mean_ci([r["rate"] for r in ok])
            emp[(det, "rate_oma")] = mean_ci([r["rate_oma"] for r in ok])
        if "ser" in outputs:
            emp[(det, "ser")] = mean_ci([r["ser"] for r in recs if "ser" in r])
    return emp, fails


def run_point(config, detectors, trials, seed, point_index=0, outputs=("p_per",),
              density=None, value=math.nan, workers=1, with_analytic=True):
    """Simulate one configuration; returns a ReportRow.

    Trial t of point p draws from SeedSequence(seed, spawn_key=(p, t)), so
    the result does not depend on ``workers``.
    """
    detectors = tuple(detectors)
    unknown = set(detectors) - set(DETECTORS)
    if unknown:
        raise ValueError(f"unknown detectors {sorted(unknown)}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    outputs = tuple(outputs)
    records = []
    if detectors:
        if workers > 1:
            edges = np.linspace(0, trials, workers + 1).astype(int)
            jobs = [(config, detectors, outputs, seed, point_index, edges[i], edges[i + 1])
                    for i in range(workers)]
            with ProcessPoolExecutor(workers) as pool:
                for chunk in pool.map(_run_chunk, jobs):
                    records.extend(chunk)
        else:
            records = _run_chunk((config, detectors, outputs, seed, point_index, 0, trials))
    emp, fails = _aggregate(config, detectors, outputs, trials, records, density)
    ana = analytic_columns(config, outputs, density) if with_analytic else {}
    return ReportRow(value, ana, emp, fails, trials)


def report_meta(config, seed):
    return {"seed": seed, "config_hash": config.digest(),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
