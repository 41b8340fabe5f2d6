"""Model-level Monte Carlo estimators used to cross-check the closed forms.

These sample the Poisson field directly and skip the detectors: the
question they answer is whether a formula matches the random model it
describes.
"""
import math

import numpy as np

from ..aud import amp_threshold, k_max
from ..network import intensity, received_power, sample_realization
from ..phy import complex_gaussian
from ..rate import sic_rates
from .montecarlo import mean_ci, ratio_ci


def _field(config, rng, frames):
    """Vectorized draw of many frames: counts and flat device powers."""
    k = rng.poisson(intensity(config), frames)
    tot = int(k.sum())
    r = np.sqrt(config.d0 ** 2 + rng.random(tot) * config.area_gap)
    p = received_power(config, r, rng.exponential(1.0, tot))
    owner = np.repeat(np.arange(frames), k)
    return k, p, owner


def perfect_detection_mc(config, trials, rng, chunk=20000):
    """Fraction of frames with K <= K_max and every |q| above the threshold."""
    thr2 = amp_threshold(config) ** 2
    km = k_max(config)
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        k, p, owner = _field(config, rng, n)
        weak = np.bincount(owner, weights=(p <= thr2).astype(float), minlength=n)
        hits += int(np.count_nonzero((k <= km) & (weak == 0)))
        done += n
    return hits / trials


def _unit_variance(m, n, rng):
    return complex_gaussian((m, n), rng)


def ls_mse_mc(config, j, trials, rng):
    """Per-coefficient LS error with j known detected devices.

    Preamble entries are i.i.d. CN(0, 1). The devices below the threshold
    come from the Poisson field and are the only interference; the j
    detected coefficients are drawn from the above-threshold law.
    """
    thr2 = amp_threshold(config) ** 2
    m = config.preamble_len
    errs = np.empty(trials)
    for t in range(trials):
        real = sample_realization(config, rng)
        p = received_power(config, real.distances, real.fading)
        miss = np.sqrt(p[p < thr2]) * np.exp(1j * real.phases[p < thr2])
        det = _detected_draw(config, j, rng, thr2)
        phi = _unit_variance(m, j + miss.size, rng)
        y = phi[:, :j] @ det + phi[:, j:] @ miss + complex_gaussian(m, rng, config.noise_power)
        est, *_ = np.linalg.lstsq(phi[:, :j], y, rcond=None)
        errs[t] = np.vdot(est - det, est - det).real / j
    return mean_ci(errs)


def _detected_draw(config, j, rng, thr2):
    out = []
    while len(out) < j:
        r = np.sqrt(config.d0 ** 2 + rng.random(4 * j) * config.area_gap)
        p = received_power(config, r, rng.exponential(1.0, 4 * j))
        out.extend(p[p >= thr2].tolist())
    amp = np.sqrt(np.array(out[:j]))
    return amp * np.exp(1j * rng.uniform(0, 2 * np.pi, j))


def ce_nmse_mc(config, trials, rng):
    """End-to-end LS estimation with threshold detection.

    Frames beyond the supported sparsity and frames with nothing detected
    are skipped. Returns (per-frame NMSE statistic, pooled NMSE) where the
    pooled form divides the mean per-coefficient error by the mean power of
    a detected device.
    """
    thr2 = amp_threshold(config) ** 2
    km = k_max(config)
    m = config.preamble_len
    per_frame, err, pw, cnt = [], [], [], []
    for _ in range(trials):
        real = sample_realization(config, rng)
        if real.k_active > km:
            continue
        p = received_power(config, real.distances, real.fading)
        q = np.sqrt(p) * np.exp(1j * real.phases)
        det = p >= thr2
        j = int(det.sum())
        if j == 0:
            continue
        phi = _unit_variance(m, q.size, rng)
        y = phi @ q + complex_gaussian(m, rng, config.noise_power)
        est, *_ = np.linalg.lstsq(phi[:, det], y, rcond=None)
        e = np.vdot(est - q[det], est - q[det]).real
        s = np.vdot(q[det], q[det]).real
        per_frame.append(e / (s * j))
        err.append(e / j)
        pw.append(s)
        cnt.append(j)
    pooled = ratio_ci(err, pw)
    jbar = float(np.mean(cnt)) if cnt else math.nan
    scaled = type(pooled)(pooled.mean * jbar, pooled.ci_lo * jbar, pooled.ci_hi * jbar, pooled.n)
    return mean_ci(per_frame), scaled


def oracle_rate_mc(config, frames, rng):
    """Aggregate SIC rate with threshold detection; frames beyond K_max give 0."""
    thr = amp_threshold(config)
    km = k_max(config)
    noise = config.preamble_len * config.noise_power
    rates = np.zeros(frames)
    for t in range(frames):
        real = sample_realization(config, rng)
        if real.k_active == 0 or real.k_active > km:
            continue
        amp = np.sqrt(received_power(config, real.distances, real.fading))
        det = real.identities[amp >= thr]
        rates[t] = sic_rates((real.identities, amp), det, noise).aggregate
    return mean_ci(rates)


def conditional_power_mc(config, accepted, rng):
    """Mean |q|^2 of devices above the threshold, by rejection sampling."""
    thr2 = amp_threshold(config) ** 2
    got = []
    n = 0
    while n < accepted:
        r = np.sqrt(config.d0 ** 2 + rng.random(accepted) * config.area_gap)
        p = received_power(config, r, rng.exponential(1.0, accepted))
        keep = p[p > thr2]
        got.append(keep)
        n += keep.size
    return mean_ci(np.concatenate(got)[:accepted])
