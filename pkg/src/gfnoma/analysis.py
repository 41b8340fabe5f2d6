"""Closed-form performance of the grant-free NOMA cell.

Notation: ``c = v^2 / P`` with ``v`` the amplitude threshold, so a device at
distance r is detectable when its fading exceeds c r^alpha. ``lambda`` is
the mean number of active devices.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special, stats

from .aud import amp_threshold, k_max
from .network import intensity
from .specfun import (QuadratureError, QuadratureSpec, exp_integral_ei,
                      gauss_2f1_one, integrate_adaptive, upper_inc_gamma)


def _ratio(config):
    return amp_threshold(config) ** 2 / config.tx_power


def _gamma_gap(a, config):
    """Gamma(a, c D0^alpha) - Gamma(a, c D1^alpha)."""
    c = _ratio(config)
    al = config.alpha
    x0, x1 = c * config.d0 ** al, c * config.d1 ** al
    if a > 0 and special.gammainc(a, x1) < 0.5:
        # both upper values sit near Gamma(a); difference the lower ones instead
        return float(special.gamma(a) * (special.gammainc(a, x1) - special.gammainc(a, x0)))
    return upper_inc_gamma(a, x0) - upper_inc_gamma(a, x1)


def p0(config):
    """Probability that an active device clears the amplitude threshold."""
    c = _ratio(config)
    if c == 0:
        return 1.0
    al = config.alpha
    b = 2.0 / al
    val = 2.0 * c ** (-b) / (al * config.area_gap) * _gamma_gap(b, config)
    return min(1.0, max(0.0, val))


def poisson_weights(config):
    """Pr{K = k} for k = 0..K_max."""
    km = k_max(config)
    return stats.poisson.pmf(np.arange(km + 1), intensity(config))


def p_per(config):
    """Probability of a perfect detection frame."""
    w = poisson_weights(config)
    if intensity(config) == 0:
        return 1.0
    return float(np.polynomial.polynomial.polyval(p0(config), w))


def mean_power(config):
    """Unconditional E|q|^2 of an active device."""
    al = config.alpha
    return (2.0 * config.tx_power * (config.d0 ** (2 - al) - config.d1 ** (2 - al))
            / ((al - 2.0) * config.area_gap))


def missed_power_mean(config):
    r"""Mean total power of active devices that fall below the threshold.

    Equals :math:`\frac{2\lambda P}{D_1^2-D_0^2}\int_{D_0}^{D_1} r^{1-\alpha}
    [1-(1+c r^\alpha)e^{-c r^\alpha}]dr`. Integrating by parts turns the
    bracket into lower incomplete gammas, which avoids the cancellation
    between the power term and Gamma(2/alpha - 1, .) in the expanded form.
    """
    lam = intensity(config)
    c = _ratio(config)
    if lam == 0 or c == 0:
        return 0.0
    al = config.alpha
    b = 2.0 / al
    x0, x1 = c * config.d0 ** al, c * config.d1 ** al
    lower = special.gamma(b + 1) * (special.gammainc(b + 1, x1) - special.gammainc(b + 1, x0))
    edge = special.gammainc(2, x1) * x1 ** (b - 1) - special.gammainc(2, x0) * x0 ** (b - 1)
    inner = c ** (1 - b) / (al * (1 - b)) * (lower - edge)
    return float(2.0 * lam * config.tx_power / config.area_gap * inner)


def missed_power_expanded(config):
    """Same quantity as ``missed_power_mean`` in the expanded form.

    Uses Gamma(2/alpha - 1, .) directly; loses digits to cancellation when
    few devices are missed. Kept as an independent cross-check.
    """
    lam = intensity(config)
    c = _ratio(config)
    al = config.alpha
    b = 2.0 / al
    power_term = (config.d0 ** (2 - al) - config.d1 ** (2 - al)) / (al - 2.0)
    gam = c ** (1 - b) / al * (_gamma_gap(b - 1, config) + _gamma_gap(b, config))
    return float(2.0 * lam * config.tx_power / config.area_gap * (power_term - gam))


def mse_j(config, j):
    """Per-coefficient LS error with j detected devices (watts)."""
    m = config.preamble_len
    if not 1 <= j <= m - 4:
        raise ValueError(f"j must lie in [1, {m - 4}]")
    return (missed_power_mean(config) + config.noise_power) / (m - j - 1)


def xi_mean(config):
    """Mean received power of a device conditioned on being detected."""
    c = _ratio(config)
    if c == 0:
        return mean_power(config)
    p = p0(config)
    if p <= 0:
        raise ValueError("no device can be detected (P0 = 0)")
    al = config.alpha
    b = 2.0 / al
    bracket = _gamma_gap(b - 1, config) + _gamma_gap(b, config)
    return float(2.0 * config.tx_power * c ** (1 - b) / (al * p * config.area_gap) * bracket)


def detected_count_pmf(config):
    """Pr{J = j, K <= K_max} for j = 0..K_max."""
    w = poisson_weights(config)
    km = len(w) - 1
    p = p0(config)
    out = np.zeros(km + 1)
    for k in range(km + 1):
        out[:k + 1] += w[k] * stats.binom.pmf(np.arange(k + 1), k, p)
    return out


def avg_nmse(config):
    """Average NMSE of LS channel estimates on the detected set."""
    pj = detected_count_pmf(config)
    m = config.preamble_len
    top = min(len(pj) - 1, m - 4)
    if top < len(pj) - 1 and pj[top + 1:].sum() > 1e-12:
        raise ValueError("K_max exceeds M - 4; the LS error model does not apply")
    base = missed_power_mean(config) + config.noise_power
    j = np.arange(1, top + 1)
    return float(np.sum(base / (m - j - 1) * pj[1:top + 1]) / xi_mean(config))


# ---- average aggregate rate ------------------------------------------------

def snr_mean(config):
    """E[psi] with psi = |q|^2 / (M sigma^2)."""
    return mean_power(config) / (config.preamble_len * config.noise_power)


def q_of_s(config, s):
    """Laplace transform E[exp(-s psi)] of the single-device SNR."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("s must be positive")
    al = config.alpha
    b = 2.0 / al + 1.0
    flat = s.ravel()
    out = np.empty_like(flat)
    for i, si in enumerate(flat):
        a = config.preamble_len * config.noise_power / (si * config.tx_power)
        hi = config.d1 ** (al + 2) * gauss_2f1_one(b, -a * config.d1 ** al)
        lo = config.d0 ** (al + 2) * gauss_2f1_one(b, -a * config.d0 ** al)
        out[i] = 2.0 * a / (config.area_gap * (al + 2.0)) * (hi - lo)
    return float(out[0]) if s.ndim == 0 else out.reshape(s.shape)


def tail_split(config, eps=None):
    """s0 with Q(s0) = eps, by bisection in log s."""
    eps = config.eps_tail if eps is None else eps
    hi = 1.0 / snr_mean(config)
    while q_of_s(config, hi) > eps:
        hi *= 10.0
        if hi > 1e250:
            raise QuadratureError("could not bracket the tail split point")
    lo = hi / 10.0
    while q_of_s(config, lo) <= eps:
        lo /= 10.0
        if lo < 1e-250:
            raise QuadratureError("could not bracket the tail split point")
    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if q_of_s(config, math.exp(mid)) > eps:
            a = mid
        else:
            b = mid
        if b - a < 1e-12:
            break
    else:
        raise QuadratureError("tail split bisection did not converge")
    return math.exp(0.5 * (a + b))


def avg_rate(config, spec=None):
    """Lower bound on the mean aggregate SIC rate (bits per channel use).

    The s-integral is taken in log s up to the split s0 (the integrand tends
    to k E[psi] as s -> 0, so the piece below s_min is added in closed form)
    and the remainder is approximated by -Ei(-s0).
    """
    w = poisson_weights(config).copy()
    w[0] = 0.0
    noise = config.preamble_len * config.noise_power
    if intensity(config) == 0 or w.sum() == 0:
        head = 0.0
    else:
        spec = spec or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-9)
        s0 = tail_split(config)
        ks = np.arange(len(w))
        total_w = w.sum()
        s_min = min(1e-12 / (snr_mean(config) * max(len(w) - 1, 1)), s0 * 1e-3)

        def integrand(u):
            s = np.exp(u)
            q = q_of_s(config, s)
            poly = np.polynomial.polynomial.polyval(q, w)
            return np.exp(-s) * (total_w - poly)

        head = integrate_adaptive(integrand, math.log(s_min), math.log(s0), spec)
        head += s_min * snr_mean(config) * float(np.sum(w * ks))
        head += total_w * -exp_integral_ei(-s0)
    return float(head) / math.log(2.0) - math.log1p(missed_power_mean(config) / noise) / math.log(2.0)


# ---- energy ----------------------------------------------------------------

def avg_power_dev(config):
    """Long-term mean device power: idle static draw or active circuits + PA."""
    pa = config.tx_power / config.antenna_eff
    return (1.0 - config.p_act) * config.p_static + config.p_act * (2.0 * config.p_dynamic + pa)


def ee(config):
    """Stably detected accesses per watt of total device power."""
    return intensity(config) * p_per(config) / (config.n_devices * avg_power_dev(config))


def devices_for_density(config, density):
    """Registered devices in the annulus for a density in devices per m^2."""
    return density * math.pi * config.area_gap


def apce(config, density):
    """Coverage efficiency N * P_PER with N = density * annulus area (devices/m^2)."""
    n = devices_for_density(config, density)
    return n * p_per(config.with_(n_devices=n))


@dataclass(frozen=True)
class AnalyticalReport:
    p0: float
    p_per: float
    mse_by_j: dict = field(repr=False)
    avg_nmse: float
    xi_mean: float
    avg_rate: float
    p_dev_bar: float
    ee: float
    apce: float = None


def analyze(config, density=None, with_rate=True):
    km = k_max(config)
    top = min(max(km, 1), config.preamble_len - 4)
    mse = {j: mse_j(config, j) for j in range(1, top + 1)}
    return AnalyticalReport(
        p0=p0(config),
        p_per=p_per(config),
        mse_by_j=mse,
        avg_nmse=avg_nmse(config),
        xi_mean=xi_mean(config),
        avg_rate=avg_rate(config) if with_rate else float("nan"),
        p_dev_bar=avg_power_dev(config),
        ee=ee(config),
        apce=None if density is None else apce(config, density),
    )
