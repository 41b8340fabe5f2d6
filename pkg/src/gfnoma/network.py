"""Cell geometry, parameters and frame sampling for a Poisson field of devices."""
from dataclasses import dataclass, field, replace, asdict
import hashlib
import math

import numpy as np


class ConfigError(ValueError):
    pass


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class NetworkConfig:
    """All scalar parameters of one cell. SI units throughout (m, W).

    ``n_devices`` may be non-integer when it is derived from a device
    density (coverage-efficiency studies); simulation requires an integer.
    """
    n_devices: float = 240
    preamble_len: int = 120
    data_symbols: int = 8
    d0: float = 10.0
    d1: float = 150.0
    alpha: float = 4.0
    noise_power: float = 1e-14
    tx_power: float = 0.1
    p_act: float = 0.1
    c1: float = 2.0
    c2: float = 1.0
    c3: float = 1.0
    p_static: float = 3e-3
    p_dynamic: float = 0.1
    antenna_eff: float = 0.5
    m_subbands: int = 8
    eps_tail: float = 1e-6

    def __post_init__(self):
        bad = []
        if not 0 < self.d0 < self.d1:
            bad.append("need 0 < d0 < d1")
        if not self.alpha > 2:
            bad.append("alpha must exceed 2")
        if not self.n_devices > 1:
            bad.append("n_devices must exceed 1")
        if self.preamble_len < 1 or int(self.preamble_len) != self.preamble_len:
            bad.append("preamble_len must be a positive integer")
        if self.data_symbols < 1:
            bad.append("data_symbols must be >= 1")
        if not 0 <= self.p_act <= 1:
            bad.append("p_act must lie in [0, 1]")
        if self.c1 < 2 or self.c2 <= 0 or self.c3 <= 0:
            bad.append("need c1 >= 2, c2 > 0, c3 > 0")
        for name in ("tx_power", "noise_power", "p_static", "p_dynamic"):
            if not getattr(self, name) > 0:
                bad.append(f"{name} must be positive")
        if not 0 < self.antenna_eff <= 1:
            bad.append("antenna_eff must lie in (0, 1]")
        if self.m_subbands < 1 or self.preamble_len % self.m_subbands:
            bad.append("m_subbands must divide preamble_len")
        if not 0 < self.eps_tail < 1:
            bad.append("eps_tail must lie in (0, 1)")
        for k, v in asdict(self).items():
            if not math.isfinite(v):
                bad.append(f"{k} is not finite")
        if bad:
            raise ConfigError("; ".join(bad))

    def with_(self, **kw):
        return replace(self, **kw)

    @property
    def area_gap(self):
        """D1^2 - D0^2."""
        return self.d1 ** 2 - self.d0 ** 2

    def digest(self):
        text = ",".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Realization:
    """One frame: which devices are active, where they are, their fading."""
    identities: np.ndarray   # device indices in [0, N)
    distances: np.ndarray    # meters
    fading: np.ndarray       # Exp(1) power fading
    phases: np.ndarray       # channel phase in [0, 2pi)
    n_devices: int
    activity: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "identities", np.asarray(self.identities, dtype=int))
        if self.activity is None:
            a = np.zeros(self.n_devices, dtype=bool)
            a[self.identities] = True
            object.__setattr__(self, "activity", a)

    @property
    def k_active(self):
        return len(self.identities)


def intensity(config):
    """Mean number of active devices per frame."""
    return config.n_devices * config.p_act


def _check_range(config, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < config.d0) or np.any(r > config.d1):
        raise ConfigError("distance outside [d0, d1]")
    return r


def distance_cdf(config, r):
    r = _check_range(config, r)
    return (r ** 2 - config.d0 ** 2) / config.area_gap


def distance_pdf(config, r):
    r = _check_range(config, r)
    return 2.0 * r / config.area_gap


def sample_realization(config, rng):
    n = int(round(config.n_devices))
    if n != config.n_devices:
        raise ConfigError("simulation needs an integer device count")
    lam = intensity(config)
    k = rng.poisson(lam)
    while k > n:
        k = rng.poisson(lam)
    ids = np.sort(rng.choice(n, size=k, replace=False)) if k else np.zeros(0, dtype=int)
    u = rng.random(k)
    r = np.sqrt(config.d0 ** 2 + u * config.area_gap)
    xi = rng.exponential(1.0, k)
    phase = rng.uniform(0.0, 2 * np.pi, k)
    return Realization(ids, r, xi, phase, n)


def received_power(config, r, xi):
    """|q|^2 = P xi r^-alpha."""
    return config.tx_power * np.asarray(xi) * np.asarray(r, dtype=float) ** (-config.alpha)


def joint_coefficients(realization, config):
    """Length-N vector q with q_n = a_n h_n sqrt(P)."""
    q = np.zeros(realization.n_devices, dtype=complex)
    amp = np.sqrt(received_power(config, realization.distances, realization.fading))
    q[realization.identities] = amp * np.exp(1j * realization.phases)
    return q
