"""Preamble matrices and baseband signal synthesis."""
from dataclasses import dataclass

import numpy as np

from .network import joint_coefficients


@dataclass(frozen=True)
class PreambleMatrix:
    entries: np.ndarray
    kind: str = "gaussian"

    def __post_init__(self):
        norms = np.sum(np.abs(self.entries) ** 2, axis=0)
        if not np.allclose(norms, 1.0, rtol=0, atol=1e-12):
            raise ValueError("preamble columns must have unit norm")
        if self.kind not in ("gaussian", "zadoff_chu"):
            raise ValueError(f"unknown preamble kind {self.kind!r}")

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class RxFrame:
    y0: np.ndarray
    y_data: np.ndarray      # M x L
    truth: object
    tx_symbols: np.ndarray  # K x L, rows follow truth.identities
    q: np.ndarray


def as_matrix(phi):
    return phi.entries if isinstance(phi, PreambleMatrix) else np.asarray(phi)


def complex_gaussian(shape, rng, var=1.0):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(var / 2)


def gen_gaussian_preambles(m, n, rng):
    if m < 1 or n < 1:
        raise ValueError("need m, n >= 1")
    a = complex_gaussian((m, n), rng)
    a /= np.linalg.norm(a, axis=0)
    return PreambleMatrix(a, "gaussian")


def is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def largest_prime_at_most(n):
    p = int(n)
    while p >= 2 and not is_prime(p):
        p -= 1
    if p < 2:
        raise ValueError(f"no prime <= {n}")
    return p


def gen_zadoff_chu(m, n_seq, root=1):
    """n_seq cyclic shifts of a length-m root Zadoff-Chu sequence.

    m must be prime so that every nonzero cyclic shift is orthogonal.
    """
    if not is_prime(m):
        raise ValueError(f"Zadoff-Chu length {m} is not prime")
    if not 1 <= n_seq <= m:
        raise ValueError("need 1 <= n_seq <= m")
    if root % m == 0:
        raise ValueError("root must be coprime with m")
    k = np.arange(m)
    if m % 2:
        base = np.exp(-1j * np.pi * root * k * (k + 1) / m)
    else:
        base = np.exp(-1j * np.pi * root * k * k / m)
    cols = np.stack([np.roll(base, s) for s in range(n_seq)], axis=1) / np.sqrt(m)
    return PreambleMatrix(cols, "zadoff_chu")


def zc_pool(m):
    """Orthogonal pool for an m-subchannel preamble: all shifts of the
    largest prime length <= m, zero-padded to m rows."""
    p = largest_prime_at_most(m)
    zc = gen_zadoff_chu(p, p).entries
    pad = np.zeros((m, p), dtype=complex)
    pad[:p] = zc
    return PreambleMatrix(pad, "zadoff_chu")


def qpsk_symbols(k, l, rng):
    bits = rng.integers(0, 4, size=(k, l))
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * bits))


def qpsk_slice(z):
    return (np.sign(z.real) + 1j * np.sign(z.imag)) / np.sqrt(2)


def synth_preamble_rx(realization, phi, config, rng):
    """y0 = Phi q + w0, returns (y0, q)."""
    a = as_matrix(phi)
    q = joint_coefficients(realization, config)
    ids = realization.identities
    y0 = a[:, ids] @ q[ids] + complex_gaussian(a.shape[0], rng, config.noise_power)
    return y0, q


def synth_data_rx(realization, phi, symbols, config, rng):
    """Columns y_l = sum_n q_n s_{n,l} phi_n + w_l, shape M x L."""
    a = as_matrix(phi)
    q = joint_coefficients(realization, config)
    ids = realization.identities
    symbols = np.asarray(symbols)
    if symbols.ndim == 1:
        symbols = symbols[:, None]
    m, l = a.shape[0], symbols.shape[1]
    clean = a[:, ids] @ (q[ids, None] * symbols)
    return clean + complex_gaussian((m, l), rng, config.noise_power)


def synth_frame(realization, phi, config, rng):
    y0, q = synth_preamble_rx(realization, phi, config, rng)
    s = qpsk_symbols(realization.k_active, config.data_symbols, rng)
    yd = synth_data_rx(realization, phi, s, config, rng)
    return RxFrame(y0, yd, realization, s, q)
