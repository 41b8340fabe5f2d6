"""Active-user detection and LS channel estimation on the preamble phase."""
from dataclasses import dataclass, field, replace
import enum
import math
import warnings

import numpy as np
from scipy.linalg import solve_triangular

from .phy import as_matrix

DELTA_STOP = 0.1


class Event(enum.IntEnum):
    PERFECT = 1   # detected set equals the active set
    MISSED = 2    # strict subset of the active set, no false alarm
    MIXED = 3     # at least one false alarm


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class AudOutcome:
    detected: tuple
    q_hat: np.ndarray
    event: Event = None
    missed: frozenset = frozenset()
    false_alarms: frozenset = frozenset()
    converged: bool = True
    iterations: int = 0

    def against(self, truth):
        """Attach the event label for a known active set."""
        truth = frozenset(int(t) for t in truth)
        det = frozenset(self.detected)
        return replace(self, event=classify_event(truth, det),
                       missed=truth - det, false_alarms=det - truth)


def _empty(iterations=0, converged=True):
    return AudOutcome((), np.zeros(0, dtype=complex), converged=converged,
                      iterations=iterations)


def _kmax_real(config):
    return config.preamble_len / (2.0 * math.log(config.n_devices)) * (config.c2 - 1.0 / config.c1)


def k_max(config):
    """Largest sparsity the LASSO receiver supports."""
    if config.c2 <= 1.0 / config.c1:
        warnings.warn("c2 <= 1/c1 gives zero supported sparsity", RuntimeWarning)
        return 0
    return max(0, math.floor(_kmax_real(config)))


def reg_param(config):
    """LASSO regularization gamma = sqrt(2 c1 sigma^2 ln N / M)."""
    return math.sqrt(2.0 * config.c1 * config.noise_power
                     * math.log(config.n_devices) / config.preamble_len)


def amp_threshold(config):
    """Minimum detectable amplitude c3 * gamma."""
    return config.c3 * reg_param(config)


def _finish(y0, a, support, threshold, iterations, converged=True):
    support = sorted(support)
    while support:
        coef = ls_estimate(y0, a, support)
        keep = np.abs(coef) >= threshold
        if keep.all():
            return AudOutcome(tuple(support), coef, converged=converged, iterations=iterations)
        support = [s for s, k in zip(support, keep) if k]
    return _empty(iterations, converged)


def ta_omp(y0, phi, threshold, noise_power=0.0, delta_stop=DELTA_STOP):
    """Orthogonal matching pursuit with amplitude-threshold termination.

    Stops when the newest least-squares coefficient drops below
    ``threshold``, when the residual energy reaches M sigma^2 (1 + delta_stop),
    or when the support fills all M rows. The returned support keeps only
    coefficients at or above the threshold.
    """
    a = as_matrix(phi)
    m, n = a.shape
    y0 = np.asarray(y0, dtype=complex)
    stop_energy = m * noise_power * (1.0 + delta_stop)
    r = y0.copy()
    if np.vdot(r, r).real <= 0:
        return _empty()
    basis = np.zeros((m, min(m, n)), dtype=complex)
    tri = np.zeros((min(m, n), min(m, n)), dtype=complex)
    proj = np.zeros(min(m, n), dtype=complex)
    support = []
    taken = np.zeros(n, dtype=bool)
    scale = np.linalg.norm(y0)
    for it in range(min(m, n)):
        corr = np.abs(a.conj().T @ r)
        corr[taken] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 1e-14 * scale:
            break
        v = a[:, j].copy()
        k = len(support)
        h = basis[:, :k].conj().T @ v
        v -= basis[:, :k] @ h
        h2 = basis[:, :k].conj().T @ v
        v -= basis[:, :k] @ h2
        h += h2
        nv = np.linalg.norm(v)
        if nv < 1e-10:
            break
        basis[:, k] = v / nv
        tri[:k, k] = h
        tri[k, k] = nv
        proj[k] = np.vdot(basis[:, k], y0)
        support.append(j)
        taken[j] = True
        coef = solve_triangular(tri[:k + 1, :k + 1], proj[:k + 1])
        if abs(coef[-1]) < threshold:
            break
        r = r - basis[:, k] * proj[k]
        if np.vdot(r, r).real <= stop_energy:
            break
    return _finish(y0, a, support, threshold, len(support))


def _ls(y0, a, idx):
    coef, *_ = np.linalg.lstsq(a[:, idx], y0, rcond=None)
    return coef, y0 - a[:, idx] @ coef


def _top(values, k):
    if k >= len(values):
        return np.arange(len(values))
    return np.argpartition(-values, k - 1)[:k]


def _sp_level(y0, a, k, start, max_iter):
    """Subspace pursuit at fixed sparsity k, warm-started from ``start``."""
    if len(start) >= k:
        t = np.array(sorted(start)[:k])
    else:
        r0 = _ls(y0, a, np.array(sorted(start)))[1] if start else y0
        c = np.abs(a.conj().T @ r0)
        c[list(start)] = -1.0
        extra = _top(c, k - len(start))
        t = np.array(sorted(set(start) | set(extra.tolist())))
    coef, r = _ls(y0, a, t)
    rn = np.vdot(r, r).real
    for _ in range(max_iter):
        c = np.abs(a.conj().T @ r)
        cand = np.union1d(t, _top(c, k))
        big, _ = _ls(y0, a, cand)
        t_new = np.sort(cand[_top(np.abs(big), k)])
        coef_new, r_new = _ls(y0, a, t_new)
        rn_new = np.vdot(r_new, r_new).real
        if rn_new >= rn * (1 - 1e-12):
            break
        t, coef, r, rn = t_new, coef_new, r_new, rn_new
    return t, coef, rn


def ta_sp(y0, phi, threshold, k_cap, noise_power=0.0, delta_stop=DELTA_STOP, max_iter=20):
    """Subspace pursuit swept over sparsity levels 1..k_cap.

    Accepts the first level whose coefficients all reach ``threshold`` with
    residual energy at most M sigma^2 (1 + delta_stop). A level that keeps a
    sub-threshold coefficient means the detectable devices are exhausted, so
    the sweep also ends there. The final support is thresholded.
    """
    a = as_matrix(phi)
    m, n = a.shape
    y0 = np.asarray(y0, dtype=complex)
    if np.vdot(y0, y0).real <= 0 or k_cap < 1:
        return _empty()
    stop_energy = m * noise_power * (1.0 + delta_stop)
    support = []
    level = 0
    for level in range(1, min(k_cap, m, n) + 1):
        t, coef, rn = _sp_level(y0, a, level, support, max_iter)
        support = t.tolist()
        small = np.abs(coef) < threshold
        if small.any() or rn <= stop_energy:
            break
    return _finish(y0, a, support, threshold, level)


def lasso_objective(y0, phi, q, gamma):
    a = as_matrix(phi)
    r = y0 - a @ q
    return np.vdot(r, r).real / (2 * a.shape[0]) + gamma * np.abs(q).sum()


def soft_threshold(z, t):
    mag = np.abs(z)
    return z * np.maximum(0.0, 1.0 - t / np.maximum(mag, 1e-300))


def lasso_ista(y0, phi, gamma, max_iter=1000, tol=1e-8, threshold=0.0, history=None):
    """Proximal gradient for (1/2M)||y0 - Phi q||^2 + gamma ||q||_1.

    Support is {n : |q_n| > threshold}. Pass a list as ``history`` to
    collect the objective after every iteration.
    """
    a = as_matrix(phi)
    m, n = a.shape
    y0 = np.asarray(y0, dtype=complex)
    step = m / np.linalg.norm(a, 2) ** 2
    q = np.zeros(n, dtype=complex)
    ah = a.conj().T
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = ah @ (a @ q - y0) / m
        q_new = soft_threshold(q - step * grad, step * gamma)
        change = np.linalg.norm(q_new - q)
        q = q_new
        if history is not None:
            history.append(lasso_objective(y0, a, q, gamma))
        if change <= tol * max(np.linalg.norm(q), 1e-300):
            converged = True
            break
    idx = np.flatnonzero(np.abs(q) > threshold)
    return AudOutcome(tuple(idx.tolist()), q[idx], converged=converged, iterations=it)


def ls_estimate(y0, phi, support):
    """Least-squares coefficients of y0 on the columns in ``support``."""
    a = as_matrix(phi)
    idx = np.asarray(list(support), dtype=int)
    if idx.size == 0:
        return np.zeros(0, dtype=complex)
    if idx.size > a.shape[0]:
        raise RankDeficientError("support larger than the number of rows")
    sub = a[:, idx]
    coef, _, rank, _ = np.linalg.lstsq(sub, y0, rcond=None)
    if rank < idx.size:
        raise RankDeficientError("selected columns are linearly dependent")
    return coef


def classify_event(truth, detected):
    truth = frozenset(truth)
    detected = frozenset(detected)
    if detected == truth:
        return Event.PERFECT
    if detected < truth:
        return Event.MISSED
    return Event.MIXED


def empirical_nmse(q_true, q_hat):
    q_true = np.asarray(q_true)
    q_hat = np.asarray(q_hat)
    j = q_true.size
    if j == 0:
        raise ValueError("empty detected set")
    den = np.vdot(q_true, q_true).real * j
    return float(np.vdot(q_true - q_hat, q_true - q_hat).real / den)
