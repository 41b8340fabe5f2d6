"""Data-phase rates: SIC over the detected devices and the two baselines."""
from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class RateBreakdown:
    per_user: tuple          # ((device, bits per channel use), ...)
    aggregate: float
    decode_order: tuple


def _powers(active):
    """Accept {device: q} or (devices, q) and return (ids, |q|^2).

    Values are joint channel coefficients (complex or real amplitudes).
    """
    if isinstance(active, dict):
        ids = np.fromiter(active.keys(), dtype=int, count=len(active))
        vals = np.array(list(active.values()))
    else:
        ids, vals = active
        ids = np.asarray(ids, dtype=int)
        vals = np.asarray(vals)
    p = np.abs(vals) ** 2
    return ids, p


def sic_order(ids, powers):
    """Descending power, ties broken by device index."""
    return np.lexsort((ids, -powers))


def sic_rates(active, detected, noise):
    """Per-user SIC rates of the detected devices.

    ``active`` maps every active device to its complex coefficient q (or
    amplitude); ``noise`` is the total noise energy M sigma^2. Missed devices
    stay in every interference sum.
    """
    ids, p = _powers(active)
    det = np.isin(ids, np.fromiter(detected, dtype=int))
    d_ids, d_p = ids[det], p[det]
    missed = math.fsum(p[~det])
    if d_ids.size == 0:
        return RateBreakdown((), 0.0, ())
    order = sic_order(d_ids, d_p)
    d_ids, d_p = d_ids[order], d_p[order]
    # interference seen by the j-th decoded device: later detected + missed
    later = np.concatenate([np.cumsum(d_p[::-1])[::-1][1:], [0.0]])
    floor = later + missed + noise
    r = np.log1p(d_p / floor) / math.log(2.0)
    per_user = tuple(zip(d_ids.tolist(), r.tolist()))
    return RateBreakdown(per_user, math.fsum(r), tuple(d_ids.tolist()))


def aggregate_rate(active, detected, noise):
    """Telescoped form log2((sum_all + noise) / (sum_missed + noise))."""
    ids, p = _powers(active)
    det = np.isin(ids, np.fromiter(detected, dtype=int))
    return math.log1p(math.fsum(p[det]) / (math.fsum(p[~det]) + noise)) / math.log(2.0)


def subband_assignment(n_devices, m_subbands, rng):
    """Balanced random device-to-sub-band map, fixed for the network lifetime."""
    n = int(n_devices)
    return rng.permutation(np.arange(n) % m_subbands)


def ofdma_rates(active, detected, assignment, config):
    """GF-OMA: each device sends on its own sub-band of M/M_SB sub-channels.

    Two detected devices on one sub-band are both lost; missed devices on
    the band act as interference. Rates are in whole-band channel uses
    (weighted by 1/M_SB).
    """
    ids, p = _powers(active)
    msb = config.m_subbands
    noise = config.preamble_len * config.noise_power / msb
    det = np.isin(ids, np.fromiter(detected, dtype=int))
    band = np.asarray(assignment)[ids]
    per_user = []
    for i in np.flatnonzero(det)[np.argsort(-p[det], kind="stable")]:
        same = band == band[i]
        if np.count_nonzero(same & det) > 1:
            rate = 0.0
        else:
            interf = math.fsum(p[same & ~det])
            rate = math.log2(1.0 + p[i] / (interf + noise)) / msb
        per_user.append((int(ids[i]), rate))
    order = tuple(d for d, _ in per_user)
    return RateBreakdown(tuple(per_user), math.fsum(r for _, r in per_user), order)


def op_preamble_collision(k, pool_size, rng):
    """Each of k devices picks a preamble uniformly; returns (choices, collided)."""
    choices = rng.integers(0, pool_size, size=k)
    counts = np.bincount(choices, minlength=pool_size)
    return choices, counts[choices] > 1
