"""Fit the sparsity constants c2, c3 to quoted perfect-detection anchors."""
from dataclasses import dataclass
import math
import warnings

import numpy as np

from .. import analysis
from ..aud import k_max

RESIDUAL_LIMIT = 0.02


class CalibrationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Calibration:
    c1: float
    c2: float
    c3: float
    residuals: tuple      # fitted P_PER minus target, per anchor
    ok: bool

    @property
    def worst(self):
        return max(abs(r) for r in self.residuals)

    def apply(self, config):
        return config.with_(c1=self.c1, c2=self.c2, c3=self.c3)


def _residuals(anchors, c1, c2, c3):
    return [analysis.p_per(cfg.with_(c1=c1, c2=c2, c3=c3)) - target for cfg, target in anchors]


def _sse(anchors, c1, c2, c3):
    return math.fsum(r * r for r in _residuals(anchors, c1, c2, c3))


def _bisect_c3(cfg, target, c1, c2, lo=1e-3, hi=1e5):
    """P_PER falls as c3 grows; solve P_PER(c3) = target in log c3."""
    f = lambda c3: analysis.p_per(cfg.with_(c1=c1, c2=c2, c3=c3)) - target
    a, b = math.log(lo), math.log(hi)
    if f(lo) < 0 or f(hi) > 0:
        raise ValueError("target not bracketed in c3")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if f(math.exp(mid)) > 0:
            a = mid
        else:
            b = mid
        if b - a < 1e-13:
            break
    return math.exp(0.5 * (a + b))


def _best_c3(anchors, c1, c2, lo=1e-2, hi=1e4, tol=1e-10):
    """Golden-section minimization of the squared error over log c3."""
    g = (math.sqrt(5) - 1) / 2
    a, b = math.log(lo), math.log(hi)
    # coarse scan first: the error surface is flat where P_PER saturates
    grid = np.linspace(a, b, 121)
    vals = [_sse(anchors, c1, c2, math.exp(x)) for x in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = _sse(anchors, c1, c2, math.exp(x1)), _sse(anchors, c1, c2, math.exp(x2))
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = _sse(anchors, c1, c2, math.exp(x1))
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = _sse(anchors, c1, c2, math.exp(x2))
    return math.exp(0.5 * (a + b))


def calibrate_constants(anchors, c1=2.0, c2=None, c2_range=(0.55, 20.0), c2_step=0.01,
                        limit=RESIDUAL_LIMIT):
    """Fit (c2, c3) to [(config, target P_PER), ...] with c1 held fixed.

    c2 enters only through the floor in K_max, so the c2 grid is grouped
    into runs with identical K_max at every anchor; c3 is fitted once per
    run and the middle of the best run is returned. With ``c2`` given and
    one anchor, c3 is solved exactly by bisection.
    """
    anchors = list(anchors)
    if not anchors:
        raise ValueError("need at least one anchor")
    if c2 is not None:
        if len(anchors) == 1:
            c3 = _bisect_c3(anchors[0][0], anchors[0][1], c1, c2)
        else:
            c3 = _best_c3(anchors, c1, c2)
        return _finish(anchors, c1, c2, c3, limit)

    grid = np.arange(c2_range[0], c2_range[1] + c2_step / 2, c2_step)
    grid = grid[grid > 1.0 / c1]
    runs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        keys = [tuple(k_max(cfg.with_(c1=c1, c2=float(v))) for cfg, _ in anchors) for v in grid]
    start = 0
    for i in range(1, len(grid) + 1):
        if i == len(grid) or keys[i] != keys[start]:
            runs.append((start, i - 1))
            start = i
    best = None
    for lo, hi in runs:
        mid = float(grid[(lo + hi) // 2])
        c3 = _best_c3(anchors, c1, mid)
        sse = _sse(anchors, c1, mid, c3)
        if best is None or sse < best[0] - 1e-15:
            best = (sse, mid, c3)
    _, c2_fit, c3_fit = best
    return _finish(anchors, c1, round(c2_fit, 6), c3_fit, limit)


def _finish(anchors, c1, c2, c3, limit):
    res = tuple(_residuals(anchors, c1, c2, c3))
    ok = max(abs(r) for r in res) <= limit
    if not ok:
        warnings.warn(f"calibration residual {max(abs(r) for r in res):.4f} exceeds {limit}",
                      CalibrationWarning)
    return Calibration(c1, c2, c3, res, ok)
