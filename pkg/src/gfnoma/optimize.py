"""One-dimensional searches for the energy-efficiency and coverage optima."""
from dataclasses import dataclass
import math

from . import analysis
from .network import dbm_to_watts

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
PPER_TARGET = 0.9
POWER_BRACKET_DBM = (0.0, 30.0)
POWER_TOL_DBM = 0.01
RADIUS_MAX_M = 600.0
RADIUS_TOL_M = 0.1


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class OptResult:
    arg_opt: float
    value_opt: float
    constrained_arg: float = None
    constrained_value: float = None
    p_per_at_opt: float = None
    p_per_at_constrained: float = None
    iterations: int = 0


def golden_section_max(f, lo, hi, x_tol, callback=None):
    """Maximize a unimodal f on [lo, hi] until the bracket is below x_tol."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    a, b = float(lo), float(hi)
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > x_tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        it += 1
        if callback is not None:
            callback(a, b)
    x = x1 if f1 >= f2 else x2
    return OptResult(arg_opt=x, value_opt=max(f1, f2), iterations=it)


def min_arg_meeting(f, target, lo, hi, x_tol, increasing=True):
    """Boundary of {x : f(x) >= target} for monotone f.

    increasing=True returns the smallest such x; otherwise the largest.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    ok_at, bad_at = (hi, lo) if increasing else (lo, hi)
    if f(ok_at) < target:
        raise InfeasibleError(f"target {target} not reached on [{lo}, {hi}]")
    if f(bad_at) >= target:
        return bad_at
    good, bad = ok_at, bad_at
    while abs(good - bad) > x_tol:
        mid = 0.5 * (good + bad)
        if f(mid) >= target:
            good = mid
        else:
            bad = mid
    return good


def _constrained(f_obj, f_pper, opt, lo, hi, x_tol, threshold, increasing):
    """Best point of a unimodal objective inside the reliability region.

    With P_PER monotone, the feasible set is an interval ending at the
    boundary point, so the constrained optimum is the boundary whenever the
    unconstrained optimum lies outside it.
    """
    try:
        edge = min_arg_meeting(f_pper, threshold, lo, hi, x_tol, increasing)
    except InfeasibleError:
        return None, None, None
    x = max(opt.arg_opt, edge) if increasing else min(opt.arg_opt, edge)
    return x, f_obj(x), f_pper(x)


def optimize_ee(config, bracket=POWER_BRACKET_DBM, x_tol=POWER_TOL_DBM, min_pper=PPER_TARGET):
    """Transmit power (dBm) maximizing energy efficiency."""
    def at(dbm):
        return config.with_(tx_power=dbm_to_watts(dbm))

    f_obj = lambda d: analysis.ee(at(d))
    f_pper = lambda d: analysis.p_per(at(d))
    opt = golden_section_max(f_obj, bracket[0], bracket[1], x_tol)
    cx, cv, cp = _constrained(f_obj, f_pper, opt, bracket[0], bracket[1], x_tol, min_pper, True)
    return OptResult(opt.arg_opt, opt.value_opt, cx, cv, f_pper(opt.arg_opt), cp, opt.iterations)


def radius_floor(config, density, min_devices=2.0):
    """Smallest outer radius giving at least ``min_devices`` registered devices."""
    return math.sqrt(config.d0 ** 2 + min_devices / (density * math.pi))


def optimize_apce(config, density, bracket=None, x_tol=RADIUS_TOL_M, min_pper=PPER_TARGET):
    """Outer radius (m) maximizing AP coverage efficiency at a fixed density (devices/m^2).

    The lower end of the bracket is raised so the annulus holds at least
    two devices; the log in the sparsity bound needs N > 1.
    """
    if bracket is None:
        bracket = (config.d0 + 1.0, RADIUS_MAX_M)
    lo = max(bracket[0], radius_floor(config, density))
    hi = bracket[1]

    def at(d1):
        c = config.with_(d1=d1)
        return c.with_(n_devices=analysis.devices_for_density(c, density))

    f_obj = lambda d1: analysis.apce(config.with_(d1=d1), density)
    f_pper = lambda d1: analysis.p_per(at(d1))
    opt = golden_section_max(f_obj, lo, hi, x_tol)
    cx, cv, cp = _constrained(f_obj, f_pper, opt, lo, hi, x_tol, min_pper, False)
    return OptResult(opt.arg_opt, opt.value_opt, cx, cv, f_pper(opt.arg_opt), cp, opt.iterations)


def per_km2(density_km2):
    return density_km2 * 1e-6
