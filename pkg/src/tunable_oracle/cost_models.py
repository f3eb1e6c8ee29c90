"""Oracle cost shapes h(delta), their derivatives and inverses.

Three shapes are supported, matching the inner-solver complexities that
motivate them:

* ``power``       h(d) = d^{-r}        (r > 0), e.g. sublinear inner solvers
* ``logarithmic`` h(d) = -log(d),      linearly converging inner solvers
* ``log_squared`` h(d) = log^2(1/d),   poly-logarithmic fluctuation

All shapes are positive, strictly decreasing and convex on the interior of
their admissible interval, with h' strictly negative and strictly increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POWER = "power"
LOGARITHMIC = "logarithmic"
LOG_SQUARED = "log_squared"

_KINDS = (POWER, LOGARITHMIC, LOG_SQUARED)

# h'(1) = 0 for the log-squared shape, which breaks invertibility of h';
# the admissible interval is therefore capped strictly below 1.
_LOG_DOMAIN_CAP = 1.0 - 1e-12


class CostModelError(ValueError):
    """Invalid cost-model input (bad domain, argument outside range, ...)."""


@dataclass(frozen=True)
class CostModel:
    """A cost shape together with its admissible inexactness interval [lo, hi]."""

    kind: str
    lo: float = 0.0
    hi: float = math.inf
    r: float = 0.0  # exponent, meaningful for kind == "power" only

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise CostModelError(f"unknown cost kind {self.kind!r}")
        if not (0.0 <= self.lo < self.hi):
            raise CostModelError(f"invalid domain [{self.lo}, {self.hi}]")
        if self.kind == POWER:
            if not (self.r > 0.0 and math.isfinite(self.r)):
                raise CostModelError("power kind requires a finite exponent r > 0")
        else:
            if not self.hi <= _LOG_DOMAIN_CAP:
                raise CostModelError(
                    f"{self.kind} kind requires hi < 1 (got hi={self.hi}) so that h stays positive"
                )

    @staticmethod
    def power(r: float, lo: float = 0.0, hi: float = math.inf) -> "CostModel":
        return CostModel(POWER, lo=lo, hi=hi, r=r)

    @staticmethod
    def logarithmic(lo: float = 0.0, hi: float = _LOG_DOMAIN_CAP) -> "CostModel":
        return CostModel(LOGARITHMIC, lo=lo, hi=min(hi, _LOG_DOMAIN_CAP))

    @staticmethod
    def log_squared(lo: float = 0.0, hi: float = _LOG_DOMAIN_CAP) -> "CostModel":
        return CostModel(LOG_SQUARED, lo=lo, hi=min(hi, _LOG_DOMAIN_CAP))


def _check_delta(model: CostModel, delta, interior: bool) -> np.ndarray:
    d = np.asarray(delta, dtype=float)
    if np.any(d <= 0.0) or not np.all(np.isfinite(d)):
        raise CostModelError("delta must be finite and > 0")
    if interior:
        ok = (d > model.lo) & (d < model.hi)
    else:
        ok = (d >= model.lo) & (d <= model.hi)
    if not np.all(ok):
        raise CostModelError(f"delta outside admissible interval [{model.lo}, {model.hi}]")
    return d


def h_eval(model: CostModel, delta):
    """Cost h(delta); delta may be a scalar or an array inside [lo, hi], > 0."""
    d = _check_delta(model, delta, interior=False)
    if model.kind == POWER:
        # tiny delta with large r overflows to inf, which is the right answer
        with np.errstate(over="ignore"):
            out = d ** (-model.r)
    elif model.kind == LOGARITHMIC:
        out = -np.log(d)
    else:
        out = np.log(d) ** 2
    return out if out.ndim else float(out)


def h_derivative(model: CostModel, delta):
    """h'(delta) < 0 on the interior of the admissible interval."""
    d = _check_delta(model, delta, interior=True)
    if model.kind == POWER:
        out = -model.r * d ** (-(model.r + 1.0))
    elif model.kind == LOGARITHMIC:
        out = -1.0 / d
    else:
        out = 2.0 * np.log(d) / d
    return out if out.ndim else float(out)


def _hprime_inverse_raw(model: CostModel, slope) -> np.ndarray:
    """(h')^{-1} without domain clipping; slope must be < 0."""
    s = np.asarray(slope, dtype=float)
    omega = -s
    if model.kind == POWER:
        return (omega / model.r) ** (-1.0 / (model.r + 1.0))
    if model.kind == LOGARITHMIC:
        return 1.0 / omega
    return 2.0 * lambert_w0(omega / 2.0) / omega


def h_derivative_inverse(model: CostModel, slope):
    """Inverse of h': the delta at which the marginal cost equals ``slope``."""
    s = np.asarray(slope, dtype=float)
    if np.any(s >= 0.0) or not np.all(np.isfinite(s)):
        raise CostModelError("slope must be finite and < 0")
    d = _hprime_inverse_raw(model, s)
    if np.any(d <= model.lo) or np.any(d >= model.hi):
        raise CostModelError("slope outside the image of h' over the domain interior")
    return d if d.ndim else float(d)


def h_inverse(model: CostModel, cost):
    """Inverse of h: the delta whose cost equals ``cost``."""
    c = np.asarray(cost, dtype=float)
    if np.any(c <= 0.0) or not np.all(np.isfinite(c)):
        raise CostModelError("cost must be finite and > 0")
    if model.kind == POWER:
        d = c ** (-1.0 / model.r)
    elif model.kind == LOGARITHMIC:
        d = np.exp(-c)
    else:
        d = np.exp(-np.sqrt(c))
    if np.any(d < model.lo) or np.any(d > model.hi):
        raise CostModelError("cost outside the image of h over the domain")
    return d if d.ndim else float(d)


_INV_E = math.exp(-1.0)


def lambert_w0(x):
    """Principal branch of the Lambert W function, w*exp(w) = x for x >= -1/e.

    Halley iteration from a piecewise initial guess; relative residual
    below 1e-12 on the whole branch. Accepts scalars and arrays.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < -_INV_E - 1e-15) or not np.all(np.isfinite(xs)):
        raise CostModelError("lambert_w0 requires finite x >= -1/e")
    xv = np.atleast_1d(xs).astype(float)

    w = np.empty_like(xv)
    near_branch = xv < -0.25
    large = xv > math.e
    mid = ~(near_branch | large)
    # Series around the branch point x = -1/e.
    p = np.sqrt(2.0 * np.clip(math.e * xv[near_branch] + 1.0, 0.0, None))
    w[near_branch] = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    # Asymptotic guess for large arguments.
    lx = np.log(xv[large])
    w[large] = lx - np.log(lx)
    # Pade-free rational guess is plenty in the middle.
    w[mid] = xv[mid] / (1.0 + xv[mid] * np.exp(-np.clip(xv[mid], -1.0, 3.0)))

    for _ in range(50):
        ew = np.exp(w)
        f = w * ew - xv
        if np.all(np.abs(f) <= 1e-14 * np.maximum(1.0, np.abs(xv))):
            break
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * np.where(wp1 != 0.0, wp1, 1.0))
        step = np.where(denom != 0.0, f / np.where(denom != 0.0, denom, 1.0), 0.0)
        w = w - step
    w = np.maximum(w, -1.0)
    return w.reshape(xs.shape) if xs.ndim else float(w[0])
