"""Fast gradient method over the unit simplex with inexact first-order
information, in fixed-step and adaptive (line-search) variants.

The update is the method of similar triangles: the extrapolation point mixes
the primal iterate with an aggregation point, the oracle is queried at the
extrapolation point, and the aggregation point takes a projected step. The
running worst-case bound (R^2 + 2 sum A_{k+1} delta_k) / A_N is tracked from
the oracle-certified inexactness values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certificates import CertificateSequence, next_certificate


class FgmError(RuntimeError):
    pass


@dataclass(frozen=True)
class FgmConfig:
    mode: str = "fixed_step"  # "fixed_step" | "adaptive"
    L_init: float = 1.0
    mu: float = 0.0
    increase_factor: float = 1.5  # stepsize growth after a validated iteration
    decrease_factor: float = 2.0  # stepsize shrink after a failed validation
    L_cap: float = math.inf      # validity ceiling; candidates never exceed it

    def __post_init__(self):
        if self.mode not in ("fixed_step", "adaptive"):
            raise FgmError(f"unknown mode {self.mode!r}")
        if self.L_init <= 0.0 or self.mu < 0.0:
            raise FgmError("need L_init > 0 and mu >= 0")
        if self.increase_factor <= 1.0 or self.decrease_factor <= 1.0:
            raise FgmError("line-search factors must exceed 1")
        if self.L_init > self.L_cap:
            raise FgmError("L_init must not exceed L_cap")


@dataclass
class BoundTracker:
    """Accumulates the bound numerator R^2 + 2 sum A_{k+1} delta_k."""

    R2_estimate: float = 0.0
    weighted_inexactness: float = 0.0

    def add(self, A_next: float, delta: float):
        self.weighted_inexactness += A_next * delta


def bound_value(tracker: BoundTracker, A_N: float) -> float:
    if A_N <= 0.0:
        raise FgmError("bound requires A_N > 0")
    return (tracker.R2_estimate + 2.0 * tracker.weighted_inexactness) / A_N


@dataclass(frozen=True)
class IterationRecord:
    k: int
    delta: float
    omega: float
    L: float
    A: float
    bound: float
    retries: int = 0


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise FgmError("cannot project a non-finite vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0.0
    rho = int(np.nonzero(cond)[0][-1])
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def line_search_validate(f_y: float, grad_y: np.ndarray, f_x_next: float,
                         x_next: np.ndarray, y: np.ndarray,
                         L_candidate: float, delta_k: float) -> bool:
    """Quadratic-model test with the 2*delta_k inexactness slack."""
    diff = x_next - y
    model = f_y + float(grad_y @ diff) + 0.5 * L_candidate * float(diff @ diff)
    return f_x_next <= model + 2.0 * delta_k + 1e-12 * max(1.0, abs(f_y))


def fgm_run(config: FgmConfig,
            oracle: Callable[[np.ndarray, float], "object"],
            schedule: Callable[[int, float], float],
            N: int,
            x0: np.ndarray,
            r2_estimate: float = 0.0,
            max_retries: int = 200,
            observer: Callable[[int, np.ndarray], None] | None = None,
            ) -> tuple[np.ndarray, list[IterationRecord], CertificateSequence]:
    """Run N accelerated steps from the simplex point x0.

    ``oracle(point, delta_request)`` must return an object with attributes
    value, gradient, delta (certified inexactness) and inner_work.
    ``schedule(k, A_next_candidate)`` returns the inexactness to request; the
    candidate certificate lets online rules react to the accepted stepsizes.
    ``observer(k, x_new)``, when given, is called after each accepted step.
    """
    x = np.asarray(x0, dtype=float).copy()
    if abs(x.sum() - 1.0) > 1e-9 or np.any(x < -1e-12):
        raise FgmError("x0 must lie in the unit simplex")
    z = x.copy()
    mu = config.mu
    A = 0.0
    A_hist = [0.0]
    L_hist: list[float] = []
    trajectory: list[IterationRecord] = []
    tracker = BoundTracker(R2_estimate=r2_estimate)
    L_next = config.L_init

    for k in range(N):
        if config.mode == "adaptive":
            L_try = min(max(L_next / config.increase_factor, 1e-300), config.L_cap)
        else:
            L_try = config.L_init
        omega_k = 0.0
        retries = 0
        while True:
            A_next = next_certificate(A, L_try, mu)
            alpha = (A_next - A) / A_next
            y = (1.0 - alpha) * x + alpha * z
            delta_k = float(schedule(k, A_next))
            reply_y = oracle(y, delta_k)
            omega_k += reply_y.inner_work
            coef = (A_next - A) / (1.0 + mu * A_next)
            z_new = project_simplex(z - coef * (reply_y.gradient + mu * (z - y)))
            x_new = (1.0 - alpha) * x + alpha * z_new
            if config.mode == "fixed_step":
                break
            reply_x = oracle(x_new, delta_k)
            omega_k += reply_x.inner_work
            ok = line_search_validate(reply_y.value, reply_y.gradient,
                                      reply_x.value, x_new, y, L_try, delta_k)
            if ok or L_try >= config.L_cap:
                break
            retries += 1
            if retries > max_retries:
                raise FgmError(f"line search failed to validate at iteration {k}")
            L_try = min(L_try * config.decrease_factor, config.L_cap)
        if not np.all(np.isfinite(x_new)):
            raise FgmError(f"non-finite iterate at iteration {k}")
        x, z, A = x_new, z_new, A_next
        if observer is not None:
            observer(k, x)
        A_hist.append(A)
        L_hist.append(L_try)
        L_next = L_try
        tracker.add(A_next, reply_y.delta)
        trajectory.append(IterationRecord(k=k, delta=delta_k, omega=omega_k,
                                          L=L_try, A=A,
                                          bound=bound_value(tracker, A),
                                          retries=retries))
    certs = CertificateSequence(np.asarray(A_hist), np.asarray(L_hist), mu) \
        if N > 0 else CertificateSequence(np.zeros(1), np.zeros(0), mu)
    return x, trajectory, certs
