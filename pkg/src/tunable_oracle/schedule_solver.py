"""Exact solvers for the accuracy- and work-controlled allocation problems.

Given impact coefficients a (per-iteration weight of inexactness in the
convergence bound) and cost distortions b (per-iteration oracle cost
multipliers), the accuracy-controlled problem picks an inexactness value per
iteration inside [m*dref, M*dref] minimizing sum(a_k * delta_k) at the same
modeled cost as the constant reference schedule. Its solution is a
water-filling: iterations ranked by nu_k = b_k / a_k saturate the loose bound
first, the tight bound last, and the transient middle is pinned by a scalar
multiplier. The work-controlled variant allocates a total work budget with
the same structure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .cost_models import (
    LOGARITHMIC,
    LOG_SQUARED,
    POWER,
    CostModel,
    h_derivative,
    h_eval,
    _hprime_inverse_raw,
)

_REL_TOL = 1e-12


class SolverError(RuntimeError):
    """Numerical failure or invalid instance in a schedule solve."""


def _as_positive_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise SolverError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise SolverError(f"{name} entries must be finite and > 0")
    return arr


@dataclass(frozen=True)
class ScheduleProblem:
    """Accuracy-controlled instance: coefficients, reference level and box."""

    a: np.ndarray
    b: np.ndarray
    delta_ref: float
    m: float
    M: float
    cost_model: CostModel

    def __post_init__(self):
        a = _as_positive_vector(self.a, "a")
        b = _as_positive_vector(self.b, "b")
        if a.size != b.size:
            raise SolverError("a and b must have the same length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not (0.0 <= self.m < 1.0 < self.M):
            raise SolverError("bounds must satisfy 0 <= m < 1 < M")
        if not (self.delta_ref > 0.0 and math.isfinite(self.delta_ref)):
            raise SolverError("delta_ref must be finite and > 0")
        cm = self.cost_model
        lo, hi = self.m * self.delta_ref, self.M * self.delta_ref
        if abs(cm.lo - lo) > _REL_TOL * max(1.0, lo) or (
            math.isfinite(hi) and abs(cm.hi - hi) > _REL_TOL * hi
        ):
            raise SolverError("cost model domain must equal [m*delta_ref, M*delta_ref]")
        if cm.kind != POWER and not math.isfinite(self.M):
            raise SolverError("M = inf is supported for the power kind only")

    @property
    def size(self) -> int:
        return self.a.size


def accuracy_problem(a, b, delta_ref: float, m: float, M: float,
                     kind: str, r: float = 1.0) -> ScheduleProblem:
    """Convenience builder wiring the cost-model domain to the box bounds."""
    lo, hi = m * delta_ref, M * delta_ref
    if kind == POWER:
        model = CostModel.power(r, lo=lo, hi=hi)
    elif kind == LOGARITHMIC:
        model = CostModel.logarithmic(lo=lo, hi=hi)
    elif kind == LOG_SQUARED:
        model = CostModel.log_squared(lo=lo, hi=hi)
    else:
        raise SolverError(f"unknown cost kind {kind!r}")
    return ScheduleProblem(np.asarray(a, float), np.asarray(b, float),
                           delta_ref, m, M, model)


@dataclass(frozen=True)
class WorkProblem:
    """Work-controlled instance under the power-family cost h_r (r >= 0)."""

    a: np.ndarray
    b: np.ndarray
    omega_bar: float
    omega_M: float  # per-iteration lower work bound
    omega_m: float  # per-iteration upper work bound
    r: float

    def __post_init__(self):
        a = _as_positive_vector(self.a, "a")
        b = _as_positive_vector(self.b, "b")
        if a.size != b.size:
            raise SolverError("a and b must have the same length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not (self.omega_bar > 0.0 and math.isfinite(self.omega_bar)):
            raise SolverError("omega_bar must be finite and > 0")
        if not (0.0 <= self.omega_M < self.omega_bar / a.size < self.omega_m):
            raise SolverError("need omega_M < omega_bar/N < omega_m")
        if self.r < 0.0:
            raise SolverError("cost exponent r must be >= 0")

    @property
    def size(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class Schedule:
    values: np.ndarray
    kind: str  # "accuracy" | "work"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class KktCertificate:
    n_plus: int
    n_minus: int
    lambda_star: float
    rho: np.ndarray
    nu: np.ndarray
    degenerate: bool = False


def descending_rank(nu) -> np.ndarray:
    """rho[k] = j iff nu_k is the (j+1)-th largest entry; ties by lower index."""
    v = np.asarray(nu, dtype=float)
    if not np.all(np.isfinite(v)):
        raise SolverError("comparison vector must be finite")
    order = np.argsort(-v, kind="stable")
    rho = np.empty(v.size, dtype=int)
    rho[order] = np.arange(v.size)
    return rho


def reference_budget(p: ScheduleProblem) -> float:
    """Total modeled cost of the constant reference schedule."""
    return float(np.sum(p.b) * h_eval(p.cost_model, p.delta_ref))


def schedule_objective(a, s: Schedule) -> float:
    arr = np.asarray(a, dtype=float)
    if arr.shape != s.values.shape:
        raise SolverError("coefficient/schedule length mismatch")
    return float(arr @ s.values)


# ---------------------------------------------------------------------------
# closed forms (interior solutions, no bound saturation)
# ---------------------------------------------------------------------------

def closed_form_interior_accuracy(p: ScheduleProblem) -> Schedule | None:
    """All-interior closed form for the power cost; None when a bound binds."""
    cm = p.cost_model
    if cm.kind != POWER:
        raise SolverError("interior closed form requires the power cost kind")
    r = cm.r
    w = (p.b * p.a**r) ** (1.0 / (r + 1.0))
    scale = (np.sum(w) / np.sum(p.b)) ** (1.0 / r)
    delta = p.delta_ref * scale * (p.b / p.a) ** (1.0 / (r + 1.0))
    lo, hi = p.m * p.delta_ref, p.M * p.delta_ref
    tol = _REL_TOL * p.delta_ref
    if np.any(delta < lo - tol) or np.any(delta > hi + tol):
        return None
    return Schedule(np.clip(delta, lo, hi if math.isfinite(hi) else None), "accuracy")


def closed_form_interior_work(p: WorkProblem) -> Schedule | None:
    """All-interior closed form of the work split; None when a bound binds."""
    w = (p.b * p.a**p.r) ** (1.0 / (p.r + 1.0))
    omega = p.omega_bar * w / np.sum(w)
    tol = _REL_TOL * p.omega_bar
    if np.any(omega < p.omega_M - tol) or np.any(omega > p.omega_m + tol):
        return None
    return Schedule(np.clip(omega, p.omega_M, p.omega_m), "work")


# ---------------------------------------------------------------------------
# general water-filling solvers
# ---------------------------------------------------------------------------

def _transient_accuracy(p: ScheduleProblem, idx_T: np.ndarray,
                        budget_T: float) -> tuple[np.ndarray, float]:
    """Interior values on the transient set and the multiplier lambda_star < 0.

    For power/logarithmic kinds the multiplier has a closed form; the
    log-squared kind needs a scalar root-find (bracketing + bisection with a
    Newton polish) on the strictly monotone budget equation.
    """
    cm = p.cost_model
    aT, bT = p.a[idx_T], p.b[idx_T]
    if budget_T <= 0.0:
        raise SolverError("non-positive residual budget on the transient set")

    if cm.kind == POWER:
        r = cm.r
        w = (bT * aT**r) ** (1.0 / (r + 1.0))
        lam_hat = (budget_T / np.sum(w)) ** (-1.0 / r)
        delta = lam_hat * (bT / aT) ** (1.0 / (r + 1.0))
        lambda_star = -r * lam_hat ** (-(r + 1.0))
        return delta, lambda_star

    if cm.kind == LOGARITHMIC:
        # Solved in log domain: the raw product over (b_k/a_k)^{-b_k} overflows.
        log_ratio = np.log(bT) - np.log(aT)
        log_lam_hat = -(budget_T + np.sum(bT * log_ratio)) / np.sum(bT)
        delta = np.exp(log_lam_hat + log_ratio)
        lambda_star = -math.exp(-log_lam_hat)
        return delta, lambda_star

    # log_squared: residual(lam) = sum b_k h(delta_k(lam)) - budget_T with
    # delta_k(lam) = (h')^{-1}(-a_k lam / b_k), strictly increasing in lam > 0.
    ratio = aT / bT

    def interior(lam: float) -> np.ndarray:
        return _hprime_inverse_raw(cm, -lam * ratio)

    def residual(lam: float) -> float:
        return float(np.sum(bT * np.log(interior(lam)) ** 2)) - budget_T

    lam_lo = lam_hi = max(-h_derivative(cm, p.delta_ref), 1e-300)
    for _ in range(2000):
        if residual(lam_lo) <= 0.0:
            break
        lam_lo /= 4.0
    else:
        raise SolverError("failed to bracket the multiplier from below")
    for _ in range(2000):
        if residual(lam_hi) >= 0.0:
            break
        lam_hi *= 4.0
    else:
        raise SolverError("failed to bracket the multiplier from above")
    for _ in range(200):
        mid = math.sqrt(lam_lo * lam_hi)
        if residual(mid) > 0.0:
            lam_hi = mid
        else:
            lam_lo = mid
        if lam_hi - lam_lo <= 1e-13 * lam_hi:
            break
    lam = 0.5 * (lam_lo + lam_hi)
    # Newton polish: d residual / d lam = -sum a_k h'(delta_k)/h''(delta_k).
    for _ in range(3):
        d = interior(lam)
        hp = 2.0 * np.log(d) / d
        hpp = 2.0 * (1.0 - np.log(d)) / d**2
        grad = float(np.sum(-aT * hp / hpp))
        res = float(np.sum(bT * np.log(d) ** 2)) - budget_T
        if grad == 0.0:
            break
        step = res / grad
        if not math.isfinite(step) or abs(step) > 0.5 * lam:
            break
        lam -= step
    return interior(lam), -lam


def _unclipped_accuracy(p: ScheduleProblem, lam: float) -> np.ndarray:
    """Interior stationarity values delta_k = (h')^{-1}(-lam * a_k / b_k)."""
    return _hprime_inverse_raw(p.cost_model, -lam * p.a / p.b)


def _clipped_budget_accuracy(p: ScheduleProblem, lam: float,
                             lo: float, hi: float) -> float:
    d = _unclipped_accuracy(p, lam)
    d = np.minimum(d, hi) if math.isfinite(hi) else d
    if lo > 0.0:
        d = np.maximum(d, lo)
    return float(np.sum(p.b * h_eval(p.cost_model, d)))


def _partition_counts(p: ScheduleProblem, lam: float,
                      lo: float, hi: float) -> tuple[int, int]:
    d = _unclipped_accuracy(p, lam)
    n_plus = int(np.sum(d >= hi * (1.0 - _REL_TOL))) if math.isfinite(hi) else 0
    n_minus = int(np.sum(d <= lo * (1.0 + _REL_TOL))) if lo > 0.0 else 0
    return n_plus, n_minus


def solve_accuracy(p: ScheduleProblem) -> tuple[Schedule, KktCertificate]:
    """Water-filling solve of the accuracy-controlled problem.

    The clipped budget Sum b_k h(clip(delta_k(lam))) is strictly monotone in
    the multiplier magnitude lam, so a scalar bisection pins down the bound
    partition; the transient set is then re-solved exactly (closed form for
    the power/logarithmic kinds, a guarded root-find for log-squared).
    """
    n = p.size
    cm = p.cost_model
    nu = p.b / p.a
    rho = descending_rank(nu)
    order = np.argsort(rho)
    lo, hi = p.m * p.delta_ref, p.M * p.delta_ref
    budget = reference_budget(p)
    h_hi = h_eval(cm, hi) if math.isfinite(hi) else 0.0
    # h blows up at 0 for every supported kind, so m = 0 forbids pinning below.
    allow_minus = p.m > 0.0
    h_lo = h_eval(cm, lo) if allow_minus else math.inf

    # Bracket lam: the clipped budget grows with lam (smaller deltas cost more).
    lam0 = max(-h_derivative(cm, p.delta_ref), 1e-300)
    lam_lo = lam_hi = lam0
    for _ in range(4000):
        if _clipped_budget_accuracy(p, lam_lo, lo, hi) <= budget:
            break
        lam_lo /= 4.0
    else:
        raise SolverError("failed to bracket the multiplier from below")
    for _ in range(4000):
        if _clipped_budget_accuracy(p, lam_hi, lo, hi) >= budget:
            break
        lam_hi *= 4.0
    else:
        raise SolverError("failed to bracket the multiplier from above")
    for _ in range(200):
        mid = math.sqrt(lam_lo * lam_hi)
        if _clipped_budget_accuracy(p, mid, lo, hi) > budget:
            lam_hi = mid
        else:
            lam_lo = mid
        if lam_hi - lam_lo <= 1e-14 * lam_hi:
            break
    lam = 0.5 * (lam_lo + lam_hi)

    # Refine the partition by fixed-point iteration: exact multiplier on the
    # transient set, then recount the pinned ranks at that multiplier.
    n_plus, n_minus = _partition_counts(p, lam, lo, hi)
    seen = set()
    values = np.empty(n)
    for _ in range(n + 2):
        if (n_plus, n_minus) in seen:
            raise SolverError("partition search cycled without converging")
        seen.add((n_plus, n_minus))
        idx_plus = order[:n_plus]
        idx_minus = order[n - n_minus:]
        idx_T = order[n_plus:n - n_minus]
        if idx_T.size == 0:
            pinned = h_hi * np.sum(p.b[idx_plus]) + (
                h_lo * np.sum(p.b[idx_minus]) if n_minus else 0.0)
            if abs(pinned - budget) <= 1e-10 * budget:
                values[idx_plus] = hi
                values[idx_minus] = lo
                cert = KktCertificate(n_plus, n_minus, math.nan, rho, nu,
                                      degenerate=True)
                return Schedule(values, "accuracy"), cert
            raise SolverError("bound saturation exhausted all indices off-budget")
        budget_T = budget - h_hi * np.sum(p.b[idx_plus])
        if n_minus:
            budget_T -= h_lo * np.sum(p.b[idx_minus])
        delta_T, lambda_star = _transient_accuracy(p, idx_T, budget_T)
        top = int(np.sum(delta_T > hi * (1.0 + _REL_TOL))) if math.isfinite(hi) else 0
        bottom = int(np.sum(delta_T < lo * (1.0 - _REL_TOL))) if allow_minus else 0
        if top == 0 and bottom == 0:
            values[idx_plus] = hi
            values[idx_minus] = lo
            values[idx_T] = np.clip(delta_T, lo, hi if math.isfinite(hi) else None)
            cert = KktCertificate(n_plus, n_minus, float(lambda_star), rho, nu)
            sched = Schedule(values, "accuracy")
            _check_budget_accuracy(p, sched, budget)
            return sched, cert
        n_plus, n_minus = _partition_counts(p, -lambda_star, lo, hi)
    raise SolverError("water-filling failed to terminate")


def _check_budget_accuracy(p: ScheduleProblem, s: Schedule, budget: float):
    achieved = float(np.sum(p.b * h_eval(p.cost_model, s.values)))
    if abs(achieved - budget) > 1e-8 * budget:
        raise SolverError(
            f"budget equation violated: achieved {achieved!r} vs target {budget!r}"
        )


def solve_work(p: WorkProblem) -> tuple[Schedule, KktCertificate]:
    """Water-filling solve of the work-controlled problem."""
    n = p.size
    weights = (p.b * p.a**p.r) ** (1.0 / (p.r + 1.0))
    nu = 1.0 / (p.a**p.r * p.b)
    rho = descending_rank(nu)
    order = np.argsort(rho)
    tol = _REL_TOL * p.omega_bar

    # Sum(clip(lam * w_k)) is piecewise linear and non-decreasing in lam, so
    # bisection locates the partition; the transient set is then re-solved
    # exactly from the residual budget.
    def clipped_total(lam: float) -> float:
        return float(np.sum(np.clip(lam * weights, p.omega_M, p.omega_m)))

    lam_lo = p.omega_M / float(np.max(weights)) if p.omega_M > 0.0 else 0.0
    lam_hi = p.omega_m / float(np.min(weights))
    for _ in range(300):
        mid = 0.5 * (lam_lo + lam_hi)
        if clipped_total(mid) > p.omega_bar:
            lam_hi = mid
        else:
            lam_lo = mid
        if lam_hi - lam_lo <= 1e-15 * max(lam_hi, 1e-300):
            break
    lam = 0.5 * (lam_lo + lam_hi)

    values = np.empty(n)
    seen = set()
    n_plus = int(np.sum(lam * weights <= p.omega_M * (1.0 + _REL_TOL)))
    n_minus = int(np.sum(lam * weights >= p.omega_m * (1.0 - _REL_TOL)))
    for _ in range(n + 2):
        if (n_plus, n_minus) in seen:
            raise SolverError("partition search cycled without converging")
        seen.add((n_plus, n_minus))
        idx_plus = order[:n_plus]
        idx_minus = order[n - n_minus:]
        idx_T = order[n_plus:n - n_minus]
        residual = p.omega_bar - n_plus * p.omega_M - n_minus * p.omega_m
        if idx_T.size == 0:
            if abs(residual) <= 1e-10 * p.omega_bar:
                values[idx_plus] = p.omega_M
                values[idx_minus] = p.omega_m
                cert = KktCertificate(n_plus, n_minus, math.nan, rho, nu, degenerate=True)
                return Schedule(values, "work"), cert
            raise SolverError("bound saturation exhausted all indices off-budget")
        if residual <= 0.0:
            raise SolverError("non-positive residual work budget")
        wT = weights[idx_T]
        lam_hat = residual / float(np.sum(wT))
        omega_T = lam_hat * wT
        top = int(np.sum(omega_T < p.omega_M - tol))
        bottom = int(np.sum(omega_T > p.omega_m + tol))
        if top == 0 and bottom == 0:
            values[idx_plus] = p.omega_M
            values[idx_minus] = p.omega_m
            values[idx_T] = np.clip(omega_T, p.omega_M, p.omega_m)
            total = float(np.sum(values))
            if abs(total - p.omega_bar) > 1e-8 * p.omega_bar:
                raise SolverError("work budget equation violated")
            cert = KktCertificate(n_plus, n_minus, float(lam_hat), rho, nu)
            return Schedule(values, "work"), cert
        n_plus = int(np.sum(lam_hat * weights <= p.omega_M * (1.0 + _REL_TOL)))
        n_minus = int(np.sum(lam_hat * weights >= p.omega_m * (1.0 - _REL_TOL)))
    raise SolverError("water-filling failed to terminate")


# ---------------------------------------------------------------------------
# online extension rules
# ---------------------------------------------------------------------------

def online_extend_accuracy(known: tuple[float, float, float],
                           query: tuple[float, float],
                           r: float, bounds: tuple[float, float]) -> float:
    """Extend a solved accuracy schedule to an unseen iteration by ratio."""
    a_k, b_k, delta_k = known
    a_q, b_q = query
    factor = ((b_q * a_k) / (a_q * b_k)) ** (1.0 / (r + 1.0))
    lo, hi = bounds
    return float(min(hi, max(lo, factor * delta_k)))


def online_extend_work(known: tuple[float, float, float],
                       query: tuple[float, float],
                       r: float, bounds: tuple[float, float]) -> float:
    """Extend a solved work schedule to an unseen iteration by ratio."""
    a_k, b_k, omega_k = known
    a_q, b_q = query
    factor = ((b_q * a_q**r) / (b_k * a_k**r)) ** (1.0 / (r + 1.0))
    lo, hi = bounds
    return float(min(hi, max(lo, factor * omega_k)))


# ---------------------------------------------------------------------------
# brute-force oracle (test-side optimality witness)
# ---------------------------------------------------------------------------

def brute_force_oracle(p: ScheduleProblem, grid_points: int = 200) -> tuple[Schedule, float]:
    """Grid search over the box keeping near-on-budget points; N <= 4 only.

    A grid point is kept when its cell provably contains an exactly-on-budget
    point: the budget mismatch must be repairable by one-sided cost
    adjustments within each coordinate's cell. Every kept point is therefore
    within one cell of a feasible schedule, so the returned objective
    undershoots the true optimum by at most sum(a_k) * cell_width.
    """
    n = p.size
    if n > 4:
        raise SolverError("brute force supports N <= 4")
    if not math.isfinite(p.M):
        raise SolverError("brute force requires a finite M")
    lo, hi = p.m * p.delta_ref, p.M * p.delta_ref
    grid = np.linspace(lo, hi, grid_points)
    if p.m == 0.0:
        grid = grid[1:]  # h(0) = inf for every supported kind
    width = (hi - lo) / (grid_points - 1)
    cm = p.cost_model
    h_grid = h_eval(cm, grid)
    # One-sided cost adjustments reachable inside each point's cell, per axis:
    # moving left increases the cost, moving right decreases it.
    g_lo = np.maximum(grid - width, max(lo, 1e-300))
    g_hi = np.minimum(grid + width, hi)
    inc = h_eval(cm, g_lo) - h_grid
    dec = h_grid - h_eval(cm, g_hi)

    budget = reference_budget(p)
    shape = [1] * n
    total_cost = np.zeros([1] * n)
    total_inc = np.zeros([1] * n)
    total_dec = np.zeros([1] * n)
    total_obj = np.zeros([1] * n)
    for k in range(n):
        sh = shape.copy()
        sh[k] = grid.size
        total_cost = total_cost + (p.b[k] * h_grid).reshape(sh)
        total_inc = total_inc + (p.b[k] * inc).reshape(sh)
        total_dec = total_dec + (p.b[k] * dec).reshape(sh)
        total_obj = total_obj + (p.a[k] * grid).reshape(sh)
    gap = budget - total_cost
    feasible = (gap <= total_inc) & (-gap <= total_dec)
    if not np.any(feasible):
        raise SolverError("brute-force grid found no near-feasible point")
    obj = np.where(feasible, total_obj, math.inf)
    flat = int(np.argmin(obj))
    idx = np.unravel_index(flat, obj.shape)
    values = np.array([grid[i] for i in idx])
    return Schedule(values, "accuracy"), float(obj[idx])


def brute_force_error_bound(p: ScheduleProblem, grid_points: int = 200) -> float:
    """Objective slack of the brute-force oracle: sum(a_k) * cell width."""
    width = (p.M - p.m) * p.delta_ref / (grid_points - 1)
    return float(np.sum(p.a) * width)


# ---------------------------------------------------------------------------
# CSV import/export
# ---------------------------------------------------------------------------

def export_schedule(s: Schedule, path: str):
    header = "delta" if s.kind == "accuracy" else "omega"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", header])
        for k, v in enumerate(s.values):
            writer.writerow([k, f"{v:.17g}"])


def import_schedule(path: str) -> Schedule:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "k" or header[1] not in ("delta", "omega"):
            raise SolverError(f"unexpected schedule header {header!r}")
        kind = "accuracy" if header[1] == "delta" else "work"
        values = [float(row[1]) for row in reader]
    return Schedule(np.asarray(values), kind)


def export_coefficients(a, b, path: str):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "a", "b"])
        for k in range(a.size):
            writer.writerow([k, f"{a[k]:.17g}", f"{b[k]:.17g}"])


def import_coefficients(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["k", "a", "b"]:
            raise SolverError(f"unexpected coefficient header {header!r}")
        rows = [(float(r[1]), float(r[2])) for r in reader]
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1]
