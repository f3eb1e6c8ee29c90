"""Test problems and oracles: the softmax-smoothed robust objective with
synthetic gradient noise, and robust optimization over the convex hull of
scenarios where a FISTA inner solver makes oracle inexactness genuinely
costly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fgm import project_simplex


class OracleError(RuntimeError):
    pass


class InnerSolverExhausted(OracleError):
    def __init__(self, achieved_gap: float, target: float, work: int):
        super().__init__(
            f"inner solver exhausted: gap {achieved_gap:.3e} vs target {target:.3e} after {work} steps"
        )
        self.achieved_gap = achieved_gap
        self.target = target
        self.work = work


@dataclass
class ScenarioData:
    """Scenario matrix O (rows theta_i) plus the problem constants."""

    O: np.ndarray
    theta_bar: np.ndarray
    sigma: float
    upsilon: float
    mu: float
    p: float
    lam_max: float = field(init=False)
    lam_min: float = field(init=False)  # smallest eigenvalue of O O^T

    def __post_init__(self):
        self.O = np.asarray(self.O, dtype=float)
        self.theta_bar = np.asarray(self.theta_bar, dtype=float)
        n, d = self.O.shape
        if self.theta_bar.shape != (d,):
            raise OracleError("anchor dimension mismatch")
        if np.max(np.abs(self.O.mean(axis=0) - self.theta_bar)) > 1e-12 * max(1.0, np.abs(self.O).max()):
            raise OracleError("anchor must equal the scenario row mean")
        if min(self.sigma, self.upsilon, self.p) <= 0.0 or self.mu < 0.0:
            raise OracleError("need sigma, upsilon, p > 0 and mu >= 0")
        gram = self.O @ self.O.T if n <= d else self.O.T @ self.O
        eigs = np.linalg.eigvalsh(gram)
        self.lam_max = float(eigs[-1])
        self.lam_min = float(eigs[0]) if n <= d else 0.0

    @property
    def n(self) -> int:
        return self.O.shape[0]

    @property
    def d(self) -> int:
        return self.O.shape[1]


def generate_scenarios(n: int, d: int, p: float, seed: int,
                       sigma: float = 1e-3, upsilon: float = 1.0,
                       mu: float = 0.0) -> ScenarioData:
    """n Gaussian scenarios with per-coordinate variance 1/p, seeded."""
    if n < 1 or d < 1 or p <= 0.0:
        raise OracleError("need n, d >= 1 and p > 0")
    rng = np.random.default_rng(seed)
    O = rng.standard_normal((n, d)) / math.sqrt(p)
    return ScenarioData(O=O, theta_bar=O.mean(axis=0), sigma=sigma,
                        upsilon=upsilon, mu=mu, p=p)


def kappa_hat(data: ScenarioData) -> float:
    """Eigenvalue ratio of the scenario Gram matrix, 0 when rank deficient."""
    if data.lam_min < 1e-10 * data.lam_max:
        return 0.0
    return data.lam_min / data.lam_max


def spectral_norm_sq(data: ScenarioData) -> float:
    """||O||^2 = largest eigenvalue of O O^T."""
    return data.lam_max


@dataclass(frozen=True)
class OracleReply:
    value: float
    gradient: np.ndarray
    delta: float
    inner_work: float

    def __post_init__(self):
        if self.delta < 0.0 or self.inner_work < 0.0:
            raise OracleError("delta and inner_work must be >= 0")


# ---------------------------------------------------------------------------
# softmax objective with synthetic noise
# ---------------------------------------------------------------------------

def softmax_value_grad(data: ScenarioData, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Smoothed robust objective and its gradient, overflow safe."""
    s = data.upsilon * (data.O @ x)
    mx = float(np.max(s))
    e = np.exp(s - mx)
    denom = float(np.sum(e))
    value = (mx + math.log(denom / data.n)) / data.upsilon \
        + 0.5 * data.mu * float(x @ x)
    weights = e / denom
    grad = data.O.T @ weights + data.mu * x
    return value, grad


def noisy_oracle(data: ScenarioData, x: np.ndarray, delta: float, alpha: float,
                 rng: np.random.Generator, r: float = 1.0) -> OracleReply:
    """Exact value, gradient corrupted on a sphere of radius alpha*delta.

    The certified inexactness of the resulting information tuple is
    4*alpha*delta; the simulated work charged is the power/logarithmic cost
    of the requested delta (zero for an exact request).
    """
    if delta < 0.0 or alpha <= 0.0:
        raise OracleError("need delta >= 0 and alpha > 0")
    value, grad = softmax_value_grad(data, x)
    if delta > 0.0:
        u = rng.standard_normal(x.size)
        u /= np.linalg.norm(u)
        grad = grad + alpha * delta * u
        work = delta ** (-r) if r > 0.0 else -math.log(delta)
    else:
        work = 0.0
    return OracleReply(value=value, gradient=grad, delta=4.0 * alpha * delta,
                       inner_work=work)


# ---------------------------------------------------------------------------
# convex-hull inner problem and its FISTA solver
# ---------------------------------------------------------------------------

def inner_q_value_grad(data: ScenarioData, w: np.ndarray,
                       x: np.ndarray) -> tuple[float, np.ndarray]:
    """Concave inner objective q(w; x) and its gradient in w."""
    Otw = data.O.T @ w
    resid = Otw - data.theta_bar
    value = float(Otw @ x) - 0.5 * data.sigma * float(resid @ resid)
    grad = data.O @ (x - data.sigma * resid)
    return value, grad


def _linearization_bound(data: ScenarioData, w: np.ndarray, x: np.ndarray) -> float:
    """Upper bound on max q over the simplex from the linearization at w."""
    value, grad = inner_q_value_grad(data, w, x)
    return value + float(np.max(grad)) - float(grad @ w)


@dataclass
class InnerState:
    """Warm-start snapshot for the inner solver (owned by one outer run)."""

    w: np.ndarray | None = None


@dataclass(frozen=True)
class InnerResult:
    w: np.ndarray
    gap: float
    gap_history: list[float]
    work: int
    converged: bool


def fista_inner(data: ScenarioData, x: np.ndarray, delta_target: float,
                warm_start: InnerState | None = None,
                max_inner: int = 10**6) -> InnerResult:
    """Maximize q(.; x) over the simplex until the certified gap <= target.

    The momentum uses the strongly-concave constant when the scenario Gram
    matrix is well conditioned, the standard accelerating sequence otherwise.
    The certified gap is the tightest linearization upper bound collected so
    far minus the current value; reaching it guarantees the inner criterion.
    """
    if delta_target <= 0.0:
        raise OracleError("delta_target must be > 0")
    n = data.n
    w = warm_start.w.copy() if warm_start is not None and warm_start.w is not None \
        else np.full(n, 1.0 / n)
    L_w = data.sigma * data.lam_max
    if L_w <= 0.0:
        raise OracleError("degenerate inner problem: sigma * lam_max == 0")
    step = 1.0 / L_w
    kap = kappa_hat(data)
    beta_const = (1.0 - math.sqrt(kap)) / (1.0 + math.sqrt(kap)) if kap > 0.0 else None

    upper = _linearization_bound(data, w, x)
    q_w, _ = inner_q_value_grad(data, w, x)
    gap = upper - q_w
    gap_history = [gap]
    if gap <= delta_target:
        return InnerResult(w=w, gap=gap, gap_history=gap_history, work=0, converged=True)

    v = w.copy()
    w_prev = w.copy()
    t = 1.0
    for it in range(1, max_inner + 1):
        q_v, grad_v = inner_q_value_grad(data, v, x)
        # linearizations are global upper bounds by concavity, even off-simplex
        upper = min(upper, q_v + float(np.max(grad_v)) - float(grad_v @ v))
        w = project_simplex(v + step * grad_v)
        if beta_const is not None:
            beta = beta_const
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            t = t_new
        v = w + beta * (w - w_prev)
        w_prev = w
        q_w, grad_w = inner_q_value_grad(data, w, x)
        upper = min(upper, q_w + float(np.max(grad_w)) - float(grad_w @ w))
        gap = upper - q_w
        gap_history.append(gap)
        if gap <= delta_target:
            return InnerResult(w=w, gap=gap, gap_history=gap_history,
                               work=it, converged=True)
    return InnerResult(w=w, gap=gap, gap_history=gap_history,
                       work=max_inner, converged=False)


def fw_gap(data: ScenarioData, x: np.ndarray, history: list[np.ndarray],
           current: np.ndarray) -> float:
    """Certified suboptimality bound of ``current`` from linearizations.

    Each history point yields an upper bound on the inner optimum (the
    linear maximization over the simplex is the largest gradient coordinate);
    the tightest one minus the current value bounds the suboptimality.
    """
    if not history:
        raise OracleError("history must be nonempty")
    upper = min(_linearization_bound(data, w, x) for w in history)
    q_cur, _ = inner_q_value_grad(data, current, x)
    return upper - q_cur


def hull_oracle(data: ScenarioData, x: np.ndarray, delta: float,
                state: InnerState, max_inner: int = 10**6) -> OracleReply:
    """Inexact value/gradient of the hull objective via the inner solver."""
    if delta <= 0.0:
        raise OracleError("delta must be > 0")
    result = fista_inner(data, x, delta, warm_start=state, max_inner=max_inner)
    if not result.converged:
        raise InnerSolverExhausted(result.gap, delta, result.work)
    state.w = result.w
    q_val, _ = inner_q_value_grad(data, result.w, x)
    value = 0.5 * data.mu * float(x @ x) + q_val
    grad = data.mu * x + data.O.T @ result.w
    return OracleReply(value=value, gradient=grad, delta=delta,
                       inner_work=result.work)


def hull_value(data: ScenarioData, x: np.ndarray, precision: float = 1e-10,
               state: InnerState | None = None) -> float:
    """High-precision objective value, for gap reporting only."""
    result = fista_inner(data, x, precision, warm_start=state)
    q_val, _ = inner_q_value_grad(data, result.w, x)
    return 0.5 * data.mu * float(x @ x) + q_val


def estimate_fstar(data: ScenarioData, x_hat: np.ndarray,
                   precision: float = 1e-10) -> float:
    """Lower bound on the hull optimum from the strongly-convex model at x_hat."""
    reply = hull_oracle(data, x_hat, precision, InnerState())
    g = reply.gradient
    if data.mu > 0.0:
        x_m = project_simplex(x_hat - g / data.mu)
        diff = x_m - x_hat
        return reply.value + float(g @ diff) + 0.5 * data.mu * float(diff @ diff)
    return reply.value + float(np.min(g)) - float(g @ x_hat)
