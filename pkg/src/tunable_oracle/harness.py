"""Experiment harness: builds budget-matched inexactness schedules, runs the
inexact fast gradient method over seeded instances, and aggregates the
trajectories into deterministic CSV outputs.

Three experiments are supported:

1. softmax-smoothed robust objective with a synthetic tunable-noise oracle,
   fixed stepsize;
2. robust optimization over the convex hull of scenarios with a FISTA inner
   solver as the costly oracle, fixed stepsize;
3. the hull problem with an adaptive stepsize and an online schedule extended
   from a short bootstrap solve.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
from dataclasses import dataclass, fields, replace

import numpy as np

from .certificates import (
    fixed_step_certificates,
    impact_coefficients_fgm,
    next_certificate,
)
from .cost_models import LOGARITHMIC, POWER
from .fgm import FgmConfig, fgm_run, project_simplex
from .problems import (
    InnerState,
    ScenarioData,
    estimate_fstar,
    generate_scenarios,
    hull_oracle,
    hull_value,
    kappa_hat,
    noisy_oracle,
    softmax_value_grad,
    spectral_norm_sq,
)
from .schedule_solver import (
    Schedule,
    accuracy_problem,
    export_schedule,
    online_extend_accuracy,
    solve_accuracy,
)


class HarnessError(RuntimeError):
    pass


ALL_SCHEDULES = ("tunable", "constant", "poly3", "linear", "online_tunable")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: int
    d: int
    n: int
    p: float
    sigma: float = 1e-3
    upsilon: float = 1.0
    mu: float = 0.0
    alpha: float = 0.0          # gradient-noise scale, experiment 1 only
    r: float = -1.0             # cost exponent; negative = pick via kappa_hat
    delta_ref: tuple = (1e-3,)
    N: tuple = (500,)
    M: float = 100.0
    m: float = 0.0
    N_r: int = 0                # online bootstrap length, experiment 3 only
    seeds: tuple = (0, 1, 2)
    schedules: tuple = ("tunable", "constant")
    data_seed: int = 1234
    sample_every: int = 10
    sample_precision: float = 1e-8
    fstar_precision: float = 1e-10
    ref_iterations: int = 0     # 0 = 4 * max(N)
    oracle_floor: float = 1e-12  # smallest certifiable inner target
    linear_sign: int = -1       # exponent sign of the linear baseline

    def __post_init__(self):
        if self.experiment not in (1, 2, 3):
            raise HarnessError(f"unknown experiment {self.experiment}")
        if min(self.d, self.n) < 1 or self.p <= 0.0:
            raise HarnessError("need d, n >= 1 and p > 0")
        if self.experiment == 1:
            if self.alpha <= 0.0:
                raise HarnessError("experiment 1 requires a noise scale alpha > 0")
        elif self.alpha != 0.0:
            raise HarnessError("alpha is admissible for experiment 1 only")
        if self.experiment == 3:
            if self.N_r < 1:
                raise HarnessError("experiment 3 requires a bootstrap length N_r >= 1")
        elif self.N_r != 0:
            raise HarnessError("N_r is admissible for experiment 3 only")
        if not self.delta_ref or any(v <= 0.0 for v in self.delta_ref):
            raise HarnessError("delta_ref values must be > 0")
        if not self.N or any(v < 1 for v in self.N):
            raise HarnessError("N values must be >= 1")
        if not (0.0 <= self.m < 1.0 < self.M):
            raise HarnessError("bounds must satisfy 0 <= m < 1 < M")
        if not self.seeds:
            raise HarnessError("at least one seed is required")
        for name in self.schedules:
            if name not in ALL_SCHEDULES:
                raise HarnessError(f"unknown schedule family {name!r}")
            if name == "online_tunable" and self.experiment != 3:
                raise HarnessError("online_tunable runs under experiment 3 only")
            if name == "tunable" and self.experiment == 3:
                raise HarnessError("experiment 3 uses online_tunable, not tunable")
        if self.sample_every < 1 or self.sample_precision <= 0.0:
            raise HarnessError("invalid sampling settings")
        if self.oracle_floor <= 0.0 or self.fstar_precision <= 0.0:
            raise HarnessError("precisions must be > 0")
        if self.linear_sign not in (-1, 1):
            raise HarnessError("linear_sign must be -1 or +1")


def default_config(experiment: int) -> ExperimentConfig:
    """Desk-scale defaults; every field can be overridden from a config file."""
    if experiment == 1:
        return ExperimentConfig(
            experiment=1, d=30, n=100, p=10.0, upsilon=1.0, mu=0.0,
            alpha=100.0, r=1.0, delta_ref=(1e-3,), N=(500,),
            seeds=(0, 1, 2, 3, 4), schedules=("tunable", "constant"))
    if experiment == 2:
        return ExperimentConfig(
            experiment=2, d=200, n=100, p=0.2, sigma=1e-3, mu=0.1,
            r=-1.0, delta_ref=(1e-3,), N=(500,),
            seeds=(0, 1, 2), schedules=("tunable", "constant"))
    if experiment == 3:
        return ExperimentConfig(
            experiment=3, d=100, n=50, p=0.2, sigma=3e-3, mu=0.1,
            r=0.0, delta_ref=(1e-4,), N=(2000,), m=0.0, N_r=50,
            seeds=(0, 1, 2),
            schedules=("online_tunable", "constant", "poly3", "linear"))
    raise HarnessError(f"unknown experiment {experiment}")


# ---------------------------------------------------------------------------
# config file parsing (line-oriented ``key = value``)
# ---------------------------------------------------------------------------

_LIST_FIELDS = {"delta_ref": float, "N": int, "seeds": int, "schedules": str}
_INT_FIELDS = {"experiment", "d", "n", "N_r", "data_seed", "sample_every",
               "ref_iterations", "linear_sign"}


def _parse_value(key: str, raw: str):
    if key in _LIST_FIELDS:
        elem = _LIST_FIELDS[key]
        return tuple(elem(tok.strip()) for tok in raw.split(",") if tok.strip())
    if key in _INT_FIELDS:
        return int(raw)
    if key == "r" and raw.strip() == "auto":
        return -1.0
    return float(raw)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; blank lines and #-comments are skipped."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise HarnessError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise HarnessError(f"line {lineno}: unknown config key {key!r}")
        if key in out:
            raise HarnessError(f"line {lineno}: duplicate config key {key!r}")
        try:
            out[key] = _parse_value(key, raw.strip())
        except ValueError as exc:
            raise HarnessError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return out


def load_config(path: str, experiment: int | None = None,
                seeds: tuple | None = None) -> ExperimentConfig:
    with open(path) as fh:
        overrides = parse_config_text(fh.read())
    exp = experiment if experiment is not None else overrides.get("experiment")
    if exp is None:
        raise HarnessError("experiment id missing from both CLI and config")
    if "experiment" in overrides and overrides["experiment"] != exp:
        raise HarnessError("config experiment id conflicts with the requested one")
    overrides.pop("experiment", None)
    if seeds is not None:
        overrides["seeds"] = tuple(seeds)
    return replace(default_config(exp), **overrides)


# ---------------------------------------------------------------------------
# schedule construction
# ---------------------------------------------------------------------------

def match_budget(schedule_family: str, p) -> Schedule:
    """Schedule of the requested family at the modeled cost of constant δ̄."""
    if schedule_family == "constant":
        return Schedule(np.full(p.size, p.delta_ref), "accuracy")
    if schedule_family == "tunable":
        schedule, _ = solve_accuracy(p)
        return schedule
    raise HarnessError(f"no budget-matched construction for {schedule_family!r}")


def baseline_schedule(name: str, delta_ref: float, mu: float, L: float,
                      N: int, exponent_sign: int = -1) -> Schedule:
    """Literature baselines: constant, cubic decay, linear(-rate) schedule.

    The linear schedule is delta_ref * (1 - sqrt(mu/L))^(s*k); the printed
    form uses s = -1 (growing), s = +1 gives the decreasing interpretation.
    """
    k = np.arange(N, dtype=float)
    if name == "constant":
        values = np.full(N, delta_ref)
    elif name == "poly3":
        values = delta_ref * (k + 1.0) ** -3.0
    elif name == "linear":
        if mu <= 0.0:
            raise HarnessError("the linear baseline degenerates when mu = 0")
        if exponent_sign not in (-1, 1):
            raise HarnessError("exponent sign must be -1 or +1")
        base = 1.0 - math.sqrt(mu / L)
        if not (0.0 < base < 1.0):
            raise HarnessError("linear baseline requires 0 < 1 - sqrt(mu/L) < 1")
        values = delta_ref * base ** (exponent_sign * k)
    else:
        raise HarnessError(f"unknown baseline {name!r}")
    return Schedule(values, "accuracy")


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    experiment: int
    schedule: str
    seed: int
    k: int
    delta: float
    omega: float
    L: float
    A: float
    objective: float | None
    cum_work: float


@dataclass(frozen=True)
class SummaryRow:
    experiment: int
    schedule: str
    mu: float
    r: float
    N: int
    delta_ref: float
    median_gap: float
    mean_gap: float
    total_inner_work: float


@dataclass(frozen=True)
class ExperimentResult:
    records: list
    summaries: list
    schedules: dict          # label -> Schedule, for schedule.csv emission
    failures: list           # (schedule, seed, N, delta_ref, message)


# ---------------------------------------------------------------------------
# experiment execution
# ---------------------------------------------------------------------------

def _resolve_r(config: ExperimentConfig, data: ScenarioData) -> float:
    if config.r >= 0.0:
        return config.r
    # Linearly converging inner solver (kappa_hat > 0) matches the r = 0 cost
    # shape; the sublinear regime matches the square-root shape.
    return 0.0 if kappa_hat(data) > 0.0 else 0.5

def _fixed_L(config: ExperimentConfig, data: ScenarioData) -> float:
    if config.experiment == 1:
        return config.upsilon * spectral_norm_sq(data) + config.mu
    if config.experiment == 2:
        return 2.0 / config.sigma + config.mu
    return 1.0 / config.sigma + config.mu  # experiment 3 validity ceiling


def _seed_streams(config: ExperimentConfig, seed: int):
    """Per-seed RNG streams shared by every schedule family (paired runs)."""
    root = np.random.SeedSequence([config.experiment, config.data_seed, seed])
    x0_ss, noise_ss = root.spawn(2)
    return np.random.default_rng(x0_ss), np.random.default_rng(noise_ss)


def _softmax_fstar(data: ScenarioData, x_hat: np.ndarray) -> float:
    """Lower bound on the softmax optimum from the convex model at x_hat."""
    f, g = softmax_value_grad(data, x_hat)
    if data.mu > 0.0:
        x_m = project_simplex(x_hat - g / data.mu)
        diff = x_m - x_hat
        return f + float(g @ diff) + 0.5 * data.mu * float(diff @ diff)
    return f + float(np.min(g)) - float(g @ x_hat)


def _reference_fstar_exp1(config: ExperimentConfig, data: ScenarioData,
                          L: float, n_ref: int) -> float:
    """Noise-free long run, then the strongly-convex lower model."""
    def oracle(x, _delta):
        rng = np.random.default_rng(0)  # delta = 0: the stream is never used
        return noisy_oracle(data, x, 0.0, config.alpha, rng)

    # once A_k exceeds ~1e18 the bound R^2/A_k is below double resolution of
    # the objective; longer runs only risk certificate overflow
    A, k = 0.0, 0
    while k < n_ref and A < 1e18:
        A = next_certificate(A, L, config.mu)
        k += 1
    n_ref = k

    x0 = np.full(config.d, 1.0 / config.d)
    x_hat, _, _ = fgm_run(FgmConfig(mode="fixed_step", L_init=L, mu=config.mu),
                          oracle, lambda k, A: 0.0, n_ref, x0)
    return _softmax_fstar(data, x_hat)


def _tunable_values(config: ExperimentConfig, a: np.ndarray, delta_ref: float,
                    r: float) -> Schedule:
    kind = POWER if r > 0.0 else LOGARITHMIC
    problem = accuracy_problem(a, np.ones_like(a), delta_ref,
                               config.m, config.M, kind, r)
    return match_budget("tunable", problem)


def _schedule_values(config: ExperimentConfig, name: str, delta_ref: float,
                     N: int, L: float, a: np.ndarray, r: float) -> Schedule:
    if name == "tunable":
        return _tunable_values(config, a, delta_ref, r)
    sched = baseline_schedule(name, delta_ref, config.mu, L, N,
                              exponent_sign=config.linear_sign)
    if config.experiment in (2, 3):
        # The FISTA oracle cannot certify gaps near float resolution, and the
        # cost model is only defined up to M * delta_ref (log costs need
        # delta < 1); clip baseline requests into the modeled domain.
        sched = Schedule(np.clip(sched.values, config.oracle_floor,
                                 config.M * delta_ref), sched.kind)
    return sched


def _run_one(config: ExperimentConfig, data: ScenarioData, name: str,
             seed: int, N: int, delta_ref: float, L: float, r: float,
             fixed_values: Schedule | None, bootstrap: Schedule | None,
             a_boot: np.ndarray | None):
    """One (schedule, seed) run; returns (records, terminal x, total work)."""
    x0_rng, noise_rng = _seed_streams(config, seed)
    x0 = x0_rng.dirichlet(np.ones(config.d))

    if config.experiment == 1:
        def oracle(x, delta):
            return noisy_oracle(data, x, delta, config.alpha, noise_rng,
                                r=max(r, 0.0))
        mode, L_init, L_cap = "fixed_step", L, math.inf
    else:
        state = InnerState()

        def oracle(x, delta):
            return hull_oracle(data, x, max(delta, config.oracle_floor), state)
        if config.experiment == 2:
            mode, L_init, L_cap = "fixed_step", L, math.inf
        else:
            mode, L_init, L_cap = "adaptive", L, L

    if fixed_values is not None:
        values = fixed_values.values

        def schedule_cb(k, _A_next):
            return values[k]
    else:
        lo = max(config.m * delta_ref, config.oracle_floor)
        hi = config.M * delta_ref
        a_last = float(a_boot[-1])
        d_last = float(bootstrap.values[-1])

        def schedule_cb(k, A_next):
            if k < config.N_r:
                return bootstrap.values[k]
            return online_extend_accuracy((a_last, 1.0, d_last),
                                          (A_next, 1.0), r, (lo, hi))

    samples: dict[int, float] = {}

    def observer(k, x):
        if k % config.sample_every == 0:
            if config.experiment == 1:
                samples[k] = softmax_value_grad(data, x)[0]
            else:
                samples[k] = hull_value(data, x, config.sample_precision,
                                        state=state)

    fgm_cfg = FgmConfig(mode=mode, L_init=L_init, mu=config.mu, L_cap=L_cap)
    x_final, traj, _ = fgm_run(fgm_cfg, oracle, schedule_cb, N, x0,
                               observer=observer)

    records = []
    cum_work = 0.0
    for rec in traj:
        cum_work += rec.omega
        records.append(RunRecord(
            experiment=config.experiment, schedule=name, seed=seed, k=rec.k,
            delta=rec.delta, omega=rec.omega, L=rec.L, A=rec.A,
            objective=samples.get(rec.k), cum_work=cum_work))
    return records, x_final, cum_work


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    data = generate_scenarios(config.n, config.d, config.p, config.data_seed,
                              sigma=config.sigma, upsilon=config.upsilon,
                              mu=config.mu)
    r = _resolve_r(config, data)
    L = _fixed_L(config, data)

    records: list[RunRecord] = []
    summaries: list[SummaryRow] = []
    schedules: dict[str, Schedule] = {}
    failures: list[tuple] = []

    bootstrap = a_boot = None
    if config.experiment == 3:
        certs = fixed_step_certificates(config.N_r, L, config.mu)
        a_boot, _ = impact_coefficients_fgm(certs)

    for delta_ref in config.delta_ref:
        boot_for_ref = None
        if config.experiment == 3:
            boot_for_ref = _tunable_values(config, a_boot, delta_ref, r)
        for N in sorted(config.N):
            a = None
            if config.experiment in (1, 2):
                certs = fixed_step_certificates(N, L, config.mu)
                a, _ = impact_coefficients_fgm(certs)

            fstar = None
            if config.experiment == 1:
                n_ref = config.ref_iterations or 4 * max(config.N)
                fstar = _reference_fstar_exp1(config, data, L, n_ref)

            terminals: dict[tuple, tuple] = {}
            for name in config.schedules:
                fixed_values = None
                if name != "online_tunable":
                    fixed_values = _schedule_values(config, name, delta_ref,
                                                    N, L, a, r)
                    schedules[f"{name}_N{N}_dref{delta_ref:g}"] = fixed_values
                for seed in sorted(config.seeds):
                    try:
                        rows, x_final, total = _run_one(
                            config, data, name, seed, N, delta_ref, L, r,
                            fixed_values, boot_for_ref, a_boot)
                    except Exception as exc:  # a failed run must not stop the sweep
                        failures.append((name, seed, N, delta_ref, str(exc)))
                        continue
                    records.extend(rows)
                    terminals[(name, seed)] = (x_final, total)

            # terminal primal gaps against a shared lower bound on F*
            if config.experiment in (2, 3):
                values = {key: hull_value(data, x, config.fstar_precision)
                          for key, (x, _) in terminals.items()}
                if values:
                    best_key = min(values, key=values.get)
                    fstar = estimate_fstar(data, terminals[best_key][0],
                                           config.fstar_precision)

            for name in config.schedules:
                gaps, work = [], 0.0
                for seed in sorted(config.seeds):
                    entry = terminals.get((name, seed))
                    if entry is None:
                        continue
                    x_final, total = entry
                    if config.experiment == 1:
                        gap = softmax_value_grad(data, x_final)[0] - fstar
                    else:
                        gap = values[(name, seed)] - fstar
                    gaps.append(gap)
                    work += total
                median_gap = statistics.median(sorted(gaps)) if gaps else math.nan
                mean_gap = statistics.fmean(gaps) if gaps else math.nan
                summaries.append(SummaryRow(
                    experiment=config.experiment, schedule=name, mu=config.mu,
                    r=r, N=N, delta_ref=delta_ref, median_gap=median_gap,
                    mean_gap=mean_gap, total_inner_work=work))

    return ExperimentResult(records, summaries, schedules, failures)


# ---------------------------------------------------------------------------
# output emission
# ---------------------------------------------------------------------------

TRAJECTORY_HEADER = ["experiment", "schedule", "seed", "k", "delta", "omega",
                     "L", "A", "objective", "cum_work"]
SUMMARY_HEADER = ["experiment", "schedule", "mu", "r", "N", "delta_ref",
                  "median_gap", "mean_gap", "total_inner_work"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_outputs(result: ExperimentResult, out_dir: str) -> list[str]:
    """Write trajectory.csv, summary.csv and one schedule.csv per schedule."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "trajectory.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for rec in result.records:
            writer.writerow([rec.experiment, rec.schedule, rec.seed, rec.k,
                             _fmt(rec.delta), _fmt(rec.omega), _fmt(rec.L),
                             _fmt(rec.A), _fmt(rec.objective),
                             _fmt(rec.cum_work)])
    written.append(path)

    path = os.path.join(out_dir, "summary.csv")
    rows = sorted(result.summaries,
                  key=lambda s: (s.N, s.delta_ref, s.schedule))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for s in rows:
            writer.writerow([s.experiment, s.schedule, _fmt(s.mu), _fmt(s.r),
                             s.N, _fmt(s.delta_ref), _fmt(s.median_gap),
                             _fmt(s.mean_gap), _fmt(s.total_inner_work)])
    written.append(path)

    for label in sorted(result.schedules):
        path = os.path.join(out_dir, f"schedule_{label}.csv")
        export_schedule(result.schedules[label], path)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# toy instance
# ---------------------------------------------------------------------------

def toy_instance():
    """The 80-iteration log-squared showcase instance with three cost tiers."""
    a = np.arange(1, 81, dtype=float)
    b = np.empty(80)
    b[:20] = 3.0 / 420.0
    b[20:40] = 2.0 / 420.0
    b[40:] = 8.0 / 420.0
    return accuracy_problem(a, b, 1e-4, 0.0, 2.0, "log_squared")
