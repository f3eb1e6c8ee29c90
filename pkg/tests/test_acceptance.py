"""Acceptance suite: one test per gate, each printing a PASS/FAIL line."""

import math
import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from tunable_oracle.certificates import (
    fixed_step_certificates,
    impact_coefficients_fgm,
)
from tunable_oracle.cost_models import h_derivative, h_eval
from tunable_oracle.fgm import FgmConfig, fgm_run
from tunable_oracle.harness import (
    default_config,
    run_experiment,
    toy_instance,
)
from tunable_oracle.problems import InnerState, generate_scenarios, hull_oracle
from tunable_oracle.schedule_solver import (
    WorkProblem,
    accuracy_problem,
    brute_force_oracle,
    closed_form_interior_accuracy,
    closed_form_interior_work,
    reference_budget,
    schedule_objective,
    solve_accuracy,
    solve_work,
)


def _report(number: int, name: str, ok: bool, detail: str = ""):
    verdict = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {number} {name}: {verdict}"
    if detail and not ok:
        line += f" ({detail})"
    print(line, flush=True)
    assert ok, line


def _random_accuracy_problem(rng, kind, n, r=1.0):
    a = np.exp(rng.uniform(-2.0, 2.0, n))
    b = np.exp(rng.uniform(-2.0, 2.0, n))
    delta_ref = 10.0 ** rng.uniform(-5.0, -1.5)
    m = rng.choice([0.0, rng.uniform(0.05, 0.8)])
    M = rng.uniform(1.2, 50.0)
    if kind != "power":
        M = min(M, 0.9 / delta_ref)
    return accuracy_problem(a, b, delta_ref, m, M, kind, r)


class TestCriterion1Toy:
    def test_toy_reproduction(self):
        t0 = time.time()
        p = toy_instance()
        schedule, cert = solve_accuracy(p)
        d = schedule.values

        ok = cert.n_plus == 10 and cert.n_minus == 0
        plus = np.nonzero(cert.rho < cert.n_plus)[0]
        ok &= np.array_equal(plus, np.arange(10))
        ok &= bool(np.all(d[:10] == 2e-4))

        budget = reference_budget(p)
        cost = float(np.sum(p.b * h_eval(p.cost_model, d)))
        ok &= abs(cost - budget) <= 1e-8 * budget

        lam_tilde = -1.0 / cert.lambda_star  # stationarity multiplier
        transient = d[10:]
        stat = p.a[10:] + lam_tilde * p.b[10:] * h_derivative(p.cost_model,
                                                              transient)
        ok &= float(np.max(np.abs(stat) / p.a[10:])) <= 1e-8

        # Figure 1 shape: sorted by descending rank the schedule is
        # non-increasing, and the raw sequence jumps at the tier boundaries
        order = np.argsort(cert.rho)
        ok &= bool(np.all(np.diff(d[order]) <= 1e-18))
        ok &= d[20] < d[19] and d[40] > d[39]

        # the stationarity multiplier is positive and covariant in a (the
        # printed value is fixed only up to this rescaling convention)
        ok &= lam_tilde > 0.0
        p2 = accuracy_problem(2.0 * p.a, p.b, p.delta_ref, p.m, p.M,
                              "log_squared")
        _, cert2 = solve_accuracy(p2)
        ok &= (-1.0 / cert2.lambda_star) == pytest.approx(2.0 * lam_tilde,
                                                          rel=1e-8)
        ok &= time.time() - t0 < 1.0
        _report(1, "toy reproduction", bool(ok))


class TestCriterion2ClosedForm:
    def test_closed_form_agreement(self):
        t0 = time.time()
        rng = np.random.default_rng(20)
        hits_acc = hits_work = 0
        ok = True
        while hits_acc < 200 or hits_work < 200:
            r = float(rng.choice([1.0 / 3.0, 0.5, 1.0, 3.0]))
            n = int(rng.integers(2, 30))
            if hits_acc < 200:
                a = np.exp(rng.uniform(-1.0, 1.0, n))
                b = np.exp(rng.uniform(-1.0, 1.0, n))
                p = accuracy_problem(a, b, 10.0 ** rng.uniform(-4, -2),
                                     0.0, math.inf, "power", r)
                closed = closed_form_interior_accuracy(p)
                if closed is not None:
                    solved, _ = solve_accuracy(p)
                    ok &= bool(np.allclose(solved.values, closed.values,
                                           rtol=1e-10, atol=0.0))
                    hits_acc += 1
            if hits_work < 200:
                a = np.exp(rng.uniform(-1.0, 1.0, n))
                b = np.exp(rng.uniform(-1.0, 1.0, n))
                wp = WorkProblem(a, b, omega_bar=float(rng.uniform(1.0, 50.0)),
                                 omega_M=1e-12, omega_m=1e12, r=r)
                closed = closed_form_interior_work(wp)
                if closed is not None:
                    solved, _ = solve_work(wp)
                    ok &= bool(np.allclose(solved.values, closed.values,
                                           rtol=1e-10, atol=0.0))
                    hits_work += 1
        ok &= time.time() - t0 < 10.0
        _report(2, "closed-form/KKT agreement", bool(ok))


class TestCriterion3BruteForce:
    def test_brute_force_optimality(self):
        t0 = time.time()
        rng = np.random.default_rng(30)
        ok = True
        for i in range(50):
            n = 2 if i % 2 == 0 else 3
            kind = ("power", "logarithmic", "log_squared")[i % 3]
            r = float(rng.choice([0.5, 1.0, 2.0]))
            p = _random_accuracy_problem(rng, kind, n, r)
            solved, _ = solve_accuracy(p)
            brute, bound = brute_force_oracle(p, 200)
            so = schedule_objective(p.a, solved)
            bo = schedule_objective(p.a, brute)
            ok &= so <= bo + bound + 1e-12 * max(1.0, so)
        ok &= time.time() - t0 < 120.0
        _report(3, "brute-force optimality", bool(ok))


class TestCriterion4Structure:
    def test_monotonicity_and_uniqueness(self):
        rng = np.random.default_rng(40)
        ok = True
        for kind in ("power", "logarithmic", "log_squared"):
            for _ in range(100):
                n = int(rng.integers(3, 40))
                r = float(rng.choice([0.5, 1.0, 2.0]))
                p = _random_accuracy_problem(rng, kind, n, r)
                schedule, cert = solve_accuracy(p)
                d = schedule.values
                # rank monotonicity: higher nu = b/a never gets a smaller
                # accuracy allowance
                order = np.argsort(cert.rho)
                ok &= bool(np.all(np.diff(d[order]) <= 1e-12 * p.delta_ref))
                # box feasibility
                lo, hi = p.m * p.delta_ref, p.M * p.delta_ref
                ok &= bool(np.all(d >= lo - 1e-15) and np.all(d <= hi * (1 + 1e-12)))
                # uniqueness: permuting the instance permutes the solution
                perm = rng.permutation(n)
                p2 = accuracy_problem(p.a[perm], p.b[perm], p.delta_ref,
                                      p.m, p.M, kind, r)
                d2, _ = solve_accuracy(p2)
                ok &= bool(np.allclose(d2.values, d[perm], rtol=1e-7,
                                       atol=1e-12 * p.delta_ref))
        _report(4, "monotonicity and uniqueness", bool(ok))


class TestCriterion5Certificates:
    def test_certificate_growth(self):
        certs = fixed_step_certificates(10_000, 1.0, 0.0)
        k = np.arange(10_001, dtype=float)
        ok = bool(np.all(certs.A >= k * k / 4.0))
        ok &= float(np.max(certs.recursion_residual())) <= 1e-9
        _report(5, "certificate growth", ok)


def _quadratic_oracle(center, scale=1.0):
    c = np.asarray(center, dtype=float)

    def oracle(x, delta):
        diff = x - c
        return SimpleNamespace(value=0.5 * scale * float(diff @ diff),
                               gradient=scale * diff,
                               delta=float(delta),
                               inner_work=1.0)
    return oracle


class TestCriterion6NoiseFreeBound:
    def test_fgm_worst_case_bound(self):
        # F(x) = ||x||^2/2 over the 2-simplex: F* = 1/4 at (1/2, 1/2)
        oracle = _quadratic_oracle([0.0, 0.0])
        x0 = np.array([1.0, 0.0])
        r2 = 0.5
        cfg = FgmConfig(mode="fixed_step", L_init=1.0)
        gaps = {}

        def observer(k, x):
            gaps[k] = 0.5 * float(x @ x) - 0.25

        _, _, certs = fgm_run(cfg, oracle, lambda k, A: 0.0, 100, x0,
                              r2_estimate=r2, observer=observer)
        ok = all(gaps[k] <= r2 / certs.A[k + 1] + 1e-12 for k in range(100))
        _report(6, "noise-free FGM bound", bool(ok))


class TestCriterion7Experiment1:
    def test_experiment1_dominance(self):
        t0 = time.time()
        base = default_config(1)
        ok = True
        details = []
        for r in (0.0, 1.0):
            for mu in (0.0, 0.1):
                cfg = replace(base, r=r, mu=mu, N=(500, 2000))
                result = run_experiment(cfg)
                ok &= not result.failures
                by = {(s.schedule, s.N): s.median_gap
                      for s in result.summaries}
                for N in (500, 2000):
                    tun, con = by[("tunable", N)], by[("constant", N)]
                    cell_ok = tun <= con
                    if mu == 0.1 and N == 2000:
                        cell_ok = tun < con
                    ok &= cell_ok
                    details.append(f"r={r} mu={mu} N={N} "
                                   f"tunable={tun:.3e} constant={con:.3e}")
        elapsed = time.time() - t0
        ok &= elapsed < 600.0
        _report(7, "experiment 1 dominance", bool(ok),
                "; ".join(details) + f"; elapsed={elapsed:.0f}s")


class TestCriterion8Experiment2:
    def test_experiment2_pareto(self):
        t0 = time.time()
        base = replace(default_config(2), M=10.0, N=(500, 2000),
                       sample_every=10 ** 9)
        ok = True
        details = []
        for d in (50, 200):
            result = run_experiment(replace(base, d=d))
            ok &= not result.failures
            by = {(s.schedule, s.N): s for s in result.summaries}
            for N in (500, 2000):
                tun, con = by[("tunable", N)], by[("constant", N)]
                ok &= tun.median_gap <= con.median_gap
                ok &= tun.total_inner_work <= 1.05 * con.total_inner_work
                details.append(
                    f"d={d} N={N} gap {tun.median_gap:.3e}/{con.median_gap:.3e}"
                    f" work {tun.total_inner_work:.0f}/{con.total_inner_work:.0f}")
        elapsed = time.time() - t0
        ok &= elapsed < 1200.0
        _report(8, "experiment 2 Pareto dominance", bool(ok),
                "; ".join(details) + f"; elapsed={elapsed:.0f}s")


class TestCriterion9Experiment3:
    def test_experiment3_online_dominance(self):
        t0 = time.time()
        cfg = replace(default_config(3), sample_every=10 ** 9)
        result = run_experiment(cfg)
        by = {s.schedule: s.median_gap for s in result.summaries}
        hard_failures = [f for f in result.failures if f[0] != "linear"]
        ok = not hard_failures
        ok &= by["online_tunable"] <= by["constant"]
        ok &= by["online_tunable"] <= by["poly3"]
        # the linear baseline is reported but not gated
        reported = "linear" in by
        elapsed = time.time() - t0
        ok &= reported and elapsed < 1200.0
        _report(9, "experiment 3 online dominance", bool(ok),
                f"online={by.get('online_tunable'):.3e} "
                f"constant={by.get('constant'):.3e} "
                f"poly3={by.get('poly3'):.3e} "
                f"linear={by.get('linear')} elapsed={elapsed:.0f}s")


class TestCriterion10ErrorAccumulation:
    def test_error_accumulation_witness(self):
        delta_ref = 1e-3
        oracle = _quadratic_oracle([0.0, 0.0], scale=2.0)
        x0 = np.array([1.0, 0.0])
        N, mu, L = 400, 0.5, 2.0

        cfg = FgmConfig(mode="fixed_step", L_init=L, mu=mu)
        _, traj_const, _ = fgm_run(cfg, oracle, lambda k, A: delta_ref, N, x0,
                                   r2_estimate=0.5)
        ok = all(rec.bound >= 2.0 * delta_ref for rec in traj_const)

        certs = fixed_step_certificates(N, L, mu)
        a, b = impact_coefficients_fgm(certs)
        p = accuracy_problem(a, b, delta_ref, 0.0, 100.0, "power", 1.0)
        tunable, _ = solve_accuracy(p)
        _, traj_tun, _ = fgm_run(cfg, oracle,
                                 lambda k, A: tunable.values[k], N, x0,
                                 r2_estimate=0.5)
        ok &= traj_tun[-1].bound < 2.0 * delta_ref
        _report(10, "error accumulation witness", bool(ok),
                f"constant bound={traj_const[-1].bound:.3e} "
                f"tunable bound={traj_tun[-1].bound:.3e}")


class TestCriterion11OracleCostFit:
    def test_hull_oracle_cost_fit(self):
        data = generate_scenarios(50, 100, 0.2, seed=1234, sigma=1e-3, mu=0.1)
        x = np.full(100, 0.01)
        deltas = [10.0 ** -e for e in range(2, 9)]
        works = [hull_oracle(data, x, d, InnerState()).inner_work
                 for d in deltas]
        logs = np.log(1.0 / np.asarray(deltas))
        slope, intercept = np.polyfit(logs, works, 1)
        pred = slope * logs + intercept
        resid = np.asarray(works) - pred
        r2 = 1.0 - float(resid @ resid) / float(np.sum(
            (works - np.mean(works)) ** 2))
        ok = slope > 0.0 and r2 >= 0.9
        _report(11, "oracle cost empirical fit", bool(ok),
                f"slope={slope:.3g} r2={r2:.4f}")
