"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The expensive trajectories are shared through module-scoped fixtures: the
long two-sided-rate run (criterion 9) also serves the subsolution certificate
(10), the baseline (11) and the sup-from-Lq sweep (7).
"""

import math
import time

import numpy as np
import pytest

from decaylab.bounds import (DecayEnvelope, build_subsolution, logistic_exact,
                             logistic_residual, solve_steady_state,
                             steady_state_residual, subsolution_check)
from decaylab.evolution import (ApproxParams, ProblemSpec, evolve,
                                linfty_from_lq_check, lyapunov_series,
                                minimal_solution_ladder, observer_lq,
                                semiconvexity_check)
from decaylab.gn import FamilySpec, GNRequest, family_scan
from decaylab.radial import RadialGrid, RadialProfile, grad_l2_norm
from decaylab.rates import (baseline_check, fit_decay, lower_bound_persistence,
                            upper_bound_check)
from decaylab.steepness import (SteepnessFunction, check_convexity_condition,
                                check_near_multiplicativity, check_ratio_bound,
                                solve_transcendental)

GAUSS_ENV = DecayEnvelope(kind="StretchedExp", c0=1.0, alpha=1.0, beta=2.0)


def report(criterion: int, passed: bool, detail: str):
    print(f"criterion {criterion:02d}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"criterion {criterion} failed: {detail}"


# -- shared expensive runs ----------------------------------------------------

@pytest.fixture(scope="module")
def long_run():
    """p=1 Gaussian datum evolved to t = 1e4 at m = 4001 (criteria 7, 9, 10, 11)."""
    spec = ProblemSpec(p=1.0, n=1, u0=lambda r: np.exp(-r**2))
    params = ApproxParams(R=40.0, eps=1e-5, m=4001)
    snaps = np.concatenate([[0.0], np.geomspace(1e-2, 1e4, 97)])
    t0 = time.perf_counter()
    run = evolve(spec, params, 1e4, snaps, observers={"lq1": observer_lq(1.0)})
    elapsed = time.perf_counter() - t0
    return run, elapsed


@pytest.fixture(scope="module")
def ladder():
    """(eps, R) grid for the strongly degenerate datum of criterion 5."""
    spec = ProblemSpec(p=4.0, n=1, u0=lambda r: 2.0 * np.exp(-(r / 2.0) ** 2))
    snaps = np.concatenate([[0.0], np.geomspace(1.0, 100.0, 25)])
    return minimal_solution_ladder(spec, [1e-2, 1e-3, 1e-4], [20.0, 40.0],
                                   {20.0: 1001, 40.0: 2001}, 100.0, snaps)


@pytest.fixture(scope="module")
def gaussian_run_p1():
    """p=1 Gaussian run on [0, 100] (criteria 4, 6, 7)."""
    spec = ProblemSpec(p=1.0, n=1, u0=lambda r: np.exp(-r**2))
    params = ApproxParams(R=20.0, eps=1e-3, m=1001)
    snaps = np.concatenate([[0.0], np.geomspace(0.1, 100.0, 33)])
    return evolve(spec, params, 100.0, snaps)


@pytest.fixture(scope="module")
def gaussian_run_p2():
    """p=2 Gaussian run on [0, 100] (criteria 6, 7)."""
    spec = ProblemSpec(p=2.0, n=1, u0=lambda r: np.exp(-r**2))
    params = ApproxParams(R=20.0, eps=1e-3, m=1001)
    snaps = np.concatenate([[0.0], np.geomspace(0.1, 100.0, 33)])
    return evolve(spec, params, 100.0, snaps)


# -- criteria -----------------------------------------------------------------

def test_criterion_01_steady_state_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 3):
        state = solve_steady_state(1.0, n, 4001)
        exact = (1.0 - state.r_nodes**2) / (2.0 * n)
        worst = max(worst, float(np.max(np.abs(state.w - exact))))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-6 and elapsed < 1.0,
           f"max |w - (1-r^2)/(2n)| = {worst:.2e}, runtime {elapsed:.2f}s")


def test_criterion_02_logistic_ode_oracle():
    grid = np.unique(np.concatenate([[0.0], np.geomspace(1e-5, 10.0, 46000)]))
    worst = 0.0
    for p in (1.0, 2.0, 3.0):
        for delta in (0.1, 1.0, 10.0):
            worst = max(worst, logistic_residual(grid, delta, p))
            # exact up to the power-function roundtrip (delta^-p)^(-1/p)
            assert logistic_exact(0.0, delta, p) == pytest.approx(delta, rel=1e-13)
    flat = logistic_exact(np.array([0.0, 1.0, 7.0]), 1.0, 2.0)
    ok = worst <= 1e-6 and np.all(flat == 1.0)
    report(2, ok, f"max scaled residual = {worst:.2e}, delta=1 stationary")


def test_criterion_03_steepness_audit():
    t0 = time.perf_counter()
    lam = np.linspace(1e-3, 0.999, 300)
    worst = -math.inf
    for kappa in (0.5, 1.0, 2.0):
        L = SteepnessFunction.log_type(kappa, 4.0, lambda0=1.0)
        s = np.geomspace(1e-8, L.s0 * 0.9999, 300)
        s_unit = np.geomspace(1e-8, 0.9999, 300)
        checks = [check_near_multiplicativity(L, 1.0, L.a, s, lam),
                  check_ratio_bound(L, L.a, s_unit)]
        conv = check_convexity_condition(L, 1.0, 1.0, s)
        checks.extend([conv.weak, conv.strong])
        D = SteepnessFunction.double_log_type(kappa, math.e**3, 1.0, lambda0=1.0)
        sd = np.geomspace(1e-8, 0.9999, 300)
        checks.append(check_near_multiplicativity(D, 1.0, D.a, sd, lam))
        checks.append(check_ratio_bound(D, D.a, sd))
        convd = check_convexity_condition(D, 1.0, 1.0, sd)
        checks.extend([convd.weak, convd.strong])
        worst = max(worst, max(c.max_violation for c in checks))
    elapsed = time.perf_counter() - t0
    report(3, worst <= 1e-12 and elapsed < 10.0,
           f"max violation = {worst:.2e}, runtime {elapsed:.2f}s")


def test_criterion_04_lyapunov_descent(gaussian_run_p1):
    L = SteepnessFunction.log_type(2.0, 4.0)
    series = lyapunov_series(gaussian_run_p1, L, q=1.0)  # raises on any ascent
    rises = np.diff(series) - 1e-8 * (1.0 + np.abs(series[:-1]))
    report(4, bool(np.all(rises <= 0)),
           f"descent over {series.size} snapshots, range "
           f"[{series[-1]:.4f}, {series[0]:.4f}]")


def test_criterion_05_monotone_ladders(ladder):
    last_pair = ladder.eps_cauchy[-1]
    r_pair = ladder.R_cauchy[-1]  # datum has compact numerical support << R
    ok = (ladder.eps_violation <= 1e-8 and ladder.R_violation <= 1e-8
          and last_pair < 1e-3 and r_pair < 1e-4)
    report(5, ok,
           f"monotonicity violations (eps {ladder.eps_violation:.1e}, "
           f"R {ladder.R_violation:.1e}), last-two-level sup diff {last_pair:.2e}, "
           f"R-pair diff {r_pair:.1e}")


def test_criterion_06_semiconvexity(gaussian_run_p1, gaussian_run_p2):
    m1 = semiconvexity_check(gaussian_run_p1)
    m2 = semiconvexity_check(gaussian_run_p2)
    # refinement study: the negative part must not grow under dt, h refinement
    snaps = np.concatenate([[0.0], np.geomspace(0.2, 10.0, 10)])
    spec = ProblemSpec(p=1.0, n=1, u0=lambda r: np.exp(-r**2))
    coarse = semiconvexity_check(
        evolve(spec, ApproxParams(R=10.0, eps=1e-3, m=126), 10.0, snaps))
    fine = semiconvexity_check(
        evolve(spec, ApproxParams(R=10.0, eps=1e-3, m=501, safety=0.25), 10.0, snaps))
    improves = max(0.0, -fine) <= max(0.0, -coarse) + 1e-9
    ok = m1 >= -0.05 and m2 >= -0.05 and improves
    report(6, ok, f"min(p=1) = {m1:.2e}, min(p=2) = {m2:.2e}, "
                  f"refined {coarse:.2e} -> {fine:.2e}")


def test_criterion_07_linfty_from_lq(gaussian_run_p1, gaussian_run_p2, ladder,
                                     long_run):
    run9, _ = long_run
    worst = -math.inf
    for run in (gaussian_run_p1, gaussian_run_p2, ladder.proxy, run9):
        ratio, _ = linfty_from_lq_check(run, q=1.0)
        worst = max(worst, ratio)
    report(7, worst <= 1.0 + 1e-6, f"worst sup/Lq-bound ratio = {worst:.4f}")


def test_criterion_08_gn_boundedness_and_sharpness():
    # amplitudes pair with the widths so the squared gradient norms sweep the
    # decaying branch of L: targets ln(M/x_j) follow a geometric design with
    # ratio (2 * flat^{1/4}) against widths 16 .. 1
    kappa, M, n, q = 4.0, 4.0, 3, 2.0
    L = SteepnessFunction.log_type(kappa, M)
    grid = RadialGrid(n, 80.0, 8001)
    G = grad_l2_norm(RadialProfile.sample(grid, lambda r: np.exp(-r**2))) ** 2
    alpha = 1.0 / q - (n - 2.0) / (2.0 * n)
    flat, e_top = 2.35, 0.52
    widths = [16.0, 8.0, 4.0, 2.0, 1.0]
    gains = [e_top / (2.0 * flat**0.25) ** (4 - j) for j in range(5)]
    targets = [e ** (-1.0 / (kappa * alpha)) for e in gains]
    grads_sq = [M * math.exp(-ell) for ell in targets]
    scales = [math.sqrt(x / (w * G)) for x, w in zip(grads_sq, widths)]

    fam = FamilySpec(kind="StretchedExp", c0=1.0, alpha=1.0, beta=2.0,
                     scales=scales, widths=widths)
    req = GNRequest(n=n, q=q, L=L)
    scan = family_scan(fam, req, grid)
    spread = scan.ratio_max / scan.ratio_min
    span = scan.grad_span
    probe = family_scan(fam, req, grid, alpha_scale=1.25)
    growth = probe.rows[-1].ratio / probe.rows[0].ratio
    ok = spread <= 3.0 and span >= 100.0 and probe.monotone_increasing and growth >= 5.0
    report(8, ok, f"ratio spread {spread:.2f} over {span:.1e} gradient span; "
                  f"sharpness probe grows {growth:.2f}x monotonically")


def test_criterion_09_rate_sandwich(long_run):
    run, elapsed = long_run
    t, sup = run.times, run.series["sup_norm"]
    fit = fit_decay(t, sup, 1.0, "LogCorrected", window=(10.0, 1e4))
    # upper gauge exponent kappa = n/beta + n p delta/2 with delta = 0.9
    L = SteepnessFunction.log_type(0.95, 4.0)
    upper = upper_bound_check(t, sup, L, 1.0, 1, t0=10.0)
    lower = lower_bound_persistence(t, sup, GAUSS_ENV, 1.0)
    # bracketing over the final two decades specifically
    tail = t >= 100.0
    up_curve = upper.C * t[tail] ** -1.0 * L.value(1.0 / t[tail]) ** -2.0
    low_curve = lower.C * t[tail] ** -1.0 * (0.5 * np.log(t[tail]))
    bracket = (np.max(sup[tail] / up_curve) <= 1.1
               and np.max(low_curve / sup[tail]) <= 1.1)
    ok = (0.9 <= fit.sigma <= 1.6 and upper.passed and lower.passed
          and bracket and elapsed <= 600.0)
    report(9, ok, f"sigma = {fit.sigma:.3f} in [0.9, 1.6]; upper ratio "
                  f"{upper.worst_ratio:.3f}, lower ratio {lower.worst_ratio:.3f}; "
                  f"runtime {elapsed:.0f}s")


def test_criterion_10_subsolution_certificate(long_run):
    run, _ = long_run
    state = solve_steady_state(1.0, 1, 4001)
    worst = math.inf
    details = []
    for tau0 in (math.log(11.0), math.log(101.0), math.log(1001.0),
                 math.log(1e4 + 1.0)):
        sub = build_subsolution(GAUSS_ENV, 1.0, state, tau0)
        rep = subsolution_check(run, sub, state)
        worst = min(worst, rep.min_margin)
        details.append(f"tau0={tau0:.2f}: {rep.min_margin:.4f}")
    report(10, worst >= 0.0, "margins " + ", ".join(details))


def test_criterion_11_baseline(long_run):
    run, _ = long_run
    bl = baseline_check(run.times, run.series["center_value"], 1.0,
                        t0=10.0, t_hi=1e4)
    report(11, bl.passed,
           f"compensated center increasing over final decade: {bl.increasing_tail}; "
           f"envelope ratio {bl.envelope_worst_ratio:.2f} (headroom {bl.headroom})")


def test_criterion_12_transcendental_bound():
    beta, gamma, delta0 = 0.8, 0.5, 1e-2
    worst = -math.inf
    for L in (SteepnessFunction.log_type(1.0, 4.0), SteepnessFunction.power_law(1.0)):
        for delta in np.geomspace(1e-2, 1e-8, 7):
            eta_bf, eta_bound = solve_transcendental(L, beta, gamma, float(delta),
                                                     delta0)
            worst = max(worst, eta_bf / eta_bound)
    report(12, worst <= 1.0 + 1e-12,
           f"max brute-force/bound ratio = {worst:.12f}")
