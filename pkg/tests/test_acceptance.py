"""Acceptance suite: the ten release criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line straight to the terminal (output
capture is bypassed) and then asserts.  Run alone with
``pytest tests/test_acceptance.py -v``.
"""
import math

import numpy as np
import pytest

from fastdiff import DiffusionModel, blowup_constant
from fastdiff.asymptotics_pipeline import DEFAULT_TIMES, TheoremConfig, integral_functional, verify_theorem
from fastdiff.blowup_elliptic import boundary_rate_report, solve_blowup
from fastdiff.cli import main as cli_main
from fastdiff.domains import GridSpec, RadialDomain
from fastdiff.geometry import (
    TouchingBallConfig,
    is_divergent,
    lemma71_limit_check,
    level_area,
    monte_carlo_level_area,
)
from fastdiff.radial_pde import (
    EvolutionSpec,
    ProblemKind,
    check_initial_behavior,
    check_sandwich,
    default_rho_tau,
    simulate,
)
from fastdiff.similarity_profiles import ProfileVariant, Side, profile_asymptote_ratio, profile_for, solve_lambda

PLAP, PME = DiffusionModel.plaplace(1.5), DiffusionModel.porous_medium(0.5)
REF = TouchingBallConfig(RadialDomain.exterior_ball(1.0, 2), 0.5)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def test_criterion_01_closed_form_constants(report):
    errs = [abs(blowup_constant(PLAP) / 3.0 - 1), abs(blowup_constant(PME) / 9.0 - 1)]
    report(1, max(errs) <= 1e-12, f"c(3/2)={blowup_constant(PLAP)!r}, c(1/2)={blowup_constant(PME)!r}, "
                                  f"max rel err {max(errs):.1e} (tol 1e-12)")


def test_criterion_02_lambda_oracle(report):
    errs = [abs(solve_lambda(PLAP, ProfileVariant(), b) / (9 * math.pi / (4 * b)) ** (2 / 3) - 1) for b in (1.0, 2.0)]
    report(2, max(errs) <= 1e-8, f"lambda rel err beta=1: {errs[0]:.1e}, beta=2: {errs[1]:.1e} (tol 1e-8)")


def test_criterion_03_profile_tails(report):
    worst_p = max(abs(profile_asymptote_ratio(profile_for(m, ProfileVariant(), 1.0), 1e3) / blowup_constant(m) - 1)
                  for m in map(DiffusionModel.plaplace, (1.2, 1.5, 1.8)))
    worst_m = max(abs(profile_asymptote_ratio(profile_for(m, ProfileVariant(), 1.0), 1e3) / blowup_constant(m) - 1)
                  for m in map(DiffusionModel.porous_medium, (0.3, 0.5, 0.8)))
    report(3, worst_p <= 1e-2 and worst_m <= 2e-2,
           f"tail ratio at xi=1e3: worst p-Laplace {worst_p:.1e} (tol 1e-2), worst PME {worst_m:.1e} (tol 2e-2)")


def test_criterion_04_blowup_rate(report):
    dom, delta = RadialDomain.ball(1.0, 2), 1e-4
    v = solve_blowup(PLAP, dom, delta)
    (rate,) = boundary_rate_report(v, PLAP, d_max=10 * delta)
    sel = (rate.d >= delta * (1 - 1e-9)) & (rate.d <= 10 * delta * (1 + 1e-9))
    rate_err = float(np.max(np.abs(rate.ratio[sel] / 3.0 - 1)))
    half = solve_blowup(PLAP, dom, delta / 2)
    interior = dom.distance(v.r) >= 10 * delta
    change = float(np.max(np.abs(half.interpolate(v.r[interior]) / v.values[interior] - 1)))
    report(4, sel.sum() > 0 and rate_err <= 5e-2 and change < 1e-2,
           f"max |v d^3 / c - 1| on [delta, 10 delta] = {rate_err:.1e} over {sel.sum()} nodes (tol 5e-2); "
           f"delta-halving change {change:.1e} (tol 1e-2)")


def test_criterion_05_initial_behavior(report):
    dom = RadialDomain.ball(1.0, 2)
    times = tuple(np.geomspace(1e-4, 1e-1, 7))
    parts, ok = [], True
    for name, model in (("p=3/2", PLAP), ("m=1/2", PME)):
        fields = simulate(EvolutionSpec(model, dom, ProblemKind.INITIAL_BOUNDARY, 1.0, times))
        rep = check_initial_behavior(fields, solve_blowup(model, dom, 1e-4), model, d0=0.2)
        dec, upper = rep.decreasing_toward_zero(3), rep.upper_bound_holds(1e-2)
        ok &= dec and upper
        parts.append(f"{name}: deviation over last three times {np.sort(rep.deviation)[:3].tolist()} "
                     f"strictly decreasing={dec}, max t^-e u / v = {rep.upper_ratio.max():.6f} (tol 1.01)")
    report(5, ok, "; ".join(parts))


def test_criterion_06_barrier_sandwich(report):
    dom, eps = RadialDomain.ball(1.0, 2), 0.05
    parts, ok = [], True
    for model in (PLAP, PME):
        for problem in ProblemKind:
            side = Side.WHOLE_LINE if problem is ProblemKind.CAUCHY else Side.HALF_LINE
            minus = profile_for(model, ProfileVariant.minus(eps, side), 1.0)
            plus = profile_for(model, ProfileVariant.plus(eps, side), 1.0)
            rho, tau = default_rho_tau(plus, dom)
            fields = simulate(EvolutionSpec(model, dom, problem, 1.0, tuple(np.geomspace(tau / 100, tau, 5))))
            rep = check_sandwich(fields, (minus, plus), rho, tau, tol=1e-3)
            ok &= rep.success
            parts.append(f"{model.symbol}={model.exponent} {problem.value}: {rep.max_violation:.1e}")
    report(6, ok, "max violation (tol 1e-3 beta) " + ", ".join(parts))


def test_criterion_07_lemma_limit(report, rng):
    configs = []
    for N in (2, 3):
        configs += [TouchingBallConfig(RadialDomain.ball(2.0, N), 1.0),
                    TouchingBallConfig(RadialDomain.exterior_ball(1.0, N), 0.5),
                    TouchingBallConfig(RadialDomain.annulus(1.0, 3.0, N), 0.5),
                    TouchingBallConfig(RadialDomain.annulus(1.0, 3.0, N), 0.5, touch=3.0)]
    worst, worst_z = 0.0, 0.0
    for cfg in configs:
        table = lemma71_limit_check(cfg, [1e-2 * cfg.R, 1e-3 * cfg.R, 1e-4 * cfg.R])
        worst = max(worst, float(table.relative_error[-1]))
        for s in (1e-2 * cfg.R, 1e-1 * cfg.R):
            est, se = monte_carlo_level_area(cfg, s, 400_000, rng)
            worst_z = max(worst_z, abs(est - level_area(cfg, s)) / se)
    report(7, worst <= 1e-2 and worst_z <= 3.0,
           f"{len(configs)} configs: worst scaled-area error at s=1e-4 R {worst:.1e} (tol 1e-2), "
           f"worst Monte Carlo deviation {worst_z:.2f} sigma (tol 3)")


def test_criterion_08_main_theorems(report):
    parts, ok = [], True
    for model in (PLAP, PME):
        for problem in ProblemKind:
            rep = verify_theorem(TheoremConfig(model, 1.0, REF, 1.0, problem))
            th_err = abs(rep.theta_fitted / rep.theta_expected - 1)
            ok &= th_err <= 5e-2 and rep.relative_error <= 0.1
            parts.append(f"{model.symbol}={model.exponent} {problem.value}: theta {rep.theta_fitted:.4f}/"
                         f"{rep.theta_expected:.4f}, L {rep.fitted_limit:.5f}/{rep.predicted:.5f} "
                         f"(rel {rep.relative_error:.1e})")
    report(8, ok, "; ".join(parts) + " (tol theta 5%, limit 10%)")


def test_criterion_09_degenerate(report):
    cfg = TouchingBallConfig(RadialDomain.ball(1.0, 2), 1.0)
    parts, ok = [], True
    for model in (PLAP, PME):
        rep = verify_theorem(TheoremConfig(model, 1.0, cfg))
        grows = rep.divergence_evidence(4)
        ok &= is_divergent(rep.predicted) and rep.divergent and grows
        parts.append(f"{model.symbol}={model.exponent}: predicted={rep.predicted}, last four t^-theta I(t) "
                     f"{[round(float(x), 5) for x in rep.scaled[-4:]]} growing={grows}")
    report(9, ok, "; ".join(parts))


def test_criterion_10_determinism_and_refinement(report, tmp_path):
    same = True
    for cmd in (["geometry", "--shape", "exterior_ball", "--N", "3", "--R", "0.5", "--mc_samples", "50000"],
                ["verify", "--p", "1.5", "--alpha", "1"]):
        for name in ("a", "b"):
            assert cli_main(cmd + ["--seed", "11", "--out", str(tmp_path / cmd[0] / name)]) == 0
        a, b = tmp_path / cmd[0] / "a", tmp_path / cmd[0] / "b"
        for f in sorted(p.name for p in a.iterdir() if p.name != "manifest.json"):
            same &= (a / f).read_bytes() == (b / f).read_bytes()
    worst = 0.0
    for model in (PLAP, PME):
        for problem in ProblemKind:
            I = []
            for grid in (GridSpec(), GridSpec().refined(2)):
                fields = simulate(EvolutionSpec(model, REF.domain, problem, 1.0, DEFAULT_TIMES, grid))
                I.append(np.array([integral_functional(f, 1.0, REF) for f in fields]))
            worst = max(worst, float(np.max(np.abs(I[1] / I[0] - 1))))
    report(10, same and worst < 1e-2,
           f"byte-identical outputs under the same seed={same}; worst I(t) change on doubling n_space and n_time "
           f"{worst:.1e} over {len(DEFAULT_TIMES)} times x 4 cases (tol 1e-2)")
