"""
内置验证套件。每个套件返回一组 Check，全部通过时 verify 以 0 退出。
"""
from typing import Callable

import numpy as np

from eplab.src.analysis import analyse_run
from eplab.src.background import Envelope
from eplab.src.config import ScenarioConfig, parse_scenario
from eplab.src.diagnostics import SUP_NORM_NAMES, THEOREM11_NORMS, Check
from eplab.src.errors import BlowUp
from eplab.src.eulerian import oracle_difference, run_oracle
from eplab.src.fields import Field, Grid, mean, sup_norm
from eplab.src.lagrangian import run_scenario
from eplab.src.log import cli_log
from eplab.src.phaseplane import (
    PhaseState, amplitude_squared, closed_form_constant_c, critical_w0, held_out_C0, integrate, lemma_constants,
    verify_lemma,
)
from eplab.src.poisson import newton_poisson_boltzmann, solve_linear_poisson

def _check(name: str, passed: bool, margin: float = 0.0, detail: str = "") -> Check:
    return Check(name, bool(passed), float(margin), detail)

def _le(name: str, value: float, limit: float) -> Check:
    return _check(name, value <= limit, limit - value, f"{value:.3e} <= {limit:.1e}")

def poisson_suite() -> list[Check]:
    grid = Grid(128)
    two_pi = 2.0 * np.pi
    checks = []
    cases = {
        "single_mode": (lambda x: np.sin(two_pi * x), lambda x: two_pi ** 2 * np.sin(two_pi * x)),
        "two_mode": (
            lambda x: np.sin(two_pi * x) + 0.5 * np.cos(3 * two_pi * x),
            lambda x: two_pi ** 2 * np.sin(two_pi * x) + 0.5 * (3 * two_pi) ** 2 * np.cos(3 * two_pi * x),
        ),
    }
    one = Field.constant(grid, 1.0)
    for name, (phi_exact, source) in cases.items():
        phi = solve_linear_poisson(one + Field.from_function(grid, source), one)
        error = sup_norm(phi - Field.from_function(grid, phi_exact))
        checks.append(_le(f"poisson_{name}", error, 1e-10))

    flat = newton_poisson_boltzmann(one)
    checks.append(_le("boltzmann_uniform", sup_norm(flat.phi), 1e-13))

    rho = Field.from_function(grid, lambda x: 1.0 + 0.1 * np.sin(two_pi * x))
    solution = newton_poisson_boltzmann(rho)
    checks.append(_le("boltzmann_residual", solution.residuals[-1], 1e-12))
    checks.append(_check("boltzmann_iterations", solution.iterations <= 8, 8 - solution.iterations, f"{solution.iterations} 次"))
    tail = [r for r in solution.residuals if r > 1e-11][-4:]
    quadratic = all(b <= 10.0 * a * a for a, b in zip(tail, tail[1:]))
    checks.append(_check("boltzmann_quadratic", quadratic, detail=", ".join(f"{r:.2e}" for r in solution.residuals)))
    checks.append(_le("boltzmann_neutrality", abs(mean(solution.phi.map(np.exp) - rho)), 1e-12))
    return checks

def phaseplane_suite() -> list[Check]:
    checks = []
    cases = {"underdamped": (1.0, 1.0, 0.3, 1.4), "critical": (2.0, 1.0, 0.0, 2.0), "overdamped": (3.0, 2.0, 0.0, 1.5)}
    for name, (nu, cbar, w0, s0) in cases.items():
        trajectory = integrate(PhaseState(w0, s0), lambda t: cbar, nu, 1e-3, 10.0)
        worst = 0.0
        for t in (1.0, 5.0, 10.0):
            exact = closed_form_constant_c(w0, s0, nu, cbar, t)
            k = int(round(t / 1e-3))
            worst = max(worst, abs(trajectory.s[k] - exact.s), abs(trajectory.w[k] - exact.w))
        checks.append(_le(f"rk4_closed_form_{name}", worst, 1e-8))

        errors = []
        for dt in (0.02, 0.01):
            coarse = integrate(PhaseState(w0, s0), lambda t: cbar, nu, dt, 10.0)
            exact_s = np.array([closed_form_constant_c(w0, s0, nu, cbar, t).s for t in coarse.t])
            errors.append(float(np.max(np.abs(coarse.s - exact_s))))
        ratio = errors[0] / errors[1]
        checks.append(_check(f"rk4_order_{name}", ratio >= 12.0, ratio - 12.0, f"误差比 {ratio:.2f}"))

    threshold = critical_w0(1.0, 1.0, 1.0, T=10.0, dt=1e-3, lo=-20.0, hi=0.0, tol=1e-4)
    w0 = threshold - 1.0
    times = []
    for dt in (1e-3, 5e-4):
        try:
            integrate(PhaseState(w0, 1.0), lambda t: 1.0, 1.0, dt, 10.0)
            times.append(float("nan"))
        except BlowUp as e:
            times.append(e.time)
    finite = bool(np.all(np.isfinite(times)))
    checks.append(_check("blowup_detected", finite, detail=f"w0 = {w0:.4g}, t* = {times}"))
    if finite:
        drift = abs(times[0] - times[1]) / times[1]
        checks.append(_le("blowup_time_stable", drift, 0.01))
        checks.extend(_pde_blowup_checks(threshold, times[1]))
    return checks

def _pde_blowup_checks(threshold: float, ode_time: float) -> list[Check]:
    """
    常数背景下每条特征线独立满足相平面方程。取 u0 = A·sin(2πx)，使 x = -1/2 处 w0 = threshold - 1，
    耦合求解器报告的 t* 应与相平面一致，并在 dt 减半时保持稳定。
    """
    amplitude = (1.0 - threshold) / (2.0 * np.pi)
    times = []
    for dt in (2e-3, 1e-3):
        config = _scenario(
            name="supercritical", background={"kind": "constant", "cbar": 1.0},
            initial={"u": {"amplitude": amplitude}}, particles=256, grid=128, dt=dt, T=2.0, diag_every=100,
        )
        try:
            run_scenario(config)
            times.append(float("nan"))
        except BlowUp as e:
            times.append(e.time)
    if not np.all(np.isfinite(times)):
        return [_check("pde_blowup_detected", False, detail=f"t* = {times}")]
    return [
        _le("pde_blowup_time_stable", abs(times[0] - times[1]) / times[1], 0.01),
        _le("pde_blowup_matches_ode", abs(times[1] - ode_time) / ode_time, 0.01),
    ]

def lemma_suite() -> list[Check]:
    checks = []
    nu, cbar, state = 1.0, 1.0, PhaseState(0.3, 1.4)

    flat = integrate(state, lambda t: cbar, nu, 1e-3, 40.0)
    constants = lemma_constants(nu, cbar, float(max(np.max(np.abs(flat.s)), np.max(np.abs(flat.w)))))
    report = verify_lemma(flat, constants)
    checks.append(_check("lemma_constant_background", report.passed and report.gronwall_ok, report.gronwall_margin))

    for r1 in (0.1, 0.25, 5.0):
        envelope = Envelope("exponential", 0.3, r1)
        trajectory = integrate(state, lambda t: cbar + envelope(t), nu, 1e-3, 60.0)
        B = float(max(np.max(np.abs(trajectory.s)), np.max(np.abs(trajectory.w))))
        report = verify_lemma(trajectory, lemma_constants(nu, cbar, B, r1), envelope, 1.0)
        detail = f"r = {report.rate}, 预测 {report.constants.r2_pred:.4g}"
        checks.append(_check(f"lemma_gronwall_r1={r1}", report.gronwall_ok, report.gronwall_margin))
        checks.append(_check(f"lemma_rate_r1={r1}", report.passed, detail=detail))

    envelope = Envelope("rational", 0.3, p=2.0)
    trajectory = integrate(state, lambda t: cbar + envelope(t), nu, 1e-3, 50.0)
    B = float(max(np.max(np.abs(trajectory.s)), np.max(np.abs(trajectory.w))))
    report = verify_lemma(trajectory, lemma_constants(nu, cbar, B), envelope, 1.0)
    final = float(amplitude_squared(trajectory, cbar)[-1])
    checks.append(_le("lemma_rational_final", final, 1e-4))
    C0, held_out = held_out_C0(trajectory, cbar, report.constants.lam, envelope)
    checks.append(_check(
        "lemma_rational_C0", held_out <= C0, C0 - held_out, f"C0 = {C0:.4g}（前半段拟合），后半段比值上确界 {held_out:.4g}"
    ))
    return checks

def _scenario(**overrides) -> ScenarioConfig:
    data = {
        "name": "exponential-decay",
        "kind": "pde",
        "nu": 1.0,
        "background": {
            "kind": "exponential_decay",
            "cbar": 1.0,
            "shape": {"mode": 1, "amplitude": 0.2, "kind": "cos"},
            "envelope": {"kind": "exponential", "C1": 1.0, "r1": 0.5},
        },
        "initial": {"rho": {"mode": 1, "amplitude": 0.1}, "u": {"mode": 1, "amplitude": 0.05}},
        "particles": 1024,
        "grid": 256,
        "dt": 1e-3,
        "T": 30.0,
        "diag_every": 100,
    }
    data.update(overrides)
    return parse_scenario(data, "suite")

def theorem11_suite() -> list[Check]:
    config = _scenario()
    result = run_scenario(config)
    analysis = analyse_run(result.records, config, result.profile, (result.rho, result.u, result.phi))
    checks = [c for c in analysis.checks if c.name in ("neutrality", "momentum_law")]
    last = result.records[-1]
    for name in THEOREM11_NORMS:
        checks.append(_le(f"final_{name}", last.sup_norms[name], 1e-4))
        fit = analysis.fits.get(name)
        ok = fit is None or (fit.r > 0 and fit.quality >= 0.98)
        detail = "below floor" if fit is None else f"r = {fit.r:.4g}, R² = {fit.quality:.4f}"
        checks.append(_check(f"fit_{name}", ok, detail=detail))
    return checks

def _ion_scenario(**overrides) -> ScenarioConfig:
    return _scenario(name="ion-boltzmann", background={"kind": "boltzmann"}, **overrides)

def ion_suite() -> list[Check]:
    config = _ion_scenario()
    result = run_scenario(config)
    analysis = analyse_run(result.records, config, result.profile, (result.rho, result.u, result.phi))
    checks = [c for c in analysis.checks if not c.name.startswith("rate_")]
    last = result.records[-1]
    for name in SUP_NORM_NAMES:
        checks.append(_le(f"final_{name}", last.sup_norms[name], 1e-4))

    residuals = []
    for dt in (2e-3, 1e-3):
        short = run_scenario(_ion_scenario(dt=dt, T=1.0, diag_every=1))
        residuals.append(max(r.energy_dissipation_residual for r in short.records[1:]))
    ratio = residuals[0] / residuals[1]
    checks.append(_check("dissipation_second_order", 3.2 <= ratio <= 4.8, min(ratio - 3.2, 4.8 - ratio), f"比值 {ratio:.3f}"))
    return checks

def oracle_suite() -> list[Check]:
    differences = []
    for size in (2048, 4096):
        lagrangian = run_scenario(_scenario(name="oracle-lagrangian", particles=size, grid=512, T=1.0))
        eulerian = run_oracle(_scenario(name="oracle-eulerian", solver="eulerian", grid=size, T=1.0))
        differences.append(oracle_difference(lagrangian.final, eulerian.final))
    checks = [_le("oracle_sup_difference", differences[0], 5e-3)]
    ratio = differences[0] / differences[1]
    checks.append(_check("oracle_refinement", 1.5 <= ratio <= 3.0, min(ratio - 1.5, 3.0 - ratio), f"比值 {ratio:.3f}"))
    return checks

SUITES: dict[str, Callable[[], list[Check]]] = {
    "poisson": poisson_suite,
    "phaseplane": phaseplane_suite,
    "lemma": lemma_suite,
    "theorem11": theorem11_suite,
    "ion": ion_suite,
    "oracle": oracle_suite,
}

def run_suite(name: str) -> dict[str, list[Check]]:
    """运行一个套件（或 all），返回 套件名 -> 检验结果"""
    names = list(SUITES) if name == "all" else [name]
    results = {}
    for suite in names:
        cli_log.info(f"运行验证套件 {suite}")
        results[suite] = SUITES[suite]()
    return results
