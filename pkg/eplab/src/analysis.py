"""
把一次 PDE 运行的诊断序列整理成衰减率拟合、常数与检验结果。
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from eplab.src import background as bg
from eplab.src.background import BackgroundKind, BackgroundProfile
from eplab.src.config import ScenarioConfig
from eplab.src.diagnostics import (
    SUP_NORM_NAMES, THEOREM11_NORMS, Check, DiagnosticsRecord, FitResult,
    boltzmann_deviation_bound_check, fit_decay_rate, ion_checks, ion_constants, momentum_check,
    norm_chain_checks,
)
from eplab.src.errors import DomainError, InsufficientData
from eplab.src.fields import Field
from eplab.src.log import diag_log
from eplab.src.phaseplane import certified_B, lemma_constants

MOMENTUM_TOL = 1e-6
QUALITATIVE_LEVEL = 1e-3
RATE_FRACTION = 0.95

@dataclass
class Analysis:
    constants: dict[str, float] = field(default_factory=dict)
    fits: dict[str, FitResult | None] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    predicted_rate: float | None = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

def fit_norms(records: list[DiagnosticsRecord], names: tuple[str, ...], config: ScenarioConfig) -> dict[str, FitResult | None]:
    """对每个范数拟合衰减率；样本不足（已低于下限）时记为 None"""
    times = np.array([r.t for r in records])
    fits: dict[str, FitResult | None] = {}
    for name in names:
        values = np.array([r.sup_norms[name] for r in records])
        try:
            fits[name] = fit_decay_rate(
                times, values, floor=config.fit.floor, burn_in=config.fit.burn_in, min_samples=config.fit.min_samples
            )
        except InsufficientData:
            fits[name] = None
            diag_log.debug(f"{name} 低于拟合下限，不拟合衰减率")
    return fits

def _rate_checks(fits: dict[str, FitResult | None], predicted: float) -> list[Check]:
    checks = []
    for name, fit in fits.items():
        if fit is None:
            checks.append(Check(f"rate_{name}", True, 0.0, "below floor"))
            continue
        target = RATE_FRACTION * predicted
        checks.append(Check(f"rate_{name}", fit.r >= target, fit.r - target, f"r = {fit.r:.4g}, 预测 {predicted:.4g}"))
    return checks

def analyse_run(
    records: list[DiagnosticsRecord],
    config: ScenarioConfig,
    profile: BackgroundProfile,
    final: tuple[Field, Field, Field] | None = None,
    momentum_law: bool = True,
) -> Analysis:
    """
    由诊断序列计算拟合、常数和检验。

    Args:
        records (list[DiagnosticsRecord]): 诊断序列。
        config (ScenarioConfig): 场景配置。
        profile (BackgroundProfile): 背景。
        final (tuple | None): 末态网格函数 (ρ, u, φ)，用于范数转换不等式链。
        momentum_law (bool): 是否检验 m(t) = m(0)e^{-νt}（仅对 ∫u dx 成立）。

    Returns:
        Analysis: 分析结果。
    """
    analysis = Analysis()
    if not records:
        return analysis
    nu = config.nu
    rho_minus = min(r.rho_min for r in records)
    rho_plus = max(r.rho_max for r in records)
    M = max(r.sup_norms["dx_u"] for r in records)
    analysis.constants.update(rho_minus=rho_minus, rho_plus=rho_plus, M=M)
    analysis.constants["max_dissipation_residual"] = max(r.energy_dissipation_residual for r in records)

    tol = config.numerics.neutrality_tol
    worst = max(r.neutrality_residual for r in records)
    analysis.checks.append(Check("neutrality", worst <= tol, tol - worst, f"max |mean(ρ - c)| = {worst:.3e}"))

    if momentum_law:
        report = momentum_check([r.t for r in records], [r.momentum for r in records], nu)
        analysis.checks.append(
            Check("momentum_law", report.max_deviation <= MOMENTUM_TOL, MOMENTUM_TOL - report.max_deviation,
                  f"max |m(t) - m(0)e^(-νt)| = {report.max_deviation:.3e}")
        )

    if profile.is_boltzmann:
        analysis.fits = fit_norms(records, SUP_NORM_NAMES, config)
        try:
            constants = ion_constants(nu, rho_minus, rho_plus, M, records[0].E)
        except DomainError as e:
            diag_log.warning(f"无法计算离子模型常数：{e}")
            return analysis
        analysis.constants.update({k: v for k, v in asdict(constants).items() if k not in analysis.constants})
        # 范数由 E^{1/2} 控制，预测率取能量率的一半
        analysis.predicted_rate = constants.rate_pred / 2.0
        analysis.checks.extend(ion_checks(records, constants))
        if final is not None:
            _, _, phi = final
            analysis.checks.extend(boltzmann_deviation_bound_check(phi, records[-1].E, records[0].E))
        analysis.checks.extend(_rate_checks(analysis.fits, analysis.predicted_rate))
        return analysis

    analysis.fits = fit_norms(records, THEOREM11_NORMS, config)
    if final is not None:
        rho, u, phi = final
        c = bg.evaluate_field(profile, records[-1].t, rho.grid)
        analysis.checks.extend(norm_chain_checks(rho, u, phi, c, profile.cbar, records[-1].momentum))

    if profile.kind is BackgroundKind.GENERAL_DECAY:
        for name in THEOREM11_NORMS:
            level = records[-1].sup_norms[name]
            analysis.checks.append(Check(f"decay_{name}", level < QUALITATIVE_LEVEL, QUALITATIVE_LEVEL - level, f"{level:.3e}"))
        return analysis

    if nu <= 0:
        diag_log.warning("ν = 0 时不计算 Lyapunov 常数")
        return analysis
    constants = lemma_constants(nu, profile.cbar, certified_B(rho_minus, M), profile.decay_rate)
    analysis.constants.update(
        cbar=constants.cbar, B=constants.B, **{"lambda": constants.lam}, N=constants.N, r2_pred=constants.r2_pred
    )
    analysis.predicted_rate = constants.r2_pred
    analysis.checks.extend(_rate_checks(analysis.fits, constants.r2_pred))
    return analysis
