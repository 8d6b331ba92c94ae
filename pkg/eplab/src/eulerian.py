"""
守恒变量 (ρ, ρu) 上的一阶 Rusanov 有限体积格式，仅作为特征粒子求解器的交叉验证。
"""
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from eplab.src import background as bg
from eplab.src.background import BackgroundProfile
from eplab.src.config import ScenarioConfig
from eplab.src.diagnostics import DiagnosticsRecord, energy_terms, sup_norm_suite
from eplab.src.errors import CFLViolated, VacuumReached
from eplab.src.fields import Field, Grid, derivative, interpolate, mean, sup_norm
from eplab.src.lagrangian import CharacteristicEnsemble, FieldSettings, solve_field, initial_fields, settings_from_config, time_loop
from eplab.src.log import solver_log
from eplab.src.phaseplane import lemma_lambda

RHO_FLOOR = 1e-6
SPEED_FLOOR = 1e-8

@dataclass(frozen=True, eq=False)
class FluidState:
    rho: Field
    m: Field
    t: float = 0.0
    phi: Field | None = None

    @property
    def u(self) -> Field:
        return self.m / self.rho

@dataclass
class OracleResult:
    records: list[DiagnosticsRecord]
    final: FluidState
    profile: BackgroundProfile
    grid: Grid

def _rusanov_flux(rho: NDArray[np.float64], m: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """界面 j+1/2 上的数值通量，F(ρ, m) = (m, m²/ρ)，局部波速 max(|u_L|, |u_R|)"""
    u = m / rho
    rho_r, m_r, u_r = np.roll(rho, -1), np.roll(m, -1), np.roll(u, -1)
    speed = np.maximum(np.abs(u), np.abs(u_r))
    flux_rho = 0.5 * (m + m_r) - 0.5 * speed * (rho_r - rho)
    flux_m = 0.5 * (m * u + m_r * u_r) - 0.5 * speed * (m_r - m)
    return flux_rho, flux_m

def step_fv(
    state: FluidState,
    p: BackgroundProfile,
    nu: float,
    dt: float,
    settings: FieldSettings = FieldSettings(),
    coupling: bool = True,
) -> FluidState:
    """
    一步 Rusanov 输运，随后分裂处理源项：阻尼用积分因子 e^{-νdt}，电场力取 t + dt/2 的背景。

    CFL 条件取绝对速度 dt <= cfl·h/max(|u|, 1e-8)，cfl 缺省 0.5；粒子求解器改用粒子间相对速度，见 lagrangian.step_coupled。

    Args:
        state (FluidState): 当前状态。
        p (BackgroundProfile): 背景。
        nu (float): 阻尼系数。
        dt (float): 时间步长。
        settings (FieldSettings): 容差与 CFL 数。
        coupling (bool): False 时关闭电场力（纯输运检验）。

    Returns:
        FluidState: 新状态。

    Raises:
        VacuumReached: 密度降到 1e-6 以下。
        CFLViolated: dt > cfl·h/max|u|。
    """
    grid = state.rho.grid
    rho, m = state.rho.values, state.m.values
    minimum = float(np.min(rho))
    if minimum <= RHO_FLOOR:
        raise VacuumReached(state.t, minimum)
    limit = settings.cfl * grid.h / max(float(np.max(np.abs(m / rho))), SPEED_FLOOR)
    if dt > limit:
        raise CFLViolated(dt, limit)

    flux_rho, flux_m = _rusanov_flux(rho, m)
    ratio = dt / grid.h
    rho_star = rho - ratio * (flux_rho - np.roll(flux_rho, 1))
    m_star = m - ratio * (flux_m - np.roll(flux_m, 1))
    minimum = float(np.min(rho_star))
    if minimum <= RHO_FLOOR:
        raise VacuumReached(state.t + dt, minimum)

    damping = np.exp(-nu * dt)
    weight = -np.expm1(-nu * dt) / nu if nu > 0 else dt
    density = Field(grid, rho_star)
    phi = state.phi
    if coupling:
        phi, _ = solve_field(p, state.t + 0.5 * dt, density, state.phi, settings)
        force = rho_star * derivative(phi).values
    else:
        force = 0.0
    return FluidState(density, Field(grid, m_star * damping - weight * force), state.t + dt, phi)

def record(state: FluidState, p: BackgroundProfile, nu: float, settings: FieldSettings = FieldSettings()) -> DiagnosticsRecord:
    rho, u = state.rho, state.u
    phi, c = solve_field(p, state.t, rho, state.phi, settings)
    energy = energy_terms(rho, u, phi, p.is_boltzmann)
    neutrality = abs(mean(c - rho))

    cbar = p.cbar
    s = 1.0 / rho.values
    w = derivative(u).values * s
    sigma = s - 1.0 / cbar
    lam = lemma_lambda(nu, cbar) if nu > 0 else 0.0
    y = 0.5 * cbar * sigma * sigma + 0.5 * w * w + lam * sigma * w
    return DiagnosticsRecord(
        t=state.t,
        sup_norms=sup_norm_suite(rho, u, phi, c, cbar),
        E=energy.total,
        C_cross=mean(u * derivative(phi)),
        momentum=mean(state.m),
        neutrality_residual=neutrality,
        energy_dissipation_residual=0.0,
        y_sup=float(np.max(y)),
        kinetic=energy.kinetic,
        electric=energy.electric,
        entropy=energy.entropy,
        phi_sup=sup_norm(phi),
        rho_min=float(np.min(rho.values)),
        rho_max=float(np.max(rho.values)),
    )

def run_oracle(config: ScenarioConfig) -> OracleResult:
    """
    与 lagrangian.run_scenario 对应的欧拉型运行，动量取守恒形式 mean(ρu)。
    """
    grid = Grid(config.grid)
    profile = bg.from_config(config.background, grid)
    rho0, u0 = initial_fields(config, grid)
    settings = settings_from_config(config)
    state = FluidState(rho0, rho0 * u0)
    solver_log.info(f"欧拉型对照运行 {config.name}：网格 {config.grid}，dt = {config.dt}，T = {config.T}")

    records, final = time_loop(
        config,
        lambda s: step_fv(s, profile, config.nu, config.dt, settings),
        lambda s: record(s, profile, config.nu, settings),
        state,
    )
    return OracleResult(records, final, profile, grid)

def oracle_difference(ensemble: CharacteristicEnsemble, state: FluidState) -> float:
    """粒子密度 1/s 与欧拉型密度在粒子位置上的最大差"""
    return float(np.max(np.abs(1.0 / ensemble.s - interpolate(state.rho, ensemble.x))))
