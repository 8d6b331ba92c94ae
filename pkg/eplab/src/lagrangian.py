"""
特征粒子求解器：每个粒子沿特征线携带 (x, u, s, w)，每个 RK4 子步重新求解场方程。
"""
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline, PchipInterpolator

from eplab.src import background as bg
from eplab.src.background import BackgroundProfile
from eplab.src.config import ScenarioConfig
from eplab.src.diagnostics import DiagnosticsRecord, attach_dissipation_residuals, energy_terms, sup_norm_suite
from eplab.src.errors import BlowUp, CFLViolated, CrossingDetected, VacuumInitialData
from eplab.src.fields import (
    Field, Grid, antiderivative_at, derivative, interpolate, mean, sup_norm, trig_interpolate,
)
from eplab.src.log import solver_log
from eplab.src.phaseplane import lemma_lambda
from eplab.src.poisson import NEWTON_MAX_ITER, NEWTON_TOL, NEUTRALITY_TOL, solve_linear_poisson, solve_poisson_boltzmann

MIN_PARTICLES = 64

@dataclass(frozen=True, eq=False)
class CharacteristicEnsemble:
    t: float
    x: NDArray[np.float64]
    u: NDArray[np.float64]
    s: NDArray[np.float64]
    w: NDArray[np.float64]
    xi: NDArray[np.float64]
    rho0: NDArray[np.float64]
    mass_per_gap: NDArray[np.float64]
    phi: Field | None = None

    @property
    def m(self) -> int:
        return len(self.x)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.mass_per_gap))

@dataclass(frozen=True)
class FieldSettings:
    neutrality_tol: float = NEUTRALITY_TOL
    newton_tol: float = NEWTON_TOL
    newton_max_iter: int = NEWTON_MAX_ITER
    s_floor: float = 1e-6
    cfl: float = 0.5

@dataclass
class RunResult:
    records: list[DiagnosticsRecord]
    final: CharacteristicEnsemble
    profile: BackgroundProfile
    grid: Grid
    rho: Field | None = None
    u: Field | None = None
    phi: Field | None = None

def initial_fields(config: ScenarioConfig, grid: Grid) -> tuple[Field, Field]:
    """
    ρ₀ = base + amplitude·cos(2π·mode·x)，u₀ = offset + amplitude·sin(2π·mode·x)。

    base 缺省时取 c̄（离子模型取 1），使中性条件成立。
    """
    rho_cfg, u_cfg = config.initial.rho, config.initial.u
    base = rho_cfg.base
    if base is None:
        base = 1.0 if config.background.kind == "boltzmann" else config.background.cbar
    rho0 = Field.from_function(grid, lambda x: base + rho_cfg.amplitude * np.cos(2.0 * np.pi * rho_cfg.mode * x))
    u0 = Field.from_function(grid, lambda x: u_cfg.offset + u_cfg.amplitude * np.sin(2.0 * np.pi * u_cfg.mode * x))
    return rho0, u0

def init_ensemble(rho0: Field, u0: Field, m: int) -> CharacteristicEnsemble:
    """
    在环面上均匀放置 m 个粒子。

    Args:
        rho0 (Field): 初始密度，逐点为正。
        u0 (Field): 初始速度。
        m (int): 粒子数，>= 64 的偶数。

    Returns:
        CharacteristicEnsemble: t = 0 的粒子集合。

    Raises:
        VacuumInitialData: ρ₀ 出现非正值。
    """
    if m < MIN_PARTICLES or m % 2:
        raise ValueError(f"粒子数必须是 >= {MIN_PARTICLES} 的偶数，当前为 {m}")
    minimum = float(np.min(rho0.values))
    if minimum <= 0:
        raise VacuumInitialData(minimum)

    x = Grid(m).nodes.copy()
    rho_at = trig_interpolate(rho0, x)
    if np.min(rho_at) <= 0:
        raise VacuumInitialData(float(np.min(rho_at)))
    u_at = trig_interpolate(u0, x)
    du_at = trig_interpolate(derivative(u0), x)
    edges = antiderivative_at(rho0, np.append(x, x[0] + 1.0))
    return CharacteristicEnsemble(
        t=0.0,
        x=x,
        u=u_at,
        s=1.0 / rho_at,
        w=du_at / rho_at,
        xi=x.copy(),
        rho0=rho_at,
        mass_per_gap=np.diff(edges),
    )

def _check_order(x: NDArray[np.float64]) -> NDArray[np.float64]:
    gaps = np.append(np.diff(x), x[0] + 1.0 - x[-1])
    bad = np.nonzero(gaps <= 0)[0]
    if bad.size:
        raise CrossingDetected(int(bad[0]))
    return gaps

def reconstruct_density(e: CharacteristicEnsemble, g: Grid, x: NDArray[np.float64] | None = None) -> Field:
    """
    守恒型密度重构：累积质量在粒子处精确，PCHIP 单调插值后取网格单元平均。

    Raises:
        CrossingDetected: 粒子的循环顺序被破坏。
    """
    x = e.x if x is None else x
    _check_order(x)
    shift = np.floor(x[0] + 0.5)
    x = x - shift
    total = e.total_mass
    cumulative = np.concatenate(([0.0], np.cumsum(e.mass_per_gap[:-1])))
    periods = np.arange(-2, 2)
    knots = np.concatenate([x + p for p in periods] + [[x[0] + 2.0]])
    mass = np.concatenate([cumulative + p * total for p in periods] + [[2.0 * total]])
    primitive = PchipInterpolator(knots, mass, extrapolate=False)
    faces = np.append(g.nodes - 0.5 * g.h, 0.5 - 0.5 * g.h)
    return Field(g, np.diff(primitive(faces)) / g.h)

def velocity_field(e: CharacteristicEnsemble, g: Grid, x: NDArray[np.float64] | None = None, u: NDArray[np.float64] | None = None) -> Field:
    """通过粒子的周期三次样条把速度搬到网格上"""
    x = e.x if x is None else x
    u = e.u if u is None else u
    start = x[0]
    spline = CubicSpline(np.append(x, start + 1.0), np.append(u, u[0]), bc_type="periodic")
    return Field(g, spline(start + np.mod(g.nodes - start, 1.0)))

def solve_field(
    profile: BackgroundProfile,
    t: float,
    rho: Field,
    guess: Field | None,
    settings: FieldSettings,
) -> tuple[Field, Field]:
    """返回 (φ, c)，c 为网格上的背景（离子模型为 e^φ）"""
    if profile.is_boltzmann:
        phi = solve_poisson_boltzmann(rho, guess, tol=settings.newton_tol, max_iter=settings.newton_max_iter)
        return phi, phi.map(np.exp)
    c = bg.evaluate_field(profile, t, rho.grid)
    return solve_linear_poisson(rho, c, settings.neutrality_tol), c

def _blowup_estimate(e: CharacteristicEnsemble) -> float:
    closing = e.w < 0
    if not np.any(closing):
        return e.t
    return e.t + float(np.min(e.s[closing] / -e.w[closing]))

def step_coupled(
    e: CharacteristicEnsemble,
    p: BackgroundProfile,
    nu: float,
    dt: float,
    grid: Grid,
    settings: FieldSettings = FieldSettings(),
) -> CharacteristicEnsemble:
    """
    耦合系统的一个 RK4 步，每个子步重构密度并重新求解场方程：

        x' = u,  u' = -νu - ∂ₓφ(x),  w' = -νw + 1 - c(t, x)s,  s' = w

    步长条件按相邻粒子的相对速度计算 dt <= cfl·gap/closing speed，不满足即间隙将在本步内闭合，报告为 BlowUp。

    Args:
        e (CharacteristicEnsemble): 当前粒子集合。
        p (BackgroundProfile): 背景。
        nu (float): 阻尼系数。
        dt (float): 时间步长。
        grid (Grid): 场方程网格。
        settings (FieldSettings): 容差与阈值。

    Returns:
        CharacteristicEnsemble: 新的粒子集合。

    Raises:
        CFLViolated: dt > 0.1/ν。
        BlowUp: 粒子间隙将在本步内闭合，或 s 降到阈值以下。
    """
    if nu > 0 and dt > 0.1 / nu * (1.0 + 1e-12):
        raise CFLViolated(dt, 0.1 / nu)
    gaps = _check_order(e.x)
    relative = np.append(np.diff(e.u), e.u[0] - e.u[-1])
    closing = relative < 0
    if np.any(closing):
        limit = settings.cfl * float(np.min(gaps[closing] / -relative[closing]))
        if dt > limit:
            t_star = _blowup_estimate(e)
            solver_log.info(f"t = {e.t:.6g} 时粒子间隙即将闭合（CFL 上限 {limit:.3e}）")
            raise BlowUp(t_star, "特征线即将相交")

    phi_guess = e.phi

    def stage(t: float, x: NDArray[np.float64], u: NDArray[np.float64], w: NDArray[np.float64], s: NDArray[np.float64]):
        nonlocal phi_guess
        try:
            rho = reconstruct_density(e, grid, x)
        except CrossingDetected as exc:
            raise BlowUp(_blowup_estimate(e), "特征线相交") from exc
        phi, _ = solve_field(p, t, rho, phi_guess, settings)
        phi_guess = phi
        dphi = interpolate(derivative(phi), x)
        if p.is_boltzmann:
            c_at = np.exp(interpolate(phi, x))
        else:
            c_at = bg.evaluate(p, t, x)
        return u, -nu * u - dphi, -nu * w + 1.0 - c_at * s, w, phi

    t0 = e.t
    k1 = stage(t0, e.x, e.u, e.w, e.s)
    k2 = stage(t0 + 0.5 * dt, *(v + 0.5 * dt * k for v, k in zip((e.x, e.u, e.w, e.s), k1[:4])))
    k3 = stage(t0 + 0.5 * dt, *(v + 0.5 * dt * k for v, k in zip((e.x, e.u, e.w, e.s), k2[:4])))
    k4 = stage(t0 + dt, *(v + dt * k for v, k in zip((e.x, e.u, e.w, e.s), k3[:4])))
    x, u, w, s = (
        v + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for v, a, b, c, d in zip((e.x, e.u, e.w, e.s), k1[:4], k2[:4], k3[:4], k4[:4])
    )

    low = s <= settings.s_floor
    if np.any(low):
        fraction = (e.s[low] - settings.s_floor) / (e.s[low] - s[low])
        t_star = t0 + dt * float(np.min(fraction))
        solver_log.info(f"粒子比容降到阈值以下，t* ≈ {t_star:.6g}")
        raise BlowUp(t_star, "比容 s 降到阈值以下")
    return replace(e, t=t0 + dt, x=x, u=u, w=w, s=s, phi=k4[4])

def label_momentum(e: CharacteristicEnsemble) -> float:
    """∫u dx = ∫u(ξ)∂_ξx(ξ) dξ，x - ξ 关于 ξ 周期，按标签网格谱求导"""
    label_grid = Grid(e.m)
    displacement = Field(label_grid, e.x - e.xi)
    return float(np.mean(e.u * (1.0 + derivative(displacement).values)))

def record(
    e: CharacteristicEnsemble,
    p: BackgroundProfile,
    nu: float,
    grid: Grid,
    settings: FieldSettings = FieldSettings(),
) -> tuple[DiagnosticsRecord, Field, Field, Field]:
    """
    当前时刻的诊断记录。

    ρ 与 ∂ₓu 的上确界取自粒子（ρ = 1/s，∂ₓu = w/s），其余取自网格。
    """
    rho = reconstruct_density(e, grid)
    u = velocity_field(e, grid)
    phi, c = solve_field(p, e.t, rho, e.phi, settings)
    cbar = p.cbar
    norms = sup_norm_suite(rho, u, phi, c, cbar)
    norms["rho_minus_cbar"] = float(np.max(np.abs(1.0 / e.s - cbar)))
    norms["u"] = float(np.max(np.abs(e.u)))
    norms["dx_u"] = float(np.max(np.abs(e.w / e.s)))

    # ∫ρu² 在标签空间求积：ρ dx = ρ₀ dξ
    energy = energy_terms(rho, u, phi, p.is_boltzmann, kinetic=float(np.mean(e.rho0 * e.u * e.u)))
    if p.is_boltzmann:
        neutrality = abs(mean(phi.map(np.exp) - rho))
    else:
        neutrality = abs(mean(rho - c))

    sigma = e.s - 1.0 / cbar
    lam = lemma_lambda(nu, cbar) if nu > 0 else 0.0
    y = 0.5 * cbar * sigma * sigma + 0.5 * e.w * e.w + lam * sigma * e.w

    diag = DiagnosticsRecord(
        t=e.t,
        sup_norms=norms,
        E=energy.total,
        C_cross=mean(u * derivative(phi)),
        momentum=label_momentum(e),
        neutrality_residual=neutrality,
        energy_dissipation_residual=0.0,
        y_sup=float(np.max(y)),
        kinetic=energy.kinetic,
        electric=energy.electric,
        entropy=energy.entropy,
        phi_sup=sup_norm(phi),
        rho_min=float(np.min(1.0 / e.s)),
        rho_max=float(np.max(1.0 / e.s)),
    )
    return diag, rho, u, phi

def settings_from_config(config: ScenarioConfig) -> FieldSettings:
    n = config.numerics
    return FieldSettings(n.neutrality_tol, n.newton_tol, n.newton_max_iter, n.s_floor, n.cfl)

def time_loop(
    config: ScenarioConfig,
    advance: Callable[[object], object],
    snapshot: Callable[[object], DiagnosticsRecord],
    state: object,
) -> tuple[list[DiagnosticsRecord], object]:
    """固定步长推进到 T，每 diag_every 步以及最后一步记录诊断"""
    steps = int(round(config.T / config.dt))
    records = [snapshot(state)]
    try:
        for n in range(1, steps + 1):
            state = advance(state)
            if n % config.diag_every == 0 or n == steps:
                records.append(snapshot(state))
                solver_log.debug(f"第 {n}/{steps} 步：E = {records[-1].E:.6e}")
    except BlowUp as e:
        e.records = attach_dissipation_residuals(records, config.nu)
        raise
    return attach_dissipation_residuals(records, config.nu), state

def run_scenario(config: ScenarioConfig) -> RunResult:
    """
    运行 PDE 场景（特征粒子求解器）。

    Args:
        config (ScenarioConfig): 场景配置。

    Returns:
        RunResult: 诊断时间序列与末态。

    Raises:
        BlowUp: 经典解破裂，异常上带有破裂前的诊断序列。
    """
    grid = Grid(config.grid)
    profile = bg.from_config(config.background, grid)
    rho0, u0 = initial_fields(config, grid)
    settings = settings_from_config(config)
    ensemble = init_ensemble(rho0, u0, config.particles)
    solver_log.info(
        f"场景 {config.name}：粒子 {config.particles}，网格 {config.grid}，dt = {config.dt}，T = {config.T}，"
        f"背景 {profile.kind.value}"
    )

    latest: dict[str, Field] = {}

    def snapshot(state: CharacteristicEnsemble) -> DiagnosticsRecord:
        diag, rho, u, phi = record(state, profile, config.nu, grid, settings)
        latest.update(rho=rho, u=u, phi=phi)
        return diag

    def advance(state: CharacteristicEnsemble) -> CharacteristicEnsemble:
        return step_coupled(state, profile, config.nu, config.dt, grid, settings)

    records, final = time_loop(config, advance, snapshot, ensemble)
    solver_log.info(f"场景 {config.name} 完成：t = {final.t:.6g}，E = {records[-1].E:.6e}")
    return RunResult(records, final, profile, grid, latest.get("rho"), latest.get("u"), latest.get("phi"))
