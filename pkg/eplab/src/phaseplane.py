"""
沿特征线的 (w, s) 常微分方程组：

    w' = -νw + 1 - c(t)s,    s' = w

及其 Lyapunov 泛函、Grönwall 界和衰减率。
"""
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from eplab.src.background import Envelope
from eplab.src.config import BackgroundConfig, ScenarioConfig
from eplab.src.diagnostics import fit_decay_rate
from eplab.src.errors import BlowUp, CFLViolated, DomainError, InsufficientData, UnsupportedVariant
from eplab.src.log import solver_log

S_FLOOR = 1e-6
GRONWALL_RTOL = 1e-6
RESONANCE_GAP = 1e-3

@dataclass(frozen=True)
class PhaseState:
    w: float
    s: float
    t: float = 0.0

@dataclass(frozen=True, eq=False)
class Trajectory:
    t: NDArray[np.float64]
    w: NDArray[np.float64]
    s: NDArray[np.float64]
    c: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.t)

    def state(self, index: int) -> PhaseState:
        return PhaseState(float(self.w[index]), float(self.s[index]), float(self.t[index]))

@dataclass(frozen=True)
class LemmaConstants:
    nu: float
    cbar: float
    B: float
    lam: float
    N: float
    r2_pred: float

@dataclass(frozen=True)
class LemmaReport:
    constants: LemmaConstants
    B_enlarged: bool
    gronwall_ok: bool
    gronwall_margin: float
    envelope_bound_ok: bool
    comparability_ok: bool
    rate: float | None
    quality: float | None
    below_floor: bool
    resonant: bool
    C0_fit: float
    passed: bool

def rhs(state: PhaseState, c: float, nu: float) -> tuple[float, float]:
    return -nu * state.w + 1.0 - c * state.s, state.w

def _sample_drive(c_of_t: Callable[[float], float], times: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.asarray(np.vectorize(c_of_t, otypes=[np.float64])(times), dtype=np.float64)

def integrate(
    initial: PhaseState,
    c_of_t: Callable[[float], float],
    nu: float,
    dt: float,
    T: float,
    c_plus: float | None = None,
    s_floor: float = S_FLOOR,
) -> Trajectory:
    """
    经典 RK4 积分，每个时间步记录一次。

    Args:
        initial (PhaseState): 初值。
        c_of_t (Callable[[float], float]): 背景 c(t)。
        nu (float): 阻尼系数。
        dt (float): 时间步长。
        T (float): 积分时长。
        c_plus (float | None): c 的上界，缺省时取采样最大值。
        s_floor (float): 爆破阈值。

    Returns:
        Trajectory: 采样轨道。

    Raises:
        BlowUp: s 降到 s_floor 以下。
        CFLViolated: dt > 0.1/max(1, ν, c_+)。
    """
    if dt <= 0 or T <= 0:
        raise ValueError(f"dt 与 T 必须为正：dt = {dt}, T = {T}")
    if initial.s <= s_floor:
        raise BlowUp(initial.t, f"初值 s0 = {initial.s} 不在经典解区域内")

    steps = int(round(T / dt))
    half_times = initial.t + 0.5 * dt * np.arange(2 * steps + 1)
    drive = _sample_drive(c_of_t, half_times)
    limit = 0.1 / max(1.0, nu, float(np.max(drive)) if c_plus is None else c_plus)
    if dt > limit * (1.0 + 1e-12):
        raise CFLViolated(dt, limit)

    w = np.empty(steps + 1)
    s = np.empty(steps + 1)
    w[0], s[0] = initial.w, initial.s
    wk, sk = initial.w, initial.s
    for k in range(steps):
        c0, c_half, c1 = drive[2 * k], drive[2 * k + 1], drive[2 * k + 2]
        k1w, k1s = -nu * wk + 1.0 - c0 * sk, wk
        w2, s2 = wk + 0.5 * dt * k1w, sk + 0.5 * dt * k1s
        k2w, k2s = -nu * w2 + 1.0 - c_half * s2, w2
        w3, s3 = wk + 0.5 * dt * k2w, sk + 0.5 * dt * k2s
        k3w, k3s = -nu * w3 + 1.0 - c_half * s3, w3
        w4, s4 = wk + dt * k3w, sk + dt * k3s
        k4w, k4s = -nu * w4 + 1.0 - c1 * s4, w4
        w_next = wk + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        s_next = sk + dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        if s_next <= s_floor:
            # 在线性插值意义下 s 穿过阈值的时刻
            t_star = half_times[2 * k] + dt * (sk - s_floor) / (sk - s_next)
            solver_log.info(f"相平面轨道在 t* ≈ {t_star:.6g} 处爆破（s -> {s_next:.3e}）")
            raise BlowUp(float(t_star), "s 降到阈值以下")
        wk, sk = w_next, s_next
        w[k + 1], s[k + 1] = wk, sk

    return Trajectory(half_times[::2].copy(), w, s, drive[::2].copy())

def closed_form_constant_c(w0: float, s0: float, nu: float, cbar: float, t: float) -> PhaseState:
    """
    c ≡ c̄ 时 s'' + νs' + c̄s = 1 的精确解，按特征根 μ² + νμ + c̄ = 0 的判别式分三种情形。
    """
    sigma0 = s0 - 1.0 / cbar
    disc = nu * nu - 4.0 * cbar
    if abs(disc) <= 1e-14 * max(nu * nu, 4.0 * cbar):
        mu = -0.5 * nu
        slope = w0 - mu * sigma0
        decay = np.exp(mu * t)
        sigma = (sigma0 + slope * t) * decay
        w = (slope + mu * (sigma0 + slope * t)) * decay
    elif disc > 0:
        root = np.sqrt(disc)
        mu1, mu2 = 0.5 * (-nu + root), 0.5 * (-nu - root)
        a = (w0 - mu2 * sigma0) / (mu1 - mu2)
        b = sigma0 - a
        sigma = a * np.exp(mu1 * t) + b * np.exp(mu2 * t)
        w = mu1 * a * np.exp(mu1 * t) + mu2 * b * np.exp(mu2 * t)
    else:
        alpha, beta = -0.5 * nu, 0.5 * np.sqrt(-disc)
        k = (w0 - alpha * sigma0) / beta
        decay = np.exp(alpha * t)
        sigma = decay * (sigma0 * np.cos(beta * t) + k * np.sin(beta * t))
        w = decay * ((alpha * sigma0 + beta * k) * np.cos(beta * t) + (alpha * k - beta * sigma0) * np.sin(beta * t))
    return PhaseState(float(w), float(sigma + 1.0 / cbar), float(t))

def lyapunov_L(state: PhaseState | Trajectory, cbar: float):
    sigma = state.s - 1.0 / cbar
    return 0.5 * cbar * sigma * sigma + 0.5 * state.w * state.w

def cross_X(state: PhaseState | Trajectory, cbar: float):
    return (state.s - 1.0 / cbar) * state.w

def combined_y(state: PhaseState | Trajectory, constants: LemmaConstants):
    return lyapunov_L(state, constants.cbar) + constants.lam * cross_X(state, constants.cbar)

def lemma_lambda(nu: float, cbar: float) -> float:
    if nu <= 0 or cbar <= 0:
        raise DomainError(f"需要 ν > 0 且 c̄ > 0：ν = {nu}, c̄ = {cbar}")
    return min(nu / (nu * nu / (2.0 * cbar) + 1.5), np.sqrt(cbar) / 2.0)

def lemma_constants(nu: float, cbar: float, B: float, r1: float | None = None) -> LemmaConstants:
    """
    λ = min{ν/(ν²/(2c̄) + 3/2), √c̄/2}，N = B(B + λ(B + 1/c̄))，振幅衰减率 min{λ/2, r1}/2。

    r1 为 None 时背景不随时间衰减到常数以外的量，取 λ/4。
    """
    if B <= 0:
        raise DomainError(f"相空间界 B 必须为正：{B}")
    lam = lemma_lambda(nu, cbar)
    N = B * (B + lam * (B + 1.0 / cbar))
    r2_pred = (lam / 2.0 if r1 is None else min(lam / 2.0, r1)) / 2.0
    return LemmaConstants(nu, cbar, B, lam, N, r2_pred)

def certified_B(rho_minus: float, M: float) -> float:
    """由 0 < ρ- <= ρ 与 |∂ₓu| <= M 得到 |s|, |w| <= max{1, M}/ρ-"""
    if rho_minus <= 0:
        raise DomainError(f"ρ- 必须为正：{rho_minus}")
    return max(1.0, M) / rho_minus

def _gronwall_source(times: NDArray[np.float64], deviation: NDArray[np.float64], rate: float) -> NDArray[np.float64]:
    """∫₀ᵗ e^{-rate(t-τ)}|c(τ) - c̄| dτ，逐段梯形公式递推"""
    integral = np.zeros_like(times)
    for k in range(1, len(times)):
        h = times[k] - times[k - 1]
        factor = np.exp(-rate * h)
        integral[k] = integral[k - 1] * factor + 0.5 * h * (deviation[k - 1] * factor + deviation[k])
    return integral

def verify_lemma(
    trajectory: Trajectory,
    constants: LemmaConstants,
    envelope: Envelope | None = None,
    amplitude: float = 0.0,
    floor: float = 1e-10,
    min_samples: int = 10,
) -> LemmaReport:
    """
    沿轨道检验 Lyapunov 机制：

    - y(t) <= y(0)e^{-λt/2} + N∫e^{-λ(t-τ)/2}|c - c̄| 逐点成立；
    - 上确界形式 y(t) <= y(0)e^{-λt/2} + 2N(c+ - c-)/λ·(e^{-λt/4} - e^{-λt/2}) + (2N/λ)|A|g(t/2)；
    - ½L <= y <= 2L；
    - √y 的拟合衰减率不低于 0.95·r2_pred。

    轨道观测到的 max(|s|, |w|) 超过 B 时，B 被放大为观测值并在报告中标记。

    Args:
        trajectory (Trajectory): RK4 轨道。
        constants (LemmaConstants): λ, N, B 等常数。
        envelope (Envelope | None): 背景包络 g，常数背景时为 None。
        amplitude (float): 驱动振幅 A，c(t) = c̄ + A·g(t)。
        floor (float): 拟合下限。
        min_samples (int): 拟合最少样本数。

    Returns:
        LemmaReport: 检验报告。
    """
    cbar, lam = constants.cbar, constants.lam
    observed = float(max(np.max(np.abs(trajectory.s)), np.max(np.abs(trajectory.w))))
    enlarged = observed > constants.B
    if enlarged:
        solver_log.warning(f"轨道上确界 {observed:.4g} 超过 B = {constants.B:.4g}，放大 B")
        constants = replace(constants, B=observed, N=observed * (observed + lam * (observed + 1.0 / cbar)))
    N = constants.N

    t = trajectory.t - trajectory.t[0]
    y = np.asarray(combined_y(trajectory, constants))
    L = np.asarray(lyapunov_L(trajectory, cbar))
    deviation = np.abs(trajectory.c - cbar)

    bound = y[0] * np.exp(-0.5 * lam * t) + N * _gronwall_source(t, deviation, 0.5 * lam)
    slack = GRONWALL_RTOL * bound + 1e-14
    gronwall_ok = bool(np.all(y <= bound + slack))
    scale = np.maximum(bound, 1e-300)
    gronwall_margin = float(np.min((bound - y) / scale))

    c_plus = max(float(np.max(trajectory.c)), cbar)
    c_minus = min(float(np.min(trajectory.c)), cbar)
    tail = np.zeros_like(t) if envelope is None else np.asarray(envelope(0.5 * t)) * abs(amplitude)
    sup_bound = (
        y[0] * np.exp(-0.5 * lam * t)
        + 2.0 * N * (c_plus - c_minus) / lam * (np.exp(-0.25 * lam * t) - np.exp(-0.5 * lam * t))
        + 2.0 * N / lam * tail
    )
    envelope_bound_ok = bool(np.all(y <= sup_bound * (1.0 + GRONWALL_RTOL) + 1e-14))
    comparability_ok = bool(np.all((0.5 * L <= y * (1.0 + 1e-12) + 1e-15) & (y <= 2.0 * L * (1.0 + 1e-12) + 1e-15)))

    r1 = envelope.r1 if envelope is not None and envelope.kind == "exponential" and amplitude != 0 else None
    resonant = r1 is not None and abs(0.5 * lam - r1) < RESONANCE_GAP
    amplitude_series = np.sqrt(np.clip(y, 0.0, None))
    if resonant:
        amplitude_series = amplitude_series / np.sqrt(1.0 + t)

    rate: float | None = None
    quality: float | None = None
    below_floor = False
    try:
        fit = fit_decay_rate(t, amplitude_series, floor=floor, min_samples=min_samples)
        rate, quality = fit.r, fit.quality
    except InsufficientData:
        below_floor = True
        solver_log.debug("√y 低于拟合下限，衰减率不作定义")

    C0_fit = float(np.max(_C0_ratio(trajectory, cbar, lam, envelope)))

    rate_ok = below_floor or (rate is not None and rate >= 0.95 * constants.r2_pred)
    passed = gronwall_ok and envelope_bound_ok and comparability_ok and rate_ok
    solver_log.debug(
        f"Lyapunov 检验：Grönwall {gronwall_ok}，上确界形式 {envelope_bound_ok}，拟合率 {rate}，预测 {constants.r2_pred:.4g}"
    )
    return LemmaReport(
        constants=constants,
        B_enlarged=enlarged,
        gronwall_ok=gronwall_ok,
        gronwall_margin=gronwall_margin,
        envelope_bound_ok=envelope_bound_ok,
        comparability_ok=comparability_ok,
        rate=rate,
        quality=quality,
        below_floor=below_floor,
        resonant=resonant,
        C0_fit=C0_fit,
        passed=passed,
    )

def amplitude_squared(trajectory: Trajectory, cbar: float) -> NDArray[np.float64]:
    """|s - 1/c̄|² + w²"""
    return (trajectory.s - 1.0 / cbar) ** 2 + trajectory.w ** 2

def _C0_ratio(trajectory: Trajectory, cbar: float, lam: float, envelope: Envelope | None) -> NDArray[np.float64]:
    """|s - 1/c̄|² + w² 与 e^{-λt/4} + g(t/2) 之比，r₀ = λ/4"""
    t = trajectory.t - trajectory.t[0]
    g_half = np.zeros_like(t) if envelope is None else np.asarray(envelope(0.5 * t))
    return amplitude_squared(trajectory, cbar) / (np.exp(-0.25 * lam * t) + g_half)

def held_out_C0(
    trajectory: Trajectory,
    cbar: float,
    lam: float,
    envelope: Envelope | None,
    split: float = 0.5,
) -> tuple[float, float]:
    """
    只用 t <= split·T 的样本拟合 C₀，再在其余样本上检验 |s - 1/c̄|² + w² <= C₀(e^{-λt/4} + g(t/2))。

    Returns:
        tuple[float, float]: (拟合的 C₀, 留出样本上比值的最大值)。

    Raises:
        InsufficientData: 任一侧没有样本。
    """
    t = trajectory.t - trajectory.t[0]
    ratio = _C0_ratio(trajectory, cbar, lam, envelope)
    fitted = t <= split * t[-1]
    if fitted.all() or not fitted.any():
        raise InsufficientData(min(int(fitted.sum()), int((~fitted).sum())), 1)
    return float(np.max(ratio[fitted])), float(np.max(ratio[~fitted]))

def drive_from_config(config: BackgroundConfig) -> tuple[Callable[[float], float], Envelope | None, float]:
    """
    由背景配置得到相平面驱动 c(t) = c̄ + A·g(t)，A 取形状振幅。

    Returns:
        tuple: (c(t), 包络或 None, 振幅 A)。
    """
    match config.kind:
        case "boltzmann":
            raise UnsupportedVariant(config.kind, "phaseplane")
        case "constant":
            cbar = config.cbar
            return (lambda t: cbar), None, 0.0
    envelope = Envelope(config.envelope.kind, config.envelope.C1, config.envelope.r1, config.envelope.p)
    amplitude, cbar = config.shape.amplitude, config.cbar
    if cbar - abs(amplitude) * envelope(0.0) <= 0:
        raise DomainError(f"驱动 c(t) 会变为非正：c̄ = {cbar}, A·g(0) = {amplitude * envelope(0.0)}")
    return (lambda t: cbar + amplitude * envelope(t)), envelope, amplitude

def critical_w0(
    s0: float,
    nu: float,
    cbar: float,
    T: float = 20.0,
    dt: float = 1e-3,
    lo: float = -50.0,
    hi: float = 0.0,
    tol: float = 1e-6,
) -> float:
    """
    二分搜索常数背景下的爆破阈值：w0 < 返回值时轨道在 [0, T] 内爆破。

    Raises:
        DomainError: 区间端点不能把爆破与不爆破分开。
    """
    c_plus = cbar

    def blows_up(w0: float) -> bool:
        try:
            integrate(PhaseState(w0, s0), lambda t: cbar, nu, dt, T, c_plus=c_plus)
        except BlowUp:
            return True
        return False

    if blows_up(hi) or not blows_up(lo):
        raise DomainError(f"区间 [{lo}, {hi}] 没有包住爆破阈值")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if blows_up(mid):
            lo = mid
        else:
            hi = mid
    solver_log.info(f"s0 = {s0}, ν = {nu}, c̄ = {cbar} 的爆破阈值 w0* ≈ {hi:.6g}")
    return hi

@dataclass(frozen=True)
class PhaseplaneResult:
    trajectory: Trajectory
    constants: LemmaConstants
    report: LemmaReport

def run_phaseplane(config: ScenarioConfig) -> PhaseplaneResult:
    """相平面场景：积分轨道并检验 Lyapunov 衰减机制"""
    c_of_t, envelope, amplitude = drive_from_config(config.background)
    cbar = config.background.cbar
    initial = PhaseState(config.phase.w0, config.phase.s0)
    solver_log.info(f"相平面场景 {config.name}：ν = {config.nu}, c̄ = {cbar}, (w0, s0) = ({initial.w}, {initial.s})")
    trajectory = integrate(initial, c_of_t, config.nu, config.dt, config.T, s_floor=config.numerics.s_floor)

    B = config.phase.B
    if B is None:
        B = float(max(np.max(np.abs(trajectory.s)), np.max(np.abs(trajectory.w))))
    r1 = envelope.r1 if envelope is not None and envelope.kind == "exponential" and amplitude != 0 else None
    constants = lemma_constants(config.nu, cbar, B, r1)
    report = verify_lemma(
        trajectory, constants, envelope, amplitude, floor=config.fit.floor, min_samples=config.fit.min_samples
    )
    return PhaseplaneResult(trajectory, report.constants, report)
