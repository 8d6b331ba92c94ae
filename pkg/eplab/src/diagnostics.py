"""
衰减估计用到的泛函、常数与不等式的数值版本，以及衰减率拟合。
"""
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from eplab.src.errors import DomainError, InsufficientData
from eplab.src.fields import Field, derivative, l1_norm, l2_norm, mean, sup_norm
from eplab.src.log import diag_log

SUP_NORM_NAMES: tuple[str, ...] = ("rho_minus_cbar", "u", "dx_u", "dx_phi", "dxx_phi", "exp_phi_minus_1")
THEOREM11_NORMS: tuple[str, ...] = SUP_NORM_NAMES[:5]

CHECK_RTOL = 1e-8

@dataclass(frozen=True)
class IonConstants:
    nu: float
    rho_minus: float
    rho_plus: float
    M: float
    E0: float
    Lambda: float
    lambda_ion: float
    A: float
    kappa: float
    rate_pred: float
    Cstar: float

@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    sup_norms: dict[str, float]
    E: float
    C_cross: float
    momentum: float
    neutrality_residual: float
    energy_dissipation_residual: float
    y_sup: float
    kinetic: float = 0.0
    electric: float = 0.0
    entropy: float = 0.0
    phi_sup: float = 0.0
    rho_min: float = 0.0
    rho_max: float = 0.0

    def __post_init__(self) -> None:
        values = [self.t, self.E, self.C_cross, self.momentum, self.neutrality_residual,
                  self.energy_dissipation_residual, self.y_sup, *self.sup_norms.values()]
        if not np.all(np.isfinite(values)):
            raise ValueError(f"t = {self.t} 的诊断记录含有非有限值")
        if any(v < 0 for v in self.sup_norms.values()):
            raise ValueError("上确界范数不能为负")

    @staticmethod
    def columns() -> list[str]:
        names = ["t"] + [f"sup_{name}" for name in SUP_NORM_NAMES]
        names += [f.name for f in fields(DiagnosticsRecord) if f.name not in ("t", "sup_norms")]
        return names

    def row(self) -> list[float]:
        values = [self.t] + [self.sup_norms.get(name, 0.0) for name in SUP_NORM_NAMES]
        values += [getattr(self, f.name) for f in fields(DiagnosticsRecord) if f.name not in ("t", "sup_norms")]
        return values

@dataclass(frozen=True)
class FitResult:
    C: float
    r: float
    quality: float
    samples: int
    t_start: float

    @property
    def low_quality(self) -> bool:
        return self.quality < 0.9

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""

@dataclass(frozen=True)
class MomentumReport:
    m0: float
    max_deviation: float
    predicted: list[float] = field(default_factory=list)

def entropy_density(phi: Field) -> Field:
    """e^φ(φ-1) + 1，s log s - s + 1 在 s = e^φ 处的值，恒非负"""
    return phi.map(lambda v: np.exp(v) * (v - 1.0) + 1.0)

@dataclass(frozen=True)
class EnergyTerms:
    kinetic: float
    electric: float
    entropy: float

    @property
    def total(self) -> float:
        return 0.5 * self.kinetic + self.electric + self.entropy

def energy_terms(rho: Field, u: Field, phi: Field, entropy: bool = True, kinetic: float | None = None) -> EnergyTerms:
    """
    自由能的三项：∫ρu²、∫½(∂ₓφ)² 与 ∫e^φ(φ-1) + 1。

    Args:
        rho (Field): 密度。
        u (Field): 速度。
        phi (Field): 势。
        entropy (bool): 是否计入熵项（线性背景模型取 False）。
        kinetic (float | None): 已知的 ∫ρu²（例如粒子标签空间求积），缺省时在网格上计算。

    Returns:
        EnergyTerms: 各项与总和。
    """
    dphi = derivative(phi)
    return EnergyTerms(
        kinetic=mean(rho * u * u) if kinetic is None else kinetic,
        electric=mean(0.5 * dphi * dphi),
        entropy=mean(entropy_density(phi)) if entropy else 0.0,
    )

def free_energy(rho: Field, u: Field, phi: Field, entropy: bool = True) -> float:
    """自由能 ∫ ½ρu² + ½(∂ₓφ)² + e^φ(φ-1) + 1"""
    return energy_terms(rho, u, phi, entropy).total

def energy_dissipation_residual(previous: DiagnosticsRecord, current: DiagnosticsRecord, nu: float) -> float:
    """|(E₂ - E₁)/Δt + ν·(∫ρu² 的中点值)|"""
    dt = current.t - previous.t
    if dt <= 0:
        raise ValueError("诊断记录必须按时间递增")
    return abs((current.E - previous.E) / dt + nu * 0.5 * (previous.kinetic + current.kinetic))

def attach_dissipation_residuals(records: Sequence[DiagnosticsRecord], nu: float) -> list[DiagnosticsRecord]:
    """为每条记录填入与前一条记录之间的耗散律残差（首条为 0）"""
    result = list(records[:1])
    for previous, current in zip(records, records[1:]):
        result.append(replace(current, energy_dissipation_residual=energy_dissipation_residual(previous, current, nu)))
    return result

def ion_constants(nu: float, rho_minus: float, rho_plus: float, M: float, E0: float) -> IonConstants:
    """
    离子模型衰减估计的显式常数 Λ, λ, A, κ, C*。

    Raises:
        DomainError: ρ- 不在 (0, 1] 中，或其它参数越界。
    """
    if not 0 < rho_minus <= 1:
        raise DomainError(f"需要 0 < ρ- <= 1，当前 ρ- = {rho_minus}")
    if rho_plus < rho_minus or M < 0 or E0 < 0 or nu <= 0:
        raise DomainError(f"参数越界：ρ+ = {rho_plus}, M = {M}, E0 = {E0}, ν = {nu}")
    Lambda = (M + nu) ** 2 / rho_minus + (1.0 / rho_minus + rho_plus)
    lambda_ion = min(nu / Lambda, rho_minus / 2.0)
    A = float(np.sqrt(2.0 * E0))
    kappa = lambda_ion * float(np.exp(-3.0 * A))
    return IonConstants(
        nu=nu,
        rho_minus=rho_minus,
        rho_plus=rho_plus,
        M=M,
        E0=E0,
        Lambda=Lambda,
        lambda_ion=lambda_ion,
        A=A,
        kappa=kappa,
        rate_pred=2.0 * kappa / 3.0,
        Cstar=float(np.sqrt(2.0) * np.exp(A)),
    )

def sup_norm_suite(rho: Field, u: Field, phi: Field, c: Field, cbar: float) -> dict[str, float]:
    """
    元组 (ρ-c̄, u, ∂ₓu, ∂ₓφ, ∂²ₓφ) 与 e^φ-1 的上确界范数。

    ∂²ₓφ 按场方程取为 ρ - c。
    """
    return {
        "rho_minus_cbar": sup_norm(rho - cbar),
        "u": sup_norm(u),
        "dx_u": sup_norm(derivative(u)),
        "dx_phi": sup_norm(derivative(phi)),
        "dxx_phi": sup_norm(rho - c),
        "exp_phi_minus_1": sup_norm(phi.map(np.expm1)),
    }

def norm_chain_checks(rho: Field, u: Field, phi: Field, c: Field, cbar: float, momentum: float) -> list[Check]:
    """
    把逐点衰减转化为范数衰减时用到的不等式链。
    """
    source = rho - c
    rho_plus = float(np.max(rho.values))
    du = derivative(u)
    specific = Field(rho.grid, 1.0 / rho.values)
    checks = [
        ("sobolev_dx_phi", sup_norm(derivative(phi)), l1_norm(source)),
        ("holder_dxx_phi", l1_norm(source), sup_norm(source)),
        ("density_conversion", sup_norm(rho - cbar), rho_plus * cbar * sup_norm(specific - 1.0 / cbar)),
        ("gradient_conversion", sup_norm(du), rho_plus * sup_norm(du * specific)),
        ("poincare_u", l2_norm(u), sup_norm(du) + abs(momentum)),
        ("u_sup_by_l2", sup_norm(u), l2_norm(u) + sup_norm(du)),
    ]
    return [_le_check(name, lhs, rhs) for name, lhs, rhs in checks]

def _le_check(name: str, lhs: float, rhs: float, allowance: float = 0.0) -> Check:
    slack = CHECK_RTOL * max(abs(rhs), 1e-300) + allowance
    return Check(name, bool(lhs <= rhs + slack), float(rhs - lhs), f"{lhs:.6e} <= {rhs:.6e}")

def momentum_check(times: ArrayLike, momenta: ArrayLike, nu: float) -> MomentumReport:
    """检查 m(t) = m(0)e^{-νt}"""
    t = np.asarray(times, dtype=np.float64)
    m = np.asarray(momenta, dtype=np.float64)
    if m.size == 0:
        return MomentumReport(0.0, 0.0)
    predicted = m[0] * np.exp(-nu * (t - t[0]))
    return MomentumReport(float(m[0]), float(np.max(np.abs(m - predicted))), predicted.tolist())

def fit_decay_rate(
    times: ArrayLike,
    values: ArrayLike,
    floor: float = 1e-10,
    burn_in: float | None = None,
    min_samples: int = 10,
) -> FitResult:
    """
    在 (t, log value) 上做最小二乘直线拟合，r = -斜率。

    拟合窗口从 burn_in 开始（缺省为最大值之后首次降到一半的时刻，从未降到一半则从头开始），
    到数值首次跌破 floor 为止。

    Args:
        times (ArrayLike): 采样时间。
        values (ArrayLike): 非负样本。
        floor (float): 下限，低于该值的样本视为噪声。
        burn_in (float | None): 拟合起始时间。
        min_samples (int): 最少样本数。

    Returns:
        FitResult: (C, r, R²) 及窗口信息。

    Raises:
        InsufficientData: 可用样本不足。
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.abs(np.asarray(values, dtype=np.float64))
    if t.size == 0:
        raise InsufficientData(0, min_samples)
    if burn_in is None:
        peak = int(np.argmax(v))
        below = np.nonzero(v[peak:] < 0.5 * v[peak])[0]
        start = peak + int(below[0]) if below.size else 0
    else:
        start = int(np.searchsorted(t, burn_in))
    t, v = t[start:], v[start:]
    under = np.nonzero(v <= floor)[0]
    if under.size:
        t, v = t[:under[0]], v[:under[0]]
    if t.size < min_samples:
        raise InsufficientData(int(t.size), min_samples)

    log_v = np.log(v)
    slope, intercept = np.polyfit(t, log_v, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((log_v - fitted) ** 2))
    ss_tot = float(np.sum((log_v - log_v.mean()) ** 2))
    quality = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return FitResult(float(np.exp(intercept)), float(-slope), quality, int(t.size), float(t[0]))

def boltzmann_deviation_bound_check(phi: Field, E: float, E0: float | None = None) -> list[Check]:
    """
    ‖φ‖∞ <= (2E)^{1/2} 与 ‖e^φ - 1‖∞ <= C*·E^{1/2}，C* = 2^{1/2}e^{(2E0)^{1/2}}。

    E0 缺省时取 E（单个快照）。
    """
    E0 = E if E0 is None else E0
    Cstar = float(np.sqrt(2.0) * np.exp(np.sqrt(2.0 * E0)))
    return [
        _le_check("phi_sup_by_energy", sup_norm(phi), float(np.sqrt(2.0 * E))),
        _le_check("exp_phi_deviation", sup_norm(phi.map(np.expm1)), Cstar * float(np.sqrt(E))),
    ]

def ion_checks(records: Sequence[DiagnosticsRecord], constants: IonConstants, allowance: float = 0.0) -> list[Check]:
    """
    沿离子模型运行逐样本检验能量衰减估计中的各个不等式。

    Args:
        records (Sequence[DiagnosticsRecord]): 按时间排列的诊断记录。
        constants (IonConstants): 由运行观测界计算的常数。
        allowance (float): 离散化允许误差（绝对量）。

    Returns:
        list[Check]: 每个不等式一项，margin 为最坏样本上的余量。
    """
    if not records:
        return []
    E0 = records[0].E
    energy = np.array([r.E for r in records])
    times = np.array([r.t for r in records]) - records[0].t
    increase = float(np.max(np.diff(energy))) if energy.size > 1 else 0.0
    monotone_tol = 1e-8 * (1.0 + E0) + allowance

    def worst(name: str, pairs: Iterable[tuple[float, float]]) -> Check:
        checks = [_le_check(name, lhs, rhs, allowance) for lhs, rhs in pairs]
        failing = [c for c in checks if not c.passed]
        chosen = min(checks, key=lambda c: c.margin) if not failing else failing[0]
        return Check(name, not failing, chosen.margin, chosen.detail)

    A0 = float(np.sqrt(2.0 * E0))
    results = [
        Check("energy_monotone", increase <= monotone_tol, monotone_tol - increase, f"max ΔE = {increase:.3e}"),
        worst("hypocoercive_decay", ((r.E, 3.0 * E0 * np.exp(-constants.rate_pred * t)) for r, t in zip(records, times))),
        worst("cross_term_comparability", ((abs(r.C_cross), 0.5 * r.kinetic / constants.rho_minus + r.electric) for r in records)),
        worst("phi_sup_bound", ((r.phi_sup, A0) for r in records)),
        worst("entropy_control", ((r.entropy, np.exp(3.0 * A0) / 4.0 * 2.0 * r.electric) for r in records)),
        worst("exp_phi_deviation", ((r.sup_norms.get("exp_phi_minus_1", 0.0), constants.Cstar * np.sqrt(max(r.E, 0.0))) for r in records)),
    ]
    for check in results:
        if not check.passed:
            diag_log.warning(f"离子模型检验 {check.name} 未通过：{check.detail}")
    return results
