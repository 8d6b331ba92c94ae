from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_banded

from eplab.src.errors import NeutralityViolated, NewtonDiverged, NonPositiveDensity
from eplab.src.fields import Field, Grid, derivative, mean, sup_norm, l2_norm
from eplab.src.log import field_log

NEUTRALITY_TOL = 1e-10
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
MIN_STEP = 2.0 ** -10

# 预条件 Richardson 迭代的松弛因子：FD 与谱拉普拉斯的符号比落在 [1, π²/4]
_OMEGA = 2.0 / (1.0 + np.pi ** 2 / 4.0)

@dataclass(frozen=True)
class BoltzmannSolution:
    phi: Field
    residuals: list[float] = field(default_factory=list)
    iterations: int = 0

def solve_linear_poisson(rho: Field, c: Field, neutrality_tol: float = NEUTRALITY_TOL) -> Field:
    """
    求解 -φ'' = ρ - c，规范取 mean(φ) = 0。

    Args:
        rho (Field): 密度。
        c (Field): 背景。
        neutrality_tol (float): 中性条件容差。

    Returns:
        Field: 势 φ。
    """
    source = rho - c
    offset = mean(source)
    if abs(offset) > neutrality_tol:
        field_log.error(f"线性泊松方程不可解：mean(ρ - c) = {offset:.3e}")
        raise NeutralityViolated(offset, neutrality_tol)
    k = rho.grid.wavenumbers
    spectrum = source.spectrum.copy()
    spectrum[0] = 0.0
    spectrum[1:] /= k[1:] ** 2
    return Field(rho.grid, np.fft.irfft(spectrum, n=rho.grid.n))

def newton_jacobian_apply(phi: Field, v: Field) -> Field:
    """返回 (-∂ₓₓ + e^φ) v"""
    return -derivative(v, 2) + phi.map(np.exp) * v

def boltzmann_residual(phi: Field, rho: Field) -> Field:
    return -derivative(phi, 2) + phi.map(np.exp) - rho

class _CyclicTridiagonal:
    """
    有限差分 Jacobian tridiag(-1/h², 2/h² + e^φ, -1/h²)（周期角元）的直接分解。

    Sherman-Morrison 把周期角元移出，剩下的带状系统交给 solve_banded。
    """

    def __init__(self, grid: Grid, diag_extra: NDArray[np.float64]) -> None:
        n = grid.n
        off = -1.0 / grid.h ** 2
        diag = 2.0 / grid.h ** 2 + diag_extra
        self.gamma = -diag[0]
        self.ratio = off / self.gamma
        banded = np.zeros((3, n))
        banded[0, 1:] = off
        banded[1, :] = diag
        banded[2, :-1] = off
        banded[1, 0] -= self.gamma
        banded[1, -1] -= off * off / self.gamma
        self.banded = banded
        u = np.zeros(n)
        u[0] = self.gamma
        u[-1] = off
        self.z = solve_banded((1, 1), banded, u)
        self.denominator = 1.0 + self.z[0] + self.ratio * self.z[-1]

    def solve(self, rhs: NDArray[np.float64]) -> NDArray[np.float64]:
        y = solve_banded((1, 1), self.banded, rhs)
        return y - self.z * ((y[0] + self.ratio * y[-1]) / self.denominator)

def _solve_jacobian(phi: Field, rhs: Field, rel_tol: float, max_inner: int = 200) -> Field:
    """
    以有限差分分解为预条件，谱残差抛光求解 (-∂ₓₓ + e^φ) δ = rhs。
    """
    factor = _CyclicTridiagonal(phi.grid, np.exp(phi.values))
    target = rel_tol * sup_norm(rhs)
    delta = np.zeros(phi.grid.n)
    defect = rhs.values.copy()
    for _ in range(max_inner):
        delta = delta + _OMEGA * factor.solve(defect)
        defect = rhs.values - newton_jacobian_apply(phi, Field(phi.grid, delta)).values
        if np.max(np.abs(defect)) <= target:
            break
    return Field(phi.grid, delta)

def _roundoff_floor(phi: Field, rho: Field) -> float:
    k_max = phi.grid.wavenumbers[-1]
    scale = k_max ** 2 * sup_norm(phi) + float(np.max(np.exp(phi.values))) + sup_norm(rho)
    return 8.0 * np.finfo(np.float64).eps * scale

def newton_poisson_boltzmann(
    rho: Field,
    phi_guess: Field | None = None,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    mass_tol: float = NEUTRALITY_TOL,
) -> BoltzmannSolution:
    """
    阻尼牛顿法求解 -φ'' + e^φ = ρ。

    回溯线搜索以残差 L² 范数为准则，步长减半，最小步长 2⁻¹⁰。

    Args:
        rho (Field): 离子密度，逐点为正且单位质量。
        phi_guess (Field | None): 初值，缺省为 0。
        tol (float): 残差上确界容差。
        max_iter (int): 最大迭代次数。
        mass_tol (float): 单位质量条件容差。

    Returns:
        BoltzmannSolution: 解与残差历史。
    """
    minimum = float(np.min(rho.values))
    if minimum <= 0:
        raise NonPositiveDensity(minimum)
    if abs(mean(rho) - 1.0) > mass_tol:
        raise NeutralityViolated(mean(rho) - 1.0, mass_tol)

    phi = phi_guess if phi_guess is not None else Field.constant(rho.grid, 0.0)
    residual = boltzmann_residual(phi, rho)
    history = [sup_norm(residual)]
    for iteration in range(max_iter):
        res = history[-1]
        effective_tol = max(tol, _roundoff_floor(phi, rho))
        if res <= effective_tol:
            field_log.debug(f"泊松-玻尔兹曼牛顿迭代收敛：{iteration} 次，残差 {res:.3e}")
            return BoltzmannSolution(phi, history, iteration)

        delta = _solve_jacobian(phi, -residual, rel_tol=max(min(1e-3, res), 1e-14))
        norm_before = l2_norm(residual)
        step = 1.0
        while step >= MIN_STEP:
            trial = phi + step * delta
            trial_residual = boltzmann_residual(trial, rho)
            if l2_norm(trial_residual) < norm_before:
                break
            step *= 0.5
        else:
            if res <= 100.0 * effective_tol:
                field_log.warning(f"残差 {res:.3e} 已接近舍入误差下限 {effective_tol:.3e}，停止迭代")
                return BoltzmannSolution(phi, history, iteration)
            field_log.error(f"线搜索耗尽：第 {iteration} 次迭代，残差 {res:.3e}")
            raise NewtonDiverged(res, iteration)
        if step < 1.0:
            field_log.debug(f"第 {iteration} 次迭代采用阻尼步长 {step}")
        phi, residual = trial, trial_residual
        history.append(sup_norm(residual))
        field_log.debug(f"牛顿迭代 {iteration + 1}: 残差 {history[-1]:.3e}")

    if history[-1] <= 100.0 * max(tol, _roundoff_floor(phi, rho)):
        return BoltzmannSolution(phi, history, max_iter)
    raise NewtonDiverged(history[-1], max_iter)

def solve_poisson_boltzmann(rho: Field, phi_guess: Field | None = None, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> Field:
    return newton_poisson_boltzmann(rho, phi_guess, tol=tol, max_iter=max_iter).phi
