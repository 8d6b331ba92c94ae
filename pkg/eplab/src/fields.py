"""
环面 T = [-1/2, 1/2) 上的一致周期网格与网格函数。

导数使用三角（FFT）微分，积分使用矩形公式（周期一致网格上等价于梯形公式），
离散点插值使用周期三次样条。
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline

from eplab.src.errors import NonFiniteField

@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self) -> None:
        if self.n < 8 or self.n % 2:
            raise ValueError(f"网格单元数必须是 >= 8 的偶数，当前为 {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def nodes(self) -> NDArray[np.float64]:
        nodes = -0.5 + np.arange(self.n) * self.h
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def wavenumbers(self) -> NDArray[np.float64]:
        """rfft 排列下的角波数 2πk"""
        k = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        k.setflags(write=False)
        return k

@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: NDArray[np.float64] = field(repr=False)

    # 与 ndarray 混合运算时交给 Field 的反向运算符，不生成 object 数组
    __array_ufunc__ = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n,):
            raise ValueError(f"网格函数长度 {values.shape} 与网格单元数 {self.grid.n} 不一致")
        if not np.all(np.isfinite(values)):
            raise NonFiniteField(f"网格函数含有 NaN/Inf（共 {np.count_nonzero(~np.isfinite(values))} 个）")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[NDArray[np.float64]], ArrayLike]) -> "Field":
        return cls(grid, np.broadcast_to(np.asarray(fn(grid.nodes), dtype=np.float64), (grid.n,)))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.n, float(value)))

    @cached_property
    def spectrum(self) -> NDArray[np.complex128]:
        return np.fft.rfft(self.values)

    @cached_property
    def spline(self) -> CubicSpline:
        nodes = np.append(self.grid.nodes, 0.5)
        values = np.append(self.values, self.values[0])
        return CubicSpline(nodes, values, bc_type="periodic")

    def map(self, fn: Callable[[NDArray[np.float64]], NDArray[np.float64]]) -> "Field":
        return Field(self.grid, fn(self.values))

    def _other(self, other: Any) -> NDArray[np.float64] | float:
        if isinstance(other, Field):
            if other.grid.n != self.grid.n:
                raise ValueError("两个网格函数不在同一网格上")
            return other.values
        if isinstance(other, np.ndarray) and other.ndim:
            raise TypeError("网格函数只能与网格函数或标量运算，数组请先包装成 Field")
        return float(other)

    def __add__(self, other: Any) -> "Field":
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Field":
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other: Any) -> "Field":
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other: Any) -> "Field":
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "Field":
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

def derivative(f: Field, order: int = 1) -> Field:
    """
    三角插值意义下的 order 阶导数。

    奇数阶导数时 Nyquist 模态置零，使结果保持为实值周期函数。

    Args:
        f (Field): 周期网格函数。
        order (int): 导数阶数，默认 1。

    Returns:
        Field: 导数网格函数。
    """
    if order < 0:
        raise ValueError("导数阶数不能为负")
    if order == 0:
        return f
    k = f.grid.wavenumbers
    symbol = (1j * k) ** order
    if order % 2:
        symbol = symbol.copy()
        symbol[-1] = 0.0
    return Field(f.grid, np.fft.irfft(symbol * f.spectrum, n=f.grid.n))

def mean(f: Field) -> float:
    return float(np.mean(f.values))

def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))

def l2_norm(f: Field) -> float:
    return float(np.sqrt(np.mean(f.values ** 2)))

def l1_norm(f: Field) -> float:
    return float(np.mean(np.abs(f.values)))

def wrap(x: ArrayLike) -> NDArray[np.float64]:
    """把位置约化到 [-1/2, 1/2)"""
    return np.mod(np.asarray(x, dtype=np.float64) + 0.5, 1.0) - 0.5

def interpolate(f: Field, x: ArrayLike) -> Any:
    """
    周期三次样条插值，x 先约化到 [-1/2, 1/2)。

    Args:
        f (Field): 网格函数。
        x (ArrayLike): 位置（标量或数组）。

    Returns:
        float | NDArray: 插值结果，形状与 x 相同。
    """
    result = f.spline(wrap(x))
    if np.ndim(result) == 0:
        return float(result)
    return result

def antiderivative_at(f: Field, x: ArrayLike) -> NDArray[np.float64]:
    """
    f 的三角插值函数从 -1/2 到 x 的精确积分。

    x 可以是任意实数（不做周期约化），平均值部分按 mean(f)·(x + 1/2) 线性增长。
    """
    n = f.grid.n
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    coeffs = f.spectrum / n
    theta = 2.0 * np.pi * (xs[:, None] + 0.5)
    k = np.arange(1, n // 2)
    phase = np.exp(1j * theta * k[None, :])
    # 共轭对的贡献合并为 2·Re
    oscillating = 2.0 * np.real((phase - 1.0) / (2j * np.pi * k[None, :]) @ coeffs[1:n // 2])
    nyquist = np.real(coeffs[n // 2]) * np.sin(np.pi * n * (xs + 0.5)) / (np.pi * n)
    return np.real(coeffs[0]) * (xs + 0.5) + oscillating + nyquist

def trig_interpolate(f: Field, x: ArrayLike) -> NDArray[np.float64]:
    """在任意点处计算 f 的三角插值函数（谱精度，代价 O(len(x)·n)）"""
    n = f.grid.n
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    coeffs = f.spectrum / n
    theta = 2.0 * np.pi * (xs[:, None] + 0.5)
    k = np.arange(1, n // 2)
    oscillating = 2.0 * np.real(np.exp(1j * theta * k[None, :]) @ coeffs[1:n // 2])
    nyquist = np.real(coeffs[n // 2]) * np.cos(np.pi * n * (xs + 0.5))
    return np.real(coeffs[0]) + oscillating + nyquist
