from dataclasses import dataclass
from enum import Enum
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from eplab.src.config import BackgroundConfig, ShapeConfig
from eplab.src.errors import InvalidBackground, UnsupportedVariant
from eplab.src.fields import Field, Grid, interpolate, mean, sup_norm

class BackgroundKind(Enum):
    CONSTANT = "constant"
    GENERAL_DECAY = "general_decay"
    EXPONENTIAL_DECAY = "exponential_decay"
    BOLTZMANN = "boltzmann"

@dataclass(frozen=True)
class Envelope:
    """时间包络 g(t)：C1·e^{-r1 t}、C1/(1+t)^p 或常数 C1"""
    kind: Literal['exponential', 'rational', 'constant']
    C1: float
    r1: float = 0.0
    p: float = 1.0

    def __post_init__(self) -> None:
        if self.C1 < 0:
            raise InvalidBackground(f"包络幅度 C1 不能为负：{self.C1}")
        if self.kind == "exponential" and self.r1 <= 0:
            raise InvalidBackground(f"指数包络需要 r1 > 0，当前 {self.r1}")
        if self.kind == "rational" and self.p <= 0:
            raise InvalidBackground(f"有理包络需要 p > 0，当前 {self.p}")

    def __call__(self, t: ArrayLike) -> Any:
        t = np.asarray(t, dtype=np.float64)
        match self.kind:
            case "exponential":
                value = self.C1 * np.exp(-self.r1 * t)
            case "rational":
                value = self.C1 / (1.0 + t) ** self.p
            case "constant":
                value = np.full_like(t, self.C1)
        return float(value) if value.ndim == 0 else value

    @property
    def decays(self) -> bool:
        return self.kind != "constant" or self.C1 == 0.0

@dataclass(frozen=True, eq=False)
class BackgroundProfile:
    kind: BackgroundKind
    cbar: float = 1.0
    shape: Field | None = None
    envelope: Envelope | None = None

    def __post_init__(self) -> None:
        if self.cbar <= 0:
            raise InvalidBackground(f"c̄ 必须为正，当前 {self.cbar}")
        if self.kind in (BackgroundKind.CONSTANT, BackgroundKind.BOLTZMANN):
            return
        if self.shape is None or self.envelope is None:
            raise InvalidBackground(f"{self.kind.value} 背景需要形状 a(x) 与包络 g(t)")
        amplitude = sup_norm(self.shape)
        if abs(mean(self.shape)) > 1e-12 * (1.0 + amplitude):
            raise InvalidBackground(f"形状 a(x) 必须零均值，当前 mean = {mean(self.shape):.3e}")
        if self.cbar - amplitude * self.envelope(0.0) <= 0:
            raise InvalidBackground(
                f"背景会触及真空：c̄ - sup|a|·g(0) = {self.cbar - amplitude * self.envelope(0.0):.3e} <= 0"
            )
        if self.kind is BackgroundKind.GENERAL_DECAY and not self.envelope.decays:
            raise InvalidBackground("一般衰减背景要求 g(t) → 0")
        if self.kind is BackgroundKind.EXPONENTIAL_DECAY and self.envelope.kind != "exponential":
            raise InvalidBackground("指数衰减背景需要指数包络")

    @classmethod
    def constant(cls, cbar: float) -> "BackgroundProfile":
        return cls(BackgroundKind.CONSTANT, cbar)

    @classmethod
    def exponential_decay(cls, cbar: float, shape: Field, C1: float, r1: float) -> "BackgroundProfile":
        return cls(BackgroundKind.EXPONENTIAL_DECAY, cbar, shape, Envelope("exponential", C1, r1))

    @classmethod
    def general_decay(cls, cbar: float, shape: Field, envelope: Envelope) -> "BackgroundProfile":
        return cls(BackgroundKind.GENERAL_DECAY, cbar, shape, envelope)

    @classmethod
    def boltzmann(cls) -> "BackgroundProfile":
        return cls(BackgroundKind.BOLTZMANN, 1.0)

    @property
    def is_boltzmann(self) -> bool:
        return self.kind is BackgroundKind.BOLTZMANN

    @property
    def decay_rate(self) -> float | None:
        """指数包络的 r1；其它情形为 None"""
        if self.envelope is not None and self.envelope.kind == "exponential":
            return self.envelope.r1
        return None

    def _require_pointwise(self, operation: str) -> None:
        if self.is_boltzmann:
            raise UnsupportedVariant(self.kind.value, operation)

def shape_field(grid: Grid, shape: ShapeConfig) -> Field:
    """由配置构造单模态形状 a(x) = amplitude·cos/sin(2π·mode·x)"""
    trig = np.cos if shape.kind == "cos" else np.sin
    return Field.from_function(grid, lambda x: shape.amplitude * trig(2.0 * np.pi * shape.mode * x))

def from_config(config: BackgroundConfig, grid: Grid) -> BackgroundProfile:
    match config.kind:
        case "constant":
            return BackgroundProfile.constant(config.cbar)
        case "boltzmann":
            return BackgroundProfile.boltzmann()
        case "exponential_decay":
            return BackgroundProfile.exponential_decay(
                config.cbar, shape_field(grid, config.shape), config.envelope.C1, config.envelope.r1
            )
        case "general_decay":
            envelope = Envelope(config.envelope.kind, config.envelope.C1, config.envelope.r1, config.envelope.p)
            return BackgroundProfile.general_decay(config.cbar, shape_field(grid, config.shape), envelope)
    raise InvalidBackground(f"未知背景类型: {config.kind}")

def evaluate(p: BackgroundProfile, t: float, x: ArrayLike) -> Any:
    """
    计算 c(t, x)。

    Args:
        p (BackgroundProfile): 背景。
        t (float): 时间。
        x (ArrayLike): 位置（标量或数组）。

    Returns:
        float | NDArray: 背景值。
    """
    p._require_pointwise("evaluate")
    if p.kind is BackgroundKind.CONSTANT:
        if np.ndim(x) == 0:
            return p.cbar
        return np.full(np.shape(x), p.cbar)
    assert p.shape is not None and p.envelope is not None
    return p.cbar + interpolate(p.shape, x) * p.envelope(t)

def evaluate_field(p: BackgroundProfile, t: float, grid: Grid) -> Field:
    """在网格结点上计算 c(t, ·)；形状与网格相同时直接取结点值"""
    p._require_pointwise("evaluate")
    if p.kind is BackgroundKind.CONSTANT:
        return Field.constant(grid, p.cbar)
    assert p.shape is not None and p.envelope is not None
    if p.shape.grid.n == grid.n:
        return p.cbar + p.envelope(t) * p.shape
    return Field(grid, evaluate(p, t, grid.nodes))

def deviation_sup(p: BackgroundProfile, t: float) -> float:
    """sup_x |c(t, x) - c̄| = sup|a|·g(t)"""
    p._require_pointwise("deviation_sup")
    if p.kind is BackgroundKind.CONSTANT:
        return 0.0
    assert p.shape is not None and p.envelope is not None
    return sup_norm(p.shape) * p.envelope(t)

def bounds(p: BackgroundProfile) -> tuple[float, float]:
    """
    c 在全体 (t, x) 上的紧上下界 (c_-, c_+)。

    包络单调不增且 a 零均值，极值在 t = 0 处取得。
    """
    p._require_pointwise("bounds")
    if p.kind is BackgroundKind.CONSTANT:
        return p.cbar, p.cbar
    assert p.shape is not None and p.envelope is not None
    g0 = p.envelope(0.0)
    values: NDArray[np.float64] = p.shape.values
    return p.cbar + min(float(values.min()) * g0, 0.0), p.cbar + max(float(values.max()) * g0, 0.0)
