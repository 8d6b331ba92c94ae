from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pathlib import Path
import os
import yaml
from typing import Literal

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from eplab.src.errors import ConfigError

class LabSettings(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    log_level: Literal['error', 'info', 'debug'] = Field(default="info", description="控制台日志级别（error, info, debug），由环境变量 EPLAB_LOG 指定")
    log_dir: Path = Field(default=Path(__file__).parents[2] / "logs", description="日志文件目录")

class ShapeConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    mode: int = Field(default=1, ge=1, description="背景形状 a(x) 的傅里叶模态")
    amplitude: float = Field(default=0.0, description="背景形状 a(x) 的振幅")
    kind: Literal['cos', 'sin'] = Field(default="cos", description="形状函数类型")

class EnvelopeConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    kind: Literal['exponential', 'rational', 'constant'] = Field(default="exponential", description="时间包络 g(t) 的类型")
    C1: float = Field(default=1.0, ge=0, description="包络幅度 C1")
    r1: float = Field(default=0.5, gt=0, description="指数包络的衰减率 r1")
    p: float = Field(default=1.0, gt=0, description="有理包络 1/(1+t)^p 的幂次")

class BackgroundConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    kind: Literal['constant', 'general_decay', 'exponential_decay', 'boltzmann'] = Field(default="constant", description="背景类型")
    cbar: float = Field(default=1.0, gt=0, description="渐近常数 c̄")
    shape: ShapeConfig = Field(default_factory=ShapeConfig)
    envelope: EnvelopeConfig = Field(default_factory=EnvelopeConfig)

class RhoInitConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    base: float | None = Field(default=None, gt=0, description="初始密度基值（缺省时取背景均值以满足中性条件）")
    mode: int = Field(default=1, ge=1, description="初始密度扰动模态")
    amplitude: float = Field(default=0.0, description="初始密度扰动振幅（cos 型）")

class UInitConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    mode: int = Field(default=1, ge=1, description="初始速度模态")
    amplitude: float = Field(default=0.0, description="初始速度振幅（sin 型）")
    offset: float = Field(default=0.0, description="初始速度的常数偏移（平均动量）")

class InitialConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    rho: RhoInitConfig = Field(default_factory=RhoInitConfig)
    u: UInitConfig = Field(default_factory=UInitConfig)

class PhaseConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    w0: float = Field(default=0.3, description="相平面初值 w0")
    s0: float = Field(default=1.4, description="相平面初值 s0")
    B: float | None = Field(default=None, gt=0, description="相空间界 B（缺省时取轨道观测上确界）")

class FitConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    floor: float = Field(default=1e-10, gt=0, description="拟合时忽略低于该值的样本")
    burn_in: float | None = Field(default=None, ge=0, description="拟合窗口起始时间（缺省时取首次降到最大值一半的时刻）")
    min_samples: int = Field(default=10, ge=2, description="拟合所需最少样本数")

class SolverConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    neutrality_tol: float = Field(default=1e-10, gt=0, description="线性泊松方程的中性容差")
    newton_tol: float = Field(default=1e-12, gt=0, description="泊松-玻尔兹曼牛顿迭代的残差容差（上确界范数）")
    newton_max_iter: int = Field(default=50, gt=0, description="牛顿迭代最大次数")
    s_floor: float = Field(default=1e-6, gt=0, description="爆破判定阈值")
    cfl: float = Field(default=0.5, gt=0, le=1, description="CFL 数")

class ScenarioConfig(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    name: str = Field(default="scenario", description="场景名称（写入 summary.json）")
    kind: Literal['pde', 'phaseplane'] = Field(description="场景类型")
    solver: Literal['lagrangian', 'eulerian'] = Field(default="lagrangian", description="PDE 求解器")
    nu: float = Field(ge=0, description="阻尼系数 ν")
    background: BackgroundConfig = Field(default_factory=BackgroundConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    phase: PhaseConfig = Field(default_factory=PhaseConfig)
    particles: int = Field(default=1024, ge=64, description="特征粒子数 m")
    grid: int = Field(default=256, ge=8, description="网格单元数 n")
    dt: float = Field(default=1e-3, gt=0, description="时间步长")
    T: float = Field(default=30.0, gt=0, description="模拟终止时间")
    diag_every: int = Field(default=10, gt=0, description="每隔多少步记录一次诊断")
    fit: FitConfig = Field(default_factory=FitConfig)
    numerics: SolverConfig = Field(default_factory=SolverConfig)

    @model_validator(mode="after")
    def _check_sizes(self) -> Self:
        if self.grid % 2 or self.particles % 2:
            raise ValueError("grid 与 particles 必须为偶数")
        return self

def _format_loc(loc: tuple[int | str, ...]) -> str:
    return ".".join(str(part) for part in loc)

def parse_scenario(data: dict, source: str = "<memory>") -> ScenarioConfig:
    """
    校验场景字典并构造 ScenarioConfig。

    Args:
        data (dict): 由 YAML/JSON 解析得到的字典。
        source (str): 来源描述，仅用于错误信息。

    Returns:
        ScenarioConfig: 冻结的场景配置。
    """
    try:
        return ScenarioConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        key = _format_loc(first["loc"]) or "<root>"
        raise ConfigError(key, f"{source}: 配置项 {key} 不合法：{first['msg']}") from e

def load_scenario(path: Path | str) -> ScenarioConfig:
    """
    从 YAML 文件读取场景配置。

    YAML 语法错误会带上行列号；校验错误会带上出错的配置键名。
    """
    config_path = Path(path)
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            config_data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError("<file>", f"无法读取配置文件 {config_path}: {e}") from e
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        where = f"第 {mark.line + 1} 行第 {mark.column + 1} 列" if mark else "未知位置"
        raise ConfigError("<yaml>", f"{config_path} {where}: {e.problem}") from e
    if not isinstance(config_data, dict):
        raise ConfigError("<root>", f"{config_path}: 顶层必须是映射")
    return parse_scenario(config_data, str(config_path))

def dump_scenario(scenario: ScenarioConfig, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.dump(scenario.model_dump(mode="json"), f, default_flow_style=False, allow_unicode=True, sort_keys=False)

_env_level = os.environ.get("EPLAB_LOG", "info").lower()
if _env_level not in ("error", "info", "debug"):
    _env_level = "info"

settings = LabSettings(
    log_level=_env_level,  # type: ignore[arg-type]
    **({"log_dir": Path(os.environ["EPLAB_LOG_DIR"])} if os.environ.get("EPLAB_LOG_DIR") else {}),
)
