from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

class FitModel(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    C: float | None = Field(default=None, description="拟合前因子")
    r: float | None = Field(default=None, description="拟合衰减率")
    quality: float | None = Field(default=None, description="对数线性拟合的 R²")
    samples: int = Field(default=0, ge=0, description="拟合窗口样本数")
    below_floor: bool = Field(default=False, description="样本已低于拟合下限，衰减率不作定义")

class CheckModel(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    passed: bool = Field(description="是否通过")
    margin: float = Field(description="最坏样本上的余量（右端减左端）")
    detail: str = Field(default="", description="说明")

class Summary(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    scenario: str = Field(description="场景名称")
    kind: Literal['pde', 'phaseplane'] = Field(description="场景类型")
    solver: Literal['lagrangian', 'eulerian'] | None = Field(default=None, description="PDE 求解器")
    status: Literal['ok', 'blowup', 'error'] = Field(default="ok", description="运行状态")
    blowup_time: float | None = Field(default=None, description="破裂时刻 t*")
    message: str = Field(default="", description="失败信息")
    predicted_rate: float | None = Field(default=None, description="理论预测的衰减率下界")
    constants: dict[str, float] = Field(default_factory=dict, description="衰减估计中的常数与观测界")
    fits: dict[str, FitModel] = Field(default_factory=dict, description="各范数的衰减率拟合")
    checks: dict[str, CheckModel] = Field(default_factory=dict, description="各不等式的检验结果")

class RateRow(BaseModel):
    model_config = ConfigDict(
        extra='forbid',
        frozen=True
    )

    param: str = Field(description="扫描参数")
    value: float = Field(description="参数取值")
    status: Literal['ok', 'blowup', 'error'] = Field(description="运行状态")
    predicted_rate: float | None = Field(default=None, description="预测衰减率")
    rates: dict[str, float | None] = Field(default_factory=dict, description="各范数的拟合衰减率")
    message: str = Field(default="", description="失败信息")
