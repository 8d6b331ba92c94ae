class EPLabError(Exception):
    """所有数值实验错误的基类"""

class ConfigError(EPLabError):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(message)
        self.key = key

class NonFiniteField(EPLabError):
    pass

class NeutralityViolated(EPLabError):
    def __init__(self, mean: float, tol: float) -> None:
        super().__init__(f"中性条件不满足：mean = {mean:.3e}，容差 {tol:.1e}")
        self.mean = mean
        self.tol = tol

class NonPositiveDensity(EPLabError):
    def __init__(self, minimum: float) -> None:
        super().__init__(f"密度必须逐点为正，最小值为 {minimum:.3e}")
        self.minimum = minimum

class VacuumInitialData(NonPositiveDensity):
    pass

class NewtonDiverged(EPLabError):
    def __init__(self, residual: float, iterations: int) -> None:
        super().__init__(f"牛顿迭代发散：{iterations} 次迭代后残差 {residual:.3e}")
        self.residual = residual
        self.iterations = iterations

class UnsupportedVariant(EPLabError):
    def __init__(self, variant: str, operation: str) -> None:
        super().__init__(f"背景类型 {variant} 不支持操作 {operation}")
        self.variant = variant

class InvalidBackground(EPLabError):
    pass

class BlowUp(EPLabError):
    def __init__(self, time: float, reason: str = "") -> None:
        super().__init__(f"经典解在 t* ≈ {time:.6g} 处破裂{('：' + reason) if reason else ''}")
        self.time = time
        self.reason = reason
        # 破裂前已记录的诊断序列，由 run_scenario 填入
        self.records: list = []

class CrossingDetected(EPLabError):
    def __init__(self, index: int) -> None:
        super().__init__(f"特征线在第 {index} 个间隙处交叉")
        self.index = index

class VacuumReached(EPLabError):
    def __init__(self, time: float, minimum: float) -> None:
        super().__init__(f"t = {time:.6g} 时密度降至 {minimum:.3e}，出现真空")
        self.time = time
        self.minimum = minimum

class CFLViolated(EPLabError):
    def __init__(self, dt: float, limit: float) -> None:
        super().__init__(f"时间步长 {dt:.3e} 超过 CFL 上限 {limit:.3e}")
        self.dt = dt
        self.limit = limit

class DomainError(EPLabError):
    pass

class InsufficientData(EPLabError):
    def __init__(self, count: int, required: int) -> None:
        super().__init__(f"可用样本 {count} 个，少于所需的 {required} 个")
        self.count = count
        self.required = required
