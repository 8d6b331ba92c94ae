import os
import tempfile
from pathlib import Path

import numpy as np
import pytest

# 日志目录必须在导入 eplab 之前确定
os.environ.setdefault("EPLAB_LOG_DIR", tempfile.mkdtemp(prefix="eplab-logs-"))

from eplab.src.config import ScenarioConfig, parse_scenario  # noqa: E402
from eplab.src.fields import Grid  # noqa: E402

CONFIG_DIR = Path(__file__).parents[1] / "config"
TWO_PI = 2.0 * np.pi

@pytest.fixture
def grid() -> Grid:
    return Grid(64)

@pytest.fixture
def scenario():
    """构造小规模场景配置，关键字参数覆盖默认值"""

    def build(**overrides) -> ScenarioConfig:
        data = {
            "name": "test",
            "kind": "pde",
            "nu": 1.0,
            "background": {
                "kind": "exponential_decay",
                "cbar": 1.0,
                "shape": {"amplitude": 0.2},
                "envelope": {"kind": "exponential", "C1": 1.0, "r1": 0.5},
            },
            "initial": {"rho": {"amplitude": 0.1}, "u": {"amplitude": 0.05}},
            "particles": 128,
            "grid": 64,
            "dt": 0.01,
            "T": 0.5,
            "diag_every": 5,
        }
        data.update(overrides)
        return parse_scenario(data, "test")

    return build
