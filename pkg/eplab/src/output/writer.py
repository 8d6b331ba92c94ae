import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from eplab.src.diagnostics import Check, DiagnosticsRecord, FitResult
from eplab.src.log import cli_log
from eplab.src.output import atomic_write
from eplab.src.output.model import CheckModel, FitModel, RateRow, Summary
from eplab.src.phaseplane import LemmaConstants, Trajectory, combined_y, cross_X, lyapunov_L

TRAJECTORY_COLUMNS = ["t", "w", "s", "L", "X", "y", "c"]

def _cell(value: object) -> str:
    """浮点数用 repr 写出，保证逐位可复现"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating, int, np.integer)):
        return repr(float(value))
    return str(value)

def fit_model(fit: FitResult | None) -> FitModel:
    if fit is None:
        return FitModel(below_floor=True)
    return FitModel(C=fit.C, r=fit.r, quality=fit.quality, samples=fit.samples)

def check_models(checks: Iterable[Check]) -> dict[str, CheckModel]:
    return {check.name: CheckModel(passed=check.passed, margin=float(check.margin), detail=check.detail) for check in checks}

class ResultWriter:
    """把一次运行的产物写到输出目录，每个文件原子写入"""

    def __init__(self, directory: Path | str) -> None:
        self.directory = Path(directory)

    def _write_csv(self, filename: str, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        path = self.directory / filename
        atomic_write(path, buffer.getvalue())
        cli_log.debug(f"已写出 {path}")
        return path

    def write_timeseries(self, records: Sequence[DiagnosticsRecord]) -> Path:
        return self._write_csv("timeseries.csv", DiagnosticsRecord.columns(), (r.row() for r in records))

    def write_trajectory(self, trajectory: Trajectory, constants: LemmaConstants) -> Path:
        L = lyapunov_L(trajectory, constants.cbar)
        X = cross_X(trajectory, constants.cbar)
        y = combined_y(trajectory, constants)
        rows = zip(trajectory.t, trajectory.w, trajectory.s, L, X, y, trajectory.c)
        return self._write_csv("trajectory.csv", TRAJECTORY_COLUMNS, rows)

    def write_summary(self, summary: Summary) -> Path:
        path = self.directory / "summary.json"
        # 写出前按模型重新校验一次
        validated = Summary.model_validate(summary.model_dump())
        atomic_write(path, validated.model_dump_json(indent=2) + "\n")
        cli_log.debug(f"已写出 {path}")
        return path

    def write_rates(self, rows: Sequence[RateRow]) -> Path:
        names: list[str] = []
        for row in rows:
            names.extend(name for name in row.rates if name not in names)
        header = ["param", "value", "status", "predicted_rate"] + [f"rate_{name}" for name in names] + ["message"]
        body = (
            [row.param, row.value, row.status, row.predicted_rate] + [row.rates.get(name) for name in names] + [row.message]
            for row in rows
        )
        return self._write_csv("rates.csv", header, body)
