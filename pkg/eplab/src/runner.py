"""
单次场景运行：求解、分析、生成 Summary，并可写出到目录。
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path

from eplab.src.analysis import analyse_run
from eplab.src.config import ScenarioConfig, parse_scenario
from eplab.src.diagnostics import Check, DiagnosticsRecord
from eplab.src.errors import BlowUp, EPLabError
from eplab.src.eulerian import run_oracle
from eplab.src.lagrangian import run_scenario
from eplab.src.log import cli_log
from eplab.src.output.model import FitModel, RateRow, Summary
from eplab.src.output.writer import ResultWriter, check_models, fit_model
from eplab.src.phaseplane import LemmaConstants, Trajectory, run_phaseplane

SWEEP_PARAMS = ("nu", "r1", "amplitude", "cbar")

@dataclass
class Outcome:
    summary: Summary
    records: list[DiagnosticsRecord] = field(default_factory=list)
    trajectory: Trajectory | None = None
    lemma: LemmaConstants | None = None

def _lemma_dict(constants: LemmaConstants) -> dict[str, float]:
    values = asdict(constants)
    values["lambda"] = values.pop("lam")
    return values

def _execute_phaseplane(config: ScenarioConfig) -> Outcome:
    try:
        result = run_phaseplane(config)
    except BlowUp as e:
        return Outcome(Summary(scenario=config.name, kind="phaseplane", status="blowup", blowup_time=e.time, message=str(e)))
    report = result.report
    checks = [
        Check("gronwall_pointwise", report.gronwall_ok, report.gronwall_margin),
        Check("gronwall_sup_envelope", report.envelope_bound_ok, 0.0),
        Check("lyapunov_comparability", report.comparability_ok, 0.0),
        Check("lemma", report.passed, 0.0, "resonant" if report.resonant else ""),
    ]
    fit = FitModel(below_floor=True) if report.below_floor else FitModel(r=report.rate, quality=report.quality)
    constants = _lemma_dict(report.constants) | {"C0_fit": report.C0_fit, "B_enlarged": float(report.B_enlarged)}
    summary = Summary(
        scenario=config.name,
        kind="phaseplane",
        predicted_rate=report.constants.r2_pred,
        constants=constants,
        fits={"sqrt_y": fit},
        checks=check_models(checks),
    )
    return Outcome(summary, trajectory=result.trajectory, lemma=report.constants)

def _execute_pde(config: ScenarioConfig) -> Outcome:
    lagrangian = config.solver == "lagrangian"
    try:
        if lagrangian:
            result = run_scenario(config)
            final = (result.rho, result.u, result.phi) if result.phi is not None else None
        else:
            result = run_oracle(config)
            final = None
    except BlowUp as e:
        summary = Summary(
            scenario=config.name, kind="pde", solver=config.solver, status="blowup", blowup_time=e.time, message=str(e)
        )
        return Outcome(summary, records=e.records)

    analysis = analyse_run(result.records, config, result.profile, final, momentum_law=lagrangian)
    summary = Summary(
        scenario=config.name,
        kind="pde",
        solver=config.solver,
        predicted_rate=analysis.predicted_rate,
        constants={k: float(v) for k, v in analysis.constants.items()},
        fits={name: fit_model(fit) for name, fit in analysis.fits.items()},
        checks=check_models(analysis.checks),
    )
    return Outcome(summary, records=result.records)

def execute(config: ScenarioConfig) -> Outcome:
    """
    运行一个场景并生成 Summary。

    BlowUp 记录在 Summary 中；其它 EPLabError 向上抛出。
    """
    match config.kind:
        case "phaseplane":
            return _execute_phaseplane(config)
        case "pde":
            return _execute_pde(config)
    raise ValueError(f"未知场景类型: {config.kind}")

def run_to_directory(config: ScenarioConfig, output_dir: Path | str) -> Outcome:
    outcome = execute(config)
    writer = ResultWriter(output_dir)
    if config.kind == "pde":
        writer.write_timeseries(outcome.records)
    if outcome.trajectory is not None and outcome.lemma is not None:
        writer.write_trajectory(outcome.trajectory, outcome.lemma)
    writer.write_summary(outcome.summary)
    cli_log.info(f"场景 {config.name} 的结果已写入 {output_dir}（状态 {outcome.summary.status}）")
    return outcome

def with_param(config: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    """返回修改了扫描参数的新配置"""
    data = config.model_dump(mode="json")
    match param:
        case "nu":
            data["nu"] = value
        case "r1":
            data["background"]["envelope"]["r1"] = value
        case "amplitude":
            data["background"]["shape"]["amplitude"] = value
        case "cbar":
            data["background"]["cbar"] = value
        case _:
            raise ValueError(f"不支持的扫描参数: {param}，可选 {', '.join(SWEEP_PARAMS)}")
    data["name"] = f"{config.name}-{param}={value!r}"
    return parse_scenario(data, f"sweep {param}={value!r}")

def sweep_point(data: dict, param: str, value: float, output_dir: str | None = None) -> RateRow:
    """
    扫描中的单个点，在子进程中执行。失败记录在返回行中，不抛出。
    """
    try:
        config = with_param(parse_scenario(data), param, value)
        if output_dir is not None:
            outcome = run_to_directory(config, Path(output_dir) / f"{param}={value!r}")
        else:
            outcome = execute(config)
    except EPLabError as e:
        cli_log.error(f"扫描点 {param} = {value} 失败：{e}")
        return RateRow(param=param, value=value, status="error", message=str(e))
    summary = outcome.summary
    return RateRow(
        param=param,
        value=value,
        status=summary.status,
        predicted_rate=summary.predicted_rate,
        rates={name: fit.r for name, fit in summary.fits.items()},
        message=summary.message,
    )
