import asyncio
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from eplab.src.config import ScenarioConfig
from eplab.src.log import cli_log
from eplab.src.output.model import RateRow
from eplab.src.output.writer import ResultWriter
from eplab.src.runner import sweep_point

class SweepJob:
    """
    参数扫描：每个取值一次独立运行，放进进程池并用信号量限制并发数。
    """

    def __init__(self, config: ScenarioConfig, param: str, values: list[float], output_dir: Path | str, jobs: int = 1) -> None:
        self.config = config
        self.param = param
        self.values = values
        self.output_dir = Path(output_dir)
        self.jobs = max(1, jobs)

    async def _run_one(self, pool: ProcessPoolExecutor, semaphore: asyncio.Semaphore, value: float) -> RateRow:
        async with semaphore:
            cli_log.info(f"开始扫描点 {self.param} = {value}")
            loop = asyncio.get_running_loop()
            data = self.config.model_dump(mode="json")
            try:
                return await loop.run_in_executor(pool, sweep_point, data, self.param, value, str(self.output_dir))
            except Exception as e:
                cli_log.exception(f"扫描点 {self.param} = {value} 的子进程异常")
                return RateRow(param=self.param, value=value, status="error", message=str(e))

    async def _run_all(self) -> list[RateRow]:
        semaphore = asyncio.Semaphore(self.jobs)
        with ProcessPoolExecutor(max_workers=self.jobs) as pool:
            # gather 保持输入顺序，rates.csv 的行序与取值顺序一致
            return list(await asyncio.gather(*(self._run_one(pool, semaphore, v) for v in self.values)))

    def run(self) -> list[RateRow]:
        rows = asyncio.run(self._run_all())
        ResultWriter(self.output_dir).write_rates(rows)
        failed = sum(1 for row in rows if row.status == "error")
        cli_log.info(f"扫描 {self.param} 完成：{len(rows)} 个点，失败 {failed} 个")
        return rows
