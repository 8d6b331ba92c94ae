import logging
from logging.handlers import RotatingFileHandler
import sys
import colorlog
from eplab.src.config import settings

log_path = settings.log_dir
if not log_path.exists():
    log_path.mkdir(parents=True, exist_ok=True)

log_level_map: dict[str, int] = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "error": logging.ERROR,
}

date_format = "%Y-%m-%d %H:%M:%S"

file_formatter = logging.Formatter(
    fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    datefmt=date_format
)

console_formatter = colorlog.ColoredFormatter(
    fmt="%(asctime)s - %(name)s - %(log_color)s%(levelname)s%(reset)s - %(message)s",
    datefmt=date_format,
    log_colors={
        "DEBUG": "cyan",
        "INFO": "green",
        "WARNING": "yellow",
        "ERROR": "red",
        "CRITICAL": "bold_red",
    },
)

# 控制台输出到 stderr，stdout 留给 verify 的表格与 JSON
console_handler = logging.StreamHandler(sys.stderr)
console_handler.setLevel(log_level_map.get(settings.log_level, logging.INFO))
console_handler.setFormatter(console_formatter)

def _rotating(filename: str) -> RotatingFileHandler:
    handler = RotatingFileHandler(
        filename=log_path / filename,
        maxBytes=10 * 1024 * 1024,
        backupCount=0,
        encoding="utf-8",
        delay=True,
    )
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(file_formatter)
    return handler

file_handler_solver = _rotating("solver.log")
file_handler_field = _rotating("field.log")
file_handler_diag = _rotating("diagnostics.log")
file_handler_main = _rotating("eplab.log")

solver_log = logging.getLogger("solver")
solver_log.setLevel(logging.DEBUG)
solver_log.addHandler(file_handler_solver)
solver_log.addHandler(console_handler)
solver_log.propagate = False

field_log = logging.getLogger("field")
field_log.setLevel(logging.DEBUG)
field_log.addHandler(file_handler_field)
field_log.addHandler(console_handler)
field_log.propagate = False

diag_log = logging.getLogger("diagnostics")
diag_log.setLevel(logging.DEBUG)
diag_log.addHandler(file_handler_diag)
diag_log.addHandler(console_handler)
diag_log.propagate = False

cli_log = logging.getLogger("eplab")
cli_log.setLevel(logging.DEBUG)
cli_log.addHandler(file_handler_main)
cli_log.addHandler(console_handler)
cli_log.propagate = False
