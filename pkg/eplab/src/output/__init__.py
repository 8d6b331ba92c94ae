import os
import tempfile
from pathlib import Path

default_output_dir = Path(__file__).parents[3] / "runs"

def atomic_write(path: Path, text: str) -> None:
    """
    先写同目录下的临时文件，再用 os.replace 替换目标文件。

    Args:
        path (Path): 目标文件。
        text (str): 文件内容（UTF-8）。
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
