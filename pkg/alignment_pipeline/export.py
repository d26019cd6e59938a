"""Run directories, atomic file writes and intermediate artifacts."""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import IO, Iterator, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def create_output_dir(run_name: str = "experiment", base_dir: PathLike = "runs") -> str:
    """Create ``runs/<run_name>_YYYY-MM-DD_HHMMSS/`` and return its path."""
    safe_name = re.sub(r"[^\w\s-]", "", run_name)[:60].strip().replace(" ", "_")
    if not safe_name:
        safe_name = "experiment"

    timestamp = datetime.now().strftime("%Y-%m-%d_%H%M%S")
    full_path = os.path.join(str(base_dir), f"{safe_name}_{timestamp}")
    os.makedirs(full_path, exist_ok=True)
    logger.info("Created output directory: %s", full_path)
    return full_path


@contextmanager
def atomic_open(path: PathLike, mode: str = "w") -> Iterator[IO]:
    """Write to a temp file next to ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    binary = "b" in mode
    try:
        with os.fdopen(fd, mode, **({} if binary else {"encoding": "utf-8", "newline": ""})) as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: PathLike, text: str) -> None:
    with atomic_open(path, "w") as handle:
        handle.write(text)


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    with atomic_open(path, "wb") as handle:
        handle.write(data)


def save_intermediate(data, filename: str, output_dir: PathLike) -> str:
    """Save a pipeline artifact as JSON (pydantic models, dicts or lists of either)."""
    path = os.path.join(str(output_dir), filename)
    if hasattr(data, "model_dump_json"):
        content = data.model_dump_json(indent=2)
    elif isinstance(data, list):
        items = [item.model_dump(mode="json") if hasattr(item, "model_dump") else item for item in data]
        content = json.dumps(items, indent=2, default=str)
    else:
        content = json.dumps(data, indent=2, default=str)

    atomic_write_text(path, content)
    logger.info("Saved intermediate: %s", path)
    return path
