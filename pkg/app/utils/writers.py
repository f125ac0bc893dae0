"""
Writers Module

This module writes the machine-readable artifacts of a run: CSV tables with a
commented parameter header and JSON documents. Every file is written to a
temporary sibling and renamed into place so readers never see partial output.
"""
import os
import json
import tempfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np
import pandas as pd

from app.utils.config import section_value
from app.utils.logger import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str) -> Path:
    """
    Write ``text`` to ``path`` via write-temp-rename.

    Args:
        path: Destination file
        text: Full file content

    Returns:
        The destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug(f"Wrote {path}")
    return path


def _plain(value: Any) -> Any:
    """Convert numpy scalars and containers into JSON-friendly values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def configured_float_format() -> str:
    """The printf-style float format of CSV output (settings ``output.float_format``)."""
    return str(section_value("output", "float_format", FLOAT_FORMAT))


def format_header(params: Optional[Mapping[str, Any]]) -> str:
    """
    Render run parameters as ``# key=value`` comment lines.

    Floats use ``output.float_format`` (17 significant digits by default) so
    the header is byte-stable.
    """
    if not params:
        return ""
    float_format = configured_float_format()
    lines = []
    for key in sorted(params):
        value = _plain(params[key])
        if isinstance(value, float):
            value = float_format % value
        elif isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        lines.append(f"# {key}={value}\n")
    return "".join(lines)


def write_csv(frame: pd.DataFrame, path: PathLike,
              params: Optional[Mapping[str, Any]] = None) -> Path:
    """
    Write a DataFrame as CSV with a commented parameter header.

    Args:
        frame: Table to write; column order is preserved
        path: Destination file
        params: Parameters echoed as comment lines above the column header

    Returns:
        The destination path
    """
    body = frame.to_csv(index=False, float_format=configured_float_format(), lineterminator="\n")
    return atomic_write_text(path, format_header(params) + body)


def to_json(payload: Any) -> str:
    """Serialize ``payload`` deterministically."""
    return json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n"


def write_json(payload: Any, path: PathLike) -> Path:
    """
    Write a JSON document.

    Args:
        payload: Mapping or list; numpy values are converted
        path: Destination file

    Returns:
        The destination path
    """
    return atomic_write_text(path, to_json(payload))


def read_csv(path: PathLike) -> pd.DataFrame:
    """Read a CSV written by :func:`write_csv` (comment header skipped)."""
    return pd.read_csv(path, comment="#")


def flatten_params(prefix: str, values: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Prefix the keys of a settings section for header echoing."""
    return {f"{prefix}.{key}": value for key, value in (values or {}).items()}
