"""
Result artifacts: JSON documents and CSV tables.

Every artifact carries schema_version. Floats are written with repr so they
read back exactly, and nothing time-dependent enters an artifact.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

from .config import ensure_output_directory

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def to_jsonable(value: Any) -> Any:
    """numpy scalars and arrays become plain Python; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'to_dict'):
        return to_jsonable(value.to_dict())
    return value


def write_json(path: Union[str, Path], payload: dict) -> Path:
    path = Path(path)
    ensure_output_directory(path.parent)
    document = {'schema_version': SCHEMA_VERSION, **to_jsonable(payload)}
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True, ensure_ascii=False)
    logger.info(f"Results saved to {path}")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ' '.join(_cell(v) for v in np.asarray(value, dtype=float).ravel())
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    ensure_output_directory(path.parent)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['schema_version'] + list(header))
        count = 0
        for row in rows:
            writer.writerow([SCHEMA_VERSION] + [_cell(v) for v in row])
            count += 1
    logger.info(f"{count} rows saved to {path}")
    return path


def read_json(path: Union[str, Path]) -> dict:
    with open(path, encoding='utf-8') as f:
        return json.load(f)
