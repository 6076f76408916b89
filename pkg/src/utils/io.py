"""
输出文件读写

CSV 先写 `#` 开头的元数据行再写表头；JSON 为 UTF-8、键排序、不转义非 ASCII。
报告与错误输出在写出前用 jsonschema 校验。
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema
import numpy as np
import pandas as pd

from src.config.settings import RunConfig
from src.utils.errors import BKTError

ERROR_SCHEMA = {
    "type": "object",
    "required": ["error", "message", "details"],
    "properties": {
        "error": {"type": "string"},
        "message": {"type": "string"},
        "details": {"type": "object"},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["command", "version", "config", "passed"],
    "properties": {
        "command": {"type": "string"},
        "version": {"type": "string"},
        "config": {"type": "object"},
        "passed": {"type": "boolean"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "passed"],
                "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"}},
            },
        },
    },
}

MC_SCHEMA = {
    "type": "object",
    "required": ["value", "stderr", "samples", "seed", "params"],
    "properties": {
        "value": {"type": "number"},
        "stderr": {"type": "number", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "params": {"type": "object"},
    },
}


def plain(value: Any) -> Any:
    """numpy 标量与数组转成 JSON 可写的 Python 对象；非有限浮点写成字符串"""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, complex):
        return {"re": plain(value.real), "im": plain(value.imag)}
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(plain(payload), ensure_ascii=False, sort_keys=True, indent=2)


def validate(payload: Dict[str, Any], schema: Dict[str, Any]) -> None:
    jsonschema.validate(instance=plain(payload), schema=schema)


def write_json(path: Path, payload: Dict[str, Any], schema: Optional[Dict[str, Any]] = None) -> Path:
    if schema is not None:
        validate(payload, schema)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(payload))
        f.write("\n")
    return path


def read_json(path: Path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def metadata_lines(config: RunConfig, version: str, command: str) -> List[str]:
    meta = {"command": command, "version": version, "config": config.model_dump()}
    return ["# " + json.dumps(plain(meta), ensure_ascii=False, sort_keys=True)]


def write_csv(path: Path, frame: pd.DataFrame, config: RunConfig, version: str, command: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for line in metadata_lines(config, version, command):
            f.write(line + "\n")
        frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_csv_metadata(path: Path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    if not first.startswith("# "):
        return {}
    return json.loads(first[2:])


def error_payload(error: BKTError) -> Dict[str, Any]:
    payload = error.to_dict()
    validate(payload, ERROR_SCHEMA)
    return payload


class GoldenRegistry:
    """基准值登记表，键为 command:config_hash"""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.entries: Dict[str, Dict[str, float]] = read_json(self.path) if self.path.exists() else {}

    @staticmethod
    def key(command: str, config: RunConfig) -> str:
        return f"{command}:{config.config_hash()}"

    def bless(self, command: str, config: RunConfig, values: Dict[str, float]) -> None:
        self.entries[self.key(command, config)] = {k: float(v) for k, v in values.items()}
        write_json(self.path, self.entries)

    def compare(self, command: str, config: RunConfig, values: Dict[str, float], rtol: float = 1e-9) -> Dict[str, Any]:
        """没有登记项时 status = missing；否则逐项给出相对漂移"""
        stored = self.entries.get(self.key(command, config))
        if stored is None:
            return {"status": "missing", "drift": {}}
        drift = {}
        for name, ref in stored.items():
            if name not in values:
                drift[name] = None
                continue
            scale = max(abs(ref), 1e-300)
            drift[name] = abs(float(values[name]) - ref) / scale
        ok = all(d is not None and d <= rtol for d in drift.values())
        return {"status": "ok" if ok else "drift", "drift": drift}
