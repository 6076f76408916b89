"""
协方差表的磁盘缓存

数据为小端 f64 数组，旁边放一个 JSON 头：
{format_version, kind, L, j, radius, cutoff_label, tol, shape}
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from loguru import logger

FORMAT_VERSION = 1


class KernelCache:
    """按 (kind, L, j, cutoff_label, tol) 存取数组"""

    def __init__(self, directory: Optional[Path]):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    @property
    def enabled(self) -> bool:
        return self.directory is not None

    def _stem(self, kind: str, L: int, j: int, label: str, tol: float) -> str:
        key = f"{kind}|{L}|{j}|{label}|{tol:.3e}|v{FORMAT_VERSION}"
        digest = hashlib.md5(key.encode("utf-8")).hexdigest()[:12]
        return f"{kind}_L{L}_j{j}_{label}_{digest}"

    def _paths(self, stem: str) -> Tuple[Path, Path]:
        return self.directory / f"{stem}.f64", self.directory / f"{stem}.json"

    def load(self, kind: str, L: int, j: int, label: str, tol: float) -> Optional[Tuple[np.ndarray, Dict[str, Any]]]:
        if not self.enabled:
            return None
        data_path, header_path = self._paths(self._stem(kind, L, j, label, tol))
        if not (data_path.exists() and header_path.exists()):
            return None
        try:
            with open(header_path, "r", encoding="utf-8") as f:
                header = json.load(f)
            if header.get("format_version") != FORMAT_VERSION:
                logger.warning(f"缓存版本不一致，忽略: {header_path.name}")
                return None
            array = np.fromfile(data_path, dtype="<f8").reshape(header["shape"])
            logger.debug(f"读取协方差缓存: {data_path.name}")
            return array, header
        except Exception as e:
            logger.error(f"读取协方差缓存失败: {e}")
            return None

    def store(self, kind: str, L: int, j: int, label: str, tol: float, array: np.ndarray, **extra: Any) -> None:
        if not self.enabled:
            return
        data_path, header_path = self._paths(self._stem(kind, L, j, label, tol))
        header = {
            "format_version": FORMAT_VERSION,
            "kind": kind,
            "L": L,
            "j": j,
            "cutoff_label": label,
            "tol": tol,
            "shape": list(array.shape),
        }
        header.update(extra)
        try:
            np.ascontiguousarray(array, dtype="<f8").tofile(data_path)
            with open(header_path, "w", encoding="utf-8") as f:
                json.dump(header, f, ensure_ascii=False, indent=2, sort_keys=True)
            logger.debug(f"写入协方差缓存: {data_path.name}")
        except Exception as e:
            logger.error(f"写入协方差缓存失败: {e}")
