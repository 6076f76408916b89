"""
项目配置管理
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# 加载环境变量
load_dotenv()

KNOWN_CUTOFFS = ("gaussian", "gaussian_poly", "sech")


class Settings(BaseSettings):
    """应用配置类"""

    # 项目基础配置
    project_name: str = "BKT库仑气体重整化群工具包"
    version: str = "0.1.0"
    debug: bool = False

    # 日志配置
    log_level: str = "INFO"

    # 文件路径配置
    project_root: Path = Path(__file__).parent.parent.parent
    data_dir: Path = project_root / "data"
    output_dir: Path = data_dir / "output"
    cache_dir: Path = data_dir / "cache"
    golden_path: Path = data_dir / "golden" / "registry.json"
    logs_dir: Path = project_root / "logs"

    # 协方差与格点求和
    kernel_tol: float = 1e-12
    reach_factor: float = 1.4
    direct_radius: int = 300
    switch_radius: float = 64.0
    switch_width: float = 8.0
    radial_nodes: int = 24
    angular_nodes: int = 32
    derivative_nodes: int = 4
    j_freeze: int = 12

    # 耦合流与打靶
    shooting_tol: float = 1e-16
    j_max_flow: int = 400
    plasma_delta: float = 1e-12
    dipole_eps_factor: float = 1e-15

    # 蒙特卡洛
    mc_block_size: int = 10000
    regulator_schedule: List[float] = [0.2, 0.1, 0.05]

    # 枚举
    enumeration_max_tuples: int = 60_000_000
    series_fraction: float = 1e-3

    # 并行
    threads: int = 1

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="BKT_",
        extra="ignore",
    )

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        # 创建必要的目录
        self.create_directories()

    def create_directories(self):
        """创建必要的目录"""
        directories = [
            self.data_dir,
            self.output_dir,
            self.cache_dir,
            self.golden_path.parent,
            self.logs_dir,
        ]

        for directory in directories:
            directory.mkdir(parents=True, exist_ok=True)


class RunConfig(BaseModel):
    """单次运行的参数，计算前校验，原样写入每个输出的元数据"""

    command: str = ""
    L: int = 16
    R: int = 4
    alpha2: float = 8.0 * 3.141592653589793
    eta: float = 0.5
    z: float = 1e-3
    j_max: int = 8
    tol: float = 1e-12
    cutoff: str = "gaussian"
    seed: int = 20240601
    samples: int = 100_000
    mass: float = 0.1
    beta: float = 2.0
    n_max: int = 4
    ell_end: float = 10.0
    step: float = 1e-3
    output_dir: Optional[str] = None
    extra: Dict[str, Any] = {}

    @field_validator("L")
    @classmethod
    def _base_size(cls, v: int) -> int:
        if v < 3:
            raise ValueError("L 必须不小于 3")
        return v

    @field_validator("R", "j_max")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("尺度数必须为正整数")
        return v

    @field_validator("eta")
    @classmethod
    def _eta_range(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("η 必须位于 (0, 1]")
        return v

    @field_validator("z", "tol", "step")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("参数不能为负")
        return v

    @field_validator("cutoff")
    @classmethod
    def _cutoff_known(cls, v: str) -> str:
        if v not in KNOWN_CUTOFFS:
            raise ValueError(f"未知截断函数: {v}")
        return v

    @model_validator(mode="after")
    def _lattice_parity(self) -> "RunConfig":
        # 格点相关命令要求奇数 L；协方差命令允许偶数 L
        if self.command in ("potential", "oracle") and self.L % 2 == 0:
            raise ValueError("格点命令要求 L 为奇数")
        return self

    def config_hash(self) -> str:
        """配置哈希，用作基准值登记表的键"""
        payload = json.dumps(self.model_dump(exclude={"output_dir"}), sort_keys=True, default=str)
        return hashlib.md5(payload.encode("utf-8")).hexdigest()


def _coerce(raw: Dict[str, Optional[str]]) -> Dict[str, Any]:
    """把扁平键值文本转成 RunConfig 可接受的字段"""
    fields = {name.lower(): name for name in RunConfig.model_fields if name != "extra"}
    values: Dict[str, Any] = {}
    extra: Dict[str, Any] = {}
    for key, text in raw.items():
        if text is None:
            continue
        name = key.strip().lower().replace("-", "_")
        if name in fields:
            values[fields[name]] = text
        else:
            extra[name] = text
    if extra:
        values["extra"] = extra
    return values


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """默认值 < 配置文件 < 命令行参数"""
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(_coerce(dotenv_values(path)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig(**values)
