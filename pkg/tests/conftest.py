"""
测试公共夹具：所有输出目录指向临时目录
"""

import math
import os
import sys
import tempfile
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

_TMP = Path(tempfile.mkdtemp(prefix="bkt-tests-"))
for _name, _path in {
    "BKT_DATA_DIR": _TMP / "data",
    "BKT_OUTPUT_DIR": _TMP / "data" / "output",
    "BKT_CACHE_DIR": _TMP / "data" / "cache",
    "BKT_GOLDEN_PATH": _TMP / "data" / "golden" / "registry.json",
    "BKT_LOGS_DIR": _TMP / "logs",
}.items():
    os.environ[_name] = str(_path)

from src.config.settings import Settings  # noqa: E402
from src.covariance.family import build_family  # noqa: E402
from src.rg_coefficients.coefficients import CoefficientTable  # noqa: E402

EIGHT_PI = 8.0 * math.pi



@pytest.fixture(scope="session")
def settings() -> Settings:
    return Settings()


@pytest.fixture(scope="session")
def family2(settings):
    """L = 2 的高斯族，α² = 8π 时 z 的前因子恰为 1"""
    return build_family(2, 4, "gaussian", 1e-12, settings)


@pytest.fixture(scope="session")
def family3(settings):
    return build_family(3, 3, "gaussian", 1e-12, settings)


def constant_table(L: int = 2, eta: float = 0.5, count: int = 4, alpha2: float = EIGHT_PI, **values) -> CoefficientTable:
    """每个尺度取相同数值的系数表"""
    defaults = {"a": 1.0, "b": 1.0, "m11": 0.0, "m22": 0.0, "m12": 0.0, "m21": 0.0, "E2": 0.0, "E3": 0.0, "E4": 0.0}
    defaults.update(values)
    columns = {name: [float(v)] * count for name, v in defaults.items()}
    return CoefficientTable(L=L, alpha2=alpha2, eta=eta, cutoff_label="gaussian", j=list(range(count)), **columns)


@pytest.fixture
def make_table():
    return constant_table
