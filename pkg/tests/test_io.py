"""
输出序列化与运行配置
"""

import math

import jsonschema
import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.config.settings import RunConfig, load_run_config
from src.utils.errors import FitError
from src.utils.logger import setup_logger
from src.utils.io import (
    ERROR_SCHEMA,
    MC_SCHEMA,
    GoldenRegistry,
    error_payload,
    plain,
    read_csv,
    read_csv_metadata,
    validate,
    write_csv,
    write_json,
)


def test_plain_conversions():
    out = plain({"a": np.float64(1.5), "b": np.int32(3), "c": float("nan"), "d": np.array([1.0, np.inf]), "e": 1 + 2j, "f": np.bool_(True)})
    assert out == {"a": 1.5, "b": 3, "c": "nan", "d": [1.0, "inf"], "e": {"re": 1.0, "im": 2.0}, "f": True}
    assert isinstance(out["f"], bool)


def test_error_payload():
    payload = error_payload(FitError("拟合点数不足", {"count": np.int64(3), "where": (1, 2)}))
    assert payload == {"error": "fit_error", "message": "拟合点数不足", "details": {"count": 3.0, "where": [1, 2]}}
    jsonschema.validate(payload, ERROR_SCHEMA)


def test_schema_rejects_negative_stderr():
    with pytest.raises(jsonschema.ValidationError):
        validate({"value": 1.0, "stderr": -1.0, "samples": 10, "seed": 1, "params": {}}, MC_SCHEMA)


def test_csv_metadata_header(tmp_path):
    config = RunConfig(command="coeffs", L=3, eta=0.25)
    frame = pd.DataFrame({"j": [0, 1], "a": [0.0, math.pi]})
    path = write_csv(tmp_path / "out" / "coeffs.csv", frame, config, "1.2.3", "coeffs")
    assert path.read_text(encoding="utf-8").startswith("# {")
    back = read_csv(path)
    assert back["a"].iloc[1] == math.pi
    meta = read_csv_metadata(path)
    assert meta["version"] == "1.2.3"
    assert meta["config"]["eta"] == 0.25


def test_json_written_with_unicode(tmp_path):
    path = write_json(tmp_path / "x.json", {"名称": "η", "value": np.float32(0.5)})
    text = path.read_text(encoding="utf-8")
    assert "η" in text and "名称" in text


def test_golden_registry(tmp_path):
    config = RunConfig(command="flow", L=3)
    registry = GoldenRegistry(tmp_path / "golden.json")
    assert registry.compare("flow", config, {"x": 1.0})["status"] == "missing"
    registry.bless("flow", config, {"x": 1.0, "y": 2.0})
    reloaded = GoldenRegistry(tmp_path / "golden.json")
    assert reloaded.compare("flow", config, {"x": 1.0, "y": 2.0})["status"] == "ok"
    drifted = reloaded.compare("flow", config, {"x": 1.1, "y": 2.0})
    assert drifted["status"] == "drift"
    assert drifted["drift"]["x"] == pytest.approx(0.1)
    assert reloaded.compare("flow", config, {"x": 1.0})["drift"]["y"] is None


def test_config_hash_ignores_output_dir():
    a = RunConfig(command="flow", output_dir="/tmp/a")
    b = RunConfig(command="flow", output_dir="/tmp/b")
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig(command="flow", z=2e-3).config_hash()


def test_load_run_config_precedence(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("L=5\nETA=0.25\nk_max=9\n", encoding="utf-8")
    config = load_run_config(path, {"L": 7, "eta": None})
    assert config.L == 7
    assert config.eta == 0.25
    assert config.extra == {"k_max": "9"}


@pytest.mark.parametrize(
    "fields",
    [{"L": 2}, {"R": 0}, {"eta": 0.0}, {"eta": 1.5}, {"z": -1e-3}, {"cutoff": "lorentz"}, {"command": "oracle", "L": 4}],
)
def test_run_config_validation(fields):
    with pytest.raises(ValidationError):
        RunConfig(**fields)


def test_even_lattice_allowed_for_covariance():
    assert RunConfig(command="covariance", L=16).L == 16


def test_logger_writes_the_rotating_file(settings):
    log = setup_logger(settings)
    log.info("日志落盘检查")
    log.complete()
    path = settings.logs_dir / "bkt.log"
    assert path.exists()
    assert "日志落盘检查" in path.read_text(encoding="utf-8")
    assert setup_logger(settings) is log
