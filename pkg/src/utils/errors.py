"""
错误类型

所有模块错误都派生自 BKTError，命令行把它们序列化为 JSON 并以非零状态退出。
"""

from typing import Any, Dict, Optional


class BKTError(Exception):
    """工具包错误基类"""

    code = "bkt_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": self.code,
            "message": self.message,
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


class DomainError(BKTError):
    """参数超出定义域"""

    code = "domain_error"


class SpecError(BKTError):
    """格点规格或谱不合法"""

    code = "spec_error"


class NumericError(BKTError):
    """求积、拟合残差或级数不收敛"""

    code = "numeric_error"


class SearchError(BKTError):
    """打靶区间两端没有变号"""

    code = "search_error"


class RangeError(BKTError):
    """轨迹长度不足"""

    code = "range_error"


class FitError(BKTError):
    """拟合设计矩阵病态或数据点不足"""

    code = "fit_error"


class ResourceError(BKTError):
    """计算规模超过配置上限"""

    code = "resource_error"


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)
