"""
截断函数

u(p) 为径向动量截断，满足 u(0)=1 且关于 |p| 单调不增。
"""

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from src.utils.errors import DomainError


@dataclass(frozen=True)
class CutoffFunction:
    """径向截断 p ↦ u(p)，label 写入所有输出的来源信息"""

    label: str
    evaluator: Callable[[np.ndarray], np.ndarray]

    def __call__(self, p) -> np.ndarray:
        return self.evaluator(np.asarray(p, dtype=float))

    @property
    def closed_form(self) -> bool:
        return self.label == "gaussian"

    def check_admissible(self, L: int, p_max: float = 64.0, points: int = 4096) -> None:
        """在 p 网格上检查 u(0)=1、单调性以及 u(p)-u(Lp) ≥ 0"""
        u0 = float(self(np.array([0.0]))[0])
        if abs(u0 - 1.0) > 1e-12:
            raise DomainError("截断函数要求 u(0)=1", {"label": self.label, "u0": u0})

        grid = np.linspace(0.0, p_max, points)
        values = self(grid)
        if not np.all(np.isfinite(values)):
            raise DomainError("截断函数在网格上出现非有限值", {"label": self.label})
        steps = np.diff(values)
        if np.any(steps > 1e-14):
            worst = int(np.argmax(steps))
            raise DomainError(
                "截断函数不是单调不增的",
                {"label": self.label, "p": float(grid[worst]), "increase": float(steps[worst])},
            )
        shell = values - self(L * grid)
        if np.any(shell < -1e-14):
            raise DomainError("u(p)-u(Lp) 在网格上出现负值", {"label": self.label, "L": L})


def _gaussian(p: np.ndarray) -> np.ndarray:
    return np.exp(-p * p)


def _gaussian_poly(p: np.ndarray) -> np.ndarray:
    q = p * p
    return (1.0 + q) * np.exp(-q)


def _sech(p: np.ndarray) -> np.ndarray:
    # 1/cosh 在大 |p| 处用 2e^{-|p|} 的形式避免溢出
    a = np.abs(p)
    return 2.0 * np.exp(-a) / (1.0 + np.exp(-2.0 * a))


CUTOFFS: Dict[str, CutoffFunction] = {
    "gaussian": CutoffFunction("gaussian", _gaussian),
    "gaussian_poly": CutoffFunction("gaussian_poly", _gaussian_poly),
    "sech": CutoffFunction("sech", _sech),
}


def get_cutoff(label: str) -> CutoffFunction:
    """按标签取内置截断函数"""
    try:
        return CUTOFFS[label]
    except KeyError:
        raise DomainError(f"未知截断函数: {label}", {"known": sorted(CUTOFFS)}) from None


def custom_cutoff(label: str, evaluator: Callable[[np.ndarray], np.ndarray]) -> CutoffFunction:
    if label in CUTOFFS:
        raise DomainError(f"自定义截断函数不能占用内置标签: {label}")
    return CutoffFunction(label, evaluator)
