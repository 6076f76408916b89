"""
关联剖面的指数拟合

pure_power: ln ρ = c − p ln x
power_log:  ln ρ = c − p ln x + q ln(1 + f ln x)，f 取渐近公式中的值
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel

from src.correlation.series import CorrelationProfile
from src.utils.errors import DomainError, FitError

MODELS = ("pure_power", "power_log")
MIN_POINTS = 8
MIN_DECADES = 1.5
MAX_CONDITION = 1e12


class AsymptoticFit(BaseModel):
    power: float
    logexp: float
    prefactor: float
    residual: float
    model: str

    def report(self) -> dict:
        return self.model_dump()


def fit_points(
    points: Sequence[Tuple[float, float]],
    model: str = "pure_power",
    f: Optional[float] = None,
) -> AsymptoticFit:
    if model not in MODELS:
        raise DomainError("未知的拟合模型", {"model": model, "known": list(MODELS)})
    data = np.array(sorted(points), dtype=float)
    if data.ndim != 2 or data.shape[0] < MIN_POINTS:
        raise FitError("拟合点数不足", {"count": int(data.shape[0]) if data.ndim == 2 else 0, "required": MIN_POINTS})
    x, rho = data[:, 0], data[:, 1]
    if np.any(x <= 0) or np.any(rho <= 0):
        raise FitError("拟合数据必须为正")
    span = math.log10(x.max() / x.min())
    if span < MIN_DECADES:
        raise FitError("拟合区间跨度不足", {"decades": span, "required": MIN_DECADES})

    lx = np.log(x)
    columns = [np.ones_like(lx), -lx]
    if model == "power_log":
        if f is None:
            raise DomainError("power_log 模型需要给定 f")
        columns.append(np.log1p(f * lx))
    design = np.stack(columns, axis=1)
    cond = np.linalg.cond(design)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise FitError("设计矩阵病态", {"condition": float(cond), "model": model})

    target = np.log(rho)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.max(np.abs(design @ coef - target)))
    fit = AsymptoticFit(
        power=float(coef[1]),
        logexp=float(coef[2]) if model == "power_log" else 0.0,
        prefactor=float(math.exp(coef[0])),
        residual=residual,
        model=model,
    )
    logger.debug(f"指数拟合: 模型={model} p={fit.power:.6f} q={fit.logexp:.6f} 残差={residual:.2e}")
    return fit


def fit_exponents(
    profile: CorrelationProfile,
    model: str = "pure_power",
    f: Optional[float] = None,
    branch: str = "total",
) -> AsymptoticFit:
    return fit_points(profile.branch(branch), model, f)
