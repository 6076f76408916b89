"""
常数 c(η)

c(η) = Σ_{n≥0} L^{−2n} e^{−(α²/2)(η̄² − η²)Γ_{n−1,0}(0)}
       Σ_y e^{−η̄α²Γ_{∞,n+1}(y|0)} e^{η̄α²Γ_n(0)} (e^{−η̄α²Γ_n(y)} − 1)

对 η ∈ (0, ½) 求和项按 L^{−2(η̄²−η²)} 几何衰减且严格为正。
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from loguru import logger

from src.config.settings import Settings
from src.covariance.family import CovarianceFamily
from src.covariance.lattice_sum import LatticeSummer, ScaleStack
from src.utils.errors import DomainError, NumericError

MAX_TERMS = 400


@dataclass
class CEtaResult:
    eta: float
    value: float
    terms: List[float] = field(default_factory=list)

    @property
    def ratios(self) -> List[float]:
        return [b / a for a, b in zip(self.terms[:-1], self.terms[1:]) if a != 0.0]


def c_eta_summand(alpha2: float, eta: float, n: int):
    eps = 1.0 - eta  # −η̄

    def summand(s: ScaleStack) -> np.ndarray:
        return np.exp(eps * alpha2 * s.gt(n + 1)) * math.exp(-eps * alpha2 * s.gamma0) * np.expm1(eps * alpha2 * s.g(n))

    return summand


def c_eta_series(
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    tol: float = 1e-12,
    settings: Optional[Settings] = None,
    summer: Optional[LatticeSummer] = None,
) -> CEtaResult:
    if not 0.0 < eta < 1.0:
        raise DomainError("η 必须位于 (0, 1)", {"eta": eta})
    if abs(eta - 0.5) < 1e-15:
        raise DomainError("η = ½ 时 c(η) 的级数不收敛", {"eta": eta})
    mirrored = eta > 0.5
    h = 1.0 - eta if mirrored else eta
    gap = (1.0 - h) ** 2 - h * h
    summer = summer or LatticeSummer(family, settings)
    L = float(family.L)

    terms: List[float] = []
    quiet = 0
    for n in range(MAX_TERMS):
        weight = L ** (-2 * n) * math.exp(-0.5 * alpha2 * gap * family.partial_at_zero(n - 1, 0))
        term = weight * summer.total(c_eta_summand(alpha2, h, n), n)
        if not math.isfinite(term):
            raise NumericError("c(η) 级数出现非有限项", {"n": n, "eta": eta})
        terms.append(term)
        total = math.fsum(terms)
        if abs(term) < tol * abs(total):
            quiet += 1
            if quiet >= 3:
                break
        else:
            quiet = 0
    else:
        raise NumericError("c(η) 级数未收敛", {"eta": eta, "terms": MAX_TERMS})

    value = math.fsum(terms)
    logger.info(f"c(η) 计算完成: η={eta} 镜像={mirrored} 项数={len(terms)} 值={value:.12e}")
    return CEtaResult(eta, value, terms)


def c_eta(family: CovarianceFamily, alpha2: float, eta: float, tol: float = 1e-12, settings: Optional[Settings] = None) -> float:
    return c_eta_series(family, alpha2, eta, tol, settings).value


def c2_second_order(z: float, family: CovarianceFamily, alpha2: float, eta: float, c_value: float, m_off0: float) -> float:
    """c₂ = z e^{(α²/2)(η̄² − η²)Γ₀(0)} [c(η) − m₁₂,₀]；η > ½ 时传入镜像后的 c 与 m₂₁,₀"""
    h = eta if eta < 0.5 else 1.0 - eta
    gap = (1.0 - h) ** 2 - h * h
    return z * math.exp(0.5 * alpha2 * gap * family.gamma0) * (c_value - m_off0)
