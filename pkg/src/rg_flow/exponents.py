"""
分数电荷关联的临界指数
"""

import math

from src.utils.errors import DomainError


def exponent_table(beta_eff: float, eta: float) -> float:
    """κ = (β_eff/4π)·min(η, 1−η)²，η = 1 时为 4"""
    if not 0.0 < eta <= 1.0:
        raise DomainError("η 必须位于 (0, 1]", {"eta": eta})
    if eta == 1.0:
        return 4.0
    h = eta if eta <= 0.5 else 1.0 - eta
    return beta_eff / (4.0 * math.pi) * h * h
