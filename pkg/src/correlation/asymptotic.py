"""
分数电荷关联的闭式渐近公式

η = ½: ρ = ½ e^{2πc} |x|^{−1} (1 + f ln|x|)^{1/2}
       crossover 形式再加上 Z⁻ 分支 ½ e^{2πc} |x|^{−1} (1 + f ln|x|)^{−3/2}
η ≠ ½: ρ = e^{8πη²c} |x|^{−4η²} (1 + f ln|x|)^{−2η²} + c(η)² z² e^{8πη̄²c} |x|^{−4η̄²} (1 + f ln|x|)^{−2η̄²}
f = 4π e^{4πc̃_E} L² e^{−4πΓ₀(0)} z；f_a、f̃_b 在二阶截断下取 0。
"""

import math
from typing import Dict, Optional

from pydantic import BaseModel
from scipy import optimize

from src.covariance.family import CovarianceFamily
from src.utils.errors import DomainError, NumericError

FORMS = ("leading", "crossover")


class AsymptoticConstants(BaseModel):
    """上游模块给出的常数；c 为公式中使用的 Coulomb 常数（连续族的 c̃_E 或格点的 c_E）"""

    c: float
    c_tilde_E: float
    gamma0: float
    L: int
    c_eta: Optional[float] = None

    @classmethod
    def from_family(cls, family: CovarianceFamily, c_eta: Optional[float] = None) -> "AsymptoticConstants":
        c = family.c_tilde_E_quadrature
        return cls(c=c, c_tilde_E=c, gamma0=family.gamma0, L=family.L, c_eta=c_eta)


def f_constant(z: float, constants: AsymptoticConstants) -> float:
    return 4.0 * math.pi * math.exp(4.0 * math.pi * constants.c_tilde_E) * constants.L ** 2 * math.exp(-4.0 * math.pi * constants.gamma0) * z


def _log_factor(x: float, f: float) -> float:
    value = 1.0 + f * math.log(x)
    if value <= 0.0:
        raise DomainError("1 + f ln|x| 必须为正", {"x": x, "f": f})
    return value


def branch_terms(x: float, z: float, eta: float, constants: AsymptoticConstants) -> Dict[str, float]:
    """各分支的渐近贡献"""
    if x < 1.0:
        raise DomainError("x 必须不小于 1", {"x": x})
    if not 0.0 < eta < 1.0:
        raise DomainError("η 必须位于 (0, 1)", {"eta": eta})
    f = f_constant(z, constants)
    lf = _log_factor(x, f)
    c = constants.c
    if abs(eta - 0.5) < 1e-15:
        base = 0.5 * math.exp(2.0 * math.pi * c) / x
        return {"plus": base * lf ** 0.5, "minus": base * lf ** -1.5}
    eb2 = (1.0 - eta) ** 2
    e2 = eta * eta
    if constants.c_eta is None:
        raise DomainError("η ≠ ½ 需要 c(η)")
    a = math.exp(8.0 * math.pi * e2 * c) * x ** (-4.0 * e2) * lf ** (-2.0 * e2)
    b = constants.c_eta ** 2 * z * z * math.exp(8.0 * math.pi * eb2 * c) * x ** (-4.0 * eb2) * lf ** (-2.0 * eb2)
    return {"a": a, "abar": b}


def asymptotic_formula(x: float, z: float, eta: float, constants: AsymptoticConstants, form: str = "leading") -> float:
    if form not in FORMS:
        raise DomainError("未知的渐近公式形式", {"form": form, "known": list(FORMS)})
    terms = branch_terms(x, z, eta, constants)
    if abs(eta - 0.5) < 1e-15 and form == "leading":
        return terms["plus"]
    return math.fsum(terms.values())


def crossover_radius(z: float, eta: float, constants: AsymptoticConstants, x_max: float = 1e300) -> Optional[float]:
    """两个分支相等处的 |x|；区间 [1, x_max] 内无交点时返回 None"""
    if abs(eta - 0.5) < 1e-15:
        raise DomainError("η = ½ 的两个分支指数相同，没有交叉点")
    if z <= 0:
        return None
    if not constants.c_eta:
        return None
    f = f_constant(z, constants)
    e2, eb2 = eta * eta, (1.0 - eta) ** 2
    offset = 8.0 * math.pi * (e2 - eb2) * constants.c - 2.0 * math.log(abs(constants.c_eta) * z)

    def gap(log_x: float) -> float:
        """ln(a 分支) − ln(ā 分支)"""
        lf = math.log1p(f * log_x)
        return offset - 4.0 * (e2 - eb2) * log_x - 2.0 * (e2 - eb2) * lf

    lo, hi = 0.0, math.log(x_max)
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0.0:
        return 1.0
    if g_lo * g_hi > 0:
        return None
    try:
        root = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    except (RuntimeError, ValueError) as e:
        raise NumericError(f"交叉半径求根失败: {e}", {"eta": eta, "z": z})
    return math.exp(root)
