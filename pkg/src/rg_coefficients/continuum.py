"""
连续协方差下系数的极限值

径向一维积分，核为 e^{qα²Γ̃_{∞,1}(y|0)}：
  a = (α²/2)·2π ∫₀^∞ r³ e^{α²T(r/L)} e^{−α²Γ(0)}(e^{α²Γ̃₀(r)} − 1) dr
  m₂₁ = 2π ∫₀^∞ r e^{ηα²T(r/L)} e^{−ηα²Γ(0)}(e^{ηα²Γ̃₀(r)} − 1) dr
  b = (α²/2)(1/2π) ∫ dq/q D(q)[D(q) + 2Σ_{k≥1} λ^k D(q/L^k)]，D(q) = u(q) − u(Lq)，λ = L^{2−α²/4π}
其中 T 为尾和 Γ̃_{∞,0}(·|0)。α² = 8π 时三者伸缩求和，分别等于
8π²e^{8πc̃_E}lnL、2lnL 与 (η = ½) 2πe^{4πc̃_E}lnL。
"""

import math
from typing import Optional, Tuple

import numpy as np
from loguru import logger
from scipy import integrate

from src.covariance.cutoff import CutoffFunction, get_cutoff
from src.covariance.family import CovarianceFamily, build_family
from src.utils.errors import NumericError

EIGHT_PI = 8.0 * math.pi


def _quad(func, breakpoints, what: str) -> float:
    """分段 quad，最后一段积到无穷"""
    total = 0.0
    for lo, hi in zip(breakpoints[:-1], breakpoints[1:]):
        value, err = integrate.quad(func, lo, hi, limit=400, epsabs=0.0, epsrel=1e-12)
        if not math.isfinite(value):
            raise NumericError(f"{what} 积分出现非有限值", {"interval": [lo, hi]})
        if err > 1e-7 * max(abs(value), 1.0):
            raise NumericError(f"{what} 积分不收敛", {"interval": [lo, hi], "error": err})
        total += value
    value, err = integrate.quad(func, breakpoints[-1], np.inf, limit=400, epsabs=1e-15, epsrel=1e-12)
    if not math.isfinite(value):
        raise NumericError(f"{what} 尾部积分出现非有限值")
    return total + value


def _radial_breakpoints(L: int) -> list:
    return [0.0, 0.5, 1.0, 2.0, 4.0, float(L), 4.0 * L, 16.0 * L, 40.0 * L]


def a_limit_integral(family: CovarianceFamily, alpha2: float) -> float:
    profile, L, g0 = family.profile, family.L, family.gamma0

    def integrand(r: float) -> float:
        rho = np.array([r])
        tail = float(profile.tail_diff(rho / L)[0])
        local = math.exp(-alpha2 * g0) * math.expm1(alpha2 * float(profile.value(rho)[0]))
        return r ** 3 * math.exp(alpha2 * tail) * local

    return 0.5 * alpha2 * 2.0 * math.pi * _quad(integrand, _radial_breakpoints(L), "a 极限")


def m21_limit_integral(family: CovarianceFamily, alpha2: float, eta: float) -> float:
    profile, L, g0 = family.profile, family.L, family.gamma0
    q = eta * alpha2

    def integrand(r: float) -> float:
        rho = np.array([r])
        tail = float(profile.tail_diff(rho / L)[0])
        local = math.exp(-q * g0) * math.expm1(q * float(profile.value(rho)[0]))
        return r * math.exp(q * tail) * local

    return 2.0 * math.pi * _quad(integrand, _radial_breakpoints(L), "m21 极限")


def b_limit_integral(cutoff: CutoffFunction, L: int, alpha2: float) -> float:
    lam = float(L) ** (2.0 - alpha2 / (4.0 * math.pi))
    # D(q/L^k) ~ q²L^{−2k}，λ^k L^{−2k} = L^{−kα²/4π}
    decay = alpha2 / (4.0 * math.pi) * math.log(L)
    k_max = int(math.ceil(40.0 / max(decay, 1e-3))) + 2

    def shell(q: float) -> float:
        return float(cutoff(np.array([q]))[0] - cutoff(np.array([L * q]))[0])

    def integrand(q: float) -> float:
        d = shell(q)
        if d == 0.0:
            return 0.0
        series = 0.0
        for k in range(1, k_max + 1):
            term = lam ** k * shell(q / float(L) ** k)
            series += term
            if q / float(L) ** k < 1e-3 and abs(term) < 1e-18 * (abs(series) + abs(d)):
                break
        return d * (d + 2.0 * series) / q

    breaks = [0.0] + [float(L) ** (-k) for k in range(6, 0, -1)] + [1.0, 2.0, 4.0, 8.0]
    return 0.5 * alpha2 / (2.0 * math.pi) * _quad(integrand, breaks, "b 极限")


def compute_asymptotic_continuum(
    L: int,
    alpha2: float,
    eta: float = 0.5,
    cutoff: "CutoffFunction | str" = "gaussian",
    family: Optional[CovarianceFamily] = None,
) -> Tuple[float, float, Optional[float]]:
    """返回 (a_limit, b_limit, m21_limit)；m21 的伸缩求和只在 η = ½ 成立，其余情形返回 None"""
    if isinstance(cutoff, str):
        cutoff = get_cutoff(cutoff)
    if family is None:
        family = build_family(L, 2, cutoff)
    a = a_limit_integral(family, alpha2)
    b = b_limit_integral(family.cutoff, family.L, alpha2)
    m21 = m21_limit_integral(family, alpha2, eta) if abs(eta - 0.5) < 1e-15 else None
    logger.info(f"连续极限: L={L} α²={alpha2:.6f} a={a:.10f} b={b:.10f} m21={m21}")
    return a, b, m21


def closed_form_limits(family: CovarianceFamily) -> Tuple[float, float, float]:
    """α² = 8π 时的伸缩求和结果 (a, b, m21)"""
    c = family.c_tilde_E_quadrature
    lnL = math.log(family.L)
    return 8.0 * math.pi ** 2 * math.exp(EIGHT_PI * c) * lnL, 2.0 * lnL, 2.0 * math.pi * math.exp(4.0 * math.pi * c) * lnL
