"""
由电荷流重建分数电荷关联

w⁻₂,a(x) = ½ Σ_n Z_n² L^{−4n} e^{η²α²Γ_{∞,n+1}(x|0)} e^{−η²α²Γ_n(0)} (e^{η²α²Γ_n(x)} − 1)
带横线的版本把 (Z, η) 换成 (Z̄, −η̄)。ρ_η(x) = 2w⁻₂,a(x) + 2w⁻₂,ā(x)。
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.charge_flow.renorm import NEG_INF, ChargeTrajectory
from src.covariance.family import CovarianceFamily
from src.utils.errors import DomainError, RangeError
from src.utils.parallel import parallel_map

SERIES_TOL = 1e-13
SOURCES = ("series", "asymptotic", "free", "oracle")


@dataclass
class CorrelationProfile:
    """(x, ρ, 分支) 点列；branch = "total" 为完整关联"""

    points: List[Tuple[float, float, str]]
    metadata: Dict[str, object] = field(default_factory=dict)

    def branch(self, name: str = "total") -> List[Tuple[float, float]]:
        return sorted((x, r) for x, r, b in self.points if b == name)

    def branches(self) -> List[str]:
        return sorted({b for _, _, b in self.points})

    def window(self, lo: float, hi: float) -> "CorrelationProfile":
        """只保留 lo ≤ x ≤ hi 的点"""
        return CorrelationProfile([p for p in self.points if lo <= p[0] <= hi], dict(self.metadata, window=[lo, hi]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.points, columns=["x", "rho", "branch"])


def n_zero(x_radius: float, L: int) -> int:
    """x = L^{n₀}τ，|τ| ∈ [1, L)"""
    if x_radius < 1.0:
        raise DomainError("x 必须不小于 1", {"x": x_radius})
    return int(math.floor(math.log(x_radius) / math.log(L) + 1e-12))


def geometric_radii(L: int, k_min: int, k_max: int) -> List[float]:
    """x = round(L^{k/2})"""
    return [float(round(float(L) ** (k / 2.0))) for k in range(k_min, k_max + 1)]


def _point(x_radius: float) -> np.ndarray:
    return np.array([[float(x_radius), 0.0]])


def scale_kernel(family: CovarianceFamily, alpha2: float, charge: float, n: int, x_radius: float) -> float:
    """K_n(x) = e^{q²α²Γ_{∞,n+1}(x|0)} e^{−q²α²Γ_n(0)} (e^{q²α²Γ_n(x)} − 1)"""
    k = charge * charge * alpha2
    pt = _point(x_radius)
    tail = float(family.tail_diff(n + 1, pt)[0])
    return math.exp(k * tail - k * family.gamma0) * math.expm1(k * float(family.kernel(n, pt)[0]))


def _log_weights(charge_traj: ChargeTrajectory, barred: bool) -> List[float]:
    return [charge_traj.log_Z2_scaled(n, barred) for n in range(len(charge_traj))]


def _series(log_w: Sequence[float], kernel, n_start: int, tol: float) -> float:
    """½ Σ_{n≥n_start} e^{log_w[n]} K_n，相对截断 tol"""
    terms: List[float] = []
    quiet = 0
    for n in range(n_start, len(log_w)):
        if log_w[n] == NEG_INF:
            terms.append(0.0)
            continue
        term = 0.5 * math.exp(log_w[n]) * kernel(n)
        terms.append(term)
        total = math.fsum(terms)
        if total != 0.0 and abs(term) < tol * abs(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    if terms and not any(terms):
        return 0.0
    raise RangeError("电荷轨迹长度不足以使尺度级数收敛", {"length": len(log_w), "start": n_start})


def w2a_series(
    x_radius: float,
    charge_traj: ChargeTrajectory,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    barred: bool = False,
    n_start: int = 0,
    tol: float = SERIES_TOL,
) -> float:
    """w⁻₂,a(x)，barred=True 时为 w⁻₂,ā(x)"""
    charge = eta - 1.0 if barred else eta
    log_w = _log_weights(charge_traj, barred)
    return _series(log_w, lambda n: scale_kernel(family, alpha2, charge, n, x_radius), n_start, tol)


def branch_series(
    x_radius: float,
    charge_traj: ChargeTrajectory,
    family: CovarianceFamily,
    alpha2: float,
    sign: int,
    tol: float = SERIES_TOL,
) -> float:
    """η = ½ 的 ± 分支：ρ_± = ½ Σ Z±_n² L^{−4n} K_n(x)"""
    lnL = math.log(family.L)
    log_w = []
    for n, st in enumerate(charge_traj.states):
        s, l = st.plus() if sign > 0 else st.minus()
        log_w.append(NEG_INF if s == 0 else 2.0 * l - 4.0 * n * lnL)
    return _series(log_w, lambda n: scale_kernel(family, alpha2, 0.5, n, x_radius), 0, tol)


def rho_eta(
    x_radius: float,
    charge_traj: ChargeTrajectory,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    tol: float = SERIES_TOL,
) -> float:
    """ρ_η(x) = 2w⁻₂,a + 2w⁻₂,ā；w₂,b 与 w₂,c 取 0"""
    a = w2a_series(x_radius, charge_traj, family, alpha2, eta, False, 0, tol)
    abar = w2a_series(x_radius, charge_traj, family, alpha2, eta, True, 0, tol)
    return 2.0 * a + 2.0 * abar


def telescoped_w2a(
    x_radius: float,
    charge_traj: ChargeTrajectory,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    barred: bool = False,
    tol: float = SERIES_TOL,
) -> Dict[str, float]:
    """从 n₀ 起的三种写法

    direct:     逐项求和
    two_series: ½Σ W_n e^{kΓ_{∞,n}(x|0)} − ½Σ W_n e^{−kΓ_n(0)} e^{kΓ_{∞,n+1}(x|0)}，W_n = Z_n²L^{−4n}
    leading:    把 W_n e^{−kΓ_n(0)} 换成 W_{n+1} 后只剩 n = n₀ 的首项
    correction: 被替换掉的差，leading + correction = two_series
    """
    charge = eta - 1.0 if barred else eta
    k = charge * charge * alpha2
    n0 = n_zero(x_radius, family.L)
    log_w = _log_weights(charge_traj, barred)
    pt = _point(x_radius)

    def tail(n: int) -> float:
        return float(family.tail_diff(n, pt)[0])

    direct = _series(log_w, lambda n: scale_kernel(family, alpha2, charge, n, x_radius), n0, tol)
    first = _series(log_w, lambda n: math.exp(k * tail(n)), n0, tol)
    second = _series(log_w, lambda n: math.exp(-k * family.gamma0 + k * tail(n + 1)), n0, tol)
    if n0 >= len(log_w) or log_w[n0] == NEG_INF:
        raise RangeError("电荷轨迹长度不足", {"n0": n0, "length": len(log_w)})
    leading = 0.5 * math.exp(log_w[n0] + k * tail(n0))

    def shifted(n: int) -> float:
        nxt = log_w[n + 1] if n + 1 < len(log_w) else NEG_INF
        a = math.exp(log_w[n] - k * family.gamma0) if log_w[n] != NEG_INF else 0.0
        b = math.exp(nxt) if nxt != NEG_INF else 0.0
        return (a - b) * math.exp(k * tail(n + 1))

    corr_terms = [-0.5 * shifted(n) for n in range(n0, len(log_w) - 1)]
    correction = math.fsum(corr_terms)
    return {
        "n0": float(n0),
        "direct": direct,
        "two_series": first - second,
        "leading": leading,
        "correction": correction,
        "difference": (leading + correction) - (first - second),
    }


def series_profile(
    radii: Sequence[float],
    charge_traj: ChargeTrajectory,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    z: float,
    threads: int = 1,
    source: str = "series",
) -> CorrelationProfile:
    """逐点求 ρ_η，同时给出各分支"""
    if source not in SOURCES:
        raise DomainError("未知的关联来源", {"source": source})
    half = abs(eta - 0.5) < 1e-15

    def evaluate(x: float) -> List[Tuple[float, float, str]]:
        if half:
            plus = branch_series(x, charge_traj, family, alpha2, +1)
            minus = branch_series(x, charge_traj, family, alpha2, -1)
            return [(x, plus + minus, "total"), (x, plus, "plus"), (x, minus, "minus")]
        a = 2.0 * w2a_series(x, charge_traj, family, alpha2, eta, False)
        abar = 2.0 * w2a_series(x, charge_traj, family, alpha2, eta, True)
        return [(x, a + abar, "total"), (x, a, "a"), (x, abar, "abar")]

    rows = parallel_map(evaluate, list(radii), threads=threads, desc="关联剖面")
    points = [p for row in rows for p in row]
    meta = {"eta": eta, "z": z, "L": family.L, "source": source, "alpha2": alpha2}
    return CorrelationProfile(points, meta)


def scale_sum_consistency(family: CovarianceFamily, N: int, x_radius: float) -> float:
    """|Σ_{n≤N}[Γ_n(x) − Γ_n(0)] − (Γ_{∞,0}(x|0) − Γ_{∞,N+1}(x|0))|"""
    pt = _point(x_radius)
    direct = float(family.scale_sum(N, pt)[0])
    tails = float(family.tail_diff(0, pt)[0] - family.tail_diff(N + 1, pt)[0])
    return abs(direct - tails)
