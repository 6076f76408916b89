"""
跳跃过程矩阵 Q(f, i)

|η| < |η̄| 时把电荷流写成
  (Z, Z̄)_{j+1} = L² e^{−η²(α²/2)Γ_j(0) − η²|q_j| + m_j} [diag(1, ℓ_j) + offdiag(m₋,j, m₊,j)] (Z, Z̄)_j
Q(f, i) = Π_{n=i}^{f} 上述方括号，左乘次序为 n 递减。
η > ½ 时交换 Z 与 Z̄、η 与 −η̄，复用同一套公式。
"""

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.covariance.family import CovarianceFamily
from src.rg_coefficients.coefficients import CoefficientTable
from src.rg_flow.coupling import CouplingTrajectory, frozen_coefficients
from src.utils.errors import DomainError, ResourceError

MAX_ENUMERATION_SPAN = 16


@dataclass(frozen=True)
class ScaleDecomposition:
    n: int
    prefactor_log: float
    m: float
    ell: float
    m_minus: float
    m_plus: float

    def matrix(self) -> np.ndarray:
        return np.array([[1.0, self.m_minus], [self.m_plus, self.ell]])


def oriented_row(row: Dict[str, float], eta: float) -> Tuple[float, Dict[str, float], bool]:
    """返回 (主导电荷, 定向后的 m 系数, 是否镜像)"""
    if abs(eta - 0.5) < 1e-15:
        raise DomainError("η = ½ 没有主导分量，使用 ± 基", {"eta": eta})
    if eta < 0.5:
        return eta, dict(row), False
    mirrored = dict(row)
    mirrored["m11"], mirrored["m22"] = row["m22"], row["m11"]
    mirrored["m12"], mirrored["m21"] = row["m21"], row["m12"]
    return 1.0 - eta, mirrored, True


def decompose(
    coupling_traj: CouplingTrajectory,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    J: int,
    j_freeze: Optional[int] = None,
) -> List[ScaleDecomposition]:
    """n = 1..J 的 (前因子, m_n, ℓ_n, m₋,n, m₊,n)"""
    half = 0.5 * alpha2
    lnL = math.log(family.L)
    out = []
    for n in range(1, J + 1):
        state = coupling_traj.states[n]
        row = frozen_coefficients(coeffs, n, j_freeze)
        h, r, _ = oriented_row(row, eta)
        hb2 = (1.0 - h) ** 2
        h2 = h * h
        q = abs(coupling_traj.q(n))
        gap = -half * (hb2 - h2) * family.gamma0
        m = math.log(1.0 - r["m11"] * state.s) + h2 * q
        base = h2 * q - m
        out.append(
            ScaleDecomposition(
                n=n,
                prefactor_log=2.0 * lnL - half * h2 * family.gamma0 - h2 * q + m,
                m=m,
                ell=math.exp(gap + base) * (1.0 - r["m22"] * state.s),
                m_minus=math.exp(base) * r["m12"] * state.z,
                m_plus=math.exp(gap + base) * r["m21"] * state.z,
            )
        )
    return out


def q_matrix(j: int, j0: int, decomposition: List[ScaleDecomposition]) -> np.ndarray:
    """Q(j, j₀)；j₀ > j 时为单位阵"""
    if j0 < 1:
        raise DomainError("j₀ 必须不小于 1", {"j0": j0})
    by_scale = {d.n: d for d in decomposition}
    Q = np.eye(2)
    for n in range(j0, j + 1):
        if n not in by_scale:
            raise DomainError("分解未覆盖该尺度", {"n": n})
        Q = by_scale[n].matrix() @ Q
    return Q


def enumerate_paths(j: int, j0: int, decomposition: List[ScaleDecomposition]) -> np.ndarray:
    """两态跳跃过程逐路径求和，与 q_matrix 相互独立"""
    span = j - j0 + 1
    if span > MAX_ENUMERATION_SPAN:
        raise ResourceError("路径枚举跨度过大", {"span": span, "limit": MAX_ENUMERATION_SPAN})
    by_scale = {d.n: d.matrix() for d in decomposition}
    Q = np.zeros((2, 2))
    for start in (0, 1):
        for path in itertools.product((0, 1), repeat=span):
            weight = 1.0
            prev = start
            for n, state in zip(range(j0, j + 1), path):
                weight *= by_scale[n][state, prev]
                prev = state
            Q[path[-1], start] += weight
    return Q


def adaptive_j0(decomposition: List[ScaleDecomposition], L: int, eta: float) -> int:
    """第一个满足 ℓ_n ≤ L^{−(η̄² − η²)} 的尺度"""
    h = eta if eta < 0.5 else 1.0 - eta
    bound = float(L) ** (-((1.0 - h) ** 2 - h * h))
    for d in decomposition:
        if abs(d.ell) <= bound:
            return d.n
    return decomposition[-1].n if decomposition else 1


def prefactor_log(decomposition: List[ScaleDecomposition], j: int) -> float:
    """Σ_{n=1}^{j} 前因子的对数"""
    return math.fsum(d.prefactor_log for d in decomposition if d.n <= j)


def decomposition_frame(decomposition: List[ScaleDecomposition]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"n": d.n, "prefactor_log": d.prefactor_log, "m": d.m, "ell": d.ell, "m_minus": d.m_minus, "m_plus": d.m_plus} for d in decomposition]
    )
