"""
二阶耦合流

s_{j+1} = s_j − a_j z_j²
z_{j+1} = L² e^{−(α²/2)Γ_j(0)} (z_j − b_j s_j z_j)
E_{j+1} = E_j + L^{−2j}(s_j ℰ₂ + s_j² ℰ₃ + z_j² ℰ₄)
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.covariance.family import CovarianceFamily
from src.rg_coefficients.coefficients import CoefficientTable

UNDECIDED = "undecided"
PLASMA_SIDE = "plasma_side"
DIPOLE_SIDE = "dipole_side"
ON_SEPARATRIX = "on_separatrix"
CLASSIFICATIONS = (UNDECIDED, PLASMA_SIDE, DIPOLE_SIDE, ON_SEPARATRIX)


@dataclass(frozen=True)
class CouplingState:
    j: int
    s: float
    z: float
    E: float = 0.0
    tag: str = UNDECIDED

    def finite(self) -> bool:
        return math.isfinite(self.s) and math.isfinite(self.z) and math.isfinite(self.E)


def frozen_coefficients(coeffs: CoefficientTable, j: int, j_freeze: Optional[int] = None) -> Dict[str, float]:
    """j > j_freeze 时取 j_freeze 处的系数"""
    if j_freeze is not None:
        j = min(j, j_freeze)
    return coeffs.at(j)


def limit_constants(coeffs: CoefficientTable, j_freeze: Optional[int] = None) -> Dict[str, float]:
    """冻结后的 (a, b)，用于参考序列 q_j"""
    last = coeffs.j_last if j_freeze is None else min(j_freeze, coeffs.j_last)
    row = coeffs.at(last)
    return {"a": row["a"], "b": row["b"]}


def z_prefactor(family: CovarianceFamily, alpha2: float, j: int) -> float:
    """L² e^{−(α²/2)Γ_j(0)}，α² = 8π 时恰为 1"""
    return float(family.L) ** 2 * math.exp(-0.5 * alpha2 * family.gamma0)


def flow_step(
    state: CouplingState,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    j_freeze: Optional[int] = None,
) -> CouplingState:
    c = frozen_coefficients(coeffs, state.j, j_freeze)
    j, s, z = state.j, state.s, state.z
    s_next = s - c["a"] * z * z
    z_next = z_prefactor(family, alpha2, j) * (z - c["b"] * s * z)
    increment = float(family.L) ** (-2 * j) * (s * c["E2"] + s * s * c["E3"] + z * z * c["E4"])
    # 自由能累加用扩展精度
    E_next = float(np.longdouble(state.E) + np.longdouble(increment))
    return CouplingState(j + 1, s_next, z_next, E_next, state.tag)


def q_sequence(q1: float, count: int) -> List[float]:
    """q_j = q₁/(1 + |q₁|(j − 1))，下标从 1 开始，返回 [q_1, …, q_count]"""
    return [q1 / (1.0 + abs(q1) * (j - 1)) for j in range(1, count + 1)]


def q_recursion(q1: float, count: int) -> List[float]:
    """q_{j+1} = q_j/(1 + |q_j|)"""
    out = [q1]
    while len(out) < count:
        q = out[-1]
        out.append(q / (1.0 + abs(q)))
    return out


@dataclass
class CouplingTrajectory:
    states: List[CouplingState]
    a: float
    b: float
    L: int
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def s0(self) -> float:
        return self.states[0].s

    @property
    def z0(self) -> float:
        return self.states[0].z

    @property
    def tag(self) -> str:
        return self.states[-1].tag

    @property
    def q1(self) -> float:
        """q₁ = √(ab) z₁"""
        z1 = self.states[1].z if len(self.states) > 1 else self.states[0].z
        return math.sqrt(max(self.a * self.b, 0.0)) * z1

    def q(self, j: int) -> float:
        if j < 1:
            return self.q1
        return self.q1 / (1.0 + abs(self.q1) * (j - 1))

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, j: int) -> CouplingState:
        return self.states[j]

    def retag(self, tag: str) -> "CouplingTrajectory":
        states = self.states[:-1] + [replace(self.states[-1], tag=tag)]
        return CouplingTrajectory(states, self.a, self.b, self.L, dict(self.tolerances))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "j": [st.j for st in self.states],
                "s": [st.s for st in self.states],
                "z": [st.z for st in self.states],
                "E": [st.E for st in self.states],
                "q": [self.q(st.j) for st in self.states],
            }
        )


def run_flow(
    s0: float,
    z0: float,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    J: int,
    j_freeze: Optional[int] = None,
) -> CouplingTrajectory:
    """不做分类地迭代 J 步"""
    states = [CouplingState(0, s0, z0)]
    for _ in range(J):
        states.append(flow_step(states[-1], coeffs, family, alpha2, j_freeze))
    limits = limit_constants(coeffs, j_freeze)
    return CouplingTrajectory(states, limits["a"], limits["b"], family.L)
