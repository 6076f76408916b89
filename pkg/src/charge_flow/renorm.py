"""
分数电荷重整化常数 (Z_j, Z̄_j) 的二阶流

Z_{j+1} = L² e^{−η²(α²/2)Γ_j(0)} [(1 − s_j m₁₁,j) Z_j + z_j m₁₂,j Z̄_j]
Z̄_{j+1} = L² e^{−η̄²(α²/2)Γ_j(0)} [(1 − s_j m₂₂,j) Z̄_j + z_j m₂₁,j Z_j]

Z_j 按 L^{2(1−η²)j} 增长，递推在对数域中进行，符号单独记录。
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.covariance.family import CovarianceFamily
from src.rg_coefficients.coefficients import CoefficientTable
from src.rg_flow.coupling import CouplingState, CouplingTrajectory, frozen_coefficients
from src.utils.errors import DomainError, RangeError

NEG_INF = float("-inf")


def log_combine(terms: Iterable[Tuple[float, int, float]]) -> Tuple[int, float]:
    """Σ c·σ·e^{ℓ}，输入 (c, σ, ℓ)，返回 (符号, ln|和|)"""
    items = [(c, s, l) for c, s, l in terms if s != 0 and c != 0.0 and l != NEG_INF]
    if not items:
        return 0, NEG_INF
    top = max(l for _, _, l in items)
    total = math.fsum(c * s * math.exp(l - top) for c, s, l in items)
    if total == 0.0:
        return 0, NEG_INF
    return (1 if total > 0 else -1), top + math.log(abs(total))


def to_log(value: float) -> Tuple[int, float]:
    if value == 0.0:
        return 0, NEG_INF
    return (1 if value > 0 else -1), math.log(abs(value))


@dataclass(frozen=True)
class RenormState:
    j: int
    sign_Z: int
    log_Z: float
    sign_Zbar: int
    log_Zbar: float
    g: float = 0.0

    @classmethod
    def initial(cls, Z: float = 1.0, Zbar: float = 0.0) -> "RenormState":
        sz, lz = to_log(Z)
        sb, lb = to_log(Zbar)
        return cls(0, sz, lz, sb, lb, 0.0)

    @property
    def Z(self) -> float:
        return self.sign_Z * math.exp(self.log_Z) if self.sign_Z else 0.0

    @property
    def Zbar(self) -> float:
        return self.sign_Zbar * math.exp(self.log_Zbar) if self.sign_Zbar else 0.0

    def plus(self) -> Tuple[int, float]:
        """Z⁺ = Z + Z̄"""
        return log_combine([(1.0, self.sign_Z, self.log_Z), (1.0, self.sign_Zbar, self.log_Zbar)])

    def minus(self) -> Tuple[int, float]:
        """Z⁻ = Z − Z̄"""
        return log_combine([(1.0, self.sign_Z, self.log_Z), (-1.0, self.sign_Zbar, self.log_Zbar)])

    def swapped(self) -> "RenormState":
        return RenormState(self.j, self.sign_Zbar, self.log_Zbar, self.sign_Z, self.log_Z, self.g)

    def finite(self) -> bool:
        return all(not math.isnan(v) and v != float("inf") for v in (self.log_Z, self.log_Zbar))


def scale_factor_log(family: CovarianceFamily, alpha2: float, charge: float) -> float:
    """ln(L² e^{−q²(α²/2)Γ_j(0)})"""
    return 2.0 * math.log(family.L) - charge * charge * 0.5 * alpha2 * family.gamma0


def g_sequence(family: CovarianceFamily, j: int) -> float:
    """g_j = −π Σ_{k=1}^{j}[Γ_k(0) − lnL/2π]；精确 Γ_k(0) 下恒为 0"""
    return -math.pi * (family.partial_at_zero(j, 1) - j * math.log(family.L) / (2.0 * math.pi))


def step_matrix(coupling: CouplingState, row: Dict[str, float]) -> np.ndarray:
    """方括号内的 2×2 矩阵"""
    s, z = coupling.s, coupling.z
    return np.array(
        [
            [1.0 - s * row["m11"], z * row["m12"]],
            [z * row["m21"], 1.0 - s * row["m22"]],
        ]
    )


def charge_step(
    state: RenormState,
    coupling: CouplingState,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    j_freeze: Optional[int] = None,
) -> RenormState:
    if coupling.j != state.j:
        raise DomainError("耦合态与电荷态的尺度不一致", {"coupling": coupling.j, "charge": state.j})
    row = frozen_coefficients(coeffs, state.j, j_freeze)
    M = step_matrix(coupling, row)
    eta_bar = eta - 1.0
    sz, lz = log_combine([(M[0, 0], state.sign_Z, state.log_Z), (M[0, 1], state.sign_Zbar, state.log_Zbar)])
    sb, lb = log_combine([(M[1, 1], state.sign_Zbar, state.log_Zbar), (M[1, 0], state.sign_Z, state.log_Z)])
    if sz:
        lz += scale_factor_log(family, alpha2, eta)
    if sb:
        lb += scale_factor_log(family, alpha2, eta_bar)
    return RenormState(state.j + 1, sz, lz, sb, lb, g_sequence(family, state.j + 1))


@dataclass
class ChargeTrajectory:
    states: List[RenormState]
    eta: float
    alpha2: float
    L: int
    q1: float
    q: List[float]

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, j: int) -> RenormState:
        return self.states[j]

    @property
    def J(self) -> int:
        return self.states[-1].j

    def log_Z2_scaled(self, n: int, barred: bool = False) -> float:
        """ln(Z_n² L^{−4n})，Z_n = 0 时为 −∞"""
        if n >= len(self.states):
            raise RangeError("电荷轨迹长度不足", {"n": n, "length": len(self.states)})
        st = self.states[n]
        sign, log_abs = (st.sign_Zbar, st.log_Zbar) if barred else (st.sign_Z, st.log_Z)
        if sign == 0:
            return NEG_INF
        return 2.0 * log_abs - 4.0 * n * math.log(self.L)

    def normalized_pm(self) -> pd.DataFrame:
        """η = ½ 的归一化量 ln Z^±_{j+1} − (3/2)j lnL − g_j 以及减去对数修正后的漂移"""
        lnL = math.log(self.L)
        rows = []
        for st in self.states[1:]:
            j = st.j - 1
            sp, lp = st.plus()
            sm, lm = st.minus()
            log_corr = math.log1p(abs(self.q1) * j)
            base_p = lp - 1.5 * j * lnL - st.g
            base_m = lm - 1.5 * j * lnL - st.g
            rows.append(
                {
                    "j": j,
                    "norm_plus": base_p,
                    "norm_minus": base_m,
                    "drift_plus": base_p - 0.25 * log_corr,
                    "drift_minus": base_m + 0.75 * log_corr,
                    "sign_plus": sp,
                    "sign_minus": sm,
                }
            )
        return pd.DataFrame(rows)

    def normalized_dominant(self, family: CovarianceFamily) -> pd.DataFrame:
        """η ≠ ½：ln Z_{j+1} − [2j lnL − η²(α²/2)Γ_{j,1}(0)] + η² ln(1 + |q₁|j)，η > ½ 时取 Z̄"""
        lnL = math.log(self.L)
        charge = self.eta if self.eta < 0.5 else self.eta - 1.0
        rows = []
        for st in self.states[1:]:
            j = st.j - 1
            sign, log_abs = (st.sign_Z, st.log_Z) if self.eta < 0.5 else (st.sign_Zbar, st.log_Zbar)
            free = 2.0 * j * lnL - charge * charge * 0.5 * self.alpha2 * family.partial_at_zero(j, 1)
            rows.append(
                {
                    "j": j,
                    "drift": log_abs - free + charge * charge * math.log1p(abs(self.q1) * j),
                    "ratio": self._ratio(st),
                    "sign": sign,
                }
            )
        return pd.DataFrame(rows)

    def _ratio(self, st: RenormState) -> float:
        """次要分量与主导分量之比"""
        if self.eta < 0.5:
            num, den = (st.sign_Zbar, st.log_Zbar), (st.sign_Z, st.log_Z)
        else:
            num, den = (st.sign_Z, st.log_Z), (st.sign_Zbar, st.log_Zbar)
        if num[0] == 0:
            return 0.0
        if den[0] == 0:
            return float("inf")
        return num[0] * den[0] * math.exp(num[1] - den[1])

    def growth_ratios(self) -> pd.DataFrame:
        """|Z_j/Z_{j+1}| 与 |Z̄_j/Z̄_{j+1}|"""
        rows = []
        for prev, cur in zip(self.states[1:-1], self.states[2:]):
            rz = math.exp(prev.log_Z - cur.log_Z) if prev.sign_Z and cur.sign_Z else float("nan")
            rb = math.exp(prev.log_Zbar - cur.log_Zbar) if prev.sign_Zbar and cur.sign_Zbar else float("nan")
            rows.append({"j": prev.j, "ratio_Z": rz, "ratio_Zbar": rb})
        return pd.DataFrame(rows)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for st in self.states:
            _, lp = st.plus()
            _, lm = st.minus()
            q = self.q[st.j] if st.j < len(self.q) else float("nan")
            rows.append({"j": st.j, "lnZ": st.log_Z, "lnZbar": st.log_Zbar, "lnZplus": lp, "lnZminus": lm, "q": q})
        return pd.DataFrame(rows)


def mirror_table(coeffs: CoefficientTable) -> CoefficientTable:
    """η ↔ 1 − η 的系数表：m₁₁ 与 m₂₂、m₁₂ 与 m₂₁ 互换"""
    return coeffs.model_copy(
        update={"eta": 1.0 - coeffs.eta, "m11": coeffs.m22, "m22": coeffs.m11, "m12": coeffs.m21, "m21": coeffs.m12}
    )


def run_charge_flow(
    coupling_traj: CouplingTrajectory,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    J: Optional[int] = None,
    initial: Optional[RenormState] = None,
    j_freeze: Optional[int] = None,
) -> ChargeTrajectory:
    """η > ½ 时换到 1 − η 的镜像问题上迭代，结果再把 Z 与 Z̄ 换回"""
    if not 0.0 < eta < 1.0:
        raise DomainError("η 必须位于 (0, 1)", {"eta": eta})
    available = len(coupling_traj.states) - 1
    J = available if J is None else J
    if J > available:
        raise RangeError("耦合轨迹长度不足", {"J": J, "available": available})
    state = initial or RenormState.initial()
    if eta > 0.5:
        logger.debug(f"η={eta} > ½，按镜像电荷 {1.0 - eta} 迭代")
        image = run_charge_flow(coupling_traj, mirror_table(coeffs), family, alpha2, 1.0 - eta, J, state.swapped(), j_freeze)
        states = [st.swapped() for st in image.states]
        return ChargeTrajectory(states, eta, alpha2, family.L, image.q1, image.q)
    states = [state]
    for j in range(J):
        state = charge_step(state, coupling_traj.states[j], coeffs, family, alpha2, eta, j_freeze)
        if not state.finite():
            raise RangeError("电荷流出现非有限值", {"j": j})
        states.append(state)
    q = [coupling_traj.q(j) for j in range(J + 1)]
    logger.info(f"电荷流完成: η={eta} J={J} ln Z_J={states[-1].log_Z:.6f} ln Z̄_J={states[-1].log_Zbar:.6f}")
    return ChargeTrajectory(states, eta, alpha2, family.L, coupling_traj.q1, q)


def linear_charge_flow(
    coupling_traj: CouplingTrajectory,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    J: int,
    initial: Tuple[float, float] = (1.0, 0.0),
    j_freeze: Optional[int] = None,
) -> List[Tuple[float, float]]:
    """线性域的同一递推，只在不溢出的短轨迹上用于核对"""
    eta_bar = eta - 1.0
    Z, Zbar = initial
    out = [(Z, Zbar)]
    for j in range(J):
        row = frozen_coefficients(coeffs, j, j_freeze)
        M = step_matrix(coupling_traj.states[j], row)
        Z, Zbar = (
            math.exp(scale_factor_log(family, alpha2, eta)) * (M[0, 0] * Z + M[0, 1] * Zbar),
            math.exp(scale_factor_log(family, alpha2, eta_bar)) * (M[1, 0] * Z + M[1, 1] * Zbar),
        )
        out.append((Z, Zbar))
    return out


def pm_step(coupling: CouplingState, row: Dict[str, float], family: CovarianceFamily, alpha2: float) -> Tuple[float, float]:
    """η = ½ 的解耦标量乘子：Z^±_{j+1} = L²e^{−(α²/8)Γ_j(0)}(1 − s m₁₁ ± z m₁₂) Z^±_j"""
    factor = math.exp(scale_factor_log(family, alpha2, 0.5))
    s, z = coupling.s, coupling.z
    return factor * (1.0 - s * row["m11"] + z * row["m12"]), factor * (1.0 - s * row["m11"] - z * row["m12"])


def run_pm_flow(
    coupling_traj: CouplingTrajectory,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    J: int,
    j_freeze: Optional[int] = None,
) -> List[Tuple[float, float]]:
    """(ln Z⁺_j, ln|Z⁻_j|)，初值 Z^± = 1"""
    lp, lm = 0.0, 0.0
    out = [(lp, lm)]
    for j in range(J):
        row = frozen_coefficients(coeffs, j, j_freeze)
        fp, fm = pm_step(coupling_traj.states[j], row, family, alpha2)
        lp += math.log(abs(fp))
        lm += math.log(abs(fm))
        out.append((lp, lm))
    return out
