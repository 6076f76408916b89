"""
逐尺度流方程系数

a_j、b_j 驱动 (s, z) 的耦合流，m_{p,q,j} 驱动分数电荷重整化常数，ℰ_{2,3,4} 进入自由能。
所有 y 求和都交给 LatticeSummer；û 上的求和按轴折叠，见 kernels 模块。
"""

import math
from typing import ClassVar, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from src.config.settings import Settings
from src.covariance.family import CovarianceFamily
from src.covariance.lattice_sum import LatticeSummer, ScaleStack
from src.rg_coefficients.kernels import scale_weight, w0b, w1c
from src.utils.errors import DomainError
from src.utils.logger import setup_logger
from src.utils.parallel import parallel_map

M_FORMS = ("recursion", "display")


def a_summand(alpha2: float, j: int):
    """权重从 n = 0 起且不带 ½：α²Σ|y|²[Σ_{n≤j}R^{(j)}_n − Σ_{n<j}R^{(j−1)}_n] 展开后的形式"""

    def summand(s: ScaleStack) -> np.ndarray:
        wb = scale_weight(s, alpha2, j, first=0)
        local = math.exp(-alpha2 * s.gamma0) * np.expm1(alpha2 * s.g(j)) * s.L ** (-4 * j)
        return 0.5 * alpha2 * s.r2 * (wb * np.expm1(alpha2 * s.gd(j)) + local)

    return summand


def b_summand(alpha2: float, j: int):
    def summand(s: ScaleStack) -> np.ndarray:
        total = s.zeros()
        for a in (0, 1):
            dj = s.d(j, a)
            cross = s.zeros()
            for n in range(j):
                weight = math.exp(-0.5 * alpha2 * (j - n) * s.gamma0) * s.L ** (2 * (j - n))
                cross = cross + weight * s.d(n, a)
            total = total + dj * dj + 2.0 * cross * dj
        return 0.5 * alpha2 * total

    return summand


def m_diagonal_summand(alpha2: float, charge: float, j: int, form: str = "recursion"):
    """m₁₁ (charge = η) 与 m₂₂ (charge = η̄)

    recursion: (α²q²/2) Σ_a [(∂Γ_j)² + 2∂Γ_{j−1,0}·∂Γ_j]
    display:   交叉项带权 L^{2(j−n)} e^{−q²(α²/2)Γ_{j−1,n}(0)}
    """
    q2 = charge * charge

    def summand(s: ScaleStack) -> np.ndarray:
        total = s.zeros()
        for a in (0, 1):
            dj = s.d(j, a)
            if form == "recursion":
                cross = s.dp(j - 1, 0, a)
            else:
                cross = s.zeros()
                for n in range(j):
                    weight = s.L ** (2 * (j - n)) * math.exp(-q2 * 0.5 * alpha2 * (j - n) * s.gamma0)
                    cross = cross + weight * s.d(n, a)
            total = total + dj * dj + 2.0 * cross * dj
        return 0.5 * alpha2 * q2 * total

    return summand


def m_offdiagonal_summand(alpha2: float, charge: float, j: int):
    """m₂₁ (charge = η, 核 w₁,c) 与 m₁₂ (charge = −η̄, 核 w̄₁,c)"""

    def summand(s: ScaleStack) -> np.ndarray:
        kernel = w1c(s, alpha2, charge, j)
        local = s.L ** (-2 * j) * math.exp(-charge * alpha2 * s.gamma0) * np.expm1(charge * alpha2 * s.g(j))
        return kernel * np.expm1(charge * alpha2 * s.gd(j)) + local

    return summand


def e3_summand(j: int):
    def summand(s: ScaleStack) -> np.ndarray:
        total = s.zeros()
        for a in (0, 1):
            for b in (0, 1):
                ddj = s.dd(j, a, b)
                total = total + (ddj + 2.0 * s.ddp(j - 1, 1, a, b)) * ddj
        return 0.25 * s.L ** (2 * j) * total

    return summand


def e4_summand(alpha2: float, j: int, laplacian0: float):
    def summand(s: ScaleStack) -> np.ndarray:
        # 减去 |y|² 的 Taylor 项后括号为 O(|y|⁴)
        bracket = np.expm1(alpha2 * s.gd(j)) - 0.25 * alpha2 * s.r2 * laplacian0
        local = s.L ** (-2 * j) * math.exp(-alpha2 * s.gamma0) * np.expm1(alpha2 * s.g(j))
        return 2.0 * s.L ** (2 * j) * w0b(s, alpha2, j) * bracket + local

    return summand


def compute_a(family: CovarianceFamily, alpha2: float, j: int, summer: Optional[LatticeSummer] = None) -> float:
    if j < 0:
        raise DomainError("尺度必须非负", {"j": j})
    if j == 0:
        return 0.0
    summer = summer or LatticeSummer(family)
    return summer.total(a_summand(alpha2, j), j)


def compute_b(family: CovarianceFamily, alpha2: float, j: int, summer: Optional[LatticeSummer] = None) -> float:
    if j < 0:
        raise DomainError("尺度必须非负", {"j": j})
    if j == 0:
        return 0.0
    summer = summer or LatticeSummer(family)
    return summer.total(b_summand(alpha2, j), j)


def compute_m(
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    j: int,
    summer: Optional[LatticeSummer] = None,
    form: str = "recursion",
) -> Tuple[float, float, float, float]:
    """返回 (m11, m22, m12, m21)"""
    if not 0.0 < eta < 1.0:
        raise DomainError("η 必须位于 (0, 1)", {"eta": eta})
    if form not in M_FORMS:
        raise DomainError("未知的 m 系数形式", {"form": form, "known": list(M_FORMS)})
    summer = summer or LatticeSummer(family)
    eta_bar = eta - 1.0
    m11 = summer.total(m_diagonal_summand(alpha2, eta, j, form), j)
    m22 = summer.total(m_diagonal_summand(alpha2, eta_bar, j, form), j)
    m21 = summer.total(m_offdiagonal_summand(alpha2, eta, j), j)
    m12 = summer.total(m_offdiagonal_summand(alpha2, -eta_bar, j), j)
    return m11, m22, m12, m21


def compute_energy_coeffs(family: CovarianceFamily, alpha2: float, j: int, summer: Optional[LatticeSummer] = None) -> Tuple[float, float, float]:
    """返回 (ℰ₂, ℰ₃, ℰ₄)；ℰ₂ = −(L^{2j}/2)ΔΓ_j(0)"""
    laplacian0 = family.laplacian_at_zero(j)
    e2 = -0.5 * float(family.L) ** (2 * j) * laplacian0
    if j == 0:
        return e2, 0.0, 0.0
    summer = summer or LatticeSummer(family)
    e3 = summer.total(e3_summand(j), j)
    e4 = summer.total(e4_summand(alpha2, j, laplacian0), j)
    return e2, e3, e4


class CoefficientTable(BaseModel):
    """逐尺度系数表，构造后只读"""

    L: int
    alpha2: float
    eta: float
    cutoff_label: str
    m_form: str = "recursion"
    j: List[int]
    a: List[float]
    b: List[float]
    m11: List[float]
    m22: List[float]
    m12: List[float]
    m21: List[float]
    E2: List[float]
    E3: List[float]
    E4: List[float]

    model_config = ConfigDict(frozen=True)

    COLUMNS: ClassVar[Tuple[str, ...]] = ("a", "b", "m11", "m22", "m12", "m21", "E2", "E3", "E4")

    @property
    def eta_bar(self) -> float:
        return self.eta - 1.0

    @property
    def j_last(self) -> int:
        return self.j[-1]

    def at(self, j: int) -> Dict[str, float]:
        """超出表长的尺度冻结在最后一个尺度的取值"""
        k = min(max(j, 0), len(self.j) - 1)
        return {name: getattr(self, name)[k] for name in self.COLUMNS}

    def value(self, name: str, j: int) -> float:
        return self.at(j)[name]

    @property
    def a_limit(self) -> float:
        return self.a[-1]

    @property
    def b_limit(self) -> float:
        return self.b[-1]

    def to_frame(self) -> pd.DataFrame:
        data = {"j": self.j}
        for name in self.COLUMNS:
            data[name] = getattr(self, name)
        return pd.DataFrame(data)

    def metadata(self) -> Dict[str, object]:
        return {"L": self.L, "alpha2": self.alpha2, "eta": self.eta, "cutoff_label": self.cutoff_label, "m_form": self.m_form}


class CoefficientBuilder:
    """按尺度并行计算系数表"""

    def __init__(self, family: CovarianceFamily, settings: Optional[Settings] = None):
        self.settings = settings or Settings()
        self.logger = setup_logger(self.settings)
        self.family = family
        self.summer = LatticeSummer(family, self.settings)

    def row(self, j: int, alpha2: float, eta: float, m_form: str = "recursion") -> Dict[str, float]:
        """单个尺度上的全部系数，共用一批求和点"""
        if not 0.0 < eta < 1.0:
            raise DomainError("η 必须位于 (0, 1)", {"eta": eta})
        eta_bar = eta - 1.0
        laplacian0 = self.family.laplacian_at_zero(j)
        summands = {
            "m11": m_diagonal_summand(alpha2, eta, j, m_form),
            "m22": m_diagonal_summand(alpha2, eta_bar, j, m_form),
            "m12": m_offdiagonal_summand(alpha2, -eta_bar, j),
            "m21": m_offdiagonal_summand(alpha2, eta, j),
        }
        if j > 0:
            summands["a"] = a_summand(alpha2, j)
            summands["b"] = b_summand(alpha2, j)
            summands["E3"] = e3_summand(j)
            summands["E4"] = e4_summand(alpha2, j, laplacian0)
        try:
            values = self.summer.totals(list(summands.values()), j)
        except Exception as e:
            self.logger.error(f"尺度 j={j} 的系数计算失败: {e}")
            raise
        row = {name: 0.0 for name in CoefficientTable.COLUMNS}
        row.update(zip(summands.keys(), values))
        row["E2"] = -0.5 * float(self.family.L) ** (2 * j) * laplacian0
        self.logger.debug(f"j={j} a={row['a']:.8e} b={row['b']:.8e} m11={row['m11']:.8e} m21={row['m21']:.8e}")
        return row

    def build(self, alpha2: float, eta: float, j_max: Optional[int] = None, m_form: str = "recursion", threads: Optional[int] = None) -> CoefficientTable:
        j_max = self.family.j_max if j_max is None else min(j_max, self.family.j_max)
        threads = self.settings.threads if threads is None else threads
        self.logger.info(f"开始计算系数表: L={self.family.L} α²={alpha2:.6f} η={eta} j_max={j_max} 截断={self.family.label}")
        scales = list(range(j_max + 1))
        rows = parallel_map(lambda j: self.row(j, alpha2, eta, m_form), scales, threads=threads, desc="系数")
        columns = {name: [r[name] for r in rows] for name in CoefficientTable.COLUMNS}
        table = CoefficientTable(
            L=self.family.L,
            alpha2=alpha2,
            eta=eta,
            cutoff_label=self.family.label,
            m_form=m_form,
            j=scales,
            **columns,
        )
        self.logger.info(f"系数表完成: b_{j_max}={table.b[-1]:.8f} a_{j_max}={table.a[-1]:.8f}")
        return table


def build_coefficient_table(
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    j_max: Optional[int] = None,
    settings: Optional[Settings] = None,
    m_form: str = "recursion",
) -> CoefficientTable:
    return CoefficientBuilder(family, settings).build(alpha2, eta, j_max=j_max, m_form=m_form)
