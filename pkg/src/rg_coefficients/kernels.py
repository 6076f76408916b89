"""
核函数族 w₀、w₁、w₂^ε

每个核都写成 ScaleStack 上的逐点表达式，既可以在方盒上取值，也可以直接作为格点和的被加函数。
求和约定：û = {±e₀, ±e₁} 上的求和带因子 ½。
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.covariance.family import MAX_BOX_RADIUS, UNIT_DIRECTIONS, CovarianceFamily
from src.covariance.lattice_sum import LatticeSummer, ScaleStack, box_stack
from src.utils.errors import DomainError, NumericError

W0_LABELS = ("a", "b", "c", "d", "e")
W1_LABELS = ("b", "b_bar", "c", "c_bar", "d", "d_bar")
W2_LABELS = ("a", "a_bar", "b")


def _axis_sign(mu: Tuple[int, int]) -> Tuple[int, int]:
    key = (int(mu[0]), int(mu[1]))
    if key not in UNIT_DIRECTIONS:
        raise DomainError("方向必须是单位格矢", {"direction": list(key)})
    return UNIT_DIRECTIONS[key]


def _level(s: ScaleStack, j: int, n: int) -> float:
    """Γ_{j−1,n}(0) = (j − n)·lnL/2π"""
    return max(j - n, 0) * s.gamma0


# w₀ ------------------------------------------------------------------
def w0a(s: ScaleStack, j: int, mu: Tuple[int, int], nu: Tuple[int, int]) -> np.ndarray:
    """½ Σ_{n=1}^{j−1} (∂^{−μ}∂^ν Γ_n)(y)"""
    a, sa = _axis_sign(mu)
    b, sb = _axis_sign(nu)
    return 0.5 * s.ddp(j - 1, 1, a, b, -sa, sb)


def scale_weight(s: ScaleStack, alpha2: float, j: int, first: int) -> np.ndarray:
    """Σ_{n=first}^{j−1} e^{−α²Γ_{j−1,n+1}(0|y)} e^{−α²Γ_n(0)}(e^{α²Γ_n(y)} − 1) L^{−4n}"""
    total = s.zeros()
    for n in range(first, j):
        total = total + (
            np.exp(alpha2 * s.gpd(j - 1, n + 1))
            * math.exp(-alpha2 * s.gamma0)
            * np.expm1(alpha2 * s.g(n))
            * s.L ** (-4 * n)
        )
    return total


def w0b(s: ScaleStack, alpha2: float, j: int) -> np.ndarray:
    return 0.5 * scale_weight(s, alpha2, j, first=1)


def w0c(s: ScaleStack, alpha2: float, j: int) -> np.ndarray:
    total = s.zeros()
    for n in range(1, j):
        total = total + (
            np.exp(-alpha2 * ((j - 1 - n) * s.gamma0 + s.gp(j - 1, n + 1)))
            * math.exp(-alpha2 * s.gamma0)
            * np.expm1(-alpha2 * s.g(n))
            * s.L ** (-4 * n)
        )
    return 0.5 * total


def w0d(s: ScaleStack, alpha2: float, j: int, mu: Tuple[int, int]) -> np.ndarray:
    a, sa = _axis_sign(mu)
    total = s.zeros()
    for n in range(1, j):
        weight = math.exp(-0.5 * alpha2 * _level(s, j, n)) * s.L ** (-2 * n)
        total = total + weight * s.d(n, a, sa)
    return 0.5 * math.sqrt(alpha2) * total


def w0e(s: ScaleStack, alpha2: float, j: int) -> np.ndarray:
    total = s.zeros()
    for n in range(1, j):
        weight = math.exp(-0.5 * alpha2 * _level(s, j, n)) * s.L ** (-2 * n)
        bracket = s.zeros()
        for a in (0, 1):
            for sign in (1, -1):
                bracket = bracket + s.dp(j - 1, n, a, sign) ** 2 - s.dp(j - 1, n + 1, a, sign) ** 2
        total = total + weight * 0.5 * bracket
    return 0.25 * alpha2 * total


# w₁ ------------------------------------------------------------------
def _w1_exp(s: ScaleStack, alpha2: float, j: int, charge: float) -> np.ndarray:
    """Σ_{n=0}^{j−1} L^{−2n} e^{−(α²/2)Γ_{j−1,n}(0)} e^{qα²Γ_{j−1,n+1}(y)}(e^{qα²Γ_n(y)} − 1)"""
    total = s.zeros()
    for n in range(j):
        total = total + (
            s.L ** (-2 * n)
            * math.exp(-0.5 * alpha2 * _level(s, j, n))
            * np.exp(charge * alpha2 * s.gp(j - 1, n + 1))
            * np.expm1(charge * alpha2 * s.g(n))
        )
    return total


def w1b(s: ScaleStack, alpha2: float, eta: float, j: int) -> np.ndarray:
    return _w1_exp(s, alpha2, j, -eta)


def w1b_bar(s: ScaleStack, alpha2: float, eta: float, j: int) -> np.ndarray:
    return _w1_exp(s, alpha2, j, eta - 1.0)


def w1c(s: ScaleStack, alpha2: float, eta: float, j: int) -> np.ndarray:
    return _w1_exp(s, alpha2, j, eta)


def w1c_bar(s: ScaleStack, alpha2: float, eta: float, j: int) -> np.ndarray:
    return _w1_exp(s, alpha2, j, 1.0 - eta)


def w1d(s: ScaleStack, alpha2: float, charge: float, j: int, nu: Tuple[int, int]) -> np.ndarray:
    """iαq Σ_{n=0}^{j−1} ∂^νΓ_n(y)，q 取 η 或 η̄"""
    a, sa = _axis_sign(nu)
    return 1j * math.sqrt(alpha2) * charge * s.dp(j - 1, 0, a, sa)


# w₂^ε ----------------------------------------------------------------
def _w2_sum(
    s: ScaleStack,
    alpha2: float,
    j: int,
    amplitude: Sequence[float],
    zero_exp: float,
    tail_exp: float,
    local_exp: float,
    vertex: float,
) -> np.ndarray:
    total = s.zeros()
    for n in range(j):
        total = total + (
            amplitude[n]
            * s.L ** (-4 * n)
            * math.exp(-zero_exp * alpha2 * (j - 1 - n) * s.gamma0)
            * np.exp(-tail_exp * alpha2 * s.gpd(j - 1, n + 1))
            * math.exp(-local_exp * alpha2 * s.gamma0)
            * np.expm1(-vertex * alpha2 * s.g(n))
        )
    return 0.5 * total


def w2a(s: ScaleStack, alpha2: float, eta: float, eps: int, j: int, Z: Sequence[float]) -> np.ndarray:
    h2 = eta * eta
    amp = [z * z for z in Z[:j]]
    return _w2_sum(s, alpha2, j, amp, h2 * (1 + eps), h2 * eps, h2, h2 * eps)


def w2a_bar(s: ScaleStack, alpha2: float, eta: float, eps: int, j: int, Zbar: Sequence[float]) -> np.ndarray:
    h2 = (eta - 1.0) ** 2
    amp = [z * z for z in Zbar[:j]]
    return _w2_sum(s, alpha2, j, amp, h2 * (1 + eps), h2 * eps, h2, h2 * eps)


def w2b(s: ScaleStack, alpha2: float, eta: float, eps: int, j: int, Z: Sequence[float], Zbar: Sequence[float]) -> np.ndarray:
    eta_bar = eta - 1.0
    mixed = eta * eta_bar
    amp = [z * zb for z, zb in zip(Z[:j], Zbar[:j])]
    zero = 0.5 * (eta + eps * eta_bar) ** 2
    local = 0.5 * (eta * eta + eta_bar * eta_bar)
    return _w2_sum(s, alpha2, j, amp, zero, mixed * eps, local, mixed * eps)


# 方盒取值 --------------------------------------------------------------
@dataclass
class KernelSet:
    """一族核函数在 |y|∞ ≤ radius 方盒上的取值"""

    family: str
    j: int
    radius: int
    values: Dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.values[label]

    def labels(self):
        return sorted(self.values)

    def moment(self, label: str, power: int = 2) -> float:
        """Σ_y |y|^power · w(y)，在方盒上直接求和"""
        axis = np.arange(-self.radius, self.radius + 1, dtype=float)
        y0, y1 = np.meshgrid(axis, axis, indexing="ij")
        weight = (y0 * y0 + y1 * y1) ** (power / 2.0)
        return math.fsum((weight * self.values[label]).ravel())


def _kernel_box(family: CovarianceFamily, j: int, radius: Optional[int]) -> Tuple[int, ScaleStack]:
    if j < 0 or j > family.j_max:
        raise DomainError("尺度超出协方差族范围", {"j": j, "j_max": family.j_max})
    radius = family.reach(max(j - 1, 0)) if radius is None else int(radius)
    if radius > MAX_BOX_RADIUS:
        raise NumericError("核函数截断半径溢出", {"j": j, "radius": radius, "limit": MAX_BOX_RADIUS})
    return radius, box_stack(family, radius)


_E0, _E1 = (1, 0), (0, 1)


def compute_w0(family: CovarianceFamily, alpha2: float, j: int, radius: Optional[int] = None) -> KernelSet:
    """w₀ 五族，j ∈ {0, 1} 时全为零；a、d 族按方向标记"""
    radius, s = _kernel_box(family, j, radius)
    out = KernelSet("w0", j, radius)
    for mu, mu_name in ((_E0, "e0"), (_E1, "e1")):
        for nu, nu_name in ((_E0, "e0"), (_E1, "e1")):
            out.values[f"a:{mu_name}{nu_name}"] = w0a(s, j, mu, nu)
        out.values[f"d:{mu_name}"] = w0d(s, alpha2, j, mu)
    out.values["b"] = w0b(s, alpha2, j)
    out.values["c"] = w0c(s, alpha2, j)
    out.values["e"] = w0e(s, alpha2, j)
    return out


def compute_w1(family: CovarianceFamily, alpha2: float, eta: float, j: int, radius: Optional[int] = None) -> KernelSet:
    radius, s = _kernel_box(family, j, radius)
    out = KernelSet("w1", j, radius)
    out.values["b"] = w1b(s, alpha2, eta, j)
    out.values["b_bar"] = w1b_bar(s, alpha2, eta, j)
    out.values["c"] = w1c(s, alpha2, eta, j)
    out.values["c_bar"] = w1c_bar(s, alpha2, eta, j)
    for nu, name in ((_E0, "e0"), (_E1, "e1")):
        out.values[f"d:{name}"] = w1d(s, alpha2, eta, j, nu)
        out.values[f"d_bar:{name}"] = w1d(s, alpha2, eta - 1.0, j, nu)
    return out


def compute_w2(
    family: CovarianceFamily,
    alpha2: float,
    eta: float,
    eps: int,
    j: int,
    Z: Sequence[float],
    Zbar: Sequence[float],
    radius: Optional[int] = None,
) -> KernelSet:
    """w₂^ε 的 a、ā、b 三族；w₂,c 依赖多边形活度，不在二阶截断内"""
    if eps not in (1, -1):
        raise DomainError("ε 必须为 ±1", {"eps": eps})
    if len(Z) < j or len(Zbar) < j:
        raise DomainError("Z 序列长度不足", {"j": j, "len_Z": len(Z), "len_Zbar": len(Zbar)})
    radius, s = _kernel_box(family, j, radius)
    out = KernelSet(f"w2{'+' if eps > 0 else '-'}", j, radius)
    out.values["a"] = w2a(s, alpha2, eta, eps, j, Z)
    out.values["a_bar"] = w2a_bar(s, alpha2, eta, eps, j, Zbar)
    out.values["b"] = w2b(s, alpha2, eta, eps, j, Z, Zbar)
    return out


def kernel_moment(family: CovarianceFamily, alpha2: float, j: int, label: str = "b", power: int = 2, summer: Optional[LatticeSummer] = None) -> float:
    """Σ_{y∈ℤ²} |y|^power · w₀(y)，经格点求和引擎，无方盒限制"""
    builders = {
        "b": lambda s: w0b(s, alpha2, j),
        "c": lambda s: w0c(s, alpha2, j),
        "e": lambda s: w0e(s, alpha2, j),
    }
    if label not in builders:
        raise DomainError("只支持标量 w₀ 核的矩", {"label": label, "known": sorted(builders)})
    if j < 2:
        return 0.0
    summer = summer or LatticeSummer(family)
    build = builders[label]
    return summer.total(lambda s: s.r2 ** (power / 2.0) * build(s), j - 1)
