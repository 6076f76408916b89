"""
周期格点上的 Yukawa 势与库仑势

W_Λ(x;m) = (1/|Λ|) Σ_{k∈Λ*} e^{ikx}/(m² − Δ̂(k))，Δ̂(k) = −2Σ_j(1 − cos k_j)
W_Λ(x|0) = (1/|Λ|) Σ_{k≠0} (e^{ikx} − 1)/(−Δ̂(k))
"""

import math
from typing import Callable, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import integrate

from src.lattice_green.lattice import LatticeSpec
from src.utils.errors import DomainError, NumericError, ResourceError

EULER_GAMMA = float(np.euler_gamma)

# 超过该边长改用无穷格点的一维 k 积分
MAX_FFT_SIDE = 4096


def euler_constant() -> float:
    """c_E = −(2γ_E + ln 8)/(4π)"""
    return -(2.0 * EULER_GAMMA + math.log(8.0)) / (4.0 * math.pi)


def lattice_symbol(side: int) -> np.ndarray:
    """−Δ̂(k) 在 rfft 半平面上的取值"""
    k0 = 2.0 * math.pi * np.fft.fftfreq(side)
    k1 = 2.0 * math.pi * np.fft.rfftfreq(side)
    return 2.0 * (1.0 - np.cos(k0))[:, None] + 2.0 * (1.0 - np.cos(k1))[None, :]


class PotentialTable:
    """势函数表，数组按 FFT 顺序存放，values[x0 mod side, x1 mod side]"""

    def __init__(
        self,
        spec: LatticeSpec,
        mass: float,
        grid: Optional[np.ndarray] = None,
        evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        if grid is None and evaluator is None:
            raise DomainError("势函数表需要数组或求值函数")
        self.spec = spec
        self.mass = float(mass)
        self.grid = grid
        self.evaluator = evaluator
        if grid is not None:
            grid.setflags(write=False)

    @property
    def coulomb(self) -> bool:
        return self.mass == 0.0

    def value(self, x) -> np.ndarray:
        """任意格点（可为 (N, 2) 批量）上的取值，先做周期约化"""
        pts = self.spec.reduce(np.asarray(x, dtype=np.int64).reshape(-1, 2))
        if self.grid is not None:
            i0, i1 = self.spec.index(pts)
            return self.grid[i0, i1]
        return self.evaluator(pts)

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    def centered(self, radius: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """中心盒子 |x|∞ ≤ radius 上的 (坐标, 取值)"""
        half = self.spec.side // 2
        radius = half if radius is None else min(int(radius), half)
        axis = np.arange(-radius, radius + 1)
        y0, y1 = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([y0.ravel(), y1.ravel()], axis=1)
        return pts, self.value(pts)

    def parity_defect(self, radius: Optional[int] = None) -> float:
        pts, vals = self.centered(radius)
        return float(np.max(np.abs(vals - self.value(-pts))))

    def rotation_defect(self, radius: Optional[int] = None) -> float:
        """R(x₀, x₁) = (−x₁, x₀) 下的最大偏差"""
        pts, vals = self.centered(radius)
        rotated = np.stack([-pts[:, 1], pts[:, 0]], axis=1)
        return float(np.max(np.abs(vals - self.value(rotated))))

    def total(self) -> float:
        """Σ_x W(x)，仅对 FFT 表有定义"""
        if self.grid is None:
            raise DomainError("求值函数形式的势表不支持全格点求和")
        return math.fsum(self.grid.ravel())


def _check_side(spec: LatticeSpec) -> None:
    if spec.side > MAX_FFT_SIDE:
        raise ResourceError("FFT 网格超过上限", {"side": spec.side, "limit": MAX_FFT_SIDE})


def yukawa_potential(spec: LatticeSpec, m: float) -> PotentialTable:
    """逆离散傅里叶变换求 W_Λ(x;m)"""
    if m <= 0:
        raise DomainError("屏蔽质量 m 必须为正", {"m": m})
    _check_side(spec)
    side = spec.side
    spectrum = 1.0 / (m * m + lattice_symbol(side))
    # 偶函数核的逆变换为实数，irfft2 直接丢掉虚部
    grid = np.fft.irfft2(spectrum, s=(side, side))
    logger.debug(f"Yukawa 势计算完成: side={side} m={m} W(0)={grid[0, 0]:.12f}")
    return PotentialTable(spec, m, grid=np.ascontiguousarray(grid))


def coulomb_potential(spec: LatticeSpec) -> PotentialTable:
    """W_Λ(x|0)；边长超过 FFT 上限时使用无穷格点积分加零模修正"""
    side = spec.side
    if side > MAX_FFT_SIDE:
        logger.info(f"边长 {side} 超过 FFT 上限，改用一维 k 积分")
        volume = float(spec.volume)

        def evaluator(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float).reshape(-1, 2)
            r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
            return infinite_lattice_coulomb(pts) + r2 / (4.0 * volume)

        return PotentialTable(spec, 0.0, evaluator=evaluator)

    symbol = lattice_symbol(side)
    symbol[0, 0] = 1.0
    spectrum = 1.0 / symbol
    spectrum[0, 0] = 0.0
    grid = np.fft.irfft2(spectrum, s=(side, side))
    grid = grid - grid[0, 0]
    grid[0, 0] = 0.0
    logger.debug(f"库仑势计算完成: side={side} W((1,0)|0)={grid[1, 0]:.12f}")
    return PotentialTable(spec, 0.0, grid=np.ascontiguousarray(grid))


def _strip_integrand(k: float, x0: float, x1: float) -> float:
    if k == 0.0:
        return -0.5 * abs(x1)
    # cosh t − 1 = 2sin²(k/2)，小 k 处保持精度
    t = 2.0 * math.asinh(math.sin(0.5 * k))
    decay = math.exp(-abs(x1) * t)
    numerator = -2.0 * math.sin(0.5 * k * x0) ** 2 * decay + math.expm1(-abs(x1) * t)
    return numerator / (2.0 * math.sinh(t))


def infinite_lattice_coulomb(x) -> np.ndarray:
    """W_∞(x|0) = ∫ dk₀/2π [cos(k₀x₀)e^{−|x₁|t} − 1]/(2 sinh t)，cosh t = 2 − cos k₀"""
    pts = np.asarray(x, dtype=float).reshape(-1, 2)
    out = np.empty(pts.shape[0])
    for i, (x0, x1) in enumerate(pts):
        # 对称性：交换坐标使 |x₁| ≤ |x₀|，积分核衰减更快
        a, b = max(abs(x0), abs(x1)), min(abs(x0), abs(x1))
        if a == 0.0:
            out[i] = 0.0
            continue
        limit = int(200 + 8 * a)
        value, err = integrate.quad(_strip_integrand, 0.0, math.pi, args=(b, a), limit=limit, epsabs=1e-13)
        if not math.isfinite(value) or err > 1e-8:
            raise NumericError("无穷格点库仑势积分不收敛", {"x": [x0, x1], "error": err})
        out[i] = value / math.pi
    return out


def fit_c_E(
    table: PotentialTable,
    window: Optional[Tuple[float, float]] = None,
    torus_correction: bool = True,
) -> Tuple[float, float]:
    """在 |x| ∈ window 上最小二乘拟合 W(x|0) + ln|x|/2π 的常数，返回 (c_E, 最大残差)

    默认窗口 [side/128, side/16]；torus_correction 扣除周期格林函数的零模抛物面 |x|²/(4|Λ|)。
    """
    if not table.coulomb:
        raise DomainError("c_E 只能从库仑势表拟合", {"mass": table.mass})
    side = table.spec.side
    lo, hi = window if window is not None else (side / 128.0, side / 16.0)
    if lo < 1.0 or hi <= lo:
        raise DomainError("c_E 拟合窗口不合法", {"window": [lo, hi], "side": side})

    if table.grid is not None:
        pts, vals = table.centered(int(math.ceil(hi)))
        r = np.hypot(pts[:, 0], pts[:, 1])
        mask = (r >= lo) & (r <= hi)
        r, vals = r[mask], vals[mask]
    else:
        r = np.geomspace(lo, hi, 24).round()
        pts = np.stack([r, np.zeros_like(r)], axis=1)
        vals = table.value(pts.astype(np.int64))
    target = vals + np.log(r) / (2.0 * math.pi)
    if torus_correction:
        target = target - r * r / (4.0 * table.spec.volume)

    c = float(np.mean(target))
    residual = float(np.max(np.abs(target - c)))
    logger.info(f"c_E 拟合: 窗口=[{lo:.1f}, {hi:.1f}] 点数={r.size} c_E={c:.6f} 残差={residual:.2e}")
    return c, residual
