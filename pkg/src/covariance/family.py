"""
协方差族

Γ_j(x) = Γ̃_0(|x|/L^j)，Γ_j(0) = lnL/2π 对任意可容许截断精确成立。
族对象不可变，构造后可在线程间只读共享。
"""

import math
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.config.settings import Settings
from src.covariance.cache import KernelCache
from src.covariance.cutoff import CutoffFunction, get_cutoff
from src.covariance.profile import HankelProfile, RadialProfile, make_profile
from src.utils.errors import DomainError, NumericError, ResourceError

# 单位格矢 -> (轴, 符号)
UNIT_DIRECTIONS = {(1, 0): (0, 1), (-1, 0): (0, -1), (0, 1): (1, 1), (0, -1): (1, -1)}
MAX_BOX_RADIUS = 2048


def _as_points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape == (2,):
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("格点坐标的形状必须为 (2,) 或 (N, 2)", {"shape": list(pts.shape)})
    return pts


class CovarianceFamily:
    """尺度族 Γ_j 及其部分和、尾和与格点差分"""

    def __init__(
        self,
        L: int,
        j_max: int,
        cutoff: CutoffFunction,
        tol: float,
        profile: RadialProfile,
        reach_factor: float = 1.4,
    ):
        self.L = int(L)
        self.j_max = int(j_max)
        self.cutoff = cutoff
        self.tol = float(tol)
        self.profile = profile
        self.reach_factor = float(reach_factor)
        self.gamma0 = math.log(self.L) / (2.0 * math.pi)
        self.rho0 = profile.radius_rho(self.tol)

    @property
    def label(self) -> str:
        return self.cutoff.label

    # 点值 -------------------------------------------------------------
    def radius(self, j: int) -> int:
        """超出该半径后 |Γ_j| < tol·lnL/2π"""
        return int(math.ceil(self.rho0 * float(self.L) ** j))

    def reach(self, j: int) -> int:
        return int(math.ceil(self.reach_factor * self.radius(j)))

    def continuum(self, j: int, y) -> np.ndarray:
        """连续变量上的 Γ̃_j(y)，y 可取任意实数坐标"""
        pts = _as_points(y)
        return self.profile.value(np.hypot(pts[:, 0], pts[:, 1]) / float(self.L) ** j)

    def kernel(self, j: int, x) -> np.ndarray:
        return self.continuum(j, x)

    def kernel_diff(self, j: int, x) -> np.ndarray:
        """Γ_j(x) − Γ_j(0)，小 |x|/L^j 处保持相对精度"""
        pts = _as_points(x)
        return self.profile.diff(np.hypot(pts[:, 0], pts[:, 1]) / float(self.L) ** j)

    def partial(self, hi: int, lo: int, x) -> np.ndarray:
        """Γ_{hi,lo}(x) = Σ_{m=lo}^{hi} Γ_m(x)，空和为 0"""
        pts = _as_points(x)
        total = np.zeros(pts.shape[0])
        for m in range(lo, hi + 1):
            total += self.kernel(m, pts)
        return total

    def partial_at_zero(self, hi: int, lo: int) -> float:
        return max(hi - lo + 1, 0) * self.gamma0

    def tail_diff(self, n: int, x) -> np.ndarray:
        """Γ_{∞,n}(x|0) = Σ_{m≥n}[Γ_m(x) − Γ_m(0)]"""
        pts = _as_points(x)
        return self.profile.tail_diff(np.hypot(pts[:, 0], pts[:, 1]) / float(self.L) ** n)

    def lattice_derivative(self, j: int, x, directions: Sequence[Tuple[int, int]]) -> np.ndarray:
        """格点差分 ∂^{μ₁}∂^{μ₂}Γ_j(x)，μ 取 ±e₀、±e₁"""
        if len(directions) not in (1, 2):
            raise DomainError("差分方向个数必须为 1 或 2", {"count": len(directions)})
        dirs = []
        for mu in directions:
            key = (int(mu[0]), int(mu[1]))
            if key not in UNIT_DIRECTIONS:
                raise DomainError("差分方向必须是单位格矢", {"direction": list(key)})
            dirs.append(key)
        pts = _as_points(x)
        extent = np.max(np.abs(pts)) + len(dirs)
        if extent > self.radius(j):
            raise DomainError("差分访问超出协方差半径", {"j": j, "extent": float(extent), "radius": self.radius(j)})
        return self._apply(j, pts, dirs)

    def _apply(self, j: int, pts: np.ndarray, dirs) -> np.ndarray:
        if not dirs:
            return self.kernel_diff(j, pts)
        mu = np.array(dirs[0], dtype=float)
        rest = dirs[1:]
        if mu.sum() > 0:
            return self._apply(j, pts + mu, rest) - self._apply(j, pts, rest)
        return self._apply(j, pts, rest) - self._apply(j, pts + mu, rest)

    def laplacian_at_zero(self, j: int) -> float:
        """Σ_a (∂^{−e_a}∂^{e_a}Γ_j)(0) = 4[Γ_j(e₀) − Γ_j(0)]"""
        return 4.0 * float(self.profile.diff(np.array([float(self.L) ** -j]))[0])

    # 盒子与诊断 -------------------------------------------------------
    def kernel_box(self, j: int, radius: Optional[int] = None, cache: Optional[KernelCache] = None) -> np.ndarray:
        """Γ_j 在 |x|∞ ≤ radius 的方盒上的取值，中心为原点"""
        radius = self.radius(j) if radius is None else int(radius)
        if radius > MAX_BOX_RADIUS:
            raise ResourceError("协方差盒子过大", {"j": j, "radius": radius, "limit": MAX_BOX_RADIUS})
        if cache is not None and radius == self.radius(j):
            hit = cache.load("kernel", self.L, j, self.label, self.tol)
            if hit is not None:
                return hit[0]
        axis = np.arange(-radius, radius + 1, dtype=float)
        y0, y1 = np.meshgrid(axis, axis, indexing="ij")
        box = self.profile.value(np.hypot(y0, y1) / float(self.L) ** j)
        if cache is not None and radius == self.radius(j):
            cache.store("kernel", self.L, j, self.label, self.tol, box, radius=radius)
        return box

    def finite_range_violation(self, j: int) -> float:
        """max |Γ_j(x)|，|x| ≥ L^{j+1}/2，按格点长度取样到 j 的协方差半径"""
        if not 0 <= j <= self.j_max:
            raise DomainError("尺度超出协方差族范围", {"j": j, "j_max": self.j_max})
        scale = float(self.L) ** j
        lo = scale * self.L / 2.0
        hi = max(float(self.radius(j)), 2.0 * lo)
        r = np.geomspace(lo, hi, 512)
        return float(np.max(np.abs(self.profile.value(r / scale))))

    def scale_sum(self, J: int, x) -> np.ndarray:
        """Σ_{j=0}^{J}[Γ_j(x) − Γ_j(0)]"""
        pts = _as_points(x)
        total = np.zeros(pts.shape[0])
        for j in range(J + 1):
            total += self.kernel_diff(j, pts)
        return total

    @cached_property
    def c_tilde_E(self) -> float:
        return c_tilde_E(self)

    @cached_property
    def c_tilde_E_quadrature(self) -> float:
        return self.profile.c_tilde_quadrature()


def _fit_constant(family: CovarianceFamily, J: int, upper: float) -> Tuple[float, float]:
    if upper < 100.0:
        raise NumericError("拟合窗口过短", {"J": J, "L": family.L, "upper": upper})
    radii = np.geomspace(10.0, upper, 48)
    pts = np.stack([radii, np.zeros_like(radii)], axis=1)
    target = family.scale_sum(J, pts) + np.log(radii) / (2.0 * math.pi)
    scale = radii / upper
    design = np.stack([np.ones_like(radii), scale * scale], axis=1)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.max(np.abs(design @ coef - target)))
    return float(coef[0]), residual


def c_tilde_E(family: CovarianceFamily, residual_tol: float = 1e-6) -> float:
    """几何窗口上拟合 Σ_{j≤J}Γ_j(x|0) + ln|x|/2π = c̃_E + d|x|²，并对窗口上端做 Richardson 外推"""
    J = family.j_max
    upper = float(family.L) ** (J - 1)
    c_wide, res_wide = _fit_constant(family, J, upper)
    if res_wide > residual_tol:
        raise NumericError("c̃_E 拟合残差过大", {"J": J, "residual": res_wide})
    try:
        c_narrow, _ = _fit_constant(family, J, upper / 2.0)
    except NumericError:
        return c_wide
    # 截断尾和的 |x|⁴ 项随窗口上端按四次方缩小
    value = (16.0 * c_narrow - c_wide) / 15.0
    logger.debug(f"c̃_E 拟合: J={J} 宽窗口={c_wide:.12f} 窄窗口={c_narrow:.12f} 外推={value:.12f}")
    return value


def build_family(
    L: int,
    j_max: int,
    cutoff: "CutoffFunction | str" = "gaussian",
    tol: float = 1e-12,
    settings: Optional[Settings] = None,
) -> CovarianceFamily:
    """构造协方差族；非高斯截断走 Hankel 求积，制表结果写入磁盘缓存"""
    if isinstance(cutoff, str):
        cutoff = get_cutoff(cutoff)
    if L < 2:
        raise DomainError("L 必须不小于 2", {"L": L})
    if j_max < 1:
        raise DomainError("j_max 必须为正", {"j_max": j_max})
    if tol <= 0:
        raise DomainError("tol 必须为正", {"tol": tol})
    cutoff.check_admissible(L)

    reach_factor = settings.reach_factor if settings is not None else 1.4
    cache = KernelCache(settings.cache_dir) if settings is not None else None

    table = None
    if not cutoff.closed_form and cache is not None:
        hit = cache.load("profile", L, 0, cutoff.label, tol)
        if hit is not None:
            array, _ = hit
            table = {"rho": array[0], "diff": array[1], "d1": array[2]}

    profile = make_profile(cutoff, L, tol=tol, table=table)
    if isinstance(profile, HankelProfile) and table is None and cache is not None:
        stacked = np.stack([profile.table["rho"], profile.table["diff"], profile.table["d1"]])
        cache.store("profile", L, 0, cutoff.label, tol, stacked, rho_max=profile.rho_max)

    family = CovarianceFamily(L, j_max, cutoff, tol, profile, reach_factor=reach_factor)
    logger.info(
        f"协方差族构造完成: L={L} j_max={j_max} 截断={cutoff.label} "
        f"Γ_j(0)={family.gamma0:.6f} ρ0={family.rho0:.2f}"
    )
    return family


def lattice_derivative(family: CovarianceFamily, j: int, x, directions: Sequence[Tuple[int, int]]) -> np.ndarray:
    return family.lattice_derivative(j, x, directions)
