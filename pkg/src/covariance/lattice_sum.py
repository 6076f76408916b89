"""
格点求和引擎

系数与核函数的矩都是 Σ_{y∈ℤ²} F(y) 形式的和，F 由若干尺度的 Γ_n 及其差分组成。
半径较小时直接在方盒上求和；否则把求和拆成两部分：
  核心方盒 |y|∞ ≤ r0 + 7w 上的精确格点和，权重 1 − χ(|y|)；
  外区的极坐标求积，权重 χ(|y|)，χ(r) = ½erfc((r0 − r)/w)。
外区被加函数在格距尺度上光滑，Poisson 求和公式保证格点和与积分只差指数小量。
"""

import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from loguru import logger

from src.config.settings import Settings
from src.covariance.family import CovarianceFamily

Summand = Callable[["ScaleStack"], np.ndarray]

_AXES = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))


class ScaleStack:
    """一批点上各尺度 Γ_n 的取值与差分，按需计算并缓存

    exact=True 时差分按格点定义逐点相减；exact=False 时差分写成梯度或 Hessian
    沿单位线段的 Gauss-Legendre 积分，用于远离原点的求积节点。
    """

    def __init__(self, family: CovarianceFamily, y0, y1, exact: bool = True, derivative_nodes: int = 4):
        self.family = family
        self.profile = family.profile
        self.L = float(family.L)
        self.gamma0 = family.gamma0
        self.y0 = np.asarray(y0, dtype=float)
        self.y1 = np.asarray(y1, dtype=float)
        self.exact = exact
        self.r2 = self.y0 * self.y0 + self.y1 * self.y1
        nodes, weights = np.polynomial.legendre.leggauss(derivative_nodes)
        self._t = (nodes + 1.0) / 2.0
        self._w = weights / 2.0
        self._cache: Dict[Tuple, np.ndarray] = {}

    @property
    def shape(self):
        return self.y0.shape

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    # 点值 -------------------------------------------------------------
    def _radial(self, kind: str, n: int, s0: float = 0.0, s1: float = 0.0) -> np.ndarray:
        key = (kind, n, s0, s1)
        if key not in self._cache:
            rho = np.hypot(self.y0 + s0, self.y1 + s1) / self.L ** n
            self._cache[key] = getattr(self.profile, kind)(rho)
        return self._cache[key]

    def g(self, n: int) -> np.ndarray:
        """Γ_n(y)"""
        return self._radial("value", n)

    def gd(self, n: int) -> np.ndarray:
        """Γ_n(y) − Γ_n(0)"""
        return self._radial("diff", n)

    def gt(self, n: int) -> np.ndarray:
        """Γ_{∞,n}(y|0)"""
        return self._radial("tail_diff", n)

    def gp(self, hi: int, lo: int) -> np.ndarray:
        """Γ_{hi,lo}(y)"""
        total = self.zeros()
        for m in range(lo, hi + 1):
            total = total + self.g(m)
        return total

    def gpd(self, hi: int, lo: int) -> np.ndarray:
        """Γ_{hi,lo}(y) − Γ_{hi,lo}(0)"""
        total = self.zeros()
        for m in range(lo, hi + 1):
            total = total + self.gd(m)
        return total

    # 差分 -------------------------------------------------------------
    def d(self, n: int, a: int, s: int = 1) -> np.ndarray:
        """∂^{s·e_a}Γ_n(y)"""
        key = ("d", n, a, s)
        if key in self._cache:
            return self._cache[key]
        e = _AXES[a]
        q = -e if s < 0 else np.zeros(2)
        if self.exact:
            out = self._radial("diff", n, *(q + e)) - self._radial("diff", n, *q)
        else:
            out = self.zeros()
            for t, w in zip(self._t, self._w):
                p0 = self.y0 + q[0] + t * e[0]
                p1 = self.y1 + q[1] + t * e[1]
                rho = np.hypot(p0, p1) / self.L ** n
                comp = p0 if a == 0 else p1
                out = out + w * self.profile.d1_over_rho(rho) * comp / self.L ** (2 * n)
        self._cache[key] = out
        return out

    def dp(self, hi: int, lo: int, a: int, s: int = 1) -> np.ndarray:
        total = self.zeros()
        for m in range(lo, hi + 1):
            total = total + self.d(m, a, s)
        return total

    def dd(self, n: int, a: int, b: int, sa: int = 1, sb: int = 1) -> np.ndarray:
        """∂^{sa·e_a}∂^{sb·e_b}Γ_n(y)"""
        key = ("dd", n, a, b, sa, sb)
        if key in self._cache:
            return self._cache[key]
        ea, eb = _AXES[a], _AXES[b]
        q = np.zeros(2)
        if sa < 0:
            q = q - ea
        if sb < 0:
            q = q - eb
        if self.exact:
            out = (
                self._radial("diff", n, *(q + ea + eb))
                - self._radial("diff", n, *(q + ea))
                - self._radial("diff", n, *(q + eb))
                + self._radial("diff", n, *q)
            )
        else:
            out = self.zeros()
            scale = self.L ** (2 * n)
            for t, wt in zip(self._t, self._w):
                for u, wu in zip(self._t, self._w):
                    p0 = self.y0 + q[0] + t * ea[0] + u * eb[0]
                    p1 = self.y1 + q[1] + t * ea[1] + u * eb[1]
                    r2 = p0 * p0 + p1 * p1
                    rho = np.sqrt(r2) / self.L ** n
                    radial = self.profile.d2(rho)
                    tangential = self.profile.d1_over_rho(rho)
                    pa = p0 if a == 0 else p1
                    pb = p0 if b == 0 else p1
                    hess = (radial - tangential) * pa * pb / r2
                    if a == b:
                        hess = hess + tangential
                    out = out + wt * wu * hess / scale
        self._cache[key] = out
        return out

    def ddp(self, hi: int, lo: int, a: int, b: int, sa: int = 1, sb: int = 1) -> np.ndarray:
        total = self.zeros()
        for m in range(lo, hi + 1):
            total = total + self.dd(m, a, b, sa, sb)
        return total


def box_stack(family: CovarianceFamily, radius: int, derivative_nodes: int = 4) -> ScaleStack:
    """|y|∞ ≤ radius 方盒上的精确模式点集"""
    axis = np.arange(-radius, radius + 1, dtype=float)
    y0, y1 = np.meshgrid(axis, axis, indexing="ij")
    return ScaleStack(family, y0, y1, exact=True, derivative_nodes=derivative_nodes)


class LatticeSummer:
    """Σ_{y∈ℤ²} F(y) 的求值器"""

    def __init__(self, family: CovarianceFamily, settings: Optional[Settings] = None):
        self.family = family
        settings = settings or Settings()
        self.direct_radius = settings.direct_radius
        self.switch_radius = settings.switch_radius
        self.switch_width = settings.switch_width
        self.radial_nodes = settings.radial_nodes
        self.angular_nodes = settings.angular_nodes
        self.derivative_nodes = settings.derivative_nodes
        self._polar_cache: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def reach(self, j: int) -> int:
        return self.family.reach(j)

    def total(self, summand: Summand, j: int, reach: Optional[int] = None) -> float:
        """对尺度 j 的求和半径内求和"""
        return self.totals([summand], j, reach)[0]

    def totals(self, summands: Sequence[Summand], j: int, reach: Optional[int] = None) -> List[float]:
        """多个被加函数共用同一批点和缓存"""
        reach = self.reach(j) if reach is None else int(reach)
        if reach <= self.direct_radius:
            return self.direct(summands, reach)
        return self.hybrid(summands, reach)

    def direct(self, summands: Sequence[Summand], reach: int) -> List[float]:
        stack = box_stack(self.family, reach, self.derivative_nodes)
        return [math.fsum(np.asarray(f(stack), dtype=float).ravel()) for f in summands]

    def _switch(self, r: np.ndarray) -> np.ndarray:
        return 0.5 * special.erfc((self.switch_radius - r) / self.switch_width)

    def _polar_nodes(self, reach: int):
        if reach in self._polar_cache:
            return self._polar_cache[reach]
        inner = max(self.switch_radius - 7.0 * self.switch_width, 1.0)
        edges = [inner]
        while edges[-1] < reach:
            edges.append(min(2.0 * edges[-1], float(reach)))
        nodes, weights = np.polynomial.legendre.leggauss(self.radial_nodes)
        radii, radial_w = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = (hi - lo) / 2.0
            radii.append(lo + half * (nodes + 1.0))
            radial_w.append(half * weights)
        radii = np.concatenate(radii)
        radial_w = np.concatenate(radial_w)
        theta = 2.0 * math.pi * np.arange(self.angular_nodes) / self.angular_nodes
        rr, tt = np.meshgrid(radii, theta, indexing="ij")
        weight = (radial_w * radii * self._switch(radii))[:, None] * (2.0 * math.pi / self.angular_nodes)
        weight = np.broadcast_to(weight, rr.shape)
        out = (rr * np.cos(tt), rr * np.sin(tt), np.array(weight))
        self._polar_cache[reach] = out
        return out

    def hybrid(self, summands: Sequence[Summand], reach: int) -> List[float]:
        core = int(math.ceil(self.switch_radius + 7.0 * self.switch_width))
        stack = box_stack(self.family, core, self.derivative_nodes)
        core_weight = 0.5 * special.erfc((np.sqrt(stack.r2) - self.switch_radius) / self.switch_width)

        y0, y1, weight = self._polar_nodes(reach)
        far = ScaleStack(self.family, y0, y1, exact=False, derivative_nodes=self.derivative_nodes)

        results = []
        for f in summands:
            core_sum = math.fsum((np.asarray(f(stack), dtype=float) * core_weight).ravel())
            far_sum = math.fsum((np.asarray(f(far), dtype=float) * weight).ravel())
            logger.debug(f"混合求和: reach={reach} 核心={core_sum:.6e} 外区={far_sum:.6e}")
            results.append(core_sum + far_sum)
        return results
