"""
单尺度协方差的径向轮廓

Γ̃_0(ρ) = ∫ d²p/(2π)² e^{ip·x}[u(p) − u(Lp)]/p²，|x| = ρ。
第 j 个尺度由自相似性给出：Γ_j(x) = Γ̃_0(|x|/L^j)。

高斯截断使用指数积分闭式；其他截断使用 Hankel 求积并在 ln ρ 上做三次样条。
小 ρ 处统一用矩展开 −c₂ρ² + c₄ρ⁴ − c₆ρ⁶ 计算差值，避免相消。
"""

import math
from typing import Dict, Optional

import numpy as np
from scipy import integrate, optimize, special
from scipy.interpolate import CubicSpline
from loguru import logger

from src.covariance.cutoff import CutoffFunction
from src.utils.errors import NumericError

EULER_GAMMA = float(np.euler_gamma)
FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi

_GL_ORDER = 32
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


_EXACT_ZEROS = special.jn_zeros(0, 64)


def _j0_zeros(count: int) -> np.ndarray:
    """J₀ 的前 count 个零点；64 个以后用 McMahon 展开"""
    if count <= _EXACT_ZEROS.size:
        return _EXACT_ZEROS[:count]
    beta = (np.arange(_EXACT_ZEROS.size + 1, count + 1) - 0.25) * math.pi
    tail = beta + 1.0 / (8.0 * beta) - 31.0 / (384.0 * beta ** 3)
    return np.concatenate((_EXACT_ZEROS, tail))


def ein(x) -> np.ndarray:
    """整函数 Ein(x) = ∫₀ˣ (1−e^{−t})/t dt"""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= 2.0
    if np.any(small):
        xs = x[small]
        term = xs.copy()
        acc = term.copy()
        for k in range(2, 40):
            term = term * (-xs) / k
            acc = acc + term / k
        out[small] = acc
    if np.any(~small):
        xl = x[~small]
        out[~small] = special.exp1(xl) + np.log(xl) + EULER_GAMMA
    return out


class RadialProfile:
    """径向轮廓的公共接口"""

    label: str = ""
    L: int = 0
    gamma0: float = 0.0
    rho_small: float = 0.02
    c2: float = 0.0
    c4: float = 0.0
    c6: float = 0.0

    def value(self, rho) -> np.ndarray:
        raise NotImplementedError

    def diff(self, rho) -> np.ndarray:
        raise NotImplementedError

    def d1(self, rho) -> np.ndarray:
        raise NotImplementedError

    def d2(self, rho) -> np.ndarray:
        raise NotImplementedError

    def d1_over_rho(self, rho) -> np.ndarray:
        raise NotImplementedError

    def tail_diff(self, rho) -> np.ndarray:
        raise NotImplementedError

    def c_tilde_quadrature(self) -> float:
        raise NotImplementedError

    def series_diff(self, rho) -> np.ndarray:
        q = np.asarray(rho, dtype=float) ** 2
        return q * (-self.c2 + q * (self.c4 - q * self.c6))

    def radius_rho(self, tol: float) -> float:
        """|Γ̃_0(ρ)| ≤ tol·Γ̃_0(0) 对所有 ρ ≥ ρ0 成立的最小 ρ0"""
        threshold = tol * self.gamma0
        grid = np.geomspace(1.0, 400.0 * self.L, 4000)
        values = np.abs(self.value(grid))
        above = np.nonzero(values > threshold)[0]
        if above.size == 0:
            return 1.0
        last = int(above[-1])
        if last == grid.size - 1:
            raise NumericError("协方差在搜索区间内未衰减到容差以下", {"L": self.L, "tol": tol})
        lo, hi = float(grid[last]), float(grid[last + 1])
        return optimize.brentq(lambda r: abs(float(self.value(np.array([r]))[0])) - threshold, lo, hi, xtol=1e-10)


class GaussianProfile(RadialProfile):
    """u(p) = e^{−p²}：Γ̃_0(ρ) = (1/4π)[E₁(ρ²/4L²) − E₁(ρ²/4)]"""

    def __init__(self, L: int):
        self.label = "gaussian"
        self.L = int(L)
        self.gamma0 = math.log(L) / TWO_PI
        shell = 1.0 - L ** -2.0
        self.c2 = shell / (16.0 * math.pi)
        self.c4 = (1.0 - L ** -4.0) / (256.0 * math.pi)
        self.c6 = (1.0 - L ** -6.0) / (4608.0 * math.pi)

    def value(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        a = rho * rho / 4.0
        b = a / (self.L * self.L)
        out = np.empty_like(rho)
        far = a > 2.0
        if np.any(far):
            out[far] = (special.exp1(b[far]) - special.exp1(a[far])) / FOUR_PI
        if np.any(~far):
            out[~far] = self.gamma0 + self.diff(rho[~far])
        return out

    def diff(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        a = rho * rho / 4.0
        return -(ein(a) - ein(a / (self.L * self.L))) / FOUR_PI

    def d1(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return rho * self.d1_over_rho(rho)

    def d1_over_rho(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        a = rho * rho / 4.0
        b = a / (self.L * self.L)
        safe = np.where(rho > 0, rho, 1.0)
        ratio = (np.expm1(-a) - np.expm1(-b)) / (TWO_PI * safe * safe)
        return np.where(rho > 0, ratio, -2.0 * self.c2)

    def d2(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        a = rho * rho / 4.0
        b = a / (self.L * self.L)
        return -self.d1_over_rho(rho) + (-np.exp(-a) + np.exp(-b) / (self.L * self.L)) / FOUR_PI

    def tail_diff(self, rho) -> np.ndarray:
        """Σ_{k≥0}[Γ̃_k(ρ) − Γ̃_k(0)] 的闭式：−Ein(ρ²/4)/4π"""
        rho = np.asarray(rho, dtype=float)
        return -ein(rho * rho / 4.0) / FOUR_PI

    def c_tilde_quadrature(self) -> float:
        return (math.log(4.0) - EULER_GAMMA) / FOUR_PI


class HankelProfile(RadialProfile):
    """一般截断：Hankel 求积后在 ln ρ 上样条插值"""

    def __init__(
        self,
        cutoff: CutoffFunction,
        L: int,
        tol: float = 1e-12,
        points_per_decade: int = 256,
        table: Optional[Dict[str, np.ndarray]] = None,
    ):
        self.label = cutoff.label
        self.cutoff = cutoff
        self.L = int(L)
        self.gamma0 = math.log(L) / TWO_PI
        self.points_per_decade = points_per_decade
        self.p_max = self._momentum_cap()
        self._moments()

        if table is None:
            self.rho_max = self._table_extent(tol)
            table = self._tabulate()
        else:
            self.rho_max = float(table["rho"][-1])
        self.table = table
        log_rho = np.log(table["rho"])
        self._diff_spline = CubicSpline(log_rho, table["diff"])
        self._d1_spline = CubicSpline(log_rho, table["d1"])
        self._d1_slope = self._d1_spline.derivative()

    def _momentum_cap(self) -> float:
        grid = np.linspace(0.0, 400.0, 40001)
        values = np.abs(self.cutoff(grid))
        below = np.nonzero(values < 1e-17)[0]
        if below.size == 0:
            raise NumericError("截断函数衰减过慢，无法确定动量上限", {"label": self.label})
        return float(grid[below[0]])

    def _moments(self) -> None:
        def moment(k: int) -> float:
            value, _ = integrate.quad(lambda p: p ** k * float(self.cutoff(np.array([p]))[0]), 0.0, self.p_max, limit=400)
            return value

        shells = {k: (1.0 - self.L ** (-(k + 1.0))) * moment(k) for k in (1, 3, 5)}
        self.c2 = shells[1] / (8.0 * math.pi)
        self.c4 = shells[3] / (128.0 * math.pi)
        self.c6 = shells[5] / (4608.0 * math.pi)

    def _breakpoints(self, rho: float) -> np.ndarray:
        fixed = np.array([self.L ** -2.0, 1.0 / self.L, self.L ** -0.5, 1.0, 2.0, 4.0])
        count = int(math.ceil(self.p_max * rho / math.pi)) + 2
        zeros = _j0_zeros(count) / rho if rho > 0 else np.array([])
        edges = np.concatenate(([0.0], fixed, zeros, [self.p_max]))
        edges = np.unique(edges[(edges >= 0.0) & (edges <= self.p_max)])
        return edges

    def _quadrature(self, rho: float):
        edges = self._breakpoints(rho)
        lo, hi = edges[:-1, None], edges[1:, None]
        half = (hi - lo) / 2.0
        p = lo + half * (_GL_NODES[None, :] + 1.0)
        w = half * _GL_WEIGHTS[None, :]
        shell = self.cutoff(p) - self.cutoff(self.L * p)
        x = p * rho
        diff = np.sum(w * (special.j0(x) - 1.0) * shell / p) / TWO_PI
        d1 = -np.sum(w * special.j1(x) * shell) / TWO_PI
        return float(diff), float(d1)

    def _table_extent(self, tol: float) -> float:
        extent = 12.0 * self.L
        threshold = 1e-3 * tol * self.gamma0
        for _ in range(8):
            diff, _ = self._quadrature(extent)
            if abs(diff + self.gamma0) < threshold:
                return extent
            extent *= 2.0
        raise NumericError("Hankel 求积的轮廓未衰减", {"label": self.label, "extent": extent})

    def _tabulate(self) -> Dict[str, np.ndarray]:
        decades = math.log10(self.rho_max / self.rho_small)
        count = int(math.ceil(decades * self.points_per_decade)) + 1
        rho = np.geomspace(self.rho_small, self.rho_max, count)
        logger.info(f"Hankel 求积制表: 截断={self.label} L={self.L} 点数={count} ρ_max={self.rho_max:.1f}")
        diffs = np.empty(count)
        d1s = np.empty(count)
        for i, r in enumerate(rho):
            diffs[i], d1s[i] = self._quadrature(float(r))
        return {"rho": rho, "diff": diffs, "d1": d1s}

    def diff(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        out = np.full(rho.shape, -self.gamma0)
        small = rho < self.rho_small
        mid = (~small) & (rho <= self.rho_max)
        if np.any(small):
            out[small] = self.series_diff(rho[small])
        if np.any(mid):
            out[mid] = self._diff_spline(np.log(rho[mid]))
        return out

    def value(self, rho) -> np.ndarray:
        return self.gamma0 + self.diff(rho)

    def d1(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        out = np.zeros(rho.shape)
        small = rho < self.rho_small
        mid = (~small) & (rho <= self.rho_max)
        if np.any(small):
            r = rho[small]
            q = r * r
            out[small] = r * (-2.0 * self.c2 + q * (4.0 * self.c4 - 6.0 * self.c6 * q))
        if np.any(mid):
            out[mid] = self._d1_spline(np.log(rho[mid]))
        return out

    def d1_over_rho(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        small = rho < self.rho_small
        q = rho * rho
        series = -2.0 * self.c2 + q * (4.0 * self.c4 - 6.0 * self.c6 * q)
        safe = np.where(small, 1.0, rho)
        return np.where(small, series, self.d1(rho) / safe)

    def d2(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        out = np.zeros(rho.shape)
        small = rho < self.rho_small
        mid = (~small) & (rho <= self.rho_max)
        if np.any(small):
            q = rho[small] ** 2
            out[small] = -2.0 * self.c2 + q * (12.0 * self.c4 - 30.0 * self.c6 * q)
        if np.any(mid):
            out[mid] = self._d1_slope(np.log(rho[mid])) / rho[mid]
        return out

    def tail_diff(self, rho) -> np.ndarray:
        """逐尺度求和，进入小 ρ 区后用几何级数闭合"""
        current = np.array(rho, dtype=float, copy=True)
        total = np.zeros_like(current)
        for _ in range(400):
            active = current >= self.rho_small
            if not np.any(active):
                break
            total[active] += self.diff(current[active])
            current[active] /= self.L
        q = current * current
        L2 = float(self.L * self.L)
        total += (
            -self.c2 * q / (1.0 - L2 ** -1)
            + self.c4 * q * q / (1.0 - L2 ** -2)
            - self.c6 * q ** 3 / (1.0 - L2 ** -3)
        )
        return total

    def c_tilde_quadrature(self) -> float:
        def u(p: float) -> float:
            return float(self.cutoff(np.array([p]))[0])

        inner, _ = integrate.quad(lambda p: (1.0 - u(p)) / p if p > 0 else 0.0, 0.0, 1.0, limit=200)
        outer, _ = integrate.quad(lambda p: u(p) / p, 1.0, max(self.p_max, 2.0), limit=400)
        return (math.log(2.0) - EULER_GAMMA + inner - outer) / TWO_PI


def make_profile(cutoff: CutoffFunction, L: int, tol: float = 1e-12, table=None) -> RadialProfile:
    if cutoff.closed_form:
        return GaussianProfile(L)
    return HankelProfile(cutoff, L, tol=tol, table=table)
