"""
周期格点上的高斯场谱合成

一次复高斯抽样 ψ = side · ifft2(√λ (a + ib)) 给出两个独立实场 Re ψ、Im ψ，
每个的协方差都是以 λ 为特征值的循环矩阵。
"""

import numpy as np

from src.covariance.family import CovarianceFamily
from src.lattice_green.lattice import LatticeSpec
from src.utils.errors import SpecError

NEGATIVE_MODE_TOL = 1e-9


class GaussianTorusField:
    def __init__(self, spectrum: np.ndarray, label: str = ""):
        spectrum = np.asarray(spectrum, dtype=float)
        if spectrum.ndim != 2 or spectrum.shape[0] != spectrum.shape[1]:
            raise SpecError("谱必须是方阵", {"shape": list(spectrum.shape)})
        self.side = spectrum.shape[0]
        self.label = label
        self.spectrum = spectrum
        self.sqrt_eig = np.sqrt(spectrum)

    @classmethod
    def yukawa(cls, spec: LatticeSpec, m: float, beta: float) -> "GaussianTorusField":
        """协方差 βW_Λ(·;m)"""
        side = spec.side
        k = 2.0 * np.pi * np.fft.fftfreq(side)
        k0, k1 = np.meshgrid(k, k, indexing="ij")
        symbol = 2.0 * (1.0 - np.cos(k0)) + 2.0 * (1.0 - np.cos(k1))
        spectrum = beta / (m * m + symbol)
        if not np.all(np.isfinite(spectrum)) or np.min(spectrum) <= 0.0:
            raise SpecError("谱中存在非正模式", {"m": m, "beta": beta})
        return cls(spectrum, label=f"yukawa(m={m}, β={beta})")

    @classmethod
    def from_box(cls, box: np.ndarray, label: str = "") -> "GaussianTorusField":
        """以原点为中心的奇数边长协方差盒子，周期化后做谱分解"""
        box = np.asarray(box, dtype=float)
        if box.shape[0] % 2 == 0:
            raise SpecError("协方差盒子的边长必须为奇数", {"side": box.shape[0]})
        spectrum = np.fft.fft2(np.fft.ifftshift(box)).real
        floor = -NEGATIVE_MODE_TOL * float(np.max(np.abs(spectrum)))
        if np.min(spectrum) < floor:
            raise SpecError("周期化协方差不是半正定的", {"min_mode": float(np.min(spectrum)), "label": label})
        return cls(np.clip(spectrum, 0.0, None), label=label)

    @classmethod
    def from_family(cls, family: CovarianceFamily, j: int, half_side: int) -> "GaussianTorusField":
        """Γ_j 在边长 2·half_side+1 的环面上；half_side 应超过 Γ_j 的作用半径"""
        return cls.from_box(family.kernel_box(j, radius=half_side), label=f"Γ_{j}")

    def covariance(self) -> np.ndarray:
        """FFT 顺序的协方差 C(x)"""
        return np.fft.ifft2(self.spectrum).real

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """count 个实场，形状 (count, side, side)"""
        pairs = (count + 1) // 2
        shape = (pairs, self.side, self.side)
        coeff = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        psi = np.fft.ifft2(self.sqrt_eig * coeff, axes=(1, 2)) * self.side
        fields = np.concatenate([psi.real, psi.imag], axis=0)
        return fields[:count]


def torus_half_side(family: CovarianceFamily, j: int, margin: int = 3) -> int:
    return family.radius(j) + margin
