"""
格点规格与粒子构型
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from src.utils.errors import DomainError, SpecError


class LatticeSpec(BaseModel):
    """边长 L^R 的周期方格 Λ，坐标约化到中心盒子"""

    model_config = ConfigDict(frozen=True)

    L: int
    R: int

    @model_validator(mode="before")
    @classmethod
    def _check(cls, data):
        if not isinstance(data, dict):
            return data
        L = int(data.get("L", 0))
        R = int(data.get("R", 0))
        if L < 3 or L % 2 == 0:
            raise SpecError("L 必须是不小于 3 的奇数", {"L": L})
        if R < 1:
            raise SpecError("R 必须为正整数", {"R": R})
        return data

    @property
    def side(self) -> int:
        return self.L ** self.R

    @property
    def volume(self) -> int:
        return self.side * self.side

    def reduce(self, x) -> np.ndarray:
        """周期约化到 max|x_i| < side/2"""
        pts = np.asarray(x, dtype=np.int64)
        half = self.side // 2
        return (pts + half) % self.side - half

    def index(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """FFT 数组下标"""
        pts = np.asarray(x, dtype=np.int64) % self.side
        return pts[..., 0], pts[..., 1]

    def points(self) -> np.ndarray:
        """中心盒子内的全部格点，形状 (volume, 2)"""
        half = self.side // 2
        axis = np.arange(-half, half + 1)
        y0, y1 = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([y0.ravel(), y1.ravel()], axis=1)


class ParticleConfig(BaseModel):
    """带标号的单位电荷与可选探针电荷"""

    model_config = ConfigDict(frozen=True)

    particles: List[Tuple[Tuple[int, int], int]] = []
    probes: List[Tuple[Tuple[int, int], float]] = []

    @field_validator("particles")
    @classmethod
    def _unit_charges(cls, v):
        for _, q in v:
            if q not in (1, -1):
                raise DomainError("粒子电荷必须为 ±1", {"charge": q})
        return v

    @field_validator("probes")
    @classmethod
    def _fractional_charges(cls, v):
        for _, q in v:
            if not 0.0 < abs(q) <= 1.0:
                raise DomainError("探针电荷的绝对值必须位于 (0, 1]", {"charge": q})
        return v

    @property
    def neutral(self) -> bool:
        return sum(q for _, q in self.particles) == 0

    @property
    def size(self) -> int:
        return len(self.particles)

    def positions(self) -> np.ndarray:
        """粒子在前、探针在后"""
        pts = [p for p, _ in self.particles] + [p for p, _ in self.probes]
        return np.asarray(pts, dtype=np.int64).reshape(-1, 2)

    def charges(self) -> np.ndarray:
        qs = [float(q) for _, q in self.particles] + [float(q) for _, q in self.probes]
        return np.asarray(qs, dtype=float)

    def translate(self, shift) -> "ParticleConfig":
        s0, s1 = int(shift[0]), int(shift[1])
        return ParticleConfig(
            particles=[((p[0] + s0, p[1] + s1), q) for p, q in self.particles],
            probes=[((p[0] + s0, p[1] + s1), q) for p, q in self.probes],
        )

    def conjugate(self) -> "ParticleConfig":
        """全体电荷反号"""
        return ParticleConfig(
            particles=[(p, -q) for p, q in self.particles],
            probes=[(p, -q) for p, q in self.probes],
        )
