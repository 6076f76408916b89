"""
计数器式随机数

每个样本块的生成器由 (seed, 块号) 直接构造，结果与线程数和调度顺序无关。
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.utils.errors import DomainError

MASK64 = (1 << 64) - 1


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Philox 的 128 位键取 (seed, block)"""
    if block < 0:
        raise DomainError("块号不能为负", {"block": block})
    key = np.array([int(seed) & MASK64, int(block) & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def split_blocks(samples: int, block_size: int) -> List[Tuple[int, int]]:
    """[(块号, 块内样本数)]，最后一块可能不满"""
    if samples <= 0:
        raise DomainError("样本数必须为正", {"samples": samples})
    if block_size <= 0:
        raise DomainError("块大小必须为正", {"block_size": block_size})
    count = int(math.ceil(samples / block_size))
    return [(b, min(block_size, samples - b * block_size)) for b in range(count)]


@dataclass
class Moments:
    """复值样本的计数、和与平方和，合并满足结合律"""

    count: int = 0
    total: complex = 0j
    sq_real: float = 0.0
    sq_imag: float = 0.0

    @classmethod
    def of(cls, values: np.ndarray) -> "Moments":
        values = np.asarray(values, dtype=complex)
        re, im = values.real, values.imag
        return cls(
            count=int(values.size),
            total=complex(math.fsum(re), math.fsum(im)),
            sq_real=math.fsum(re * re),
            sq_imag=math.fsum(im * im),
        )

    def merge(self, other: "Moments") -> "Moments":
        return Moments(
            self.count + other.count,
            self.total + other.total,
            self.sq_real + other.sq_real,
            self.sq_imag + other.sq_imag,
        )

    @property
    def mean(self) -> complex:
        return self.total / self.count

    def stderr(self, part: str = "real") -> float:
        """样本标准差 / √n"""
        n = self.count
        if n < 2:
            return 0.0
        if part == "real":
            mean, sq = self.mean.real, self.sq_real
        else:
            mean, sq = self.mean.imag, self.sq_imag
        var = max(sq - n * mean * mean, 0.0) / (n - 1)
        return math.sqrt(var / n)


def merge_all(parts: List[Moments]) -> Moments:
    out = Moments()
    for part in parts:
        out = out.merge(part)
    return out


def field_block_size(sites: int, preferred: int, budget: int = 2_000_000) -> int:
    """每块场数，使单块数组不超过 budget 个格点值"""
    return max(1, min(int(preferred), budget // max(int(sites), 1)))
