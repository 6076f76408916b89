"""
巨正则配分函数的穷举

Z = Σ_{n 偶}(zⁿ/n!) Σ_{中性带标号构型} e^{−βH}。n 个粒子中有 C(n, n/2) 种电荷排列，
它们的位置和相同，因此只枚举"前 n/2 个为正、后 n/2 个为负"的位置元组。
探针只进入能量，不计入熵。
"""

import math
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel

from src.config.settings import Settings
from src.lattice_green.lattice import LatticeSpec
from src.lattice_green.potential import PotentialTable, coulomb_potential
from src.utils.errors import DomainError, ResourceError
from src.utils.parallel import parallel_map

Probe = Tuple[Tuple[int, int], float]

MAX_ORDER = 6
SUFFIX_LENGTH = 4


class EnumerationResult(BaseModel):
    Z: float
    Z_probe: Optional[float] = None
    n_max: int
    contributions: List[float]
    probe_contributions: List[float] = []
    series_converged: bool

    def report(self) -> dict:
        return self.model_dump()


class PairEnergy:
    """成对能量 W(x) − W(0)；库仑表的 W(0|0) = 0"""

    def __init__(self, spec: LatticeSpec, table: Optional[PotentialTable] = None):
        self.spec = spec
        self.table = table if table is not None else coulomb_potential(spec)
        self.sites = spec.points()
        self.w0 = float(self.table.value(np.zeros(2))[0])

    def __call__(self, diff) -> np.ndarray:
        return self.table.value(diff) - self.w0

    def matrix(self) -> np.ndarray:
        V = self.sites.shape[0]
        diff = self.sites[:, None, :] - self.sites[None, :, :]
        return self(diff.reshape(-1, 2)).reshape(V, V)

    def probe_field(self, probes: Sequence[Probe]) -> Tuple[np.ndarray, float]:
        """u[s] = Σ_k q_k W(s − p_k)，以及探针之间的能量"""
        u = np.zeros(self.sites.shape[0])
        for pos, q in probes:
            u += q * self(self.sites - np.asarray(pos, dtype=np.int64))
        pp = 0.0
        for a in range(len(probes)):
            for b in range(a + 1, len(probes)):
                (pa, qa), (pb, qb) = probes[a], probes[b]
                pp += qa * qb * float(self(np.asarray(pa) - np.asarray(pb))[0])
        return u, pp


def _order_sum(n: int, W: np.ndarray, beta: float, probe: Optional[Tuple[np.ndarray, float]], threads: int) -> float:
    """Σ_{x₁..x_{n/2}, y₁..y_{n/2}} e^{−βH}，正电荷在前"""
    V = W.shape[0]
    half = n // 2
    charges = np.array([1.0] * half + [-1.0] * half)
    iu, ju = np.triu_indices(n, k=1)
    qq = charges[iu] * charges[ju]
    translation = probe is None
    free = n - 1 if translation else n
    prefix = max(free - SUFFIX_LENGTH, 0)
    suffix = free - prefix

    def chunk(head: Tuple[int, ...]) -> float:
        tail = np.indices((V,) * suffix).reshape(suffix, -1).T
        lead = np.broadcast_to(np.array(head, dtype=np.int64), (tail.shape[0], len(head)))
        cols = [lead, tail]
        if translation:
            cols.insert(0, np.zeros((tail.shape[0], 1), dtype=np.int64))
        tuples = np.concatenate(cols, axis=1)
        H = W[tuples[:, iu], tuples[:, ju]] @ qq
        if probe is not None:
            u, pp = probe
            H = H + u[tuples] @ charges + pp
        return math.fsum(np.exp(-beta * H))

    heads = list(product(range(V), repeat=prefix))
    parts = parallel_map(chunk, heads, threads=threads, desc=f"枚举 n={n}")
    return (float(V) if translation else 1.0) * math.fsum(parts)


def _series(
    W: np.ndarray,
    beta: float,
    z: float,
    n_max: int,
    probe: Optional[Tuple[np.ndarray, float]],
    threads: int,
) -> List[float]:
    out = [1.0 if probe is None else math.exp(-beta * probe[1])]
    for n in range(2, n_max + 1, 2):
        if z == 0.0:
            out.append(0.0)
            continue
        patterns = math.comb(n, n // 2)
        out.append(z ** n / math.factorial(n) * patterns * _order_sum(n, W, beta, probe, threads))
    return out


def enumerate_Z(
    spec: LatticeSpec,
    beta: float,
    z: float,
    n_max: int = 4,
    probes: Optional[Sequence[Probe]] = None,
    table: Optional[PotentialTable] = None,
    threads: int = 1,
    settings: Optional[Settings] = None,
) -> EnumerationResult:
    settings = settings or Settings()
    if n_max < 0 or n_max % 2 != 0 or n_max > MAX_ORDER:
        raise DomainError("n_max 必须是不超过 6 的偶数", {"n_max": n_max})
    if z < 0:
        raise DomainError("逸度 z 不能为负", {"z": z})
    V = spec.volume
    probes = list(probes or [])
    for n in range(2, n_max + 1, 2):
        tuples = V ** (n if probes else n - 1)
        if tuples > settings.enumeration_max_tuples:
            raise ResourceError("位置元组数超过枚举上限", {"n": n, "tuples": tuples, "limit": settings.enumeration_max_tuples})

    energy = PairEnergy(spec, table)
    W = energy.matrix()
    contributions = _series(W, beta, z, n_max, None, threads)
    Z = math.fsum(contributions)
    Z_probe = None
    probe_terms: List[float] = []
    if probes:
        probe_terms = _series(W, beta, z, n_max, energy.probe_field(probes), threads)
        Z_probe = math.fsum(probe_terms)
    converged = n_max == 0 or contributions[-1] < settings.series_fraction * Z
    if not converged:
        logger.warning(f"枚举截断阶 n_max={n_max} 的贡献占比 {contributions[-1] / Z:.2e} 超过阈值")
    logger.debug(f"枚举完成: side={spec.side} β={beta} z={z} n_max={n_max} Z={Z:.12f}")
    return EnumerationResult(
        Z=Z,
        Z_probe=Z_probe,
        n_max=n_max,
        contributions=contributions,
        probe_contributions=probe_terms,
        series_converged=converged,
    )


def enumeration_rho(
    spec: LatticeSpec,
    beta: float,
    z: float,
    eta: float,
    x: Tuple[int, int],
    y: Tuple[int, int],
    n_max: int = 4,
    table: Optional[PotentialTable] = None,
    threads: int = 1,
    settings: Optional[Settings] = None,
) -> float:
    """ρ_η(x − y) = Z^{p₁,p₂}/Z，p₁ = (x, η)，p₂ = (y, −η)"""
    result = enumerate_Z(spec, beta, z, n_max, [(tuple(x), eta), (tuple(y), -eta)], table, threads, settings)
    return result.Z_probe / result.Z


def small_z_pressure(spec: LatticeSpec, beta: float, z: float, n_max: int = 4, settings: Optional[Settings] = None) -> dict:
    """有限体积压强 ln Z/(β|Λ|) 与 z → 0 处的曲率 2Σe^{βW}/(β|Λ|)，只作诊断"""
    result = enumerate_Z(spec, beta, z, n_max, settings=settings)
    V = float(spec.volume)
    W = PairEnergy(spec).matrix()
    pair = V * math.fsum(np.exp(beta * W[0]))
    curvature = 2.0 * pair / (beta * V)
    return {
        "pressure": math.log(result.Z) / (beta * V),
        "curvature": curvature,
        "pair_coefficient": pair,
        "n_max": n_max,
    }
