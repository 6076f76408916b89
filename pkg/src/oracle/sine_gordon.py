"""
sine-Gordon 表示的蒙特卡洛与 Wick 展开

目标量 𝔼_{m,β}[e^{2zΣ_x cos φ_x} · e^{iη(φ_x − φ_y)}]，φ 的协方差为 βW_Λ(·;m)。
"""

import math
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src.config.settings import Settings
from src.lattice_green.lattice import LatticeSpec
from src.lattice_green.potential import PotentialTable, coulomb_potential, yukawa_potential
from src.oracle.fields import GaussianTorusField
from src.oracle.rng import Moments, block_generator, field_block_size, merge_all, split_blocks
from src.utils.errors import DomainError, ResourceError
from src.utils.logger import setup_logger
from src.utils.parallel import parallel_map

Insertion = Tuple[float, Tuple[int, int], Tuple[int, int]]

MIN_SAMPLES = 10_000
MAX_WICK_ORDER = 6


class MCEstimate(BaseModel):
    mean: float
    stderr: float
    samples: int
    seed: int
    imag: float = 0.0
    imag_stderr: float = 0.0
    params: Dict[str, object] = {}

    def report(self) -> dict:
        return {
            "value": self.mean,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "imag": self.imag,
            "imag_stderr": self.imag_stderr,
            "params": self.params,
        }


def _check_insertion(spec: LatticeSpec, insertion: Optional[Insertion]) -> Optional[Tuple[float, Tuple, Tuple]]:
    if insertion is None:
        return None
    eta, x, y = insertion
    if not 0.0 < eta <= 1.0:
        raise DomainError("插入电荷 η 必须位于 (0, 1]", {"eta": eta})
    return float(eta), spec.index(np.asarray(x)), spec.index(np.asarray(y))


class SineGordonSampler:
    """按块抽样；块 b 的随机数只依赖 (seed, b)"""

    def __init__(self, spec: LatticeSpec, beta: float, m: float, settings: Optional[Settings] = None):
        if m <= 0:
            raise DomainError("正则化质量 m 必须为正", {"m": m})
        if beta <= 0:
            raise DomainError("β 必须为正", {"beta": beta})
        self.settings = settings or Settings()
        self.logger = setup_logger(self.settings)
        self.spec = spec
        self.beta = float(beta)
        self.m = float(m)
        self.field = GaussianTorusField.yukawa(spec, self.m, self.beta)

    def _block(self, seed: int, block: int, count: int, z: float, insertion) -> Moments:
        rng = block_generator(seed, block)
        phi = self.field.sample(rng, count)
        values = np.exp(2.0 * z * np.cos(phi).sum(axis=(1, 2))).astype(complex)
        if insertion is not None:
            eta, (x0, x1), (y0, y1) = insertion
            values = values * np.exp(1j * eta * (phi[:, x0, x1] - phi[:, y0, y1]))
        return Moments.of(values)

    def estimate(self, z: float, samples: int, seed: int, insertion: Optional[Insertion] = None, threads: int = 1) -> MCEstimate:
        if samples < MIN_SAMPLES:
            raise DomainError("样本数过少", {"samples": samples, "required": MIN_SAMPLES})
        checked = _check_insertion(self.spec, insertion)
        blocks = split_blocks(samples, field_block_size(self.spec.volume, self.settings.mc_block_size))
        parts = parallel_map(
            lambda item: self._block(seed, item[0], item[1], z, checked),
            blocks,
            threads=threads,
            desc="sine-Gordon 抽样",
        )
        total = merge_all(parts)
        mean = total.mean
        params = {"L": self.spec.L, "R": self.spec.R, "beta": self.beta, "m": self.m, "z": z}
        if insertion is not None:
            params.update({"eta": insertion[0], "x": list(insertion[1]), "y": list(insertion[2])})
        result = MCEstimate(
            mean=mean.real,
            stderr=total.stderr("real"),
            samples=total.count,
            seed=int(seed),
            imag=mean.imag,
            imag_stderr=total.stderr("imag"),
            params=params,
        )
        self.logger.info(f"sine-Gordon 估计: m={self.m} z={z} 均值={result.mean:.8f} ± {result.stderr:.2e} 虚部={result.imag:.2e}")
        return result


def sine_gordon_mc(
    spec: LatticeSpec,
    beta: float,
    m: float,
    z: float,
    samples: int,
    seed: int,
    insertion: Optional[Insertion] = None,
    threads: int = 1,
    settings: Optional[Settings] = None,
) -> MCEstimate:
    return SineGordonSampler(spec, beta, m, settings).estimate(z, samples, seed, insertion, threads)


def _charge_matrix(table: PotentialTable, sites: np.ndarray) -> np.ndarray:
    """C[a, b] = W(s_a − s_b)"""
    diff = sites[:, None, :] - sites[None, :, :]
    return table.value(diff.reshape(-1, 2)).reshape(sites.shape[0], sites.shape[0])


def gaussian_charge_expectation(table: PotentialTable, beta: float, charges: Sequence[float], positions) -> float:
    """𝔼[exp(iΣσ_jφ_{x_j})] = exp{−(β/2)Σ_{i,j}σ_iσ_j W(x_i − x_j)}"""
    sigma = np.asarray(charges, dtype=float)
    pts = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
    if sigma.size != pts.shape[0]:
        raise DomainError("电荷与位置个数不一致", {"charges": int(sigma.size), "positions": int(pts.shape[0])})
    C = _charge_matrix(table, pts)
    return math.exp(-0.5 * beta * float(sigma @ C @ sigma))


def _moment(n: int, C: np.ndarray, beta: float, probe: Optional[Tuple[np.ndarray, float]], translation: bool, threads: int) -> float:
    """2^{−n} Σ_{位置 n 元组} Σ_{σ∈{±1}^n} exp(−½β Q(σ))"""
    V = C.shape[0]
    if n == 0:
        return 1.0 if probe is None else math.exp(-0.5 * beta * probe[1])
    signs = np.array(list(product((1.0, -1.0), repeat=n)))
    outer = (signs[:, :, None] * signs[:, None, :]).reshape(signs.shape[0], -1)
    free = n - 1 if translation else n
    prefix = max(free - 3, 0)
    suffix = free - prefix

    def chunk(head: Tuple[int, ...]) -> float:
        if suffix == 0:
            tail = np.zeros((1, 0), dtype=np.int64)
        else:
            tail = np.indices((V,) * suffix).reshape(suffix, -1).T
        lead = np.broadcast_to(np.array(head, dtype=np.int64), (tail.shape[0], len(head)))
        cols = [lead, tail]
        if translation:
            cols.insert(0, np.zeros((tail.shape[0], 1), dtype=np.int64))
        tuples = np.concatenate(cols, axis=1)
        G = C[tuples[:, :, None], tuples[:, None, :]]
        quad = G.reshape(G.shape[0], -1) @ outer.T
        if probe is not None:
            u, pp = probe
            quad = quad + 2.0 * (u[tuples] @ signs.T) + pp
        return math.fsum(np.exp(-0.5 * beta * quad).ravel())

    heads = list(product(range(V), repeat=prefix))
    parts = parallel_map(chunk, heads, threads=threads, desc=f"Wick n={n}")
    weight = float(V) if translation else 1.0
    return weight * math.fsum(parts) / 2.0 ** n


def wick_series(
    spec: LatticeSpec,
    beta: float,
    m: float,
    z: float,
    n_max: int = 4,
    insertion: Optional[Insertion] = None,
    threads: int = 1,
) -> Dict[str, object]:
    """𝔼[e^{2zΣcosφ}(e^{iη(φ_x−φ_y)})] 的 z 幂级数，各阶矩由 Wick 定理精确给出"""
    if n_max < 0 or n_max > MAX_WICK_ORDER:
        raise ResourceError("Wick 展开阶数超出范围", {"n_max": n_max, "limit": MAX_WICK_ORDER})
    table = yukawa_potential(spec, m)
    sites = spec.points()
    probe = None
    if insertion is not None:
        eta, x, y = insertion
        px, py = np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)
        # 探针 (η, −η) 与单位电荷的交叉项、探针自身的二次型
        u = eta * (table.value(sites - px) - table.value(sites - py))
        pp = 2.0 * eta * eta * (float(table.value(np.zeros(2))[0]) - float(table.value(px - py)[0]))
        probe = (u, pp)
    C = _charge_matrix(table, sites)
    translation = probe is None
    moments: List[float] = []
    terms: List[float] = []
    for n in range(n_max + 1):
        M = _moment(n, C, beta, probe, translation, threads)
        moments.append(M)
        terms.append((2.0 * z) ** n / math.factorial(n) * M)
    return {"value": math.fsum(terms), "moments": moments, "terms": terms, "n_max": n_max, "m": m, "z": z}


def m_scan(
    spec: LatticeSpec,
    beta: float,
    z: float,
    samples: int,
    seed: int,
    insertion: Optional[Insertion] = None,
    schedule: Optional[Sequence[float]] = None,
    threads: int = 1,
    settings: Optional[Settings] = None,
) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """正则化质量逐步减小时的估计值；外推只作为趋势报告"""
    settings = settings or Settings()
    schedule = list(schedule or settings.regulator_schedule)
    rows = []
    for m in schedule:
        est = sine_gordon_mc(spec, beta, m, z, samples, seed, insertion, threads, settings)
        rows.append({"m": m, "mean": est.mean, "stderr": est.stderr, "imag": est.imag})
    frame = pd.DataFrame(rows, columns=["m", "mean", "stderr", "imag"])
    trend: Dict[str, float] = {}
    if len(schedule) >= 2:
        weights = 1.0 / np.maximum(frame["stderr"].to_numpy(), 1e-12)
        slope, intercept = np.polyfit(frame["m"].to_numpy() ** 2, frame["mean"].to_numpy(), 1, w=weights)
        trend = {"extrapolated": float(intercept), "slope_m2": float(slope)}
    if insertion is not None and z == 0.0:
        eta, x, y = insertion
        W = coulomb_potential(spec)
        trend["neutral_limit"] = math.exp(beta * eta * eta * float(W.value(np.asarray(x) - np.asarray(y))[0]))
    return frame, trend
