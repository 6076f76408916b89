"""
自由能级数

p(β, z) = −(1/2β) ln(1 − s(z)) − (1/β) Σ_j (E_{j+1} − E_j)
"""

import math
from typing import Dict, List

from loguru import logger

from src.rg_flow.coupling import DIPOLE_SIDE, ON_SEPARATRIX, CouplingTrajectory
from src.utils.errors import DomainError, NumericError

# 小于该量级的增量不参与单调性判断
NEGLIGIBLE = 1e-300


def increments(trajectory: CouplingTrajectory) -> List[float]:
    states = trajectory.states
    return [b.E - a.E for a, b in zip(states[:-1], states[1:])]


def check_convergence(steps: List[float]) -> None:
    """后半段增量必须单调不增，否则视为发散"""
    tail = [abs(v) for v in steps[len(steps) // 2 :]]
    for k, (a, b) in enumerate(zip(tail[:-1], tail[1:])):
        if a > NEGLIGIBLE and b > a:
            raise NumericError("自由能级数发散", {"index": len(steps) // 2 + k + 1, "previous": a, "current": b})


def free_energy(trajectory: CouplingTrajectory, beta: float, z: float) -> float:
    if beta <= 0:
        raise DomainError("β 必须为正", {"beta": beta})
    if trajectory.tag not in (DIPOLE_SIDE, ON_SEPARATRIX):
        raise DomainError("自由能要求轨迹收敛", {"tag": trajectory.tag})
    if abs(trajectory.z0 - z) > 1e-15 * max(abs(z), 1.0):
        raise DomainError("轨迹的初始活度与 z 不一致", {"z": z, "z0": trajectory.z0})
    s = trajectory.s0
    if s >= 1.0:
        raise DomainError("s(z) 必须小于 1", {"s": s})
    steps = increments(trajectory)
    check_convergence(steps)
    p = -math.log1p(-s) / (2.0 * beta) - math.fsum(steps) / beta
    logger.debug(f"自由能: β={beta:.6f} z={z:.3e} s={s:.6e} p={p:.12e}")
    return p


def increment_envelope(trajectory: CouplingTrajectory) -> Dict[str, object]:
    """|E_{j+1} − E_j| ≤ C L^{−2j}|q_j|，C 在 j = 1 处测得"""
    steps = increments(trajectory)
    L = float(trajectory.L)
    if len(steps) < 2 or trajectory.q(1) == 0.0:
        return {"C": 0.0, "ratios": []}
    C = abs(steps[1]) / (L ** -2 * abs(trajectory.q(1)))
    ratios = []
    for j in range(1, len(steps)):
        bound = C * L ** (-2 * j) * abs(trajectory.q(j))
        if bound > NEGLIGIBLE:
            ratios.append(abs(steps[j]) / bound)
    return {"C": C, "ratios": ratios}

