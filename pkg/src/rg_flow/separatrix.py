"""
BKT 分界线的打靶求解

对 s₀ 二分：低端点流向等离子体侧（s_j < −δ），高端点流向偶极子侧（|z_j| < ε_z 且 s_j > ε_s）。
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from src.config.settings import Settings
from src.covariance.family import CovarianceFamily
from src.rg_coefficients.coefficients import CoefficientTable
from src.rg_flow.coupling import (
    DIPOLE_SIDE,
    ON_SEPARATRIX,
    PLASMA_SIDE,
    UNDECIDED,
    CouplingState,
    CouplingTrajectory,
    flow_step,
    limit_constants,
)
from src.utils.errors import DomainError, SearchError
from src.utils.logger import setup_logger
from src.utils.parallel import parallel_map


@dataclass
class SeparatrixResult:
    z: float
    s_of_z: float
    beta_bkt: float
    iterations: int
    bracket_width: float
    trajectory: CouplingTrajectory

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "s_of_z": self.s_of_z,
            "beta_bkt": self.beta_bkt,
            "iterations": self.iterations,
            "bracket_width": self.bracket_width,
        }


def beta_bkt(s: float, alpha2: float) -> float:
    """β_α(z) = α²/(1 − s(z))"""
    if s >= 1.0:
        raise DomainError("s(z) 必须小于 1", {"s": s})
    return alpha2 / (1.0 - s)


class SeparatrixShooter:
    """分界线打靶器"""

    def __init__(
        self,
        coeffs: CoefficientTable,
        family: CovarianceFamily,
        alpha2: float,
        settings: Optional[Settings] = None,
    ):
        self.settings = settings or Settings()
        self.logger = setup_logger(self.settings)
        self.coeffs = coeffs
        self.family = family
        self.alpha2 = alpha2
        self.j_freeze = self.settings.j_freeze
        limits = limit_constants(coeffs, self.j_freeze)
        self.a, self.b = limits["a"], limits["b"]
        if self.a <= 0 or self.b <= 0:
            raise DomainError("极限系数 a、b 必须为正", limits)

    def thresholds(self, z0: float, J_max: int) -> Tuple[float, float, float]:
        """(δ, ε_z, ε_s)"""
        q1 = math.sqrt(self.a * self.b) * z0
        q_last = q1 / (1.0 + abs(q1) * (J_max - 1))
        return self.settings.plasma_delta, self.settings.dipole_eps_factor * z0, q_last / (10.0 * self.b)

    def classify(self, s0: float, z0: float, J_max: int) -> CouplingTrajectory:
        delta, eps_z, eps_s = self.thresholds(z0, J_max)
        states = [CouplingState(0, s0, z0)]
        tag = UNDECIDED
        for _ in range(J_max):
            state = flow_step(states[-1], self.coeffs, self.family, self.alpha2, self.j_freeze)
            states.append(state)
            if state.s < -delta or not state.finite():
                tag = PLASMA_SIDE
                break
            if abs(state.z) < eps_z and state.s > eps_s:
                tag = DIPOLE_SIDE
                break
        if tag == UNDECIDED:
            last = states[-1]
            # J_max 处仍未判定：比较 b s_J 与 √(ab)|z_J|
            margin = self.b * last.s - math.sqrt(self.a * self.b) * abs(last.z)
            tag = DIPOLE_SIDE if margin > 0 else PLASMA_SIDE
        trajectory = CouplingTrajectory(states, self.a, self.b, self.family.L, {"delta": delta, "eps_z": eps_z, "eps_s": eps_s})
        return trajectory.retag(tag)

    def shoot(self, z0: float, J_max: Optional[int] = None, tol: Optional[float] = None) -> SeparatrixResult:
        J_max = self.settings.j_max_flow if J_max is None else J_max
        tol = self.settings.shooting_tol if tol is None else tol
        if z0 < 0:
            raise DomainError("z₀ 必须非负", {"z0": z0})
        if J_max < 50:
            raise DomainError("J_max 至少为 50", {"J_max": J_max})
        if z0 == 0.0:
            trajectory = self.classify(0.0, 0.0, J_max).retag(ON_SEPARATRIX)
            return SeparatrixResult(0.0, 0.0, self.alpha2, 0, 0.0, trajectory)

        self.logger.info(f"开始分界线打靶: z₀={z0:.3e} J_max={J_max} tol={tol:.1e}")
        lo = 0.0
        lo_traj = self.classify(lo, z0, J_max)
        hi = 2.0 * math.sqrt(self.a / self.b) * z0
        hi_traj = self.classify(hi, z0, J_max)
        cap = 1.0 / self.b
        while hi_traj.tag != DIPOLE_SIDE and hi < cap:
            hi = min(2.0 * hi, cap)
            hi_traj = self.classify(hi, z0, J_max)
        if lo_traj.tag != PLASMA_SIDE or hi_traj.tag != DIPOLE_SIDE:
            raise SearchError(
                "打靶区间两端没有变号",
                {"z0": z0, "s_lo": lo, "lo": lo_traj.tag, "s_hi": hi, "hi": hi_traj.tag},
            )

        iterations = 0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            tag = self.classify(mid, z0, J_max).tag
            if tag == PLASMA_SIDE:
                lo = mid
            else:
                hi = mid
            iterations += 1

        s_of_z = 0.5 * (lo + hi)
        trajectory = self.classify(s_of_z, z0, J_max).retag(ON_SEPARATRIX)
        result = SeparatrixResult(z0, s_of_z, beta_bkt(s_of_z, self.alpha2), iterations, hi - lo, trajectory)
        self.logger.info(f"打靶完成: s(z)={s_of_z:.12e} β={result.beta_bkt:.12f} 迭代={iterations} 区间宽度={hi - lo:.2e}")
        return result

    def grid(self, zs: Sequence[float], J_max: Optional[int] = None, tol: Optional[float] = None, threads: Optional[int] = None) -> List[SeparatrixResult]:
        threads = self.settings.threads if threads is None else threads
        return parallel_map(lambda z: self.shoot(z, J_max, tol), zs, threads=threads, desc="分界线")


def shoot_separatrix(
    z0: float,
    coeffs: CoefficientTable,
    family: CovarianceFamily,
    alpha2: float,
    J_max: int = 400,
    tol: float = 1e-16,
    settings: Optional[Settings] = None,
) -> SeparatrixResult:
    return SeparatrixShooter(coeffs, family, alpha2, settings).shoot(z0, J_max, tol)
