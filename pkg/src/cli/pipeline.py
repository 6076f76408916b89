"""
按运行配置逐级构造计算对象

协方差族 → 系数表 → 分界线 → 电荷流 → 渐近常数，每一级只算一次。
"""

from functools import cached_property
from typing import Optional

from src.charge_flow.c_eta import c_eta
from src.charge_flow.renorm import ChargeTrajectory, run_charge_flow
from src.config.settings import RunConfig, Settings
from src.correlation.asymptotic import AsymptoticConstants
from src.covariance.family import CovarianceFamily, build_family
from src.rg_coefficients.coefficients import CoefficientTable, build_coefficient_table
from src.rg_flow.coupling import CouplingTrajectory
from src.rg_flow.separatrix import SeparatrixResult, SeparatrixShooter
from src.utils.errors import DomainError
from src.utils.logger import setup_logger


class Pipeline:
    def __init__(self, config: RunConfig, settings: Optional[Settings] = None):
        self.config = config
        self.settings = settings or Settings()
        self.logger = setup_logger(self.settings)

    @property
    def eta(self) -> float:
        if not 0.0 < self.config.eta < 1.0:
            raise DomainError("流方程需要 η ∈ (0, 1)", {"eta": self.config.eta})
        return self.config.eta

    @property
    def j_flow(self) -> int:
        return int(self.config.extra.get("j_flow", self.settings.j_max_flow))

    @cached_property
    def family(self) -> CovarianceFamily:
        c = self.config
        return build_family(c.L, c.j_max, c.cutoff, c.tol, self.settings)

    @cached_property
    def coeffs(self) -> CoefficientTable:
        m_form = str(self.config.extra.get("m_form", "recursion"))
        return build_coefficient_table(self.family, self.config.alpha2, self.eta, self.config.j_max, self.settings, m_form)

    @cached_property
    def shooter(self) -> SeparatrixShooter:
        return SeparatrixShooter(self.coeffs, self.family, self.config.alpha2, self.settings)

    @cached_property
    def separatrix(self) -> SeparatrixResult:
        return self.shooter.shoot(self.config.z, self.j_flow, self.settings.shooting_tol)

    @property
    def coupling(self) -> CouplingTrajectory:
        return self.separatrix.trajectory

    @cached_property
    def charge(self) -> ChargeTrajectory:
        try:
            return run_charge_flow(self.coupling, self.coeffs, self.family, self.config.alpha2, self.eta, j_freeze=self.settings.j_freeze)
        except Exception as e:
            self.logger.error(f"电荷流计算失败: {e}")
            raise

    @cached_property
    def c_eta_value(self) -> Optional[float]:
        if abs(self.eta - 0.5) < 1e-15:
            return None
        return c_eta(self.family, self.config.alpha2, self.eta, settings=self.settings)

    @cached_property
    def constants(self) -> AsymptoticConstants:
        return AsymptoticConstants.from_family(self.family, self.c_eta_value)
