"""
连续 Kosterlitz 方程

ṡ = −8π²e^{8πc_E} z²，ż = −2sz
守恒量 I = s² − 4π²e^{8πc_E} z²，分界线 s = 2πe^{4πc_E} z 上 s(ℓ) = s₀/(1 + 2s₀ℓ)
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from loguru import logger

from src.lattice_green.potential import euler_constant
from src.utils.errors import DomainError, NumericError
from src.utils.parallel import parallel_map

MAX_HALVINGS = 20


@dataclass(frozen=True)
class ODEState:
    ell: float
    s: float
    z: float
    invariant: float


def kosterlitz_constant(c_E: Optional[float] = None) -> float:
    """K = 4π²e^{8πc_E}"""
    c_E = euler_constant() if c_E is None else c_E
    return 4.0 * math.pi ** 2 * math.exp(8.0 * math.pi * c_E)


def separatrix_slope(c_E: Optional[float] = None) -> float:
    """2πe^{4πc_E}"""
    return math.sqrt(kosterlitz_constant(c_E))


def invariant(s: float, z: float, K: float) -> float:
    return s * s - K * z * z


def _rhs(s: float, z: float, K: float) -> Tuple[float, float]:
    return -2.0 * K * z * z, -2.0 * s * z


def _rk4(s: float, z: float, h: float, K: float) -> Tuple[float, float]:
    k1s, k1z = _rhs(s, z, K)
    k2s, k2z = _rhs(s + 0.5 * h * k1s, z + 0.5 * h * k1z, K)
    k3s, k3z = _rhs(s + 0.5 * h * k2s, z + 0.5 * h * k2z, K)
    k4s, k4z = _rhs(s + h * k3s, z + h * k3z, K)
    return (
        s + h * (k1s + 2.0 * k2s + 2.0 * k3s + k4s) / 6.0,
        z + h * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0,
    )


def _advance(s: float, z: float, h: float, K: float) -> Tuple[float, float]:
    """溢出时把步长减半重试，子步合起来仍走完 h"""
    for halving in range(MAX_HALVINGS + 1):
        pieces = 2 ** halving
        sub = h / pieces
        ss, zz = s, z
        ok = True
        for _ in range(pieces):
            ss, zz = _rk4(ss, zz, sub, K)
            if not (math.isfinite(ss) and math.isfinite(zz)):
                ok = False
                break
        if ok:
            return ss, zz
    raise NumericError("Kosterlitz 方程积分溢出", {"s": s, "z": z, "h": h})


def kosterlitz_integrate(
    s0: float,
    z0: float,
    ell_end: float,
    h: float,
    c_E: Optional[float] = None,
    record_every: int = 1,
) -> List[ODEState]:
    if h <= 0:
        raise DomainError("步长必须为正", {"h": h})
    if ell_end < 0:
        raise DomainError("ℓ_end 不能为负", {"ell_end": ell_end})
    K = kosterlitz_constant(c_E)
    steps = int(round(ell_end / h))
    s, z = float(s0), float(z0)
    out = [ODEState(0.0, s, z, invariant(s, z, K))]
    for k in range(1, steps + 1):
        s, z = _advance(s, z, h, K)
        if k % record_every == 0 or k == steps:
            out.append(ODEState(k * h, s, z, invariant(s, z, K)))
    logger.debug(f"Kosterlitz 积分: s₀={s0:.6e} z₀={z0:.6e} ℓ_end={ell_end} 步数={steps} 终值 s={s:.6e} z={z:.6e}")
    return out


def separatrix_closed_form(s0: float, ell: float) -> float:
    return s0 / (1.0 + 2.0 * s0 * ell)


def invariant_drift(states: Sequence[ODEState]) -> float:
    first = states[0].invariant
    return max(abs(st.invariant - first) for st in states)


def orbits_frame(states: Sequence[ODEState]) -> pd.DataFrame:
    return pd.DataFrame({"ell": [st.ell for st in states], "s": [st.s for st in states], "z": [st.z for st in states], "invariant": [st.invariant for st in states]})


def phase_diagram(
    initial: Sequence[Tuple[float, float]],
    ell_end: float,
    h: float,
    c_E: Optional[float] = None,
    record_every: int = 10,
    threads: int = 1,
) -> List[Dict[str, object]]:
    """初值网格上的轨道；I = 0 且 s > 0 的轨道标为分界线"""
    K = kosterlitz_constant(c_E)
    scale = max((abs(s) + math.sqrt(K) * abs(z) for s, z in initial), default=1.0) or 1.0

    def orbit(point: Tuple[float, float]) -> Dict[str, object]:
        s0, z0 = point
        states = kosterlitz_integrate(s0, z0, ell_end, h, c_E, record_every)
        I0 = invariant(s0, z0, K)
        on_separatrix = abs(I0) <= 1e-12 * scale * scale and s0 > 0
        return {"s0": s0, "z0": z0, "invariant": I0, "separatrix": on_separatrix, "states": states}

    return parallel_map(orbit, list(initial), threads=threads, desc="相图轨道")
