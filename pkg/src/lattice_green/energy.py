"""
构型能量

H(ω) = Σ_{i<j} q_i q_j W(x_i − x_j|0)，探针与单位电荷用同一对和
"""

import math

import numpy as np

from src.lattice_green.lattice import ParticleConfig
from src.lattice_green.potential import PotentialTable
from src.utils.errors import DomainError


def energy(config: ParticleConfig, table: PotentialTable) -> float:
    if not table.coulomb:
        raise DomainError("构型能量需要库仑势表", {"mass": table.mass})
    charges = config.charges()
    n = charges.size
    if n < 2:
        return 0.0
    pos = config.positions()
    i, j = np.triu_indices(n, k=1)
    pair_w = table.value(pos[i] - pos[j])
    return math.fsum(charges[i] * charges[j] * pair_w)
