"""
分数电荷重整化常数的流、跳跃矩阵与 c(η)
"""

import math

import numpy as np
import pytest

from src.charge_flow.c_eta import c2_second_order, c_eta, c_eta_series
from src.charge_flow.qmatrix import (
    adaptive_j0,
    decompose,
    decomposition_frame,
    enumerate_paths,
    oriented_row,
    prefactor_log,
    q_matrix,
)
from src.charge_flow.renorm import (
    RenormState,
    charge_step,
    linear_charge_flow,
    log_combine,
    mirror_table,
    run_charge_flow,
    run_pm_flow,
)
from src.rg_flow.coupling import CouplingState, run_flow
from src.utils.errors import DomainError, RangeError, ResourceError

EIGHT_PI = 8.0 * math.pi
M_VALUES = {"m11": 0.4, "m22": 1.2, "m12": 0.7, "m21": 0.5}


@pytest.fixture
def coupling(family2, make_table):
    return run_flow(0.05, 0.02, make_table(), family2, EIGHT_PI, 14)


def test_log_combine():
    sign, value = log_combine([(1.0, 1, math.log(3.0)), (-1.0, 1, math.log(5.0))])
    assert sign == -1
    assert value == pytest.approx(math.log(2.0), rel=1e-15)
    assert log_combine([(1.0, 0, 0.0)]) == (0, float("-inf"))


def test_pure_scaling_without_interaction(family2, make_table):
    table = make_table(eta=0.3, **M_VALUES)
    free = run_flow(0.0, 0.0, table, family2, EIGHT_PI, 10)
    traj = run_charge_flow(free, table, family2, EIGHT_PI, 0.3)
    for st in traj.states:
        assert st.log_Z == pytest.approx((2.0 - 2.0 * 0.09) * st.j * math.log(2.0), abs=1e-12)
        assert st.sign_Zbar == 0
    assert traj.J == 10


def test_log_domain_matches_linear(family2, make_table, coupling):
    table = make_table(eta=0.3, **M_VALUES)
    traj = run_charge_flow(coupling, table, family2, EIGHT_PI, 0.3, J=12)
    linear = linear_charge_flow(coupling, table, family2, EIGHT_PI, 0.3, 12)
    for st, (Z, Zbar) in zip(traj.states, linear):
        assert st.Z == pytest.approx(Z, rel=1e-12)
        assert st.Zbar == pytest.approx(Zbar, rel=1e-12, abs=1e-300)


def test_heavy_charge_runs_on_the_mirrored_problem(family2, make_table, coupling):
    table = make_table(eta=0.7, **M_VALUES)
    image = mirror_table(table)
    assert image.eta == pytest.approx(0.3)
    assert image.m11 == table.m22 and image.m12 == table.m21
    traj = run_charge_flow(coupling, table, family2, EIGHT_PI, 0.7, J=12)
    linear = linear_charge_flow(coupling, table, family2, EIGHT_PI, 0.7, 12)
    assert traj.eta == 0.7
    assert traj.states[0].Z == 1.0 and traj.states[0].sign_Zbar == 0
    for st, (Z, Zbar) in zip(traj.states, linear):
        assert st.Z == pytest.approx(Z, rel=1e-12)
        assert st.Zbar == pytest.approx(Zbar, rel=1e-12, abs=1e-300)


def test_half_charge_decouples(family2, make_table, coupling):
    table = make_table(eta=0.5, m11=0.4, m22=0.4, m12=0.7, m21=0.7)
    traj = run_charge_flow(coupling, table, family2, EIGHT_PI, 0.5, J=12)
    pm = run_pm_flow(coupling, table, family2, EIGHT_PI, 12)
    for st, (lp, lm) in zip(traj.states, pm):
        assert st.plus()[1] == pytest.approx(lp, abs=1e-12)
        assert st.minus()[1] == pytest.approx(lm, abs=1e-12)
    frame = traj.normalized_pm()
    assert len(frame) == 12
    assert {"norm_plus", "norm_minus", "drift_plus", "drift_minus"} <= set(frame.columns)


def test_mirror_symmetry(family2, make_table, coupling):
    table = make_table(eta=0.3, **M_VALUES)
    mirrored = make_table(eta=0.7, m11=M_VALUES["m22"], m22=M_VALUES["m11"], m12=M_VALUES["m21"], m21=M_VALUES["m12"])
    a = run_charge_flow(coupling, table, family2, EIGHT_PI, 0.3, J=10)
    b = run_charge_flow(coupling, mirrored, family2, EIGHT_PI, 0.7, J=10, initial=RenormState.initial(0.0, 1.0))
    for sa, sb in zip(a.states, b.states):
        flipped = sb.swapped()
        assert flipped.sign_Z == sa.sign_Z
        assert flipped.sign_Zbar == sa.sign_Zbar
        assert flipped.log_Z == pytest.approx(sa.log_Z, abs=1e-12)
        if sa.sign_Zbar:
            assert flipped.log_Zbar == pytest.approx(sa.log_Zbar, abs=1e-12)


def test_charge_flow_checks(family2, make_table, coupling):
    table = make_table(eta=0.3, **M_VALUES)
    with pytest.raises(DomainError):
        run_charge_flow(coupling, table, family2, EIGHT_PI, 1.0)
    with pytest.raises(RangeError):
        run_charge_flow(coupling, table, family2, EIGHT_PI, 0.3, J=20)
    traj = run_charge_flow(coupling, table, family2, EIGHT_PI, 0.3, J=4)
    with pytest.raises(RangeError):
        traj.log_Z2_scaled(9)


def test_trajectory_frames(family2, make_table, coupling):
    table = make_table(eta=0.3, **M_VALUES)
    traj = run_charge_flow(coupling, table, family2, EIGHT_PI, 0.3, J=8)
    assert list(traj.to_frame().columns) == ["j", "lnZ", "lnZbar", "lnZplus", "lnZminus", "q"]
    dominant = traj.normalized_dominant(family2)
    assert len(dominant) == 8
    assert np.all(np.isfinite(dominant["drift"]))
    growth = traj.growth_ratios()
    assert np.all(growth["ratio_Z"] < 1.0)


def test_jump_matrix_matches_path_sum(family2, make_table, coupling):
    table = make_table(eta=0.3, **M_VALUES)
    dec = decompose(coupling, table, family2, EIGHT_PI, 0.3, 10)
    assert np.allclose(q_matrix(8, 3, dec), enumerate_paths(8, 3, dec), rtol=1e-12, atol=0.0)
    assert np.array_equal(q_matrix(2, 5, dec), np.eye(2))
    assert list(decomposition_frame(dec).columns) == ["n", "prefactor_log", "m", "ell", "m_minus", "m_plus"]
    assert 1 <= adaptive_j0(dec, 2, 0.3) <= 10


def test_jump_matrix_reproduces_flow(family2, make_table, coupling):
    table = make_table(eta=0.3, **M_VALUES)
    dec = decompose(coupling, table, family2, EIGHT_PI, 0.3, 10)
    linear = linear_charge_flow(coupling, table, family2, EIGHT_PI, 0.3, 11)
    start = np.array(linear[1])
    end = math.exp(prefactor_log(dec, 10)) * q_matrix(10, 1, dec) @ start
    assert end[0] == pytest.approx(linear[11][0], rel=1e-12)
    assert end[1] == pytest.approx(linear[11][1], rel=1e-12)


def test_jump_matrix_without_mixing_is_diagonal(family2, make_table, coupling):
    table = make_table(eta=0.3, m11=0.4, m22=1.2)
    dec = decompose(coupling, table, family2, EIGHT_PI, 0.3, 6)
    Q = q_matrix(6, 1, dec)
    assert Q[0, 1] == 0.0 and Q[1, 0] == 0.0
    assert Q[0, 0] == 1.0


def test_jump_matrix_checks(family2, make_table, coupling):
    table = make_table(eta=0.3, **M_VALUES)
    dec = decompose(coupling, table, family2, EIGHT_PI, 0.3, 4)
    with pytest.raises(DomainError):
        q_matrix(3, 0, dec)
    with pytest.raises(ResourceError):
        enumerate_paths(20, 1, dec)
    with pytest.raises(DomainError):
        oriented_row(table.at(1), 0.5)
    h, row, mirrored = oriented_row(table.at(1), 0.7)
    assert mirrored and h == pytest.approx(0.3)
    assert row["m11"] == M_VALUES["m22"] and row["m12"] == M_VALUES["m21"]


def test_c_eta_argument_checks(family2):
    with pytest.raises(DomainError):
        c_eta(family2, EIGHT_PI, 0.5)
    with pytest.raises(DomainError):
        c_eta(family2, EIGHT_PI, 1.0)


def test_second_order_constant(family2):
    # L = 2、α² = 8π、η = ¼ 时指数因子为 2
    assert c2_second_order(1e-3, family2, EIGHT_PI, 0.25, 3.0, 1.0) == pytest.approx(4e-3, rel=1e-14)


@pytest.mark.slow
def test_c_eta_series_is_positive_and_geometric(family2, settings):
    result = c_eta_series(family2, EIGHT_PI, 0.25, tol=1e-6, settings=settings)
    assert result.value > 0.0
    assert all(t > 0.0 for t in result.terms)
    assert abs(result.ratios[-1] - 0.5) < 0.02
    mirrored = c_eta_series(family2, EIGHT_PI, 0.75, tol=1e-6, settings=settings)
    assert mirrored.value == pytest.approx(result.value, rel=1e-14)


def test_charge_step_checks_scale(family2, make_table):
    table = make_table(eta=0.3, **M_VALUES)
    with pytest.raises(DomainError):
        charge_step(RenormState.initial(), CouplingState(1, 0.0, 0.0), table, family2, EIGHT_PI, 0.3)
    step = charge_step(RenormState.initial(), CouplingState(0, 0.0, 0.0), table, family2, EIGHT_PI, 0.3)
    assert step.j == 1
    assert step.Z == pytest.approx(2.0 ** 1.82, rel=1e-14)
