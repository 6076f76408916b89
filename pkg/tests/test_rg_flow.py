"""
耦合流、分界线打靶、自由能与 Kosterlitz 方程
"""

import math

import pytest

from src.rg_flow.coupling import (
    DIPOLE_SIDE,
    ON_SEPARATRIX,
    PLASMA_SIDE,
    CouplingState,
    flow_step,
    frozen_coefficients,
    q_recursion,
    q_sequence,
    run_flow,
    z_prefactor,
)
from src.rg_flow.exponents import exponent_table
from src.rg_flow.free_energy import check_convergence, free_energy, increment_envelope, increments
from src.rg_flow.kosterlitz import (
    invariant_drift,
    kosterlitz_constant,
    kosterlitz_integrate,
    orbits_frame,
    phase_diagram,
    separatrix_closed_form,
    separatrix_slope,
)
from src.rg_flow.separatrix import SeparatrixShooter, beta_bkt, shoot_separatrix
from src.utils.errors import DomainError, NumericError

EIGHT_PI = 8.0 * math.pi


def test_prefactor_is_one_at_eight_pi(family2):
    assert z_prefactor(family2, EIGHT_PI, 5) == pytest.approx(1.0, abs=1e-14)


def test_zero_activity_is_a_fixed_line(family2, make_table):
    table = make_table(a=2.0, b=3.0)
    trajectory = run_flow(0.3, 0.0, table, family2, EIGHT_PI, 10)
    assert len(trajectory) == 11
    assert all(st.s == 0.3 and st.z == 0.0 for st in trajectory.states)


def test_single_step(family2, make_table):
    table = make_table(a=2.0, b=3.0, E2=0.5, E3=0.25, E4=1.0)
    nxt = flow_step(CouplingState(0, 0.1, 0.02), table, family2, EIGHT_PI)
    assert nxt.j == 1
    assert nxt.s == pytest.approx(0.0992, abs=1e-15)
    assert nxt.z == pytest.approx(0.014, abs=1e-15)
    assert nxt.E == pytest.approx(0.0529, abs=1e-15)


def test_flow_is_odd_in_activity(family2, make_table):
    table = make_table(a=1.5, b=0.7)
    up = run_flow(0.01, 0.004, table, family2, EIGHT_PI, 30)
    down = run_flow(0.01, -0.004, table, family2, EIGHT_PI, 30)
    for a, b in zip(up.states, down.states):
        assert a.s == b.s
        assert a.z == -b.z


def test_frozen_coefficients(make_table):
    table = make_table(count=3)
    assert frozen_coefficients(table, 7, j_freeze=1) == table.at(1)
    assert frozen_coefficients(table, 7) == table.at(2)


def test_reference_sequence():
    closed = q_sequence(0.3, 50)
    recursive = q_recursion(0.3, 50)
    assert len(closed) == len(recursive) == 50
    for a, b in zip(closed, recursive):
        assert a == pytest.approx(b, rel=1e-12)
    assert q_sequence(-0.2, 3)[2] == pytest.approx(-0.2 / 1.4, rel=1e-15)


def test_trajectory_helpers(family2, make_table):
    table = make_table(a=4.0, b=1.0)
    trajectory = run_flow(0.02, 0.01, table, family2, EIGHT_PI, 5)
    assert trajectory.q1 == pytest.approx(2.0 * trajectory.states[1].z, rel=1e-15)
    assert trajectory.q(3) == pytest.approx(trajectory.q1 / (1.0 + abs(trajectory.q1) * 2), rel=1e-15)
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["j", "s", "z", "E", "q"]
    assert trajectory.retag(DIPOLE_SIDE).tag == DIPOLE_SIDE


def test_beta_bkt():
    assert beta_bkt(0.0, EIGHT_PI) == EIGHT_PI
    assert beta_bkt(0.5, EIGHT_PI) == pytest.approx(2.0 * EIGHT_PI)
    with pytest.raises(DomainError):
        beta_bkt(1.0, EIGHT_PI)


@pytest.fixture
def shooter(family2, make_table, settings):
    return SeparatrixShooter(make_table(a=1.0, b=1.0), family2, EIGHT_PI, settings)


def test_shooter_requires_positive_limits(family2, make_table, settings):
    with pytest.raises(DomainError):
        SeparatrixShooter(make_table(a=0.0), family2, EIGHT_PI, settings)
    with pytest.raises(DomainError):
        SeparatrixShooter(make_table(b=-1.0), family2, EIGHT_PI, settings)


def test_classification(shooter):
    assert shooter.classify(0.0, 1e-3, 100).tag == PLASMA_SIDE
    assert shooter.classify(3e-3, 1e-3, 100).tag == DIPOLE_SIDE


def test_shoot_finds_separatrix(shooter):
    result = shooter.shoot(1e-3, J_max=200, tol=1e-14)
    assert abs(result.s_of_z / 1e-3 - 1.0) < 0.05
    assert result.bracket_width <= 1e-14
    assert result.trajectory.tag == ON_SEPARATRIX
    assert result.beta_bkt == pytest.approx(EIGHT_PI / (1.0 - result.s_of_z), rel=1e-15)
    assert set(result.to_dict()) == {"z", "s_of_z", "beta_bkt", "iterations", "bracket_width"}


def test_shoot_separatrix_wrapper(shooter, family2, make_table, settings):
    direct = shooter.shoot(1e-3, J_max=120, tol=1e-14)
    wrapped = shoot_separatrix(1e-3, make_table(a=1.0, b=1.0), family2, EIGHT_PI, J_max=120, tol=1e-14, settings=settings)
    assert wrapped.s_of_z == direct.s_of_z
    assert wrapped.iterations == direct.iterations


def test_shoot_at_zero_activity(shooter):
    result = shooter.shoot(0.0, J_max=60)
    assert result.s_of_z == 0.0
    assert result.beta_bkt == EIGHT_PI


def test_shoot_argument_checks(shooter):
    with pytest.raises(DomainError):
        shooter.shoot(-1e-3, J_max=100)
    with pytest.raises(DomainError):
        shooter.shoot(1e-3, J_max=49)


def test_shoot_grid_keeps_order(shooter):
    results = shooter.grid([2e-3, 1e-3], J_max=100, tol=1e-12)
    assert [r.z for r in results] == [2e-3, 1e-3]
    assert results[0].s_of_z > results[1].s_of_z


def test_free_energy_without_energy_coefficients(shooter):
    result = shooter.shoot(1e-3, J_max=100, tol=1e-14)
    beta = result.beta_bkt
    expected = -math.log1p(-result.s_of_z) / (2.0 * beta)
    assert free_energy(result.trajectory, beta, 1e-3) == pytest.approx(expected, rel=1e-14)


def test_free_energy_sums_increments(family2, make_table, settings):
    table = make_table(a=1.0, b=1.0, E2=0.5, E3=0.1, E4=0.2)
    result = SeparatrixShooter(table, family2, EIGHT_PI, settings).shoot(1e-3, J_max=100, tol=1e-14)
    steps = increments(result.trajectory)
    assert len(steps) == len(result.trajectory) - 1
    beta = 10.0
    expected = -math.log1p(-result.s_of_z) / (2.0 * beta) - math.fsum(steps) / beta
    assert free_energy(result.trajectory, beta, 1e-3) == pytest.approx(expected, rel=1e-12)
    envelope = increment_envelope(result.trajectory)
    assert envelope["C"] > 0.0
    assert all(r > 0.0 for r in envelope["ratios"])


def test_free_energy_checks(shooter):
    result = shooter.shoot(1e-3, J_max=100, tol=1e-12)
    with pytest.raises(DomainError):
        free_energy(result.trajectory, 0.0, 1e-3)
    with pytest.raises(DomainError):
        free_energy(result.trajectory, 1.0, 2e-3)
    with pytest.raises(DomainError):
        free_energy(result.trajectory.retag(PLASMA_SIDE), 1.0, 1e-3)


def test_divergent_increments_are_rejected():
    with pytest.raises(NumericError):
        check_convergence([1.0, 1.0, 1.0, 2.0, 3.0])
    check_convergence([1.0, 0.5, 0.25, 0.125])


def test_kosterlitz_invariant_is_conserved():
    states = kosterlitz_integrate(0.05, 0.01, 10.0, 1e-3)
    assert states[-1].ell == pytest.approx(10.0)
    assert invariant_drift(states) < 1e-10
    frame = orbits_frame(states)
    assert list(frame.columns) == ["ell", "s", "z", "invariant"]


def test_kosterlitz_separatrix_closed_form():
    s0 = 0.05
    z0 = s0 / separatrix_slope()
    states = kosterlitz_integrate(s0, z0, 10.0, 1e-3, record_every=100)
    for st in states:
        assert st.s == pytest.approx(separatrix_closed_form(s0, st.ell), rel=1e-8)
    assert separatrix_slope() ** 2 == pytest.approx(kosterlitz_constant(), rel=1e-14)


def test_kosterlitz_argument_checks():
    with pytest.raises(DomainError):
        kosterlitz_integrate(0.1, 0.01, 1.0, 0.0)
    with pytest.raises(DomainError):
        kosterlitz_integrate(0.1, 0.01, -1.0, 1e-3)


def test_phase_diagram_flags_separatrix():
    slope = separatrix_slope()
    orbits = phase_diagram([(0.05, 0.05 / slope), (0.05, 0.001), (0.01, 0.05)], 2.0, 1e-2)
    assert [o["separatrix"] for o in orbits] == [True, False, False]
    assert orbits[1]["invariant"] > 0.0
    assert orbits[2]["invariant"] < 0.0


def test_exponent_table():
    assert exponent_table(EIGHT_PI, 0.5) == pytest.approx(0.5, rel=1e-15)
    assert exponent_table(EIGHT_PI, 1.0) == 4.0
    assert exponent_table(EIGHT_PI, 0.75) == exponent_table(EIGHT_PI, 0.25)
    with pytest.raises(DomainError):
        exponent_table(EIGHT_PI, 0.0)
    with pytest.raises(DomainError):
        exponent_table(EIGHT_PI, 1.5)
