"""
关联级数、闭式渐近与指数拟合
"""

import math

import numpy as np
import pytest

from src.charge_flow.renorm import run_charge_flow
from src.correlation.asymptotic import (
    AsymptoticConstants,
    asymptotic_formula,
    branch_terms,
    crossover_radius,
    f_constant,
)
from src.correlation.fitting import fit_exponents, fit_points
from src.correlation.series import (
    CorrelationProfile,
    geometric_radii,
    n_zero,
    rho_eta,
    scale_sum_consistency,
    series_profile,
    telescoped_w2a,
    w2a_series,
)
from src.rg_flow.coupling import run_flow
from src.utils.errors import DomainError, FitError, RangeError
from tests.conftest import constant_table

EIGHT_PI = 8.0 * math.pi
CONSTANTS = AsymptoticConstants(c=-0.2, c_tilde_E=-0.2, gamma0=math.log(2.0) / (2.0 * math.pi), L=2, c_eta=1.0)


@pytest.fixture(scope="module")
def free_half(family2):
    """s = z = 0 的 η = ½ 电荷轨迹"""
    table = constant_table(eta=0.5)
    coupling = run_flow(0.0, 0.0, table, family2, EIGHT_PI, 60)
    return run_charge_flow(coupling, table, family2, EIGHT_PI, 0.5)


def test_n_zero_and_radii():
    assert n_zero(1.0, 3) == 0
    assert n_zero(9.0, 3) == 2
    assert n_zero(26.0, 3) == 2
    with pytest.raises(DomainError):
        n_zero(0.5, 3)
    assert geometric_radii(4, 0, 4) == [1.0, 2.0, 4.0, 8.0, 16.0]


def test_profile_branches_without_interaction(family2, free_half):
    profile = series_profile([1.0, 4.0, 16.0, 64.0], free_half, family2, EIGHT_PI, 0.5, 0.0)
    assert profile.branches() == ["minus", "plus", "total"]
    plus = dict(profile.branch("plus"))
    minus = dict(profile.branch("minus"))
    total = dict(profile.branch("total"))
    for x in plus:
        assert plus[x] > 0.0
        assert plus[x] == minus[x]
        assert total[x] == pytest.approx(2.0 * plus[x], rel=1e-15)
    assert plus[64.0] < plus[16.0] < plus[4.0]
    assert profile.metadata["source"] == "series"
    assert len(profile.window(2.0, 20.0).points) == 6


def test_profile_is_thread_independent(family2, free_half):
    radii = [2.0, 8.0, 32.0]
    serial = series_profile(radii, free_half, family2, EIGHT_PI, 0.5, 0.0)
    threaded = series_profile(radii, free_half, family2, EIGHT_PI, 0.5, 0.0, threads=3)
    assert serial.points == threaded.points


def test_profile_rejects_unknown_source(family2, free_half):
    with pytest.raises(DomainError):
        series_profile([2.0], free_half, family2, EIGHT_PI, 0.5, 0.0, source="guess")


def test_telescoped_forms_agree(family2, free_half):
    out = telescoped_w2a(20.0, free_half, family2, EIGHT_PI, 0.5)
    assert out["n0"] == 4.0
    assert out["direct"] == pytest.approx(out["two_series"], rel=1e-10)
    assert abs(out["difference"]) <= 1e-10 * abs(out["two_series"])


def test_scale_sum_consistency(family3):
    for x in (1.0, 7.0, 50.0):
        assert scale_sum_consistency(family3, 6, x) < 1e-12


def test_f_constant():
    expected = 4.0 * math.pi * math.exp(-0.8 * math.pi) * 1e-3
    assert f_constant(1e-3, CONSTANTS) == pytest.approx(expected, rel=1e-13)


def test_half_charge_forms():
    terms = branch_terms(100.0, 1e-3, 0.5, CONSTANTS)
    assert set(terms) == {"plus", "minus"}
    assert asymptotic_formula(100.0, 1e-3, 0.5, CONSTANTS, "leading") == terms["plus"]
    assert asymptotic_formula(100.0, 1e-3, 0.5, CONSTANTS, "crossover") == pytest.approx(terms["plus"] + terms["minus"], rel=1e-15)
    at_one = branch_terms(1.0, 1e-3, 0.5, CONSTANTS)
    assert at_one["plus"] == pytest.approx(0.5 * math.exp(-0.4 * math.pi), rel=1e-14)
    assert at_one["minus"] == at_one["plus"]


def test_free_limit_power_law():
    terms = branch_terms(50.0, 0.0, 0.3, CONSTANTS)
    assert terms["abar"] == 0.0
    assert terms["a"] == pytest.approx(math.exp(8.0 * math.pi * 0.09 * -0.2) * 50.0 ** -0.36, rel=1e-13)


def test_branch_term_checks():
    with pytest.raises(DomainError):
        branch_terms(0.5, 1e-3, 0.5, CONSTANTS)
    with pytest.raises(DomainError):
        branch_terms(10.0, 1e-3, 1.0, CONSTANTS)
    with pytest.raises(DomainError):
        branch_terms(10.0, 1e-3, 0.3, CONSTANTS.model_copy(update={"c_eta": None}))
    with pytest.raises(DomainError):
        asymptotic_formula(10.0, 1e-3, 0.5, CONSTANTS, "exact")


def test_crossover_radius():
    with pytest.raises(DomainError):
        crossover_radius(1e-3, 0.5, CONSTANTS)
    assert crossover_radius(0.0, 0.7, CONSTANTS) is None
    assert crossover_radius(1e-3, 0.3, CONSTANTS) is None
    x = crossover_radius(1e-3, 0.7, CONSTANTS)
    assert x is not None and x > 1.0
    terms = branch_terms(x, 1e-3, 0.7, CONSTANTS)
    assert terms["a"] == pytest.approx(terms["abar"], rel=1e-8)


def test_fit_recovers_power_log():
    x = np.geomspace(10.0, 1e4, 20)
    rho = 3.0 * x ** -1.5 * (1.0 + 0.2 * np.log(x)) ** 0.5
    fit = fit_points(list(zip(x, rho)), "power_log", f=0.2)
    assert fit.power == pytest.approx(1.5, rel=1e-9)
    assert fit.logexp == pytest.approx(0.5, rel=1e-8)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-9)
    assert fit.residual < 1e-10
    assert set(fit.report()) == {"power", "logexp", "prefactor", "residual", "model"}


def test_fit_pure_power_on_profile():
    x = np.geomspace(1.0, 1e3, 12)
    profile = CorrelationProfile([(float(v), 2.0 * float(v) ** -0.7, "total") for v in x])
    fit = fit_exponents(profile)
    assert fit.power == pytest.approx(0.7, rel=1e-12)
    assert fit.logexp == 0.0


def test_fit_rejects_bad_input():
    x = np.geomspace(10.0, 1e4, 20)
    good = list(zip(x, x ** -1.0))
    with pytest.raises(FitError):
        fit_points(good[:5])
    with pytest.raises(FitError):
        fit_points(list(zip(np.geomspace(10.0, 100.0, 10), np.ones(10))))
    with pytest.raises(FitError):
        fit_points([(v, -1.0) for v in x])
    with pytest.raises(DomainError):
        fit_points(good, "spline")
    with pytest.raises(DomainError):
        fit_points(good, "power_log")


def test_rho_from_both_components(family2, free_half):
    x = 12.0
    a = w2a_series(x, free_half, family2, EIGHT_PI, 0.5)
    abar = w2a_series(x, free_half, family2, EIGHT_PI, 0.5, barred=True)
    assert a > 0.0
    assert abar == 0.0
    rho = rho_eta(x, free_half, family2, EIGHT_PI, 0.5)
    assert rho == pytest.approx(2.0 * a, rel=1e-15)
    profile = series_profile([x], free_half, family2, EIGHT_PI, 0.5, 0.0)
    assert dict(profile.branch("total"))[x] == pytest.approx(rho, rel=1e-12)


def test_series_needs_long_trajectory(family2):
    table = constant_table(eta=0.5)
    short = run_charge_flow(run_flow(0.0, 0.0, table, family2, EIGHT_PI, 5), table, family2, EIGHT_PI, 0.5)
    with pytest.raises(RangeError):
        w2a_series(12.0, short, family2, EIGHT_PI, 0.5)
