"""
流方程系数、核函数与连续极限
"""

import math

import numpy as np
import pytest

from src.config.settings import Settings
from src.covariance.family import MAX_BOX_RADIUS
from src.covariance.lattice_sum import LatticeSummer
from src.rg_coefficients.coefficients import (
    CoefficientBuilder,
    build_coefficient_table,
    compute_a,
    compute_b,
    compute_energy_coeffs,
    compute_m,
)
from src.rg_coefficients.continuum import closed_form_limits, compute_asymptotic_continuum
from src.rg_coefficients.kernels import compute_w0, compute_w1, compute_w2, kernel_moment
from src.utils.errors import DomainError

EIGHT_PI = 8.0 * math.pi


@pytest.fixture(scope="module")
def half_table(family3, settings):
    return build_coefficient_table(family3, EIGHT_PI, 0.5, j_max=2, settings=settings)


def test_scale_zero_row(half_table):
    row = half_table.at(0)
    assert row["a"] == 0.0
    assert row["b"] == 0.0
    assert row["E3"] == 0.0
    assert row["E4"] == 0.0
    assert row["E2"] > 0.0


def test_couplings_are_positive(half_table):
    for j in (1, 2):
        assert math.isfinite(half_table.a[j]) and half_table.a[j] != 0.0
        assert half_table.b[j] > 0.0


def test_diagonal_m_is_charge_squared_times_b(half_table):
    # α² = 8π 时交叉项权重为 1，m₁₁ 与 b 只差因子 η²
    for j in (1, 2):
        assert half_table.m11[j] == pytest.approx(0.25 * half_table.b[j], rel=1e-12)


def test_half_charge_symmetry(half_table):
    for j in half_table.j:
        assert half_table.m11[j] == half_table.m22[j]
        assert half_table.m12[j] == half_table.m21[j]


def test_b_approaches_its_limit(half_table):
    assert abs(half_table.b[2] / (2.0 * math.log(3.0)) - 1.0) < 0.1


def test_laplacian_coefficient_limit(half_table, family3):
    limit = 2.0 * family3.profile.c2
    assert abs(half_table.E2[2] / limit - 1.0) < 2e-3


def test_table_access(half_table):
    assert half_table.j_last == 2
    assert half_table.at(10) == half_table.at(2)
    assert half_table.at(-1) == half_table.at(0)
    assert half_table.value("b", 1) == half_table.b[1]
    assert half_table.eta_bar == -0.5
    frame = half_table.to_frame()
    assert list(frame.columns) == ["j", *half_table.COLUMNS]
    assert len(frame) == 3
    assert half_table.metadata()["cutoff_label"] == "gaussian"


def test_builder_matches_module_functions(half_table, family3, settings):
    summer = LatticeSummer(family3, settings)
    assert compute_a(family3, EIGHT_PI, 1, summer) == pytest.approx(half_table.a[1], rel=1e-13)
    assert compute_b(family3, EIGHT_PI, 1, summer) == pytest.approx(half_table.b[1], rel=1e-13)
    m11, m22, m12, m21 = compute_m(family3, EIGHT_PI, 0.5, 1, summer)
    assert m11 == pytest.approx(half_table.m11[1], rel=1e-13)
    assert m21 == pytest.approx(half_table.m21[1], rel=1e-13)
    e2, e3, e4 = compute_energy_coeffs(family3, EIGHT_PI, 1, summer)
    assert e2 == pytest.approx(half_table.E2[1], rel=1e-13)
    assert e3 == pytest.approx(half_table.E3[1], rel=1e-13)
    assert e4 == pytest.approx(half_table.E4[1], rel=1e-13)
    assert compute_a(family3, EIGHT_PI, 0) == 0.0


def test_charge_asymmetry_away_from_half(family3, settings):
    builder = CoefficientBuilder(family3, settings)
    row = builder.row(1, EIGHT_PI, 0.3)
    assert row["m22"] > row["m11"] > 0.0
    with pytest.raises(DomainError):
        builder.row(1, EIGHT_PI, 1.0)
    with pytest.raises(DomainError):
        compute_m(family3, EIGHT_PI, 0.3, 1, form="other")


def test_coefficient_table_is_frozen(half_table):
    with pytest.raises(Exception):
        half_table.a = [0.0]


@pytest.mark.parametrize("L", [2, 3])
def test_continuum_limits_at_eight_pi(L):
    from src.covariance.family import build_family

    family = build_family(L, 2)
    a, b, m21 = compute_asymptotic_continuum(L, EIGHT_PI, 0.5, family=family)
    a_cf, b_cf, m21_cf = closed_form_limits(family)
    assert a == pytest.approx(a_cf, rel=1e-6)
    assert b == pytest.approx(b_cf, rel=1e-7)
    assert m21 == pytest.approx(m21_cf, rel=1e-6)
    _, _, other = compute_asymptotic_continuum(L, EIGHT_PI, 0.3, family=family)
    assert other is None


def test_w0_vanishes_on_first_scales(family3):
    for j in (0, 1):
        kernels = compute_w0(family3, EIGHT_PI, j)
        for label in kernels.labels():
            assert np.all(kernels[label] == 0.0)


def test_w0_is_even(family3):
    kernels = compute_w0(family3, EIGHT_PI, 2, radius=20)
    for label in ("b", "c", "e"):
        values = kernels[label]
        assert np.any(values != 0.0)
        assert np.max(np.abs(values - values[::-1, ::-1])) < 1e-13
    assert set(kernels.labels()) >= {"a:e0e0", "a:e1e1", "d:e0", "d:e1", "b", "c", "e"}


def test_w1_shapes(family3):
    kernels = compute_w1(family3, EIGHT_PI, 0.3, 1, radius=10)
    assert kernels["b"].shape == (21, 21)
    assert np.iscomplexobj(kernels["d:e0"])
    assert np.all(np.real(kernels["d:e0"]) == 0.0)
    assert np.any(kernels["c"] != 0.0)


def test_w2_argument_checks(family3):
    Z = [1.0, 2.0]
    kernels = compute_w2(family3, EIGHT_PI, 0.3, -1, 2, Z, Z, radius=10)
    assert set(kernels.labels()) == {"a", "a_bar", "b"}
    with pytest.raises(DomainError):
        compute_w2(family3, EIGHT_PI, 0.3, 0, 2, Z, Z, radius=10)
    with pytest.raises(DomainError):
        compute_w2(family3, EIGHT_PI, 0.3, 1, 2, [1.0], Z, radius=10)


def test_kernel_moment(family3):
    assert kernel_moment(family3, EIGHT_PI, 1) == 0.0
    with pytest.raises(DomainError):
        kernel_moment(family3, EIGHT_PI, 2, label="a")
    boxed = compute_w0(family3, EIGHT_PI, 2)
    assert kernel_moment(family3, EIGHT_PI, 2, "b") == pytest.approx(boxed.moment("b"), rel=1e-8)


def test_kernel_scale_out_of_range(family3):
    with pytest.raises(DomainError):
        compute_w0(family3, EIGHT_PI, family3.j_max + 1)


# 独立的直接求和：在加宽的方盒上取 Γ_m，差分用数组平移，û 的四个方向逐一求和
UNIT = ((1, 0), (-1, 0), (0, 1), (0, -1))
PAD = 2


def _grids(family, j):
    reach = family.reach(j)
    boxes = {m: family.kernel_box(m, radius=reach + PAD) for m in range(j + 1)}
    axis = np.arange(-reach, reach + 1, dtype=float)
    y0, y1 = np.meshgrid(axis, axis, indexing="ij")
    return reach, boxes, y0 * y0 + y1 * y1


def _at(box, d):
    n = box.shape[0]
    return box[PAD + d[0] : n - PAD + d[0], PAD + d[1] : n - PAD + d[1]]


def _second(box, mu, nu):
    """(∂^{−μ}∂^ν f)(y)，∂^{+e}f(y) = f(y+e) − f(y)，∂^{−e}f(y) = f(y) − f(y−e)"""
    back = (-mu[0], -mu[1])
    both = (nu[0] - mu[0], nu[1] - mu[1])
    return -sum(mu) * sum(nu) * (_at(box, both) - _at(box, back) - _at(box, nu) + _at(box, (0, 0)))


def _weight(inner, g0, alpha2, L, k, n):
    """½ e^{−α²Γ_{k,n+1}(0|y)} e^{−α²Γ_n(0)}(e^{α²Γ_n(y)} − 1) L^{−4n}"""
    tail = sum((inner[m] - g0[m] for m in range(n + 1, k + 1)), np.zeros_like(inner[n]))
    return 0.5 * np.exp(alpha2 * tail) * math.exp(-alpha2 * g0[n]) * np.expm1(alpha2 * inner[n]) * float(L) ** (-4 * n)


def direct_a(family, alpha2, j):
    """伸缩形式 α² Σ_y |y|² [Σ_{n≤j} R^{(j)}_n − Σ_{n<j} R^{(j−1)}_n]"""
    _, boxes, r2 = _grids(family, j)
    inner = {m: _at(box, (0, 0)) for m, box in boxes.items()}
    g0 = {m: float(box[box.shape[0] // 2, box.shape[1] // 2]) for m, box in boxes.items()}
    upper = sum(_weight(inner, g0, alpha2, family.L, j, n) for n in range(j + 1))
    lower = sum(_weight(inner, g0, alpha2, family.L, j - 1, n) for n in range(j))
    return alpha2 * math.fsum((r2 * (upper - lower)).ravel())


def direct_e3(family, j):
    _, boxes, _ = _grids(family, j)
    total = 0.0
    for mu in UNIT:
        for nu in UNIT:
            top = _second(boxes[j], mu, nu)
            lower = sum((_second(boxes[m], mu, nu) for m in range(1, j)), np.zeros_like(top))
            total += math.fsum(((top + 2.0 * lower) * top).ravel())
    return float(family.L) ** (2 * j) / 4.0 * total / 4.0


def direct_e4(family, alpha2, j):
    reach, boxes, r2 = _grids(family, j)
    inner = {m: _at(box, (0, 0)) for m, box in boxes.items()}
    g0 = {m: float(box[box.shape[0] // 2, box.shape[1] // 2]) for m, box in boxes.items()}
    w0b = sum((_weight(inner, g0, alpha2, family.L, j - 1, n) for n in range(1, j)), np.zeros_like(r2))
    laplacian = 0.5 * sum(float(_second(boxes[j], mu, mu)[reach, reach]) for mu in UNIT)
    bracket = np.expm1(alpha2 * (inner[j] - g0[j])) - 0.25 * alpha2 * r2 * laplacian
    local = math.exp(-alpha2 * g0[j]) * np.expm1(alpha2 * inner[j])
    L = float(family.L)
    return 2.0 * L ** (2 * j) * math.fsum((w0b * bracket).ravel()) + L ** (-2 * j) * math.fsum(local.ravel()), laplacian


@pytest.fixture(scope="module")
def box_summer(family2):
    return LatticeSummer(family2, Settings(direct_radius=MAX_BOX_RADIUS))


@pytest.mark.parametrize("j", [2, 3])
def test_a_matches_telescoped_direct_sum(family2, box_summer, j):
    assert compute_a(family2, EIGHT_PI, j, box_summer) == pytest.approx(direct_a(family2, EIGHT_PI, j), rel=1e-9)


@pytest.mark.parametrize("j", [2, 3])
def test_energy_coefficients_match_direct_sums(family2, box_summer, j):
    _, e3, e4 = compute_energy_coeffs(family2, EIGHT_PI, j, box_summer)
    expected_e4, laplacian = direct_e4(family2, EIGHT_PI, j)
    assert laplacian == pytest.approx(family2.laplacian_at_zero(j), rel=1e-9)
    assert e3 == pytest.approx(direct_e3(family2, j), rel=1e-9, abs=1e-14)
    assert e4 == pytest.approx(expected_e4, rel=1e-9, abs=1e-14)


def test_e4_bracket_cancels_the_quadratic_term(family3):
    # 去掉 |y|² 项后，小 |y| 处括号与 |y|⁴ 同阶
    j = 3
    laplacian = family3.laplacian_at_zero(j)
    for r in (1.0, 2.0):
        diff = float(family3.kernel_diff(j, (r, 0.0))[0])
        bracket = math.expm1(EIGHT_PI * diff) - 0.25 * EIGHT_PI * r * r * laplacian
        assert abs(bracket) < 0.05 * abs(0.25 * EIGHT_PI * r * r * laplacian)


def test_a_approaches_the_closed_form_limit(family3, settings):
    # 每多一个尺度，指数里多一项非正的 Γ_m(y|0)，a_j 从上方逼近极限
    a_closed, _, _ = closed_form_limits(family3)
    summer = LatticeSummer(family3, settings)
    a2 = compute_a(family3, EIGHT_PI, 2, summer)
    a3 = compute_a(family3, EIGHT_PI, 3, summer)
    assert a3 < a2
    assert abs(a3 / a_closed - 1.0) < 0.02
