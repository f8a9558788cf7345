"""Plane-model structure: branches, residues, the cup pairing, disks."""

from fractions import Fraction

import pytest

from qchab.arith import NumberField
from qchab.curve import (BivariatePoly, ChartError, PlaneCurve,
                         enumerate_residue_disks, second_kind_cup_gram)
from qchab.xs13 import load_fixture

TERMS = 24


@pytest.fixture(scope="module")
def fix1():
    return load_fixture(1)


@pytest.fixture(scope="module")
def fix2():
    return load_fixture(2)


@pytest.fixture(scope="module")
def root5_field():
    return NumberField([Fraction(-5), Fraction(0)])   # generates sqrt(5)


def slopes_at_infinity(field):
    r5 = field.gen()
    return [Fraction(1), Fraction(-1), r5, -r5]


def test_fixture_models_validate(fix1, fix2):
    assert fix1.curve.validate()
    assert fix2.curve.validate()


def test_rejects_non_monic_model():
    curve = PlaneCurve([[0, 1], [0, 0], [2]])   # 2y^2 + ...
    with pytest.raises(ChartError, match="monic"):
        curve.validate()


def test_rejects_total_degree_overflow():
    # x^3 forces a cusp into the standard chart at infinity
    curve = PlaneCurve([[0, 0, 0, 1], [0], [1]])
    with pytest.raises(ChartError, match="total degree"):
        curve.validate()


def test_rejects_ramified_infinity():
    # y^2 - 2xy + x^2 + x: leading form (w - 1)^2
    curve = PlaneCurve([[0, 1, 1], [0, -2], [1]])
    with pytest.raises(ChartError, match="repeated"):
        curve.validate()


def test_rejects_singular_affine_model():
    # y^2 - x^2 crosses itself at the origin
    curve = PlaneCurve([[0, 0, -1], [0], [1]])
    with pytest.raises(ChartError, match="singular"):
        curve.validate()


# -- branch expansions through the listed rational points


def _sites_through_points(fix):
    """Exact local branches at every listed point, in this chart."""
    sites = []
    for pt in fix.points.values():
        if pt.kind == "infinity":
            sites.append(fix.curve.site_at_infinity(pt.w, TERMS))
            continue
        qy = fix.curve.Qy.evaluate(pt.x, pt.y)
        if qy != 0:
            sites.append(fix.curve.site_at_affine(pt.x, pt.y, TERMS))
        else:
            sites.append(fix.curve.site_at_vertical(pt.x, pt.y, TERMS))
    return sites


@pytest.mark.parametrize("chart", [1, 2])
def test_branches_satisfy_curve_equation(chart, fix1, fix2):
    fix = fix1 if chart == 1 else fix2
    for site in _sites_through_points(fix):
        assert fix.curve.Q.evaluate(site.x_series, site.y_series).is_zero(), \
            site.label


@pytest.mark.parametrize("chart", [1, 2])
def test_branches_satisfy_chain_rule(chart, fix1, fix2):
    # Qx * dx/dt + Qy * dy/dt = 0 along every branch
    fix = fix1 if chart == 1 else fix2
    for site in _sites_through_points(fix):
        qx = fix.curve.Qx.evaluate(site.x_series, site.y_series)
        qy = fix.curve.Qy.evaluate(site.x_series, site.y_series)
        total = qx * site.dx_dt + qy * site.y_series.derivative()
        assert total.is_zero(), site.label


def test_vertical_branch_swaps_parameter(fix1):
    # the chart-1 point (1, 1) has Q_y = 0, so y must be the parameter
    site = fix1.curve.site_at_vertical(Fraction(1), Fraction(1), TERMS)
    assert site.y_series.coefficient(0) == 1
    assert site.y_series.coefficient(1) == 1
    assert site.x_series.coefficient(0) == 1
    with pytest.raises(ChartError):
        fix1.curve.site_at_affine(Fraction(1), Fraction(1), TERMS)


# -- residues at infinity
#
# expected values computed by tests/oracles/oracle_curve.py (independent
# Laurent arithmetic over Fraction pairs a + b*sqrt5)


def test_second_kind_forms_have_no_residues(fix1, root5_field):
    for w0 in slopes_at_infinity(root5_field):
        site = fix1.curve.site_at_infinity(w0, TERMS)
        for k, num in enumerate(fix1.omega):
            assert site.form_residue(num) == 0, (w0, k)


def test_third_kind_residue_matrix(fix1, root5_field):
    r5 = root5_field.gen()
    expected = [
        (Fraction(1), [Fraction(1, 8), Fraction(1, 8), Fraction(1, 8)]),
        (Fraction(-1), [Fraction(-1, 8), Fraction(1, 8), Fraction(-1, 8)]),
        (r5, [-r5 / 40, Fraction(-1, 8), -r5 / 8]),
        (-r5, [r5 / 40, Fraction(-1, 8), r5 / 8]),
    ]
    for w0, row in expected:
        site = fix1.curve.site_at_infinity(w0, TERMS)
        got = [site.form_residue(num) for num in fix1.third]
        assert got == row, w0


def test_residue_theorem_on_third_kind_forms(fix1, root5_field):
    for num in fix1.third:
        total = root5_field.zero()
        for w0 in slopes_at_infinity(root5_field):
            site = fix1.curve.site_at_infinity(w0, TERMS)
            total = total + site.form_residue(num)
        assert total.is_zero()


def test_cup_gram_is_symplectic(fix1, root5_field):
    gram = second_kind_cup_gram(fix1.curve, fix1.omega,
                                slopes_at_infinity(root5_field), TERMS)
    for i in range(6):
        for j in range(6):
            want = -1 if j == i + 3 else (1 if i == j + 3 else 0)
            assert gram[i][j] == want, (i, j)


def test_cup_gram_rejects_missing_conjugates(fix1, root5_field):
    with pytest.raises(ChartError, match="slopes"):
        second_kind_cup_gram(fix1.curve, fix1.omega,
                             [Fraction(1), Fraction(-1)], TERMS)
    bad = slopes_at_infinity(root5_field)[:3] + [Fraction(2)]
    with pytest.raises(ChartError, match="not a slope"):
        second_kind_cup_gram(fix1.curve, fix1.omega, bad, TERMS)


# -- residue disks


def test_disk_census_chart1(fix1):
    disks = enumerate_residue_disks(fix1.curve, 17)
    by_kind = {}
    for d in disks:
        by_kind.setdefault(d.kind, []).append(d)
    assert len(disks) == 20
    assert len(by_kind["good"]) == 17
    assert [(d.x0, d.y0) for d in by_kind["vertical"]] == [(1, 1)]
    assert sorted(d.w0 for d in by_kind["infinite"]) == [1, 16]


def test_disk_census_chart2(fix2):
    disks = enumerate_residue_disks(fix2.curve, 17)
    by_kind = {}
    for d in disks:
        by_kind.setdefault(d.kind, []).append(d)
    assert len(disks) == 20
    assert len(by_kind["good"]) == 15
    assert [(d.x0, d.y0) for d in by_kind["vertical"]] == [(1, 1)]
    assert sorted(d.w0 for d in by_kind["infinite"]) == [0, 2, 9, 16]


def test_listed_points_land_in_census_disks(fix1):
    disks = enumerate_residue_disks(fix1.curve, 17)
    good = {(d.x0, d.y0) for d in disks if d.kind == "good"}
    vertical = {(d.x0, d.y0) for d in disks if d.kind == "vertical"}
    infinite = {d.w0 for d in disks if d.kind == "infinite"}
    for pt in fix1.points.values():
        key = pt.disk(17)
        if pt.kind == "infinity":
            assert key[1] in infinite, pt.name
        elif pt.name == "P0":
            assert key in vertical
        else:
            assert key in good, pt.name


def test_census_rejects_singular_reduction():
    # y^2 - x^3 ... use y^2 + x^2 - 34: nonsingular over Q, but mod 17 it
    # degenerates to y^2 + x^2 with a double point at the origin
    curve = PlaneCurve([[-34, 0, 1], [0], [1]])
    assert curve.validate()
    with pytest.raises(ChartError, match="singular"):
        enumerate_residue_disks(curve, 17)
