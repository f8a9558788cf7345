"""Gauge solving: reference equality, defining properties, linearity."""

import dataclasses
from fractions import Fraction

import pytest

from qchab.curve import BivariatePoly, infinite_slopes
from qchab.hodge import S_SCALE, compute_hodge_gauge
from qchab.linser import formal_antiderivative
from qchab.problemfile import polynomial_rows
from qchab.xs13 import load_expected, load_fixture


@pytest.fixture(scope="module")
def fixtures():
    return {1: load_fixture(1), 2: load_fixture(2)}


@pytest.fixture(scope="module")
def gauges(fixtures):
    return {(chart, cname): compute_hodge_gauge(fixtures[chart], cname)
            for chart in (1, 2) for cname in ("Z1", "Z2")}


@pytest.fixture(scope="module")
def expected():
    return load_expected()


@pytest.mark.parametrize("cname", ["Z1", "Z2"])
def test_chart1_gauge_matches_reference(cname, fixtures, gauges, expected):
    gauge = gauges[(1, cname)]
    want = expected.hodge[(1, cname)]
    assert gauge.eta_exponents(fixtures[1]) == want.eta
    assert gauge.beta[3:] == want.beta
    assert gauge.beta[:3] == (0, 0, 0)
    assert gauge.gamma == want.gamma


@pytest.mark.parametrize("chart", [1, 2])
@pytest.mark.parametrize("cname", ["Z1", "Z2"])
def test_eta_kills_every_residue_at_infinity(chart, cname, fixtures, gauges):
    fix = fixtures[chart]
    gauge = gauges[(chart, cname)]
    Z = fix.z_classes[cname]
    for w0 in infinite_slopes(fix.curve):
        site = fix.curve.site_at_infinity(w0, 32)
        om = [site.form_series(n) for n in fix.omega]
        Om = [formal_antiderivative(f) for f in om]
        total = None
        for i in range(6):
            for j in range(6):
                if Z[(i, j)]:
                    term = om[i] * Om[j] * Z[(i, j)]
                    total = term if total is None else total + term
        for e, numer in zip(gauge.eta, fix.third):
            if e:
                total = total + site.form_series(numer) * e
        res = total.coefficient(-1)
        assert res == 0 or res.is_zero(), w0


@pytest.mark.parametrize("chart", [1, 2])
@pytest.mark.parametrize("cname", ["Z1", "Z2"])
def test_gauge_absorbs_all_pole_parts(chart, cname, fixtures, gauges):
    # S_SCALE * g - beta^T Omega - gamma must extend across infinity
    fix = fixtures[chart]
    gauge = gauges[(chart, cname)]
    Z = fix.z_classes[cname]
    gamma_poly = BivariatePoly(polynomial_rows(gauge.gamma))
    for w0 in infinite_slopes(fix.curve):
        site = fix.curve.site_at_infinity(w0, 32)
        om = [site.form_series(n) for n in fix.omega]
        Om = [formal_antiderivative(f) for f in om]
        total = None
        for i in range(6):
            for j in range(6):
                if Z[(i, j)]:
                    term = om[i] * Om[j] * Z[(i, j)]
                    total = term if total is None else total + term
        for e, numer in zip(gauge.eta, fix.third):
            if e:
                total = total + site.form_series(numer) * e
        diff = formal_antiderivative(total) * S_SCALE
        for k in range(3, 6):
            if gauge.beta[k]:
                diff = diff - Om[k] * gauge.beta[k]
        diff = diff - site.function_series(gamma_poly)
        for n in range(diff.order, 0):
            c = diff.coefficient(n)
            assert c == 0 or c.is_zero(), (w0, n)


@pytest.mark.parametrize("chart", [1, 2])
@pytest.mark.parametrize("cname", ["Z1", "Z2"])
def test_gamma_vanishes_at_the_base_point(chart, cname, fixtures, gauges):
    fix = fixtures[chart]
    gauge = gauges[(chart, cname)]
    assert gauge.gamma_value(*fix.base_point) == 0


def test_gauge_is_linear_in_the_class(fixtures, gauges):
    fix = fixtures[1]
    z1 = fix.z_classes["Z1"]
    z2 = fix.z_classes["Z2"]
    doubled = dataclasses.replace(
        fix, z_classes={"W": z1.map(lambda c: 2 * c)})
    summed = dataclasses.replace(fix, z_classes={"W": z1 + z2})

    gauge_d = compute_hodge_gauge(doubled, "W")
    base = gauges[(1, "Z1")]
    assert gauge_d.eta == tuple(2 * e for e in base.eta)
    assert gauge_d.beta == tuple(2 * b for b in base.beta)
    assert gauge_d.gamma == {k: 2 * v for k, v in base.gamma.items()}

    gauge_s = compute_hodge_gauge(summed, "W")
    other = gauges[(1, "Z2")]
    assert gauge_s.eta == tuple(a + b for a, b in zip(base.eta, other.eta))
    assert gauge_s.beta == tuple(a + b for a, b in zip(base.beta, other.beta))
    keys = set(base.gamma) | set(other.gamma)
    want = {k: base.gamma.get(k, Fraction(0)) + other.gamma.get(k, Fraction(0))
            for k in keys}
    assert gauge_s.gamma == {k: v for k, v in want.items() if v}


def test_chart2_beta_has_zero_holomorphic_block(gauges):
    for cname in ("Z1", "Z2"):
        assert gauges[(2, cname)].beta[:3] == (0, 0, 0)
