"""Packaged fixture data: load-time audits and cross-file consistency."""

from fractions import Fraction

import pytest

import qchab.xs13 as xs13
from qchab.curve import enumerate_residue_disks
from qchab.xs13 import (FixtureError, coordinate_digits, load_expected,
                        load_fixture)


@pytest.fixture(scope="module")
def expected():
    return load_expected()


def test_digest_mismatch_is_fatal(monkeypatch):
    monkeypatch.setitem(xs13._DIGESTS, "xs13_chart1.txt", "0" * 64)
    with pytest.raises(FixtureError, match="digest"):
        load_fixture(1)


def test_unknown_chart_rejected():
    with pytest.raises(FixtureError, match="chart"):
        load_fixture(3)


def test_base_points_are_listed_points():
    assert load_fixture(1).base_name == "P2"
    assert load_fixture(2).base_name == "P6"


def test_class_matrices_agree_across_charts():
    z1 = load_fixture(1).z_classes
    z2 = load_fixture(2).z_classes
    for name in ("Z1", "Z2"):
        assert z1[name] == z2[name]


def test_anchor_coordinates_expand_as_tabulated():
    # the bold zeroes of the tables are the exact coordinates; spot-check
    # the two fractional ones by hand: 1/2 and -3/2 at p = 17
    assert coordinate_digits(Fraction(1, 2), 17, 5) == (9, 8, 8, 8, 8)
    assert coordinate_digits(Fraction(-3, 2), 17, 5) == (7, 8, 8, 8, 8)
    assert coordinate_digits(Fraction(0), 17, 5) == (0, 0, 0, 0, 0)


def test_non_integral_coordinate_rejected():
    with pytest.raises(FixtureError, match="integral"):
        coordinate_digits(Fraction(1, 17), 17, 5)


def test_root_table_shapes(expected):
    assert {k: len(v) for k, v in expected.roots.items()} == {
        (1, 1): 18, (1, 2): 12, (2, 1): 4, (2, 2): 4}


def test_rational_zero_labels(expected):
    labels = {key: {e.label for e in entries if e.label}
              for key, entries in expected.roots.items()}
    assert labels[(1, 1)] == {"P1", "P2", "P3", "P5"}
    assert labels[(1, 2)] == {"P1", "P2", "P3", "P5"}
    assert labels[(2, 1)] == {"P4", "P6"}
    assert labels[(2, 2)] == {"P4", "P6"}


def test_five_good_disks_carry_no_zeroes(expected):
    fix = load_fixture(1)
    good = {(d.x0, d.y0)
            for d in enumerate_residue_disks(fix.curve, fix.prime)
            if d.kind == "good"}
    seen = {e.disk for k in ((1, 1), (1, 2)) for e in expected.roots[k]}
    assert seen <= good
    assert good - seen == {(0, 9), (0, 16), (4, 9), (10, 3), (10, 4)}


def test_hodge_expectations_cover_both_classes(expected):
    assert set(expected.hodge) == {(1, "Z1"), (1, "Z2")}
    for key, h in expected.hodge.items():
        assert len(h.beta) == 3
        assert set(h.eta) <= {(2, 0), (1, 1), (0, 2)}, key


def test_hecke_data(expected):
    assert expected.hecke_prime == 3
    a3 = expected.a3
    # a3 generates the cubic field: its powers 1, a3, a3^2 are independent
    rows = [(expected.hecke_field.one()).coeffs, a3.coeffs,
            (a3 * a3).coeffs]
    det = (rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
           - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
           + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0]))
    assert det != 0


def test_anchor_tensor_table_keys(expected):
    assert set(expected.anchor_tensors) == {"P1", "P3", "P4"}
    assert not expected.anchor_tensors["P4"].is_zero()


def test_leftover_disk_description(expected):
    assert expected.leftover_chart == 1
    assert expected.leftover_center == (1, 1)
    assert expected.leftover_rebase == "P0"
    assert expected.leftover_roots == ("P0",)
