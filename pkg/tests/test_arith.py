from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qchab.arith import (
    NumberField,
    PadicElement,
    PrecisionError,
    RamifiedElement,
    ReconstructionError,
    rational_reconstruction,
    teichmueller_lift,
    valuation,
)

P = 17


# ---------------------------------------------------------------------------
# PadicElement representation and arithmetic


def test_normalisation_strips_p_from_unit():
    x = PadicElement(P, 0, 3 * P * P, 5)
    assert x.v == 2 and x.unit == 3 and x.N == 5


def test_zero_has_valuation_equal_to_precision():
    z = PadicElement.zero(P, 7)
    assert z.is_zero() and z.valuation == 7


def test_add_tracks_min_precision():
    a = PadicElement.from_int(5, P, 6)
    b = PadicElement.from_int(12, P, 4)
    assert (a + b).N == 4
    assert (a + b).lift() == 17  # 5 + 12 carries into the next digit
    assert (a + b).v == 1


def test_division_by_p_costs_absolute_precision():
    a = PadicElement.from_int(34, P, 5)       # 2*17
    b = PadicElement(P, 1, 1, 5)              # p itself
    q = a / b
    assert q.v == 0 and q.unit == 2
    assert q.N == 4


def test_cancellation_loses_digits():
    a = PadicElement.from_int(100, P, 5)
    b = PadicElement.from_int(100 + P ** 3, P, 5)
    d = b - a
    assert d.v == 3 and d.unit == 1 and d.N == 5


def test_rational_embedding_with_negative_valuation():
    x = PadicElement.from_rational(Fraction(3, 17), P, 4)
    assert x.v == -1
    assert (x * P).lift() == PadicElement.from_int(3, P, 5).lift() % P ** 5


def test_digit_rendering():
    x = PadicElement.from_int(155, P, 2)
    assert x.digits() == [2, 9]
    assert x.digits_str() == "2 + 9*17 + O(17^2)"


small_rationals = st.fractions(
    min_value=-50, max_value=50, max_denominator=40).filter(
        lambda q: q.denominator % P != 0)

nonzero_rationals = small_rationals.filter(lambda q: q != 0)


@given(small_rationals, small_rationals, small_rationals)
@settings(max_examples=60)
def test_field_axioms_through_embedding(a, b, c):
    N = 12
    ea, eb, ec = (PadicElement.from_rational(q, P, N) for q in (a, b, c))
    assert (ea + eb) * ec == ea * ec + eb * ec
    assert ea + (eb + ec) == (ea + eb) + ec
    assert ea * (eb * ec) == (ea * eb) * ec
    assert ea + eb == eb + ea
    assert ea * eb == eb * ea
    assert ea - ea == 0


@given(nonzero_rationals, nonzero_rationals)
@settings(max_examples=60)
def test_multiplication_adds_valuations(a, b):
    N = 12
    ea = PadicElement.from_rational(a, P, N)
    eb = PadicElement.from_rational(b, P, N)
    assert (ea * eb).valuation == valuation(a, P) + valuation(b, P)


@given(nonzero_rationals)
@settings(max_examples=40)
def test_inverse_round_trip(a):
    ea = PadicElement.from_rational(a, P, 10)
    assert ea * ea.inverse() == 1


# ---------------------------------------------------------------------------
# Teichmueller lifts


def test_teichmueller_trivial_residues():
    assert teichmueller_lift(0, 5, P).is_zero()
    one = teichmueller_lift(1, 5, P)
    assert one.lift() == 1


def test_teichmueller_of_two_low_precision():
    # oracle: tests/oracles/oracle_arith.py, fixed point of x -> x^17 mod 17^2
    t = teichmueller_lift(2, 2, P)
    assert t.lift() == 155
    assert t.digits() == [2, 9]


def test_teichmueller_of_two_higher_precision():
    # oracle: tests/oracles/oracle_arith.py at N=5
    assert teichmueller_lift(2, 5, P).lift() == 811667


@pytest.mark.parametrize("p", [2, 3, 5, 7, 11, 13, 17])
def test_teichmueller_exhaustive_small_primes(p):
    N = 6
    m = p ** N
    for r in range(p):
        t = teichmueller_lift(r, N, p)
        rep = t.lift()
        assert pow(rep, p, m) == rep
        assert rep % p == r


# ---------------------------------------------------------------------------
# rational reconstruction


def test_reconstruction_round_trips_one_half():
    x = PadicElement.from_rational(Fraction(1, 2), P, 4)
    assert rational_reconstruction(x, 10) == Fraction(1, 2)


def test_reconstruction_of_minus_three_sevenths():
    # oracle: tests/oracles/oracle_arith.py, embed(-3/7, 17, 4) = 71589
    x = PadicElement.from_rational(Fraction(-3, 7), P, 4)
    assert x.lift() == 71589
    assert rational_reconstruction(x, 10) == Fraction(-3, 7)


def test_reconstruction_failure_is_detected():
    # oracle: tests/oracles/oracle_arith.py checked all |a|,b <= 3 against
    # residue 5 mod 17^2: none matches
    x = PadicElement.from_int(5, P, 2)
    with pytest.raises(ReconstructionError):
        rational_reconstruction(x, 3)


def test_reconstruction_requires_enough_precision():
    x = PadicElement.from_int(5, P, 2)
    with pytest.raises(PrecisionError):
        rational_reconstruction(x, 100)    # 17^2 < 2 * 100^2


@given(st.fractions(min_value=-30, max_value=30, max_denominator=30).filter(
    lambda q: q.denominator % P != 0))
@settings(max_examples=60)
def test_reconstruction_inverts_embedding(q):
    # numerators can reach 30 * 30, so the bound must cover 900
    x = PadicElement.from_rational(q, P, 6)
    assert rational_reconstruction(x, 900) == q


# ---------------------------------------------------------------------------
# number field elements


@pytest.fixture
def cubic():
    # x^3 + 2x^2 - x - 1, the Hecke eigenvalue field used downstream
    return NumberField([Fraction(-1), Fraction(-1), Fraction(2)], name="al")


def test_number_field_generator_satisfies_its_polynomial(cubic):
    al = cubic.gen()
    assert al ** 3 + 2 * al ** 2 - al - 1 == cubic.zero()


def test_number_field_inverse(cubic):
    al = cubic.gen()
    x = al ** 2 - 3 * al + Fraction(1, 2)
    assert x * x.inverse() == cubic.one()


def test_number_field_division_by_rational(cubic):
    al = cubic.gen()
    assert (al * 2) / 2 == al


@given(st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9),
       st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9))
@settings(max_examples=40)
def test_number_field_ring_axioms(a0, a1, a2, b0, b1, b2):
    K = NumberField([Fraction(-1), Fraction(-1), Fraction(2)])
    x = K(a0, a1, a2)
    y = K(b0, b1, b2)
    assert x * y == y * x
    assert (x + y) * y == x * y + y * y
    if not y.is_zero():
        assert (x * y) / y == x


def test_quadratic_field_with_padic_coefficients():
    # sqrt(5) lives in Q_17 itself, but the generic representation must
    # still multiply and invert correctly
    K = NumberField([PadicElement.from_int(-5, P, 8),
                     PadicElement.zero(P, 8)], name="s5")
    s = K.gen()
    assert s * s == 5
    x = s + 2
    assert x * x.inverse() == K.one()


# ---------------------------------------------------------------------------
# ramified (Eisenstein) extensions


def test_uniformizer_power_is_p():
    pi = RamifiedElement.pi(P, 4, 6)
    p4 = pi ** 4
    assert p4.coeffs[0].v == 1 and p4.coeffs[0].unit == 1
    assert all(c.is_zero() for c in p4.coeffs[1:])


def test_ramified_valuations_are_fractional():
    pi = RamifiedElement.pi(P, 4, 6)
    assert pi.valuation() == Fraction(1, 4)
    assert (pi ** 3).valuation() == Fraction(3, 4)
    x = pi * P
    assert x.valuation() == Fraction(5, 4)


def test_ramified_inverse_of_unit():
    pi = RamifiedElement.pi(P, 3, 8)
    x = 2 + pi + 5 * pi ** 2
    y = x.inverse()
    prod = x * y
    assert prod.coeffs[0] == 1
    assert all(c.is_zero() for c in prod.coeffs[1:])


def test_ramified_inverse_of_pure_uniformizer():
    pi = RamifiedElement.pi(P, 3, 8)
    inv = pi.inverse()
    assert inv.valuation() == Fraction(-1, 3)
    prod = pi * inv
    assert prod.coeffs[0] == 1


def test_padic_part_rejects_genuinely_ramified_values():
    pi = RamifiedElement.pi(P, 2, 6)
    x = 3 + pi
    with pytest.raises(PrecisionError):
        x.padic_part()
    y = RamifiedElement.from_padic(PadicElement.from_int(3, P, 6), 2)
    assert y.padic_part().lift() == 3
