from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qchab import xs13
from qchab.arith import valuation
from qchab.froblift import (
    DaggerRing,
    FrobeniusEngine,
    LiftError,
    _horner_rows,
    _pdivrem,
    _pmul,
    _pspread,
    _ptaylor,
    _serinv,
    lift_frobenius,
)

P = 17

# Reciprocal characteristic polynomial of Frobenius acting on the curve,
# frozen from the independent brute-force counter in
# tests/oracles/oracle_count.py: |X(F_17)| = 20, |X(F_289)| = 358,
# |X(F_4913)| = 4949.
ZETA_COEFFS = (1, 2, 36, 81, 612, 578, 4913)


# ---------------------------------------------------------------------------
# dense polynomial layer


@given(st.data())
@settings(max_examples=20, deadline=None)
def test_kronecker_product_agrees_with_convolution(data):
    M = P ** data.draw(st.integers(1, 9))
    na = data.draw(st.integers(30, 45))
    nb = data.draw(st.integers(30, 45))
    a = data.draw(st.lists(st.integers(0, M - 1), min_size=na, max_size=na))
    b = data.draw(st.lists(st.integers(0, M - 1), min_size=nb, max_size=nb))
    a[-1] = a[-1] or 1
    b[-1] = b[-1] or 1
    bw = (2 * M.bit_length() + 26) // 8 + 1
    got = _pmul(a, b, M, bw)
    ref = [0] * (na + nb - 1)
    for i, x in enumerate(a):
        for j, z in enumerate(b):
            ref[i + j] = (ref[i + j] + x * z) % M
    while ref and ref[-1] == 0:
        ref.pop()
    assert got == ref


@given(st.data())
@settings(max_examples=20, deadline=None)
def test_fast_division_matches_schoolbook(data):
    M = P ** 8
    bw = (2 * M.bit_length() + 26) // 8 + 1
    dm = data.draw(st.integers(5, 12))
    mod = data.draw(st.lists(st.integers(0, M - 1), min_size=dm, max_size=dm))
    mod.append(1 + P * data.draw(st.integers(0, 16)))   # unit leading term
    na = data.draw(st.integers(400, 480))
    a = data.draw(st.lists(st.integers(0, M - 1), min_size=na, max_size=na))
    a[-1] = a[-1] or 1
    inv_lead = pow(mod[-1], -1, M)
    q1, r1 = _pdivrem(a, mod, inv_lead, M)               # schoolbook
    q2, r2 = _pdivrem(a, mod, inv_lead, M, bw=bw)        # series-inverse path
    assert (q1, r1) == (q2, r2)


def test_series_inverse_is_inverse():
    M = P ** 6
    bw = (2 * M.bit_length() + 26) // 8 + 1
    b = [3, 14, 0, 5, 289, 1]
    inv = _serinv(b, 40, M, bw)
    prod = _pmul(b, inv, M, bw)[:40]
    assert prod[0] == 1 and all(c == 0 for c in prod[1:])


def test_taylor_shift_evaluates_consistently():
    M = P ** 7
    a = [5, 0, 3, 11, 2, 7]
    out = _ptaylor(a, 13, len(a), M)
    for t in (0, 1, 2, 5):
        direct = sum(c * (13 + t) ** i for i, c in enumerate(a)) % M
        shifted = sum(c * t ** k for k, c in enumerate(out)) % M
        assert direct == shifted


def test_spread_substitutes_power():
    M = P ** 4
    a = [4, 0, 9]
    s = _pspread(a, P)
    x = 3
    assert sum(c * x ** i for i, c in enumerate(s)) % M == \
        sum(c * x ** (P * i) for i, c in enumerate(a)) % M


# ---------------------------------------------------------------------------
# the lift at small precision


@pytest.fixture(scope="module")
def small_ring():
    fix = xs13.load_fixture(1)
    return DaggerRing(fix.curve, fix.prime, 3)


def test_lift_solves_the_defining_equations(small_ring):
    ring = small_ring
    Z, I = lift_frobenius(ring)
    qsp = [_pspread(row, P) for row in ring.q_rows]
    assert _horner_rows(ring, qsp, Z).is_zero()
    qysp = [_pspread(row, P) for row in ring.qy_rows]
    err = _horner_rows(ring, qysp, Z) * I - 1
    assert err.is_zero()


def test_lift_reduces_to_y_power_mod_p(small_ring):
    ring = small_ring
    Z, _ = lift_frobenius(ring)
    yp = ring.element(ring.y_power(P))
    for row in (Z - yp).rows:
        assert all(c % P == 0 for c in row)


# ---------------------------------------------------------------------------
# the full engine against independent anchors


def _charpoly_mod(matrix, p, k):
    """Coefficients of det(T - A) mod p^k via trace power sums."""
    n = len(matrix)
    M = p ** k
    A = [[matrix[j][i].lift() % M for i in range(n)] for j in range(n)]
    pows = [A]
    for _ in range(n - 1):
        B = pows[-1]
        pows.append([[sum(B[a][c] * A[c][b] for c in range(n)) % M
                      for b in range(n)] for a in range(n)])
    t = [sum(B[i][i] for i in range(n)) % M for B in pows]
    e = [1]
    for kk in range(1, n + 1):
        acc = 0
        for i in range(1, kk + 1):
            acc += (-1) ** (i - 1) * e[kk - i] * t[i - 1]
        e.append(acc * pow(kk, -1, M) % M)
    return [(-1) ** i * e[i] % M for i in range(n + 1)]


@pytest.mark.parametrize("which", [1, 2])
def test_characteristic_polynomial_matches_point_counts(which, chart1, chart2):
    fix, eng = chart1 if which == 1 else chart2
    k = eng.data.known
    got = _charpoly_mod(eng.data.matrix, P, k)
    assert got == [c % P ** k for c in ZETA_COEFFS]


@pytest.mark.parametrize("which", [1, 2])
def test_z_class_invariance(which, chart1, chart2):
    fix, eng = chart1 if which == 1 else chart2
    for name in ("Z1", "Z2"):
        Z = fix.z_classes[name]
        rows = Z.rows if hasattr(Z, "rows") else Z
        eng.check_pairing(rows)          # raises on failure


def test_holomorphic_columns_divisible_by_p(chart1):
    _, eng = chart1
    for i in range(3):
        for j in range(6):
            e = eng.data.matrix[j][i]
            assert e.unit == 0 or e.v >= 1


def test_known_digits_meet_request(chart1, chart2):
    for _, eng in (chart1, chart2):
        assert eng.data.known >= eng.precision


def test_third_kind_images_carry_residue_data(chart1):
    _, eng = chart1
    reds = eng.data.third_images
    assert len(reds) == 3
    # pullback multiplies total residues by p, so the residue-carrying
    # block cannot vanish identically
    assert any(any(v % P ** eng.data.known for v in r.thirds) for r in reds)


# ---------------------------------------------------------------------------
# disk evaluation


def test_branch_series_satisfies_curve(chart1):
    _, eng = chart1
    ev = eng.evaluator(4, 9, 10)
    total = ev.rows_series(eng.ring.q_rows)
    assert all(c == 0 for c in total)


def test_form_series_matches_exact_site(chart1):
    fix, eng = chart1
    terms = 8
    ev = eng.evaluator(0, 0, terms)
    site = fix.curve.site_at_affine(Fraction(0), Fraction(0), terms)
    for numer in fix.omega[:2]:
        approx = ev.form_series(eng.ring.rows_from(numer.coeffs))
        exact = site.form_series(numer)
        for k in range(terms - 1):
            c = Fraction(exact.coefficient(k))
            want = c.numerator * pow(c.denominator, -1, P ** 5) % P ** 5
            assert approx[k] % P ** 5 == want


def test_bad_disk_is_refused(chart1):
    _, eng = chart1
    with pytest.raises(LiftError):
        eng.evaluator(1, 1, 4)


def test_primitive_series_differentiates_to_pullback(chart1):
    _, eng = chart1
    d = eng.data
    n = 9
    ev = eng.evaluator(0, 0, n)
    M = eng.ring.M
    i = 1
    prim = d.primitives[i]
    fser = ev.function_series(prim)
    dser = [(k + 1) * fser[k + 1] % M for k in range(n - 1)]
    rhs = ev.element_series(d.pullbacks[i])
    scale = pow(P, prim.shift, M)
    for j in range(6):
        c = d.matrix[j][i]
        if c.unit:
            cval = c.unit * pow(P, c.v + prim.shift, M) % M
            w = ev.form_series(eng.reducer.basis_rows[j])
            for k in range(n - 1):
                dser[k] = (dser[k] + cval * w[k]) % M
    for k in range(n - 1):
        diff = (rhs[k] * scale - dser[k]) % M
        assert diff == 0 or valuation(diff, P) >= prim.known - 3


def test_function_element_matches_term_series(chart1):
    _, eng = chart1
    d = eng.data
    fun = d.primitives[0]
    elem = eng.function_element(fun)
    ev = eng.evaluator(8, 3, 6)
    a = ev.element_series(elem)
    b = ev.function_series(fun)
    assert a == b


def test_point_value_agrees_with_series_constant(chart1):
    _, eng = chart1
    fun = eng.data.primitives[2]
    ev = eng.evaluator(5, 15, 3)
    x0 = ev.x0
    y0 = ev.y[0]
    assert eng.point_value(fun, x0, y0) == ev.function_series(fun)[0]


def test_base_point_normalisation(chart1, chart2):
    for fix, eng in (chart1, chart2):
        for fun in eng.data.primitives:
            assert eng.point_value(fun, *fix.base_point) == 0


# ---------------------------------------------------------------------------
# persistence


def test_cache_round_trip(chart1, frob_cache):
    fix, eng = chart1
    again = FrobeniusEngine(fix.curve, list(fix.omega), list(fix.third),
                            fix.base_point, fix.prime, eng.precision,
                            guard=eng.guard, cache_dir=frob_cache)
    for i in range(6):
        for j in range(6):
            a, b = eng.data.matrix[j][i], again.data.matrix[j][i]
            assert (a.v, a.unit, a.N) == (b.v, b.unit, b.N)
    assert again.data.known == eng.data.known
