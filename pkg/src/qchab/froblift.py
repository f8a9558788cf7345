"""Frobenius lift and reduction of 1-forms in overconvergent cohomology.

The engine behind everything p-adic in the package: it lifts the p-power
map x -> x^p to the weak completion of the coordinate ring of a plane
model, pulls the working basis of 1-forms back through the lift, and
reduces the results to that basis again.  The output is the matrix of
Frobenius on the six second-kind classes, the induced images of the
three residue-carrying classes, and explicit overconvergent primitives
for all the exact parts, ready to be expanded on any good residue disk.

Ring elements are stored as y-power rows of dense x-polynomials over
Z/p^K sharing a denominator r(x)^m, where r is the y-resultant of the
model with its y-derivative.  The Bezout identity beta * Q_y = r mod Q,
computed exactly once per model, keeps 1/Q_y inside the representation.
Reduction runs in three phases: a finite-pole descent that lowers m one
step at a time through small fixed-size solves, a conversion of the last
r-denominator into a polynomial numerator against dx/Q_y, and a window
solve that splits the polynomial remainder into basis classes plus
differentials of monomials.  Each phase goes through PrimePowerLU, so
precision spent on non-unit pivots is tracked and surfaces in the
``known`` digit counts of the results instead of silently corrupting
low-order digits.
"""

import hashlib
import os
import pickle
import tempfile
from fractions import Fraction

import gmpy2
import sympy

from .arith import PadicElement, PrecisionError, QchabError, valuation
from .linser import PrimePowerLU

_CACHE_VERSION = 3


class LiftError(QchabError):
    """The Frobenius lift or a cohomological reduction failed structurally."""


# ---------------------------------------------------------------------------
# dense x-polynomials over Z/p^K: little-endian coefficient lists


def _strip(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def _padd(a, b, M):
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] = (out[i] + c) % M
    return _strip(out)


def _psub(a, b, M):
    out = list(a) + [0] * (len(b) - len(a))
    for i, c in enumerate(b):
        out[i] = (out[i] - c) % M
    return _strip(out)


def _pscale(a, c, M):
    c %= M
    if c == 0:
        return []
    return _strip([x * c % M for x in a])


def _pmul(a, b, M, bw):
    """Product of coefficient lists, by Kronecker substitution for big ones."""
    if not a or not b:
        return []
    na, nb = len(a), len(b)
    if na * nb <= 1024:
        out = [0] * (na + nb - 1)
        for i, x in enumerate(a):
            if x:
                for j, z in enumerate(b):
                    out[i + j] += x * z
        return _strip([c % M for c in out])
    pa = int.from_bytes(b"".join(x.to_bytes(bw, "little") for x in a), "little")
    pb = int.from_bytes(b"".join(x.to_bytes(bw, "little") for x in b), "little")
    raw = int(gmpy2.mpz(pa) * gmpy2.mpz(pb)).to_bytes(bw * (na + nb), "little")
    return _strip([int.from_bytes(raw[i * bw:(i + 1) * bw], "little") % M
                   for i in range(na + nb - 1)])


def _pderiv(a, M):
    return _strip([i * a[i] % M for i in range(1, len(a))])


def _serinv(b, n, M, bw, seed=None):
    """Series inverse of b mod x^n by Newton doubling; b[0] must be a unit."""
    out = list(seed) if seed else [pow(b[0] % M, -1, M)]
    while len(out) < n:
        ln = min(2 * len(out), n)
        prod = _pmul(out, b[:ln], M, bw)[:ln]
        t = [(-c) % M for c in prod] + [0] * (ln - len(prod))
        t[0] = (t[0] + 2) % M
        nxt = _pmul(out, t, M, bw)[:ln]
        out = nxt + [0] * (ln - len(nxt))
    return out[:n]


def _pdivrem(a, mod, inv_lead, M, bw=None, inv_rev=None):
    """Division with remainder by a unit-leading-coefficient divisor.

    Small jobs run schoolbook; large quotients go through multiplication
    by the series inverse of the reversed divisor, so the cost stays at a
    few Kronecker products however long the dividend gets.
    """
    dm = len(mod) - 1
    if len(a) <= dm:
        return [], list(a)
    k = len(a) - 1 - dm
    if bw is not None and (k + 1) * len(mod) > 4096:
        if inv_rev is None or len(inv_rev) < k + 1:
            inv_rev = _serinv(list(reversed(mod)), k + 1, M, bw)
        ra = list(reversed(a))[:k + 1]
        q = _pmul(ra, inv_rev[:k + 1], M, bw)[:k + 1]
        q = q + [0] * (k + 1 - len(q))
        q.reverse()
        rem = _psub(a, _pmul(mod, q, M, bw), M)
        if len(rem) > dm:
            raise LiftError("fast division produced an oversized remainder")
        return _strip(q), rem
    rem = list(a)
    quo = [0] * (k + 1)
    while len(rem) > dm:
        c = rem[-1] * inv_lead % M
        sh = len(rem) - 1 - dm
        if c:
            quo[sh] = c
            for i, z in enumerate(mod):
                rem[sh + i] = (rem[sh + i] - c * z) % M
        rem.pop()
        while len(rem) > dm and rem[-1] == 0:
            rem.pop()
    return _strip(quo), _strip(rem)


def _peval(a, x0, M):
    acc = 0
    for c in reversed(a):
        acc = (acc * x0 + c) % M
    return acc


def _ptaylor(a, x0, n, M):
    """First n coefficients of a(x0 + t), by repeated synthetic division."""
    cur = list(a)
    out = []
    for _ in range(n):
        if not cur:
            break
        acc = 0
        quo = [0] * (len(cur) - 1)
        for i in range(len(cur) - 1, 0, -1):
            acc = (acc * x0 + cur[i]) % M if i < len(cur) - 1 else cur[i]
            quo[i - 1] = acc
        rem = (acc * x0 + cur[0]) % M if quo else cur[0] % M
        out.append(rem)
        cur = _strip(quo)
    while len(out) < n:
        out.append(0)
    return out


def _pspread(a, p):
    """Substitute x -> x^p into a coefficient list."""
    if not a:
        return []
    out = [0] * ((len(a) - 1) * p + 1)
    for i, c in enumerate(a):
        out[i * p] = c
    return _strip(out)


# ---------------------------------------------------------------------------
# truncated power series in the disk parameter, same storage


def _smul(a, b, n, M):
    out = [0] * n
    for i in range(min(n, len(a))):
        x = a[i]
        if x:
            for j in range(min(n - i, len(b))):
                out[i + j] = (out[i + j] + x * b[j]) % M
    return out


def _sinv(a, n, M):
    inv0 = pow(a[0] % M, -1, M)
    out = [inv0] + [0] * (n - 1)
    for i in range(1, n):
        acc = 0
        for j in range(1, min(i, len(a) - 1) + 1):
            acc = (acc + a[j] * out[i - j]) % M
        out[i] = -inv0 * acc % M
    return out


def _sadd(a, b, M):
    n = max(len(a), len(b))
    return [((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)) % M
            for i in range(n)]


# ---------------------------------------------------------------------------
# exact auxiliary data: resultant and Bezout cofactor of (Q, Q_y)

_AUX_CACHE = {}


def _exact_auxiliary(coeffs):
    """(r, beta) with beta * Q_y = r mod Q, as exact rational coefficients.

    r is the y-resultant of Q and Q_y, so the good locus of the model is
    exactly where r stays a unit.  Computed symbolically once per model
    and verified by an exact polynomial division before use.
    """
    key = coeffs
    if key in _AUX_CACHE:
        return _AUX_CACHE[key]
    x, y = sympy.symbols("x y")
    expr = sympy.Integer(0)
    for j, row in enumerate(coeffs):
        for i, c in enumerate(row):
            if c:
                frac = Fraction(c)
                expr += sympy.Rational(frac.numerator, frac.denominator) \
                    * x ** i * y ** j
    qy = sympy.diff(expr, y)
    res = sympy.resultant(expr, qy, y)
    rpoly = sympy.Poly(res, x)
    if rpoly.degree() < 1:
        raise LiftError("degenerate resultant")
    field = sympy.QQ.frac_field(x)
    pq = sympy.Poly(expr, y, domain=field)
    pqy = sympy.Poly(qy, y, domain=field)
    _, cof, gcd = pq.gcdex(pqy)
    if gcd.degree() != 0 or gcd.as_expr() != 1:
        raise LiftError("curve and its y-derivative share a factor")
    beta = (cof * sympy.Poly(res, y, domain=field)).div(pq)[1]
    beta_expr = sympy.together(beta.as_expr())
    check = sympy.expand(beta_expr * qy - res)
    if sympy.div(check, expr, y)[1] != 0:
        raise LiftError("Bezout identity for 1/Q_y failed to verify")
    d = len(coeffs) - 1
    rows = [dict() for _ in range(d)]
    poly = sympy.Poly(sympy.expand(beta_expr), x, y)
    for (i, j), c in zip(poly.monoms(), poly.coeffs()):
        num, den = sympy.fraction(sympy.Rational(c))
        rows[j][i] = Fraction(int(num), int(den))
    beta_rows = tuple(tuple(row.get(i, Fraction(0))
                            for i in range(max(row) + 1 if row else 0))
                      for row in rows)
    r_coeffs = tuple(Fraction(int(c.p), int(c.q))
                     for c in reversed(rpoly.all_coeffs()))
    _AUX_CACHE[key] = (r_coeffs, beta_rows)
    return _AUX_CACHE[key]


# ---------------------------------------------------------------------------
# the working ring


class RingElement:
    """y-power rows of x-polynomials over a common denominator r(x)^m."""

    __slots__ = ("ring", "rows", "m")

    def __init__(self, ring, rows, m=0):
        self.ring = ring
        self.rows = [_strip([c % ring.M for c in row]) for row in rows]
        while len(self.rows) < ring.d:
            self.rows.append([])
        self.m = m

    def is_zero(self):
        return all(not row for row in self.rows)

    def degree(self):
        return max((len(row) - 1 for row in self.rows if row), default=-1)

    def __add__(self, other):
        return self.ring.add(self, self.ring.coerce(other))

    __radd__ = __add__

    def __neg__(self):
        return RingElement(self.ring, [_pscale(r, -1, self.ring.M)
                                       for r in self.rows], self.m)

    def __sub__(self, other):
        return self + (-self.ring.coerce(other))

    def __rsub__(self, other):
        return self.ring.coerce(other) + (-self)

    def __mul__(self, other):
        other = self.ring.coerce(other)
        return RingElement(self.ring, self.ring.rmul(self.rows, other.rows),
                           self.m + other.m)

    __rmul__ = __mul__

    def scale(self, c):
        return RingElement(self.ring,
                           [_pscale(r, self.ring.unit_int(c), self.ring.M)
                            for r in self.rows], self.m)


class DaggerRing:
    """Arithmetic in (Z/p^K)[x, 1/r][y] / (Q) for a fixed plane model."""

    def __init__(self, curve, p, K):
        self.curve = curve
        self.p = p
        self.K = K
        self.M = p ** K
        self.bw = (2 * self.M.bit_length() + 26) // 8 + 1
        self.d = curve.Q.y_degree()
        self.q_rows = self.rows_from(curve.Q.coeffs)
        if self.q_rows[self.d] != [1]:
            raise LiftError("model must be monic in y")
        self.qy_rows = self._pad_rows(self.rows_from(curve.Q.dy().coeffs))
        self.qx_rows = self._pad_rows(self.rows_from(curve.Q.dx().coeffs))
        r_exact, beta_exact = _exact_auxiliary(curve.Q.coeffs)
        self.r = [self.unit_int(c) for c in r_exact]
        if self.r[-1] % p == 0:
            raise LiftError("resultant leading coefficient not a p-unit")
        self.inv_r_lead = pow(self.r[-1], -1, self.M)
        self.rd = _pderiv(self.r, self.M)
        self.beta = [_strip([self.unit_int(c) for c in row])
                     for row in beta_exact]
        while len(self.beta) < self.d:
            self.beta.append([])
        self._redy = self._build_redy()
        self.bqx = self.rmul(self.beta, self.qx_rows)
        self._rpow = {0: [1], 1: list(self.r)}
        self._invrev_r = None

    # -- scalar embedding

    def unit_int(self, c):
        """Embed an exact scalar whose denominator is a p-unit."""
        frac = Fraction(c)
        if frac.denominator % self.p == 0:
            raise LiftError("denominator divisible by p: %s" % c)
        return frac.numerator * pow(frac.denominator, -1, self.M) % self.M

    def rows_from(self, coeffs):
        return [_strip([self.unit_int(c) for c in row]) for row in coeffs]

    def _pad_rows(self, rows):
        for extra in rows[self.d:]:
            if extra:
                raise LiftError("y-degree above the model degree")
        rows = rows[:self.d]
        while len(rows) < self.d:
            rows.append([])
        return rows

    # -- construction

    def coerce(self, value):
        if isinstance(value, RingElement):
            if value.ring is not self:
                raise LiftError("elements of different rings")
            return value
        if isinstance(value, (int, Fraction)):
            return self.xelem([self.unit_int(value)])
        raise TypeError("cannot coerce %r" % (value,))

    def xelem(self, xpoly, m=0):
        rows = [list(xpoly)] + [[] for _ in range(self.d - 1)]
        return RingElement(self, rows, m)

    def element(self, rows, m=0):
        return RingElement(self, rows, m)

    # -- y-structure

    def _build_redy(self):
        d, M = self.d, self.M
        table = [[([1] if j == k else []) for j in range(d)] for k in range(d)]
        for k in range(d, 2 * d - 1):
            table.append(self._ymul_rows(table[k - 1]))
        return table

    def _ymul_rows(self, rows):
        top = rows[self.d - 1]
        out = [[]] + [list(r) for r in rows[:self.d - 1]]
        if top:
            for j in range(self.d):
                out[j] = _padd(out[j],
                               _pmul(top, _pscale(self.q_rows[j], -1, self.M),
                                     self.M, self.bw), self.M)
        return out

    def y_power(self, n):
        if n < self.d:
            rows = [[] for _ in range(self.d)]
            rows[n] = [1]
            return rows
        rows = [list(r) for r in self._redy[self.d - 1]]
        rows = self._ymul_rows(rows)
        for _ in range(n - self.d):
            rows = self._ymul_rows(rows)
        return rows

    def rmul(self, a, b):
        """Product of two row vectors, folded back below y-degree d."""
        d, M, bw = self.d, self.M, self.bw
        big = [[] for _ in range(2 * d - 1)]
        for i in range(d):
            ai = a[i] if i < len(a) else []
            if not ai:
                continue
            for j in range(d):
                bj = b[j] if j < len(b) else []
                if bj:
                    big[i + j] = _padd(big[i + j], _pmul(ai, bj, M, bw), M)
        out = [big[j] for j in range(d)]
        for k in range(d, 2 * d - 1):
            if big[k]:
                for j in range(d):
                    red = self._redy[k][j]
                    if red:
                        out[j] = _padd(out[j], _pmul(big[k], red, M, bw), M)
        return out

    # -- denominators

    def rpow(self, k):
        if k not in self._rpow:
            half = self.rpow(k // 2)
            val = _pmul(half, half, self.M, self.bw)
            if k % 2:
                val = _pmul(val, self.r, self.M, self.bw)
            self._rpow[k] = val
        return self._rpow[k]

    def add(self, a, b):
        m = max(a.m, b.m)
        ra = self.rpow(m - a.m) if m > a.m else None
        rb = self.rpow(m - b.m) if m > b.m else None
        rows = []
        for i in range(self.d):
            x = _pmul(a.rows[i], ra, self.M, self.bw) if ra else a.rows[i]
            z = _pmul(b.rows[i], rb, self.M, self.bw) if rb else b.rows[i]
            rows.append(_padd(x, z, self.M))
        return RingElement(self, rows, m)

    def divrem_r(self, row):
        """Divide an x-polynomial by the resultant, caching its inverse."""
        k = len(row) - len(self.r)
        if k * len(self.r) > 4096 and \
                (self._invrev_r is None or len(self._invrev_r) < k + 1):
            self._invrev_r = _serinv(list(reversed(self.r)), 2 * (k + 1),
                                     self.M, self.bw, seed=self._invrev_r)
        return _pdivrem(row, self.r, self.inv_r_lead, self.M, self.bw,
                        self._invrev_r)

    def _div_rpow(self, rows, step):
        """All rows divided exactly by r^step, or None if any fails."""
        mod = self.rpow(step)
        inv_lead = pow(self.inv_r_lead, step, self.M)
        quos = []
        for row in rows:
            quo, rem = _pdivrem(row, mod, inv_lead, self.M, self.bw)
            if rem:
                return None
            quos.append(quo)
        return quos

    def cleanup(self, elem):
        """Cancel exact r factors shared by all rows against the denominator.

        Probes power-of-two chunks from the top down, so elements carrying
        hundreds of spurious denominator factors clean up in a logarithmic
        number of exact divisions.
        """
        rows, m = elem.rows, elem.m
        step = 1
        while step * 2 <= m:
            step *= 2
        while m > 0 and step >= 1:
            if step > m:
                step //= 2
                continue
            quos = self._div_rpow(rows, step)
            if quos is None:
                step //= 2
            else:
                rows, m = quos, m - step
        return RingElement(self, rows, m)


class DaggerFunction:
    """A reduction primitive: polynomial rows plus finite-pole terms.

    Stored value is p^shift times the true function; ``known`` counts the
    trustworthy low-order digits of the stored integers.
    """

    __slots__ = ("poly", "terms", "shift", "known")

    def __init__(self, poly, terms, shift, known):
        self.poly = poly
        self.terms = terms
        self.shift = shift
        self.known = known


# ---------------------------------------------------------------------------
# evaluation on a residue disk


def _hensel_root(ring, x0, y0):
    M, p = ring.M, ring.p
    coeffs = [_peval(row, x0, M) for row in ring.q_rows]
    y = y0 % p
    der = sum(j * coeffs[j] * pow(y, j - 1, M) for j in range(1, len(coeffs)))
    if der % p == 0:
        raise LiftError("point is not on the smooth y-fibre")
    for _ in range(ring.K.bit_length() + 3):
        val = 0
        for c in reversed(coeffs):
            val = (val * y + c) % M
        if val == 0:
            return y
        der = 0
        for j in range(len(coeffs) - 1, 0, -1):
            der = (der * y + j * coeffs[j]) % M
        y = (y - val * pow(der, -1, M)) % M
    raise LiftError("branch lift did not converge")


class DiskEvaluator:
    """Series expansions along x = x0 + t on one good residue disk.

    The centre must keep the resultant a unit, which every disk the
    pipeline expands on does; the branch is fixed by the residue y0.
    """

    def __init__(self, ring, x0, y0, nterms):
        self.ring = ring
        self.n = nterms
        M = ring.M
        self.x0 = x0 % M
        if _peval(ring.r, self.x0, M) % ring.p == 0:
            raise LiftError("resultant vanishes on this disk")
        self.y = self._branch(_hensel_root(ring, self.x0, y0))
        self.ypow = [[1] + [0] * (nterms - 1), self.y]
        for _ in range(ring.d - 1):
            self.ypow.append(_smul(self.ypow[-1], self.y, nterms, M))
        self.rser = _ptaylor(ring.r, self.x0, nterms, M)
        self.rinv = _sinv(self.rser, nterms, M)
        self._rinvpow = {0: [1] + [0] * (nterms - 1), 1: self.rinv}
        self._qy = None

    def _branch(self, ycentre):
        ring, n, M = self.ring, self.n, self.ring.M
        rows = [_ptaylor(row, self.x0, n, M) for row in ring.q_rows]
        dyrows = [_pscale(rows[j + 1], j + 1, M)
                  for j in range(len(rows) - 1)]
        y = [ycentre] + [0] * (n - 1)
        length = 1
        while length < n:
            length = min(2 * length, n)
            val = [0] * n
            for row in reversed(rows):
                val = _smul(val, y, length, M)
                val = _sadd(val, row[:length], M)
            der = [0] * n
            for row in reversed(dyrows):
                der = _smul(der, y, length, M)
                der = _sadd(der, row[:length], M)
            corr = _smul(val, _sinv(der, length, M), length, M)
            y = [(y[i] - (corr[i] if i < length else 0)) % M for i in range(n)]
        return y

    def rinv_power(self, m):
        if m not in self._rinvpow:
            self._rinvpow[m] = _smul(self.rinv_power(m - 1), self.rinv,
                                     self.n, self.ring.M)
        return self._rinvpow[m]

    def rows_series(self, rows):
        n, M = self.n, self.ring.M
        out = [0] * n
        for j, row in enumerate(rows):
            if not row:
                continue
            tay = _ptaylor(row, self.x0, n, M)
            out = _sadd(out, tay if j == 0 else _smul(tay, self.ypow[j], n, M), M)
        return out

    def element_series(self, elem):
        base = self.rows_series(elem.rows)
        if elem.m:
            base = _smul(base, self.rinv_power(elem.m), self.n, self.ring.M)
        return base

    def qy_series(self):
        if self._qy is None:
            self._qy = _sinv(self.rows_series(self.ring.qy_rows), self.n,
                             self.ring.M)
        return self._qy

    def form_series(self, rows):
        """Series of (numerator dx / Q_y) in dt; x' = 1 on this chart."""
        return _smul(self.rows_series(rows), self.qy_series(), self.n,
                     self.ring.M)

    def function_series(self, fun):
        n, M = self.n, self.ring.M
        top = max((m for _, m in fun.terms), default=0)
        by_level = {}
        for rows, m in fun.terms:
            by_level.setdefault(m, []).append(rows)
        acc = [0] * n
        for m in range(top, 0, -1):
            for rows in by_level.get(m, ()):
                acc = _sadd(acc, self.rows_series(rows), M)
            acc = _smul(acc, self.rinv, n, M)
        return _sadd(acc, self.rows_series(fun.poly), M)


# ---------------------------------------------------------------------------
# the lift itself


def _horner_rows(ring, coeff_rows, Z):
    acc = ring.xelem(coeff_rows[-1])
    for row in reversed(coeff_rows[:-1]):
        acc = acc * Z + ring.xelem(row)
    return acc


def lift_frobenius(ring):
    """Solve Q(x^p, Z) = 0 with Z = y^p mod p, and invert Q_y(x^p, Z).

    Coupled Newton iteration climbing a doubling precision ladder: each
    rung runs one correction round modulo p^(2k), so nearly all the work
    happens at the final precision once.  Both defining identities are
    rechecked exactly mod p^K before returning.
    """
    p, K = ring.p, ring.K
    ladder = []
    k = K
    while k > 1:
        ladder.append(k)
        k = (k + 1) // 2
    ladder.reverse()

    def step(rng, Z, I, rounds=1):
        qsp = [_pspread(row, p) for row in rng.q_rows]
        qysp = [_pspread(row, p) for row in rng.qy_rows]
        one = rng.xelem([1])
        for _ in range(rounds):
            QZ = _horner_rows(rng, qsp, Z)
            done = QZ.is_zero()
            if not done:
                Z = rng.cleanup(Z - QZ * I)
            DZ = _horner_rows(rng, qysp, Z)
            if done and (I * DZ - one).is_zero():
                return Z, I, True
            I = rng.cleanup(I * (2 - I * DZ))
        return Z, I, False

    base = DaggerRing(ring.curve, p, 1) if K > 1 else ring
    Z = base.element(base.y_power(p))
    I = _horner_rows(base, [_pspread(row, p) for row in base.beta], Z)
    I = RingElement(base, I.rows, I.m + p)
    for k in ladder:
        rng = ring if k == K else DaggerRing(ring.curve, p, k)
        Z = RingElement(rng, Z.rows, Z.m)
        I = RingElement(rng, I.rows, I.m)
        Z, I, _ = step(rng, Z, I)
    for _ in range(4):
        Z, I, exact = step(ring, Z, I)
        if exact:
            return ring.cleanup(Z), ring.cleanup(I)
    raise LiftError("Frobenius lift did not converge")


# ---------------------------------------------------------------------------
# reduction to the basis


class Reduction:
    """Result of reducing one 1-form against the working basis.

    ``second`` and ``thirds`` are stored integers scaled by p^shift, known
    to ``known`` digits; ``primitive`` integrates the exact part.
    """

    __slots__ = ("second", "thirds", "shift", "known", "primitive")

    def __init__(self, second, thirds, shift, known, primitive):
        self.second = second
        self.thirds = thirds
        self.shift = shift
        self.known = known
        self.primitive = primitive


class Reducer:
    """Reduces ring 1-forms u dx to basis classes plus exact differentials."""

    def __init__(self, ring, basis, thirds):
        self.ring = ring
        self.basis_rows = [ring.rows_from(b.coeffs) for b in basis]
        self.third_rows = [ring.rows_from(t.coeffs) for t in thirds]
        self.dimx = len(ring.r) - 1
        self.nb = ring.d * self.dimx
        self._level_lu = {}
        self._window = {}
        self._conversion = None
        self._rmat = self._operator(lambda S: [
            _pmul(ring.rd, row, ring.M, ring.bw) for row in S])
        self._bmat = self._operator(lambda S: ring.rmul(ring.bqx, self._dy(S)))
        self._betamat = self._operator(lambda S: ring.rmul(ring.beta, S))

    # -- the 48-dimensional quotient space mod (Q, r)

    def _dy(self, S):
        d, M = self.ring.d, self.ring.M
        return [_pscale(S[j + 1], j + 1, M) for j in range(d - 1)] + [[]]

    def _proj(self, rows):
        ring = self.ring
        vec = [0] * self.nb
        for j in range(ring.d):
            rem = ring.divrem_r(rows[j])[1]
            for a, c in enumerate(rem):
                vec[j * self.dimx + a] = c
        return vec

    def _lift(self, vec):
        rows = []
        for j in range(self.ring.d):
            rows.append(_strip(list(vec[j * self.dimx:(j + 1) * self.dimx])))
        return rows

    def _operator(self, fun):
        cols = []
        for j in range(self.ring.d):
            for a in range(self.dimx):
                rows = [[] for _ in range(self.ring.d)]
                rows[j] = [0] * a + [1]
                cols.append(self._proj(fun(rows)))
        return [[cols[c][r] for c in range(self.nb)] for r in range(self.nb)]

    def _descent_lu(self, level):
        if level not in self._level_lu:
            M = self.ring.M
            rows = [[(-(level * self._rmat[i][j] + self._bmat[i][j])) % M
                     for j in range(self.nb)] for i in range(self.nb)]
            self._level_lu[level] = PrimePowerLU(rows, self.ring.p, self.ring.K)
        return self._level_lu[level]

    def _conversion_lu(self):
        if self._conversion is None:
            M = self.ring.M
            rows = [self._betamat[i] + [(-e) % M for e in self._bmat[i]]
                    for i in range(self.nb)]
            self._conversion = PrimePowerLU(rows, self.ring.p, self.ring.K)
        return self._conversion

    # -- exact differentials

    def _dform(self, S, level):
        """Numerator of d(S / r^level) over r^(level+1)."""
        ring = self.ring
        out = []
        t2 = ring.rmul(ring.bqx, self._dy(S))
        for j in range(ring.d):
            row = _pmul(ring.r, _pderiv(S[j], ring.M), ring.M, ring.bw)
            row = _psub(row, t2[j], ring.M)
            if level:
                row = _psub(row, _pscale(_pmul(ring.rd, S[j], ring.M, ring.bw),
                                         level, ring.M), ring.M)
            out.append(row)
        return out

    def _window_lu(self, degree):
        hpad = max(24, -(-degree // 16) * 16)
        if hpad in self._window:
            return self._window[hpad]
        ring = self.ring
        height = hpad + 14
        nrows = ring.d * (height + 1)

        def embed(rows):
            vec = [0] * nrows
            for j, row in enumerate(rows):
                if len(row) > height + 1:
                    raise LiftError("window overflow")
                for a, c in enumerate(row):
                    vec[j * (height + 1) + a] = c
            return vec

        cols = [embed(rows) for rows in self.basis_rows + self.third_rows]
        yqy = [self.ring.rmul(ring.y_power(j), ring.qy_rows)
               for j in range(ring.d)]
        yqx = [self.ring.rmul(ring.y_power(j), ring.qx_rows)
               for j in range(ring.d)]
        n_xdx = hpad + 9
        for k in range(n_xdx):
            cols.append(embed([[0] * k + list(row) if row else []
                               for row in yqy[0]]))
        n_mon = hpad + 2
        for k in range(n_mon):
            for j in range(1, ring.d):
                rows = [[] for _ in range(ring.d)]
                for i in range(ring.d):
                    term = []
                    if k:
                        term = _pscale([0] * (k - 1) + list(yqy[j][i])
                                       if yqy[j][i] else [], k, ring.M)
                    sub = _pscale([0] * k + list(yqx[j - 1][i])
                                  if yqx[j - 1][i] else [], j, ring.M)
                    rows[i] = _psub(term, sub, ring.M)
                cols.append(embed(rows))
        matrix = [[cols[c][r] for c in range(len(cols))] for r in range(nrows)]
        lu = PrimePowerLU(matrix, ring.p, ring.K)
        self._window[hpad] = (lu, embed, n_xdx, n_mon)
        return self._window[hpad]

    # -- the full reduction

    def reduce(self, elem, known=None):
        """Split a 1-form u dx into basis classes and an exact part.

        Precision: a non-unit pivot in one of the solves costs digits on
        that solution, but the error it injects is itself a 1-form whose
        own reduction has bounded denominators, so losses do not compound
        level by level.  The returned ``known`` therefore charges the
        worst single solve plus a logarithmic cushion in the pole order;
        callers cross-check the claim against structural identities.
        """
        ring = self.ring
        M, p = ring.M, ring.p
        if known is None:
            known = ring.K
        elem = ring.cleanup(elem)
        rows, level = [list(r) for r in elem.rows], elem.m
        cushion = 0
        while p ** cushion < level + 2:
            cushion += 1
        max_loss = 0
        shift = 0
        terms = []
        poly = [[] for _ in range(ring.d)]

        def floor():
            return known - max_loss - cushion - 4

        def scale_all(delta):
            nonlocal rows, terms, poly, shift
            f = pow(p, delta, M)
            rows = [_pscale(r, f, M) for r in rows]
            terms = [([_pscale(r, f, M) for r in S], mm) for S, mm in terms]
            poly = [_pscale(r, f, M) for r in poly]
            shift += delta

        def checked_div(rws):
            quos = []
            for row in rws:
                quo, rem = ring.divrem_r(row)
                if rem and min(valuation(c, p) for c in rem if c) < floor():
                    raise LiftError("inexact division during reduction; "
                                    "raise the guard digits")
                quos.append(quo)
            return quos

        while level >= 2:
            sol = self._descent_lu(level - 1).solve(self._proj(rows))
            self._check(sol, floor())
            if sol.shift:
                scale_all(sol.shift)
            max_loss = max(max_loss, sol.loss)
            S = self._lift(sol.vector)
            terms.append((S, level - 1))
            rows = checked_div([_psub(rows[j], d_j, M) for j, d_j in
                                enumerate(self._dform(S, level - 1))])
            level -= 1

        if level == 1:
            sol = self._conversion_lu().solve(self._proj(rows))
            self._check(sol, floor())
            if sol.shift:
                scale_all(sol.shift)
            max_loss = max(max_loss, sol.loss)
            pnum = self._lift(sol.vector[:self.nb])
            S = self._lift(sol.vector[self.nb:])
            for j in range(ring.d):
                poly[j] = _padd(poly[j], S[j], M)
            rest = ring.rmul(ring.beta, pnum)
            d0 = self._dform(S, 0)
            carry = checked_div([_psub(_psub(rows[j], rest[j], M), d0[j], M)
                                 for j in range(ring.d)])
            qy_carry = ring.rmul(carry, ring.qy_rows)
            rows = [_padd(pnum[j], qy_carry[j], M) for j in range(ring.d)]

        degree = max((len(r) - 1 for r in rows if r), default=0)
        nsec = len(self.basis_rows)
        nthd = len(self.third_rows)
        lu, embed, n_xdx, n_mon = self._window_lu(degree)
        sol = lu.solve(embed(rows))
        self._check(sol, floor())
        if sol.shift:
            scale_all(sol.shift)
        max_loss = max(max_loss, sol.loss)
        known = known - max_loss - cushion - 1
        vec = sol.vector
        second = tuple(vec[0:nsec])
        thirds = tuple(vec[nsec:nsec + nthd])
        fshift = shift
        maxden = 0
        for k in range(n_xdx):
            a = vec[nsec + nthd + k]
            if a:
                want = valuation(k + 1, p)
                maxden = max(maxden, want)
                have = valuation(a, p)
                if want > have:
                    fshift = max(fshift, shift + want - have)
        fscale = pow(p, fshift - shift, M)
        for j in range(ring.d):
            poly[j] = _pscale(poly[j], fscale, M)
        for k in range(n_xdx):
            a = vec[nsec + nthd + k] * fscale % M
            if a:
                den = k + 1
                v = valuation(den, p)
                coeff = a // p ** v * pow(den // p ** v, -1, M) % M
                poly[0] = _padd(poly[0], [0] * (k + 1) + [coeff], M)
        idx = nsec + nthd + n_xdx
        for k in range(n_mon):
            for j in range(1, ring.d):
                c = vec[idx] * fscale % M
                idx += 1
                if c:
                    poly[j] = _padd(poly[j], [0] * k + [c], M)
        primitive = DaggerFunction(
            [_strip(r) for r in poly],
            [([_pscale(r, fscale, M) for r in S], mm) for S, mm in terms],
            fshift, known - maxden)
        return Reduction(second, thirds, shift, known, primitive)

    @staticmethod
    def _check(sol, threshold):
        if sol.residual_valuation < threshold:
            raise LiftError("reduction system inconsistent at valuation %d; "
                            "raise the guard digits" % sol.residual_valuation)


# ---------------------------------------------------------------------------
# the public engine


class FrobeniusData:
    """Matrix of Frobenius together with the exact-part primitives.

    ``matrix[j][i]`` is the coefficient of basis form j in the pullback of
    basis form i, as PadicElement entries.  ``primitives[i]`` integrates
    the leftover exact part, normalised to vanish at the base point.
    ``third_images[k]`` is the full Reduction of the pullback of the k-th
    residue-carrying form.
    """

    __slots__ = ("p", "precision", "k_work", "matrix", "primitives",
                 "third_images", "pullbacks", "third_pullbacks", "known")

    def __init__(self, p, precision, k_work, matrix, primitives, third_images,
                 pullbacks, third_pullbacks, known):
        self.p = p
        self.precision = precision
        self.k_work = k_work
        self.matrix = matrix
        self.primitives = primitives
        self.third_images = third_images
        self.pullbacks = pullbacks
        self.third_pullbacks = third_pullbacks
        self.known = known


class FrobeniusEngine:
    """Builds and holds the Frobenius data for one model at one precision."""

    def __init__(self, curve, omegas, thirds, base_point, p, precision,
                 guard=6, gram=None, cache_dir=None, refresh=False):
        if precision < 1 or guard < 2:
            raise ValueError("need precision >= 1 and guard >= 2")
        self.curve = curve
        self.omegas = list(omegas)
        self.thirds = list(thirds)
        self.base_point = (Fraction(base_point[0]), Fraction(base_point[1]))
        self.p = p
        self.precision = precision
        self.guard = guard
        self.ring = DaggerRing(curve, p, precision + guard)
        self.reducer = Reducer(self.ring, self.omegas, self.thirds)
        self._evaluators = {}
        self.data = self._load(cache_dir) if not refresh else None
        if self.data is None:
            self.data = self._compute()
            self._store(cache_dir)
        self._self_test()
        if gram is not None:
            self.check_pairing(gram)

    # -- cache plumbing

    def _key(self):
        blob = repr((self.curve.Q.coeffs,
                     [w.coeffs for w in self.omegas],
                     [t.coeffs for t in self.thirds],
                     self.base_point, self.p, self.precision, self.guard,
                     _CACHE_VERSION)).encode()
        return hashlib.sha256(blob).hexdigest()[:24]

    def _load(self, cache_dir):
        if not cache_dir:
            return None
        path = os.path.join(cache_dir, "frobenius-%s.pickle" % self._key())
        try:
            with open(path, "rb") as fh:
                payload = pickle.load(fh)
        except (OSError, pickle.PickleError, EOFError):
            return None
        return self._thaw(payload)

    def _store(self, cache_dir):
        if not cache_dir:
            return
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir, "frobenius-%s.pickle" % self._key())
        fd, tmp = tempfile.mkstemp(dir=cache_dir)
        with os.fdopen(fd, "wb") as fh:
            pickle.dump(self._freeze(), fh)
        os.replace(tmp, path)

    def _freeze(self):
        d = self.data

        def fun(fn):
            return (fn.poly, fn.terms, fn.shift, fn.known)

        def red(r_):
            return (r_.second, r_.thirds, r_.shift, r_.known, fun(r_.primitive))

        return {
            "version": _CACHE_VERSION,
            "known": d.known,
            "matrix": [[(e.v, e.unit, e.N) for e in row] for row in d.matrix],
            "primitives": [fun(f) for f in d.primitives],
            "third_images": [red(r_) for r_ in d.third_images],
            "pullbacks": [(e.rows, e.m) for e in d.pullbacks],
            "third_pullbacks": [(e.rows, e.m) for e in d.third_pullbacks],
        }

    def _thaw(self, payload):
        if payload.get("version") != _CACHE_VERSION:
            return None

        def fun(t):
            return DaggerFunction(*t)

        def red(t):
            return Reduction(t[0], t[1], t[2], t[3], fun(t[4]))

        matrix = tuple(tuple(PadicElement(self.p, v, u, n) for v, u, n in row)
                       for row in payload["matrix"])
        return FrobeniusData(
            self.p, self.precision, self.ring.K, matrix,
            [fun(t) for t in payload["primitives"]],
            [red(t) for t in payload["third_images"]],
            [RingElement(self.ring, rows, m)
             for rows, m in payload["pullbacks"]],
            [RingElement(self.ring, rows, m)
             for rows, m in payload["third_pullbacks"]],
            payload["known"])

    # -- the computation

    def _pullback(self, Z, I, biv):
        ring = self.ring
        rows = ring.rows_from(biv.coeffs)
        spread = [_pspread(row, self.p) for row in rows]
        value = _horner_rows(ring, spread, Z)
        factor = ring.xelem([0] * (self.p - 1) + [self.p])
        return ring.cleanup(value * I * factor)

    def _compute(self):
        ring = self.ring
        n = len(self.omegas)
        Z, I = lift_frobenius(ring)
        pulls = [self._pullback(Z, I, w) for w in self.omegas]
        third_pulls = [self._pullback(Z, I, t) for t in self.thirds]
        reductions = [self.reducer.reduce(u) for u in pulls]
        third_reds = [self.reducer.reduce(u) for u in third_pulls]
        for i, red in enumerate(reductions):
            bad = [v for v in red.thirds
                   if v and valuation(v, self.p) < red.known - 2]
            if bad:
                raise LiftError("second-kind pullback %d grew a residue" % i)
        known = min(r.known - r.shift for r in reductions + third_reds)
        if known < self.precision:
            raise PrecisionError(
                "reduction kept %d digits, %d requested: raise guard"
                % (known, self.precision))
        matrix = tuple(tuple(
            PadicElement(self.p, -reductions[i].shift, reductions[i].second[j],
                         reductions[i].known - reductions[i].shift)
            for i in range(n)) for j in range(n))
        primitives = [self._normalise(red.primitive) for red in reductions]
        third_images = [Reduction(r.second, r.thirds, r.shift, r.known,
                                  self._normalise(r.primitive))
                        for r in third_reds]
        return FrobeniusData(self.p, self.precision, ring.K, matrix,
                             primitives, third_images, pulls, third_pulls,
                             known)

    def point_value(self, fun, x0, y0):
        """Stored-scale value of a dagger function at an affine point."""
        ring = self.ring
        M = ring.M
        x0 = ring.unit_int(x0)
        y0 = ring.unit_int(y0)
        rval = _peval(ring.r, x0, M)
        if rval % self.p == 0:
            raise LiftError("cannot evaluate on a bad disk")
        rinv = pow(rval, -1, M)
        total = 0
        for rows, m in fun.terms:
            v = sum(_peval(row, x0, M) * pow(y0, j, M)
                    for j, row in enumerate(rows)) % M
            total = (total + v * pow(rinv, m, M)) % M
        total = (total + sum(_peval(row, x0, M) * pow(y0, j, M)
                             for j, row in enumerate(fun.poly))) % M
        return total

    def _normalise(self, fun):
        value = self.point_value(fun, *self.base_point)
        poly = [list(r) for r in fun.poly]
        const = poly[0] if poly[0] else [0]
        const[0] = (const[0] - value) % self.ring.M
        poly[0] = _strip(const)
        return DaggerFunction(poly, fun.terms, fun.shift, fun.known)

    # -- access

    def evaluator(self, x0, y0, nterms):
        key = (x0, y0, nterms)
        if key not in self._evaluators:
            self._evaluators[key] = DiskEvaluator(self.ring, x0, y0, nterms)
        return self._evaluators[key]

    def omega_element(self, biv):
        """A basis-style form N dx/Q_y as a ring 1-form numerator."""
        rows = self.ring.rows_from(biv.coeffs)
        return RingElement(self.ring, self.ring.rmul(self.ring.beta, rows), 1)

    def function_element(self, fun):
        """Clear a dagger function to a single (rows, m) ring element."""
        ring = self.ring
        top = max((m for _, m in fun.terms), default=0)
        rows = [_pmul(r, ring.rpow(top), ring.M, ring.bw) for r in fun.poly]
        for S, m in fun.terms:
            scale = ring.rpow(top - m)
            for j in range(ring.d):
                if S[j]:
                    rows[j] = _padd(rows[j],
                                    _pmul(S[j], scale, ring.M, ring.bw),
                                    ring.M)
        return RingElement(ring, rows, top)

    # -- built-in verification

    def check_pairing(self, pairing, scale=1):
        """Certify F . P . F^T = p^scale . P to the claimed digit count.

        P is any exact bilinear pairing matrix the Frobenius action
        multiplies by p^scale (the cup product, or an invariant tensor);
        this is the external certificate for the precision model used by
        the reducer.  Raises when the identity fails within claimed digits.
        """
        d = self.data
        n = len(self.omegas)
        lift = max(0, -min(e.v for row in d.matrix for e in row))
        k = d.known + lift
        M = self.p ** max(k + lift, 1)
        A = [[row_e.unit * self.p ** (row_e.v + lift) % M for row_e in row]
             for row in d.matrix]
        P = [[self.ring.unit_int(c) % M for c in row] for row in pairing]
        target = pow(self.p, scale, M)
        for a in range(n):
            for b in range(n):
                s = 0
                for j in range(n):
                    if A[a][j]:
                        for m in range(n):
                            if P[j][m] and A[b][m]:
                                s += A[a][j] * P[j][m] * A[b][m]
                diff = (s - target * pow(self.p, 2 * lift, M) * P[a][b]) % M
                if diff and valuation(diff, self.p) < k:
                    raise PrecisionError(
                        "pairing certificate fails at digit %d of %d claimed"
                        % (valuation(diff, self.p) - 2 * lift, d.known))

    def _self_test(self):
        """Check du = (pullback - matrix column) on the base residue disk."""
        base = self.base_point
        if base[0].denominator != 1 or base[1].denominator != 1:
            return
        x0 = int(base[0]) % self.p
        y0 = int(base[1]) % self.p
        n = 8
        ev = self.evaluator(x0, y0, n)
        M = self.ring.M
        d = self.data
        for i in (0, len(self.omegas) - 1):
            pull = ev.element_series(d.pullbacks[i])
            prim = d.primitives[i]
            fser = ev.function_series(prim)
            dser = [(k + 1) * fser[k + 1] % M for k in range(n - 1)]
            scale = pow(self.p, prim.shift, M)
            for j in range(len(self.omegas)):
                c = d.matrix[j][i]
                if c.unit == 0:
                    continue
                if c.v + prim.shift < 0:
                    raise LiftError("matrix entry below the primitive scale")
                cval = c.unit * pow(self.p, c.v + prim.shift, M) % M
                w = ev.form_series(self.reducer.basis_rows[j])
                for k in range(n - 1):
                    dser[k] = (dser[k] + cval * w[k]) % M
            margin = prim.known - 3
            for k in range(n - 1):
                diff = (pull[k] * scale - dser[k]) % M
                if diff and valuation(diff, self.p) < margin:
                    raise LiftError(
                        "pullback %d fails the derivative identity at order %d"
                        % (i, k))


def frobenius_on_cohomology(curve, omegas, thirds, base_point, p, precision,
                            guard=12, cache_dir=None, refresh=False):
    """Convenience constructor returning a computed FrobeniusEngine."""
    return FrobeniusEngine(curve, omegas, thirds, base_point, p, precision,
                           guard=guard, cache_dir=cache_dir, refresh=refresh)
