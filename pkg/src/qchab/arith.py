"""Exact and p-adic scalar arithmetic.

Four layers of number, from exact to increasingly local:

* ``Fraction`` (re-exported as ``Rational``) carries all exact data: curve
  coefficients, cohomology matrices, Hodge filtration output.
* ``NumberFieldElement`` is a coordinate vector in the power basis of a
  generator modulo a fixed monic minimal polynomial.  The coefficient domain
  is usually ``Fraction`` but the class also tolerates p-adic coefficients,
  which is how the unramified cubic extension of Q_p is represented.
* ``PadicElement`` is a capped-precision p-adic number: an integer unit times
  an explicit power of p, known modulo p^N.  Arithmetic tracks the valuation
  separately and never claims more precision than the inputs support.
* ``RamifiedElement`` is an Eisenstein extension element, a vector of
  PadicElement coefficients in powers of a uniformizer pi with pi^e = p.

Everything here is immutable after construction.
"""

from fractions import Fraction

Rational = Fraction

#: Guard digits added by the engines on top of the requested precision.
DEFAULT_GUARD = 3


class QchabError(Exception):
    pass


class PrecisionError(QchabError):
    """Raised when a computation cannot certify any digits of its result."""


class ReconstructionError(QchabError):
    """Raised when no fraction within the bound matches a residue."""


def valuation(n, p):
    """Exact p-adic valuation of a nonzero integer or Fraction."""
    if isinstance(n, Fraction):
        return valuation(n.numerator, p) - valuation(n.denominator, p)
    if n == 0:
        raise ValueError("valuation of zero is undefined")
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# p-adic numbers


class PadicElement:
    """A p-adic number unit * p^v known modulo p^N.

    The representative satisfies 0 <= unit < p^(N - v) and p does not divide
    it, except for the zero element which is stored as unit 0 with v = N
    (meaning: indistinguishable from zero at absolute precision N).
    """

    __slots__ = ("p", "v", "unit", "N")

    def __init__(self, p, v, unit, N):
        if N < v:
            v = N
            unit = 0
        m = p ** (N - v)
        unit %= m
        if unit == 0:
            v, unit = N, 0
        else:
            while unit % p == 0:
                unit //= p
                v += 1
                m //= p
        self.p, self.v, self.unit, self.N = p, v, unit, N

    # -- constructors

    @classmethod
    def from_int(cls, n, p, N):
        return cls(p, 0, n % (p ** N), N)

    @classmethod
    def from_rational(cls, q, p, N):
        """Embed a rational exactly, then truncate to absolute precision N."""
        q = Fraction(q)
        if q == 0:
            return cls.zero(p, N)
        v = valuation(q, p)
        if v >= N:
            return cls.zero(p, N)
        u = q / Fraction(p) ** v
        m = p ** (N - v)
        unit = u.numerator * pow(u.denominator, -1, m) % m
        return cls(p, v, unit, N)

    @classmethod
    def zero(cls, p, N):
        return cls(p, N, 0, N)

    @classmethod
    def one(cls, p, N):
        return cls(p, 0, 1, N)

    # -- queries

    def is_zero(self):
        """True when the value is indistinguishable from 0 at this precision."""
        return self.unit == 0

    @property
    def valuation(self):
        """Valuation; for (apparent) zero this is the absolute precision N."""
        return self.v

    def precision(self):
        return self.N

    def lift(self):
        """Integer representative of a p-adic integer in [0, p^N)."""
        if self.v < 0:
            raise ValueError("negative valuation: not a p-adic integer")
        return self.unit * self.p ** self.v

    def residue(self):
        """Image in F_p (requires a p-adic integer)."""
        if self.v < 0:
            raise ValueError("negative valuation")
        return self.unit % self.p if self.v == 0 else 0

    # -- arithmetic

    def _coerce(self, other):
        if isinstance(other, PadicElement):
            if other.p != self.p:
                raise ValueError("mixed primes")
            return other
        if isinstance(other, (int, Fraction)):
            q = Fraction(other)
            # an exact scalar must never be the precision bottleneck: give
            # it the full relative precision of self on top of its valuation
            vq = valuation(q, self.p) if q != 0 else 0
            N = max(self.N, vq + (self.N - self.v))
            return PadicElement.from_rational(q, self.p, N)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        N = min(self.N, other.N)
        if self.unit == 0:
            return PadicElement(self.p, other.v, other.unit, min(N, other.N))
        if other.unit == 0:
            return PadicElement(self.p, self.v, self.unit, min(N, self.N))
        v = min(self.v, other.v)
        a = self.unit * self.p ** (self.v - v)
        b = other.unit * other.p ** (other.v - v)
        return PadicElement(self.p, v, a + b, N)

    __radd__ = __add__

    def __neg__(self):
        return PadicElement(self.p, self.v, -self.unit, self.N)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.unit == 0 or other.unit == 0:
            # 0*x is zero to the best provable absolute precision
            v = self.v + other.v
            return PadicElement(self.p, v, 0, v + min(self.N - self.v,
                                                      other.N - other.v))
        v = self.v + other.v
        N = v + min(self.N - self.v, other.N - other.v)
        return PadicElement(self.p, v, self.unit * other.unit, N)

    __rmul__ = __mul__

    def inverse(self):
        if self.unit == 0:
            raise ZeroDivisionError(f"inverting 0 (= O({self.p}^{self.N}))")
        r = self.N - self.v
        inv = pow(self.unit, -1, self.p ** r)
        return PadicElement(self.p, -self.v, inv, r - self.v)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n):
        if n < 0:
            return self.inverse() ** (-n)
        if n == 0:
            return PadicElement.one(self.p, max(self.N - self.v, 1))
        out = None
        base = self
        while n:
            if n & 1:
                out = base if out is None else out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other):
        """Agreement at the weaker of the two precisions."""
        if isinstance(other, (int, Fraction)):
            try:
                other = PadicElement.from_rational(Fraction(other), self.p, self.N)
            except ValueError:
                return NotImplemented
        if not isinstance(other, PadicElement):
            return NotImplemented
        d = self - other
        return d.unit == 0

    __hash__ = None

    # -- rendering

    def digits(self, count=None):
        """Base-p digits [a_v, a_{v+1}, ...] of the value, starting at p^v."""
        if self.unit == 0:
            return []
        count = self.N - self.v if count is None else count
        out, u = [], self.unit
        for _ in range(count):
            out.append(u % self.p)
            u //= self.p
        return out

    def digits_str(self):
        """Render as "a0 + a1*p + a2*p^2 + ..." starting at the valuation."""
        if self.unit == 0:
            return f"0 (+ O({self.p}^{self.N}))"
        parts = []
        for k, d in enumerate(self.digits()):
            e = self.v + k
            if d == 0:
                continue
            if e == 0:
                parts.append(f"{d}")
            elif e == 1:
                parts.append(f"{d}*{self.p}")
            else:
                parts.append(f"{d}*{self.p}^{e}")
        return " + ".join(parts) + f" + O({self.p}^{self.N})"

    def __repr__(self):
        if self.unit == 0:
            return f"O({self.p}^{self.N})"
        return f"{self.unit}*{self.p}^{self.v} + O({self.p}^{self.N})" \
            if self.v else f"{self.unit} + O({self.p}^{self.N})"


def teichmueller_lift(residue, N, p):
    """The Teichmueller representative of a residue class, to precision N.

    Satisfies t^p = t exactly mod p^N and t = residue mod p.  Computed by
    Newton iteration on x^(p-1) = 1 (the zero residue maps to zero).
    """
    if N < 1:
        raise ValueError("precision must be at least 1")
    residue %= p
    if residue == 0:
        return PadicElement.zero(p, N)
    m = p ** N
    x = residue
    # Newton for f(x) = x^(p-1) - 1; quadratic convergence from any unit seed
    for _ in range(max(1, N.bit_length() + 2)):
        fx = (pow(x, p - 1, m) - 1) % m
        if fx == 0:
            break
        dfx = ((p - 1) * pow(x, p - 2, m)) % m
        x = (x - fx * pow(dfx, -1, m)) % m
    assert pow(x, p, m) == x % m, "Teichmueller iteration failed to converge"
    return PadicElement(p, 0, x, N)


def rational_reconstruction(x, bound, p=None, N=None):
    """Recover a fraction a/b with |a|, b <= bound from its residue mod p^N.

    The input is a PadicElement (a p-adic integer) or a plain integer with p
    and N supplied.  Uses the half-extended Euclidean algorithm; requires
    p^N > 2*bound^2 so that the answer, when it exists, is unique.
    """
    if isinstance(x, PadicElement):
        p, N = x.p, x.N
        a = x.lift()
    else:
        a = x % (p ** N)
    m = p ** N
    if m <= 2 * bound * bound:
        raise PrecisionError(
            f"p^N = {m} too small for bound {bound}: need p^N > 2*bound^2")
    r0, r1 = m, a
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    num, den = r1, s1
    if den < 0:
        num, den = -num, -den
    from math import gcd
    if den == 0 or den > bound or gcd(num, den) != 1 or den % p == 0:
        raise ReconstructionError(
            f"no fraction with |num|, den <= {bound} matches {a} mod {p}^{N}")
    if (num - den * a) % m != 0:
        raise ReconstructionError(
            f"no fraction with |num|, den <= {bound} matches {a} mod {p}^{N}")
    return Fraction(num, den)


# ---------------------------------------------------------------------------
# number fields


class NumberField:
    """Q[x]/(minpoly), or more generally F[x]/(minpoly) over a coefficient
    field F.  The minimal polynomial is monic: the last stored coefficient is
    the one of x^(deg-1), i.e. minpoly = x^deg + sum(minpoly[i] * x^i).
    """

    def __init__(self, minpoly_coeffs, name="a"):
        self.minpoly = tuple(minpoly_coeffs)
        self.degree = len(self.minpoly)
        self.name = name

    def __call__(self, *coeffs):
        """Element with the given power-basis coordinates (padded with 0)."""
        cs = list(coeffs) + [0] * (self.degree - len(coeffs))
        return NumberFieldElement(self, cs)

    def zero(self):
        return self(0)

    def one(self):
        return self(1)

    def gen(self):
        return self(0, 1)

    def __eq__(self, other):
        return isinstance(other, NumberField) and self.minpoly == other.minpoly

    def __hash__(self):
        return hash(self.minpoly)

    def __repr__(self):
        return f"NumberField(x^{self.degree} + {list(self.minpoly)}, {self.name!r})"


class NumberFieldElement:
    """Coordinate vector in the power basis 1, a, ..., a^(deg-1)."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        assert len(coeffs) == field.degree
        self.field = field
        self.coeffs = tuple(coeffs)

    def _lift(self, other):
        if isinstance(other, NumberFieldElement):
            if other.field != self.field:
                raise ValueError("mixed number fields")
            return other
        if isinstance(other, (int, Fraction, PadicElement)):
            return self.field(other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return NumberFieldElement(
            self.field, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return NumberFieldElement(self.field, [-a for a in self.coeffs])

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _reduce(self, prod):
        """Reduce a raw product coefficient list modulo the minimal polynomial."""
        d = self.field.degree
        mp = self.field.minpoly
        for k in range(len(prod) - 1, d - 1, -1):
            c = prod[k]
            prod[k] = 0
            for i in range(d):
                prod[k - d + i] = prod[k - d + i] - c * mp[i]
        return prod[:d]

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, PadicElement)):
            return NumberFieldElement(self.field,
                                      [a * other for a in self.coeffs])
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        d = self.field.degree
        prod = [0] * (2 * d - 1)
        for i, a in enumerate(self.coeffs):
            if isinstance(a, (int, Fraction)) and a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                prod[i + j] = prod[i + j] + a * b
        return NumberFieldElement(self.field, self._reduce(prod))

    __rmul__ = __mul__

    def is_zero(self):
        out = True
        for c in self.coeffs:
            if isinstance(c, PadicElement):
                out = out and c.is_zero()
            else:
                out = out and c == 0
        return out

    def inverse(self):
        """Multiplicative inverse by solving the multiplication operator.

        A small Gaussian elimination with largest-pivot preference (by
        p-adic valuation when the coefficients are p-adic) keeps this exact
        over Fractions and stable over Q_p.
        """
        d = self.field.degree
        basis = [self.field(*[1 if i == k else 0 for i in range(d)])
                 for k in range(d)]
        cols = [(self * e).coeffs for e in basis]
        # rows of A: A[i][k] = coefficient i of self * a^k
        A = [[cols[k][i] for k in range(d)] for i in range(d)]
        rhs = [1 if i == 0 else 0 for i in range(d)]
        one = self.coeffs[0] * 0 + 1   # 1 in the coefficient domain
        rhs = [one * r for r in rhs]
        x = _solve_small(A, rhs)
        return NumberFieldElement(self.field, x)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n):
        out = self.field.one()
        base = self
        if n < 0:
            base, n = self.inverse(), -n
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        name = self.field.name
        terms = []
        for i, c in enumerate(self.coeffs):
            mono = "1" if i == 0 else (name if i == 1 else f"{name}^{i}")
            terms.append(f"({c})*{mono}" if i else f"{c}")
        return " + ".join(terms)


def _pivot_quality(x):
    """Larger is better: exact nonzero beats anything p-adic; among p-adic
    candidates lower valuation wins."""
    if isinstance(x, PadicElement):
        if x.unit == 0:
            return None
        return -x.v
    if isinstance(x, NumberFieldElement):
        return None if x.is_zero() else 0
    return None if x == 0 else 10 ** 9


def _solve_small(A, b):
    """Gaussian elimination for the tiny systems used internally here."""
    n = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        best, bq = None, None
        for r in range(col, n):
            q = _pivot_quality(M[r][col])
            if q is not None and (bq is None or q > bq):
                best, bq = r, q
        if best is None:
            raise ZeroDivisionError("singular element (no usable pivot)")
        M[col], M[best] = M[best], M[col]
        piv = M[col][col]
        M[col] = [e / piv for e in M[col]]
        for r in range(n):
            if r != col:
                f = M[r][col]
                M[r] = [e - f * g for e, g in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


# ---------------------------------------------------------------------------
# Eisenstein ramified extensions


class RamifiedElement:
    """An element of Q_p(pi) with pi^e = p, stored as PadicElement
    coefficients of 1, pi, ..., pi^(e-1).

    The valuation is a multiple of 1/e; it is reported as a Fraction.
    """

    __slots__ = ("p", "e", "coeffs")

    def __init__(self, p, e, coeffs):
        assert len(coeffs) == e
        self.p, self.e = p, e
        self.coeffs = tuple(coeffs)

    @classmethod
    def from_padic(cls, x, e):
        zero = PadicElement.zero(x.p, x.N)
        return cls(x.p, e, (x,) + (zero,) * (e - 1))

    @classmethod
    def zero(cls, p, e, N):
        z = PadicElement.zero(p, N)
        return cls(p, e, (z,) * e)

    @classmethod
    def one(cls, p, e, N):
        z = PadicElement.zero(p, N)
        return cls(p, e, (PadicElement.one(p, N),) + (z,) * (e - 1))

    @classmethod
    def pi(cls, p, e, N):
        """The uniformizer itself."""
        z = PadicElement.zero(p, N)
        if e == 1:
            return cls(p, 1, (PadicElement(p, 1, 1, N),))
        return cls(p, e, (z, PadicElement.one(p, N)) + (z,) * (e - 2))

    def _coerce(self, other):
        if isinstance(other, RamifiedElement):
            if (other.p, other.e) != (self.p, self.e):
                raise ValueError("mixed ramified extensions")
            return other
        if isinstance(other, PadicElement):
            return RamifiedElement.from_padic(other, self.e)
        if isinstance(other, (int, Fraction)):
            N = max(c.N for c in self.coeffs)
            return RamifiedElement.from_padic(
                PadicElement.from_rational(Fraction(other), self.p, N), self.e)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RamifiedElement(
            self.p, self.e,
            [a + b for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return RamifiedElement(self.p, self.e, [-a for a in self.coeffs])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, PadicElement)):
            return RamifiedElement(self.p, self.e,
                                   [a * other for a in self.coeffs])
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        e = self.e
        prod = [None] * (2 * e - 1)
        for i, a in enumerate(self.coeffs):
            if a.unit == 0 and a.N <= 0:
                continue
            for j, b in enumerate(other.coeffs):
                t = a * b
                prod[i + j] = t if prod[i + j] is None else prod[i + j] + t
        out = list(prod[:e])
        for k in range(e, 2 * e - 1):
            if prod[k] is not None:
                # pi^k = p * pi^(k-e)
                extra = prod[k] * self.p
                i = k - e
                out[i] = extra if out[i] is None else out[i] + extra
        N = max(c.N for c in self.coeffs)
        z = PadicElement.zero(self.p, N)
        return RamifiedElement(self.p, e, [z if c is None else c for c in out])

    __rmul__ = __mul__

    def valuation(self):
        """min over k of v_p(c_k) + k/e, as a Fraction (None when zero)."""
        best = None
        for k, c in enumerate(self.coeffs):
            if c.unit == 0:
                continue
            v = Fraction(c.v) + Fraction(k, self.e)
            if best is None or v < best:
                best = v
        return best

    def is_zero(self):
        return all(c.unit == 0 for c in self.coeffs)

    def inverse(self):
        """Newton iteration x -> x(2 - a x) from the constant-coefficient seed.

        The element is first normalised to a unit: its pi-adic valuation
        min_k (e*v_k + k) is attained at a unique k (the summands are
        distinct mod e), so after multiplying by a suitable pi^t * p^(-s)
        the constant coefficient strictly dominates and seeds Newton.
        """
        if self.is_zero():
            raise ZeroDivisionError("inverting ramified zero")
        N = max(c.N for c in self.coeffs)
        e = self.e
        m = min(e * c.v + k for k, c in enumerate(self.coeffs) if c.unit != 0)
        t = (-m) % e
        w = self * RamifiedElement.pi(self.p, e, N) ** t if t else self
        s = (m + t) // e
        if s:
            w = w * PadicElement(self.p, -s, 1, N - s)
        x = RamifiedElement.from_padic(w.coeffs[0].inverse(), e)
        for _ in range((e * max(N, 1)).bit_length() + 2):
            x = x * (2 - w * x)
        # self = w * pi^(-t) * p^s, hence 1/self = pi^t * p^(-s) * (1/w)
        out = x * RamifiedElement.pi(self.p, e, N) ** t if t else x
        if s:
            out = out * PadicElement(self.p, -s, 1, N - s)
        return out

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __pow__(self, n):
        if n < 0:
            raise ValueError("negative powers: invert explicitly")
        N = max(c.N for c in self.coeffs)
        out = RamifiedElement.one(self.p, self.e, N)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def padic_part(self, max_ramified_valuation=None):
        """Return the pi^0 coefficient, asserting the others are negligible.

        The leftover-disk boundary solves must produce genuinely unramified
        answers; a loud failure here means a convention error upstream.
        """
        for k, c in enumerate(self.coeffs):
            if k == 0:
                continue
            if c.unit != 0:
                v = Fraction(c.v) + Fraction(k, self.e)
                lim = max_ramified_valuation
                if lim is not None and v >= lim:
                    continue
                raise PrecisionError(
                    f"ramified component pi^{k} of size p^{c.v} present "
                    f"(expected an unramified value)")
        return self.coeffs[0]

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        return " + ".join(f"({c!r})*pi^{k}" if k else repr(c)
                          for k, c in enumerate(self.coeffs)
                          if c.unit != 0) or "0 (ramified)"
