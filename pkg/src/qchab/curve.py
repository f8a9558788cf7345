"""Plane curve models, local branch expansions, and residue pairings.

A curve is given by one affine equation Q(x, y) = 0, monic in y, with the
total degree not exceeding the y-degree.  That last condition makes the
single chart at infinity x = 1/s, y = w/s algebraic: the rescaled equation
s^d Q(1/s, w/s) is again a polynomial, and the points at infinity are the
roots of the degree-d leading form in w = y/x.

All local data flows through Site objects: a site knows the coordinate
series x(t), y(t) of one branch through a centre and expands any rational
differential form or function along it.  The coefficient domain is
whatever the centre lives in: Fraction for rational centres, number field
elements for conjugate centres, p-adic numbers for Teichmueller centres.
"""

from fractions import Fraction

from .arith import NumberFieldElement, PadicElement, QchabError
from .linser import INF, TruncatedSeries


class ChartError(QchabError):
    """The supplied model violates a structural requirement."""


class BivariatePoly:
    """Nested-tuple polynomial: coeffs[j][i] multiplies y^j x^i."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = tuple(tuple(row) for row in coeffs)

    @classmethod
    def constant(cls, c):
        return cls([[c]])

    def y_degree(self):
        return len(self.coeffs) - 1

    def x_degree(self):
        return max((len(r) - 1 for r in self.coeffs if r), default=0)

    def total_degree(self):
        deg = 0
        for j, row in enumerate(self.coeffs):
            for i, c in enumerate(row):
                if c:
                    deg = max(deg, i + j)
        return deg

    def evaluate(self, x, y):
        """Horner in y, then in x; x and y may be scalars or series."""
        acc = None
        for row in reversed(self.coeffs):
            inner = None
            for c in reversed(row):
                inner = c if inner is None else inner * x + c
            if inner is None:
                inner = 0
            acc = inner if acc is None else acc * y + inner
        return acc if acc is not None else 0

    def dx(self):
        return BivariatePoly([[c * i for i, c in enumerate(row)][1:] or [0]
                              for row in self.coeffs])

    def dy(self):
        return BivariatePoly([[c * j for c in row]
                              for j, row in enumerate(self.coeffs)][1:]
                             or [[0]])

    def infinity_chart(self):
        """Coefficients of s^d Q(1/s, w/s) as a polynomial in (s, w), with
        d the y-degree; requires total degree <= d."""
        d = self.y_degree()
        out = [[0] * (d + 1) for _ in range(d + 1)]   # out[j][k]: w^j s^k
        for j, row in enumerate(self.coeffs):
            for i, c in enumerate(row):
                if not c:
                    continue
                k = d - i - j
                if k < 0:
                    raise ChartError(
                        f"monomial x^{i} y^{j} exceeds total degree {d}")
                out[j][k] += c
        return BivariatePoly(out)   # variables: x -> s, y -> w

    def leading_form_in_w(self):
        """The univariate polynomial whose roots are the y/x values of the
        points at infinity (coefficient list, ascending)."""
        inf = self.infinity_chart()
        return [row[0] if row else 0 for row in inf.coeffs]

    def map_coefficients(self, f):
        return BivariatePoly([[f(c) for c in row] for row in self.coeffs])

    def __repr__(self):
        terms = []
        for j, row in enumerate(self.coeffs):
            for i, c in enumerate(row):
                if c:
                    terms.append(f"({c})*x^{i}*y^{j}")
        return " + ".join(terms) or "0"


class PlaneCurve:
    """Q(x, y) = 0, monic in y."""

    def __init__(self, Q):
        if not isinstance(Q, BivariatePoly):
            Q = BivariatePoly(Q)
        self.Q = Q
        self.Qx = Q.dx()
        self.Qy = Q.dy()
        self.degree = Q.y_degree()

    def validate(self):
        """Structural checks; raises ChartError with a specific complaint."""
        top = self.Q.coeffs[-1]
        if len(top) != 1 or top[0] != 1:
            raise ChartError("model is not monic in y")
        if self.Q.total_degree() > self.degree:
            raise ChartError("total degree exceeds the y-degree: the "
                             "standard chart at infinity does not close up")
        lead = self.Q.leading_form_in_w()
        if _squarefree_discriminant_vanishes(lead):
            raise ChartError("leading form has repeated roots: points at "
                             "infinity are not separated")
        if _affine_singular(self.Q):
            raise ChartError("affine model is singular")
        return True

    def contains(self, x, y):
        return self.Q.evaluate(x, y) == 0

    # -- local branches

    def site_at_affine(self, x0, y0, terms, check=True):
        """Branch through (x0, y0) parametrised by t = x - x0 (needs a
        nonvanishing y-derivative there)."""
        return Site._affine_x(self, x0, y0, terms, check)

    def site_at_vertical(self, x0, y0, terms, check=True):
        """Branch through (x0, y0) parametrised by t = y - y0 (needs a
        nonvanishing x-derivative; used where the x-coordinate ramifies)."""
        return Site._affine_y(self, x0, y0, terms, check)

    def site_at_infinity(self, w0, terms):
        """Branch at the infinite point with y/x -> w0, parametrised by
        s = 1/x."""
        return Site._infinite(self, w0, terms)


def _is_invertible(c):
    if isinstance(c, PadicElement):
        return c.unit != 0 and c.v == 0
    if isinstance(c, NumberFieldElement):
        return not c.is_zero()
    return c != 0


def _branch_newton(F, Fz, fixed_series, z0, terms):
    """Solve F(fixed, z) = 0 for a series z(t) with z(0) = z0 by Newton
    iteration with doubling working window."""
    z = TruncatedSeries.constant(z0, 1)
    win = 1
    while win < terms:
        win = min(2 * win, terms)
        z = z.truncate(win) if z.trunc is not INF else z
        z = TruncatedSeries(list(z.coeffs), z.order, win)
        fs = fixed_series.truncate(win + 2)
        val = F.evaluate(fs, z)
        dval = Fz.evaluate(fs, z)
        z = z - val / dval
    return z.truncate(terms)


class Site:
    """One local branch with its coordinate series.

    Attributes: x_series, y_series (Laurent series in the parameter),
    dx_dt (derivative of x), and the curve.  Differential forms
    N(x,y) dx / Q_y(x,y) expand via form_series.
    """

    def __init__(self, curve, x_series, y_series, dx_dt, label):
        self.curve = curve
        self.x_series = x_series
        self.y_series = y_series
        self.dx_dt = dx_dt
        self.label = label
        self._qy = None
        self._anti = {}

    @classmethod
    def _affine_x(cls, curve, x0, y0, terms, check=True):
        if check and not _is_invertible(curve.Qy.evaluate(x0, y0)):
            raise ChartError(f"y-derivative vanishes at {x0, y0}: the "
                             f"x-coordinate is not a parameter there")
        t = TruncatedSeries([x0 * 0 + 0, x0 * 0 + 1], 0, terms)
        xs = t + TruncatedSeries.constant(x0, terms)
        ys = _branch_newton(curve.Q, curve.Qy, xs, y0, terms)
        one = TruncatedSeries.constant(x0 * 0 + 1, terms)
        return cls(curve, xs, ys, one, f"affine({x0},{y0})")

    @classmethod
    def _affine_y(cls, curve, x0, y0, terms, check=True):
        if check and not _is_invertible(curve.Qx.evaluate(x0, y0)):
            raise ChartError(f"x-derivative vanishes at {x0, y0}: the "
                             f"y-coordinate is not a parameter there")
        t = TruncatedSeries([y0 * 0 + 0, y0 * 0 + 1], 0, terms)
        ys = t + TruncatedSeries.constant(y0, terms)
        # swap the roles of the variables for the Newton solve
        Qs = BivariatePoly(list(map(list, zip(
            *[r + (0,) * (curve.Q.x_degree() + 1 - len(r))
              for r in curve.Q.coeffs]))))
        Qsx = Qs.dy()   # derivative in the original x
        xs = _branch_newton(Qs, Qsx, ys, x0, terms)
        dx = xs.derivative()
        return cls(curve, xs, ys, dx, f"vertical({x0},{y0})")

    @classmethod
    def _infinite(cls, curve, w0, terms):
        inf = curve.Q.infinity_chart()
        inf_w = inf.dy()
        if not _is_invertible(inf_w.evaluate(w0 * 0, w0)):
            raise ChartError(f"point at infinity w={w0} is ramified in the "
                             f"standard chart")
        s = TruncatedSeries([w0 * 0 + 0, w0 * 0 + 1], 0, terms)
        ws = _branch_newton(inf, inf_w, s, w0, terms)
        xs = s.inverse()                     # x = 1/s
        ys = ws * xs                         # y = w/s
        dx = -(xs * xs)                      # dx = -s^(-2) ds
        return cls(curve, xs, ys, dx, f"infinity(w={w0})")

    def function_series(self, poly):
        """Expansion of a polynomial function in x, y along the branch."""
        if not isinstance(poly, BivariatePoly):
            poly = BivariatePoly(poly)
        return poly.evaluate(self.x_series, self.y_series)

    def _qy_series(self):
        if self._qy is None:
            self._qy = self.curve.Qy.evaluate(self.x_series, self.y_series)
        return self._qy

    def form_series(self, numerator):
        """Expansion of N(x,y) dx / Q_y in the local parameter (the series
        multiplying dt)."""
        num = self.function_series(numerator)
        return num * self.dx_dt / self._qy_series()

    def residue(self, series):
        return series.coefficient(-1)

    def form_residue(self, numerator):
        return self.residue(self.form_series(numerator))


def _squarefree_discriminant_vanishes(coeffs):
    """True when the univariate polynomial has a repeated complex root."""
    import sympy
    w = sympy.Symbol("w")
    poly = sum(sympy.Rational(c) * w ** i for i, c in enumerate(coeffs))
    return sympy.discriminant(sympy.Poly(poly, w)) == 0


def _affine_singular(Q):
    """True when Q = Q_x = Q_y = 0 has a common complex solution."""
    import sympy
    x, y = sympy.symbols("x y")
    expr = sum(sympy.Rational(c) * x ** i * y ** j
               for j, row in enumerate(Q.coeffs) for i, c in enumerate(row))
    system = [expr, expr.diff(x), expr.diff(y)]
    basis = sympy.groebner(system, x, y, order="lex")
    return 1 not in basis.exprs


def infinite_slopes(curve):
    """Every slope w = y/x at infinity, with splitting data.

    Rational slopes come back as Fractions; each irreducible quadratic
    factor of the leading form contributes its two conjugate roots as
    elements of a fresh degree-2 number field.  Factors of degree three or
    more are not handled (no fixture needs them) and raise ChartError.
    """
    import sympy

    from .arith import NumberField

    lead = curve.Q.leading_form_in_w()
    w = sympy.Symbol("w")
    poly = sympy.Poly(
        sum(sympy.Rational(c) * w ** i for i, c in enumerate(lead)), w)
    slopes = []
    for factor, mult in poly.factor_list()[1]:
        if mult != 1:
            raise ChartError("leading form has a repeated factor")
        monic = factor.monic()
        coeffs = [Fraction(int(c.p), int(c.q))
                  for c in (sympy.Rational(q) for q in monic.all_coeffs())]
        if len(coeffs) == 2:
            slopes.append(-coeffs[1])
        elif len(coeffs) == 3:
            field = NumberField([coeffs[2], coeffs[1]])
            root = field.gen()
            slopes.extend([root, -coeffs[1] - root])
        else:
            raise ChartError("slope of degree >= 3 at infinity")
    return slopes


def second_kind_cup_gram(curve, numerators, slopes, terms=24):
    """Cup-product Gram matrix of second-kind forms.

    Entry (i, j) is the sum over the points at infinity of the residue of
    (int omega_i) * omega_j, the primitive taken locally with zero
    constant term (any constant drops out because omega_j has no
    residues).  The caller supplies every slope w = y/x at infinity, over
    a field splitting the leading form; the count and membership are
    checked, so a forgotten conjugate cannot silently skew the pairing.
    """
    from .linser import formal_antiderivative

    lead = curve.Q.leading_form_in_w()
    if len(slopes) != curve.degree:
        raise ChartError(f"need all {curve.degree} slopes at infinity, "
                         f"got {len(slopes)}")
    for w0 in slopes:
        value = sum((w0 ** i) * c for i, c in enumerate(lead) if c)
        if not (value == 0 or getattr(value, "is_zero", lambda: False)()):
            raise ChartError(f"{w0} is not a slope at infinity")
    n = len(numerators)
    gram = [[0] * n for _ in range(n)]
    for w0 in slopes:
        site = curve.site_at_infinity(w0, terms)
        forms = [site.form_series(num) for num in numerators]
        prims = [formal_antiderivative(f) for f in forms]
        for i in range(n):
            for j in range(n):
                gram[i][j] = gram[i][j] + (prims[i] * forms[j]).coefficient(-1)
    return gram


# ---------------------------------------------------------------------------
# residue disks over F_p


class ResidueDisk:
    """One mod-p point with its local classification.

    kind is one of:
      * "good": affine, the x-coordinate is a parameter (y-derivative unit)
      * "vertical": affine, the x-coordinate ramifies but y works
      * "infinite": at infinity, unramified in the standard chart
    """

    __slots__ = ("kind", "x0", "y0", "w0")

    def __init__(self, kind, x0=None, y0=None, w0=None):
        self.kind = kind
        self.x0, self.y0, self.w0 = x0, y0, w0

    def __repr__(self):
        if self.kind == "infinite":
            return f"ResidueDisk(infinite, w={self.w0})"
        return f"ResidueDisk({self.kind}, ({self.x0},{self.y0}))"


def enumerate_residue_disks(curve, p):
    """All F_p-points of the projective model, classified.

    Affine points come from factoring Q(x0, y) over F_p for each x0; the
    points at infinity are the F_p-roots of the leading form.  A point
    where both partial derivatives vanish mod p would be a singular
    reduction and raises ChartError.
    """
    disks = []
    for x0 in range(p):
        for y0 in range(p):
            q = _eval_mod(curve.Q, x0, y0, p)
            if q != 0:
                continue
            qy = _eval_mod(curve.Qy, x0, y0, p)
            if qy != 0:
                disks.append(ResidueDisk("good", x0, y0))
                continue
            qx = _eval_mod(curve.Qx, x0, y0, p)
            if qx == 0:
                raise ChartError(
                    f"reduction mod {p} is singular at ({x0},{y0})")
            disks.append(ResidueDisk("vertical", x0, y0))
    lead = curve.Q.leading_form_in_w()
    lead_d = [c * i for i, c in enumerate(lead)][1:]
    for w0 in range(p):
        lv = _eval_poly_mod(lead, w0, p)
        if lv != 0:
            continue
        if _eval_poly_mod(lead_d, w0, p) == 0:
            raise ChartError(f"infinite point w={w0} ramifies mod {p}")
        disks.append(ResidueDisk("infinite", w0=w0))
    return disks


def _eval_mod(poly, x0, y0, p):
    acc = 0
    for row in reversed(poly.coeffs):
        inner = 0
        for c in reversed(row):
            inner = (inner * x0 + _coeff_mod(c, p)) % p
        acc = (acc * y0 + inner) % p
    return acc


def _coeff_mod(c, p):
    c = Fraction(c)
    den = c.denominator
    if den % p == 0:
        raise ChartError(f"coefficient {c} has denominator divisible by {p}")
    return c.numerator * pow(den, -1, p) % p


def _eval_poly_mod(coeffs, x0, p):
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x0 + _coeff_mod(c, p)) % p
    return acc
