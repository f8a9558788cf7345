"""Truncated Laurent series, small linear algebra, and p-adic root finding.

The series type is generic in its coefficient domain: exact work uses
Fraction or NumberFieldElement coefficients, local work uses PadicElement.
A series knows the window of exponents it is trusted on: ``order`` is the
lowest stored exponent (negative for a finite pole part) and ``trunc`` is
the first unknown exponent, so the tail is O(t^trunc).  Exact polynomials
use trunc = infinity.

Root finding follows the Newton polygon of the coefficient valuations:
each admissible segment is rescaled to unit roots, reduced mod p, and the
residue roots are Hensel-lifted against the full series.  Coefficients
that are merely zero to working precision are checked to lie strictly
above the polygon, otherwise the shape is ambiguous and we refuse.
"""

import math
import warnings
from fractions import Fraction

from .arith import (NumberFieldElement, PadicElement, PrecisionError,
                    QchabError, _pivot_quality, valuation)

INF = math.inf


class SingularMatrixError(QchabError):
    pass


class ResidueError(QchabError):
    """Antiderivative requested for a series with a nonzero t^(-1) term."""


class WildRamificationWarning(UserWarning):
    """A Newton polygon segment has non-integral slope; its roots live in a
    ramified extension and are not reported."""


def _exact_zero(c):
    if isinstance(c, (int, Fraction)):
        return c == 0
    if isinstance(c, NumberFieldElement):
        # exact only when the coordinates are themselves exact; a field
        # element with p-adic coordinates can merely look like zero
        return all(isinstance(q, (int, Fraction)) and q == 0
                   for q in c.coeffs)
    return False


def _apparent_zero(c):
    if isinstance(c, PadicElement):
        return c.unit == 0
    if isinstance(c, (int, Fraction)):
        return c == 0
    if hasattr(c, "is_zero"):
        return c.is_zero()
    return c == 0


class TruncatedSeries:
    """Coefficients of t^order .. t^(trunc-1); the rest is O(t^trunc)."""

    __slots__ = ("coeffs", "order", "trunc")

    def __init__(self, coeffs, order=0, trunc=None):
        coeffs = list(coeffs)
        if trunc is None:
            trunc = order + len(coeffs)
        if trunc is not INF:
            coeffs = coeffs[:max(trunc - order, 0)]
            coeffs += [0] * (trunc - order - len(coeffs))
        # tighten the window past exact leading zeros
        while coeffs and _exact_zero(coeffs[0]):
            coeffs.pop(0)
            order += 1
        while coeffs and _exact_zero(coeffs[-1]) and trunc is INF:
            coeffs.pop()
        if not coeffs and trunc is INF:
            order = 0
        self.coeffs = tuple(coeffs)
        self.order = order
        self.trunc = trunc

    @classmethod
    def zero(cls, trunc=INF):
        return cls([], 0, trunc)

    @classmethod
    def constant(cls, c, trunc=INF):
        return cls([c], 0, trunc)

    @classmethod
    def variable(cls, trunc=INF):
        return cls([0, 1], 0, trunc)

    def coefficient(self, n):
        if self.trunc is not INF and n >= self.trunc:
            raise PrecisionError(
                f"coefficient of t^{n} beyond truncation O(t^{self.trunc})")
        if n < self.order or n - self.order >= len(self.coeffs):
            return 0
        return self.coeffs[n - self.order]

    def valuation(self):
        """t-adic valuation from the stored window (exact zeros stripped)."""
        for k, c in enumerate(self.coeffs):
            if not _apparent_zero(c):
                return self.order + k
        return self.trunc

    def is_zero(self):
        return all(_apparent_zero(c) for c in self.coeffs)

    # -- ring operations

    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            return other
        return TruncatedSeries.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        trunc = min(self.trunc, other.trunc)
        order = min(self.order if self.coeffs else trunc,
                    other.order if other.coeffs else trunc)
        if trunc is INF:
            top = max(self.order + len(self.coeffs),
                      other.order + len(other.coeffs), order)
        else:
            top = trunc
        out = []
        for n in range(order, top):
            a = self.coeffs[n - self.order] \
                if self.order <= n < self.order + len(self.coeffs) else 0
            b = other.coeffs[n - other.order] \
                if other.order <= n < other.order + len(other.coeffs) else 0
            if isinstance(a, int) and a == 0:
                out.append(b)
            elif isinstance(b, int) and b == 0:
                out.append(a)
            else:
                out.append(a + b)
        return TruncatedSeries(out, order, trunc)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-c for c in self.coeffs], self.order, self.trunc)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries([c * other for c in self.coeffs],
                                   self.order, self.trunc)
        if not self.coeffs or not other.coeffs:
            trunc = min(self.trunc + (other.order if other.coeffs else 0),
                        other.trunc + (self.order if self.coeffs else 0)) \
                if (self.trunc is not INF or other.trunc is not INF) else INF
            return TruncatedSeries([], 0, trunc)
        order = self.order + other.order
        if self.trunc is INF and other.trunc is INF:
            trunc = INF
            top = order + len(self.coeffs) + len(other.coeffs) - 1
        else:
            trunc = min(self.trunc + other.order, other.trunc + self.order)
            top = trunc
        out = [0] * (top - order)
        for i, a in enumerate(self.coeffs):
            if _exact_zero(a):
                continue
            for j, b in enumerate(other.coeffs):
                k = i + j
                if k >= len(out):
                    break
                if _exact_zero(b):
                    continue
                cur = out[k]
                out[k] = a * b if isinstance(cur, int) and cur == 0 \
                    else cur + a * b
        return TruncatedSeries(out, order, trunc)

    def __rmul__(self, other):
        return self * other

    def inverse(self):
        """Reciprocal; the lowest coefficient must be invertible."""
        if not self.coeffs or _apparent_zero(self.coeffs[0]):
            raise ZeroDivisionError("series has no invertible lowest term")
        if self.trunc is INF:
            raise PrecisionError("cannot invert an exact polynomial to "
                                 "infinite order: truncate first")
        n = self.trunc - self.order
        a = self.coeffs
        c0inv = _inv_scalar(a[0])
        out = [c0inv]
        for k in range(1, n):
            acc = None
            for j in range(1, min(k, len(a) - 1) + 1):
                t = a[j] * out[k - j]
                acc = t if acc is None else acc + t
            out.append(-c0inv * acc if acc is not None else
                       (a[0] * 0 if not isinstance(a[0], (int, Fraction))
                        else 0))
        return TruncatedSeries(out, -self.order, self.trunc - 2 * self.order)

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.inverse()
        return self * _inv_scalar(other)

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n):
        if n < 0:
            return self.inverse() ** (-n)
        out = TruncatedSeries.constant(1, self.trunc if n == 0 else INF)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    # -- calculus

    def derivative(self):
        out, order = [], self.order - 1
        for k, c in enumerate(self.coeffs):
            n = self.order + k
            out.append(c * n)
        trunc = INF if self.trunc is INF else self.trunc - 1
        return TruncatedSeries(out, order, trunc)

    def evaluate(self, x):
        """Horner evaluation of the stored window at a scalar."""
        acc = None
        for c in reversed(self.coeffs):
            acc = c if acc is None else acc * x + c
        if acc is None:
            return 0 * x
        if self.order:
            acc = acc * x ** self.order if self.order > 0 \
                else acc * _inv_scalar(x) ** (-self.order)
        return acc

    def map_coefficients(self, f):
        return TruncatedSeries([f(c) for c in self.coeffs],
                               self.order, self.trunc)

    def truncate(self, trunc):
        if trunc >= self.trunc:
            return self
        return TruncatedSeries(self.coeffs[:max(trunc - self.order, 0)],
                               self.order, trunc)

    def shift(self, k):
        """Multiply by t^k."""
        return TruncatedSeries(self.coeffs, self.order + k,
                               self.trunc if self.trunc is INF
                               else self.trunc + k)

    def __eq__(self, other):
        other = self._coerce(other)
        return (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        parts = []
        for k, c in enumerate(self.coeffs[:6]):
            if not _apparent_zero(c):
                parts.append(f"({c})*t^{self.order + k}")
        body = " + ".join(parts) if parts else "0"
        more = " + ..." if len(self.coeffs) > 6 else ""
        tail = f" + O(t^{self.trunc})" if self.trunc is not INF else ""
        return body + more + tail


def _inv_scalar(c):
    if isinstance(c, int):
        return Fraction(1, c)
    if isinstance(c, Fraction):
        return 1 / c
    return c.inverse()


def formal_antiderivative(s):
    """Termwise antiderivative with zero constant term.

    The t^(-1) coefficient must vanish; when it is nonzero to working
    precision this raises ResidueError, since no Laurent antiderivative
    exists.  Dividing the t^(n) coefficient by n+1 costs p-adic precision
    exactly when p divides n+1, which the coefficient arithmetic records.
    """
    res = None
    if s.order <= -1 < s.order + len(s.coeffs):
        res = s.coeffs[-1 - s.order]
        if not _apparent_zero(res):
            raise ResidueError(
                f"nonzero residue {res!r}: no single-valued antiderivative")
    out, order = [], s.order + 1
    for k, c in enumerate(s.coeffs):
        n = s.order + k
        if n == -1:
            out.append(0)   # apparent zero integrates to zero
            continue
        out.append(c * Fraction(1, n + 1) if isinstance(c, (int, Fraction))
                   else c / (n + 1))
    trunc = INF if s.trunc is INF else s.trunc + 1
    r = TruncatedSeries(out, order, trunc)
    # fix the constant term to zero
    if r.order <= 0:
        return r - TruncatedSeries.constant(r.coefficient(0))
    return r


# ---------------------------------------------------------------------------
# matrices and linear solving


class Matrix:
    """Dense row-major matrix over any coefficient domain."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        self.rows = [list(r) for r in rows]

    @classmethod
    def identity(cls, n, one=1, zero=0):
        return cls([[one if i == j else zero for j in range(n)]
                    for i in range(n)])

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def ncols(self):
        return len(self.rows[0]) if self.rows else 0

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def transpose(self):
        return Matrix(list(map(list, zip(*self.rows))))

    def map(self, f):
        return Matrix([[f(e) for e in row] for row in self.rows])

    def __add__(self, other):
        return Matrix([[a + b for a, b in zip(ra, rb)]
                       for ra, rb in zip(self.rows, other.rows)])

    def __sub__(self, other):
        return Matrix([[a - b for a, b in zip(ra, rb)]
                       for ra, rb in zip(self.rows, other.rows)])

    def __mul__(self, other):
        if isinstance(other, Matrix):
            bt = list(zip(*other.rows))
            return Matrix([[_dot(row, col) for col in bt]
                           for row in self.rows])
        if isinstance(other, (list, tuple)):
            return [_dot(row, other) for row in self.rows]
        return Matrix([[e * other for e in row] for row in self.rows])

    def __rmul__(self, other):
        return Matrix([[other * e for e in row] for row in self.rows])

    def __eq__(self, other):
        return isinstance(other, Matrix) and self.nrows == other.nrows \
            and all(a == b for ra, rb in zip(self.rows, other.rows)
                    for a, b in zip(ra, rb))

    __hash__ = None

    def __repr__(self):
        return "Matrix(" + ", ".join(repr(r) for r in self.rows) + ")"


def _dot(row, col):
    acc = None
    for a, b in zip(row, col):
        if _exact_zero(a) or _exact_zero(b):
            continue
        t = a * b
        acc = t if acc is None else acc + t
    if acc is None:
        return 0
    return acc


def solve_linear_system(A, b):
    """Solve A x = b by Gaussian elimination with valuation pivoting.

    A is a Matrix or list of rows; b a vector or list of vectors (columns).
    Exact coefficients pivot on any nonzero entry; p-adic coefficients
    pivot on the entry of least valuation, and the division records any
    precision spent.  Raises SingularMatrixError over exact domains and
    PrecisionError when every candidate pivot is zero to working
    precision (the system cannot be certified either way).
    """
    rows = A.rows if isinstance(A, Matrix) else [list(r) for r in A]
    n = len(rows)
    multi = isinstance(b[0], (list, tuple))
    rhs = [list(col) for col in b] if multi else [list(b)]
    m = len(rows[0]) if rows else 0
    if n != m:
        raise ValueError("only square systems are solved here")
    M = [rows[i][:] + [col[i] for col in rhs] for i in range(n)]
    width = n + len(rhs)
    padic_seen = any(isinstance(e, PadicElement) for row in M for e in row)
    for col in range(n):
        best, bq = None, None
        for r in range(col, n):
            q = _pivot_quality(M[r][col])
            if q is not None and (bq is None or q > bq):
                best, bq = r, q
        if best is None:
            if padic_seen:
                raise PrecisionError(
                    f"all pivot candidates in column {col} vanish to "
                    f"working precision")
            raise SingularMatrixError(f"column {col} has no nonzero pivot")
        M[col], M[best] = M[best], M[col]
        piv = M[col][col]
        pinv = _inv_scalar(piv)
        M[col] = [e * pinv for e in M[col]]
        for r in range(n):
            if r == col:
                continue
            f = M[r][col]
            if _exact_zero(f):
                continue
            M[r] = [e - f * g for e, g in zip(M[r], M[col])]
    sols = [[M[i][n + k] for i in range(n)] for k in range(len(rhs))]
    return sols if multi else sols[0]


def solve_rectangular(A, b):
    """Exact Gauss-Jordan elimination for a possibly overdetermined system.

    Entries must be int or Fraction.  Returns (solution, kernel_basis):
    one particular solution with every free variable set to zero, and a
    basis of the homogeneous kernel (empty when the solution is unique).
    Raises SingularMatrixError when the equations are inconsistent.
    """
    rows = A.rows if isinstance(A, Matrix) else [list(r) for r in A]
    m = len(rows)
    n = len(rows[0]) if rows else 0
    if any(len(r) != n for r in rows) or len(b) != m:
        raise ValueError("ragged system")
    M = [[Fraction(e) for e in rows[i]] + [Fraction(b[i])] for i in range(m)]
    pivots = []
    r = 0
    for col in range(n):
        pr = next((i for i in range(r, m) if M[i][col] != 0), None)
        if pr is None:
            continue
        M[r], M[pr] = M[pr], M[r]
        piv = M[r][col]
        M[r] = [e / piv for e in M[r]]
        for i in range(m):
            if i != r and M[i][col] != 0:
                f = M[i][col]
                M[i] = [e - f * g for e, g in zip(M[i], M[r])]
        pivots.append(col)
        r += 1
        if r == m:
            break
    if any(M[i][n] != 0 for i in range(r, m)):
        raise SingularMatrixError("inconsistent system")
    solution = [Fraction(0)] * n
    for i, col in enumerate(pivots):
        solution[col] = M[i][n]
    kernel = []
    pivot_at = {col: i for i, col in enumerate(pivots)}
    for free in range(n):
        if free in pivot_at:
            continue
        vec = [Fraction(0)] * n
        vec[free] = Fraction(1)
        for col, i in pivot_at.items():
            vec[col] = -M[i][free]
        kernel.append(vec)
    return solution, kernel


class LUSolution:
    """Outcome of one PrimePowerLU solve.

    ``vector`` holds p^shift times the true solution, reduced mod p^K, so
    a nonzero shift flags a non-integral solution.  ``loss`` bounds the
    absolute precision spent on the worst coordinate and
    ``residual_valuation`` is the valuation of the worst consistency row
    (math.inf when the system closed exactly).
    """

    __slots__ = ("vector", "shift", "loss", "residual_valuation")

    def __init__(self, vector, shift, loss, residual_valuation):
        self.vector = vector
        self.shift = shift
        self.loss = loss
        self.residual_valuation = residual_valuation


class PrimePowerLU:
    """Factor an integer matrix modulo p^K once, then solve many sides.

    Pivoting is by valuation: any remaining unit entry wins, otherwise an
    entry of minimal valuation.  With that rule every elimination
    multiplier is a p-adic integer and row operations stay exact mod p^K.
    Dividing by a pivot of valuation v at solve time leaves the affected
    coordinate known mod p^(K-v) only; the accumulated worst case is
    reported as ``loss`` so callers can budget guard digits.  Rows that
    never carry a pivot become consistency checks on the right-hand side.
    """

    def __init__(self, rows, p, K):
        self.p = p
        self.K = K
        self.M = p ** K
        A = [[e % self.M for e in row] for row in rows]
        self.nrows = len(A)
        self.ncols = len(A[0]) if A else 0
        if any(len(row) != self.ncols for row in A):
            raise ValueError("ragged matrix")
        self.ops = []
        self.pivots = []
        free_rows = list(range(self.nrows))
        free_cols = list(range(self.ncols))
        while free_rows and free_cols:
            pick = self._find_pivot(A, free_rows, free_cols)
            if pick is None:
                break
            i, j, v = pick
            unit = A[i][j] // self.p ** v
            inv = pow(unit, -1, self.p ** (K - v))
            for i2 in free_rows:
                if i2 == i or A[i2][j] == 0:
                    continue
                q = A[i2][j] // self.p ** v * inv % (self.p ** (K - v))
                if q:
                    row2, row1 = A[i2], A[i]
                    for c in free_cols:
                        if row1[c]:
                            row2[c] = (row2[c] - q * row1[c]) % self.M
                    self.ops.append((i2, i, q))
            self.pivots.append((i, j, v, inv))
            free_rows.remove(i)
            free_cols.remove(j)
        self.spare_rows = tuple(free_rows)
        self.urows = {i: tuple(A[i]) for i, _, _, _ in self.pivots}

    @property
    def rank(self):
        return len(self.pivots)

    @property
    def max_pivot_valuation(self):
        return max((v for _, _, v, _ in self.pivots), default=0)

    def _find_pivot(self, A, free_rows, free_cols):
        best = None
        for i in free_rows:
            row = A[i]
            for j in free_cols:
                e = row[j]
                if e == 0:
                    continue
                if e % self.p:
                    return i, j, 0
                v = valuation(e, self.p)
                if best is None or v < best[2]:
                    best = (i, j, v)
        return best

    def solve(self, rhs):
        """Particular solution with free coordinates set to zero."""
        if len(rhs) != self.nrows:
            raise ValueError("right-hand side has wrong length")
        b = [e % self.M for e in rhs]
        for i2, i, q in self.ops:
            if b[i]:
                b[i2] = (b[i2] - q * b[i]) % self.M
        residual = INF
        for i in self.spare_rows:
            if b[i]:
                residual = min(residual, valuation(b[i], self.p))
        shift = 0
        while True:
            x = [0] * self.ncols
            deficit = 0
            for i, j, v, inv in reversed(self.pivots):
                row = self.urows[i]
                num = b[i] * self.p ** shift % self.M
                for i2, j2, _, _ in self.pivots:
                    if j2 != j and x[j2] and row[j2]:
                        num = (num - row[j2] * x[j2]) % self.M
                if v:
                    if num % self.p ** v:
                        deficit = v - valuation(num, self.p)
                        break
                    num //= self.p ** v
                x[j] = num * inv % self.p ** (self.K - v)
            if not deficit:
                break
            shift += deficit
            if shift > self.K:
                raise PrecisionError("solution needs more than p^%d rescaling"
                                     % self.K)
        loss = self.max_pivot_valuation + shift
        return LUSolution(x, shift, loss, residual)


# ---------------------------------------------------------------------------
# Newton polygon root finding


def _lower_hull(points):
    """Vertices of the lower convex hull, by increasing abscissa."""
    pts = sorted(points)
    hull = []
    for x, y in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # keep only right turns (convex from below)
            if (y2 - y1) * (x - x2) >= (y - y2) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append((x, y))
    return hull


def _hull_value(hull, n):
    """Height of the piecewise-linear hull at abscissa n (inside its span)."""
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        if x1 <= n <= x2:
            return y1 + Fraction(y2 - y1, x2 - x1) * (n - x1)
    return None


def newton_polygon_roots(s, slope_floor=0, tail_floor=None, _depth=0):
    """All roots of a p-adic series with valuation >= slope_floor.

    Returns a list of (root, multiplicity, certified) triples where the
    root is a PadicElement and |series(root)| <= p^(-certified).  The
    series must have PadicElement coefficients and no pole part.  When a
    coefficient is zero to working precision the polygon is only trusted
    if that coefficient cannot dent it; otherwise PrecisionError.

    Segments of non-integral slope hold roots in ramified extensions;
    they trigger WildRamificationWarning and are skipped.

    ``tail_floor(n)``, when given, lower-bounds the valuation of the
    unknown coefficients at exponents n >= trunc; it both guards against
    phantom extra roots and caps the certified precision.  Without it the
    tail is taken to be exactly zero.
    """
    coeffs = list(s.coeffs)
    if s.order < 0:
        raise ValueError("root finding expects a series without pole part")
    p = None
    for c in coeffs:
        if isinstance(c, PadicElement):
            p = c.p
            break
    if p is None:
        raise ValueError("newton_polygon_roots needs p-adic coefficients")

    known = []
    for k, c in enumerate(coeffs):
        n = s.order + k
        if isinstance(c, PadicElement) and c.unit != 0:
            known.append((n, c.v))
    if not known:
        raise PrecisionError(
            "series is zero to working precision: no roots certifiable")

    hull = _lower_hull(known)
    n_first, v_first = hull[0]
    n_last, v_last = hull[-1]

    # coefficients that are zero to precision must sit strictly above the
    # polygon (or above its admissible right extension)
    zero_min_N = None
    for k, c in enumerate(coeffs):
        n = s.order + k
        if not (isinstance(c, PadicElement) and c.unit == 0):
            continue
        if n < n_first:
            zero_min_N = c.N if zero_min_N is None else min(zero_min_N, c.N)
            continue
        if n <= n_last:
            h = _hull_value(hull, n)
            if c.N <= h:
                raise PrecisionError(
                    f"coefficient of t^{n} is O(p^{c.N}) but the Newton "
                    f"polygon requires knowledge below p^{h}")
        else:
            guard = v_last + (n - n_last) * (-slope_floor)
            if c.N <= guard:
                raise PrecisionError(
                    f"coefficient of t^{n} is O(p^{c.N}): could extend the "
                    f"polygon with an admissible slope")
    if tail_floor is not None and s.trunc is not INF:
        # unknown tail coefficients must also sit above the extension
        for n in range(s.trunc, s.trunc + 4 * (n_last + 1) + 64):
            if tail_floor(n) <= v_last + (n - n_last) * (-slope_floor):
                raise PrecisionError(
                    f"truncation too shallow: tail coefficient t^{n} "
                    f"(valuation >= {tail_floor(n)}) could reach the polygon")

    roots = []

    # exponents below the first vertex are all zero (exactly, or to
    # precision): they form a root at the disk centre
    if n_first > 0:
        cert = None
        for k in range(min(n_first - s.order, len(coeffs))):
            c = coeffs[k]
            if isinstance(c, PadicElement):
                n = s.order + k
                this = Fraction(c.N - v_first, n_first - n)
                cert = this if cert is None else min(cert, this)
        if cert is None:
            cert = Fraction(10 ** 6)   # exact zeros below the vertex
        cert = max(int(math.floor(cert)), 0)
        roots.append((PadicElement.zero(p, max(cert, 1)), n_first, cert))

    # walk the hull segments
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        lam = Fraction(y1 - y2, x2 - x1)   # root valuation on this segment
        if lam < slope_floor:
            continue
        if lam.denominator != 1:
            warnings.warn(
                f"segment of width {x2 - x1} with slope {-lam} has "
                f"ramified roots (skipped)", WildRamificationWarning)
            continue
        lam = int(lam)
        # residual polynomial modulo p
        rbar = []
        for n in range(x1, x2 + 1):
            c = s.coefficient(n)
            want = y1 - lam * (n - x1)
            if isinstance(c, PadicElement) and c.unit != 0 and c.v == want:
                rbar.append(c.unit % p)
            else:
                rbar.append(0)
        fac = _fp_roots(rbar, p)
        for rho, mult in fac:
            if mult == 1:
                root, cert = _hensel(s, rho, lam, p, tail_floor)
                roots.append((root, 1, cert))
                continue
            # clustered residue root: recentre and recurse, or report the
            # cluster with whatever evaluation certifies
            centre = PadicElement(p, lam, rho, lam + 1)
            sub = _recentre(s, rho, lam, p)
            inner = None
            if _depth < 24:
                try:
                    inner = newton_polygon_roots(sub, 1, tail_floor,
                                                 _depth=_depth + 1)
                except PrecisionError:
                    inner = None
            if inner is None:
                roots.append(_cluster(s, centre, mult, tail_floor))
                continue
            got = 0
            for r2, m2, c2 in inner:
                t = centre + r2 * PadicElement(p, lam, 1,
                                               lam + max(r2.N, 1))
                roots.append((t, m2, c2))
                got += m2
            if got < mult:
                roots.append(_cluster(s, centre, mult - got, tail_floor))
    return roots


def _cluster(s, centre, mult, tail_floor):
    """An unresolved root cluster, certified only by direct evaluation."""
    fx = _eval_with_tail(s, centre, tail_floor)
    cert = fx.N if fx.is_zero() else fx.v
    return (centre, mult, max(cert, 0))


def _fp_roots(rbar, p):
    """Roots in F_p^* of a polynomial given by coefficient list, with
    multiplicities, by exhaustive evaluation and deflation."""
    out = []
    poly = [c % p for c in rbar]
    for rho in range(1, p):
        mult = 0
        while True:
            val = 0
            for c in reversed(poly):
                val = (val * rho + c) % p
            if val != 0 or len(poly) <= 1:
                break
            # synthetic division by (x - rho)
            newp = [0] * (len(poly) - 1)
            carry = 0
            for i in range(len(poly) - 1, 0, -1):
                carry = (poly[i] + carry * rho) % p
                newp[i - 1] = carry
            poly = newp
            mult += 1
        if mult:
            out.append((rho, mult))
    return out


def _eval_with_tail(s, x, tail_floor):
    """Horner value of the known window, with its precision capped by the
    possible size of the unknown tail at x."""
    val = s.evaluate(x)
    if tail_floor is None or s.trunc is INF or x.is_zero():
        return val
    lamx = x.valuation
    best = None
    span = 4 * (s.trunc + 1) + 64
    for n in range(s.trunc, s.trunc + span):
        t = tail_floor(n) + n * lamx
        if best is None or t < best:
            best = t
    if best is None:
        return val
    cap = int(math.floor(best))
    if val.N > cap:
        val = PadicElement(val.p, val.v, val.unit, cap) if val.v < cap \
            else PadicElement.zero(val.p, cap)
    return val


def _hensel(s, rho, lam, p, tail_floor):
    """Lift a simple residue root rho*p^lam against the full series."""
    ds = s.derivative()
    N_avail = min(c.N for c in s.coeffs if isinstance(c, PadicElement))
    N_work = max(N_avail + abs(lam) + 2, lam + 2)
    x = PadicElement(p, lam, rho, N_work)
    last_v = None
    for _ in range(2 * N_work.bit_length() + 8):
        fx = _eval_with_tail(s, x, tail_floor)
        dfx = ds.evaluate(x)
        if fx.is_zero():
            break
        if last_v is not None and fx.v <= last_v:
            break
        last_v = fx.v
        x = x - fx / dfx
    fx = _eval_with_tail(s, x, tail_floor)
    dfx = ds.evaluate(x)
    a = fx.N if fx.is_zero() else fx.v
    b = dfx.v
    cert = a - b
    xout = PadicElement(p, x.v, x.unit, min(x.N, cert)) if x.unit != 0 \
        else PadicElement.zero(p, cert)
    return xout, cert


def _recentre(s, rho, lam, p):
    """The series in w of s(p^lam * (rho + w)), for recursing on clustered
    roots: a Taylor shift by rho composed with scaling by p^lam."""
    n_terms = len(s.coeffs)
    Nmax = max((c.N - c.v for c in s.coeffs
                if isinstance(c, PadicElement)), default=8) + 2 * abs(lam) + 4
    # binomial table mod p^Nmax is implicit: use exact ints via Fraction-free
    shifted = [None] * n_terms
    plam = PadicElement(p, lam, 1, Nmax + abs(lam) + 1)
    # coefficients of u = rho + w substituted into sum c_n (p^lam u)^n
    for k in range(n_terms):
        acc = None
        for idx in range(k, n_terms):
            n = s.order + idx
            c = s.coeffs[idx]
            if isinstance(c, int) and c == 0:
                continue
            term = c * (plam ** n if n else 1) * math.comb(n, k) \
                * (rho ** (n - k))
            acc = term if acc is None else acc + term
        shifted[k] = acc if acc is not None else 0
    return TruncatedSeries(shifted, 0,
                           s.trunc if s.trunc is INF else s.trunc)
