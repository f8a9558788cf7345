"""Frobenius structure of the height connection, and its transport.

The lift machinery hands us the action of Frobenius on the six basis
classes together with exact-part primitives.  What the height pairing
needs is more: the action on the full weighted bundle attached to one
antisymmetric class matrix, which carries an extra row whose entries,
a vector ``g`` and a function ``h``, are pinned down here by requiring
one explicit 1-form to be exact.  Once they are known the structure is
completely explicit, and this module evaluates it three ways:

* at a Teichmueller point, where the Frobenius fixed-point equations
  become finite linear systems (``splitting_at``),
* along a whole good residue disk, as truncated power series in the
  disk parameter (``disk_transport``),
* at points of the single bad disk, through evaluations over ramified
  extensions (``bad_disk_integrals``).

Everything downstream (local heights, the determinant criterion, the
leftover-disk analysis) consumes these three views.
"""

import hashlib
import os
import pickle
import tempfile
from fractions import Fraction

from .arith import (PadicElement, PrecisionError, QchabError, RamifiedElement,
                    teichmueller_lift, valuation)
from .froblift import (DaggerFunction, LiftError, _hensel_root, _padd,
                       _peval, _pmul, _pscale, _psub, _ptaylor, _sadd, _sinv,
                       _smul, _strip, lift_frobenius)
from .hodge import S_SCALE
from .linser import PrimePowerLU

_CACHE_VERSION = 1


class StructureError(QchabError):
    pass


# ---------------------------------------------------------------------------
# dagger-function linear algebra


def _combine_functions(ring, funs, coeffs, const=0):
    """Linear combination of dagger functions at one common shift.

    ``const`` is added to the constant coefficient, already at the stored
    scale.  Terms at equal pole order are merged so the result stays as
    compact as its inputs.
    """
    M = ring.M
    poly = [[] for _ in range(ring.d)]
    levels = {}
    shift = None
    known = None
    for fun, c in zip(funs, coeffs):
        if shift is None:
            shift, known = fun.shift, fun.known
        if fun.shift != shift:
            raise StructureError("cannot combine functions at mixed scales")
        known = min(known, fun.known)
        if c == 0:
            continue
        ci = ring.unit_int(c)
        for j, row in enumerate(fun.poly):
            if row:
                poly[j] = _padd(poly[j], _pscale(row, ci, M), M)
        for S, m in fun.terms:
            slot = levels.setdefault(m, [[] for _ in range(ring.d)])
            for j in range(ring.d):
                if S[j]:
                    slot[j] = _padd(slot[j], _pscale(S[j], ci, M), M)
    if const % M:
        poly[0] = _padd(poly[0], [const % M], M)
    terms = [(S, m) for m, S in sorted(levels.items(), reverse=True)]
    return DaggerFunction([_strip(r) for r in poly], terms, shift, known)


def _rescale_function(ring, fun, target_shift):
    """Bring a dagger function to a larger stored shift."""
    delta = target_shift - fun.shift
    if delta < 0:
        raise StructureError("cannot lower a stored shift")
    if delta == 0:
        return fun
    f = pow(ring.p, delta, ring.M)
    return DaggerFunction([_pscale(r, f, ring.M) for r in fun.poly],
                          [([_pscale(r, f, ring.M) for r in S], m)
                           for S, m in fun.terms],
                          target_shift, min(ring.K, fun.known + delta))


def _antiderivative(ser, n, p, M, lam):
    """Term-wise antiderivative, stored p^lam times the true series.

    The scale absorbs the divisions by p inside 1/(k+1); ``lam`` must be
    at least the largest valuation of any index up to n.
    """
    out = [0] * (n + 1)
    for k in range(min(n, len(ser))):
        c = ser[k]
        if not c:
            continue
        den = k + 1
        v = valuation(den, p)
        if v > lam:
            raise StructureError("antiderivative scale too small")
        out[k + 1] = c * p ** (lam - v) * pow(den // p ** v, -1, M) % M
    return out


def _series_value(ser, t0, M):
    acc = 0
    for c in reversed(ser):
        acc = (acc * t0 + c) % M
    return acc


class Pser:
    """A truncated series whose stored coefficients are p^scale times the
    true ones, with ``prec`` recording the absolute precision of the true
    values.  Just enough arithmetic for assembling height series.
    """

    __slots__ = ("coeffs", "scale", "prec")

    def __init__(self, coeffs, scale, prec):
        self.coeffs = coeffs
        self.scale = scale
        self.prec = prec

    def add(self, other, p, M):
        s = max(self.scale, other.scale)
        a = self.coeffs if self.scale == s else \
            _pscale(self.coeffs, pow(p, s - self.scale, M), M)
        b = other.coeffs if other.scale == s else \
            _pscale(other.coeffs, pow(p, s - other.scale, M), M)
        return Pser(_sadd(a, b, M), s, min(self.prec, other.prec))

    def mul(self, other, n, p, M, penalty=0):
        return Pser(_smul(self.coeffs, other.coeffs, n, M),
                    self.scale + other.scale,
                    min(self.prec, other.prec) - penalty)

    def cmul(self, c, ring):
        if isinstance(c, PadicElement):
            if c.is_zero():
                return Pser([], self.scale, min(self.prec, c.N))
            if c.v < 0:
                lifted = c.unit
                return Pser(_pscale(self.coeffs, lifted, ring.M),
                            self.scale - c.v, min(self.prec, c.N))
            return Pser(_pscale(self.coeffs, c.lift(), ring.M),
                        self.scale, min(self.prec, c.N))
        return Pser(_pscale(self.coeffs, ring.unit_int(c), ring.M),
                    self.scale, self.prec)

    def strip(self, p):
        """Remove the spurious part of the scale that every stored
        coefficient shares, keeping stored = p^scale * true intact."""
        if self.scale <= 0:
            return self
        v = self.scale
        for c in self.coeffs:
            if c:
                v = min(v, valuation(c, p))
            if v == 0:
                return self
        q = p ** v
        return Pser([c // q for c in self.coeffs], self.scale - v, self.prec)

    def constant_padic(self, p):
        c = self.coeffs[0] if self.coeffs else 0
        return PadicElement(p, -self.scale, c, self.prec)


# ---------------------------------------------------------------------------
# solving for the missing row


class PointSplitting:
    """Value of the two splittings of the weighted bundle at one point:
    the vector alpha, the covector beta and the scalar gamma attached to
    the Frobenius-equivariant one, with the filtration side held by the
    Hodge gauge elsewhere."""

    __slots__ = ("point", "alpha", "beta", "gamma")

    def __init__(self, point, alpha, beta, gamma):
        self.point = point
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma


class FrobeniusStructure:
    """Completed Frobenius action for one antisymmetric class matrix.

    ``f``, ``g`` and ``h`` are dagger functions at one common stored
    shift ``sigma``; ``frow[i][j]`` is the integer lift of the
    coefficient of basis form j in the pullback of basis form i.
    """

    def __init__(self, engine, gauge, zmatrix, cache_dir=None, refresh=False):
        self.engine = engine
        self.gauge = gauge
        rows = getattr(zmatrix, "rows", zmatrix)
        self.z = [[Fraction(c) for c in row] for row in rows]
        self.zs = [[S_SCALE * c for c in row] for row in self.z]
        for i in range(6):
            for j in range(6):
                if self.zs[i][j] != -self.zs[j][i]:
                    raise StructureError("class matrix is not antisymmetric")
        self.p = engine.p
        self.ring = engine.ring
        self.K = engine.ring.K
        self.M = engine.ring.M
        self._frames = {}
        self._lift = None
        self._base = None
        data = engine.data
        n = len(engine.omegas)
        for j in range(n):
            for i in range(n):
                if data.matrix[j][i].v < 0:
                    raise StructureError(
                        "pullback matrix not integral on this basis")
        self.frow = [[data.matrix[j][i].lift() % self.M for j in range(n)]
                     for i in range(n)]
        self.sigma = max(fun.shift for fun in data.primitives)
        self.f = [_rescale_function(self.ring, fun, self.sigma)
                  for fun in data.primitives]
        if refresh or not self._load(cache_dir):
            self._solve_row()
            self._store(cache_dir)
        rows_imf = [[(int(i == j) - self.frow[i][j]) % self.M
                     for j in range(n)] for i in range(n)]
        rows_fmp = [[(self.frow[j][i] - self.p * int(i == j)) % self.M
                     for j in range(n)] for i in range(n)]
        self.lu_imf = PrimePowerLU(rows_imf, self.p, self.K)
        self.lu_fmp = PrimePowerLU(rows_fmp, self.p, self.K)
        if self.lu_imf.rank < n or self.lu_fmp.rank < n:
            raise StructureError("a Frobenius fixed-point system is singular")

    # -- cache plumbing, mirroring the engine's

    def _key(self):
        blob = repr((self.engine._key(), [[str(c) for c in row]
                                          for row in self.z],
                     [str(c) for c in self.gauge.eta], str(S_SCALE),
                     _CACHE_VERSION)).encode()
        return hashlib.sha256(blob).hexdigest()[:24]

    def _load(self, cache_dir):
        if not cache_dir:
            return False
        path = os.path.join(cache_dir, "structure-%s.pickle" % self._key())
        try:
            with open(path, "rb") as fh:
                payload = pickle.load(fh)
        except (OSError, pickle.PickleError, EOFError):
            return False
        if payload.get("version") != _CACHE_VERSION:
            return False
        self.g = [DaggerFunction(*t) for t in payload["g"]]
        self.h = DaggerFunction(*payload["h"])
        self.gconst = [PadicElement(self.p, v, u, nn)
                       for v, u, nn in payload["gconst"]]
        self.g_known = payload["g_known"]
        self.known = payload["known"]
        return True

    def _store(self, cache_dir):
        if not cache_dir:
            return
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir, "structure-%s.pickle" % self._key())
        payload = {
            "version": _CACHE_VERSION,
            "g": [(fn.poly, fn.terms, fn.shift, fn.known) for fn in self.g],
            "h": (self.h.poly, self.h.terms, self.h.shift, self.h.known),
            "gconst": [(c.v, c.unit, c.N) for c in self.gconst],
            "g_known": self.g_known,
            "known": self.known,
        }
        fd, tmp = tempfile.mkstemp(dir=cache_dir)
        with os.fdopen(fd, "wb") as fh:
            pickle.dump(payload, fh)
        os.replace(tmp, path)

    # -- assembling and reducing the would-be-exact form

    def _omega_elements(self):
        return [self.engine.omega_element(w) for w in self.engine.omegas]

    def _eta_scaled(self):
        return [S_SCALE * Fraction(c) for c in self.gauge.eta]

    def _partial_form(self, extra_omega=None):
        """The 1-form that equals dh plus the unknown constant multiples
        of the basis forms.  ``extra_omega`` perturbs the g constant, which
        the invariance test uses to show the completed g does not move."""
        engine, ring = self.engine, self.ring
        data = engine.data
        n = len(engine.omegas)
        omegas = self._omega_elements()
        fels = [engine.function_element(fun) for fun in self.f]
        m1 = [[sum(Fraction(self.frow[j][i]) * self.zs[j][k]
                   for j in range(n)) for k in range(n)] for i in range(n)]
        total = None

        def accumulate(elem):
            nonlocal total
            total = elem if total is None else total + elem

        # omega^T F^T Zs f - f^T Zs F omega collapses to twice the first
        # part because Zs is antisymmetric
        for i in range(n):
            w = None
            for k in range(n):
                c = 2 * m1[i][k]
                if c == 0:
                    continue
                piece = fels[k].scale(c)
                w = piece if w is None else w + piece
            if w is not None:
                accumulate(omegas[i] * w)
        # df^T Zs f with df expanded from the pullback columns
        scale_f = pow(self.p, self.sigma, self.M)
        for i in range(n):
            dfe = data.pullbacks[i]
            for j in range(n):
                if self.frow[i][j]:
                    dfe = dfe + omegas[j].scale(-self.frow[i][j])
            w = None
            for k in range(n):
                c = self.zs[i][k]
                if c == 0:
                    continue
                piece = fels[k].scale(c)
                w = piece if w is None else w + piece
            if w is not None:
                accumulate(dfe * w)
        # the residue-carrying pair of the gauge row
        etas = self._eta_scaled()
        for k, c in enumerate(etas):
            if c == 0:
                continue
            tel = engine.omega_element(engine.thirds[k])
            diff = data.third_pullbacks[k].scale(c * scale_f) + \
                tel.scale(-self.p * c * scale_f)
            accumulate(diff)
        if extra_omega is not None:
            for j, c in enumerate(extra_omega):
                if c:
                    accumulate(omegas[j].scale(Fraction(c) * scale_f))
        if total is None:
            total = ring.element([[] for _ in range(ring.d)], 0)
        return total

    def _solve_row(self):
        engine, ring = self.engine, self.ring
        n = len(engine.omegas)
        red = engine.reducer.reduce(self._partial_form())
        for v in red.thirds:
            if v and valuation(v, self.p) < red.known - 2:
                raise StructureError(
                    "completion form kept a residue; the gauge row "
                    "equations are inconsistent")
        if red.shift:
            for c in red.second:
                if c and valuation(c, self.p) < red.shift:
                    raise StructureError("g constant below working scale")
        # constants at the f scale, to merge into g directly
        consts = [c // self.p ** red.shift if c else 0 for c in red.second]
        self.g_known = red.known - red.shift
        m1 = [[sum(Fraction(self.frow[j][i]) * self.zs[j][k]
                   for j in range(n)) for k in range(n)] for i in range(n)]
        self.g = [_combine_functions(ring, self.f, [-m1[j][i]
                                                    for i in range(n)],
                                     const=consts[j]) for j in range(n)]
        for gj in self.g:
            gj.known = min(gj.known, self.g_known)
        prim = red.primitive
        hfun = DaggerFunction(prim.poly, prim.terms,
                              prim.shift + self.sigma, prim.known)
        self.h = engine._normalise(hfun)
        self.gconst = [PadicElement(self.p, -(red.shift + self.sigma), c,
                                    red.known - red.shift - self.sigma)
                       for c in red.second]
        self.known = min(engine.data.known, self.g_known - self.sigma,
                         self.h.known - self.h.shift)

    # -- pointwise splittings

    def frobenius_lift(self):
        """The (y-image, reciprocal derivative) pair of the lift, built on
        demand: only evaluations at ramified points need it."""
        if self._lift is None:
            self._lift = lift_frobenius(self.ring)
        return self._lift

    def teichmueller_point(self, cx, cy):
        """The Frobenius-fixed point of the disk with these residues."""
        x0 = teichmueller_lift(cx, self.K, self.p).lift()
        y0 = _hensel_root(self.ring, x0, cy)
        return x0, y0

    def splitting_at(self, x0, y0, point_label=None):
        """Splitting data at a Teichmueller point, from the fixed-point
        linear systems.  The caller is trusted about Teichmuellerness;
        ``teichmueller_point`` is the safe constructor."""
        engine = self.engine
        p, M = self.p, self.M
        fv = [engine.point_value(fun, x0, y0) for fun in self.f]
        gv = [engine.point_value(fun, x0, y0) for fun in self.g]
        hv = engine.point_value(self.h, x0, y0)
        known_f = min(fun.known for fun in self.f)
        known_g = min(fun.known for fun in self.g)
        sa = self.lu_imf.solve(fv)
        sb = self.lu_fmp.solve(gv)
        alpha = tuple(
            PadicElement(p, -(sa.shift + self.sigma), c,
                         min(known_f, self.K) - sa.loss - sa.shift
                         - self.sigma)
            for c in sa.vector)
        beta = tuple(
            PadicElement(p, -(sb.shift + self.sigma), c,
                         min(known_g, self.K) - sb.loss - sb.shift
                         - self.sigma)
            for c in sb.vector)
        gval = [PadicElement(p, -self.sigma, c, known_g - self.sigma)
                for c in gv]
        hval = PadicElement(p, -self.h.shift, hv,
                            self.h.known - self.h.shift)
        acc = hval
        for ge, ae in zip(gval, alpha):
            acc = acc + ge * ae
        gamma = acc * Fraction(1, 1 - p)
        return PointSplitting(point_label or (x0, y0), alpha, beta, gamma)

    def base_splitting(self):
        if self._base is None:
            bx, by = self.engine.base_point
            x0 = self.ring.unit_int(bx)
            y0 = self.ring.unit_int(by)
            if pow(x0, self.p, self.M) != x0 % self.M:
                raise StructureError("base point is not Teichmueller")
            self._base = self.splitting_at(x0, y0, point_label="base")
        return self._base

    # -- transport along a good disk

    def disk_transport(self, cx, cy, nterms):
        key = (cx % self.p, cy % self.p, nterms)
        if key not in self._frames:
            self._frames[key] = DiskTransport(self, cx % self.p, cy % self.p,
                                              nterms)
        return self._frames[key]

    # -- integrals

    def abelian_logs(self, x, y, nterms=None):
        """The vector of integrals of the basis forms from the base to an
        affine point with good reduction, p-adically integral coordinates
        assumed."""
        n = nterms or (self.K + 4)
        x = Fraction(x)
        y = Fraction(y)
        cx = int(x % self.p)
        cy = int(y % self.p)
        frame = self.disk_transport(cx, cy, n)
        return frame.alpha_at(x, y)

    def coleman_integrals(self, z1, z2, nterms=None, ram_degree=None):
        """Integrals of the six basis forms between two affine points.

        Endpoints on the bad locus are routed through the ramified-point
        method; everything else goes through disk transport.
        """
        vals2 = self._logs_any(z2, nterms, ram_degree)
        vals1 = self._logs_any(z1, nterms, ram_degree)
        return tuple(b - a for a, b in zip(vals1, vals2))

    def _logs_any(self, z, nterms, ram_degree):
        x, y = Fraction(z[0]), Fraction(z[1])
        rval = _peval(self.ring.r, self.ring.unit_int(x), self.M)
        if rval % self.p == 0:
            return bad_disk_integrals(self, (x, y), ram_degree)
        return self.abelian_logs(x, y, nterms)


def solve_frobenius_structure(engine, gauge, zmatrix, cache_dir=None,
                              refresh=False):
    """Complete the Frobenius action on the weighted bundle of one class."""
    return FrobeniusStructure(engine, gauge, zmatrix, cache_dir=cache_dir,
                              refresh=refresh)


# ---------------------------------------------------------------------------
# transport frames on good disks


class DiskTransport:
    """Series of the splitting data along x = cx + t on one good disk.

    All published series are ``Pser`` values in the plain disk parameter
    t, anchored at the Teichmueller point of the disk: evaluating at a
    point means substituting that point's own t, including t0 for the
    Teichmueller point itself.
    """

    def __init__(self, structure, cx, cy, nterms):
        self.structure = structure
        st = structure
        self.cx, self.cy, self.n = cx, cy, nterms
        p, M = st.p, st.M
        engine = st.engine
        self.ev = engine.evaluator(cx, cy, nterms)
        x0, y0 = st.teichmueller_point(cx, cy)
        self.x0, self.y0 = x0, y0
        self.t0 = (x0 - self.ev.x0) % M
        if self.t0 % p and self.t0 != 0:
            raise StructureError("Teichmueller offset is not small")
        self.base = st.splitting_at(x0, y0)
        lam = 0
        while p ** (lam + 1) <= nterms:
            lam += 1
        self.lam = lam
        wser = [self.ev.form_series(engine.reducer.basis_rows[j])
                for j in range(6)]
        etas = st._eta_scaled()
        eser = [0] * nterms
        for k, c in enumerate(etas):
            if c == 0:
                continue
            ser = self.ev.form_series(engine.reducer.third_rows[k])
            eser = _sadd(eser, _pscale(ser, st.ring.unit_int(c), M), M)
        self.wser = wser
        anti = [_antiderivative(s, nterms - 1, p, M, lam) for s in wser]
        self.aser = [self._anchor(s, lam) for s in anti]
        eanti = _antiderivative(eser, nterms - 1, p, M, lam)
        iser = self._anchor(eanti, lam)
        c31 = Pser(_pscale(iser.coeffs, pow(p, lam, M), M), 2 * lam,
                   iser.prec)
        for i in range(6):
            for j in range(6):
                zc = st.zs[i][j]
                if zc == 0:
                    continue
                inner = _smul(wser[i], self.aser[j].coeffs, nterms, M)
                banti = _antiderivative(inner, nterms - 1, p, M, lam)
                piece = self._anchor(banti, 2 * lam)
                c31 = c31.add(piece.cmul(zc, st.ring), p, M)
        self.c31 = c31
        prec_const = min(min(e.N for e in self.base.alpha),
                         min(e.N for e in self.base.beta),
                         self.base.gamma.N)
        for group in (self.base.alpha, self.base.beta, (self.base.gamma,)):
            for e in group:
                if not e.is_zero() and e.v < 0:
                    raise PrecisionError(
                        "splitting constants left the integral range; the "
                        "scale bookkeeping in transport assumes otherwise")
        self.prec = min(st.K - 2 * lam, prec_const, st.known)

    def _anchor(self, anti, scale):
        """Shift an antiderivative so it vanishes at the Teichmueller
        offset, making every integral start at the fixed point."""
        M = self.structure.M
        v0 = _series_value(anti, self.t0, M)
        coeffs = list(anti)
        coeffs[0] = (coeffs[0] - v0) % M
        return Pser(coeffs, scale, self.structure.K - scale)

    # -- published series

    def alpha_series(self):
        st = self.structure
        out = []
        for j in range(6):
            const = Pser([self.base.alpha[j].lift()
                          if not self.base.alpha[j].is_zero() else 0],
                         0, self.base.alpha[j].N)
            out.append(const.add(self.aser[j], st.p, st.M))
        return out

    def beta_series(self):
        st = self.structure
        p, M = st.p, st.M
        out = []
        for j in range(6):
            total = Pser([self.base.beta[j].lift()
                          if not self.base.beta[j].is_zero() else 0],
                         0, self.base.beta[j].N)
            for i in range(6):
                zc = st.zs[i][j]
                if zc == 0:
                    continue
                total = total.add(self.aser[i].cmul(zc, st.ring), p, M)
            out.append(total)
        return out

    def gamma_series(self):
        st = self.structure
        p, M = st.p, st.M
        total = Pser([self.base.gamma.lift()
                      if not self.base.gamma.is_zero() else 0],
                     0, self.base.gamma.N)
        total = total.add(self.c31, p, M)
        for j in range(6):
            aj = self.base.alpha[j]
            if aj.is_zero():
                continue
            row = Pser([0], 0, st.K)
            for i in range(6):
                zc = st.zs[i][j]
                if zc == 0:
                    continue
                row = row.add(self.aser[i].cmul(zc, st.ring), p, M)
            total = total.add(row.cmul(aj, st.ring), p, M)
        return total

    # -- pointwise values through the series

    def t_of(self, x):
        t = (self.structure.ring.unit_int(x) - self.ev.x0) % self.structure.M
        if t % self.structure.p:
            raise StructureError("point does not lie on this disk")
        return t

    def alpha_at(self, x, y=None):
        M, p = self.structure.M, self.structure.p
        t = self.t_of(x)
        out = []
        for j, ser in enumerate(self.alpha_series()):
            val = _series_value(ser.coeffs, t, M)
            out.append(PadicElement(p, -ser.scale, val,
                                    min(ser.prec, self.prec)))
        return tuple(out)

    def splitting_value(self, x):
        """Alpha, beta, gamma at one point of the disk, as p-adics."""
        M, p = self.structure.M, self.structure.p
        t = self.t_of(x)

        def val(ser):
            return PadicElement(p, -ser.scale,
                                _series_value(ser.coeffs, t, M),
                                min(ser.prec, self.prec))

        alpha = tuple(val(s) for s in self.alpha_series())
        beta = tuple(val(s) for s in self.beta_series())
        gamma = val(self.gamma_series())
        return PointSplitting((x, None), alpha, beta, gamma)


# ---------------------------------------------------------------------------
# ramified evaluation toward the bad disk


def _rv_from_int(c, e):
    return [c] + [0] * (e - 1)


def _rv_add(a, b, M):
    return [(x + z) % M for x, z in zip(a, b)]


def _rv_scale(a, c, M):
    return [x * c % M for x in a]


def _rv_mul(a, b, e, p, M, bw):
    raw = _pmul(a, b, M, bw)
    out = list(raw[:e]) + [0] * (e - len(raw))
    for k in range(e, len(raw)):
        out[k - e] = (out[k - e] + p * raw[k]) % M
    return out


def _rv_inv(a, e, p, M, bw, rounds):
    if a[0] % p == 0:
        raise StructureError("ramified inverse of a non-unit")
    x = _rv_from_int(pow(a[0], -1, M), e)
    for _ in range(rounds):
        ax = _rv_mul(a, x, e, p, M, bw)
        ax[0] = (2 - ax[0]) % M
        for i in range(1, e):
            ax[i] = (-ax[i]) % M
        x = _rv_mul(x, ax, e, p, M, bw)
    return x


def _rv_pow(a, k, e, p, M, bw):
    out = _rv_from_int(1, e)
    base = a
    while k:
        if k & 1:
            out = _rv_mul(out, base, e, p, M, bw)
        base = _rv_mul(base, base, e, p, M, bw)
        k >>= 1
    return out


def _rv_pi_shift(a, k, e, p, M):
    """Divide by pi^k, consuming one p per full rotation; digits that
    fail to divide signal a precision or convention fault upstream."""
    out = list(a)
    lost = 0
    for _ in range(k):
        head = out[0]
        if head % p:
            if valuation(head, p) < 1:
                raise PrecisionError(
                    "ramified value not divisible by the uniformiser; "
                    "raise the working precision or the ramification")
        out = out[1:] + [head // p if head % p == 0 else 0]
        lost += 1
    return out, (lost + e - 1) // e


def _rv_eval_series(ser, tvec, e, p, M, bw):
    acc = _rv_from_int(0, e)
    for c in reversed(ser):
        acc = _rv_mul(acc, tvec, e, p, M, bw)
        acc[0] = (acc[0] + c) % M
    return acc


def _rv_eval_series_at_pi(ser, e, p, M):
    out = [0] * e
    for k, c in enumerate(ser):
        if c:
            out[k % e] = (out[k % e] + c * p ** (k // e)) % M
    return out


def _rv_eval_rows(rows, xvec, yvec, e, p, M, bw):
    ypow = _rv_from_int(1, e)
    acc = _rv_from_int(0, e)
    for j, row in enumerate(rows):
        if j:
            ypow = _rv_mul(ypow, yvec, e, p, M, bw)
        if not row:
            continue
        rv = _rv_from_int(0, e)
        for c in reversed(row):
            rv = _rv_mul(rv, xvec, e, p, M, bw)
            rv[0] = (rv[0] + c) % M
        acc = _rv_add(acc, _rv_mul(rv, ypow, e, p, M, bw)
                      if j else rv, M)
    return acc


class VerticalDisk:
    """Series data on the single bad disk, in the parameter t = y - y1.

    The branch solves the model for x as a series in t; the basis forms
    are rewritten over Q_x, since the y-derivative vanishes along the
    ramification locus but the x-derivative stays a unit there.
    """

    def __init__(self, structure, point, nterms):
        st = structure
        ring = st.ring
        p, M, bw = st.p, st.M, ring.bw
        self.structure = structure
        self.n = nterms
        x1, y1 = Fraction(point[0]), Fraction(point[1])
        self.x1 = ring.unit_int(x1)
        self.y1 = ring.unit_int(y1)
        if st.engine.curve.Q.evaluate(x1, y1) != 0:
            raise StructureError("bad-disk centre must lie on the model")
        qx0 = st.engine.curve.Qx.evaluate(x1, y1)
        if Fraction(qx0).numerator % p == 0:
            raise StructureError("bad-disk centre must be unramified in x")
        qy0 = st.engine.curve.Qy.evaluate(x1, y1)
        if Fraction(qy0) != 0:
            raise StructureError(
                "centre is not a ramification point; the vertical "
                "parameter would not cover the disk")
        self.xser = self._solve_branch(nterms)
        # forms: -(numerator) dt / Q_x along the branch
        self.qxser = self._along(ring.qx_rows)
        qxinv = _sinv(self.qxser, nterms, M)
        self.wser = []
        for j in range(6):
            num = self._along(st.engine.reducer.basis_rows[j])
            self.wser.append(_smul(_pscale(num, -1, M), qxinv, nterms, M))
        etas = st._eta_scaled()
        eser = [0] * nterms
        for k, c in enumerate(etas):
            if c == 0:
                continue
            num = self._along(st.engine.reducer.third_rows[k])
            ser = _smul(_pscale(num, -1, M), qxinv, nterms, M)
            eser = _sadd(eser, _pscale(ser, ring.unit_int(c), M), M)
        self.eser = eser
        lam = 0
        while p ** (lam + 1) <= nterms:
            lam += 1
        self.lam = lam
        self.anti = [_antiderivative(s, nterms - 1, p, M, lam)
                     for s in self.wser]
        rser = self._rseries(nterms)
        self.k0 = next((k for k, c in enumerate(rser) if c % p), None)
        if self.k0 is None:
            raise StructureError("resultant vanished along the whole disk")

    def _solve_branch(self, n):
        ring = self.structure.ring
        M = ring.M
        # x-polynomial rows recentered at x1; (y1 + t)^j folds in later
        coeffs = [_ptaylor(row, self.x1, n, M) for row in ring.q_rows]
        x = [0] * n
        length = 1
        while True:
            qval = self._qpoly_at(coeffs, x, length, M)
            qder = self._qxpoly_at(x, length, M)
            corr = _smul(qval, _sinv(qder, length, M), length, M)
            x = [(x[i] - (corr[i] if i < length else 0)) % M
                 for i in range(n)]
            if length == n:
                qval = self._qpoly_at(coeffs, x, n, M)
                if any(qval):
                    raise StructureError("branch solve did not close")
                break
            length = min(2 * length, n)
        return [(x[i] + (self.x1 if i == 0 else 0)) % M for i in range(n)]

    def _ypow_series(self, j, n, M):
        # (y1 + t)^j as a short series
        out = [0] * n
        c = 1
        for k in range(min(j, n - 1) + 1):
            out[k] = c * pow(self.y1, j - k, M) % M
            c = c * (j - k) // (k + 1)
        return out

    def _qpoly_at(self, coeffs, xsh, length, M):
        """Q(x1 + xsh(t), y1 + t) as a series, xsh the shifted branch."""
        n = self.n
        total = [0] * n
        for j, row in enumerate(coeffs):
            if not row:
                continue
            acc = [0] * n
            for c in reversed(row):
                acc = _smul(acc, xsh, length, M)
                acc[0] = (acc[0] + c) % M
            total = _sadd(total, _smul(acc, self._ypow_series(j, n, M),
                                       length, M), M)
        return total

    def _qxpoly_at(self, xsh, length, M):
        ring = self.structure.ring
        n = self.n
        total = [0] * n
        for j, row in enumerate(ring.qx_rows):
            if not row:
                continue
            tay = _ptaylor(row, self.x1, n, M)
            acc = [0] * n
            for c in reversed(tay):
                acc = _smul(acc, xsh, length, M)
                acc[0] = (acc[0] + c) % M
            total = _sadd(total, _smul(acc, self._ypow_series(j, n, M),
                                       length, M), M)
        return total

    def _along(self, rows):
        """A y-row expression evaluated along (x(t), y1 + t)."""
        ring = self.structure.ring
        n, M = self.n, ring.M
        xsh = [(self.xser[i] - (self.x1 if i == 0 else 0)) % M
               for i in range(n)]
        total = [0] * n
        for j, row in enumerate(rows):
            if not row:
                continue
            tay = _ptaylor(row, self.x1, n, M)
            acc = [0] * n
            for c in reversed(tay):
                acc = _smul(acc, xsh, n, M)
                acc[0] = (acc[0] + c) % M
            total = _sadd(total, _smul(acc, self._ypow_series(j, n, M),
                                       n, M), M)
        return total

    def _rseries(self, n):
        ring = self.structure.ring
        M = ring.M
        xsh = [(self.xser[i] - (self.x1 if i == 0 else 0)) % M
               for i in range(n)]
        tay = _ptaylor(ring.r, self.x1, n, M)
        acc = [0] * n
        for c in reversed(tay):
            acc = _smul(acc, xsh, n, M)
            acc[0] = (acc[0] + c) % M
        return acc


def _auto_ramification(structure, disk, target):
    """Smallest power-of-two ramification degree that keeps the division
    losses inside the available digits; raises when none does."""
    st = structure
    mf = max(max((m for _, m in fun.terms), default=0) for fun in st.f)
    Z, _ = st.frobenius_lift()
    mz = Z.m
    worst = st.K - target
    e = 2
    while e <= 4096:
        loss = -(-disk.k0 * max(mf, mz) // e) + 2
        if loss <= worst:
            return e
        e *= 2
    raise PrecisionError(
        "no ramification degree fits the digit budget; raise the guard")


def bad_disk_integrals(structure, point, ram_degree=None, target=None):
    """Integrals of the basis forms from the base into the bad disk.

    The value at the ramification centre comes from the Frobenius
    fixed-point equation evaluated at a point defined over a totally
    ramified extension, where the dagger representations still converge;
    the answer must come out unramified, and that check is the built-in
    certificate of the whole route.
    """
    st = structure
    ring = st.ring
    p, M, bw = st.p, st.M, ring.bw
    if target is None:
        target = min(st.engine.data.precision + 2, st.known - 2)
    x1 = Fraction(point[0])
    y1 = Fraction(point[1])
    key = ("bad", x1, y1, ram_degree, target)
    if key in st._frames:
        return st._frames[key]
    probe = VerticalDisk(st, point, 8)
    e = ram_degree or _auto_ramification(st, probe, target)
    if e < 2:
        raise StructureError("ramification degree must be at least 2")
    lam = 0
    nram = e * (target + 2) + 2
    for _ in range(3):
        lam = 0
        while p ** (lam + 1) <= nram:
            lam += 1
        nram = e * (target + lam + 1) + 2
    disk = VerticalDisk(st, point, nram)
    if disk.k0 != probe.k0:
        raise StructureError("bad-disk order probe disagrees at full size")
    rounds = st.K.bit_length() + 3

    # the moving point: t = pi exactly, so series evaluate by refolding
    xram = _rv_eval_series_at_pi(disk.xser, e, p, M)
    yram = _rv_from_int(disk.y1, e)
    yram[1 % e] = (yram[1 % e] + 1) % M

    rv = _rv_eval_series_at_pi(disk._rseries(nram), e, p, M)
    rv_unit, drop0 = _rv_pi_shift(rv, disk.k0, e, p, M)
    rinv_unit = _rv_inv(rv_unit, e, p, M, bw, rounds)

    def dagger_at_ram(fun):
        elem = st.engine.function_element(fun)
        num = _rv_eval_rows(elem.rows, xram, yram, e, p, M, bw)
        if elem.m == 0:
            return num, 0
        num = _rv_mul(num, _rv_pow(rinv_unit, elem.m, e, p, M, bw),
                      e, p, M, bw)
        out, lost = _rv_pi_shift(num, disk.k0 * elem.m, e, p, M)
        return out, lost

    fvals = []
    loss_f = 0
    for fun in st.f:
        v, lost = dagger_at_ram(fun)
        fvals.append(v)
        loss_f = max(loss_f, lost)

    # image of the moving point under the lift
    Z, _ = st.frobenius_lift()
    znum = _rv_eval_rows(Z.rows, xram, yram, e, p, M, bw)
    if Z.m:
        znum = _rv_mul(znum, _rv_pow(rinv_unit, Z.m, e, p, M, bw),
                       e, p, M, bw)
        znum, loss_z = _rv_pi_shift(znum, disk.k0 * Z.m, e, p, M)
    else:
        loss_z = 0
    tphi = list(znum)
    tphi[0] = (tphi[0] - disk.y1) % M

    # certificate: the branch evaluated at the image parameter must
    # return the p-th power of the moving x-coordinate
    ximg = _rv_eval_series(disk.xser, tphi, e, p, M, bw)
    xpow = _rv_pow(xram, p, e, p, M, bw)
    agree = min((valuation(a - b, p) if (a - b) % M else st.K
                 for a, b in zip(ximg, xpow)), default=st.K)
    if agree < target - 2:
        raise PrecisionError(
            "lift image failed the branch certificate at digit %d" % agree)

    tiny = []
    for anti in disk.anti:
        at_phi = _rv_eval_series(anti, tphi, e, p, M, bw)
        at_pi = _rv_eval_series_at_pi(anti, e, p, M)
        tiny.append([(a - b) % M for a, b in zip(at_phi, at_pi)])

    # solve (1 - F) log = f(moving) - tiny, coordinate by coordinate
    scale_fix = pow(p, disk.lam, M)
    combined = []
    for j in range(6):
        vec = [(fvals[j][c] * scale_fix - tiny[j][c] *
                pow(p, st.sigma, M)) % M for c in range(e)]
        combined.append(vec)
    logs_at_ram = [[0] * e for _ in range(6)]
    loss_solve = 0
    for c in range(e):
        sol = st.lu_imf.solve([combined[j][c] for j in range(6)])
        if sol.shift:
            raise PrecisionError("fixed-point solve left the integral "
                                 "range on a ramified coordinate")
        loss_solve = max(loss_solve, sol.loss)
        for j in range(6):
            logs_at_ram[j][c] = sol.vector[j]

    # from the moving point back to the centre: subtract the series value
    scale_total = disk.lam + st.sigma
    prec_true = min(st.known, st.K - loss_f - loss_z - loss_solve
                    - scale_total) - 1
    out = []
    for j in range(6):
        at_pi = _rv_eval_series_at_pi(disk.anti[j], e, p, M)
        vec = [(logs_at_ram[j][c] - at_pi[c] * pow(p, st.sigma, M)) % M
               for c in range(e)]
        coords = [PadicElement(p, -scale_total, vc, prec_true)
                  for vc in vec]
        ram = RamifiedElement(p, e, coords)
        out.append(ram.padic_part(max_ramified_valuation=prec_true
                                  + scale_total - 2))
    result = tuple(out)
    st._frames[key] = result
    return result


# ---------------------------------------------------------------------------
# an independent route to depth-one integrals, for cross-checking


def independent_abelian_logs(structure, x, y, nterms=None):
    """Depth-one integrals at a good point by the fixed-point equation,
    with the small connecting integral done in-series; shares nothing
    with the transport route past the Frobenius matrix itself, which is
    what makes the comparison in the test suite worth having."""
    st = structure
    ring = st.ring
    p, M = st.p, st.M
    n = nterms or (st.K + 6)
    x = Fraction(x)
    y = Fraction(y)
    xi = ring.unit_int(x)
    yi = ring.unit_int(y)
    rv = _peval(ring.r, xi, M)
    if rv % p == 0:
        raise StructureError("independent route needs a good disk")
    cx, cy = xi % p, yi % p
    ev = st.engine.evaluator(cx, cy, n)
    lam = 0
    while p ** (lam + 1) <= n:
        lam += 1
    # the image point under the lift shares the disk
    Z, _ = st.frobenius_lift()
    rinv = pow(rv, -1, M)
    zval = 0
    for j, row in enumerate(Z.rows):
        zval = (zval + _peval(row, xi, M) * pow(yi, j, M)) % M
    zval = zval * pow(rinv, Z.m, M) % M
    x_img = pow(xi, p, M)
    t_here = (xi - ev.x0) % M
    t_img = (x_img - ev.x0) % M
    branch = _series_value(ev.y, t_img, M)
    check_mod = p ** min(st.K, max(1, st.known - 2))
    if (branch - zval) % check_mod:
        raise StructureError("lift image left the branch")
    fv = [st.engine.point_value(fun, x, y) for fun in st.f]
    tiny = []
    for j in range(6):
        ser = ev.form_series(st.engine.reducer.basis_rows[j])
        anti = _antiderivative(ser, n - 1, p, M, lam)
        tiny.append((_series_value(anti, t_img, M)
                     - _series_value(anti, t_here, M)) % M)
    scale_fix = pow(p, lam, M)
    rhs = [(fv[j] * scale_fix - tiny[j] * pow(p, st.sigma, M)) % M
           for j in range(6)]
    sol = st.lu_imf.solve(rhs)
    total = lam + st.sigma + sol.shift
    prec = min(st.known, st.K - sol.loss) - lam
    return tuple(PadicElement(p, -total, c, prec) for c in sol.vector)
