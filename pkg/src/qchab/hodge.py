"""Filtration gauge of an antisymmetric cohomology class, exactly.

For a class matrix Z pairing the second-kind basis against itself, the
height machinery needs three exact objects:

  * eta, a combination of the third-kind numerators chosen so that
    omega^T Z Omega + eta has vanishing residue at every point at
    infinity (Omega is the zero-constant local primitive of the basis);

  * beta and gamma absorbing the remaining pole parts: with g the
    zero-constant primitive of omega^T Z Omega + eta, the difference
    g - beta^T Omega - gamma extends holomorphically across infinity.

beta's block against the holomorphic forms is a kernel direction of the
pole-part system (their primitives carry no poles) and is pinned to zero;
gamma is normalised by gamma(base point) = 0.  Both conventions match the
packaged reference outputs.

All arithmetic is exact: Fractions on rational branches, quadratic number
fields on conjugate branches at infinity.
"""

from dataclasses import dataclass
from fractions import Fraction

from .arith import NumberFieldElement, QchabError
from .curve import infinite_slopes
from .linser import formal_antiderivative, solve_rectangular

# The defining equations determine the gauge row of the connection only up
# to one overall scale; this factor pins the normalisation to the one the
# packaged reference gauges (and everything downstream of them) use.
S_SCALE = Fraction(2, 3)


class HodgeError(QchabError):
    """The gauge system is inconsistent or fails to determine a gauge."""


@dataclass(frozen=True)
class HodgeGauge:
    """Exact gauge data for one class on one chart."""

    class_name: str
    eta: tuple                  # coefficients against the third-kind basis
    beta: tuple                 # six rationals, holomorphic block zero
    gamma: dict                 # exponent dict {(i, j): Fraction}

    def eta_exponents(self, fix):
        """eta as an exponent dict against the chart variables."""
        out = {}
        for coeff, numer in zip(self.eta, fix.third):
            if not coeff:
                continue
            for j, row in enumerate(numer.coeffs):
                for i, c in enumerate(row):
                    if c:
                        key = (i, j)
                        out[key] = out.get(key, Fraction(0)) + coeff * c
        return {k: v for k, v in out.items() if v}

    def gamma_value(self, x, y):
        return sum(c * x ** i * y ** j for (i, j), c in self.gamma.items())


def _components(value, width):
    """Split a residue into rational coordinates (width 1 for Fraction)."""
    if isinstance(value, NumberFieldElement):
        coords = [Fraction(c) for c in value.coeffs]
        return coords + [Fraction(0)] * (width - len(coords))
    return [Fraction(value)] + [Fraction(0)] * (width - 1)


def _site_width(slope):
    if isinstance(slope, NumberFieldElement):
        return len(slope.field.minpoly)
    return 1


def compute_hodge_gauge(fix, class_name, terms=32):
    """Solve for the gauge of one class; everything exact.

    Raises HodgeError when the residue or pole-part systems are
    inconsistent or leave freedom beyond the pinned conventions.
    """
    Z = fix.z_classes[class_name]
    slopes = infinite_slopes(fix.curve)

    bundles = []
    eta_rows, eta_rhs = [], []
    for w0 in slopes:
        width = _site_width(w0)
        site = fix.curve.site_at_infinity(w0, terms)
        om = [site.form_series(n) for n in fix.omega]
        Om = [formal_antiderivative(f) for f in om]
        th = [site.form_series(n) for n in fix.third]
        core = None
        for i in range(6):
            for j in range(6):
                zij = Z[(i, j)]
                if zij:
                    term = om[i] * Om[j] * zij
                    core = term if core is None else core + term
        bundles.append((site, Om, th, core, width))
        th_res = [t.coefficient(-1) for t in th]
        cols = [_components(v, width) for v in th_res]
        rhs = _components(-core.coefficient(-1), width)
        for k in range(width):
            eta_rows.append([col[k] for col in cols])
            eta_rhs.append(rhs[k])

    eta, kernel = solve_rectangular(eta_rows, eta_rhs)
    if kernel:
        raise HodgeError(f"{class_name}: residue system leaves eta "
                         f"underdetermined")

    base_x, base_y = fix.base_point
    gamma_monos = fix.function_basis[1:]
    rows, rhs = [], []
    for site, Om, th, core, width in bundles:
        total = core
        for t, e in zip(th, eta):
            if e:
                total = total + t * e
        g = formal_antiderivative(total)   # residue zero by choice of eta
        funcs = [site.function_series(m) - m.evaluate(base_x, base_y)
                 for m in gamma_monos]
        cols = list(Om[3:6]) + funcs
        low = min([g.order] + [c.order for c in cols])
        for n in range(low, 0):
            col_vals = [_components(c.coefficient(n), width) for c in cols]
            target = _components(g.coefficient(n), width)
            for k in range(width):
                rows.append([cv[k] for cv in col_vals])
                rhs.append(target[k])

    raw, kernel = solve_rectangular(rows, rhs)
    if kernel:
        raise HodgeError(f"{class_name}: pole-part system leaves the gauge "
                         f"underdetermined beyond the holomorphic block")

    beta = (Fraction(0),) * 3 + tuple(S_SCALE * v for v in raw[:3])
    gamma = {}
    for mono, c in zip(gamma_monos, raw[3:]):
        if not c:
            continue
        scaled = S_SCALE * c
        for j, row in enumerate(mono.coeffs):
            for i, cc in enumerate(row):
                if cc:
                    key = (i, j)
                    gamma[key] = gamma.get(key, Fraction(0)) + scaled * cc
        const = scaled * mono.evaluate(base_x, base_y)
        if const:
            gamma[(0, 0)] = gamma.get((0, 0), Fraction(0)) - const
    gamma = {k: v for k, v in gamma.items() if v}

    gauge = HodgeGauge(class_name=class_name, eta=tuple(eta),
                       beta=beta, gamma=gamma)
    _verify_gauge(fix, gauge, bundles)
    return gauge


def _verify_gauge(fix, gauge, bundles):
    """Re-check the defining properties on every branch at infinity."""
    base_x, base_y = fix.base_point
    if gauge.gamma_value(base_x, base_y) != 0:
        raise HodgeError("gamma does not vanish at the base point")
    inv_scale = 1 / S_SCALE
    for site, Om, th, core, _ in bundles:
        total = core
        for t, e in zip(th, gauge.eta):
            if e:
                total = total + t * e
        if not _apparently(total.coefficient(-1)):
            raise HodgeError("eta does not kill the residue at infinity")
        g = formal_antiderivative(total)
        diff = g
        for Omega, b in zip(Om[3:6], gauge.beta[3:6]):
            if b:
                diff = diff - Omega * (inv_scale * b)
        gseries = None
        for (i, j), c in gauge.gamma.items():
            mono = site.x_series ** i * site.y_series ** j * (inv_scale * c)
            gseries = mono if gseries is None else gseries + mono
        if gseries is not None:
            diff = diff - gseries
        for n in range(diff.order, 0):
            if not _apparently(diff.coefficient(n)):
                raise HodgeError(f"gauge leaves a pole of order {-n}")


def _apparently(value):
    if hasattr(value, "is_zero"):
        return value.is_zero()
    return value == 0
