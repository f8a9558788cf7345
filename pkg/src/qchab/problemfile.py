"""Problem-description files: grammar and parser.

A problem file is line-oriented.  Sections open with ``[name]``; inside a
section each nonempty line is ``key = value`` (or, in table sections, a
``key : value`` row that may repeat).  ``#`` starts a comment anywhere.
Rationals are written ``a/b``, polynomials in expanded monomial form, e.g.

    equation = y^4 - 10*y^3 - 6*x^2*y^2 + 24*y^2 + 5*x^4

with no parentheses.  This stays diffable against printed data listings.

The parser returns a plain dict of sections; semantic assembly (curves,
matrices, point lists) lives with the consumers.
"""

import re
from fractions import Fraction

from .arith import QchabError


class ProblemFileError(QchabError):
    """Malformed problem or results file; message carries line context."""


_TERM = re.compile(r"^([+-]?\d+(?:/\d+)?)?((?:\*?[a-zA-Z]\w*(?:\^\d+)?)*)$")
_VARPOW = re.compile(r"([a-zA-Z]\w*)(?:\^(\d+))?")


def parse_rational(text, where=""):
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ProblemFileError(f"bad rational {text!r} {where}") from None


def parse_polynomial(text, variables=("x", "y"), where=""):
    """Expanded monomial form -> dict {(i, j, ...): Fraction} keyed by the
    exponent tuple in the order of ``variables``."""
    cleaned = text.replace(" ", "")
    if not cleaned:
        raise ProblemFileError(f"empty polynomial {where}")
    terms = re.findall(r"[+-]?[^+-]+", cleaned)
    if "".join(terms) != cleaned:
        raise ProblemFileError(f"cannot segment polynomial {text!r} {where}")
    out = {}
    for term in terms:
        sign = 1
        body = term
        if body[0] in "+-":
            sign = -1 if body[0] == "-" else 1
            body = body[1:]
        m = _TERM.match(body)
        if not m:
            raise ProblemFileError(f"bad monomial {term!r} {where}")
        coeff_s, var_s = m.groups()
        coeff = Fraction(coeff_s) if coeff_s else Fraction(1)
        exps = [0] * len(variables)
        for name, power in _VARPOW.findall(var_s or ""):
            if name not in variables:
                raise ProblemFileError(
                    f"unknown variable {name!r} in {term!r} {where}")
            exps[variables.index(name)] += int(power) if power else 1
        key = tuple(exps)
        out[key] = out.get(key, Fraction(0)) + sign * coeff
    return {k: v for k, v in out.items() if v != 0}


def polynomial_rows(poly_dict):
    """Exponent-dict -> nested rows[j][i] (y-major) for BivariatePoly."""
    if not poly_dict:
        return [[Fraction(0)]]
    ymax = max(j for _, j in poly_dict)
    rows = []
    for j in range(ymax + 1):
        xs = [i for (i, jj) in poly_dict if jj == j]
        xmax = max(xs) if xs else 0
        rows.append([poly_dict.get((i, j), Fraction(0))
                     for i in range(xmax + 1)])
    return rows


def parse_file(path):
    """Read a sectioned key/value file.

    Returns {section: {"items": [(key, value), ...], "dict": {key: value}}}
    preserving row order and allowing repeated keys in the item list.
    """
    sections = {}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            if line.lstrip().startswith("["):
                name = line.strip()
                if not name.endswith("]"):
                    raise ProblemFileError(
                        f"{path}:{lineno}: unterminated section header")
                current = name[1:-1].strip()
                if current in sections:
                    raise ProblemFileError(
                        f"{path}:{lineno}: duplicate section [{current}]")
                sections[current] = {"items": [], "dict": {}}
                continue
            if current is None:
                raise ProblemFileError(
                    f"{path}:{lineno}: content before any section")
            for sep in ("=", ":"):
                if sep in line:
                    key, _, value = line.partition(sep)
                    key, value = key.strip(), value.strip()
                    sections[current]["items"].append((key, value))
                    sections[current]["dict"][key] = value
                    break
            else:
                raise ProblemFileError(
                    f"{path}:{lineno}: expected 'key = value', got {line!r}")
    return sections


def parse_int_row(text, where=""):
    try:
        return [int(tok) for tok in text.split()]
    except ValueError:
        raise ProblemFileError(f"bad integer row {text!r} {where}") from None


def parse_point(text, where=""):
    """``a, b`` (affine) or ``infinity w=c``."""
    text = text.strip()
    if text.startswith("infinity"):
        m = re.match(r"infinity\s+w\s*=\s*(\S+)$", text)
        if not m:
            raise ProblemFileError(f"bad infinite point {text!r} {where}")
        return ("infinity", parse_rational(m.group(1), where))
    parts = text.split(",")
    if len(parts) != 2:
        raise ProblemFileError(f"bad point {text!r} {where}")
    return ("affine", parse_rational(parts[0], where),
            parse_rational(parts[1], where))
