"""A normalized family of plane maps with a designated degree-lowering divisor.

Instances are built from five forms P, Q1, Q2, Q3, R over (z, w, t)
subject to deg R = deg P + deg Q1 and the calibration
P(1,1,1) Q_j(1,1,1) = R(1,1,1) != 0; the induced map is
[P Q1 - R : P Q2 - R : P Q3 - R].  The divisor {P = 0} collapses to
[1:1:1] under one application, which makes the expected degree
recurrence (d, h, n0) = (deg P + deg Q1, deg P, 1).

Three preflight checks estimate whether an instance is quasi-stable
before any symbolic iteration: exact coprimality of the difference
forms and of (P, R); a pointwise condition on the finite set
{P=0} n {R=0}; and the jacobian rank at (1,1,1) together with a
coprimality scan over the pencil spanned by the Q_j.  The preflight is
advisory; the authoritative verdict is always the symbolic certificate
from the iteration module.
"""

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from mpmath import iv, mp, workprec

from .mapiter import NotDominant, ProjMap, make_map, map_to_text
from .polycore import (
    HomPoly,
    ParseError,
    parse_poly,
    poly_gcd,
    poly_gcd_many,
    poly_to_text,
    random_hompoly,
)
from .specdeg import DegreeRecurrence

__all__ = [
    "PASS",
    "FAIL",
    "UNKNOWN",
    "FamilyError",
    "DegreeConstraintViolated",
    "NormalizationViolated",
    "CommonFactor",
    "GenerationExhausted",
    "FamilyInstance",
    "IntersectionReport",
    "RankReport",
    "PencilReport",
    "PreflightReport",
    "build_family_map",
    "check_coprimality",
    "check_intersection_conditions",
    "check_rank_and_pencil",
    "run_preflight",
    "random_family",
    "sample_divisor_points",
    "parse_family_text",
    "family_to_text",
    "load_family",
    "save_family",
]

PASS = "PASS"
FAIL = "FAIL"
UNKNOWN = "UNKNOWN"


class FamilyError(Exception):
    """Base class for family construction failures."""


class DegreeConstraintViolated(FamilyError):
    """The five forms do not satisfy the degree relations."""


class NormalizationViolated(FamilyError):
    """P(1,1,1) Q_j(1,1,1) = R(1,1,1) != 0 fails for some j."""


class CommonFactor(FamilyError):
    """The three induced components share a nontrivial factor."""


class GenerationExhausted(FamilyError):
    """Rejection sampling hit its attempt cap without a valid instance."""


@dataclass(frozen=True)
class FamilyInstance:
    """Validated family data plus the induced map and its expected recurrence."""

    P: HomPoly
    Q1: HomPoly
    Q2: HomPoly
    Q3: HomPoly
    R: HomPoly
    map: ProjMap
    recurrence: DegreeRecurrence

    @property
    def names(self) -> tuple:
        return self.map.names


@dataclass(frozen=True)
class IntersectionReport:
    """Outcome of the pointwise check on {P=0} n {R=0}.

    rational_points lists the exactly determined points; boxed_points
    counts certified enclosures of the remaining algebraic points;
    failure_witnesses lists points where both difference forms vanish;
    unresolved counts enclosures the interval evaluation could not
    decide within the precision budget.
    """

    verdict: str
    rational_points: tuple
    boxed_points: int
    failure_witnesses: tuple
    unresolved: int


@dataclass(frozen=True)
class RankReport:
    rank: int
    verdict: str


@dataclass(frozen=True)
class PencilReport:
    """Coprimality of P against the Q-pencil.

    A FAIL carries the exact witness triple (a, b, c).  method records
    whether a PASS came only from sampling ("randomized") or was
    additionally backed by the exact divisibility kernel ("kernel"),
    which rules out any pencil member divisible by P.
    """

    verdict: str
    witness: Optional[tuple]
    method: str


@dataclass(frozen=True)
class PreflightReport:
    """Flat three-valued summary of all preflight checks."""

    coprimality: str
    intersection: str
    rank: int
    rank_verdict: str
    pencil: str
    overall: str


# -- construction -----------------------------------------------------------------


def build_family_map(P, Q1, Q2, Q3, R, names: Optional[Sequence[str]] = None) -> FamilyInstance:
    """Validate the five forms and assemble the induced projective map."""
    forms = (P, Q1, Q2, Q3, R)
    if any(f.is_zero for f in forms):
        raise DegreeConstraintViolated("all five forms must be nonzero")
    if any(f.nvars != 3 for f in forms):
        raise DegreeConstraintViolated("forms must use exactly three variables")
    dq = Q1.degree
    if Q2.degree != dq or Q3.degree != dq:
        raise DegreeConstraintViolated("the three Q forms must share one degree")
    if R.degree != P.degree + dq:
        raise DegreeConstraintViolated(
            f"deg R = {R.degree} does not equal deg P + deg Q1 = {P.degree + dq}"
        )
    one = (Fraction(1), Fraction(1), Fraction(1))
    pv = P.evaluate(one)
    rv = R.evaluate(one)
    if rv == 0:
        raise NormalizationViolated("R(1,1,1) must be nonzero")
    for j, q in enumerate((Q1, Q2, Q3), start=1):
        if pv * q.evaluate(one) != rv:
            raise NormalizationViolated(
                f"P(1,1,1)*Q{j}(1,1,1) = {pv * q.evaluate(one)} differs from R(1,1,1) = {rv}"
            )
    comps = tuple(P * q - R for q in (Q1, Q2, Q3))
    if any(c.is_zero for c in comps):
        raise CommonFactor("a component P*Qj - R vanishes identically")
    g = poly_gcd_many(comps)
    if g.degree > 0:
        raise CommonFactor(f"components share the factor {poly_to_text(g)}")
    f = make_map(comps, names)
    try:
        rec = DegreeRecurrence(d=P.degree + dq, h=P.degree, n0=1)
    except ValueError as exc:
        raise DegreeConstraintViolated(str(exc)) from exc
    return FamilyInstance(P=P, Q1=Q1, Q2=Q2, Q3=Q3, R=R, map=f, recurrence=rec)


# -- first check: exact coprimality -----------------------------------------------


def _is_coprime_pair(a: HomPoly, b: HomPoly) -> bool:
    if a.is_zero and b.is_zero:
        return False
    if a.is_zero or b.is_zero:
        return False  # gcd is the nonzero form itself, of positive degree
    return poly_gcd(a, b).degree == 0


def check_coprimality(inst: FamilyInstance) -> str:
    """PASS iff Q2-Q1, Q3-Q1 are coprime and P, R are coprime.  Exact."""
    d21 = inst.Q2 - inst.Q1
    d31 = inst.Q3 - inst.Q1
    if not _is_coprime_pair(d21, d31):
        return FAIL
    if not _is_coprime_pair(inst.P, inst.R):
        return FAIL
    return PASS


# -- exact univariate toolkit (dense Fraction lists, low degree first) -------------


def _utrim(u):
    while u and u[-1] == 0:
        u.pop()
    return u


def _udeg(u):
    return len(u) - 1


def _uadd(a, b):
    n = max(len(a), len(b))
    return _utrim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def _uscale(a, c):
    return _utrim([x * c for x in a]) if c else []


def _umul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _utrim(out)


def _udivexact(a, b):
    """Quotient of a by b; the division must be exact."""
    assert b, "division by the zero polynomial"
    a = list(a)
    out = [Fraction(0)] * (len(a) - len(b) + 1)
    while len(a) >= len(b) and a:
        c = a[-1] / b[-1]
        k = len(a) - len(b)
        out[k] = c
        for i, y in enumerate(b):
            a[k + i] -= c * y
        _utrim(a)
    assert not a, "inexact polynomial division"
    return _utrim(out)


def _urem(a, b):
    a = list(a)
    while len(a) >= len(b) and a:
        c = a[-1] / b[-1]
        k = len(a) - len(b)
        for i, y in enumerate(b):
            a[k + i] -= c * y
        _utrim(a)
    return a


def _ugcd(a, b):
    a, b = list(a), list(b)
    while b:
        a, b = b, _urem(a, b)
    if a:
        lc = a[-1]
        a = [x / lc for x in a]
    return a


def _uderiv(a):
    return _utrim([a[i] * i for i in range(1, len(a))])


def _ueval(a, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * x + c
    return acc


def _usquarefree(a):
    if _udeg(a) < 1:
        return list(a)
    g = _ugcd(a, _uderiv(a))
    if _udeg(g) < 1:
        return list(a)
    return _udivexact(a, g)


def _urational_roots(a):
    """Verified rational roots, found by rationalizing numeric roots.

    Roots whose denominator exceeds the rationalization bound are left
    to the interval machinery; everything returned is an exact root.
    """
    a = _usquarefree(a)
    if _udeg(a) < 1:
        return [], a
    den = math.lcm(*(c.denominator for c in a))
    ints = [int(c * den) for c in a]
    with workprec(200):
        try:
            approx = mp.polyroots(list(reversed(ints)), maxsteps=200, extraprec=100)
        except mp.NoConvergence:
            approx = []
    found = []
    rest = list(a)
    for z in approx:
        if abs(z.imag) > mp.mpf(2) ** -40:
            continue
        cand = Fraction(float(z.real)).limit_denominator(10**9)
        if cand in found:
            continue
        if _ueval(rest, cand) == 0:
            found.append(cand)
            rest = _udivexact(rest, [-cand, Fraction(1)])
    return found, rest


# -- complex rectangle arithmetic over mpmath intervals -----------------------------


class _Rect:
    """Axis-aligned complex rectangle with rigorous interval endpoints."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re = re
        self.im = im

    @classmethod
    def point(cls, re, im=0):
        return cls(iv.mpf(re), iv.mpf(im))

    @classmethod
    def from_fraction(cls, q: Fraction):
        return cls(iv.mpf(q.numerator) / q.denominator, iv.mpf(0))

    @classmethod
    def disk(cls, center, radius):
        r = iv.mpf(radius)
        return cls(
            iv.mpf(center.real) + iv.mpf([-1, 1]) * r,
            iv.mpf(center.imag) + iv.mpf([-1, 1]) * r,
        )

    def __add__(self, o):
        return _Rect(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        return _Rect(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        return _Rect(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    def __truediv__(self, o):
        d = o.re * o.re + o.im * o.im
        if 0 in d:
            raise ZeroDivisionError("interval denominator straddles zero")
        return _Rect((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def contains_zero(self) -> bool:
        return 0 in self.re and 0 in self.im

    def mid(self):
        return _Rect(iv.mpf(self.re.mid), iv.mpf(self.im.mid))

    def subset_interior(self, o) -> bool:
        return (
            o.re.a < self.re.a
            and self.re.b < o.re.b
            and o.im.a < self.im.a
            and self.im.b < o.im.b
        )

    def intersects(self, o) -> bool:
        return not (
            self.re.b < o.re.a
            or o.re.b < self.re.a
            or self.im.b < o.im.a
            or o.im.b < self.im.a
        )

    def intersect(self, o):
        return _Rect(
            iv.mpf([max(self.re.a, o.re.a), min(self.re.b, o.re.b)]),
            iv.mpf([max(self.im.a, o.im.a), min(self.im.b, o.im.b)]),
        )

    def width(self):
        return max(self.re.delta, self.im.delta)


def _rect_upoly_eval(coeffs, x: _Rect) -> _Rect:
    acc = _Rect.point(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _rect_coeffs(u):
    return [_Rect.from_fraction(c) for c in u]


def _interval_newton(coeffs, seed, radius, steps=40):
    """Certified enclosure of a simple root near seed, or None.

    coeffs are _Rect (possibly genuinely interval-valued, when they
    come from evaluating parameter-dependent coefficients over a
    parameter box); contraction of the Newton image certifies a unique
    root for every parameter value in the box.
    """
    dcoeffs = [coeffs[i] * _Rect.point(i) for i in range(1, len(coeffs))]
    X = _Rect.disk(seed, radius)
    certified = False
    for _ in range(steps):
        m = X.mid()
        fm = _rect_upoly_eval(coeffs, m)
        try:
            fpX = _rect_upoly_eval(dcoeffs, X)
            N = m - fm / fpX
        except ZeroDivisionError:
            return X if certified else None
        if N.subset_interior(X):
            certified = True
            X = N.intersect(X)
            if float(X.width()) < 1e-40:
                return X
            continue
        if not N.intersects(X):
            return None
        if certified:
            return X
        X = N.intersect(X)
    return X if certified else None


# -- bivariate charts and resultants -------------------------------------------------


def _chart(p: HomPoly, drop: int) -> dict:
    """Affine chart: set coordinate `drop` to 1, keep the other two."""
    keep = [i for i in range(3) if i != drop]
    out = {}
    for e, c in p.terms:
        key = (e[keep[0]], e[keep[1]])
        out[key] = out.get(key, 0) + Fraction(c)
    return {k: v for k, v in out.items() if v}


def _bideg(d: dict, var: int) -> int:
    return max((k[var] for k in d), default=-1)


def _bi_to_upolys(d: dict, main: int):
    """List (by main-variable degree) of coefficient polys in the other variable."""
    other = 1 - main
    n = _bideg(d, main)
    rows = [[] for _ in range(n + 1)]
    for (i, j), c in d.items():
        mdeg = (i, j)[main]
        odeg = (i, j)[other]
        row = rows[mdeg]
        while len(row) <= odeg:
            row.append(Fraction(0))
        row[odeg] += c
    return [_utrim(r) for r in rows]


def _bareiss_poly_det(mat):
    """Fraction-free determinant of a matrix of univariate polynomials."""
    n = len(mat)
    m = [[list(entry) for entry in row] for row in mat]
    prev = [Fraction(1)]
    sign = 1
    for k in range(n - 1):
        if not m[k][k]:
            swap = next((r for r in range(k + 1, n) if m[r][k]), None)
            if swap is None:
                # zero column: determinant vanishes
                return []
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = _uadd(_umul(m[i][j], m[k][k]), _uscale(_umul(m[i][k], m[k][j]), -1))
                m[i][j] = _udivexact(num, prev) if num else []
            m[i][k] = []
        prev = m[k][k]
    det = m[n - 1][n - 1]
    return _uscale(det, sign)


def _sylvester_resultant(d: dict, e: dict, elim: int):
    """Resultant of two bivariate polys w.r.t. variable `elim`, as a univariate poly."""
    A = _bi_to_upolys(d, elim)
    B = _bi_to_upolys(e, elim)
    da, db = len(A) - 1, len(B) - 1
    if da < 0 or db < 0:
        return []
    if da == 0 and db == 0:
        return [Fraction(1)]
    size = da + db
    mat = [[[] for _ in range(size)] for _ in range(size)]
    for s in range(db):
        for k in range(da + 1):
            mat[s][s + k] = list(A[da - k])
    for s in range(da):
        for k in range(db + 1):
            mat[db + s][s + k] = list(B[db - k])
    return _bareiss_poly_det(mat)


def _bi_eval_partial(d: dict, main: int, value: Fraction):
    """Substitute `value` for the main variable; univariate in the other."""
    rows = _bi_to_upolys(d, main)
    acc = []
    power = Fraction(1)
    for row in rows:
        acc = _uadd(acc, _uscale(row, power))
        power *= value
    return acc


def _bi_rect_coeffs(d: dict, main: int, Z: _Rect):
    """Coefficients in the other variable with the main variable boxed in Z."""
    rows = _bi_to_upolys(d, main)
    n = max((len(r) for r in rows), default=0)
    out = [_Rect.point(0) for _ in range(n)]
    power = _Rect.point(1)
    for row in rows:
        for j, c in enumerate(row):
            out[j] = out[j] + _Rect.from_fraction(c) * power
        power = power * Z
    while out and out[-1].contains_zero() and float(out[-1].width()) == 0:
        out.pop()
    return out


# -- intersection machinery ----------------------------------------------------------


def _numeric_roots(u, prec_bits):
    den = math.lcm(*(c.denominator for c in u))
    ints = [int(c * den) for c in u]
    with workprec(2 * prec_bits):
        try:
            return mp.polyroots(list(reversed(ints)), maxsteps=300, extraprec=prec_bits, error=False)
        except mp.NoConvergence:
            return None


class _PointSink:
    """Accumulates classified intersection points for the report."""

    def __init__(self, diff1: HomPoly, diff2: HomPoly):
        self.diff1 = diff1
        self.diff2 = diff2
        self.rational = []
        self.failures = []
        self.boxed = 0
        self.unresolved = 0

    def exact_point(self, pt):
        self.rational.append(pt)
        v1 = self.diff1.evaluate(pt)
        v2 = self.diff2.evaluate(pt)
        if v1 == 0 and v2 == 0:
            self.failures.append(pt)

    def algebraic_line_points(self, g):
        """Points [z:1:0] with g(z) = 0, g squarefree with no rational roots.

        Decided exactly: both differences vanish at a root of g iff g
        shares that root with both restrictions, caught by gcd.
        """
        e1 = self._restrict_line(self.diff1)
        e2 = self._restrict_line(self.diff2)
        both = _ugcd(_ugcd(g, e1), e2)
        self.boxed += _udeg(g)
        if _udeg(both) > 0:
            self.failures.append(("line", tuple(both)))

    def _restrict_line(self, p: HomPoly):
        # restrict to the line t = 0, then dehomogenize with w = 1
        return _bi_eval_partial(_restrict_t0(p), 1, Fraction(1))

    def box_point(self, coords):
        """coords: triple of _Rect with one exact 1; interval-decide the condition."""
        self.boxed += 1
        for diff in (self.diff1, self.diff2):
            val = _eval_hom_rect(diff, coords)
            if not val.contains_zero():
                return
        self.unresolved += 1


def _eval_hom_rect(p: HomPoly, coords) -> _Rect:
    acc = _Rect.point(0)
    for e, c in p.terms:
        term = _Rect.from_fraction(Fraction(c))
        for x, k in zip(coords, e):
            for _ in range(k):
                term = term * x
        acc = acc + term
    return acc


def _line_points(P, R, sink, prec_bits):
    """Common zeros on the line t = 0, treated as binary forms in (z, w)."""
    b1 = _restrict_t0(P)
    b2 = _restrict_t0(R)
    if not b1 and not b2:
        raise AssertionError("both forms vanish on the whole line; inputs not coprime")
    if not b1:
        g = b2
    elif not b2:
        g = b1
    else:
        g = _binary_gcd(b1, b2)
    if _udeg_binary(g) == 0:
        return
    # g is a binary form in (z, w); the root [1:0] shows up as a drop in
    # w-degree, every other root has w != 0
    zpoly, w_order = _dehom_binary(g)
    if w_order > 0:
        sink.exact_point((Fraction(1), Fraction(0), Fraction(0)))
    if _udeg(zpoly) >= 1:
        roots, rest = _urational_roots(zpoly)
        for z0 in roots:
            sink.exact_point((z0, Fraction(1), Fraction(0)))
        if _udeg(rest) >= 1:
            sink.algebraic_line_points(_usquarefree(rest))


def _restrict_t0(p: HomPoly) -> dict:
    out = {}
    for e, c in p.terms:
        if e[2] == 0:
            out[(e[0], e[1])] = out.get((e[0], e[1]), 0) + Fraction(c)
    return {k: v for k, v in out.items() if v}


def _binary_gcd(b1: dict, b2: dict):
    g = poly_gcd(HomPoly(2, b1.items()), HomPoly(2, b2.items()))
    return {e: Fraction(c) for e, c in g.terms}


def _udeg_binary(g: dict) -> int:
    return max((i + j for i, j in g), default=0)


def _dehom_binary(g: dict):
    """Binary form -> (poly in z with w = 1, multiplicity of the root [1:0])."""
    w_order = min(j for _, j in g)
    out = []
    for (i, j) in g:
        while len(out) <= i:
            out.append(Fraction(0))
    for (i, j), c in g.items():
        out[i] += c
    return _utrim(out), w_order


def _chart_points(P, R, sink, prec_bits):
    """Common zeros with t != 0, in the chart t = 1 with coordinates (z, w)."""
    p = _chart(P, 2)
    r = _chart(R, 2)
    dzp, dwp = _bideg(p, 0), _bideg(p, 1)
    dzr, dwr = _bideg(r, 0), _bideg(r, 1)
    if dwp <= 0 and dwr <= 0:
        # both univariate in z: coprime forms share no root
        zz = _ugcd(_bi_to_upolys(p, 1)[0], _bi_to_upolys(r, 1)[0])
        assert _udeg(zz) == 0, "unexpected common univariate root"
        return
    res = _sylvester_resultant(p, r, 1)
    if not res:
        # elimination degenerated: swap the roles of the variables
        res = _sylvester_resultant(p, r, 0)
        if not res:
            raise AssertionError("resultant vanished in both directions; not coprime")
        _chart_points_swapped(p, r, res, sink, prec_bits)
        return
    _chart_points_main(p, r, res, sink, prec_bits, swap=False)


def _chart_points_swapped(p, r, res, sink, prec_bits):
    ps = {(j, i): c for (i, j), c in p.items()}
    rs = {(j, i): c for (i, j), c in r.items()}
    _chart_points_main(ps, rs, res, sink, prec_bits, swap=True)


def _chart_points_main(p, r, res, sink, prec_bits, swap):
    if _udeg(res) < 1:
        return
    zroots, rest = _urational_roots(res)
    for z0 in zroots:
        pz = _bi_eval_partial(p, 0, z0)
        rz = _bi_eval_partial(r, 0, z0)
        if not pz and not rz:
            raise AssertionError("a full line of common zeros; inputs not coprime")
        q = rz if not pz else (pz if not rz else _ugcd(pz, rz))
        if _udeg(q) < 1:
            continue
        wroots, wrest = _urational_roots(_usquarefree(q))
        for w0 in wroots:
            sink.exact_point(_assemble(z0, w0, swap))
        if _udeg(wrest) >= 1:
            _boxed_w_for_exact_z(z0, wrest, sink, prec_bits, swap)
    if _udeg(rest) >= 1:
        _boxed_z_branch(p, r, _usquarefree(rest), sink, prec_bits, swap)


def _assemble(z0, w0, swap):
    if swap:
        z0, w0 = w0, z0
    return (Fraction(z0), Fraction(w0), Fraction(1))


def _assemble_rect(Z, W, swap):
    if swap:
        Z, W = W, Z
    return (Z, W, _Rect.point(1))


def _boxed_w_for_exact_z(z0, wpoly, sink, prec_bits, swap):
    seeds = _numeric_roots(wpoly, prec_bits)
    if seeds is None:
        sink.unresolved += 1
        return
    coeffs = _rect_coeffs(wpoly)
    Zfix = _Rect.from_fraction(z0)
    for s in seeds:
        box = _interval_newton(coeffs, complex(s), 10.0 ** (-max(6, prec_bits // 16)))
        if box is None:
            box = _interval_newton(coeffs, complex(s), 1e-3)
        if box is None:
            sink.unresolved += 1
            continue
        sink.box_point(_assemble_rect(Zfix, box, swap))


def _boxed_z_branch(p, r, zpoly, sink, prec_bits, swap):
    """Certified boxes for common zeros whose z-coordinate is irrational."""
    seeds = _numeric_roots(zpoly, prec_bits)
    if seeds is None:
        sink.unresolved += 1
        return
    zcoeffs = _rect_coeffs(zpoly)
    for s in seeds:
        Z = _interval_newton(zcoeffs, complex(s), 10.0 ** (-max(6, prec_bits // 16)))
        if Z is None:
            sink.unresolved += 1
            continue
        # every common zero above Z is a root of p(z, .) (or r if p
        # degenerates); enclose them all with the parametric Newton
        basis = p if _bideg(p, 1) > 0 else r
        other = r if basis is p else p
        cw = _bi_rect_coeffs(basis, 0, Z)
        if not cw or cw[-1].contains_zero():
            sink.unresolved += 1
            continue
        center = _bi_eval_partial_float(basis, Z)
        wseeds = _numeric_roots(center, prec_bits) if _udeg(center) >= 1 else None
        if wseeds is None:
            sink.unresolved += 1
            continue
        for ws in wseeds:
            W = _interval_newton(cw, complex(ws), 1e-4) or _interval_newton(
                cw, complex(ws), 1e-2
            )
            if W is None:
                sink.unresolved += 1
                continue
            # discard boxes provably off the second curve
            oval = _eval_bi_rect(other, Z, W)
            if not oval.contains_zero():
                continue
            sink.box_point(_assemble_rect(Z, W, swap))


def _bi_eval_partial_float(d: dict, Z: _Rect):
    """Approximate coefficients in w at the center of Z, as exact Fractions."""
    zc = Fraction(float(Z.re.mid)).limit_denominator(10**12)
    return _bi_eval_partial(d, 0, zc)


def _eval_bi_rect(d: dict, Z: _Rect, W: _Rect) -> _Rect:
    acc = _Rect.point(0)
    for (i, j), c in d.items():
        term = _Rect.from_fraction(c)
        for _ in range(i):
            term = term * Z
        for _ in range(j):
            term = term * W
        acc = acc + term
    return acc


def check_intersection_conditions(inst: FamilyInstance, precision: int = 96) -> IntersectionReport:
    """Pointwise difference condition on the finite set {P=0} n {R=0}.

    Finiteness comes exactly from the two coprimality facts; the points
    themselves are found by eliminating one chart variable with an
    exact resultant.  Rational points and points on the line t = 0 are
    decided exactly; the remaining algebraic points get certified
    interval enclosures, and the verdict degrades to UNKNOWN when the
    intervals cannot separate a difference from zero.
    """
    d21 = inst.Q2 - inst.Q1
    d31 = inst.Q3 - inst.Q1
    if not _is_coprime_pair(d21, d31) or not _is_coprime_pair(inst.P, inst.R):
        return IntersectionReport(
            verdict=FAIL,
            rational_points=(),
            boxed_points=0,
            failure_witnesses=(),
            unresolved=0,
        )
    diff1 = inst.Q1 - inst.Q3
    diff2 = inst.Q2 - inst.Q3
    sink = _PointSink(diff1, diff2)
    old = iv.prec
    iv.prec = max(2 * precision, 160)
    try:
        _line_points(inst.P, inst.R, sink, precision)
        _chart_points(inst.P, inst.R, sink, precision)
    finally:
        iv.prec = old
    if sink.failures:
        verdict = FAIL
    elif sink.unresolved:
        verdict = UNKNOWN
    else:
        verdict = PASS
    return IntersectionReport(
        verdict=verdict,
        rational_points=tuple(sink.rational),
        boxed_points=sink.boxed,
        failure_witnesses=tuple(sink.failures),
        unresolved=sink.unresolved,
    )


# -- third check: rank and pencil -----------------------------------------------------


def _rref(rows):
    rows = [list(r) for r in rows]
    nr, nc = len(rows), len(rows[0])
    pivots = []
    r = 0
    for c in range(nc):
        piv = next((i for i in range(r, nr) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(nr):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == nr:
            break
    return rows, pivots


def _jacobian_rows_at_one(inst: FamilyInstance):
    one = (Fraction(1), Fraction(1), Fraction(1))
    comps = [inst.P * q - inst.R for q in (inst.Q1, inst.Q2, inst.Q3)]
    rows = []
    for comp in comps:
        rows.append([Fraction(comp.partial(j).evaluate(one)) for j in range(3)])
    return rows


def _pencil_kernel_witness(inst: FamilyInstance):
    """Exact witness (a, b, c) with P dividing a Q1 + b Q2 + c Q3, or None."""
    dp, dq = inst.P.degree, inst.Q1.degree
    if dp > dq:
        return None
    lmons = _monomials(dq - dp)
    cols = []
    for q in (inst.Q1, inst.Q2, inst.Q3):
        cols.append({e: Fraction(c) for e, c in q.terms})
    for m in lmons:
        prod = inst.P * HomPoly.monomial(3, m)
        cols.append({e: -Fraction(c) for e, c in prod.terms})
    rows_idx = sorted({e for col in cols for e in col})
    mat = [[col.get(e, Fraction(0)) for col in cols] for e in rows_idx]
    rref, pivots = _rref(mat)
    free = [c for c in range(len(cols)) if c not in pivots]
    if not free:
        return None
    # any nonzero kernel vector has a nonzero (a, b, c) head, because the
    # L-columns alone are independent (multiplication by P is injective)
    fc = free[0]
    vec = [Fraction(0)] * len(cols)
    vec[fc] = Fraction(1)
    for rr, pc in zip(rref, pivots):
        vec[pc] = -rr[fc]
    abc = tuple(vec[:3])
    assert any(x != 0 for x in abc), "kernel vector with zero pencil part"
    lcm = math.lcm(*(x.denominator for x in abc))
    scaled = [int(x * lcm) for x in abc]
    g = math.gcd(*(abs(x) for x in scaled))
    scaled = [x // g for x in scaled]
    if next(x for x in scaled if x) < 0:
        scaled = [-x for x in scaled]
    return tuple(scaled)


def _monomials(deg):
    return [(i, j, deg - i - j) for i in range(deg + 1) for j in range(deg + 1 - i)]


_AXIS_TRIPLES = (
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 1, 1),
    (1, -1, 0),
    (1, 0, -1),
    (0, 1, -1),
    (1, 1, -2),
    (2, -1, -1),
)


def check_rank_and_pencil(inst: FamilyInstance, samples: int = 40, seed: int = 0):
    """Exact jacobian rank at (1,1,1) and pencil coprimality scan.

    The rank is computed in rational arithmetic (and must be exactly 2
    to PASS; 3 is impossible since every row annihilates (1,1,1)).
    The pencil check first solves exactly for any member divisible by
    P, then samples gcds at fixed axis triples plus seeded random
    triples; any hit is an exact FAIL with the witness triple.
    """
    rows = _jacobian_rows_at_one(inst)
    for row in rows:
        assert sum(row) == 0, "jacobian row not orthogonal to (1,1,1)"
    _, pivots = _rref(rows)
    rank = len(pivots)
    assert rank <= 2
    rank_report = RankReport(rank=rank, verdict=PASS if rank == 2 else FAIL)

    witness = _pencil_kernel_witness(inst)
    if witness is not None:
        return rank_report, PencilReport(verdict=FAIL, witness=witness, method="kernel")
    rng = random.Random(seed)
    triples = list(_AXIS_TRIPLES)
    while len(triples) < len(_AXIS_TRIPLES) + samples:
        t = (rng.randint(-9, 9), rng.randint(-9, 9), rng.randint(-9, 9))
        if any(t):
            triples.append(t)
    for a, b, c in triples:
        member = inst.Q1 * a + inst.Q2 * b + inst.Q3 * c
        if member.is_zero or poly_gcd(inst.P, member).degree > 0:
            return rank_report, PencilReport(verdict=FAIL, witness=(a, b, c), method="sampled")
    # for linear P divisibility and common-factor sharing coincide, so the
    # kernel solve alone already decides the question; otherwise a PASS is
    # only as strong as the sampling
    method = "kernel" if inst.P.degree == 1 else "randomized"
    return rank_report, PencilReport(verdict=PASS, witness=None, method=method)


def run_preflight(
    inst: FamilyInstance, precision: int = 96, samples: int = 40, seed: int = 0
) -> PreflightReport:
    """All three checks, folded into one three-valued summary."""
    cop = check_coprimality(inst)
    inter = check_intersection_conditions(inst, precision=precision)
    rank_rep, pencil_rep = check_rank_and_pencil(inst, samples=samples, seed=seed)
    verdicts = (cop, inter.verdict, rank_rep.verdict, pencil_rep.verdict)
    if any(v == FAIL for v in verdicts):
        overall = FAIL
    elif all(v == PASS for v in verdicts):
        overall = PASS
    else:
        overall = UNKNOWN
    return PreflightReport(
        coprimality=cop,
        intersection=inter.verdict,
        rank=rank_rep.rank,
        rank_verdict=rank_rep.verdict,
        pencil=pencil_rep.verdict,
        overall=overall,
    )


# -- random generation ------------------------------------------------------------------


def random_family(deg_p: int, deg_q: int, coeff_bound: int, seed: int) -> FamilyInstance:
    """Seeded rejection sampling of a valid instance.

    Q2, Q3 and R are nudged by integer multiples of a single monomial
    so the calibration at (1,1,1) holds exactly; candidates failing
    construction or the exact coprimality check are rejected.
    """
    if deg_p < 1:
        raise ValueError("deg_p must be >= 1")
    if deg_q < 2:
        raise ValueError(
            "deg_q must be >= 2: with deg_q = 1 the dominant growth rate "
            "degenerates to 1 and iteration gains nothing"
        )
    if coeff_bound < 1:
        raise ValueError("coeff_bound must be >= 1")
    rng = random.Random(seed)
    one = (Fraction(1), Fraction(1), Fraction(1))
    for _ in range(400):
        P = random_hompoly(rng, 3, deg_p, 6, coeff_bound)
        if P.is_zero or P.evaluate(one) == 0:
            continue
        q1 = random_hompoly(rng, 3, deg_q, 8, coeff_bound)
        if q1.is_zero or q1.evaluate(one) == 0:
            continue
        target = q1.evaluate(one)
        q2 = _calibrate(random_hompoly(rng, 3, deg_q, 8, coeff_bound), target, (0, deg_q, 0))
        q3 = _calibrate(random_hompoly(rng, 3, deg_q, 8, coeff_bound), target, (0, 0, deg_q))
        if q2 is None or q3 is None or q2 == q1 or q3 == q1 or q2 == q3:
            continue
        r0 = random_hompoly(rng, 3, deg_p + deg_q, 10, coeff_bound)
        R = _calibrate(r0, P.evaluate(one) * target, (deg_p + deg_q, 0, 0))
        if R is None:
            continue
        try:
            inst = build_family_map(P, q1, q2, q3, R)
        except (FamilyError, NotDominant):
            continue
        if check_coprimality(inst) != PASS:
            continue
        return inst
    raise GenerationExhausted(f"no valid instance in 400 attempts (seed {seed})")


def _calibrate(p: HomPoly, target, mono):
    one = (Fraction(1), Fraction(1), Fraction(1))
    delta = target - p.evaluate(one)
    if delta:
        p = p + HomPoly.monomial(3, mono) * int(delta)
    if p.is_zero or p.evaluate(one) != target:
        return None
    return p


def sample_divisor_points(inst: FamilyInstance, count: int, seed: int = 0):
    """Exact rational points on {P = 0}, found by solving for one coordinate.

    Prefers a coordinate in which P is linear; otherwise hunts rational
    roots of the specialized univariate.  May return fewer than `count`
    points when rational points are scarce.
    """
    P = inst.P
    rng = random.Random(seed)
    linear = next((x for x in range(3) if _deg_in_var(P, x) == 1), None)
    out = []
    tries = 0
    while len(out) < count and tries < 60 * count:
        tries += 1
        vals = [Fraction(rng.randint(-20, 20)) for _ in range(3)]
        if linear is not None:
            a, b = _linear_split(P, linear, vals)
            if a == 0:
                continue
            vals[linear] = -b / a
        else:
            u = _specialize_to_var(P, vals)
            roots, _ = _urational_roots(u) if _udeg(u) >= 1 else ([], u)
            if not roots:
                continue
            vals[2] = roots[0]
        pt = tuple(vals)
        if all(v == 0 for v in pt):
            continue
        assert P.evaluate(pt) == 0
        out.append(pt)
    return out


def _deg_in_var(p: HomPoly, x: int) -> int:
    return max((e[x] for e, _ in p.terms), default=0)


def _linear_split(p: HomPoly, x: int, vals):
    a = Fraction(0)
    b = Fraction(0)
    for e, c in p.terms:
        rest = Fraction(c)
        for y in range(3):
            if y != x:
                rest *= vals[y] ** e[y]
        if e[x] == 1:
            a += rest
        elif e[x] == 0:
            b += rest
        else:
            raise AssertionError("not linear in the chosen variable")
    return a, b


def _specialize_to_var(p: HomPoly, vals):
    out = []
    for e, c in p.terms:
        coef = Fraction(c) * vals[0] ** e[0] * vals[1] ** e[1]
        while len(out) <= e[2]:
            out.append(Fraction(0))
        out[e[2]] += coef
    return _utrim(out)


# -- family files ------------------------------------------------------------------------


_FAMILY_KEYS = ("P", "Q1", "Q2", "Q3", "R")


def parse_family_text(text: str) -> FamilyInstance:
    """Parse a family file: vars line, optional map lines, and the five forms.

    When map lines are present they must agree with the map rebuilt
    from the forms.
    """
    names = None
    maps = []
    forms = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, body = line.partition(" ")
        if head == "vars":
            names = tuple(line.split()[1:])
            if len(names) != 3:
                raise ParseError(f"line {lineno}: need exactly three variables")
        elif head == "map":
            if names is None:
                raise ParseError(f"line {lineno}: vars line must come first")
            maps.append(parse_poly(body, names))
        elif head in _FAMILY_KEYS:
            if names is None:
                raise ParseError(f"line {lineno}: vars line must come first")
            if head in forms:
                raise ParseError(f"line {lineno}: duplicate {head} line")
            forms[head] = parse_poly(body, names)
        else:
            raise ParseError(f"line {lineno}: unexpected directive {head!r}")
    if names is None:
        raise ParseError("missing vars line")
    missing = [k for k in _FAMILY_KEYS if k not in forms]
    if missing:
        raise ParseError(f"missing lines: {', '.join(missing)}")
    inst = build_family_map(*(forms[k] for k in _FAMILY_KEYS), names=names)
    if maps:
        if len(maps) != 3:
            raise ParseError("a family file needs exactly three map lines when present")
        built = make_map(maps, names)
        if built.components != inst.map.components:
            raise ParseError("map lines disagree with the map induced by the forms")
    return inst


def family_to_text(inst: FamilyInstance) -> str:
    names = inst.names
    lines = [map_to_text(inst.map).rstrip("\n")]
    for key, form in zip(_FAMILY_KEYS, (inst.P, inst.Q1, inst.Q2, inst.Q3, inst.R)):
        lines.append(f"{key} {poly_to_text(form, names)}")
    return "\n".join(lines) + "\n"


def load_family(path) -> FamilyInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_family_text(fh.read())


def save_family(inst: FamilyInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(family_to_text(inst))
