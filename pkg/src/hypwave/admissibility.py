"""Strichartz admissibility calculus on H^n in the reciprocal plane (1/p1, 1/q1).

Rational inputs are handled exactly with :class:`fractions.Fraction`; float
inputs are compared with a 1e-12 band. Strict and non-strict inequalities are
kept apart because open and closed boundaries have different meanings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Optional, Sequence, Union

from .geometry import check_dim

Number = Union[int, float, Fraction]
BAND = 1e-12
HALF = Fraction(1, 2)


class AdmissibilityError(ValueError):
    pass


def _exact(*xs) -> bool:
    return all(isinstance(x, Rational) for x in xs)


def _as_fraction(x) -> Fraction:
    """Exact value of a rational, or the shortest decimal reading of a float."""
    if isinstance(x, Rational):
        return Fraction(x)
    return Fraction(repr(float(x)))


def _cmp(lhs, rhs, strict: bool, exact: bool) -> bool:
    if exact:
        return lhs > rhs if strict else lhs >= rhs
    lhs, rhs = float(lhs), float(rhs)
    return lhs > rhs + BAND if strict else lhs >= rhs - BAND


def beta(q: Number, n: int) -> Number:
    """(n+1)/2 (1/2 - 1/q), the derivative loss of the L^q Strichartz bound."""
    n = check_dim(n)
    if q < 2:
        raise AdmissibilityError("beta needs q >= 2")
    if isinstance(q, Rational):
        return Fraction(n + 1, 2) * (HALF - Fraction(1) / q)
    return (n + 1) / 2 * (0.5 - 1.0 / q)


# --- constraints as half-planes a x + b y >= c ---------------------------------


@dataclass(frozen=True)
class HalfPlane:
    a: Fraction
    b: Fraction
    c: Fraction
    strict: bool
    name: str

    def value(self, x, y):
        return self.a * x + self.b * y - self.c

    def holds(self, x, y, exact: bool = True) -> bool:
        return _cmp(self.a * x + self.b * y, self.c, self.strict, exact)


def _left_constraints(n: int, sigma, open_flag: bool) -> list[HalfPlane]:
    """Box, (PQ1) and (Q1) for the pair itself."""
    F = Fraction
    s = sigma
    out = [
        HalfPlane(F(1), F(0), F(0), True, "x>0"),
        HalfPlane(F(-1), F(0), -HALF, open_flag, "x<=1/2"),
        HalfPlane(F(0), F(1), F(0), True, "y>0"),
        HalfPlane(F(0), F(-1), -HALF, True, "y<1/2"),
    ]
    if n == 2:
        out.append(HalfPlane(F(1), F(2), 1 - s, True, "PQ1"))
        out.append(HalfPlane(F(0), F(1), HALF - F(2, 3) * s, open_flag, "Q1"))
    else:
        out.append(HalfPlane(F(1), F(n), F(n, 2) - s, open_flag, "PQ1"))
        out.append(HalfPlane(F(0), F(1), HALF - F(2, n + 1) * s, open_flag, "Q1"))
    return out


def _dual_constraints(n: int, sigma, p) -> list[HalfPlane]:
    """Box, (PQ2) and (Q2) for the dual pair (1 - p x, 1 - p y), written in (x, y)."""
    F = Fraction
    s = sigma
    out = [
        HalfPlane(-p, F(0), F(-1), True, "x2>0"),  # 1 - p x > 0
        HalfPlane(p, F(0), HALF, False, "x2<=1/2"),  # 1 - p x <= 1/2
        HalfPlane(F(0), -p, F(-1), True, "y2>0"),
        HalfPlane(F(0), p, HALF, True, "y2<1/2"),
    ]
    if n == 2:
        # (1 - p x) + 2 (1 - p y) > sigma
        out.append(HalfPlane(-p, -2 * p, s - 3, True, "PQ2"))
        # 1 - p y >= 2 sigma / 3 - 1/6
        out.append(HalfPlane(F(0), -p, F(2, 3) * s - F(7, 6), False, "Q2"))
    else:
        out.append(HalfPlane(-p, -n * p, F(n, 2) - 1 + s - 1 - n, False, "PQ2"))
        out.append(HalfPlane(F(0), -p, F(n - 3, 2 * (n + 1)) + F(2, n + 1) * s - 1, False, "Q2"))
    return out


def _original_constraints(n: int) -> list[HalfPlane]:
    F = Fraction
    if n == 2:
        return [HalfPlane(F(2), F(1), HALF, True, "T2")]
    return [HalfPlane(F(2), F(n - 1), F(n - 1, 2), False, "Tn")]


# --- queries --------------------------------------------------------------------


@dataclass(frozen=True)
class PairQuery:
    """Exponent pair (p1, q1) with its context; stored through the reciprocals."""

    inv_p: Number
    inv_q: Number
    n: int
    sigma: Number
    p: Optional[Number] = None
    open_flag: bool = False

    def __post_init__(self):
        check_dim(self.n)

    @classmethod
    def from_exponents(cls, p1: Number, q1: Number, n: int, sigma: Number, p: Optional[Number] = None,
                       open_flag: bool = False) -> "PairQuery":
        if p1 <= 0 or q1 <= 0:
            raise AdmissibilityError("exponents must be positive")
        inv = (lambda v: Fraction(1) / v) if _exact(p1, q1) else (lambda v: 1.0 / v)
        return cls(inv(p1), inv(q1), n, sigma, p, open_flag)

    @property
    def exact(self) -> bool:
        return _exact(self.inv_p, self.inv_q, self.sigma) and (self.p is None or _exact(self.p))

    @property
    def exponents(self) -> tuple[float, float]:
        return 1.0 / float(self.inv_p), 1.0 / float(self.inv_q)

    def with_sigma(self, sigma: Number) -> "PairQuery":
        return PairQuery(self.inv_p, self.inv_q, self.n, sigma, self.p, self.open_flag)


def _check_sigma(sigma) -> None:
    if not 0 < sigma < 1:
        raise AdmissibilityError("sigma must lie in (0, 1)")


def _convert(q: PairQuery):
    if q.exact:
        F = Fraction
        return F(q.inv_p), F(q.inv_q), F(q.sigma), (None if q.p is None else F(q.p)), True
    # floats: evaluate the same rational constraint data in floating point
    return float(q.inv_p), float(q.inv_q), float(q.sigma), (None if q.p is None else float(q.p)), False


def _failures(constraints, x, y, exact) -> list[str]:
    return [c.name for c in constraints if not c.holds(x, y, exact)]


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    failed: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


def admissibility_check(q: PairQuery) -> CheckResult:
    _check_sigma(q.sigma)
    x, y, s, _, exact = _convert(q)
    cons = _left_constraints(q.n, _as_fraction(s) if exact else s, q.open_flag)
    bad = _failures(cons, x, y, exact)
    return CheckResult(not bad, tuple(bad))


def is_sigma_admissible(q: PairQuery) -> bool:
    return admissibility_check(q).ok


def dual_pair(q: PairQuery):
    if q.p is None:
        raise AdmissibilityError("the nonlinearity exponent p is required")
    return 1 - q.p * q.inv_p, 1 - q.p * q.inv_q


def control_check(q: PairQuery) -> CheckResult:
    if q.p is None:
        raise AdmissibilityError("the nonlinearity exponent p is required")
    _check_sigma(q.sigma)
    x, y, s, p, exact = _convert(q)
    cons = _dual_constraints(q.n, s, p)
    bad = _failures(cons, x, y, exact)
    return CheckResult(not bad, tuple(bad))


def is_control(q: PairQuery) -> bool:
    return control_check(q).ok


def is_compatible(q: PairQuery) -> bool:
    return is_sigma_admissible(q) and is_control(q)


def is_original_admissible(q: PairQuery) -> bool:
    """Membership in the classical set T_n (no regularity constraint)."""
    x, y, _, _, exact = _convert(q)
    box = _left_constraints(q.n, Fraction(1, 2), q.open_flag)[:4]
    return not _failures(box + _original_constraints(q.n), x, y, exact)


def kappa_range(q: PairQuery) -> tuple:
    """Range of derivatives that can be kept on the left: (lo, hi, hi_closed)."""
    if not is_sigma_admissible(q):
        raise AdmissibilityError("pair is not sigma-admissible")
    x, y, s = q.inv_p, q.inv_q, q.sigma
    n = q.n
    if is_original_admissible(q):
        return 0, s - beta(1 / y, n), True
    if n >= 3:
        return 0, n * y + x - Fraction(n, 2) + s, True
    return 0, 2 * y + x - 1 + s, False


# --- exact polygon clipping -----------------------------------------------------


def _clip(poly: list, hp: HalfPlane) -> list:
    """Sutherland-Hodgman against the closed half-plane a x + b y >= c."""
    out = []
    m = len(poly)
    for i in range(m):
        P, Q = poly[i], poly[(i + 1) % m]
        fp, fq = hp.value(*P), hp.value(*Q)
        if fp >= 0:
            out.append(P)
        if (fp >= 0) != (fq >= 0) and fp != fq:
            t = fp / (fp - fq)
            out.append((P[0] + t * (Q[0] - P[0]), P[1] + t * (Q[1] - P[1])))
    # drop consecutive duplicates
    dedup = []
    for v in out:
        if not dedup or v != dedup[-1]:
            dedup.append(v)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


_UNIT_BOX = [(Fraction(0), Fraction(0)), (HALF, Fraction(0)), (HALF, HALF), (Fraction(0), HALF)]


def _feasible_point(constraints: Sequence[HalfPlane]):
    """A point satisfying every constraint (strict ones strictly), or None."""
    poly = list(_UNIT_BOX)
    for hp in constraints:
        poly = _clip(poly, hp)
        if not poly:
            return None
    cx = sum(v[0] for v in poly) / len(poly)
    cy = sum(v[1] for v in poly) / len(poly)
    # the vertex mean lies in the relative interior, so strict constraints fail
    # there only if they are tight on the whole polygon
    if all(hp.holds(cx, cy, True) for hp in constraints):
        return cx, cy
    return None


def compatible_constraints(n: int, sigma: Fraction, p: Fraction, open_flag: bool = False) -> list[HalfPlane]:
    return _left_constraints(n, sigma, open_flag) + _dual_constraints(n, sigma, p)


def compatible_witness(n: int, sigma: Number, p: Number, open_flag: bool = False):
    """Exact (1/p1, 1/q1) of some (p, sigma)-compatible pair, or None."""
    return _feasible_point(compatible_constraints(n, _as_fraction(sigma), _as_fraction(p), open_flag))


# --- critical exponents and closed forms ----------------------------------------


@dataclass(frozen=True)
class CriticalExponents:
    p_conf: float
    p_c: float
    p_strauss: float


def critical_exponents(n: int) -> CriticalExponents:
    n = check_dim(n)
    a = 0.5 + 1.0 / (n - 1)
    p0 = a + math.sqrt(a * a + 2.0 / (n - 1))
    p_c = math.inf if n == 2 else 1 + 4 / (n - 2)
    return CriticalExponents(1 + 4 / (n - 1), p_c, p0)


def _p_c_exact(n: int):
    return None if n == 2 else 1 + Fraction(4, n - 2)


@dataclass(frozen=True)
class ClosedForm:
    value: Fraction
    attained: bool  # False when the table requires sigma > value
    row: str


def sigma_closed_form(p: Number, n: int) -> ClosedForm:
    """Minimal regularity from the local-theory tables."""
    n = check_dim(n)
    p = _as_fraction(p)
    _check_p(p, n)
    F = Fraction
    if n == 2:
        if p >= 5:
            return ClosedForm(1 - F(2) / (p - 1), False, "sigma_3")
        if p > 3:
            return ClosedForm(F(3, 4) - 1 / (p - 1), True, "sigma_2")
        if p > 2:
            return ClosedForm(F(3, 4) - F(3, 2) / p, False, "sigma_1")
        return ClosedForm(F(0), False, "sigma_0")
    if n == 3:
        if p >= 3:
            return ClosedForm(F(3, 2) - 2 / (p - 1), True, "sigma_3")
        if p > 2:
            return ClosedForm(1 - 1 / (p - 1), True, "sigma_2")
        return ClosedForm(F(0), False, "sigma_0")
    if p >= 1 + F(4, n - 1):
        return ClosedForm(F(n, 2) - 2 / (p - 1), True, "sigma_3")
    if p >= 1 + F(4 * (n - 1), (n - 1) ** 2 + 4):
        return ClosedForm(F(n + 1, 4) - 1 / (p - 1), True, "sigma_2")
    if p > 1 + F(3, n):
        return ClosedForm(F(n + 1) * (n * p - n - 3) / (4 * n * p - 2 * n - 2), True, "sigma_1")
    return ClosedForm(F(0), False, "sigma_0")


def _check_p(p, n) -> None:
    pc = _p_c_exact(n)
    if not p > 1 or (pc is not None and not p < pc):
        raise AdmissibilityError(f"p must lie in (1, p_c) for n={n}")


def table_pair(p: Number, n: int, sigma: Number, eps: Optional[Number] = None):
    """Compatible pair (p1, q1) listed in the tables for the row containing p, or None if its side condition fails."""
    n = check_dim(n)
    F = Fraction
    p, s = _as_fraction(p), _as_fraction(sigma)
    row = sigma_closed_form(p, n).row
    if n == 2:
        if row == "sigma_3":
            if eps is None:
                raise AdmissibilityError("the p >= 5 row needs an explicit eps")
            e = _as_fraction(eps)
            if not 0 < e < min(2 - (1 - s) * (p - 1), F(1, 3)):
                return None
            return 3 * p / (2 + s - 3 * e), 6 * p / (7 - 4 * s)
        if row == "sigma_2":
            return 3 * p / (1 + 3 * s), F(6) / (3 - 4 * s)
        if row == "sigma_1":
            sp = sigma_closed_form(p, n).value
            if not 0 < s - sp < HALF:
                return None
            return p / (1 - sp), p / (1 - s + sp)
        if not s < F(3) * (p - 1) / (4 * p):
            return None
        return 2 * p, F(6) / (3 - 4 * s)
    if n == 3:
        if row in ("sigma_3", "sigma_2"):
            return 2 * p / (1 + s), 2 * p / (2 - s)
        if not s < (p - 1) / p:
            return None
        return 2 * p, 2 / (1 - s)
    if row in ("sigma_3", "sigma_2"):
        return F(n + 1) * p / (2 + (n - 1) * s), F(2 * (n + 1)) * p / (n + 5 - 4 * s)
    if row == "sigma_1":
        return 2 * p, F(2 * n) * p / (n + 3 - 2 * s)
    if not s < (p - 1) / (2 * p):
        return None
    return 2 * p, F(2 * (n + 1)) / (n + 1 - 4 * s)


@dataclass(frozen=True)
class MinSigmaResult:
    sigma: float
    witness: tuple  # (p1, q1) at the returned sigma
    witness_exact: tuple  # (1/p1, 1/q1) as Fractions
    closed_form: float
    attained: bool
    agrees: bool
    seeded_by_table: bool
    sigma_exact: Fraction = Fraction(0)


def min_sigma(p: Number, n: int, tol: float = 1e-9) -> MinSigmaResult:
    """Infimum of sigma in (0, 1) admitting a (p, sigma)-compatible pair.

    The compatible set in (1/p1, 1/q1, sigma) is convex, so its sigma-projection
    is an interval; bisection runs between 0 and a feasible sigma found first
    from the table pair, then from a coarse scan.
    """
    n = check_dim(n)
    pf = _as_fraction(p)
    _check_p(pf, n)
    cf = sigma_closed_form(pf, n)
    hi, seeded = _seed(pf, n, cf)
    if hi is None:
        raise AdmissibilityError(f"no compatible pair found for p={p}, n={n}")
    lo = Fraction(0)
    tol_f = Fraction(tol)
    while hi - lo > tol_f:
        mid = (lo + hi) / 2
        if compatible_witness(n, mid, pf) is not None:
            hi = mid
        else:
            lo = mid
        hi = _round_up(hi, tol_f)
    w = compatible_witness(n, hi, pf)
    sigma = float(hi)
    agrees = abs(sigma - float(cf.value)) <= max(tol, 1e-12) * 2
    return MinSigmaResult(sigma, (1 / float(w[0]), 1 / float(w[1])), w, float(cf.value),
                          compatible_witness(n, cf.value, pf) is not None if cf.value > 0 else False,
                          agrees, seeded, hi)


def _round_up(x: Fraction, tol: Fraction) -> Fraction:
    # keep denominators bounded during bisection
    d = 1 << 60
    return Fraction(math.ceil(x * d), d) if x.denominator > d else x


def _seed(p: Fraction, n: int, cf: ClosedForm):
    s0 = cf.value if cf.attained else cf.value + Fraction(1, 10**9)
    if 0 < s0 < 1:
        eps = None
        if n == 2 and cf.row == "sigma_3":
            eps = min(2 - (1 - s0) * (p - 1), Fraction(1, 3)) / 2
        pair = table_pair(p, n, s0, eps)
        if pair is not None:
            q = PairQuery.from_exponents(pair[0], pair[1], n, s0, p)
            if is_compatible(q):
                return s0, True
    for k in range(1, 100):
        s = Fraction(k, 100)
        if compatible_witness(n, s, p) is not None:
            return s, False
    return None, False


# --- region polygons --------------------------------------------------------------


@dataclass(frozen=True)
class RegionPolygon:
    n: int
    sigma: float
    regime: str
    vertices: list  # counter-clockwise (1/p, 1/q) as Fractions
    open_edges: list  # True where the edge from vertex i to i+1 is excluded
    original_vertices: list  # T_n intersected with (Q1)
    constraints: list = field(repr=False, default_factory=list)

    def contains(self, x, y) -> bool:
        """Membership with strict edges honoured (agrees with is_sigma_admissible)."""
        exact = _exact(x, y)
        return all(c.holds(x, y, exact) for c in self.constraints)

    def float_vertices(self) -> list:
        return [(float(a), float(b)) for a, b in self.vertices]


def regime(sigma: Number, n: int) -> str:
    n = check_dim(n)
    if n == 2:
        return "high" if sigma >= Fraction(3, 4) else "low"
    if n == 3:
        return "single"
    return "high" if sigma >= Fraction(n + 1, 2 * (n - 1)) else "low"


def _ccw(poly):
    area = sum(a[0] * b[1] - b[0] * a[1] for a, b in zip(poly, poly[1:] + poly[:1]))
    return poly if area >= 0 else poly[::-1]


def region_polygon(sigma: Number, n: int, open_flag: bool = False) -> RegionPolygon:
    """Closure of the sigma-admissible region with the open edges marked."""
    n = check_dim(n)
    _check_sigma(sigma)
    s = _as_fraction(sigma)
    cons = _left_constraints(n, s, open_flag)
    poly = list(_UNIT_BOX)
    for hp in cons:
        poly = _clip(poly, hp)
    poly = _ccw(poly)
    flags = []
    for a, b in zip(poly, poly[1:] + poly[:1]):
        tight = [c for c in cons if c.value(*a) == 0 and c.value(*b) == 0]
        flags.append(any(c.strict for c in tight))
    orig = list(_UNIT_BOX)
    for hp in cons + _original_constraints(n):
        orig = _clip(orig, hp)
    return RegionPolygon(n, float(s), regime(s, n), poly, flags, _ccw(orig) if orig else [], cons)


def on_open_boundary(poly: RegionPolygon, x, y) -> bool:
    """True if (x, y) lies on an excluded edge of the polygon closure."""
    verts = poly.vertices
    for (a, b), is_open in zip(zip(verts, verts[1:] + verts[:1]), poly.open_edges):
        if not is_open:
            continue
        cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
        inside = min(a[0], b[0]) <= x <= max(a[0], b[0]) and min(a[1], b[1]) <= y <= max(a[1], b[1])
        if cross == 0 and inside:
            return True
    return False


def lattice_rows(poly: RegionPolygon, step: Fraction = Fraction(1, 40)):
    """Lattice points of the closed box [0, 1/2]^2 that lie in the closure of the region.

    Yields (inv_p, inv_q, in_original, on_open_boundary).
    """
    m = int(HALF / step)
    closed = [HalfPlane(c.a, c.b, c.c, False, c.name) for c in poly.constraints]
    orig = _original_constraints(poly.n)
    for i in range(m + 1):
        for j in range(m + 1):
            x, y = i * step, j * step
            if not all(c.holds(x, y) for c in closed):
                continue
            inside = poly.contains(x, y)
            in_orig = inside and all(c.holds(x, y) for c in orig)
            yield x, y, in_orig, not inside
