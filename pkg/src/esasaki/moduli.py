"""Admissibility and enumeration of compact families.

The turning values Delta of the conformal flow are the nonnegative roots
of the cubic A + Delta^2 - 4 Delta^3 = 0.  A compact extension exists for
A = 0 (the round branch) or for -1/108 < A < 0 with both roots carrying
integer orbit data (q, sigma) obtained from the exact ratio

    q / sigma = (1 / (C + m)) * 6 Delta / (1 - 6 Delta),

cleared of denominators subject to the two integrality conditions
(half-slope (q m + sigma)/2 integral and coprime to q).  sigma is kept
signed internally -- its absolute value is the order of the intersection
with the principal stabilizer, and the sign normalization makes the
slope functional p + qC positive.

Everything runs in exact rational arithmetic when the inputs are
``fractions.Fraction``; float inputs use deterministic bisection plus
bounded rational reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isqrt
from typing import Optional

__all__ = [
    "cubic_roots",
    "ratio_from_root",
    "rational_reconstruct",
    "integer_witness",
    "enumerate_rational_families",
    "EndData",
    "YpqFamily",
    "GroupDiagram",
    "build_diagram",
    "classify_A",
    "ClassificationVerdict",
    "ROUND_SPHERE_BRANCH",
    "YPQ_BRANCH",
    "NO_COMPACT_EXTENSION",
    "A_MIN",
]

A_MIN = Fraction(-1, 108)

ROUND_SPHERE_BRANCH = "RoundSphereBranch"
YPQ_BRANCH = "YpqBranch"
NO_COMPACT_EXTENSION = "NoCompactExtension"


class ExactRootsUnavailable(ValueError):
    """The cubic does not split over the rationals."""


# ---------------------------------------------------------------------------
# cubic roots


def _cubic_value(A, delta):
    return A + delta * delta - 4 * delta**3


def _bisect(A: float, lo: float, hi: float, iters: int = 200) -> float:
    flo = _cubic_value(A, lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = _cubic_value(A, mid)
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _divisors(n: int) -> list:
    n = abs(n)
    out = set()
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.add(d)
            out.add(n // d)
        d += 1
    return sorted(out)


def _cubic_roots_exact(A: Fraction) -> list:
    """Nonnegative rational roots with multiplicity; raises when a
    nonnegative root exists but is irrational."""
    if A < A_MIN:
        return []
    if A == A_MIN:
        return [(Fraction(1, 6), 2)]
    if A == 0:
        return [(Fraction(0), 2), (Fraction(1, 4), 1)]
    expected = 1 if A > 0 else 2  # nonnegative real roots, counted simply

    # roots of 4 b x^3 - b x^2 - a over Z, with A = a/b in lowest terms
    a, b = A.numerator, A.denominator
    coeffs = [4 * b, -b, 0, -a]

    def value(x: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in coeffs:
            acc = acc * x + c
        return acc

    found = []
    for r in _divisors(a):
        for s in _divisors(4 * b):
            cand = Fraction(r, s)
            if cand not in found and value(cand) == 0:
                found.append(cand)
    result = sorted((root, 1) for root in found if root >= 0)
    if len(result) != expected:
        raise ExactRootsUnavailable(
            "cubic has irrational nonnegative roots; use float mode"
        )
    return result


def cubic_roots(A):
    """Ordered nonnegative roots of A + Delta^2 - 4 Delta^3 = 0, with
    multiplicity, as a list of (root, multiplicity).

    Exact ``Fraction`` input takes the exact-factorization path; float
    input uses deterministic bisection on the bracketing intervals.
    Below the minimum -1/108 of the branch there are no nonnegative
    roots and the list is empty.
    """
    if isinstance(A, Fraction) or isinstance(A, int):
        A = Fraction(A)
        if A == A_MIN:
            return [(Fraction(1, 6), 2)]
        return _cubic_roots_exact(A)

    A = float(A)
    a_min = float(A_MIN)
    if A == a_min:
        return [(1.0 / 6.0, 2)]
    if A < a_min:
        return []
    if A == 0.0:
        return [(0.0, 2), (0.25, 1)]
    if A > 0.0:
        hi = 0.5
        while _cubic_value(A, hi) > 0:
            hi *= 2.0
        return [(_bisect(A, 0.25, hi), 1)]
    lower = _bisect(A, 0.0, 1.0 / 6.0)
    upper = _bisect(A, 1.0 / 6.0, 0.25)
    return [(lower, 1), (upper, 1)]


# ---------------------------------------------------------------------------
# orbit data from roots


def ratio_from_root(delta, C, m: int):
    """The exact ratio q/sigma determined by a turning value."""
    w = C + m
    if w == 0:
        raise ValueError("C + m must be nonzero")
    one = Fraction(1) if isinstance(delta, Fraction) else 1.0
    denom = one - 6 * delta
    if denom == 0:
        raise ValueError("delta = 1/6 gives no circle orbit data")
    return (6 * delta / denom) / w


def rational_reconstruct(x: float, max_den: int, rel_tol: float = 1e-13) -> Optional[Fraction]:
    """Best continued-fraction approximation with bounded denominator,
    or None when nothing within tolerance exists.

    The tolerance is tight by design: a genuinely rational value carries
    only rounding error (~1e-16 relative), while convergents of an
    irrational at denominators within the bound sit at distance of order
    1/q^2 >~ 1e-12 and must be refused.
    """
    if isinstance(x, Fraction):
        return x if x.denominator <= max_den else None
    frac = Fraction(x).limit_denominator(max_den)
    if abs(float(frac) - x) <= rel_tol * max(1.0, abs(x)):
        return frac
    return None


@dataclass(frozen=True)
class EndData:
    """Integer orbit data at one special orbit."""

    delta: object
    ratio: object
    q: int
    sigma: int          # order of the intersection with the stabilizer
    sigma_signed: int   # sign normalized so that p + qC > 0
    p: int              # p = q m + sigma_signed

    def to_json_dict(self) -> dict:
        return {
            "delta": _num_to_json(self.delta),
            "ratio": _num_to_json(self.ratio),
            "q": self.q,
            "sigma": self.sigma,
            "sigma_signed": self.sigma_signed,
            "p": self.p,
        }


def _num_to_json(x):
    return str(x) if isinstance(x, Fraction) else float(x)


def integer_witness(ratio: Fraction, C, m: int, delta=None) -> EndData:
    """Clear the exact ratio q/sigma to the unique integer pair.

    The scale is fixed by requiring (q m + sigma)/2 to be an integer
    coprime to q; the common sign is normalized so that p + qC > 0.
    """
    if ratio == 0:
        raise ValueError("ratio must be nonzero for a circle orbit")
    a, b = ratio.numerator, ratio.denominator
    k = 1 if (a * m + b) % 2 == 0 else 2
    q, sig = k * a, k * b
    p = q * m + sig
    if p + q * C == 0:
        raise ValueError("slope functional p + qC vanishes")
    if p + q * C < 0:
        q, sig, p = -q, -sig, -p
    if p % 2 != 0:
        raise ValueError(f"p = qm + sigma = {p} is odd: no admissible slope")
    if gcd(abs(q), abs(p) // 2) != 1:
        raise ValueError(f"q = {q} and p/2 = {p // 2} are not coprime")
    return EndData(delta=delta, ratio=ratio, q=q, sigma=abs(sig), sigma_signed=sig, p=p)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class YpqFamily:
    """Admissibility record for one compact family."""

    A: object
    C: object
    m: int
    delta_minus: object
    delta_plus: object
    minus: Optional[EndData]
    plus: EndData
    quasi_regular: bool
    simply_connected: bool
    S: object = None
    branch: str = YPQ_BRANCH

    CSV_HEADER = (
        "S",
        "delta_minus",
        "delta_plus",
        "A",
        "q_minus",
        "sigma_minus",
        "q_plus",
        "sigma_plus",
        "C",
        "quasi_regular",
        "simply_connected",
    )

    def csv_row(self) -> list:
        return [
            _num_to_json(self.S) if self.S is not None else "",
            _num_to_json(self.delta_minus),
            _num_to_json(self.delta_plus),
            _num_to_json(self.A),
            self.minus.q if self.minus else "",
            self.minus.sigma if self.minus else "",
            self.plus.q,
            self.plus.sigma,
            _num_to_json(self.C),
            int(self.quasi_regular),
            int(self.simply_connected),
        ]

    def to_json_dict(self) -> dict:
        return {
            "branch": self.branch,
            "S": _num_to_json(self.S) if self.S is not None else None,
            "A": _num_to_json(self.A),
            "C": _num_to_json(self.C),
            "m": self.m,
            "delta_minus": _num_to_json(self.delta_minus),
            "delta_plus": _num_to_json(self.delta_plus),
            "minus": self.minus.to_json_dict() if self.minus else None,
            "plus": self.plus.to_json_dict(),
            "quasi_regular": self.quasi_regular,
            "simply_connected": self.simply_connected,
        }


def enumerate_rational_families(denominator_bound: int, m: int = 0) -> list:
    """All quasi-regular families with root-sum denominator within bound.

    Scans rational S = delta_plus + delta_minus in (1/4, 1/3) in lowest
    terms; S qualifies exactly when S(1 - 3S) is a rational square, and
    then delta_pm = (S +- sqrt(S - 3 S^2))/2, the third root is 1/4 - S,
    and A = 4 delta_plus delta_minus (1/4 - S) < 0.  The conventional
    constant C = 6 - m makes every ratio rational.  Results are sorted
    by S, so smaller bounds give prefixes of larger ones after a merge.
    """
    if denominator_bound < 2:
        raise ValueError("denominator bound must be at least 2")
    C = Fraction(6 - m)
    families = []
    for den in range(2, denominator_bound + 1):
        n_lo = den // 4 + 1
        n_hi = (den - 1) // 3
        for num in range(n_lo, n_hi + 1):
            if gcd(num, den) != 1:
                continue
            S = Fraction(num, den)
            square = num * (den - 3 * num)
            root_num = isqrt(square)
            if root_num * root_num != square:
                continue
            root = Fraction(root_num, den)
            d_plus = (S + root) / 2
            d_minus = (S - root) / 2
            if d_minus <= 0 or d_minus >= Fraction(1, 6) or d_plus <= Fraction(1, 6):
                continue
            d_third = Fraction(1, 4) - S
            A = 4 * d_plus * d_minus * d_third
            assert A_MIN < A < 0
            assert _cubic_value(A, d_plus) == 0 and _cubic_value(A, d_minus) == 0
            end_minus = integer_witness(ratio_from_root(d_minus, C, m), C, m, d_minus)
            end_plus = integer_witness(ratio_from_root(d_plus, C, m), C, m, d_plus)
            families.append(
                YpqFamily(
                    A=A,
                    C=C,
                    m=m,
                    delta_minus=d_minus,
                    delta_plus=d_plus,
                    minus=end_minus,
                    plus=end_plus,
                    quasi_regular=True,
                    simply_connected=gcd(abs(end_plus.q), abs(end_minus.q)) == 1,
                    S=S,
                )
            )
    families.sort(key=lambda fam: fam.S)
    return families


# ---------------------------------------------------------------------------
# group diagrams


def _mod1(x: Fraction) -> Fraction:
    return x - (x.numerator // x.denominator)


@dataclass(frozen=True)
class GroupDiagram:
    """The data K in {H-, H+} in SU(2) x U(1), phases as exact rationals."""

    k_generators: tuple
    k_elements: tuple
    h_plus: dict
    h_minus: dict
    intersection_orders: dict
    pi1_order: int
    simply_connected: bool

    def to_json_dict(self) -> dict:
        enc = lambda pair: [str(pair[0]), str(pair[1])]
        return {
            "K_generators": [enc(g) for g in self.k_generators],
            "K_order": len(self.k_elements),
            "K_elements": [enc(g) for g in self.k_elements],
            "H_plus": self.h_plus,
            "H_minus": self.h_minus,
            "intersection_orders": self.intersection_orders,
            "pi1_order": self.pi1_order,
            "simply_connected": self.simply_connected,
        }


def _subgroup_closure(generators) -> set:
    elements = {(Fraction(0), Fraction(0))}
    frontier = list(elements)
    while frontier:
        base = frontier.pop()
        for g in generators:
            new = (_mod1(base[0] + g[0]), _mod1(base[1] + g[1]))
            if new not in elements:
                elements.add(new)
                frontier.append(new)
    return elements


def _circle_order(elements, P: int, Q: int) -> int:
    """Order of the intersection of a finite subgroup of the torus with
    the circle of integer slope (P, Q)."""
    count = 0
    for x, y in elements:
        if (Q * x - P * y).denominator == 1:
            count += 1
    return count


def build_diagram(family: YpqFamily) -> GroupDiagram:
    """Construct and validate the canonical group diagram of a family.

    Raises ``ValueError`` naming the failed condition when the integer
    data violates parity or coprimality, or when the computed stabilizer
    intersection orders disagree with sigma.
    """
    ends = [("plus", family.plus)]
    if family.branch == YPQ_BRANCH:
        if family.minus is None:
            raise ValueError("two-root family requires orbit data at both ends")
        ends.append(("minus", family.minus))

    for name, end in ends:
        if end.p % 2 != 0:
            raise ValueError(f"{name} end: p = qm+sigma = {end.p} is odd")
        if gcd(abs(end.q), abs(end.p) // 2) != 1:
            raise ValueError(
                f"{name} end: q = {end.q} and (qm+sigma)/2 = {end.p // 2} are not coprime"
            )
        if end.q == 0:
            raise ValueError(f"{name} end: q must be nonzero")

    generators = tuple(
        (Fraction(1, 2), _mod1(Fraction(end.q, end.sigma))) for _, end in ends
    )
    elements = _subgroup_closure(generators)

    orders = {}
    for name, end in ends:
        got = _circle_order(elements, end.p // 2, end.q)
        orders[name] = got
        if got != end.sigma:
            raise ValueError(
                f"{name} end: stabilizer intersection has order {got}, expected {end.sigma}"
            )

    if family.branch == ROUND_SPHERE_BRANCH:
        # the three-dimensional end absorbs SU(2): K must miss it
        for x, y in elements:
            if y == 0 and x != 0:
                raise ValueError("K meets SU(2) x {1} nontrivially on the round branch")
        h_minus = {"type": "su2_times_K"}
        pi1 = 1
        simply = True
    else:
        q_plus, q_minus = family.plus.q, family.minus.q
        pi1 = gcd(abs(q_plus), abs(q_minus))
        simply = pi1 == 1
        h_minus = {
            "type": "circle_times_K",
            "p": family.minus.p,
            "q": family.minus.q,
            "sigma": family.minus.sigma,
        }

    h_plus = {
        "type": "circle_times_K",
        "p": family.plus.p,
        "q": family.plus.q,
        "sigma": family.plus.sigma,
    }
    return GroupDiagram(
        k_generators=generators,
        k_elements=tuple(sorted(elements)),
        h_plus=h_plus,
        h_minus=h_minus,
        intersection_orders=orders,
        pi1_order=pi1,
        simply_connected=simply,
    )


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassificationVerdict:
    branch: str
    reason: str
    roots: tuple
    family: Optional[YpqFamily] = None

    def to_json_dict(self) -> dict:
        return {
            "branch": self.branch,
            "reason": self.reason,
            "roots": [[_num_to_json(r), m] for r, m in self.roots],
            "family": self.family.to_json_dict() if self.family else None,
        }


def classify_A(A, C, m: int, denominator_bound: int = 10**6) -> ClassificationVerdict:
    """Decide whether (A, C, m) admits a compact extension.

    Returns the branch (round sphere for A = 0, the two-root branch for
    -1/108 < A < 0 with integer witnesses within the denominator bound,
    otherwise no compact extension) together with the witness data.
    """
    exact = isinstance(A, (Fraction, int)) and isinstance(C, (Fraction, int))
    w = (C + m) if exact else float(C) + m
    if exact:
        try:
            roots = tuple(cubic_roots(Fraction(A)))
        except ExactRootsUnavailable:
            roots = tuple(cubic_roots(float(A)))
    else:
        roots = tuple(cubic_roots(float(A)))

    if A == 0:
        if w == 0:
            return ClassificationVerdict(NO_COMPACT_EXTENSION, "C + m = 0 degenerates the coframe", roots)
        quarter = Fraction(1, 4) if exact else 0.25
        ratio = ratio_from_root(quarter, C if exact else float(C), m)
        ratio_frac = rational_reconstruct(ratio, denominator_bound)
        if ratio_frac is None:
            return ClassificationVerdict(
                NO_COMPACT_EXTENSION, "irrational orbit ratio at the circle end", roots
            )
        try:
            end_plus = integer_witness(ratio_frac, _as_fraction(C, denominator_bound), m, quarter)
        except ValueError as exc:
            return ClassificationVerdict(NO_COMPACT_EXTENSION, str(exc), roots)
        if gcd(abs(end_plus.q), end_plus.sigma) != 1:
            # the order-sigma subgroup of the circle end would then meet
            # SU(2) x {1}, spoiling the sphere slice of the round end
            return ClassificationVerdict(
                NO_COMPACT_EXTENSION,
                f"round branch needs gcd(q, sigma) = 1, got q={end_plus.q}, sigma={end_plus.sigma}",
                roots,
            )
        family = YpqFamily(
            A=A,
            C=C,
            m=m,
            delta_minus=0 if exact else 0.0,
            delta_plus=quarter,
            minus=None,
            plus=end_plus,
            quasi_regular=_is_rational(C, denominator_bound),
            simply_connected=True,
            branch=ROUND_SPHERE_BRANCH,
        )
        return ClassificationVerdict(
            ROUND_SPHERE_BRANCH,
            "A = 0: round branch with integer orbit data at the circle end",
            roots,
            family,
        )

    a_cmp = A if exact else float(A)
    if a_cmp < (A_MIN if exact else float(A_MIN)) or a_cmp == A_MIN or a_cmp == float(A_MIN):
        return ClassificationVerdict(
            NO_COMPACT_EXTENSION,
            "turning cubic lacks two distinct positive roots (A <= -1/108)",
            roots,
        )
    if a_cmp > 0:
        return ClassificationVerdict(
            NO_COMPACT_EXTENSION,
            "A > 0: single turning point, no compact interval",
            roots,
        )

    positive = [r for r, mult in roots for _ in range(mult) if r > 0]
    if len(positive) != 2 or positive[0] == positive[1]:
        return ClassificationVerdict(
            NO_COMPACT_EXTENSION, "turning cubic lacks two distinct positive roots", roots
        )
    d_minus, d_plus = positive

    if w == 0:
        return ClassificationVerdict(NO_COMPACT_EXTENSION, "C + m = 0 degenerates the coframe", roots)
    ends = []
    c_frac = _as_fraction(C, denominator_bound)
    for delta in (d_minus, d_plus):
        c_arg = float(C) if isinstance(delta, float) else Fraction(C)
        ratio = ratio_from_root(delta, c_arg, m)
        ratio_frac = rational_reconstruct(ratio, denominator_bound)
        if ratio_frac is None or c_frac is None:
            return ClassificationVerdict(
                NO_COMPACT_EXTENSION,
                "no rational orbit ratio within the denominator bound",
                roots,
            )
        try:
            ends.append(integer_witness(ratio_frac, c_frac, m, delta))
        except ValueError as exc:
            return ClassificationVerdict(NO_COMPACT_EXTENSION, str(exc), roots)

    family = YpqFamily(
        A=A,
        C=C,
        m=m,
        delta_minus=d_minus,
        delta_plus=d_plus,
        minus=ends[0],
        plus=ends[1],
        quasi_regular=_is_rational(C, denominator_bound),
        simply_connected=gcd(abs(ends[0].q), abs(ends[1].q)) == 1,
    )
    return ClassificationVerdict(
        YPQ_BRANCH, "two distinct positive roots with integer orbit data", roots, family
    )


def _as_fraction(C, bound) -> Optional[Fraction]:
    if isinstance(C, Fraction):
        return C
    if isinstance(C, int):
        return Fraction(C)
    return rational_reconstruct(float(C), bound)


def _is_rational(C, bound) -> bool:
    return _as_fraction(C, bound) is not None
