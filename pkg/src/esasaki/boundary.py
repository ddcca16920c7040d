"""Smooth-extension tests over special orbits.

A tensor component on a disk bundle over a special orbit is a one-sided
radial profile; it extends smoothly exactly when its restriction to a
ray satisfies a divisibility-and-vanishing pattern
(:func:`kw_extends`), and the two geometric branches (three-dimensional
round orbit, one-dimensional circle orbit) reduce to concrete parity and
limit conditions on the flow profiles of the coframe coefficients.

Limits at the origin are obtained by polynomial extrapolation over a
geometric radius grid (r, r/2, r/4, ...).  Parity is decided from
one-sided derivative estimates: a full-degree polynomial fit on a
uniform radius grid, solved exactly over the rationals so that monomial
inputs are resolved to machine accuracy; odd-order coefficients must
vanish to tolerance for an even verdict.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from esasaki.evolution import CaseIIIState, case_iii_rhs, rk4_step

__all__ = [
    "TaylorData",
    "kw_extends",
    "richardson_limit",
    "parity_fit",
    "ConditionCheck",
    "ExtensionReport",
    "check_round_branch",
    "check_circle_branch",
    "reject_case_iii",
    "geometric_radii",
]

ROUND_BRANCH = "RoundSU2"
CIRCLE_BRANCH = "CircleU1"
REJECT = "Reject"


# ---------------------------------------------------------------------------
# the equivariant extension criterion


@dataclass(frozen=True)
class TaylorData:
    """One-sided Taylor coefficients c0..cN at the origin, with the
    stabilizer order sigma and the target weight n."""

    coeffs: tuple
    sigma: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


def kw_extends(data: TaylorData, tol: float = 0.0):
    """Smooth equivariant extendability of a radial profile.

    True exactly when sigma divides n and every coefficient c_k vanishes
    for k in {0, ..., |n/sigma|-1} and for k > |n/sigma| with k - |n/sigma|
    odd.  Returns (verdict, failing_index); the index is None when the
    verdict is True or when divisibility itself fails.
    """
    if data.sigma <= 0:
        raise ValueError("sigma must be a positive integer")
    if data.n % data.sigma != 0:
        return False, None
    weight = abs(data.n // data.sigma)
    if data.order < weight + 2:
        raise ValueError(f"need Taylor order >= |n/sigma| + 2 = {weight + 2}")
    must_vanish = list(range(weight)) + list(range(weight + 1, data.order + 1, 2))
    for k in sorted(must_vanish):
        if abs(data.coeffs[k]) > tol:
            return False, k
    return True, None


# ---------------------------------------------------------------------------
# limit and parity machinery


def geometric_radii(r0: float = 0.256, levels: int = 9) -> list:
    """The grid (r0, r0/2, r0/4, ...); the default bottoms out at 1e-3."""
    return [r0 * 0.5**i for i in range(levels)]


def richardson_limit(radii: Sequence[float], values: Sequence[float]):
    """Polynomial extrapolation of samples on a shrinking grid to r = 0.

    Returns (limit, error_estimate) by Neville's scheme; the estimate is
    the change contributed by the deepest level.
    """
    rs = [float(r) for r in radii]
    T = [float(v) for v in values]
    n = len(T)
    prev = T[0]
    for k in range(1, n):
        for i in range(n - k):
            T[i] = (rs[i + k] * T[i] - rs[i] * T[i + 1]) / (rs[i + k] - rs[i])
        if k == n - 2:
            prev = T[0]
    return T[0], abs(T[0] - prev)


def _solve_exact(matrix, rhs):
    """Gaussian elimination over exact rationals."""
    n = len(rhs)
    M = [[Fraction(matrix[i][j]) for j in range(n)] + [Fraction(rhs[i])] for i in range(n)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(M[r][col]))
        if M[pivot][col] == 0:
            raise ZeroDivisionError("singular fit system")
        M[col], M[pivot] = M[pivot], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [x - factor * y for x, y in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def parity_fit(profile: Callable, rmax: float, npts: int = 9):
    """Full-degree polynomial fit of a one-sided profile on (0, rmax].

    Returns (coeffs, even_defect, odd_defect) where coeffs are the
    polynomial coefficients in the scaled variable s = r/rmax and the
    defects are the largest even/odd coefficient magnitudes after
    normalizing by the largest sample.  An even function has odd defect
    at the level of the fit error; pure monomials r^j with j < npts are
    resolved exactly up to rounding of the samples.
    """
    nodes = [Fraction(j, npts) for j in range(1, npts + 1)]
    samples = [Fraction(float(profile(float(s) * rmax))) for s in nodes]
    vmax = max(abs(float(v)) for v in samples)
    if vmax == 0.0:
        zeros = tuple(0.0 for _ in range(npts))
        return zeros, 0.0, 0.0
    vander = [[s**j for j in range(npts)] for s in nodes]
    coeffs = _solve_exact(vander, samples)
    coeffs = tuple(float(c) for c in coeffs)
    even_defect = max(abs(c) for j, c in enumerate(coeffs) if j % 2 == 0) / vmax
    odd_defect = max(abs(c) for j, c in enumerate(coeffs) if j % 2 == 1) / vmax
    return coeffs, even_defect, odd_defect


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    measured: float
    target: float
    tolerance: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "target": self.target,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _cond(name, measured, target, tol) -> ConditionCheck:
    ok = bool(abs(measured - target) <= tol) if math.isfinite(measured) else False
    return ConditionCheck(name, float(measured), float(target), float(tol), ok)


def _cond_ge(name, measured, floor, tol) -> ConditionCheck:
    ok = bool(measured >= floor - tol) if math.isfinite(measured) else False
    return ConditionCheck(name, float(measured), float(floor), float(tol), ok)


@dataclass
class ExtensionReport:
    """Outcome of an extension test: named conditions with measured
    values; the report passes exactly when every condition passes."""

    branch: str
    conditions: list
    applicable: bool = True
    notes: str = ""
    end_reports: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        own = all(c.passed for c in self.conditions)
        subs = all(rep.passed for rep in self.end_reports.values())
        return self.applicable and own and subs

    def failing(self) -> list:
        out = [c.name for c in self.conditions if not c.passed]
        for tag, rep in self.end_reports.items():
            out.extend(f"{tag}:{name}" for name in rep.failing())
        return out

    def to_json_dict(self) -> dict:
        data = {
            "branch": self.branch,
            "applicable": self.applicable,
            "pass": self.passed,
            "notes": self.notes,
            "conditions": [c.to_json_dict() for c in self.conditions],
        }
        if self.end_reports:
            data["end_reports"] = {k: v.to_json_dict() for k, v in self.end_reports.items()}
        return data

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)


# ---------------------------------------------------------------------------
# profile helpers

def _profile_series(profile, radii):
    return [profile(r) for r in radii]


def _v_of(state) -> float:
    h, k, b, c = state
    return 0.5 * math.hypot(h - k, b + c)


def _u_of(state) -> float:
    h, k, b, c = state
    return 0.5 * math.hypot(h + k, b - c)


def _delta_of(state) -> float:
    h, k, b, c = state
    return h * k - b * c


def _v_log_derivative(profile, r: float, rel: float = 1e-3) -> float:
    """r (dV/dr)/V by a central difference at radius r."""
    dr = rel * r
    vp = _v_of(profile(r + dr))
    vm = _v_of(profile(r - dr))
    v0 = _v_of(profile(r))
    if v0 == 0:
        return math.nan
    return r * (vp - vm) / (2.0 * dr) / v0


# ---------------------------------------------------------------------------
# branch checks


def check_round_branch(
    profile: Callable,
    radii: Optional[Sequence[float]] = None,
    *,
    tol_limit: float = 2e-3,
    tol_parity: float = 1e-4,
    tol_ratio: float = 0.2,
) -> ExtensionReport:
    """Extension test across a three-dimensional special orbit.

    ``profile`` maps a radius r > 0 to the coefficients (h, k, b, c).
    Checks that Delta/r^2, (h^2+c^2)/r^2 and (k^2+b^2)/r^2 are even with
    common limit 1/4, that (hb+ck)/r^4 is even, and, when the profile has
    a nonvanishing V component, that the radial logarithmic derivative
    r (dV/dr)/V stays nonnegative (a smooth vanishing V forces this; the
    obstructed flows measure -3 here).
    """
    radii = list(radii) if radii is not None else geometric_radii()
    if len(radii) < 4:
        raise ValueError("need at least four radii for extrapolation")
    radii = sorted(radii, reverse=True)
    states = _profile_series(profile, radii)

    delta_limit, _ = richardson_limit(radii, [_delta_of(s) for s in states])
    conditions = [_cond("delta_vanishes_at_origin", delta_limit, 0.0, tol_limit)]
    if not conditions[0].passed:
        return ExtensionReport(
            branch=ROUND_BRANCH,
            conditions=conditions,
            applicable=False,
            notes="inapplicable: Delta is bounded away from 0 at this end",
        )

    # parity fits use a quarter of the limit grid: the unresolved tail of
    # an analytic profile decays geometrically with the grid radius
    rmax = radii[0] / 4.0
    ratio_specs = [
        ("delta_over_r2", lambda s, r: _delta_of(s) / r**2, 0.25),
        ("h2c2_over_r2", lambda s, r: (s[0] ** 2 + s[3] ** 2) / r**2, 0.25),
        ("k2b2_over_r2", lambda s, r: (s[1] ** 2 + s[2] ** 2) / r**2, 0.25),
    ]
    for name, fn, target in ratio_specs:
        series = [fn(s, r) for s, r in zip(states, radii)]
        limit, _ = richardson_limit(radii, series)
        conditions.append(_cond(f"{name}_limit", limit, target, tol_limit))
        _, _, odd = parity_fit(lambda r: fn(profile(r), r), rmax)
        conditions.append(_cond(f"{name}_even", odd, 0.0, tol_parity))

    _, _, odd4 = parity_fit(lambda r: (profile(r)[0] * profile(r)[2] + profile(r)[3] * profile(r)[1]) / r**4, rmax)
    conditions.append(_cond("hbck_over_r4_even", odd4, 0.0, tol_parity))

    v_values = [_v_of(s) for s in states]
    if max(v_values) > 1e-12:
        q_small = _v_log_derivative(profile, radii[-1])
        conditions.append(_cond_ge("v_log_derivative_nonnegative", q_small, 0.0, tol_ratio))
    return ExtensionReport(branch=ROUND_BRANCH, conditions=conditions)


def check_circle_branch(
    profile: Callable,
    q: int,
    sigma: int,
    C: float,
    m: int,
    radii: Optional[Sequence[float]] = None,
    *,
    tol_limit: float = 1e-5,
    tol_parity: float = 1e-4,
    tol_identity: float = 1e-6,
) -> ExtensionReport:
    """Extension test across a one-dimensional special orbit.

    ``sigma`` may carry the orientation sign (its absolute value is the
    stabilizer intersection order); p = q m + sigma and the slope
    functional p + qC must be positive, else the sign normalization was
    violated and a ValueError is raised.  Uses the turning identity
    Delta'' = 1 - 6 Delta to express the curvature condition, and checks
    it against a finite-difference second derivative.
    """
    p = q * m + sigma
    pqc = p + q * C
    if pqc <= 0:
        raise ValueError(f"sign normalization violated: p + qC = {pqc} <= 0")
    radii = list(radii) if radii is not None else geometric_radii()
    radii = sorted(radii, reverse=True)
    rmax = radii[0] / 4.0
    states = _profile_series(profile, radii)
    deltas = [_delta_of(s) for s in states]

    delta0, _ = richardson_limit(radii, deltas)
    target_delta = q * (C + m) / (6.0 * pqc)
    coeffs, _, odd = parity_fit(lambda r: _delta_of(profile(r)), rmax)
    delta_pp_fd = 2.0 * coeffs[2] / rmax**2

    conditions = [
        _cond("delta_origin_value", delta0, target_delta, tol_limit),
        ConditionCheck("delta_origin_nonzero", float(delta0), 0.0, tol_limit, bool(abs(delta0) > tol_limit)),
        _cond("delta_even", odd / max(abs(delta0), 1e-12), 0.0, tol_parity),
        _cond("curvature_matches_sigma", abs(1.0 - 6.0 * delta0), abs(sigma) / pqc, 10 * tol_limit),
        _cond("delta_pp_fd_matches_identity", delta_pp_fd, 1.0 - 6.0 * delta0, tol_identity),
    ]

    if p != 0:
        cross1 = [s[0] * s[2] + s[3] * s[1] for s in states]       # hb + ck
        cross2 = [s[0] ** 2 + s[3] ** 2 - s[2] ** 2 - s[1] ** 2 for s in states]
        lim1, _ = richardson_limit(radii, cross1)
        lim2, _ = richardson_limit(radii, cross2)
        conditions.append(_cond("hb_ck_vanishes", lim1, 0.0, 10 * tol_limit))
        conditions.append(_cond("h2c2_minus_b2k2_vanishes", lim2, 0.0, 10 * tol_limit))

    return ExtensionReport(branch=CIRCLE_BRANCH, conditions=conditions)


# ---------------------------------------------------------------------------
# rejection of the non-conformal family


def _integrate_case_iii(y0: np.ndarray, span: float, step: float) -> np.ndarray:
    """Fixed-step integration over a signed span, assumed interior."""
    n = max(1, int(round(abs(span) / step)))
    h = span / n
    y = np.array(y0, dtype=float)
    t = 0.0
    for _ in range(n):
        y = rk4_step(case_iii_rhs, t, y, h)
        t += h
    return y


def _locate_boundary(y0: np.ndarray, direction: float, step: float, max_span: float):
    """March toward the boundary with step halving as `a` collapses.

    Returns (signed boundary offset from the start, reason) with reason
    None when no boundary was found within max_span.
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    h = direction * step
    min_h = step * 2.0**-30
    while abs(t) < max_span:
        # keep `a` from collapsing by more than ~25% within one step
        a_rate = abs(case_iii_rhs(t, y)[4])
        while abs(h) > min_h and a_rate * abs(h) > 0.25 * y[4]:
            h *= 0.5
        y_try = rk4_step(case_iii_rhs, t, y, h)
        if not np.all(np.isfinite(y_try)) or y_try[4] <= 0:
            if abs(h) <= min_h:
                return t, "turning_point"
            h *= 0.5
            continue
        y, t = y_try, t + h
        if y[4] < 1e-10:
            return t, "turning_point"
        if y[0] * y[1] - y[2] * y[3] <= 0:
            return t, "delta_nonpositive"
        if np.linalg.norm(y) > 1e8:
            return t, "divergence"
        if abs(h) < step:
            h = direction * min(step, 2.0 * abs(h))
    return t, None


def reject_case_iii(
    flow,
    *,
    step: Optional[float] = None,
    max_span: float = 50.0,
    round_delta_tol: float = 5e-3,
) -> ExtensionReport:
    """Test both ends of the maximal interval of a non-conformal flow.

    Every such flow fails to extend to a compact space; the report names
    the obstruction per end.  At a circle-type end (Delta bounded away
    from zero) a smooth extension needs the V component to vanish with
    nonnegative radial log-derivative; at a round-type end (Delta -> 0)
    the measured limit of r (dV/dr)/V is -3, violating nonnegativity.
    The precondition is a genuinely non-conformal flow (V not identically
    zero); flows with V = 0 are the conformal family in disguise.
    """
    state0 = flow.states[0]
    if not isinstance(state0, CaseIIIState):
        raise ValueError("expected a flow of the five-parameter family")
    if state0.V == 0:
        raise ValueError("V vanishes identically: the flow is case ii in disguise")
    step = step or flow.meta.get("step", 1e-3)

    y0 = np.array([state0.h, state0.k, state0.b, state0.c, state0.a])
    end_reports = {}
    notes = []
    for tag, direction in (("upper", 1.0), ("lower", -1.0)):
        t_star, reason = _locate_boundary(y0, direction, step, max_span)
        if reason is None:
            end_reports[tag] = ExtensionReport(
                branch=REJECT,
                conditions=[ConditionCheck("finite_boundary", float("inf"), 0.0, max_span, False)],
                notes=f"{tag} end: no finite special-orbit boundary within span {max_span}",
            )
            notes.append(f"{tag}: no finite boundary")
            continue

        safe = max(abs(t_star) * 1e-4, 4.0 * step)
        r_top = max(min(0.128, abs(t_star) / 4.0), 8.0 * safe)
        levels = 5
        radii = [r_top * 0.5**i for i in range(levels)]

        @lru_cache(maxsize=None)
        def profile(r, _dir=direction, _t=t_star):
            y = _integrate_case_iii(y0, _t - _dir * r, step)
            return (y[0], y[1], y[2], y[3])

        delta_end = _delta_of(profile(radii[-1]))
        if abs(delta_end) < round_delta_tol:
            rep = check_round_branch(profile, radii, tol_limit=5e-2, tol_parity=5e-2, tol_ratio=0.5)
            rep.notes = f"{tag} end ({reason}): round-type analysis at t* = {t_star:.6f}"
        else:
            v_small = _v_of(profile(radii[-1]))
            v_ratio = min(_v_log_derivative(profile, radii[-1]), _v_log_derivative(profile, radii[-2]))
            conditions = [
                ConditionCheck(
                    "circle_v_vanishes",
                    float(v_small),
                    0.0,
                    1e-2,
                    bool(v_small <= 1e-2 * max(1.0, _u_of(profile(radii[-1])))),
                ),
                _cond_ge("circle_v_log_derivative_nonnegative", v_ratio, 0.0, 0.05),
            ]
            rep = ExtensionReport(branch=CIRCLE_BRANCH, conditions=conditions)
            rep.notes = f"{tag} end ({reason}): circle-type analysis at t* = {t_star:.6f}, Delta = {delta_end:.6f}"
        end_reports[tag] = rep
        if not rep.passed:
            notes.append(f"{tag}: {', '.join(rep.failing())}")

    overall = ExtensionReport(
        branch=REJECT,
        conditions=[],
        end_reports=end_reports,
        notes="; ".join(notes) if notes else "both ends pass necessary conditions (unexpected)",
    )
    return overall
