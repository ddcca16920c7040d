"""Time evolution of invariant coframe structures.

The general flow integrates

    d/dt eta0   = 2 eta1
    d/dt eta23  = -d eta1
    d/dt eta31  = 3 eta03 - d eta2 + m e4 ^ eta3
    d/dt eta12  = -3 eta02 - m e4 ^ eta2 - d eta3

recovering (d/dt eta1, d/dt eta2, d/dt eta3) at each step from the 18
product-rule equations in 12 unknowns by linear least squares; the
least-squares residual is recorded as a consistency health metric (the
system is overdetermined and consistent only on solutions of the
structure equations).

Three parameter families are closed under the flow and are integrated in
reduced variables: the rotating closed-form family (case i), the
conformal family with conserved quantity A = 4h^6 - h^4 + (ah)^2
(case ii), and the five-parameter family (case iii) whose ratios
w/u and z/v are conserved.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from esasaki import moduli
from esasaki.structures import IdStructure, residual_hypo

__all__ = [
    "CaseIState",
    "CaseIIState",
    "CaseIIIState",
    "FlowResult",
    "ConstraintError",
    "closed_form_case_i",
    "fit_case_i",
    "evolve_general",
    "evolve_case_ii",
    "evolve_case_iii",
    "turning_points",
    "case_ii_endpoint_profile",
    "rk4_path",
]

EPS_ROT = math.sqrt(6.0)


class ConstraintError(RuntimeError):
    """The overdetermined evolution system became inconsistent."""


# ---------------------------------------------------------------------------
# ansatz states


@dataclass(frozen=True)
class CaseIState:
    """Rotating closed-form family: amplitude k, weight m, phase offset."""

    k: float
    m: int = 0
    phase: float = 0.0

    def structure(self, t: float) -> IdStructure:
        return closed_form_case_i(self.k, self.m, t + self.phase)


@dataclass(frozen=True)
class CaseIIState:
    """Conformal family (h, a) with constants C and m; requires h > 0."""

    h: float
    a: float
    C: float = 0.0
    m: int = 0

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError(f"h must be positive, got {self.h}")

    @property
    def A(self) -> float:
        h, a = self.h, self.a
        return 4 * h**6 - h**4 + (a * h) ** 2

    def to_id_structure(self) -> IdStructure:
        h, a, C, m = self.h, self.a, self.C, self.m
        rows = (
            (2 * h * h, 0.0, 0.0, 2 * C * h * h - (C + m) / 3.0),
            (a, 0.0, 0.0, a * C),
            (0.0, h, 0.0, 0.0),
            (0.0, 0.0, h, 0.0),
        )
        return IdStructure(rows, m)

    @classmethod
    def from_A(cls, h: float, A: float, C: float = 0.0, m: int = 0) -> "CaseIIState":
        """Start at height h on the level set of the conserved quantity A."""
        radicand = A + h**4 - 4 * h**6
        if radicand < 0:
            raise ValueError(f"h={h} is outside the band allowed by A={A}")
        return cls(h, math.sqrt(radicand) / h, C, m)


@dataclass(frozen=True)
class CaseIIIState:
    """Five-parameter family (h, k, b, c, a)."""

    h: float
    k: float
    b: float
    c: float
    a: float

    @property
    def delta(self) -> float:
        return self.h * self.k - self.b * self.c

    @property
    def u(self) -> float:
        return self.h + self.k

    @property
    def v(self) -> float:
        return self.h - self.k

    @property
    def z(self) -> float:
        return self.b + self.c

    @property
    def w(self) -> float:
        return self.b - self.c

    @property
    def U(self) -> float:  # noqa: N802 -- conventional symbol
        return 0.5 * math.hypot(self.u, self.w)

    @property
    def V(self) -> float:  # noqa: N802
        return 0.5 * math.hypot(self.v, self.z)

    @property
    def lam(self) -> float:
        return self.w / self.u

    @property
    def mu(self) -> float:
        return self.z / self.v

    def to_id_structure(self, m: int = 1) -> IdStructure:
        rows = (
            (2 * self.delta, 0.0, 0.0, -m / 3.0),
            (self.a, 0.0, 0.0, 0.0),
            (0.0, self.h, self.b, 0.0),
            (0.0, self.c, self.k, 0.0),
        )
        return IdStructure(rows, m)


def closed_form_case_i(k: float, m: int, t: float) -> IdStructure:
    """The closed-form rotating solution at time t.

    eta0 = (1/3) e1 + (k cos(eps t) - m/3) e4, eta1 = -(k eps/2) sin(eps t) e4,
    eta2 = e2/eps, eta3 = e3/eps with eps = sqrt(6).  The coframe condition
    fails at the isolated instants where sin(eps t) = 0.
    """
    g = k * math.cos(EPS_ROT * t) - m / 3.0
    f = -0.5 * k * EPS_ROT * math.sin(EPS_ROT * t)
    rows = (
        (1.0 / 3.0, 0.0, 0.0, g),
        (0.0, 0.0, 0.0, f),
        (0.0, 1.0 / EPS_ROT, 0.0, 0.0),
        (0.0, 0.0, 1.0 / EPS_ROT, 0.0),
    )
    return IdStructure(rows, m)


def fit_case_i(structure: IdStructure) -> tuple:
    """Amplitude and phase of the rotating family through a structure.

    Uses the conserved amplitude k^2 = (g + m/3)^2 + (2 f / eps)^2 and the
    phase with cos/sin matched to (g + m/3, -2 f / eps).
    """
    g = float(structure.eta[0][3])
    f = float(structure.eta[1][3])
    m = structure.m
    kc = g + m / 3.0
    ks = -2.0 * f / EPS_ROT
    k = math.hypot(kc, ks)
    phase = math.atan2(ks, kc) / EPS_ROT
    return k, phase


# ---------------------------------------------------------------------------
# flow results


@dataclass
class FlowResult:
    """Sampled flow data: states, constraint residuals, conserved drift."""

    times: np.ndarray
    states: list
    residuals: np.ndarray
    drift: dict
    consistency: Optional[np.ndarray] = None
    boundary_time: Optional[float] = None
    stopped_reason: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def id_structures(self, m: int = 1) -> list:
        out = []
        for state in self.states:
            if isinstance(state, IdStructure):
                out.append(state)
            elif isinstance(state, CaseIIIState):
                out.append(state.to_id_structure(m))
            else:
                out.append(state.to_id_structure())
        return out

    def coefficient_rows(self, m: int = 1) -> np.ndarray:
        return np.array([s.matrix.reshape(-1) for s in self.id_structures(m)])

    def to_csv(self, path, m: int = 1) -> None:
        coeff = self.coefficient_rows(m)
        drift_names = sorted(self.drift)
        header = ["t"]
        header += [f"eta{i}_{j+1}" for i in range(4) for j in range(4)]
        header += ["res_go_1", "res_go_2", "res_go_3"]
        if self.consistency is not None:
            header += ["lsq_residual"]
        header += [f"drift_{name}" for name in drift_names]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                row += [repr(float(x)) for x in coeff[i]]
                row += [repr(float(x)) for x in self.residuals[i]]
                if self.consistency is not None:
                    row += [repr(float(self.consistency[i]))]
                row += [repr(float(self.drift[name][i])) for name in drift_names]
                writer.writerow(row)

    def to_json_dict(self, m: int = 1) -> dict:
        data = {
            "times": [float(t) for t in self.times],
            "coefficients": self.coefficient_rows(m).tolist(),
            "residuals": self.residuals.tolist(),
            "drift": {k: np.asarray(v).tolist() for k, v in self.drift.items()},
            "boundary_time": self.boundary_time,
            "stopped_reason": self.stopped_reason,
            "meta": self.meta,
        }
        if self.consistency is not None:
            data["consistency"] = self.consistency.tolist()
        return data

    def to_json(self, path, m: int = 1) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(m), fh, indent=1)


# ---------------------------------------------------------------------------
# integrator


def rk4_step(f: Callable, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_path(f: Callable, y0: np.ndarray, t0: float, t1: float, step: float):
    """Fixed-step classical integration from t0 to t1 (either direction)."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = max(1, int(round(abs(t1 - t0) / step)))
    h = (t1 - t0) / n
    times = [t0]
    ys = [np.array(y0, dtype=float)]
    for i in range(n):
        ys.append(rk4_step(f, times[-1], ys[-1], h))
        times.append(t0 + (i + 1) * h)
    return np.array(times), np.array(ys)


# ---------------------------------------------------------------------------
# general flow (numpy fast path for the wedge tables)

_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# d on one-forms over e1..e4, in 2-form coordinates ordered as _PAIRS
_D1 = np.zeros((6, 4))
_D1[3, 0] = -1.0  # d e1 = -e23
_D1[1, 1] = 1.0   # d e2 = -e31 = +e13
_D1[0, 2] = -1.0  # d e3 = -e12

_E4 = np.array([0.0, 0.0, 0.0, 1.0])
_UNITS = np.eye(4)


def _w11(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    a = np.outer(x, y)
    a = a - a.T
    return np.array([a[0, 1], a[0, 2], a[0, 3], a[1, 2], a[1, 3], a[2, 3]])


def _general_system(y: np.ndarray, m: int):
    """Least-squares system for the unknown rates of eta1, eta2, eta3."""
    r0, r1, r2, r3 = y.reshape(4, 4)
    A = np.zeros((18, 12))
    for i in range(4):
        u = _UNITS[i]
        # eq block 1: x2 ^ eta3 + eta2 ^ x3 = -d eta1
        A[0:6, 4 + i] = _w11(u, r3)
        A[0:6, 8 + i] = _w11(r2, u)
        # eq block 2: x3 ^ eta1 + eta3 ^ x1 = 3 eta0^eta3 - d eta2 + m e4^eta3
        A[6:12, 8 + i] = _w11(u, r1)
        A[6:12, i] = _w11(r3, u)
        # eq block 3: x1 ^ eta2 + eta1 ^ x2 = -3 eta0^eta2 - m e4^eta2 - d eta3
        A[12:18, i] = _w11(u, r2)
        A[12:18, 4 + i] = _w11(r1, u)
    b = np.concatenate([
        -_D1 @ r1,
        3.0 * _w11(r0, r3) - _D1 @ r2 + m * _w11(_E4, r3),
        -3.0 * _w11(r0, r2) - m * _w11(_E4, r2) - _D1 @ r3,
    ])
    return A, b


def general_rhs(y: np.ndarray, m: int):
    """Flow right-hand side and the least-squares consistency residual."""
    A, b = _general_system(y, m)
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.linalg.norm(A @ x - b))
    ydot = np.empty(16)
    ydot[0:4] = 2.0 * y[4:8]
    ydot[4:16] = x
    return ydot, residual


def evolve_general(
    eta0: IdStructure,
    t_span: Sequence[float],
    step: float,
    *,
    record_every: int = 10,
    pre_tol: float = 1e-8,
    abort_tol: float = 1e-6,
    det_threshold: float = 1e-9,
) -> FlowResult:
    """Integrate the full 16-coefficient flow from a solution of the
    structure equations.

    Aborts with :class:`ConstraintError` when the least-squares residual
    of the overdetermined rate system exceeds ``abort_tol``; stops and
    marks the boundary time when the coframe degenerates.
    """
    res0 = residual_hypo(eta0)
    scale = max(1.0, float(np.abs(eta0.matrix).max()))
    if max(res0) > pre_tol * scale:
        raise ConstraintError(
            f"initial data violates the structure equations: residuals {res0}"
        )
    eta0.require_coframe(det_threshold)

    t0, t1 = float(t_span[0]), float(t_span[1])
    direction = 1.0 if t1 >= t0 else -1.0
    n = max(1, int(round(abs(t1 - t0) / step)))
    h = direction * abs(t1 - t0) / n
    m = eta0.m

    y = eta0.matrix.reshape(-1).copy()
    t = t0
    times, states, residuals, consistency = [], [], [], []
    boundary_time = None
    stopped = None

    def record(t, y):
        s = IdStructure(tuple(map(tuple, y.reshape(4, 4))), m)
        times.append(t)
        states.append(s)
        residuals.append(residual_hypo(s))
        _, res = general_rhs(y, m)
        consistency.append(res)
        if res > abort_tol:
            raise ConstraintError(f"constraints incompatible: least-squares residual {res:.3e} at t={t}")

    det_sign = math.copysign(1.0, float(np.linalg.det(y.reshape(4, 4))))
    record(t, y)
    for i in range(n):
        y_next = rk4_step(lambda tt, yy: general_rhs(yy, m)[0], t, y, h)
        t_next = t0 + (i + 1) * h
        det = float(np.linalg.det(y_next.reshape(4, 4)))
        if abs(det) < det_threshold or math.copysign(1.0, det) != det_sign:
            boundary_time = t_next
            stopped = "coframe degenerate"
            if abs(det) > 0:
                record(t_next, y_next)
            break
        y, t = y_next, t_next
        if (i + 1) % record_every == 0 or i + 1 == n:
            record(t, y)

    return FlowResult(
        times=np.array(times),
        states=states,
        residuals=np.array(residuals),
        drift={},
        consistency=np.array(consistency),
        boundary_time=boundary_time,
        stopped_reason=stopped,
        meta={"step": step, "family": "general", "m": m},
    )


# ---------------------------------------------------------------------------
# case ii


def _case_ii_rhs(t, q):
    p, s = q  # p = h^2, s = a h
    sqrtp = math.sqrt(p)
    return np.array([s / sqrtp, sqrtp * (1.0 - 6.0 * p)])


def evolve_case_ii(
    state0: CaseIIState,
    t_span: Sequence[float],
    step: float,
    *,
    record_every: int = 10,
    h_floor: float = 1e-6,
) -> FlowResult:
    """Integrate d(h^2)/dt = a, d(ah)/dt = h - 6 h^3.

    Reaching h -> 0 or a turning point (a -> 0 on the level set) stops the
    flow with the boundary time marked; neither is an error.  Per-sample
    relative drift of the conserved quantity A is recorded.
    """
    if state0.h <= 0:
        raise ValueError("h must be positive")
    if state0.a * state0.h < 0:
        raise ValueError("orientation convention requires a*h >= 0 at the start")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 <= t0:
        raise ValueError("t_span must be increasing")
    n = max(1, int(round((t1 - t0) / step)))
    h_step = (t1 - t0) / n
    A0 = state0.A
    drift_scale = max(abs(A0), 1e-30)

    q = np.array([state0.h**2, state0.a * state0.h])
    t = t0
    times, states, residuals, drift = [], [], [], []
    boundary_time = None
    stopped = None

    def record(t, q):
        hh = math.sqrt(q[0])
        st = CaseIIState(hh, q[1] / hh, state0.C, state0.m)
        times.append(t)
        states.append(st)
        residuals.append(residual_hypo(st.to_id_structure()))
        drift.append(abs(st.A - A0) / drift_scale)

    record(t, q)
    for i in range(n):
        q_next = rk4_step(_case_ii_rhs, t, q, h_step)
        t_next = t0 + (i + 1) * h_step
        if q_next[0] <= h_floor**2:
            boundary_time, stopped = t_next, "h_zero"
            if q_next[0] > 0:
                record(t_next, q_next)
            break
        if q_next[1] < 0.0:
            # crossed a turning point: locate it by step halving
            t_star, q_star = _refine_turning(t, q, h_step)
            boundary_time, stopped = t_star, "turning_point"
            record(t_star, q_star)
            break
        q, t = q_next, t_next
        if (i + 1) % record_every == 0 or i + 1 == n:
            record(t, q)

    return FlowResult(
        times=np.array(times),
        states=states,
        residuals=np.array(residuals),
        drift={"A": np.array(drift)},
        boundary_time=boundary_time,
        stopped_reason=stopped,
        meta={"step": step, "family": "case_ii", "C": state0.C, "m": state0.m, "A": A0},
    )


def _refine_turning(t, q, h_step, iters: int = 64):
    """Bisect within one step for the instant where a h crosses zero."""
    lo, hi = 0.0, h_step
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        q_mid = rk4_step(_case_ii_rhs, t, q, mid)
        if q_mid[1] > 0.0:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    return t + mid, rk4_step(_case_ii_rhs, t, q, mid)


def turning_points(A: float) -> list:
    """Positive h with A + h^4 - 4 h^6 = 0, i.e. sqrt of the positive
    roots of the turning cubic; the root 0 is excluded as degenerate.

    At the branch minimum A = -1/108 the single (double) value 1/sqrt(6)
    is returned; below it there are none and a ValueError is raised.
    """
    if A < float(moduli.A_MIN) and A != moduli.A_MIN:
        raise ValueError("no turning points: A must be at least -1/108")
    return [math.sqrt(float(root)) for root, _ in moduli.cubic_roots(A) if root > 0]


def case_ii_endpoint_profile(A: float, which: str, *, n_sub: int = 200) -> Callable:
    """Radial profile r -> (h, k, b, c) of the conformal flow near an end.

    ``which`` is ``"round"`` (the h -> 0 end, only for A = 0), ``"lower"``
    or ``"upper"`` (the turning points at the smaller/larger root).  The
    radial coordinate r measures distance into the interval from the end.
    """
    if which == "round":
        if A != 0:
            raise ValueError("the h -> 0 end exists only for A = 0")

        def profile(r: float):
            def f(_, y):
                return np.array([0.5 * math.sqrt(max(0.0, 1.0 - 4.0 * y[0] ** 2))])

            _, ys = rk4_path(f, np.array([0.0]), 0.0, r, r / n_sub)
            h = float(ys[-1][0])
            return (h, h, 0.0, 0.0)

        return profile

    roots = [float(root) for root, _ in moduli.cubic_roots(A) if root > 0]
    if len(roots) < 1:
        raise ValueError(f"no turning points for A={A}")
    if which == "lower":
        delta_star = min(roots)
    elif which == "upper":
        delta_star = max(roots)
    else:
        raise ValueError(f"unknown end {which!r}")

    # inward direction: a h becomes positive moving into the interval
    sign = 1.0 if which == "lower" else -1.0

    def profile(r: float):
        def f(_, y):
            return sign * _case_ii_rhs(0.0, y)

        _, ys = rk4_path(f, np.array([delta_star, 0.0]), 0.0, r, r / n_sub)
        h = math.sqrt(float(ys[-1][0]))
        return (h, h, 0.0, 0.0)

    return profile


# ---------------------------------------------------------------------------
# case iii


def case_iii_rhs(t, y):
    h, k, b, c, a = y
    delta = h * k - b * c
    Q = h * h + k * k + b * b + c * c
    a_dot = (Q - 12.0 * delta * delta - a * a) / (2.0 * delta)
    return np.array([
        (-6.0 * h * delta + k - a_dot * h) / a,
        (-6.0 * k * delta + h - a_dot * k) / a,
        (-6.0 * b * delta - c - a_dot * b) / a,
        (-6.0 * c * delta - b - a_dot * c) / a,
        a_dot,
    ])


def evolve_case_iii(
    state0: CaseIIIState,
    t_span: Sequence[float],
    step: float,
    *,
    record_every: int = 10,
    m: int = 1,
    a_floor: float = 1e-7,
    uv_floor: float = 1e-6,
    norm_cap: float = 1e7,
) -> FlowResult:
    """Integrate the five coupled equations of the non-conformal family.

    Preconditions: a > 0, hk - bc > 0, and (h - k, b + c) != (0, 0) --
    otherwise the data is the conformal family in disguise (a phase
    rotation removes it) and must be evolved as case ii.  Stops, marking
    the boundary, when a approaches zero (the coframe degenerates), when
    u or v vanishes, or when the state leaves the resolvable range.
    """
    if state0.a <= 0:
        raise ValueError("a must be positive at the start")
    if state0.delta <= 0:
        raise ValueError("hk - bc must be positive at the start")
    if state0.v == 0 and state0.z == 0:
        raise ValueError("(h - k, b + c) = (0, 0) reduces to case ii")

    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 <= t0:
        raise ValueError("t_span must be increasing")
    lam0, mu0 = state0.lam, (state0.mu if state0.v != 0 else float("nan"))
    coef_u = 0.25 * (1.0 + lam0 * lam0)
    coef_v = 0.25 * (1.0 + mu0 * mu0) if state0.v != 0 else float("nan")

    times, states, residuals = [], [], []
    drift_lam, drift_mu, drift_rel = [], [], []
    boundary_time = None
    stopped = None

    def record(t, y):
        st = CaseIIIState(*[float(x) for x in y])
        times.append(t)
        states.append(st)
        residuals.append(residual_hypo(st.to_id_structure(m)))
        drift_lam.append(abs(st.lam - lam0))
        drift_mu.append(abs(st.mu - mu0) if st.v != 0 else float("nan"))
        rel = st.delta - (coef_u * st.u**2 - coef_v * st.v**2)
        drift_rel.append(abs(rel))

    y = np.array([state0.h, state0.k, state0.b, state0.c, state0.a])
    t = t0
    record(t, y)
    h_step = step
    steps_taken = 0
    max_steps = int(10 * (t1 - t0) / step) + 10**6

    while t < t1 and steps_taken < max_steps:
        h_try = min(h_step, t1 - t)
        # halve the step while it would overshoot the a -> 0 boundary
        while True:
            y_next = rk4_step(case_iii_rhs, t, y, h_try)
            if y_next[4] > 0 or h_try < 1e-3 * step:
                break
            h_try *= 0.5
        t_next = t + h_try
        steps_taken += 1
        st_next = CaseIIIState(*[float(x) for x in y_next])
        if not np.all(np.isfinite(y_next)) or y_next[4] <= a_floor:
            boundary_time, stopped = t_next, "turning_point"
            if np.all(np.isfinite(y_next)) and y_next[4] > 0:
                record(t_next, y_next)
            break
        if abs(st_next.u) < uv_floor or abs(st_next.v) < uv_floor:
            # past this point the conserved ratios w/u, z/v are 0/0-noisy
            boundary_time, stopped = t_next, "u_or_v_vanishes"
            record(t_next, y_next)
            break
        if st_next.delta <= 0:
            boundary_time, stopped = t_next, "delta_nonpositive"
            break
        if np.linalg.norm(y_next) > norm_cap:
            boundary_time, stopped = t_next, "divergence"
            record(t_next, y_next)
            break
        y, t = y_next, t_next
        if steps_taken % record_every == 0 or t >= t1:
            record(t, y)

    return FlowResult(
        times=np.array(times),
        states=states,
        residuals=np.array(residuals),
        drift={
            "lambda": np.array(drift_lam),
            "mu": np.array(drift_mu),
            "delta_relation": np.array(drift_rel),
        },
        boundary_time=boundary_time,
        stopped_reason=stopped,
        meta={"step": step, "family": "case_iii", "m": m},
    )
