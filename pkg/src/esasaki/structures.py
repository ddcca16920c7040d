"""Invariant coframe structures and their constraint systems.

An :class:`IdStructure` is a quadruple of invariant one-forms
(eta0, eta1, eta2, eta3) on the group directions e1..e4, stored as a 4x4
coefficient matrix, together with the integer rotation weight m of the
phase one-form (d gamma = m e4).  The structure equations

    d eta0 = -2 eta23
    d eta31 = 3 eta012 + m e4 ^ eta12
    d eta12 = -3 eta031 - m e4 ^ eta31

are the hypersurface constraints; their residual norms are computed by
:func:`residual_hypo`.  A one-parameter family of solutions assembles
into the five-dimensional structure forms (alpha, omega1, omega2,
omega3) whose Einstein-Sasaki residuals are computed by
:func:`residual_es`.  :func:`normal_form` reduces any solution to one of
the two canonical families of the classification.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from esasaki.exterior import DT, E4, InvariantForm, d_invariant, wedge

__all__ = [
    "IdStructure",
    "Su2StructureForms",
    "FamilyTag",
    "FrameTransform",
    "DegenerateCoframeError",
    "NotASolutionError",
    "residual_hypo",
    "assemble_su2_forms",
    "assemble_su2_rates",
    "residual_es",
    "normal_form",
]

VARIANT_NOTHING = "GoGivingNothing"
VARIANT_YPQ = "GoGivingYpq"


class DegenerateCoframeError(ValueError):
    """The four one-forms do not span the cotangent space."""


class NotASolutionError(ValueError):
    """Input does not satisfy the structure equations within tolerance."""


def _row_form(row: Sequence) -> InvariantForm:
    return InvariantForm(1, {(j + 1,): c for j, c in enumerate(row) if c != 0})


@dataclass(frozen=True)
class IdStructure:
    """Coframe candidate: rows are eta0..eta3 over (e1, e2, e3, e4).

    The coframe condition det(eta) != 0 is required by every consumer
    that builds a metric or a flow; closed-form families legitimately
    pass through degenerate instants, so it is checked at use sites
    (``require_coframe``) rather than at construction.
    """

    eta: tuple
    m: int = 0

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.eta)
        if len(rows) != 4 or any(len(r) != 4 for r in rows):
            raise ValueError("eta must be a 4x4 coefficient array")
        object.__setattr__(self, "eta", rows)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.eta])

    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def require_coframe(self, threshold: float = 1e-12) -> None:
        if abs(self.det()) <= threshold:
            raise DegenerateCoframeError(f"coframe determinant {self.det():.3e} below {threshold:.1e}")

    def one_forms(self):
        return tuple(_row_form(row) for row in self.eta)

    # -- group actions on solutions -----------------------------------

    def apply_so3(self, rot: np.ndarray) -> "IdStructure":
        """Rotate the su(2) coefficient triples of every row by rot in SO(3)."""
        rows = []
        for row in self.eta:
            xyz = rot @ np.array([float(c) for c in row[:3]])
            rows.append((xyz[0], xyz[1], xyz[2], float(row[3])))
        return IdStructure(tuple(rows), self.m)

    def apply_u1(self, angle: float) -> "IdStructure":
        """Rotate (eta2, eta3) by the residual phase action."""
        c, s = math.cos(angle), math.sin(angle)
        r0, r1, r2, r3 = (np.array([float(x) for x in row]) for row in self.eta)
        new2 = c * r2 + s * r3
        new3 = -s * r2 + c * r3
        return IdStructure((tuple(r0), tuple(r1), tuple(new2), tuple(new3)), self.m)

    def sign_change(self) -> "IdStructure":
        """Orientation reversal (eta0, -eta1, -eta2, -eta3)."""
        r0, r1, r2, r3 = self.eta
        neg = lambda row: tuple(-c for c in row)
        return IdStructure((r0, neg(r1), neg(r2), neg(r3)), self.m)

    def flip_eta1(self) -> "IdStructure":
        """Orientation reversal composed with the half-turn phase action."""
        r0, r1, r2, r3 = self.eta
        return IdStructure((r0, tuple(-c for c in r1), r2, r3), self.m)

    # -- serialization -------------------------------------------------

    def to_json_dict(self) -> dict:
        def enc(c):
            return str(c) if isinstance(c, Fraction) else c
        return {"eta": [[enc(c) for c in row] for row in self.eta], "m": self.m}

    @classmethod
    def from_json_dict(cls, data: dict) -> "IdStructure":
        def dec(c):
            return Fraction(c) if isinstance(c, str) else c
        rows = tuple(tuple(dec(c) for c in row) for row in data["eta"])
        return cls(rows, int(data.get("m", 0)))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "IdStructure":
        return cls.from_json_dict(json.loads(text))


def residual_hypo(structure: IdStructure) -> tuple:
    """Norms of the three structure-equation residuals of a coframe."""
    eta0, eta1, eta2, eta3 = structure.one_forms()
    m = structure.m
    eta23 = wedge(eta2, eta3)
    eta31 = wedge(eta3, eta1)
    eta12 = wedge(eta1, eta2)
    r1 = d_invariant(eta0) + 2 * eta23
    r2 = d_invariant(eta31) - 3 * wedge(eta0, eta12) - m * wedge(E4, eta12)
    r3 = d_invariant(eta12) + 3 * wedge(eta0, eta31) + m * wedge(E4, eta31)
    return (r1.norm(), r2.norm(), r3.norm())


@dataclass(frozen=True)
class Su2StructureForms:
    """The five-dimensional structure forms (alpha, omega1, omega2, omega3).

    ``m`` is the rotation weight of the phase; the forms are evaluated at
    phase zero and the derivative operator used in :func:`residual_es`
    carries the corresponding e4-correction.
    """

    alpha: InvariantForm
    omega1: InvariantForm
    omega2: InvariantForm
    omega3: InvariantForm
    m: int = 0

    def validate(self, tol: float = 1e-9) -> None:
        """Check the orthonormal-coframe compatibility conditions.

        alpha ^ omega1 ^ omega1 must be a volume form and the omegas must
        wedge to a common positive multiple of the volume on ker(alpha).
        """
        omegas = (self.omega1, self.omega2, self.omega3)
        vol = wedge(self.alpha, wedge(self.omega1, self.omega1))
        if vol.norm() <= tol:
            raise NotASolutionError("alpha ^ omega1^2 vanishes")
        diag = []
        for i in range(3):
            for j in range(i, 3):
                prod = wedge(self.alpha, wedge(omegas[i], omegas[j]))
                if i == j:
                    diag.append(prod)
                elif prod.norm() > tol * max(1.0, vol.norm()):
                    raise NotASolutionError(f"omega{i+1} ^ omega{j+1} does not vanish")
        ref = diag[0]
        for other in diag[1:]:
            if not ref.allclose(other, tol * max(1.0, ref.norm())):
                raise NotASolutionError("omega_i ^ omega_i volumes disagree")


def assemble_su2_forms(family, t: float | None = None) -> Su2StructureForms:
    """Structure forms of the product structure at one instant.

    ``family`` is either an :class:`IdStructure` or a callable
    ``t -> IdStructure``; in the latter case ``t`` selects the instant.
    Raises :class:`DegenerateCoframeError` when the coframe condition
    fails at the evaluation point.
    """
    structure = family(t) if callable(family) else family
    structure.require_coframe()
    eta0, eta1, eta2, eta3 = structure.one_forms()
    return Su2StructureForms(
        alpha=eta0,
        omega1=wedge(eta2, eta3) + wedge(eta1, DT),
        omega2=wedge(eta3, eta1) + wedge(eta2, DT),
        omega3=wedge(eta1, eta2) + wedge(eta3, DT),
        m=structure.m,
    )


def assemble_su2_rates(structure: IdStructure, eta_dot: Sequence) -> Su2StructureForms:
    """Time derivatives of the structure forms, from the coframe rate.

    ``eta_dot`` is the 4x4 array of row derivatives.  The product rule
    gives the omega rates; no coframe condition is needed.
    """
    eta = structure.one_forms()
    dot = tuple(_row_form(row) for row in eta_dot)
    return Su2StructureForms(
        alpha=dot[0],
        omega1=wedge(dot[2], eta[3]) + wedge(eta[2], dot[3]) + wedge(dot[1], DT),
        omega2=wedge(dot[3], eta[1]) + wedge(eta[3], dot[1]) + wedge(dot[2], DT),
        omega3=wedge(dot[1], eta[2]) + wedge(eta[1], dot[2]) + wedge(dot[3], DT),
        m=structure.m,
    )


def residual_es(forms: Su2StructureForms, rates: Su2StructureForms) -> tuple:
    """Norms of the three Einstein-Sasaki residuals.

    The derivative on the product is d_total = d_invariant + dt ^ d/dt,
    with the phase correction m e4 ^ . applied to omega2/omega3 (phase
    evaluated at zero).
    """
    m = forms.m

    def d_total(form, rate):
        return d_invariant(form) + wedge(DT, rate)

    r1 = d_total(forms.alpha, rates.alpha) + 2 * forms.omega1
    r2 = (
        d_total(forms.omega2, rates.omega2)
        - m * wedge(E4, forms.omega3)
        - 3 * wedge(forms.alpha, forms.omega3)
    )
    r3 = (
        d_total(forms.omega3, rates.omega3)
        + m * wedge(E4, forms.omega2)
        + 3 * wedge(forms.alpha, forms.omega2)
    )
    return (r1.norm(), r2.norm(), r3.norm())


@dataclass(frozen=True)
class FamilyTag:
    """Canonical parameters of an invariant solution, plus its variant."""

    variant: str
    m: int
    h: float
    k: float | None = None
    a: float | None = None
    c: float | None = None
    a1: float | None = None
    a4: float | None = None
    mu: float | None = None

    def to_json_dict(self) -> dict:
        data = {"variant": self.variant, "h": self.h, "m": self.m}
        for name in ("k", "a", "c", "a1", "a4", "mu"):
            value = getattr(self, name)
            if value is not None:
                data[name] = value
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())


@dataclass(frozen=True)
class FrameTransform:
    """The group element reducing a solution to normal form.

    Applied as: rotate the su(2) basis by ``so3``, rotate (eta2, eta3) by
    ``u1_angle``, then flip eta1 when ``eta1_sign`` is -1.
    """

    so3: tuple
    u1_angle: float
    eta1_sign: int = 1

    def apply(self, structure: IdStructure) -> IdStructure:
        out = structure.apply_so3(np.array(self.so3))
        out = out.apply_u1(self.u1_angle)
        if self.eta1_sign < 0:
            out = out.flip_eta1()
        return out


def _minimal_rotation_to_x(n: np.ndarray) -> np.ndarray:
    """SO(3) rotation taking the unit vector n to (1, 0, 0) in its plane."""
    x = np.array([1.0, 0.0, 0.0])
    c = float(n @ x)
    if c > 1.0 - 1e-14:
        return np.eye(3)
    if c < -1.0 + 1e-14:
        # opposite direction: half turn about e2
        return np.diag([-1.0, 1.0, -1.0])
    axis = np.cross(n, x)
    s = np.linalg.norm(axis)
    axis = axis / s
    K = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def normal_form(structure: IdStructure, tol: float = 1e-9):
    """Reduce a solution of the structure equations to canonical form.

    Returns ``(tag, transform)`` where ``transform.apply(structure)``
    reproduces the canonical representative.  The reduction applies one
    adjoint rotation taking eta0 into span(e1, e4) and aligning the
    (eta2, eta3) block, one phase rotation making eta2 a positive
    multiple of e2, and an orientation flip fixing the sign conventions
    (a > 0, or a4 h > 0).  The variant is decided by closedness of
    eta3 ^ eta1.
    """
    res = residual_hypo(structure)
    scale = max(1.0, float(np.abs(structure.matrix).max()))
    if max(res) > tol * scale:
        raise NotASolutionError(f"structure-equation residuals {res} exceed tolerance {tol}")

    mat = structure.matrix
    n = mat[0, :3]
    rho = float(np.linalg.norm(n))
    if rho <= tol * scale:
        raise NotASolutionError("degenerate: eta0 closed (no su(2) component)")

    rot0 = _minimal_rotation_to_x(n / rho)
    work = structure.apply_so3(rot0)

    # (eta2, eta3) live in span(e2, e3) for any solution with eta0
    # aligned; canonicalize the residual two-sided rotation gauge by the
    # rotation-SVD of the 2x2 block.
    w = work.matrix
    off = max(abs(w[2, 0]), abs(w[2, 3]), abs(w[3, 0]), abs(w[3, 3]))
    if off > 1e3 * tol * scale:
        raise NotASolutionError("eta2/eta3 are not supported on span(e2, e3)")
    block = w[2:4, 1:3]
    u_rot, svals, vt_rot = np.linalg.svd(block)
    if np.linalg.det(u_rot) < 0:
        u_rot = u_rot @ np.diag([1.0, -1.0])
        vt_rot = np.diag([1.0, -1.0]) @ vt_rot
    if svals[-1] <= tol * scale:
        raise DegenerateCoframeError("eta2 ^ eta3 vanishes")

    u1_angle = math.atan2(u_rot[1, 0], u_rot[0, 0])
    # compose the basis-side rotation (about e1, acting on the e2-e3
    # plane) into the single adjoint rotation
    v_angle = math.atan2(vt_rot[0, 1], vt_rot[0, 0])
    cv, sv = math.cos(v_angle), math.sin(v_angle)
    rot1 = np.array([[1.0, 0.0, 0.0], [0.0, cv, sv], [0.0, -sv, cv]])
    so3 = rot1 @ rot0

    work = structure.apply_so3(so3).apply_u1(u1_angle)
    w = work.matrix

    eta31 = wedge(_row_form(w[3]), _row_form(w[1]))
    closed = d_invariant(eta31).norm() <= 10 * tol * max(1.0, eta31.norm())

    eta1_sign = 1
    if closed:
        # a e1 row: enforce a > 0
        if w[1, 0] < 0:
            eta1_sign = -1
            work = work.flip_eta1()
            w = work.matrix
        h, k = float(w[2, 1]), float(w[3, 2])
        if abs(w[0, 0] - 2 * h * k) > 1e3 * tol * max(1.0, scale**2) or abs(
            w[0, 3] + structure.m / 3.0
        ) > 1e3 * tol * scale:
            raise NotASolutionError("eta0 coefficients inconsistent with the closed family")
        tag = FamilyTag(
            variant=VARIANT_NOTHING,
            m=structure.m,
            h=h,
            k=k,
            a=float(w[1, 0]),
            c=float(w[3, 1]),
        )
    else:
        if w[1, 3] < 0:
            eta1_sign = -1
            work = work.flip_eta1()
            w = work.matrix
        if abs(svals[0] - svals[1]) > 1e3 * tol * max(1.0, scale):
            raise NotASolutionError("eta2/eta3 block is not conformal in the non-closed family")
        h = float(0.5 * (w[2, 1] + w[3, 2]))
        tag = FamilyTag(
            variant=VARIANT_YPQ,
            m=structure.m,
            h=h,
            a1=float(w[1, 0]),
            a4=float(w[1, 3]),
            mu=float(w[0, 3]),
        )
        constraint = 3 * tag.a1 * tag.mu - (6 * h * h * tag.a4 - tag.a4 - tag.a1 * structure.m)
        if abs(constraint) > 1e3 * tol * max(1.0, scale**3):
            raise NotASolutionError(f"family constraint violated by {constraint:.3e}")

    transform = FrameTransform(tuple(map(tuple, so3)), u1_angle, eta1_sign)
    return tag, transform
