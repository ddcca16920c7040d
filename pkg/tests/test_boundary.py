import math

import numpy as np
import pytest

from esasaki.boundary import (
    ConditionCheck,
    ExtensionReport,
    TaylorData,
    check_circle_branch,
    check_round_branch,
    geometric_radii,
    kw_extends,
    parity_fit,
    reject_case_iii,
    richardson_limit,
)
from esasaki.evolution import CaseIIIState, case_ii_endpoint_profile, evolve_case_iii

A_EX = -9 / 2197


def monomial_taylor(j, order=10):
    coeffs = [0.0] * (order + 1)
    coeffs[j] = 1.0
    return coeffs


# ---------------------------------------------------------------------------
# the equivariant criterion


def test_kw_examples():
    assert kw_extends(TaylorData(monomial_taylor(2), sigma=1, n=2)) == (True, None)
    assert kw_extends(TaylorData(monomial_taylor(0), sigma=1, n=2)) == (False, 0)
    # r^3 with sigma = 2, n = 2: weight 1, k = 3 has k - 1 even, so it extends
    assert kw_extends(TaylorData(monomial_taylor(3), sigma=2, n=2)) == (True, None)


def test_kw_divisibility():
    assert kw_extends(TaylorData(monomial_taylor(2), sigma=3, n=2)) == (False, None)


def test_kw_randomized_monomials_match_closed_form_rule():
    rng = np.random.default_rng(23)
    for _ in range(40):
        sigma = int(rng.integers(1, 4))
        n = int(rng.integers(0, 9))
        j = int(rng.integers(0, 9))
        data = TaylorData(monomial_taylor(j, order=12), sigma=sigma, n=n)
        got, _ = kw_extends(data)
        if n % sigma != 0:
            expected = False
        else:
            w = abs(n // sigma)
            expected = j >= w and (j - w) % 2 == 0
        assert got == expected, (sigma, n, j)


def test_kw_monotone_under_even_radial_powers():
    rng = np.random.default_rng(5)
    for _ in range(20):
        sigma = int(rng.integers(1, 4))
        w = int(rng.integers(0, 3))
        n = sigma * w
        order = 12
        coeffs = [0.0] * (order + 1)
        for j in range(order + 1):
            if j >= w and (j - w) % 2 == 0:
                coeffs[j] = float(rng.normal())
        assert kw_extends(TaylorData(coeffs, sigma, n))[0]
        shifted = [0.0, 0.0] + coeffs[:-2]
        assert kw_extends(TaylorData(shifted, sigma, n))[0]


def test_kw_errors():
    with pytest.raises(ValueError):
        kw_extends(TaylorData(monomial_taylor(2), sigma=0, n=2))
    with pytest.raises(ValueError):
        kw_extends(TaylorData((0.0, 0.0, 1.0), sigma=1, n=4))  # order too low


# ---------------------------------------------------------------------------
# parity and limits


def test_parity_detector_resolves_monomials():
    for j in range(9):
        _, even_defect, odd_defect = parity_fit(lambda r, j=j: r**j, 0.4)
        if j % 2 == 0:
            assert odd_defect <= 1e-9, j
            assert even_defect > 0.1
        else:
            assert even_defect <= 1e-9, j
            assert odd_defect > 0.1


def test_richardson_limit_on_smooth_even_function():
    radii = geometric_radii()
    values = [math.sin(r) ** 2 / r**2 for r in radii]
    limit, err = richardson_limit(radii, values)
    assert limit == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# round branch


def test_round_branch_passes_on_sphere_end():
    rep = check_round_branch(case_ii_endpoint_profile(0.0, "round"))
    assert rep.passed
    names = [c.name for c in rep.conditions]
    assert "delta_over_r2_limit" in names
    limit = next(c for c in rep.conditions if c.name == "delta_over_r2_limit")
    assert limit.measured == pytest.approx(0.25, abs=1e-6)


def test_round_branch_inapplicable_away_from_zero():
    rep = check_round_branch(case_ii_endpoint_profile(A_EX, "lower"))
    assert not rep.applicable
    assert not rep.passed
    assert "bounded away" in rep.notes


def test_round_branch_detects_minus_three_obstruction():
    # model profile of an obstructed end: Delta = r^2/4, U matching,
    # V = c r^-3, so r (dV/dr)/V = -3 exactly
    def profile(r):
        v = 1e-4 * r**-3
        u = math.sqrt(r * r / 4.0 + v * v)
        # reconstruct (h, k, b, c) with b = 0: u = h + k, w = -c... use
        # the simplest representative: h + k = 2U, h - k = 2V, b = c = 0
        return (u + v, u - v, 0.0, 0.0)

    rep = check_round_branch(profile, tol_ratio=0.5)
    cond = next(c for c in rep.conditions if c.name == "v_log_derivative_nonnegative")
    assert cond.measured == pytest.approx(-3.0, abs=1e-4)
    assert not cond.passed
    assert not rep.passed


# ---------------------------------------------------------------------------
# circle branch


def test_circle_branch_passes_at_both_ends_of_rational_family():
    upper = check_circle_branch(case_ii_endpoint_profile(A_EX, "upper"), q=6, sigma=-10, C=6.0, m=0)
    lower = check_circle_branch(case_ii_endpoint_profile(A_EX, "lower"), q=2, sigma=14, C=6.0, m=0)
    assert upper.passed and lower.passed
    cond = next(c for c in upper.conditions if c.name == "curvature_matches_sigma")
    assert cond.target == pytest.approx(10 / 26)
    assert cond.measured == pytest.approx(abs(1 - 18 / 13), abs=1e-6)


def test_circle_branch_endpoint_identity_fd():
    rep = check_circle_branch(case_ii_endpoint_profile(A_EX, "upper"), q=6, sigma=-10, C=6.0, m=0)
    cond = next(c for c in rep.conditions if c.name == "delta_pp_fd_matches_identity")
    assert cond.passed
    assert abs(cond.measured - cond.target) < 1e-6


def test_circle_branch_degenerate_sixth():
    # a profile sitting at Delta = 1/6 forces |Delta''| = 0: the
    # curvature condition cannot match any positive sigma/(p+qC)
    profile = lambda r: (math.sqrt(1 / 6), math.sqrt(1 / 6), 0.0, 0.0)
    rep = check_circle_branch(profile, q=2, sigma=14, C=6.0, m=0)
    cond = next(c for c in rep.conditions if c.name == "curvature_matches_sigma")
    assert not cond.passed
    assert not rep.passed


def test_circle_branch_sign_normalization_error():
    with pytest.raises(ValueError, match="sign normalization"):
        check_circle_branch(case_ii_endpoint_profile(A_EX, "upper"), q=-6, sigma=10, C=6.0, m=0)


# ---------------------------------------------------------------------------
# rejection of the non-conformal family


def test_reject_example_flow():
    flow = evolve_case_iii(CaseIIIState(0.4, 0.3, 0.0, 0.1, 0.2), (0, 2.0), 1e-3)
    report = reject_case_iii(flow)
    assert report.branch == "Reject"
    assert not report.passed
    assert set(report.end_reports) == {"lower", "upper"}
    assert report.failing()


def test_reject_requires_nonconformal_flow():
    flow = evolve_case_iii(CaseIIIState(0.4, 0.3, 0.0, 0.1, 0.2), (0, 0.5), 1e-3)
    flow.states[0] = CaseIIIState(0.4, 0.4, 0.1, -0.1, 0.2)  # V = 0 data
    with pytest.raises(ValueError, match="case ii"):
        reject_case_iii(flow)


def test_reject_randomized_flows():
    rng = np.random.default_rng(29)
    rejected = 0
    trials = 0
    while rejected < 5 and trials < 20:
        trials += 1
        h = float(rng.uniform(0.25, 0.55))
        k = float(rng.uniform(0.25, 0.55))
        b = float(rng.uniform(-0.15, 0.15))
        c = float(rng.uniform(-0.15, 0.15))
        a = float(rng.uniform(0.08, 0.35))
        st = CaseIIIState(h, k, b, c, a)
        if st.delta < 0.05 or (st.v == 0 and st.z == 0):
            continue
        flow = evolve_case_iii(st, (0, 1.0), 1e-3)
        report = reject_case_iii(flow)
        assert not report.passed, (st, report.to_json_dict())
        rejected += 1
    assert rejected == 5


def test_soundness_hook_enumerated_families_pass_both_ends():
    # every family accepted by the classification passes the circle-end
    # checks at both turning values with its own integer witnesses
    from esasaki.moduli import enumerate_rational_families

    for fam in enumerate_rational_families(31):
        A = float(fam.A)
        for which, end in (("lower", fam.minus), ("upper", fam.plus)):
            rep = check_circle_branch(
                case_ii_endpoint_profile(A, which),
                q=end.q,
                sigma=end.sigma_signed,
                C=float(fam.C),
                m=fam.m,
            )
            assert rep.passed, (fam.S, which, rep.failing())


def test_soundness_hook_round_branch_level():
    # the A = 0 level passes the round check at the vanishing end and the
    # circle check at the upper end with its classification witnesses
    from fractions import Fraction

    from esasaki.moduli import classify_A

    verdict = classify_A(Fraction(0), Fraction(6), 0)
    assert check_round_branch(case_ii_endpoint_profile(0.0, "round")).passed
    end = verdict.family.plus
    rep = check_circle_branch(
        case_ii_endpoint_profile(0.0, "upper"), q=end.q, sigma=end.sigma_signed, C=6.0, m=0
    )
    assert rep.passed, rep.failing()


# ---------------------------------------------------------------------------
# report plumbing


def test_extension_report_json_fields():
    rep = ExtensionReport(
        branch="CircleU1",
        conditions=[ConditionCheck("demo", 1.0, 1.0, 0.1, True)],
    )
    data = rep.to_json_dict()
    assert data["pass"] is True
    assert data["conditions"][0] == {
        "name": "demo",
        "measured": 1.0,
        "target": 1.0,
        "tolerance": 0.1,
        "pass": True,
    }
