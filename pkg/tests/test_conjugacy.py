import cmath
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from holoflow.errors import DegenerateBasis, NearFixedCurve, PathBlowup, ValidationError
from holoflow.conjugacy import (
    ConjugacyProblem,
    RealLinearMap,
    Sigma,
    build_h,
    build_sigma,
    denominator_bound,
    kappa_lower_bound,
    path_method_field,
    path_method_terms,
    remainder_growth,
    residue_match_check,
    residue_transport,
    rho,
    sigma_at_zero,
    sqrt_branch,
    tau,
    tube_maxima,
    verify_conjugacy,
)
from holoflow.flow import CallableField, IntegrationBudget, fatou_integral

P12 = ConjugacyProblem.from_ab(1, 2)
XS = [0.01, -0.02, 0.01j, 0.005 - 0.005j, 1e-4 * cmath.exp(2.5j)]


@pytest.fixture(scope="module")
def report():
    return verify_conjugacy(P12)


class TestBuildH:
    def test_identity(self):
        h = build_h(1, 1)
        assert (h.s0, h.s1) == (1, 0)

    def test_one_two(self):
        h = build_h(1, 2)
        assert h.s0 == pytest.approx(1.5) and h.s1 == pytest.approx(-0.5)
        assert h(1j) == pytest.approx(2j)
        assert h.orientation_preserving

    def test_imaginary_a_forces_b(self):
        with pytest.raises(DegenerateBasis):
            build_h(1j, 2j)
        h = RealLinearMap(1.5, -0.5)
        assert ConjugacyProblem.from_ab(1j, 1j, h=h).h == h

    def test_unnormalized_rejected(self):
        # 3z/2 + conj(z)/2 sends 1 to 2
        with pytest.raises(ValidationError):
            RealLinearMap(1.5, 0.5)

    def test_singular_map_rejected(self):
        with pytest.raises(DegenerateBasis):
            RealLinearMap(0.5, 0.5)

    def test_inverse_apply(self):
        h = RealLinearMap(1.5 + 0.2j, -0.5 - 0.2j)
        z = 0.3 - 1.1j
        assert h.inverse_apply(h(z)) == pytest.approx(z, abs=1e-14)

    @given(st.floats(0.1, 3), st.floats(-2, 2), st.floats(-3, 3), st.floats(-3, 3))
    def test_solves_the_system(self, ar, ai, br, bi):
        a, b = complex(ar, ai), complex(br, bi)
        try:
            h = build_h(a, b)
        except DegenerateBasis:
            return
        assert h(1) == pytest.approx(1, abs=1e-12)
        assert h(2j * math.pi * a) == pytest.approx(2j * math.pi * b, abs=1e-9 * max(1, abs(b)))


class TestTau:
    def test_identity(self):
        assert tau(RealLinearMap(1, 0), 0.3 - 0.2j) == 0.3 - 0.2j

    def test_positive_axis(self):
        assert P12.tau(0.04) == pytest.approx(0.01, rel=1e-14)

    def test_negative_axis(self):
        assert P12.tau(-0.04) == pytest.approx(-0.04, rel=1e-14)

    @pytest.mark.parametrize("x", XS)
    def test_transports_pole_part(self, x):
        T = P12.tau
        sx = sqrt_branch(x)
        assert P12.h(math.pi * 1j / sx) == pytest.approx(math.pi * 1j / T.sqrt(x), rel=1e-10)
        assert T.ratio(x) == pytest.approx(P12.h.s0 - P12.h.s1 * sx / sx.conjugate(), abs=1e-14)

    @given(st.floats(1e-6, 0.1), st.floats(-math.pi + 1e-3, math.pi))
    def test_inverse_round_trip(self, r, th):
        x = r * cmath.exp(1j * th)
        assert abs(P12.tau.inverse(P12.tau(x)) - x) <= 1e-10 * r

    @given(st.floats(1e-6, 0.1), st.floats(-math.pi, math.pi))
    def test_ratio_bounded(self, r, th):
        q = abs(P12.tau.ratio(r * cmath.exp(1j * th)))
        assert abs(P12.h.s0) - abs(P12.h.s1) - 1e-12 <= q <= abs(P12.h.s0) + abs(P12.h.s1) + 1e-12

    def test_zero_rejected(self):
        with pytest.raises(ValidationError):
            P12.tau(0)


class TestResidues:
    def test_one_two(self):
        assert residue_match_check(P12, [0.01]) < 1e-10
        assert residue_match_check(P12, XS) < 1e-10

    def test_identity_is_exact(self):
        assert residue_match_check(ConjugacyProblem.from_ab(1 + 1j, 1 + 1j), XS) < 1e-14

    def test_orientation_reversing(self):
        h = RealLinearMap(-0.5, 1.5)
        P = ConjugacyProblem.from_h(1, h)
        assert not P.orientation_preserving
        assert P.b == pytest.approx(-2)
        assert residue_match_check(P, XS) < 1e-10

    def test_transport_at_origin(self):
        rt = residue_transport(P12)
        assert rt["full"] < 1e-12 and rt["half"] < 1e-12

    def test_mismatched_b_rejected(self):
        with pytest.raises(ValidationError):
            ConjugacyProblem(1, 3, RealLinearMap(1.5, -0.5))


class TestPathMethod:
    def test_identity_field_vanishes(self):
        P = ConjugacyProblem.from_ab(1, 1)
        for s in (0.0, 0.4, 1.0):
            assert path_method_field(P, s, 0.04, 0.3 + 0.1j) == (0.0, 0.0)

    @pytest.mark.parametrize("y", [0.1 + 0.2j, -0.25, 0.05 - 0.3j])
    def test_rho_closed_form_matches_quadrature(self, y):
        for x in (0.01, 0.01j, -0.02):
            a = rho(P12, x, y)
            b = rho(P12, x, y, method="path")
            assert abs(a - b) < 1e-9 * max(1, abs(a))

    @pytest.mark.parametrize("x", [0.01, 0.01j, -0.02])
    def test_rho_at_base(self, x):
        # psi_X(x, y0) = 0, so only the relocated Y coordinate, read at k y0, contributes
        k = P12.tau.kappa(x)
        t = P12.tau(x)
        F = CallableField(lambda e: P12.Y(t, e))
        assert rho(P12, x, P12.y0) == pytest.approx(-fatou_integral(F, [P12.y0, k * P12.y0]), abs=1e-12)

    def test_cramer_solution(self):
        t = path_method_terms(P12, 0.3, 0.01, 0.2 + 0.1j)
        v = complex(t.c1, t.c2)
        assert t.d_y * v + t.d_ybar * v.conjugate() == pytest.approx(t.rho, abs=1e-12)
        assert t.remainder == pytest.approx(t.rho - t.rho_tilde)

    def test_near_fixed_curve(self):
        with pytest.raises(NearFixedCurve):
            path_method_terms(P12, 0.5, 0.04, 0.2)

    def test_bounds(self):
        kf = abs(P12.h.s0) - abs(P12.h.s1)
        assert kappa_lower_bound(P12, XS) >= kf - 1e-9
        assert denominator_bound(P12, XS) >= 0.75 * kf * kf

    def test_remainder_bounded(self):
        _, ratios = remainder_growth(P12, levels=5)
        assert max(ratios) < 1.1

    def test_fixed_curve_vanishing(self):
        m = tube_maxima(P12, (1e-3, 5e-4, 2.5e-4), [0.01, 0.02j])
        assert m[0] > m[1] > m[2]


class TestSigma:
    def test_identity(self):
        S = build_sigma(ConjugacyProblem.from_ab(1, 1))
        for x, y in ((0.04, 0.3), (0.01j, -0.2 + 0.1j)):
            xp, w = S(x, y)
            assert xp == pytest.approx(x) and abs(w - y) < 1e-8

    def test_fatou_relation(self):
        # the default disk keeps y = -1/2 out; this point needs a wider one
        P = ConjugacyProblem.from_ab(1, 2, radius=0.95)
        assert build_sigma(P).fatou_check(0.04, 0.5) < 1e-6
        with pytest.raises(PathBlowup):
            build_sigma(P12).fatou_check(0.04, 0.5)

    @pytest.mark.parametrize("x", [0.04, 0.01j, -0.02, 0.003 - 0.004j])
    def test_base_point(self, x):
        xp, w = build_sigma(P12)(x, P12.y0)
        assert abs(w - P12.y0) < 1e-6
        assert xp == pytest.approx(P12.tau(x), abs=1e-15)

    def test_inverse(self):
        S = build_sigma(P12)
        xp, w = S(0.02, 0.1 + 0.05j)
        x, y = S.inverse(xp, w)
        assert x == pytest.approx(0.02, abs=1e-14)
        assert abs(y - (0.1 + 0.05j)) < 1e-9

    def test_reversing_h_rejected(self):
        with pytest.raises(ValidationError):
            build_sigma(ConjugacyProblem.from_h(1, RealLinearMap(-0.5, 1.5)))

    def test_restriction_to_zero(self):
        # sigma on x = 0 solves psi_Y(w) = h(psi_X(y)) exactly
        y = 0.15 + 0.1j
        w = sigma_at_zero(P12, y)
        psi_x = (1 / P12.y0 - 1 / y) + P12.a * cmath.log(y / P12.y0)
        psi_y = (1 / P12.y0 - 1 / w) + P12.b * cmath.log(w / P12.y0)
        assert psi_y == pytest.approx(P12.h(psi_x), abs=1e-12)


class TestVerify:
    def test_one_two_passes(self, report):
        assert report.passed, report.checks()
        assert report.transport_gap < 1e-5
        assert len(report.transport_rows) >= 20

    def test_witness(self, report):
        assert report.nonholomorphy > 0.1 * report.nonholomorphy_expected
        assert report.antiholomorphy > 0.1

    def test_identity_is_holomorphic(self):
        R = verify_conjugacy(ConjugacyProblem.from_ab(1, 1), times=(1.0,))
        assert R.transport_gap < 1e-8
        assert R.nonholomorphy < 1e-6
        assert R.passed

    def test_gap_follows_tolerance(self):
        gaps = []
        for tol in (1e-8, 5e-9):
            S = Sigma(P12, tol, tol * 1e-2)
            R = verify_conjugacy(P12, S, times=(1.0, 2.0), budget=IntegrationBudget(rel_tol=tol, abs_tol=tol * 1e-2))
            gaps.append(R.transport_gap)
        assert gaps[1] <= 0.5 * gaps[0]

    def test_json_round_trip(self, report):
        js = report.to_json()
        assert js["passed"] is True
        assert set(js["checks"]) >= {"residue_match", "denominator_bound", "remainder_bounded", "fixed_curve_vanishing"}
        assert len(report.csv_rows()) == len(report.transport_rows)
