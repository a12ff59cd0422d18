import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holoflow.algebra import (
    BivariatePoly,
    ComplexPoly,
    compose_affine,
    contour_residue_oracle,
    derivative,
    residue_of_dual_form,
    roots,
    scale,
    series_inverse,
)
from holoflow.errors import DegenerateDenominator, ValidationError

from conftest import random_poly, separated_roots


def P(*c):
    return ComplexPoly(tuple(c))


class TestComplexPoly:
    def test_trailing_zeros_stripped(self):
        p = P(1, 2, 0, 0)
        assert p.coeffs == (1, 2)
        assert p.degree() == 1

    def test_zero_polynomial(self):
        z = P(0, 0)
        assert z.is_zero()
        assert z.degree() == -1

    def test_derivative(self):
        assert derivative(P(0, 0, -1, 1)).allclose(P(0, -2, 3))

    def test_scale_evaluates(self):
        assert scale(P(0, -1, 1), 1j)(2) == pytest.approx(2j)

    def test_compose_affine(self):
        zeta = 0.3 - 0.7j
        assert compose_affine(P(0, 0, 1), 1, -zeta).allclose(P(zeta * zeta, -2 * zeta, 1))

    def test_pairs_round_trip(self):
        p = P(1 + 2j, -3, 0.5j)
        assert ComplexPoly.from_pairs(p.to_pairs()) == p


class TestRoots:
    def test_double_and_simple(self):
        rc = roots(P(0, 0, -1, 1))
        assert [(round(r.location.real, 9), r.multiplicity) for r in rc] == [(0.0, 2), (1.0, 1)]

    def test_quadratic_in_parameter(self):
        t = 0.1
        rc = roots(P(t * t, 0, 1))
        locs = sorted((r.location for r in rc), key=lambda z: z.imag)
        assert locs[0] == pytest.approx(-0.1j, abs=1e-14)
        assert locs[1] == pytest.approx(0.1j, abs=1e-14)
        assert all(r.multiplicity == 1 for r in rc)

    def test_near_double_root_clusters(self):
        p = ComplexPoly.from_roots([1.0, 1.0 + 1e-9])
        rc = roots(p, tol_cluster=1e-6)
        assert len(rc) == 1
        assert rc[0].multiplicity == 2
        assert rc[0].location == pytest.approx(1.0, abs=1e-8)

    def test_sorted_lexicographically(self, rng):
        p, _, _ = random_poly(rng, 6)
        locs = [r.location for r in roots(p)]
        assert locs == sorted(locs, key=lambda z: (z.real, z.imag))

    def test_deterministic(self, rng):
        p, _, _ = random_poly(rng, 5)
        assert roots(p) == roots(p)

    def test_constant_rejected(self):
        with pytest.raises(ValidationError):
            roots(P(3))

    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_recovers_factors(self, seed, deg):
        r = np.random.default_rng(seed)
        zs = separated_roots(r, deg)
        rc = roots(ComplexPoly.from_roots(zs))
        assert sum(c.multiplicity for c in rc) == deg
        for z in zs:
            assert min(abs(c.location - z) for c in rc) < 1e-8

    @given(st.integers(0, 10_000))
    def test_multiplicities_from_factored_form(self, seed):
        r = np.random.default_rng(seed)
        zs = separated_roots(r, 3, sep=0.5)
        mult = [1, 2, 3]
        p = ComplexPoly.from_roots([z for z, m in zip(zs, mult) for _ in range(m)])
        # an m-fold root of the expanded form splits by about eps**(1/m)
        rc = roots(p, tol_cluster=1e-3)
        assert sorted(c.multiplicity for c in rc) == [1, 2, 3]
        for c in rc:
            assert abs(c.location - zs[c.multiplicity - 1]) < 1e-8


class TestResidues:
    def test_double_root_value(self):
        p = P(0, 0, -1, 1)
        vals = {r.multiplicity: residue_of_dual_form(p, r).value for r in roots(p)}
        assert vals[2] == pytest.approx(-1, abs=1e-12)
        assert vals[1] == pytest.approx(1, abs=1e-12)
        # oracle: the contour integral around 0
        assert contour_residue_oracle(lambda w: 1 / p(w), 0, 0.5) == pytest.approx(-1, abs=1e-12)

    def test_pure_square(self):
        p = P(0, 0, 1)
        (r,) = roots(p)
        assert abs(residue_of_dual_form(p, r).value) < 1e-14

    def test_simple_roots(self):
        p = P(0, -1, 1)
        vals = [residue_of_dual_form(p, r).value for r in roots(p)]
        assert vals == [pytest.approx(-1), pytest.approx(1)]

    def test_contour_unit(self):
        assert abs(contour_residue_oracle(lambda w: 1 / w, 0, 1) - 1) < 1e-14

    def test_quadratic_family_residue(self):
        a, x = 2.0, 0.04
        v = contour_residue_oracle(lambda y: (1 + a * y) / (y * y - x), 0.2, 0.1)
        assert v == pytest.approx(3.5, rel=1e-12)

    def test_degenerate_declared_multiplicity(self):
        from holoflow.algebra import RootCluster

        with pytest.raises(DegenerateDenominator):
            residue_of_dual_form(P(0, 0, 1), RootCluster(0j, 1, 0.0))

    def test_series_inverse(self):
        # 1/(1 - u) = 1 + u + u^2 + ...
        assert series_inverse([1, -1], 5) == [1, 1, 1, 1, 1]

    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_residue_sum_vanishes(self, seed, deg):
        p, _, _ = random_poly(np.random.default_rng(seed), deg)
        res = [residue_of_dual_form(p, r).value for r in roots(p)]
        assert abs(sum(res)) <= 1e-10 * max(abs(v) for v in res)

    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_oracle_agreement(self, seed, deg):
        p, zs, _ = random_poly(np.random.default_rng(seed), deg)
        for r in roots(p):
            v = residue_of_dual_form(p, r).value
            o = contour_residue_oracle(lambda w: 1 / p(w), r.location, 0.1, 256)
            assert abs(v - o) <= 1e-8 * abs(v)

    def test_simple_root_is_reciprocal_derivative(self, rng):
        p, _, _ = random_poly(rng, 4)
        dp = p.derivative()
        for r in roots(p):
            assert residue_of_dual_form(p, r).value == pytest.approx(1 / dp(r.location), rel=1e-12)


class TestBivariate:
    def test_table_round_trip(self):
        f = BivariatePoly.from_table([[[0, 0], [0, 0], [1, 0]], [[-1, 0]]])
        assert f(0.04, 0.2) == pytest.approx(0)
        g = BivariatePoly.from_table(f.to_table())
        assert g(0.3, -0.1j) == f(0.3, -0.1j)

    def test_slice_in_y(self):
        f = BivariatePoly.from_table([[[0, 0], [0, 0], [1, 0]], [[-1, 0]]])
        assert f.in_y(0.25).allclose(P(-0.25, 0, 1))

    def test_residue_branch_formula(self):
        # X = (y^2 - x)/(1 + a y): Res at y = +-sqrt(x) equals (+-1/sqrt(x) + a)/2
        a = 1 + 1j
        x = 0.01 * cmath.exp(0.7j)
        u = cmath.sqrt(x)
        for sgn in (1, -1):
            y = sgn * u
            v = contour_residue_oracle(lambda e: (1 + a * e) / (e * e - x), y, 0.5 * abs(u))
            assert v == pytest.approx(0.5 * (sgn / u + a), rel=1e-10)
            assert not math.isnan(v.real)
