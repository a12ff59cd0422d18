import cmath
import math

import numpy as np
import pytest

from holoflow.errors import PetalExit, ValidationError
from holoflow.longtraj import (
    DiscreteMap,
    beta_curve,
    beta_point,
    benchmark_u_samples,
    complex_time_flow,
    equivariance_gap,
    fatou_pair,
    make_spec,
    residue_T,
    run_long_orbit,
    run_long_trajectory,
    trim,
)
from holoflow.unfolding import fixed_curves, instability_set, load

Q = load("y**2-x")
PAIR = fatou_pair(Q, -0.3, 0.3)
US = benchmark_u_samples()
# curve 0 is y = -u, i.e. y = -i t at x = -t**2 on the benchmark samples
SPEC = make_spec(Q, PAIR, [0], 0.0)


def tof(t):
    return 2 / t * math.atan(0.3 / t)


@pytest.fixture(scope="module")
def benchmark():
    return run_long_trajectory(SPEC, u_samples=US)


class TestFatouPair:
    def test_gap_value(self):
        # [-1/y] from -0.3 to 0.3 around the origin
        assert PAIR.psi_gap == pytest.approx(-2 / 0.3, abs=1e-10)

    def test_gap_is_path_independent(self):
        other = fatou_pair(Q, -0.3, 0.3, epsilon=0.4)
        assert abs(other.psi_gap - PAIR.psi_gap) < 1e-8

    def test_petal_membership(self):
        with pytest.raises(ValidationError):
            fatou_pair(Q, 0.3, -0.3)

    def test_spec_invariants(self):
        with pytest.raises(ValidationError):
            make_spec(Q, PAIR, [])
        with pytest.raises(ValidationError):
            make_spec(Q, PAIR, [0, 1])


class TestResidueT:
    def test_e_minus_is_lower_root(self):
        u = 0.05j
        assert residue_T(SPEC).e_minus_points(u)[0] == pytest.approx(-u, abs=1e-14)

    @pytest.mark.parametrize("u", US)
    def test_frozen_form_is_pole_plus_constant(self, u):
        t = abs(u)
        T = residue_T(make_spec(Q, PAIR, [0], 0.0, frozen_gap=True))
        assert T(u) == pytest.approx(PAIR.psi_gap.real + math.pi / t, rel=1e-12)

    @pytest.mark.parametrize("u", US)
    def test_matches_time_of_flight(self, u):
        assert residue_T(SPEC)(u) == pytest.approx(tof(abs(u)), rel=1e-10)

    def test_s_shift(self):
        T0 = residue_T(SPEC)
        T1 = residue_T(make_spec(Q, PAIR, [0], 1.0))
        assert T1(0.05j) - T0(0.05j) == pytest.approx(1j, abs=1e-14)

    @pytest.mark.parametrize("a", [1.0, 1 + 1j])
    def test_constant_from_nonzero_a(self, a):
        X = load("y**2-x", f"1+({a.real}+{a.imag}*I)*y" if isinstance(a, complex) else f"1+{a}*y")
        # the denominator shrinks the petals, so the pair moves inwards
        pair = fatou_pair(X, -0.1, 0.1)
        T = residue_T(make_spec(X, pair, [0], 0.0, frozen_gap=True))
        plain = fatou_pair(Q, -0.1, 0.1)
        T_plain = residue_T(make_spec(Q, plain, [0], 0.0, frozen_gap=True))
        u = 0.02j
        shift = (T(u) - pair.psi_gap) - (T_plain(u) - plain.psi_gap)
        assert shift == pytest.approx(-2j * math.pi * a / 2, abs=1e-10)


class TestBeta:
    @pytest.fixture(scope="class")
    @classmethod
    def beta0(cls):
        return beta_curve(residue_T(SPEC), 0.0, (0.1, 0.001), 0.1j, instability=[d.x_direction for d in instability_set(Q)])

    def test_negative_real_axis(self, beta0):
        assert max(abs(x / abs(x) + 1) for x in beta0.x) < 1e-9

    def test_level_set(self, beta0):
        T = residue_T(SPEC)
        assert max(abs(T.T0(u).imag) for u in beta0.u[::10]) < 1e-9
        assert all(t > 0 for t in beta0.tau)

    def test_adhered_direction_is_unstable(self, beta0):
        assert beta0.adhered_direction == pytest.approx(-1, abs=1e-9)
        assert beta0.in_instability_set

    def test_sweep_is_ordered_and_disjoint(self):
        curves = {}
        for s in (-2, -1, 0, 1, 2):
            B = beta_curve(residue_T(make_spec(Q, PAIR, [0], s)), s, (0.1, 0.03), 0.1j)
            curves[s] = B
        # compare phases in u at a common radius, interpolated along each curve
        for r in (0.08, 0.05, 0.035):
            ph = []
            for s in (-2, -1, 0, 1, 2):
                rad = np.abs(curves[s].u)
                ang = np.unwrap(np.angle(curves[s].u))
                ph.append(np.interp(r, rad[::-1], ang[::-1]))
            assert np.all(np.diff(ph) > 1e-4)

    def test_beta_point_solves(self):
        T = residue_T(make_spec(Q, PAIR, [0], 0.5))
        u = beta_point(T, 0.5, 100.0, 0.03j)
        v = T.T0(u)
        assert v == pytest.approx(100.0 - 0.5j, abs=1e-9)

    def test_bad_window(self):
        with pytest.raises(ValidationError):
            beta_curve(residue_T(SPEC), 0.0, (0.01, 0.1), 0.1j)


class TestLongTrajectory:
    def test_benchmark_time_and_endpoint(self, benchmark):
        for r, u in zip(benchmark.rows, US):
            assert abs(r.T - tof(abs(u))) <= 1e-4 * abs(r.T)
        assert benchmark.rows[-1].endpoint_error < 1e-2
        assert benchmark.diverging

    def test_residue_formula_consistency(self, benchmark):
        for r in benchmark.rows:
            assert r.residue_discrepancy < 1e-4 * abs(r.T)

    def test_middle_stays_in_trimmed_disc(self, benchmark):
        # over [M, T - M] the arc stays inside |y| <= |exp(M X)(y+)|; the real arc crosses y = 0,
        # so the sampled minimum only reflects the step grid there
        bound = abs(complex_time_flow(Q, 0.0, PAIR.y_plus, 10.0))
        for r in benchmark.rows:
            assert r.mid_max_abs_y <= 1.05 * bound
        assert max(r.mid_min_abs_y for r in benchmark.rows) < 5e-3

    def test_frozen_limit_convergence(self):
        # with the gap frozen at x = 0 the time is off by O(t**2), which the endpoint inherits
        rep = run_long_trajectory(make_spec(Q, PAIR, [0], 0.0, frozen_gap=True), u_samples=US)
        errs = [r.endpoint_error for r in rep.rows]
        assert all(b <= a for a, b in zip(errs[2:], errs[3:]))
        assert errs[-1] < 1e-2
        ratios = [a / b for a, b in zip(errs, errs[1:])]
        assert ratios == pytest.approx([4.0] * 5, rel=0.05)

    def test_quarter_turn_limit_and_equivariance(self, benchmark):
        s = math.pi / 2
        spec = make_spec(Q, PAIR, [0], s)
        T, T0 = residue_T(spec), residue_T(SPEC)
        us = [beta_point(T, s, T0(u).real, u) for u in US[:4]]
        rep = run_long_trajectory(spec, u_samples=us)
        assert rep.limit_target == pytest.approx(0.3 / (1 - 0.3j * s), abs=1e-10)
        errs = [r.endpoint_error for r in rep.rows]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        gaps = equivariance_gap(Q, rep, benchmark)
        for g, ra, rb in zip(gaps, rep.rows, benchmark.rows):
            assert g <= 1.5 * ra.endpoint_error + 10 * rb.endpoint_error + 1e-9

    def test_degenerate_subset_does_not_diverge(self):
        spec = make_spec(Q, PAIR, [0, 1], 0.0, allow_degenerate=True)
        rep = run_long_trajectory(spec, u_samples=US)
        assert not rep.diverging
        assert all(math.isnan(r.endpoint_error) for r in rep.rows)

    def test_samples_must_decrease(self):
        with pytest.raises(ValidationError):
            run_long_trajectory(SPEC, u_samples=[0.01j, 0.02j])

    def test_off_beta_sample_rejected(self):
        # wrong E- gives Re T < 0 along the benchmark samples
        with pytest.raises(ValidationError):
            run_long_trajectory(make_spec(Q, PAIR, [1], 0.0), u_samples=US[:3])

    def test_csv_rows_carry_both_errors(self, benchmark):
        rows = benchmark.to_csv_rows()
        assert len(rows) == len(US)
        assert {"endpoint_error", "residue_discrepancy"} <= set(rows[0])

    def test_reversed_petals(self):
        # for x - y**2 the petals swap and so does the choice of E-
        Y = load("x-y**2")
        pair = fatou_pair(Y, 0.3, -0.3)
        rep = run_long_trajectory(make_spec(Y, pair, [1], 0.0), u_samples=US[:3])
        assert rep.rows[-1].endpoint_error < 1e-6
        assert rep.limit_target == pytest.approx(-0.3, abs=1e-12)


class TestTrim:
    def test_zero_is_identity(self):
        assert trim(SPEC, 0) is SPEC

    def test_three_units(self):
        us = US[2:]
        base = run_long_trajectory(SPEC, u_samples=us)
        rep = run_long_trajectory(trim(SPEC, 3, us), u_samples=us)
        for a, b in zip(base.rows, rep.rows):
            assert (a.T - b.T).real == pytest.approx(6.0, abs=0.1)
            # shorter runs at the same tolerance: trimming never costs accuracy
            assert b.endpoint_error <= 2 * a.endpoint_error
        # the shifted target flows back onto the original one
        back = complex_time_flow(Q, 0.0, rep.limit_target, 3.0)
        assert back == pytest.approx(base.limit_target, abs=1e-10)

    def test_too_large(self):
        with pytest.raises(PetalExit):
            trim(SPEC, 1000)
        with pytest.raises(PetalExit):
            trim(SPEC, 3, US)

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            trim(SPEC, -1)


class TestLongOrbit:
    def test_unperturbed_orbit_follows_trajectory(self):
        phi = DiscreteMap(Q)
        rep = run_long_orbit(phi, SPEC, US[:4])
        for r in rep.rows:
            assert r.tracking_sup == pytest.approx(0, abs=1e-9)
            assert 0 <= r.frac < 1
            # ceil(T) steps overshoot the continuous arc by exactly frac units of time
            cont = run_long_trajectory(SPEC, u_samples=[r.u]).rows[0].endpoint
            assert r.endpoint == pytest.approx(complex_time_flow(Q, r.x, cont, r.frac), abs=1e-7)
        errs = [r.endpoint_error for r in rep.rows]
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_exact_flow_is_moebius(self):
        phi = DiscreteMap(Q)
        assert phi.exact
        # y' = y**2 at x = 0: y -> y/(1 - t y)
        assert phi.flow(0.0, -0.3, 2.0) == pytest.approx(-0.3 / 1.6, rel=1e-14)
        inexact = DiscreteMap(Q, exact=False)
        assert inexact.flow(-0.01, 0.2 + 0.1j) == pytest.approx(phi.flow(-0.01, 0.2 + 0.1j), abs=1e-11)

    def test_tracking_with_perturbation(self):
        pert = lambda x, y: 1e-3 * (y * y - x) ** 2 / (1 + y)
        phi = DiscreteMap(Q, pert, order=2)
        rep = run_long_orbit(phi, SPEC, US[:3])
        assert rep.tracking_sup < 1
        for r in rep.rows:
            assert r.tracking_oracle_gap < 1e-6
        assert rep.psi_limit_discrepancy < 1e-1

    @pytest.mark.parametrize("power", [2, 3])
    def test_ideal_exponent(self, power):
        pert = lambda x, y: 1e-3 * (y * y - x) ** power / (1 + y)
        phi = DiscreteMap(Q, pert, order=power)
        k = phi.ideal_exponent(-1e-4, [0.01j, -0.01j], [1e-3, 3e-4, 1e-4, 3e-5])
        assert k == pytest.approx(power, abs=0.05)

    def test_inverse(self):
        pert = lambda x, y: 1e-3 * (y * y - x) ** 2 / (1 + y)
        phi = DiscreteMap(Q, pert)
        y = 0.1 + 0.05j
        assert phi(-0.001, phi.inverse(-0.001, y)) == pytest.approx(y, abs=1e-13)


def test_curve_ids_are_stable():
    ids = [c.seed_y for c in fixed_curves(Q, radii=[], directions=[])]
    again = [c.seed_y for c in fixed_curves(Q, radii=[], directions=[])]
    assert ids == again
    assert cmath.isfinite(residue_T(SPEC)(0.1j))
