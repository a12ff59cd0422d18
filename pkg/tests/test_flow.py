import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holoflow.algebra import ComplexPoly, roots
from holoflow.errors import PoleTooClose, ValidationError, WindingAmbiguous
from holoflow.flow import (
    Arc,
    CallableField,
    CrossRadius,
    CustomEvent,
    EnterSingularBall,
    IntegrationBudget,
    Line,
    Path,
    SectionCross,
    enclosed_subset,
    fatou_integral,
    integrate,
    integrate_nonautonomous,
    verify_residue_formula,
    winding_number,
)

from conftest import random_poly

TIGHT = IntegrationBudget(max_time=50.0, rel_tol=1e-12, abs_tol=1e-14)


def test_closed_form_event_time():
    # w' = w^2 from -1: w(t) = -1/(1 + t) enters |w| < 0.1 at t = 9
    tr = integrate(ComplexPoly((0, 0, 1)), 1.0, -1.0, TIGHT, events=(EnterSingularBall(0, 0j, 0.1),))
    assert tr.status == "event"
    ev = tr.events[-1]
    assert ev.t == pytest.approx(9.0, abs=1e-10)
    assert ev.w == pytest.approx(-0.1, abs=1e-12)


def test_event_idempotence():
    p = ComplexPoly((0, 0, 1))
    tr = integrate(p, 1.0, -1.0, TIGHT, events=(EnterSingularBall(0, 0j, 0.1),))
    ev = tr.events[-1]
    again = integrate(p, 1.0, -1.0, TIGHT.with_time(ev.t))
    assert abs(again.end - ev.w) < 1e-10


def test_constant_field():
    tr = integrate(ComplexPoly((1,)), 1.0, 0.0, IntegrationBudget(max_time=2.5))
    assert tr.end == pytest.approx(2.5, abs=1e-12)
    assert tr.fatou_delta == pytest.approx(2.5, abs=1e-12)
    assert np.all(np.diff(tr.t) > 0)


def test_periodic_center():
    p = ComplexPoly((0, -1, 1)).scale(1j)
    w0 = 0.1 + 0j
    # the section normal is the initial velocity, so the first crossing is the return
    sec = SectionCross(0, w0, p(w0), min_time=0.1)
    tr = integrate(p, 1.0, w0, TIGHT, events=(sec,))
    assert tr.status == "event"
    assert abs(tr.end - w0) < 1e-8
    assert tr.total_time == pytest.approx(2 * math.pi, rel=0.05)


def test_event_times_inside_samples():
    tr = integrate(ComplexPoly((0, 0, 1)), 1.0, -1.0, TIGHT, events=(EnterSingularBall(0, 0j, 0.1),))
    for e in tr.events:
        assert tr.t[0] <= e.t <= tr.t[-1]


def test_budget_rejects_nonpositive():
    with pytest.raises(ValidationError):
        IntegrationBudget(rel_tol=0.0)


def test_csv_rows_mark_events():
    tr = integrate(ComplexPoly((0, 0, 1)), 1.0, -1.0, TIGHT, events=(EnterSingularBall(0, 0j, 0.1, name="ball"),))
    rows = tr.to_csv_rows()
    assert len(rows) == len(tr.t)
    assert rows[-1][3] == "ball"


class TestFatouIntegral:
    def test_antiderivative(self):
        # [-1/w] from -1 to -2 is 1/2 - 1
        assert fatou_integral(ComplexPoly((0, 0, 1)), [-1, -2]) == pytest.approx(-0.5, abs=1e-14)

    def test_arctan_closed_form(self):
        t = 0.1
        v = fatou_integral(ComplexPoly((t * t, 0, 1)), [-0.3, 0.3])
        assert v == pytest.approx(2 / t * math.atan(0.3 / t), rel=1e-13)
        assert v.real == pytest.approx(24.98, abs=5e-3)

    def test_circle_gives_residue(self):
        p = ComplexPoly((0, -1, 1))
        v = fatou_integral(p, Path.circle(1.0, 0.3))
        assert v == pytest.approx(2j * math.pi * 1.0, abs=1e-12)

    def test_pole_clearance(self):
        with pytest.raises(PoleTooClose):
            fatou_integral(ComplexPoly((0, -1, 1)), [-1, 1e-12j, 2])

    def test_homotopic_paths_agree(self):
        p = ComplexPoly((0, -1, 1))
        a = fatou_integral(p, [-1, 0.5 + 1j, 2])
        b = fatou_integral(p, [-1, -1 + 2j, 2 + 2j, 2])
        assert abs(a - b) < 1e-8

    def test_loop_difference_is_residue(self):
        p = ComplexPoly((0, -1, 1))
        above = Path.polyline([-1, 0.5 + 1j, 2])
        mixed = Path.polyline([-1, 0.5 + 0.5j, 0.5 - 0.5j, 2])
        loop = np.concatenate([above.sample(), mixed.reversed().sample()])
        k = round(winding_number(loop, 1.0))
        assert round(winding_number(loop, 0.0)) == 0 and abs(k) == 1
        d = fatou_integral(p, above) - fatou_integral(p, mixed)
        assert abs(d - k * 2j * math.pi * 1.0) < 1e-8

    def test_trajectory_path_matches_elapsed_time(self):
        p = ComplexPoly((0.5, 0.2j, 1))
        tr = integrate(p, 1j, 0.4 + 0.3j, IntegrationBudget(max_time=1.0, rel_tol=1e-12, abs_tol=1e-14))
        assert fatou_integral(p, tr) == pytest.approx(1j * tr.total_time, abs=1e-9)


def test_winding_ambiguous():
    with pytest.raises(WindingAmbiguous):
        winding_number(np.array([0, 1, 1j]), 0)
    loop = Path.circle(0, 1).sample()
    twice = np.concatenate([loop, loop])
    with pytest.raises(WindingAmbiguous):
        enclosed_subset(twice, [0j])


class TestResidueFormula:
    def _crossing(self, p, mu, th):
        out = CustomEvent("out", lambda t, w: abs(w) - 2.0 if t > 1e-6 else -1.0, sign=1)
        w0 = 2 * cmath.exp(1j * th)
        tr = integrate(p, mu, w0, TIGHT, events=(out,))
        assert tr.status == "event"
        t0, t1 = cmath.phase(w0), cmath.phase(tr.end)
        if t1 < t0:
            t1 += 2 * math.pi
        return tr, Path((Arc(0j, 2.0, t0, t1),))

    @pytest.mark.parametrize("th", [0.52, 1.57, 2.6])
    def test_two_centres(self, th):
        p = ComplexPoly((-1, 0, 1))
        tr, kappa = self._crossing(p, 1j, th)
        d = verify_residue_formula(p, tr, kappa, [(-1, -0.5), (1, 0.5)])
        assert abs(d) < 1e-6

    def test_zero_residue_reduces_to_fatou_identity(self):
        p = ComplexPoly((0, 0, 1))
        tr = integrate(p, 1.0, -1.0, IntegrationBudget(max_time=3.0, rel_tol=1e-12, abs_tol=1e-14))
        kappa = Path.polyline([tr.start, tr.end])
        assert abs(verify_residue_formula(p, tr, kappa, [(0, 0)], E_minus=[0])) < 1e-6

    def test_quadratic_family_crossing(self):
        a, x = 1.0, -0.01
        X = CallableField(lambda y: (y * y - x) / (1 + a * y), [0.1j, -0.1j])
        sec = SectionCross(0, 0.3, 1.0)
        tr = integrate(X, 1.0, -0.3, TIGHT, events=(sec,))
        assert tr.status == "event"
        # lower semicircle from -0.3 to 0.3; with the return along the axis it encloses -0.1i
        kappa = Path((Arc(0j, 0.3, math.pi, 2 * math.pi),))
        u = 0.1j
        res = [(u, 0.5 * (1 / u + a)), (-u, 0.5 * (-1 / u + a))]
        d = verify_residue_formula(X, tr, kappa, res)
        assert abs(d) < 1e-5

    def test_kappa_must_match_crossing(self):
        p = ComplexPoly((0, 0, 1))
        tr = integrate(p, 1.0, -1.0, IntegrationBudget(max_time=1.0))
        with pytest.raises(ValidationError):
            verify_residue_formula(p, tr, Path.polyline([0.5, 1.0]), [(0, 0)])


def test_nonautonomous_matches_closed_form():
    # dy/ds = 2 s y from y(0) = 1 gives exp(s^2); also integrates backwards
    y1, ss, ys = integrate_nonautonomous(lambda s, y: 2 * s * y, 1.0, 0.0, 1.0)
    assert y1 == pytest.approx(math.e, rel=1e-10)
    assert ss[0] == 0.0 and ss[-1] == pytest.approx(1.0)
    back, _, _ = integrate_nonautonomous(lambda s, y: 2 * s * y, y1, 1.0, 0.0)
    assert back == pytest.approx(1.0, rel=1e-10)


def _random_arc(seed: int):
    rng = np.random.default_rng(seed)
    deg = int(rng.integers(2, 6))
    p, zs, _ = random_poly(rng, deg)
    mu = cmath.exp(1j * rng.uniform(0, 2 * math.pi))
    w0 = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
    return p, mu, w0


ARC_BUDGET = IntegrationBudget(max_time=2.0, rel_tol=1e-12, abs_tol=1e-14)


def _events(p):
    return (CrossRadius(6.0),) + tuple(EnterSingularBall(i, r.location, 1e-2) for i, r in enumerate(roots(p)))


@settings(max_examples=30)
@given(st.integers(0, 100_000))
def test_unit_speed_fatou_identity(seed):
    p, mu, w0 = _random_arc(seed)
    if min(abs(w0 - r.location) for r in roots(p)) < 2e-2:
        return
    tr = integrate(p, mu, w0, ARC_BUDGET, events=_events(p))
    assert abs(tr.fatou_delta / mu - tr.total_time) < 1e-6


@settings(max_examples=30)
@given(st.integers(0, 100_000))
def test_time_reversal(seed):
    p, mu, w0 = _random_arc(seed)
    if min(abs(w0 - r.location) for r in roots(p)) < 2e-2:
        return
    tr = integrate(p, mu, w0, ARC_BUDGET, events=_events(p))
    back = integrate(p, -mu, tr.end, ARC_BUDGET.with_time(tr.total_time))
    assert abs(back.end - w0) < 1e-8


@settings(max_examples=20)
@given(st.integers(0, 100_000))
def test_samples_strictly_increase(seed):
    p, mu, w0 = _random_arc(seed)
    tr = integrate(p, mu, w0, IntegrationBudget(max_time=1.0), events=(CrossRadius(6.0),))
    assert np.all(np.diff(tr.t) > 0)


def test_line_and_arc_reverse():
    l = Line(0, 1 + 1j)
    assert l.reversed().start == l.end
    a = Arc(0, 1, 0, 1)
    assert a.reversed().end == pytest.approx(a.start)
