"""Long Trajectories and Long Orbits of an unfolding.

A Fatou pair (y+, y-) sits in an attracting and a repelling petal of the
unperturbed field.  The time Re(X) needs to carry y+ to y- for x != 0 is

    T_s(x) = gap(x) - 2 pi i sum_{P in E-(x)} Res(X, P) + i s,

where gap(x) is the integral of dy/X(x, .) along a fixed path kappa that runs
counterclockwise through the annulus |y| ~ epsilon and E- is the set of fixed
points enclosed between kappa and the direct crossing.  On the curve
beta_s = {Im T_0 = -s} the time T_s is real, and the endpoint of the real
trajectory converges to exp(i s X|_{x=0})(y-) as x -> 0 along beta_s.

All parameters live in the ramified variable u (x = u**k) so that the fixed
curves, and hence E-, are single valued.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BudgetExhausted,
    LevelSetLost,
    OrbitEscaped,
    PetalExit,
    ValidationError,
)
from .flow import Arc, IntegrationBudget, Line, Path, fatou_integral, integrate
from .unfolding import FixedCurve, UnfoldingField, _continue, fixed_curves, petals, residue_at

__all__ = [
    "FatouPair",
    "kappa_path",
    "fatou_pair",
    "LongTrajectorySpec",
    "make_spec",
    "ResidueT",
    "residue_T",
    "BetaCurve",
    "beta_point",
    "beta_curve",
    "LongTrajectoryRow",
    "LongTrajectoryReport",
    "run_long_trajectory",
    "complex_time_flow",
    "equivariance_gap",
    "DiscreteMap",
    "LongOrbitRow",
    "LongOrbitReport",
    "run_long_orbit",
    "snap_fraction",
    "trim",
    "benchmark_u_samples",
]


# --------------------------------------------------------------------------
# Fatou pairs


def kappa_path(y_plus: complex, y_minus: complex, epsilon: float) -> Path:
    """Radial segment out to |y| = epsilon, counterclockwise arc, radial segment in."""
    a = cmath.phase(y_plus)
    b = a + (cmath.phase(y_minus) - a) % (2 * math.pi)
    p0 = epsilon * cmath.exp(1j * a)
    p1 = epsilon * cmath.exp(1j * b)
    pieces = []
    if abs(p0 - y_plus) > 0:
        pieces.append(Line(complex(y_plus), p0))
    pieces.append(Arc(0j, float(epsilon), a, b))
    if abs(p1 - y_minus) > 0:
        pieces.append(Line(p1, complex(y_minus)))
    return Path(tuple(pieces))


@dataclass(frozen=True)
class FatouPair:
    y_plus: complex
    y_minus: complex
    epsilon: float
    psi_gap: complex  # at x = 0, normalised by psi_+(0, y_plus) = 0
    kappa: Path = field(repr=False)


def fatou_pair(
    X: UnfoldingField, y_plus: complex, y_minus: complex, epsilon: float = 0.5, check: bool = True
) -> FatouPair:
    y_plus, y_minus = complex(y_plus), complex(y_minus)
    if check:
        P = petals(X)
        if not any(p.attracting and p.contains(y_plus) for p in P):
            raise ValidationError(f"y_plus={y_plus} is not in an attracting petal")
        if not any((not p.attracting) and p.contains(y_minus) for p in P):
            raise ValidationError(f"y_minus={y_minus} is not in a repelling petal")
    kappa = kappa_path(y_plus, y_minus, epsilon)
    gap = fatou_integral(X.slice(0.0), kappa)
    return FatouPair(y_plus, y_minus, float(epsilon), gap, kappa)


# --------------------------------------------------------------------------
# the residue formula


@dataclass(frozen=True)
class LongTrajectorySpec:
    X: UnfoldingField
    pair: FatouPair
    E_minus: tuple[int, ...]  # fixed-curve ids
    s: float
    curves: tuple[FixedCurve, ...] = field(repr=False)
    branch_hint: complex = 1j  # direction in u used to pick k-th roots of x
    frozen_gap: bool = False


def make_spec(
    X: UnfoldingField,
    pair: FatouPair,
    E_minus: Sequence[int],
    s: float = 0.0,
    branch_hint: complex = 1j,
    frozen_gap: bool = False,
    allow_degenerate: bool = False,
) -> LongTrajectorySpec:
    curves = tuple(fixed_curves(X, radii=[], directions=[]))
    ids = tuple(sorted(set(int(j) for j in E_minus)))
    if not ids:
        raise ValidationError("E_minus must be nonempty")
    if any(j < 0 or j >= len(curves) for j in ids):
        raise ValidationError(f"E_minus ids must lie in 0..{len(curves) - 1}")
    if len(curves) > 1 and len(ids) == len(curves) and not allow_degenerate:
        raise ValidationError("E_minus must be a proper subset of the fixed curves")
    return LongTrajectorySpec(X, pair, ids, float(s), curves, complex(branch_hint), frozen_gap)


class _Tracker:
    """Positions of a set of fixed curves, continued from call to call."""

    def __init__(self, X: UnfoldingField, curves: Sequence[FixedCurve], ids: Sequence[int]):
        self.X = X
        self.curves = [curves[j] for j in ids]
        self.u: complex | None = None
        self.ys: list[complex] = []

    def at(self, u: complex) -> list[complex]:
        u = complex(u)
        if self.u is not None and u == self.u:
            return self.ys
        fresh = self.u is None
        if not fresh:
            a, b = self.u, u
            d = b - a
            # closest approach of the straight move to the branch point u = 0
            t = min(1.0, max(0.0, -((a * d.conjugate()).real) / max(abs(d) ** 2, 1e-300)))
            fresh = abs(a + t * d) < 0.5 * min(abs(a), abs(b))
        if fresh:
            ys = [c.locate(u) for c in self.curves]
        else:
            n = max(2, int(abs(u - self.u) / (0.05 * min(abs(u), abs(self.u)))) + 2)
            path = [self.u + (u - self.u) * s for s in np.linspace(0.0, 1.0, n)]
            ys = []
            for c, y in zip(self.curves, self.ys):
                A = self.X.factors[c.factor][0]
                ys.append(complex(_continue(A, np.array([y]), path)[0]))
        self.u, self.ys = u, ys
        return ys


class ResidueT:
    """The evaluable u -> T_s(u) of a Long Trajectory experiment."""

    def __init__(self, spec: LongTrajectorySpec):
        self.spec = spec
        self._track = _Tracker(spec.X, spec.curves, spec.E_minus)

    def u_for(self, x: complex) -> complex:
        """The k-th root of x closest to the branch hint."""
        k = self.spec.X.ramification
        if k == 1:
            return complex(x)
        r = abs(x) ** (1.0 / k)
        a = cmath.phase(x)
        cands = [r * cmath.exp(1j * (a + 2 * math.pi * j) / k) for j in range(k)]
        h = self.spec.branch_hint
        return max(cands, key=lambda u: (u * h.conjugate()).real)

    def gap(self, u: complex) -> complex:
        if self.spec.frozen_gap:
            return self.spec.pair.psi_gap
        x = self.spec.X.x_of(u)
        return fatou_integral(self.spec.X.slice(x), self.spec.pair.kappa)

    def e_minus_points(self, u: complex) -> list[complex]:
        return self._track.at(u)

    def residue_sum(self, u: complex) -> complex:
        x = self.spec.X.x_of(u)
        tot = 0j
        for c, y in zip(self._track.curves, self._track.at(u)):
            tot += residue_at(self.spec.X, x, y, c.multiplicity)
        return tot

    def T0(self, u: complex) -> complex:
        return self.gap(u) - 2j * math.pi * self.residue_sum(u)

    def __call__(self, u: complex) -> complex:
        return self.T0(u) + 1j * self.spec.s

    def of_x(self, x: complex) -> complex:
        return self(self.u_for(x))

    def derivative(self, u: complex) -> complex:
        h = 1e-6 * abs(u)
        return (self.T0(u + h) - self.T0(u - h)) / (2 * h)


def residue_T(spec: LongTrajectorySpec) -> ResidueT:
    return ResidueT(spec)


# --------------------------------------------------------------------------
# beta curves


def beta_point(T: ResidueT, s: float, tau: float, guess: complex, tol: float = 1e-12) -> complex:
    """u with T_0(u) = tau - i s, by Newton from ``guess``."""
    target = tau - 1j * s
    u = complex(guess)
    for _ in range(40):
        val = T.T0(u) - target
        if abs(val) <= tol * max(1.0, abs(target)):
            return u
        du = val / T.derivative(u)
        # damp steps that would move across the branch point
        lim = 0.5 * abs(u)
        if abs(du) > lim:
            du *= lim / abs(du)
        u -= du
    raise LevelSetLost(f"Newton on Im T0 = {-s} did not converge near u={guess:.6g}")


@dataclass(frozen=True)
class BetaCurve:
    s: float
    u: tuple[complex, ...]
    x: tuple[complex, ...]
    tau: tuple[float, ...]  # Re T_0 at the samples
    adhered_u: complex
    adhered_direction: complex  # in the x variable
    in_instability_set: bool | None


def beta_curve(
    T: ResidueT,
    s: float,
    window: tuple[float, float],
    guess: complex,
    instability: Sequence[complex] | None = None,
    dtau: float | None = None,
    max_points: int = 4000,
) -> BetaCurve:
    """Trace {Im T_0 = -s, Re T_0 > 0} from |u| = window[0] down to window[1].

    The level set is parametrised by tau = Re T_0: the predictor moves u by
    dtau/T_0'(u), the corrector is Newton on T_0(u) = tau - i s.  The
    adhered direction is the x-direction of the last point; it is compared
    with ``instability`` (x-directions) when given.
    """
    r0, r1 = window
    if not (r0 > r1 > 0):
        raise ValidationError("window must be (outer radius, inner radius) with outer > inner > 0")
    u0 = complex(guess)
    u0 = u0 * r0 / abs(u0)
    tau0 = T.T0(u0).real
    u = beta_point(T, s, tau0, u0)
    us, taus = [u], [tau0]
    tau = tau0
    step = dtau if dtau is not None else 0.05 * max(1.0, abs(tau0))
    while abs(u) > r1 and len(us) < max_points:
        d = T.derivative(u)
        if d == 0 or not cmath.isfinite(d):
            raise LevelSetLost("degenerate predictor")
        # orient so that |u| decreases
        sign = 1.0 if abs(u + step / d) < abs(u) else -1.0
        tau_new = tau + sign * step
        pred = u + sign * step / d
        try:
            u_new = beta_point(T, s, tau_new, pred)
        except LevelSetLost:
            step *= 0.5
            if step < 1e-8:
                raise
            continue
        if abs(u_new - u) > 0.3 * abs(u):
            step *= 0.5
            continue
        u, tau = u_new, tau_new
        us.append(u)
        taus.append(tau)
        # keep the relative move per step near 5%
        step = min(step * 1.5, 0.05 * abs(u) * abs(d))
    if abs(u) > r1:
        raise LevelSetLost("beta curve did not reach the inner window radius")
    k = T.spec.X.ramification
    lam_u = us[-1] / abs(us[-1])
    lam_x = lam_u**k
    inside = None
    if instability is not None:
        inside = any(abs(lam_x - d) < 1e-2 for d in instability)
    xs = tuple(T.spec.X.x_of(v) for v in us)
    return BetaCurve(float(s), tuple(us), xs, tuple(taus), lam_u, lam_x, inside)


# --------------------------------------------------------------------------
# Long Trajectories


def benchmark_u_samples(n: int = 6, t0: float = 0.1) -> list[complex]:
    """u_n = i t0 2^-n, i.e. x_n = -(t0 2^-n)**2 for a square-root ramification."""
    return [1j * t0 * 2.0**-j for j in range(n)]


def complex_time_flow(X: UnfoldingField, x: complex, y: complex, z: complex, rel_tol: float = 1e-12) -> complex:
    """exp(z X(x, .))(y) along the straight complex-time path 0 -> z."""
    if z == 0:
        return complex(y)
    mu = z / abs(z)
    tr = integrate(
        X.slice(x), mu, y, IntegrationBudget(max_time=abs(z), rel_tol=rel_tol, abs_tol=1e-14), fatou=False
    )
    if tr.status != "time":
        raise BudgetExhausted(f"complex-time flow stopped with status {tr.status}")
    return tr.end


@dataclass(frozen=True)
class LongTrajectoryRow:
    n: int
    u: complex
    x: complex
    T: complex
    flow_time: float
    endpoint: complex
    target: complex
    endpoint_error: float
    residue_discrepancy: float
    mid_max_abs_y: float
    mid_min_abs_y: float


@dataclass(frozen=True)
class LongTrajectoryReport:
    s: float
    rows: tuple[LongTrajectoryRow, ...]
    limit_target: complex
    direction: complex  # adhered x-direction from the samples
    diverging: bool
    smallest_abs_x: float
    settings: dict

    def to_csv_rows(self) -> list[dict]:
        out = []
        for r in self.rows:
            out.append(
                {
                    "n": r.n,
                    "re_x": r.x.real,
                    "im_x": r.x.imag,
                    "re_T": r.T.real,
                    "im_T": r.T.imag,
                    "re_endpoint": r.endpoint.real,
                    "im_endpoint": r.endpoint.imag,
                    "endpoint_error": r.endpoint_error,
                    "residue_discrepancy": r.residue_discrepancy,
                    "mid_max_abs_y": r.mid_max_abs_y,
                }
            )
        return out

    def to_json(self) -> dict:
        errs = [r.endpoint_error for r in self.rows]
        return {
            "s": self.s,
            "limit_target": [self.limit_target.real, self.limit_target.imag],
            "direction": [self.direction.real, self.direction.imag],
            "diverging": self.diverging,
            "smallest_abs_x": self.smallest_abs_x,
            "final_endpoint_error": errs[-1] if errs else None,
            "settings": self.settings,
        }


def _diverges(Ts: Sequence[complex], us: Sequence[complex]) -> bool:
    if len(Ts) < 2:
        return True
    span = abs(us[0]) / abs(us[-1])
    if span < 2:
        return True
    return abs(Ts[-1]) > 2.0 * abs(Ts[0])


def run_long_trajectory(
    spec: LongTrajectorySpec,
    u_samples: Sequence[complex] | None = None,
    x_samples: Sequence[complex] | None = None,
    budget: IntegrationBudget | None = None,
    trim_time: float = 10.0,
) -> LongTrajectoryReport:
    """Integrate Re(X) from (x_n, y+) for time Re T_s(x_n) at every sample.

    Samples are given in the ramified variable (``u_samples``) or as x values
    whose k-th root is chosen next to the branch hint.
    """
    T = ResidueT(spec)
    if u_samples is None:
        if x_samples is None:
            raise ValidationError("give u_samples or x_samples")
        u_samples = [T.u_for(x) for x in x_samples]
    us = [complex(u) for u in u_samples]
    if any(abs(b) >= abs(a) for a, b in zip(us, us[1:])):
        raise ValidationError("samples must strictly decrease in modulus")
    budget = budget or IntegrationBudget(rel_tol=1e-10, abs_tol=1e-12)
    X, pair = spec.X, spec.pair
    target = complex_time_flow(X, 0.0, pair.y_minus, 1j * spec.s)
    Ts = [T(u) for u in us]
    diverging = _diverges(Ts, us)
    rows = []
    for n, (u, Tn) in enumerate(zip(us, Ts)):
        x = X.x_of(u)
        if not diverging:
            nan = complex(math.nan, math.nan)
            rows.append(LongTrajectoryRow(n, u, x, Tn, math.nan, nan, target, math.nan, math.nan, math.nan, math.nan))
            continue
        tf = Tn.real
        if tf <= 0:
            raise ValidationError(f"sample {n} has Re T = {tf:.4g} <= 0; it is not on a beta curve")
        F = X.slice(x)
        tr = integrate(F, 1.0, pair.y_plus, budget.with_time(tf), fatou=False)
        if tr.status != "time":
            raise BudgetExhausted(f"sample {n}: integration stopped with status {tr.status}")
        end = tr.end
        # residue formula for this very crossing, closing kappa to the endpoint
        ys = T.e_minus_points(u)
        kap = pair.kappa + Path((Line(pair.y_minus, end),)) if end != pair.y_minus else pair.kappa
        gap_n = fatou_integral(F, kap)
        rs = sum(residue_at(X, x, y, c.multiplicity) for c, y in zip(T._track.curves, ys))
        disc = abs(gap_n - 2j * math.pi * rs - tf)
        mid = [abs(w) for tt, w in zip(tr.t, tr.w) if trim_time <= tt <= tf - trim_time]
        rows.append(
            LongTrajectoryRow(
                n, u, x, Tn, tf, end, target, abs(end - target), disc,
                max(mid) if mid else math.nan, min(mid) if mid else math.nan,
            )
        )
    lam = us[-1] / abs(us[-1])
    settings = {
        "y_plus": [pair.y_plus.real, pair.y_plus.imag],
        "y_minus": [pair.y_minus.real, pair.y_minus.imag],
        "epsilon": pair.epsilon,
        "E_minus": list(spec.E_minus),
        "frozen_gap": spec.frozen_gap,
        "rel_tol": budget.rel_tol,
        "abs_tol": budget.abs_tol,
        "trim_time": trim_time,
    }
    return LongTrajectoryReport(
        spec.s, tuple(rows), target, lam**X.ramification, diverging,
        abs(X.x_of(us[-1])), settings,
    )


def equivariance_gap(
    X: UnfoldingField, rep_a: LongTrajectoryReport, rep_b: LongTrajectoryReport
) -> list[float]:
    """|e_n^a - exp(i (s_a - s_b) X|_{x=0})(e_n^b)| for matching samples."""
    out = []
    z = 1j * (rep_a.s - rep_b.s)
    for ra, rb in zip(rep_a.rows, rep_b.rows):
        out.append(abs(ra.endpoint - complex_time_flow(X, 0.0, rb.endpoint, z)))
    return out


# --------------------------------------------------------------------------
# Long Orbits


def _riccati_coeffs(X: UnfoldingField, x: complex) -> tuple[complex, complex, complex]:
    den = X.denominator.in_y(x)
    num = X.numerator.in_y(x)
    if den.degree() > 0 or num.degree() > 2:
        raise ValidationError("the closed-form flow map needs a Riccati field with constant denominator")
    c = list(num.coeffs) + [0j] * (3 - len(num.coeffs))
    d = den.coeffs[0]
    return c[2] / d, c[1] / d, c[0] / d


def _moebius_flow(a: complex, b: complex, c: complex, y: complex, t: float) -> complex:
    """Time-t map of y' = a y**2 + b y + c.

    With A = [[b/2, c], [-a, -b/2]] the flow is the Moebius map of exp(tA);
    A**2 = q I with q = b**2/4 - a c, so exp(tA) = C I + S A with
    C = sum q^k t^2k/(2k)! and S = sum q^k t^(2k+1)/(2k+1)!, entire in q.
    """
    q = (b * b / 4 - a * c) * t * t
    C, S = 0j, 0j
    term_c, term_s = 1.0 + 0j, t + 0j
    for k in range(60):
        C += term_c
        S += term_s
        term_c = term_c * q / ((2 * k + 1) * (2 * k + 2))
        term_s = term_s * q / ((2 * k + 2) * (2 * k + 3))
        if abs(term_c) + abs(term_s) < 1e-18 * (abs(C) + abs(S)):
            break
    m11 = C + S * b / 2
    m12 = S * c
    m21 = -S * a
    m22 = C - S * b / 2
    return (m11 * y + m12) / (m21 * y + m22)


class DiscreteMap:
    """phi(x, y) = (x, exp(X)(x, y) + delta p(x, y)).

    ``flow`` evaluates the time-t map of X; the closed Moebius form is used
    for Riccati fields, otherwise a tight numerical integration.
    """

    def __init__(
        self,
        X: UnfoldingField,
        perturbation: Callable[[complex, complex], complex] | None = None,
        order: int = 3,
        exact: bool | None = None,
    ):
        self.X = X
        self.perturbation = perturbation
        self.order = order
        if exact is None:
            try:
                _riccati_coeffs(X, 0.0)
                exact = True
            except ValidationError:
                exact = False
        self.exact = exact

    def flow(self, x: complex, y: complex, t: float = 1.0) -> complex:
        if self.exact:
            a, b, c = _riccati_coeffs(self.X, x)
            return _moebius_flow(a, b, c, y, t)
        tr = integrate(
            self.X.slice(x), 1.0 if t > 0 else -1.0, y,
            IntegrationBudget(max_time=abs(t), rel_tol=1e-13, abs_tol=1e-15), fatou=False,
        )
        return tr.end

    def __call__(self, x: complex, y: complex) -> complex:
        z = self.flow(x, y)
        if self.perturbation is not None:
            z += self.perturbation(x, y)
        return z

    def inverse(self, x: complex, y: complex) -> complex:
        """phi^-1 by Newton started from exp(-X)."""
        z = self.flow(x, y, -1.0)
        if self.perturbation is None:
            return z
        for _ in range(50):
            r = self(x, z) - y
            h = 1e-7 * max(1.0, abs(z))
            d = (self(x, z + h) - self(x, z - h)) / (2 * h)
            dz = r / d
            z -= dz
            if abs(dz) <= 1e-15 * max(1.0, abs(z)):
                break
        return z

    def delta(self, x: complex, y: complex) -> complex:
        """Fatou-time gap between phi(y) and exp(X)(y) along the short segment."""
        a = self.flow(x, y)
        b = a + (self.perturbation(x, y) if self.perturbation is not None else 0j)
        if b == a:
            return 0j
        F = self.X.slice(x)
        g = np.polynomial.legendre.leggauss(4)
        tot = 0j
        for node, wt in zip(*g):
            z = a + (b - a) * (0.5 * (node + 1))
            tot += wt * 0.5 / F(z)
        return tot * (b - a)

    def ideal_exponent(self, x: complex, curve_points: Sequence[complex], offsets: Sequence[float]) -> float:
        """Fitted power k in |y o phi - y o exp(X)| ~ |f|**k near fixed points."""
        if self.perturbation is None:
            return math.inf
        lf, lp = [], []
        for y0 in curve_points:
            for r in offsets:
                y = y0 + r
                fv = abs(self.X.numerator(x, y))
                pv = abs(self.perturbation(x, y))
                if fv > 0 and pv > 0:
                    lf.append(math.log(fv))
                    lp.append(math.log(pv))
        return float(np.polyfit(lf, lp, 1)[0])


def snap_fraction(T: ResidueT, s: float, u: complex, frac: float) -> complex:
    """Move u along beta_s so that ceil(T_s) - T_s equals ``frac``."""
    tau = T.T0(u).real
    target = math.ceil(tau) - frac
    if target < tau - 0.5:
        target += 1.0
    return beta_point(T, s, target, u)


@dataclass(frozen=True)
class LongOrbitRow:
    n: int
    u: complex
    x: complex
    T: complex
    iterations: int
    frac: float
    endpoint: complex
    target: complex
    endpoint_error: float
    tracking_sup: float
    tracking_oracle_gap: float
    limit_value: complex  # ceil(T) + 2 pi i sum Res


@dataclass(frozen=True)
class LongOrbitReport:
    rows: tuple[LongOrbitRow, ...]
    cauchy_gap: float
    tracking_sup: float
    psi_limit: complex
    psi_limit_discrepancy: float
    settings: dict

    def to_csv_rows(self) -> list[dict]:
        return [
            {
                "n": r.n,
                "re_x": r.x.real,
                "im_x": r.x.imag,
                "iterations": r.iterations,
                "frac": r.frac,
                "re_endpoint": r.endpoint.real,
                "im_endpoint": r.endpoint.imag,
                "endpoint_error": r.endpoint_error,
                "tracking_sup": r.tracking_sup,
                "re_limit_value": r.limit_value.real,
                "im_limit_value": r.limit_value.imag,
            }
            for r in self.rows
        ]

    def to_json(self) -> dict:
        return {
            "cauchy_gap": self.cauchy_gap,
            "tracking_sup": self.tracking_sup,
            "psi_limit": [self.psi_limit.real, self.psi_limit.imag],
            "psi_limit_discrepancy": self.psi_limit_discrepancy,
            "settings": self.settings,
        }


def _discrete_fatou_sum(phi: DiscreteMap, y: complex, forward: bool, tol: float = 1e-12, max_iter: int = 2_000_000) -> complex:
    """Sum_{j>=0} Delta(phi^j y) forward, or sum_{j>=1} Delta(phi^-j y) backward, at x = 0."""
    tot = 0j
    z = complex(y)
    if not forward:
        z = phi.inverse(0.0, z)
    for _ in range(max_iter):
        d = phi.delta(0.0, z)
        tot += d
        if abs(d) < tol:
            return tot
        z = phi(0.0, z) if forward else phi.inverse(0.0, z)
    raise BudgetExhausted("discrete Fatou correction did not reach the tolerance")


def run_long_orbit(
    phi: DiscreteMap,
    spec: LongTrajectorySpec,
    u_samples: Sequence[complex],
    frac: float | None = 0.5,
    escape_radius: float | None = None,
    psi_check: bool = True,
) -> LongOrbitReport:
    """Iterate phi ceil(T_s(x_n)) times from (x_n, y+).

    With ``frac`` set, each sample is first moved along beta_s so that the
    fractional part ceil(T) - T is the same for every n; the limit of
    ceil(T) + 2 pi i sum Res then exists and is frac + gap(0) + i s.
    """
    T = ResidueT(spec)
    X, pair = spec.X, spec.pair
    escape = escape_radius if escape_radius is not None else 2.0 * pair.epsilon
    if frac is not None:
        us = [snap_fraction(T, spec.s, u, frac) for u in u_samples]
    else:
        us = [complex(u) for u in u_samples]
    rows = []
    for n, u in enumerate(us):
        x = X.x_of(u)
        Tn = T(u)
        nit = math.ceil(Tn.real)
        fr = nit - Tn.real
        F = X.slice(x)
        y = pair.y_plus
        pts = [y]
        acc = 0j
        sup = 0.0
        for _ in range(nit):
            acc += phi.delta(x, y)
            y = phi(x, y)
            if not abs(y) < escape:
                raise OrbitEscaped(f"sample {n}: orbit left |y| < {escape}")
            pts.append(y)
            sup = max(sup, abs(acc))
        # oracle: Fatou integral along the orbit polyline minus the step count
        chord = fatou_integral(F, Path.polyline(pts)) if len(pts) > 1 else 0j
        oracle = chord - nit
        target = complex_time_flow(X, 0.0, pair.y_minus, fr + 1j * spec.s)
        lim = nit + 2j * math.pi * T.residue_sum(u)
        rows.append(
            LongOrbitRow(n, u, x, Tn, nit, fr, y, target, abs(y - target), sup, abs(oracle - acc), lim)
        )
    last = [r.limit_value for r in rows[-3:]]
    cauchy = max(abs(a - b) for a in last for b in last) if len(last) > 1 else math.nan
    psi_lim = complex(math.nan, math.nan)
    psi_disc = math.nan
    if psi_check and rows:
        chi = rows[-1].endpoint
        F0 = X.slice(0.0)
        base = pair.psi_gap + fatou_integral(F0, [pair.y_minus, chi])
        plus = _discrete_fatou_sum(phi, pair.y_plus, True)
        minus = _discrete_fatou_sum(phi, chi, False)
        psi_lim = base - minus - plus
        psi_disc = abs(rows[-1].limit_value - psi_lim)
    settings = {
        "frac": frac,
        "E_minus": list(spec.E_minus),
        "perturbation_order": phi.order,
        "exact_flow": phi.exact,
    }
    return LongOrbitReport(
        tuple(rows), cauchy, max(r.tracking_sup for r in rows) if rows else math.nan,
        psi_lim, psi_disc, settings,
    )


# --------------------------------------------------------------------------
# trimming


def trim(
    spec: LongTrajectorySpec,
    M: int,
    u_samples: Sequence[complex] | None = None,
    vertex_clearance: float = 1e-2,
) -> LongTrajectorySpec:
    """Start M time units later and stop M earlier: y+ -> exp(M X)(y+), y- -> exp(-M X)(y-).

    The new times are T - 2M.  PetalExit if a moved point leaves its petal,
    gets closer to the parabolic point than ``vertex_clearance * epsilon``,
    or comes within twice the size of the fixed set at the given samples.
    """
    if M < 0:
        raise ValidationError("trimming needs M >= 0")
    if M == 0:
        return spec
    X, pair = spec.X, spec.pair
    yp = complex_time_flow(X, 0.0, pair.y_plus, float(M))
    ym = complex_time_flow(X, 0.0, pair.y_minus, -float(M))
    P = petals(X)
    if not any(p.attracting and p.contains(yp) for p in P):
        raise PetalExit(f"exp({M}X)(y+) = {yp:.6g} left the attracting petal")
    if not any((not p.attracting) and p.contains(ym) for p in P):
        raise PetalExit(f"exp(-{M}X)(y-) = {ym:.6g} left the repelling petal")
    if min(abs(yp), abs(ym)) < vertex_clearance * pair.epsilon:
        raise PetalExit("trimmed points reach the vertex of their petals")
    if u_samples is not None:
        tr = _Tracker(X, spec.curves, range(len(spec.curves)))
        size = max(max(abs(y) for y in tr.at(u)) for u in u_samples)
        if min(abs(yp), abs(ym)) <= 2.0 * size:
            raise PetalExit("trimmed points reach the fixed curves at the given samples")
    new_pair = fatou_pair(X, yp, ym, pair.epsilon, check=False)
    return replace(spec, pair=new_pair)
