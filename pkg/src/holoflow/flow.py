"""Real flows of one-variable holomorphic vector fields.

The integrator is a Dormand-Prince 5(4) pair with its quartic continuous
extension, run on the complex scalar ODE w' = mu * F(w) (which is the real
planar system of Re(mu F d/dw)).  Events are located on the interpolant.
Beyond an optional chart radius the state is carried in z = 1/w.

Fatou increments are not read off the clock: each accepted step contributes
the quadrature of w'(t)/F(w(t)) along its interpolant, which is the exact
increment of a Fatou coordinate between the computed points.  Comparing it
with mu times the elapsed time therefore measures the integration error in
Fatou units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .algebra import ComplexPoly, roots
from .errors import NonConvergence, PoleTooClose, StepUnderflow, ValidationError, WindingAmbiguous

__all__ = [
    "Field",
    "PolyField",
    "CallableField",
    "as_field",
    "IntegrationBudget",
    "CrossRadius",
    "EnterSingularBall",
    "SectionCross",
    "CustomEvent",
    "EventRecord",
    "Trajectory",
    "integrate",
    "integrate_nonautonomous",
    "Line",
    "Arc",
    "Path",
    "fatou_integral",
    "winding_number",
    "enclosed_subset",
    "verify_residue_formula",
]


# --------------------------------------------------------------------------
# fields


class Field:
    """A holomorphic vector field F(w) d/dw on a domain of the plane."""

    zeros: tuple[complex, ...] = ()

    def __call__(self, w: complex) -> complex:
        raise NotImplementedError

    def chart(self, z: complex) -> complex:
        """The field in the coordinate z = 1/w, i.e. -z**2 F(1/z)."""
        return -z * z * self(1.0 / z)

    def scale_at(self, w: complex) -> float:
        return max(abs(self(w)), 1e-300)


class PolyField(Field):
    def __init__(self, p: ComplexPoly):
        if p.degree() < 0:
            raise ValidationError("zero vector field")
        self.p = p
        self._rev = p.reversed()
        self._d = p.degree()
        self._zeros: tuple[complex, ...] | None = None
        self._hc = tuple(reversed(p.coeffs))

    @property
    def zeros(self) -> tuple[complex, ...]:  # type: ignore[override]
        if self._zeros is None:
            self._zeros = tuple(r.location for r in roots(self.p)) if self._d >= 1 else ()
        return self._zeros

    def __call__(self, w):
        if isinstance(w, np.ndarray):
            return self.p(w)
        acc = 0j
        for c in self._hc:
            acc = acc * w + c
        return acc

    def chart(self, z):
        # -z^2 P(1/z) = -z^(2-d) Prev(z), never forming 1/z
        return -(z ** (2 - self._d)) * self._rev(z)


class CallableField(Field):
    def __init__(self, f: Callable[[complex], complex], zeros: Sequence[complex] = ()):
        self.f = f
        self.zeros = tuple(complex(z) for z in zeros)

    def __call__(self, w):
        return self.f(w)


def as_field(obj) -> Field:
    if isinstance(obj, Field):
        return obj
    if isinstance(obj, ComplexPoly):
        return PolyField(obj)
    if callable(obj):
        return CallableField(obj)
    raise ValidationError(f"cannot interpret {type(obj).__name__} as a vector field")


# --------------------------------------------------------------------------
# budgets and events


@dataclass(frozen=True)
class IntegrationBudget:
    max_time: float = 1e3
    max_arc_length: float = math.inf
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    min_step: float = 1e-13
    max_steps: int = 400_000

    def __post_init__(self) -> None:
        for name in ("max_time", "max_arc_length", "rel_tol", "abs_tol", "min_step"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"IntegrationBudget.{name} must be positive")
        if self.max_steps <= 0:
            raise ValidationError("IntegrationBudget.max_steps must be positive")

    def with_time(self, t: float) -> "IntegrationBudget":
        return replace(self, max_time=t)

    def scaled(self, f: float) -> "IntegrationBudget":
        return replace(self, rel_tol=self.rel_tol * f, abs_tol=self.abs_tol * f)


@dataclass(frozen=True)
class CrossRadius:
    radius: float
    direction: str = "outward"  # 'inward' | 'outward' | 'both'
    center: complex = 0j
    terminal: bool = True
    name: str = "cross_radius"

    def g(self, t: float, w: complex) -> float:
        return abs(w - self.center) - self.radius

    @property
    def sign(self) -> int:
        return {"outward": 1, "inward": -1, "both": 0}[self.direction]


@dataclass(frozen=True)
class EnterSingularBall:
    sing_id: int
    center: complex
    radius: float
    terminal: bool = True
    name: str = "enter_ball"
    sign: int = -1

    def g(self, t: float, w: complex) -> float:
        return abs(w - self.center) - self.radius


@dataclass(frozen=True)
class SectionCross:
    """Oriented line through ``point``; fires when crossing towards ``normal``."""

    section_id: int
    point: complex
    normal: complex
    min_time: float = 0.0
    terminal: bool = True
    name: str = "section"
    sign: int = 1

    def g(self, t: float, w: complex) -> float:
        return (self.normal.conjugate() * (w - self.point)).real


@dataclass(frozen=True)
class CustomEvent:
    name: str
    func: Callable[[float, complex], float]
    sign: int = 0
    terminal: bool = True

    def g(self, t: float, w: complex) -> float:
        return self.func(t, w)


EventSpec = Union[CrossRadius, EnterSingularBall, SectionCross, CustomEvent]


@dataclass(frozen=True)
class EventRecord:
    t: float
    w: complex
    kind: str
    spec: object = None


# --------------------------------------------------------------------------
# Dormand-Prince coefficients

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
# a short rule for per-step Fatou increments; the integrand is nearly constant
_SX, _SW = np.polynomial.legendre.leggauss(5)
_STEP_U = tuple(float(u) for u in 0.5 * (_SX + 1.0))
_STEP_W = tuple(float(v) for v in 0.5 * _SW)


@dataclass(frozen=True)
class _Segment:
    t0: float
    h: float
    chart: int  # 0: w-plane, 1: z = 1/w
    r: tuple[complex, complex, complex, complex, complex]

    def state(self, theta: float) -> complex:
        r1, r2, r3, r4, r5 = self.r
        th1 = 1.0 - theta
        return r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)))

    def state_and_rate(self, theta):
        r1, r2, r3, r4, r5 = self.r
        th1 = 1.0 - theta
        a = r4 + th1 * r5
        b = r3 + theta * a
        c = r2 + th1 * b
        y = r1 + theta * c
        db = a - theta * r5
        dc = -b + th1 * db
        dy = c + theta * dc
        return y, dy

    def w(self, theta: float) -> complex:
        s = self.state(theta)
        return s if self.chart == 0 else 1.0 / s


@dataclass
class Trajectory:
    """Sampled arc of Re(mu F d/dw) with its events and Fatou increment."""

    t: np.ndarray
    w: np.ndarray
    events: tuple[EventRecord, ...]
    total_time: float
    fatou_delta: complex
    status: str
    mu: complex
    segments: tuple[_Segment, ...] = field(repr=False, default=())
    arc_length: float = 0.0

    @property
    def start(self) -> complex:
        return complex(self.w[0])

    @property
    def end(self) -> complex:
        return complex(self.w[-1])

    @property
    def samples(self) -> list[tuple[float, complex]]:
        return list(zip(self.t.tolist(), self.w.tolist()))

    def at(self, t: float) -> complex:
        """Dense-output evaluation at time ``t`` inside the arc."""
        if not self.segments:
            return self.start
        t = min(max(t, self.segments[0].t0), self.segments[-1].t0 + self.segments[-1].h)
        ts = [s.t0 for s in self.segments]
        k = max(0, int(np.searchsorted(ts, t, side="right")) - 1)
        seg = self.segments[k]
        return seg.w((t - seg.t0) / seg.h if seg.h else 0.0)

    def dense_points(self, per_step: int = 4) -> np.ndarray:
        if not self.segments:
            return np.array([self.start])
        pts = [self.start]
        for seg in self.segments:
            for k in range(1, per_step + 1):
                pts.append(seg.w(k / per_step))
        return np.array(pts)

    def event(self, kind: str) -> EventRecord | None:
        for e in self.events:
            if e.kind == kind:
                return e
        return None

    def to_csv_rows(self) -> list[tuple[float, float, float, str]]:
        """Rows (t, re_w, im_w, event); the event column names events hit at that sample."""
        ev_by_t = {e.t: e.kind for e in self.events}
        return [
            (tt, ww.real, ww.imag, ev_by_t.get(tt, ""))
            for tt, ww in zip(self.t.tolist(), self.w.tolist())
        ]


def _rk_step(f, y0: complex, k1: complex, h: float):
    k2 = f(y0 + h * (0.2 * k1))
    k3 = f(y0 + h * (0.075 * k1 + 0.225 * k2))
    k4 = f(y0 + h * (44 / 45 * k1 - 56 / 15 * k2 + 32 / 9 * k3))
    k5 = f(y0 + h * (19372 / 6561 * k1 - 25360 / 2187 * k2 + 64448 / 6561 * k3 - 212 / 729 * k4))
    k6 = f(
        y0
        + h * (9017 / 3168 * k1 - 355 / 33 * k2 + 46732 / 5247 * k3 + 49 / 176 * k4 - 5103 / 18656 * k5)
    )
    y1 = y0 + h * (35 / 384 * k1 + 500 / 1113 * k3 + 125 / 192 * k4 - 2187 / 6784 * k5 + 11 / 84 * k6)
    k7 = f(y1)
    err = h * (
        71 / 57600 * k1
        - 71 / 16695 * k3
        + 71 / 1920 * k4
        - 17253 / 339200 * k5
        + 22 / 525 * k6
        - 0.025 * k7
    )
    return y1, (k1, k2, k3, k4, k5, k6, k7), err


def _dense(y0: complex, y1: complex, k, h: float):
    r2 = y1 - y0
    r3 = h * k[0] - r2
    r4 = r2 - h * k[6] - r3
    r5 = h * (
        _D[0] * k[0] + _D[2] * k[2] + _D[3] * k[3] + _D[4] * k[4] + _D[5] * k[5] + _D[6] * k[6]
    )
    return (y0, r2, r3, r4, r5)


def _segment_fatou(field_: Field, seg: _Segment) -> complex:
    acc = 0j
    for u, wt in zip(_STEP_U, _STEP_W):
        y, dy = seg.state_and_rate(u)
        if seg.chart == 0:
            acc += wt * dy / field_(y)
        else:
            acc += wt * dy / field_.chart(y)
    return acc


def _initial_step(f, y0: complex, f0: complex, budget: IntegrationBudget) -> float:
    sc = budget.abs_tol + budget.rel_tol * abs(y0)
    d0 = abs(y0) / sc
    d1 = abs(f0) / sc
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    d2 = abs(f(y1) - f0) / sc / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, budget.max_time)


def integrate(
    field_,
    mu: complex,
    w0: complex,
    budget: IntegrationBudget | None = None,
    events: Sequence[EventSpec] = (),
    chart_radius: float | None = None,
    fatou: bool = True,
    escape_radius: float = 1e12,
) -> Trajectory:
    """Integrate w' = mu F(w) from ``w0``.

    Stops at the first terminal event, at ``budget.max_time`` or on budget
    exhaustion.  Non-terminal events are recorded and integration continues.
    ``chart_radius`` switches the state to z = 1/w while |w| exceeds it.
    """
    F = as_field(field_)
    budget = budget or IntegrationBudget()
    mu = complex(mu)
    w0 = complex(w0)
    for zz in F.zeros:
        if abs(w0 - zz) <= budget.abs_tol:
            raise ValidationError("initial point sits on a singular point")

    def f_w(y):
        return mu * F(y)

    def f_z(y):
        return mu * F.chart(y)

    chart = 0
    y = w0
    if chart_radius is not None and abs(w0) > chart_radius:
        chart = 1
        y = 1.0 / w0
    fcur = f_w if chart == 0 else f_z
    k1 = fcur(y)
    t = 0.0
    h = _initial_step(fcur, y, k1, budget)
    ts = [0.0]
    ws = [w0]
    segs: list[_Segment] = []
    recs: list[EventRecord] = []
    psi = 0j
    arc = 0.0
    status = "time"
    gprev = [ev.g(0.0, w0) for ev in events]
    nsteps = 0
    done = False

    while not done:
        if nsteps >= budget.max_steps:
            status = "steps"
            break
        if t >= budget.max_time * (1 - 1e-15):
            status = "time"
            break
        h = min(h, budget.max_time - t)
        if h < budget.min_step * max(1.0, abs(t)):
            if budget.max_time - t <= budget.min_step * max(1.0, abs(t)):
                status = "time"
                break
            raise StepUnderflow(
                f"step size {h:.3e} below minimum at t={t:.6g}, w={ws[-1]:.6g}"
            )
        y1, kk, err = _rk_step(fcur, y, k1, h)
        sc = budget.abs_tol + budget.rel_tol * max(abs(y), abs(y1))
        en = abs(err) / sc
        if not math.isfinite(en):
            h *= 0.25
            continue
        if en > 1.0:
            h *= max(0.2, 0.9 * en ** -0.2)
            continue
        nsteps += 1
        seg = _Segment(t, h, chart, _dense(y, y1, kk, h))
        t_new = t + h
        w_new = y1 if chart == 0 else 1.0 / y1

        # events on this step
        hit = None
        for idx, ev in enumerate(events):
            g1 = ev.g(t_new, w_new)
            g0 = gprev[idx]
            crossed = (g0 < 0 <= g1 and ev.sign >= 0) or (g0 > 0 >= g1 and ev.sign <= 0)
            if crossed and g0 != 0:
                def gfun(th, ev=ev):
                    return ev.g(t + th * h, seg.w(th))

                try:
                    th = brentq(gfun, 0.0, 1.0, xtol=min(1e-12, 1e-12 / h) if h else 1e-12)
                except ValueError:
                    th = 1.0
                te = t + th * h
                if te < getattr(ev, "min_time", 0.0):
                    gprev[idx] = ev.g(t_new, w_new)
                    continue
                if hit is None or te < hit[0] - 1e-15:
                    hit = (te, th, idx)
            gprev[idx] = g1
        if hit is not None:
            te, th, idx = hit
            ev = events[idx]
            we = seg.w(th)
            rec = EventRecord(te, we, ev.name, ev)
            recs.append(rec)
            if ev.terminal:
                # truncate the step at the event
                part = _Segment(t, th * h, chart, _truncate(seg, th))
                if fatou and th > 0:
                    psi += _segment_fatou(F, part)
                arc += abs(we - ws[-1])
                segs.append(part)
                ts.append(te)
                ws.append(we)
                t = te
                status = "event"
                break
        if fatou:
            psi += _segment_fatou(F, seg)
        arc += abs(w_new - ws[-1])
        segs.append(seg)
        ts.append(t_new)
        ws.append(w_new)
        t = t_new
        y = y1
        k1 = kk[6]
        if arc > budget.max_arc_length:
            status = "arc"
            break
        if not (abs(w_new) < escape_radius):
            status = "escaped"
            break
        # chart switches with hysteresis
        if chart_radius is not None:
            if chart == 0 and abs(w_new) > chart_radius:
                chart, y, fcur = 1, 1.0 / w_new, f_z
                k1 = fcur(y)
            elif chart == 1 and abs(w_new) < chart_radius / 1.2:
                chart, y, fcur = 0, w_new, f_w
                k1 = fcur(y)
        h *= min(5.0, max(0.2, 0.9 * max(en, 1e-10) ** -0.2))

    return Trajectory(
        t=np.array(ts),
        w=np.array(ws, dtype=complex),
        events=tuple(recs),
        total_time=t,
        fatou_delta=psi,
        status=status,
        mu=mu,
        segments=tuple(segs),
        arc_length=arc,
    )


def integrate_nonautonomous(
    f: Callable[[float, complex], complex],
    y0: complex,
    s0: float,
    s1: float,
    rel_tol: float = 1e-11,
    abs_tol: float = 1e-13,
    max_steps: int = 100_000,
    guard: Callable[[float, complex], None] | None = None,
) -> tuple[complex, np.ndarray, np.ndarray]:
    """Solve dy/ds = f(s, y) from s0 to s1 with the same Dormand-Prince pair.

    ``guard(s, y)`` is called on every accepted point and may raise to abort.
    Returns the final state and the accepted (s, y) nodes.
    """
    direction = 1.0 if s1 >= s0 else -1.0
    span = abs(s1 - s0)
    y = complex(y0)
    s = 0.0
    ss, ys = [s0], [y]
    if span == 0:
        return y, np.array(ss), np.array(ys, dtype=complex)

    def g(th, w):
        return direction * f(s0 + direction * th, w)

    k1 = g(0.0, y)
    h = min(span, 0.05)
    steps = 0
    while s < span * (1 - 1e-15):
        if steps >= max_steps:
            raise StepUnderflow(f"step budget exhausted at s={s0 + direction * s:.6g}")
        h = min(h, span - s)
        if h < 1e-14 * max(1.0, span):
            raise StepUnderflow(f"step size {h:.3e} below minimum at s={s0 + direction * s:.6g}")
        y1, kk, err = _rk_step(_StageClock(g, s, h), y, k1, h)
        sc = abs_tol + rel_tol * max(abs(y), abs(y1))
        en = abs(err) / sc
        if not math.isfinite(en) or en > 1.0:
            h *= 0.25 if not math.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
            continue
        steps += 1
        s += h
        y = y1
        k1 = kk[6]
        if guard is not None:
            guard(s0 + direction * s, y)
        ss.append(s0 + direction * s)
        ys.append(y)
        h *= min(5.0, max(0.2, 0.9 * max(en, 1e-10) ** -0.2))
    return y, np.array(ss), np.array(ys, dtype=complex)


class _StageClock:
    """Feeds the stage times of one step to a non-autonomous right-hand side."""

    # nodes of the pair after k1, in the order _rk_step evaluates stages
    _C = (0.2, 0.3, 0.8, 8 / 9, 1.0, 1.0)

    def __init__(self, g, s: float, h: float):
        self.g, self.s, self.h, self.i = g, s, h, 0

    def __call__(self, w):
        th = self.s + self.h * self._C[self.i]
        self.i += 1
        return self.g(th, w)


def _truncate(seg: _Segment, th: float):
    """Re-expand the interpolant on [0, th] in the same nested form."""
    # sample the quartic and refit on the sub-interval; exact up to round-off
    us = np.linspace(0.0, 1.0, 5)
    vals = np.array([seg.state(th * u) for u in us])
    # nested form y = r1 + u (r2 + (1-u)(r3 + u (r4 + (1-u) r5))) is a basis of quartics
    basis = np.array(
        [[1.0, u, u * (1 - u), u * u * (1 - u), u * u * (1 - u) ** 2] for u in us]
    )
    r = np.linalg.solve(basis, vals)
    return tuple(complex(v) for v in r)


# --------------------------------------------------------------------------
# paths and Fatou integrals


@dataclass(frozen=True)
class Line:
    a: complex
    b: complex

    def point(self, u):
        return self.a + (self.b - self.a) * u

    def velocity(self, u):
        return (self.b - self.a) + 0 * u

    def reversed(self) -> "Line":
        return Line(self.b, self.a)

    @property
    def start(self) -> complex:
        return self.a

    @property
    def end(self) -> complex:
        return self.b


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    theta0: float
    theta1: float

    def point(self, u):
        th = self.theta0 + (self.theta1 - self.theta0) * u
        return self.center + self.radius * np.exp(1j * th)

    def velocity(self, u):
        th = self.theta0 + (self.theta1 - self.theta0) * u
        return 1j * (self.theta1 - self.theta0) * self.radius * np.exp(1j * th)

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.theta1, self.theta0)

    @property
    def start(self) -> complex:
        return complex(self.point(0.0))

    @property
    def end(self) -> complex:
        return complex(self.point(1.0))


Piece = Union[Line, Arc]


@dataclass(frozen=True)
class Path:
    pieces: tuple[Piece, ...]

    @classmethod
    def polyline(cls, pts: Sequence[complex]) -> "Path":
        pts = [complex(p) for p in pts]
        return cls(tuple(Line(a, b) for a, b in zip(pts[:-1], pts[1:])))

    @classmethod
    def circle(cls, center: complex, radius: float, theta0: float = 0.0) -> "Path":
        return cls((Arc(center, radius, theta0, theta0 + 2 * math.pi),))

    @property
    def start(self) -> complex:
        return self.pieces[0].start

    @property
    def end(self) -> complex:
        return self.pieces[-1].end

    def __add__(self, other: "Path") -> "Path":
        return Path(self.pieces + other.pieces)

    def reversed(self) -> "Path":
        return Path(tuple(p.reversed() for p in reversed(self.pieces)))

    def sample(self, per_piece: int = 256) -> np.ndarray:
        pts = [self.start]
        u = np.linspace(0.0, 1.0, per_piece + 1)[1:]
        for p in self.pieces:
            pts.extend(np.asarray(p.point(u), dtype=complex).tolist())
        return np.array(pts, dtype=complex)


def _piece_distance(piece: Piece, z: complex) -> float:
    if isinstance(piece, Line):
        d = piece.b - piece.a
        if d == 0:
            return abs(z - piece.a)
        u = min(1.0, max(0.0, ((z - piece.a) * d.conjugate()).real / abs(d) ** 2))
        return abs(z - piece.point(u))
    pts = piece.point(np.linspace(0.0, 1.0, 513))
    return float(np.min(np.abs(pts - z)))


def _gl(fun, a: float, b: float) -> complex:
    m = 0.5 * (a + b)
    r = 0.5 * (b - a)
    u = m + r * _GL_X
    return complex(np.sum(_GL_W * fun(u)) * r)


def _gl_abs(fun, a: float, b: float) -> tuple[complex, float]:
    m = 0.5 * (a + b)
    r = 0.5 * (b - a)
    v = _GL_W * fun(m + r * _GL_X)
    return complex(np.sum(v) * r), float(np.sum(np.abs(v)) * abs(r))


def _adaptive(fun, a: float, b: float, whole: complex, tol: float, depth: int, budget: list) -> complex:
    budget[0] -= 1
    if budget[0] < 0:
        raise NonConvergence("adaptive quadrature exhausted its subdivision budget (pole on the path?)")
    m = 0.5 * (a + b)
    left, la = _gl_abs(fun, a, m)
    right, ra = _gl_abs(fun, m, b)
    # halving tol per level eventually drops below round-off; floor it there
    if abs(left + right - whole) <= max(tol, 32e-16 * (la + ra)) or depth >= 40:
        return left + right
    return _adaptive(fun, a, m, left, tol / 2, depth + 1, budget) + _adaptive(
        fun, m, b, right, tol / 2, depth + 1, budget
    )


def _field_vec(F: Field):
    def ev(z):
        try:
            v = np.asarray(F(z), dtype=complex)
            if v.shape == np.shape(z):
                return v
        except Exception:
            pass
        return np.array([F(complex(q)) for q in np.ravel(z)], dtype=complex).reshape(np.shape(z))

    return ev


def fatou_integral(
    field_,
    path,
    tol: float = 1e-13,
    pole_clearance: float | None = None,
    max_subdivisions: int = 20000,
) -> complex:
    """Integral of dw/F along a concrete path.

    ``path`` may be a :class:`Path`, a sequence of points (polyline) or a
    :class:`Trajectory`, in which case the interpolant of each step is used.
    """
    F = as_field(field_)
    if isinstance(path, Trajectory):
        if not path.segments:
            return 0j
        return sum((_segment_fatou(F, s) for s in path.segments), 0j)
    if not isinstance(path, Path):
        path = Path.polyline(list(path))
    clearance = 1e-10 if pole_clearance is None else pole_clearance
    for piece in path.pieces:
        for z in F.zeros:
            if _piece_distance(piece, z) < clearance:
                raise PoleTooClose(f"path passes within {clearance:g} of a pole at {z:.6g}")
    Fv = _field_vec(F)
    total = 0j
    for piece in path.pieces:
        budget = [max_subdivisions]

        def fun(u, piece=piece):
            return piece.velocity(u) / Fv(piece.point(u))

        n0 = 16
        acc = 0j
        for k in range(n0):
            a, b = k / n0, (k + 1) / n0
            whole = _gl(fun, a, b)
            acc += _adaptive(fun, a, b, whole, tol * max(1.0, abs(whole)) / n0, 0, budget)
        total += acc
    return total


def winding_number(points: np.ndarray, z: complex) -> float:
    """Winding number of the closed polyline ``points`` around ``z``."""
    p = np.asarray(points, dtype=complex) - z
    if np.any(p == 0):
        raise WindingAmbiguous("curve passes through the point")
    q = np.concatenate([p, p[:1]])
    d = np.angle(q[1:] / q[:-1])
    return float(np.sum(d) / (2 * math.pi))


def enclosed_subset(loop_points: np.ndarray, locations: Sequence[complex]) -> list[int]:
    """Indices of points with winding number 1; other values must be 0."""
    out = []
    for i, z in enumerate(locations):
        wn = winding_number(loop_points, z)
        k = round(wn)
        if abs(wn - k) > 1e-6 or k not in (0, 1):
            raise WindingAmbiguous(f"winding number {wn:.4f} around {z:.6g}")
        if k == 1:
            out.append(i)
    return out


def verify_residue_formula(
    field_,
    crossing: Trajectory,
    kappa: Path,
    residues: Sequence[tuple[complex, complex]],
    E_minus: Sequence[int] | None = None,
    endpoint_tol: float = 1e-8,
) -> complex:
    """Discrepancy of the residue formula for one crossing.

    ``kappa`` runs from the crossing's start to its end.  The singular points
    counted are those around which ``kappa`` followed by the reversed crossing
    winds once; their residues times 2 pi i, plus mu times the elapsed time,
    must equal the Fatou integral along ``kappa``.
    """
    if abs(kappa.start - crossing.start) > endpoint_tol or abs(kappa.end - crossing.end) > endpoint_tol:
        raise ValidationError("kappa must run from the crossing start to the crossing end")
    locs = [complex(z) for z, _ in residues]
    if E_minus is None:
        loop = np.concatenate([kappa.sample(), crossing.dense_points()[::-1]])
        E_minus = enclosed_subset(loop, locs)
    gap = fatou_integral(field_, kappa)
    rsum = sum(residues[i][1] for i in E_minus)
    return gap - 2j * math.pi * rsum - crossing.mu * crossing.total_time
