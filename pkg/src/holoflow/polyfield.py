"""Polynomial vector fields Y = P(w) d/dw of degree at least 2.

Singularities are decorated with residues and linear parts; separatrices are
seeded exactly on the incoming/outgoing trajectories of infinity with the
help of the Fatou coordinate at infinity,

    Psi(w) = integral from infinity to w of dw/P,

which is single valued outside a disk containing the roots because the
residue of dw/P at infinity vanishes.  Along any trajectory of Re(mu Y),
Psi increases by mu times the elapsed time; a point reaches infinity in
finite positive time s exactly when Psi(w) = -mu s.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .algebra import ComplexPoly, roots, residue_of_dual_form, series_inverse
from .errors import InconsistentEnclosure, StepUnderflow, SubsetExplosion, ValidationError
from .flow import (
    CrossRadius,
    CustomEvent,
    EnterSingularBall,
    IntegrationBudget,
    PolyField,
    SectionCross,
    Trajectory,
    integrate,
    winding_number,
)

__all__ = [
    "Singularity",
    "PolyVectorField",
    "analyze",
    "InfinityChart",
    "Separatrix",
    "Homoclinic",
    "SeparatrixDiagram",
    "separatrix_diagram",
    "detect_homoclinics",
    "instability_directions",
    "candidate_directions",
    "SingLimit",
    "InfinityLimit",
    "Periodic",
    "Unresolved",
    "omega_limit",
    "default_radius",
]

TOL_INDIFF = 1e-9
HOMOCLINIC_TOL = 1e-5
MAX_SUBSET_SING = 12


@dataclass(frozen=True)
class Singularity:
    index: int
    location: complex
    multiplicity: int
    residue: complex
    linear_part: complex
    kind: str  # attracting | repelling | indifferent | parabolic


def _kind(mult: int, lin: complex, tol: float) -> str:
    if mult >= 2:
        return "parabolic"
    if lin.real < -tol:
        return "attracting"
    if lin.real > tol:
        return "repelling"
    return "indifferent"


@dataclass(frozen=True)
class PolyVectorField:
    p: ComplexPoly
    singularities: tuple[Singularity, ...]
    nu: int
    tol_indiff: float = TOL_INDIFF

    @property
    def locations(self) -> list[complex]:
        return [s.location for s in self.singularities]

    @property
    def residues(self) -> list[complex]:
        return [s.residue for s in self.singularities]

    def kind_for(self, s: Singularity, mu: complex) -> str:
        return _kind(s.multiplicity, mu * s.linear_part, self.tol_indiff * max(1.0, abs(s.linear_part)))

    def rotated(self, mu: complex) -> "PolyVectorField":
        return analyze(self.p.scale(mu), tol_indiff=self.tol_indiff)


def analyze(
    p: ComplexPoly, tol_cluster: float | None = None, tol_indiff: float = TOL_INDIFF
) -> PolyVectorField:
    """Singularities of P d/dw with residues, linear parts and kinds."""
    if p.degree() < 2:
        raise ValidationError("polynomial vector field must have degree >= 2")
    dp = p.derivative()
    sings = []
    for k, rc in enumerate(roots(p, tol_cluster)):
        res = residue_of_dual_form(p, rc).value
        lin = dp(rc.location) if rc.multiplicity == 1 else 0j
        sings.append(
            Singularity(k, rc.location, rc.multiplicity, res, lin, _kind(rc.multiplicity, lin, tol_indiff * max(1.0, abs(lin))))
        )
    return PolyVectorField(p, tuple(sings), p.degree() - 1, tol_indiff)


def default_radius(Y: PolyVectorField) -> float:
    return 2.0 + 2.0 * max(abs(z) for z in Y.locations)


# --------------------------------------------------------------------------
# the chart at infinity


class InfinityChart:
    """Fatou coordinate of Y at infinity, by power series in z = 1/w."""

    def __init__(self, Y: PolyVectorField, R: float, n_terms: int | None = None):
        self.Y = Y
        self.R = R
        nu = Y.nu
        q = Y.p.reversed().coeffs  # Q(z) = z^(nu+1) P(1/z), Q(0) = lead
        ratio = max(abs(z) for z in Y.locations) / R
        if n_terms is None:
            n_terms = 40 if ratio < 1e-3 else int(min(400, max(40, 40.0 / -math.log10(max(ratio, 1e-12)))))
        inv = series_inverse(list(q), n_terms)
        # Psi(w) = -sum inv_k z^(k+nu) / (k+nu)
        self._c = np.array([-inv[k] / (k + nu) for k in range(n_terms)], dtype=complex)
        self.nu = nu
        self.lead = Y.p.lead

    def psi(self, w: complex) -> complex:
        z = 1.0 / w
        acc = 0j
        for c in self._c[::-1]:
            acc = acc * z + c
        return acc * z**self.nu

    def solve(self, target: complex, guess: complex, tol: float = 1e-15) -> complex:
        """Point near ``guess`` with psi(w) = target (Newton, psi' = 1/P)."""
        w = guess
        for _ in range(60):
            if not abs(w) < 1e6 * self.R:
                # ran away from a guess that belongs to another separatrix
                return complex(math.inf, math.inf)
            step = (self.psi(w) - target) * self.Y.p(w)
            w = w - step
            if abs(step) <= tol * abs(w):
                break
        return w

    def angles(self, mu: complex, orientation: str) -> list[float]:
        """Asymptotic angles: mu*lead*w^nu negative (incoming) or positive (outgoing)."""
        base = cmath.phase(mu * self.lead)
        off = math.pi if orientation == "from_inf" else 0.0
        return sorted(((off - base + 2 * math.pi * k) / self.nu) % (2 * math.pi) for k in range(self.nu))

    def seed(self, mu: complex, orientation: str, theta: float) -> tuple[complex, float]:
        """Point on the separatrix with angle ``theta`` near |w| = R.

        Returns the point and the time separating it from infinity.
        """
        s = 1.0 / (self.nu * abs(self.lead) * self.R**self.nu)
        sign = 1.0 if orientation == "from_inf" else -1.0
        w = self.solve(sign * mu * s, self.R * cmath.exp(1j * theta))
        # time to infinity measured through the chart itself
        s_true = (sign * self.psi(w) / mu).real
        return w, s_true


# --------------------------------------------------------------------------
# certified landing


def _landing_event(Y: PolyVectorField, s: Singularity, mu_eff: complex):
    """Event certifying w -> s.location under w' = mu_eff P(w), or None."""
    t = Y.p.taylor(s.location)
    others = [abs(o.location - s.location) for o in Y.singularities if o.index != s.index]
    rmax = 0.25 * min(others) if others else 1.0
    if s.multiplicity == 1:
        lam = mu_eff * s.linear_part
        if not lam.real < -Y.tol_indiff * max(1.0, abs(lam)):
            return None
        tail = [abs(c) for c in t[2:]]
        target = 0.5 * abs(lam.real) / abs(mu_eff)

        def bound(r: float) -> float:
            return sum(c * r ** (k + 1) for k, c in enumerate(tail))

        r = _largest_radius(bound, target, rmax)
        return EnterSingularBall(s.index, s.location, r, name=f"land:{s.index}")
    nu_z = s.multiplicity - 1
    c = t[s.multiplicity]
    tail = [abs(v / c) for v in t[s.multiplicity + 1 :]]

    def qbound(r: float) -> float:
        return sum(v * r ** (k + 1) for k, v in enumerate(tail))

    r = _largest_radius(qbound, 0.2, rmax)
    z0 = 1.0 / (nu_z * abs(c) * r**nu_z)
    zeta = s.location

    def g(tt: float, w: complex) -> float:
        u = w - zeta
        if u == 0:
            return math.inf
        z = -1.0 / (nu_z * c * u**nu_z)
        return (z / mu_eff).real - z0

    return CustomEvent(f"land:{s.index}", g, sign=1)


def _largest_radius(bound, target: float, rmax: float) -> float:
    if bound(rmax) <= target:
        return rmax
    lo, hi = 0.0, rmax
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bound(mid) <= target:
            lo = mid
        else:
            hi = mid
    return max(lo, 1e-12)


def _landing_events(Y: PolyVectorField, mu_eff: complex):
    evs = []
    for s in Y.singularities:
        e = _landing_event(Y, s, mu_eff)
        if e is not None:
            evs.append(e)
    return evs


# --------------------------------------------------------------------------
# separatrices


@dataclass
class Separatrix:
    index: int
    orientation: str  # 'from_inf' (incoming) | 'to_inf' (outgoing)
    asymptotic_angle: float
    landing: Union[int, str]  # singularity index | 'infinity' | 'unresolved'
    samples: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    seed: complex = 0j
    seed_time: float = 0.0  # time between the seed and infinity
    exit: complex | None = None
    exit_time: float | None = None  # time from the exit point to infinity
    elapsed: float = 0.0


@dataclass(frozen=True)
class Homoclinic:
    incoming: int
    outgoing: int
    enclosed: tuple[int, ...]  # singularities enclosed counterclockwise
    transit_time: float
    predicted_time: complex
    rel_error: float


@dataclass
class SeparatrixDiagram:
    direction: complex
    radius: float
    separatrices: list[Separatrix]
    homoclinics: list[Homoclinic]

    def of_orientation(self, o: str) -> list[Separatrix]:
        return [s for s in self.separatrices if s.orientation == o]

    def to_json(self) -> dict:
        return {
            "direction": [self.direction.real, self.direction.imag],
            "radius": self.radius,
            "separatrices": [
                {
                    "index": s.index,
                    "orientation": s.orientation,
                    "asymptotic_angle": s.asymptotic_angle,
                    "landing": s.landing,
                }
                for s in self.separatrices
            ],
            "homoclinics": [
                {
                    "incoming": h.incoming,
                    "outgoing": h.outgoing,
                    "enclosed": list(h.enclosed),
                    "transit_time": h.transit_time,
                    "predicted_time": [h.predicted_time.real, h.predicted_time.imag],
                    "rel_error": h.rel_error,
                }
                for h in self.homoclinics
            ],
        }


def _default_budget(Y: PolyVectorField) -> IntegrationBudget:
    scale_ = 1.0 + max(abs(r) for r in Y.residues)
    return IntegrationBudget(max_time=400.0 * scale_)


def _follow(
    Y: PolyVectorField,
    chart: InfinityChart,
    mu_eff: complex,
    w0: complex,
    budget: IntegrationBudget,
    extra_events: Sequence = (),
    max_legs: int = 32,
):
    """Integrate until landing, a homoclinic exit or budget exhaustion.

    Non-homoclinic exits through |w| = R are followed in the chart at
    infinity until the trajectory comes back.
    """
    R = chart.R
    land = _landing_events(Y, mu_eff)
    pts = [np.array([w0])]
    tms = [np.array([0.0])]
    t_acc = 0.0
    w = w0
    outside = abs(w0) > R
    for ev in land:
        g = ev.g(0.0, w0)
        if (ev.sign < 0 and g < 0) or (ev.sign > 0 and g > 0):
            return int(ev.name.split(":")[1]), pts[0], tms[0], 0.0, None, None
    for _ in range(max_legs):
        remaining = budget.max_time - t_acc
        if remaining <= 0:
            break
        evs = list(land) + list(extra_events)
        if outside:
            evs.append(CrossRadius(R, "inward", name="reenter"))
        else:
            evs.append(CrossRadius(R, "outward", name="exit"))
        tr = integrate(
            PolyField(Y.p), mu_eff, w, budget.with_time(remaining), evs, chart_radius=R, fatou=False
        )
        pts.append(tr.dense_points(2)[1:])
        tms.append(_dense_times(tr, t_acc))
        t_acc += tr.total_time
        w = tr.end
        if tr.status != "event":
            return "unresolved", np.concatenate(pts), np.concatenate(tms), t_acc, None, tr
        ev = tr.events[-1]
        if ev.kind.startswith("land:"):
            return int(ev.kind.split(":")[1]), np.concatenate(pts), np.concatenate(tms), t_acc, None, tr
        if ev.kind == "exit":
            rem = -chart.psi(w) / mu_eff
            if rem.real > 0 and abs(rem.imag) <= HOMOCLINIC_TOL * abs(rem):
                return "infinity", np.concatenate(pts), np.concatenate(tms), t_acc, rem.real, tr
            outside = True
            continue
        if ev.kind == "reenter":
            outside = False
            continue
        return ev.kind, np.concatenate(pts), np.concatenate(tms), t_acc, None, tr
    return "unresolved", np.concatenate(pts), np.concatenate(tms), t_acc, None, None


def _dense_times(tr: Trajectory, offset: float) -> np.ndarray:
    out = []
    for seg in tr.segments:
        out.append(offset + seg.t0 + 0.5 * seg.h)
        out.append(offset + seg.t0 + seg.h)
    return np.array(out)


def _closing_loop(points: np.ndarray, R: float) -> np.ndarray:
    """Close a curve from far point to far point by a counterclockwise arc."""
    a, b = points[-1], points[0]
    rc = max(abs(a), abs(b), R)
    ta, tb = cmath.phase(a), cmath.phase(b)
    sweep = (tb - ta) % (2 * math.pi)
    arc = rc * np.exp(1j * (ta + sweep * np.linspace(0.0, 1.0, 400)))
    return np.concatenate([points, [rc * a / abs(a)], arc, [b]])


def separatrix_diagram(
    Y: PolyVectorField,
    mu: complex = 1.0,
    R: float | None = None,
    budget: IntegrationBudget | None = None,
) -> SeparatrixDiagram:
    """Separatrix skeleton of Re(mu Y) with landings and homoclinic legs."""
    mu = complex(mu) / abs(mu)
    R = default_radius(Y) if R is None else R
    if R <= 2 * max(abs(z) for z in Y.locations):
        raise ValidationError("R must exceed twice the largest root modulus")
    budget = budget or _default_budget(Y)
    chart = InfinityChart(Y, R)
    entries = []
    for o in ("from_inf", "to_inf"):
        for th in chart.angles(mu, o):
            entries.append((th, o))
    entries.sort()
    seps: list[Separatrix] = []
    for idx, (th, o) in enumerate(entries):
        seed, s_seed = chart.seed(mu, o, th)
        mu_eff = mu if o == "from_inf" else -mu
        try:
            landing, pts, tms, elapsed, rem, _ = _follow(Y, chart, mu_eff, seed, budget)
        except StepUnderflow:
            landing, pts, tms, elapsed, rem = "unresolved", np.array([seed]), np.array([0.0]), 0.0, None
        seps.append(
            Separatrix(
                index=idx,
                orientation=o,
                asymptotic_angle=th,
                landing=landing,
                samples=pts,
                times=tms,
                seed=seed,
                seed_time=s_seed,
                exit=pts[-1] if landing == "infinity" else None,
                exit_time=rem,
                elapsed=elapsed,
            )
        )
    homs = []
    outgoing = [s for s in seps if s.orientation == "to_inf"]
    for s in seps:
        if s.orientation != "from_inf" or s.landing != "infinity":
            continue
        homs.append(_homoclinic_record(Y, chart, mu, s, outgoing))
    return SeparatrixDiagram(mu, R, seps, homs)


def _homoclinic_record(Y, chart, mu, s: Separatrix, outgoing: list[Separatrix]) -> Homoclinic:
    w_e = s.exit
    psi_e = chart.psi(w_e)
    best, best_d = -1, math.inf
    for o in outgoing:
        guess = abs(w_e) * cmath.exp(1j * o.asymptotic_angle)
        cand = chart.solve(psi_e, guess)
        d = abs(cand - w_e)
        if d < best_d:
            best, best_d = o.index, d
    loop = _closing_loop(s.samples, chart.R)
    wn = [winding_number(loop, z) for z in Y.locations]
    ks = [round(v) for v in wn]
    if any(abs(v - k) > 1e-6 for v, k in zip(wn, ks)) or not (
        set(ks) <= {0, 1} or set(ks) <= {0, -1}
    ):
        raise InconsistentEnclosure(f"winding numbers {wn} of homoclinic loop")
    if set(ks) <= {0, 1}:
        enclosed = tuple(i for i, k in enumerate(ks) if k == 1)
    else:
        enclosed = tuple(i for i, k in enumerate(ks) if k == 0)
    pred = 2j * math.pi * sum(Y.singularities[i].residue for i in enclosed) / mu
    transit = s.seed_time + s.elapsed + s.exit_time
    rel = abs(transit - pred) / max(abs(pred), 1e-300)
    return Homoclinic(s.index, best, enclosed, transit, pred, rel)


def detect_homoclinics(
    Y: PolyVectorField,
    mu: complex,
    budget: IntegrationBudget | None = None,
    R: float | None = None,
) -> list[Homoclinic]:
    return separatrix_diagram(Y, mu, R, budget).homoclinics


def candidate_directions(Y: PolyVectorField, tol: float = 1e-12) -> list[complex]:
    """Unit mu making (1/mu) 2 pi i sum_E Res positive for some subset E."""
    n = len(Y.singularities)
    if n > MAX_SUBSET_SING:
        raise SubsetExplosion(f"{n} singular points exceed the subset limit {MAX_SUBSET_SING}")
    res = Y.residues
    scale_ = max(1.0, max(abs(r) for r in res))
    out: list[complex] = []
    for k in range(1, n + 1):
        for sub in itertools.combinations(range(n), k):
            s = sum(res[i] for i in sub)
            if abs(s) <= tol * scale_:
                continue
            mu = 1j * s / abs(s)
            if all(abs(mu - m) > 1e-9 for m in out):
                out.append(mu)
    out.sort(key=lambda m: cmath.phase(m) % (2 * math.pi))
    return out


def instability_directions(
    Y: PolyVectorField, budget: IntegrationBudget | None = None
) -> list[complex]:
    """Directions mu for which Re(mu Y) has a homoclinic trajectory."""
    confirmed = []
    for mu in candidate_directions(Y):
        if detect_homoclinics(Y, mu, budget):
            confirmed.append(mu)
    return confirmed


# --------------------------------------------------------------------------
# omega limits


@dataclass(frozen=True)
class SingLimit:
    index: int
    location: complex


@dataclass(frozen=True)
class InfinityLimit:
    time: float


@dataclass(frozen=True)
class Periodic:
    period: float


@dataclass(frozen=True)
class Unresolved:
    reason: str


def omega_limit(
    Y: PolyVectorField,
    mu: complex,
    w0: complex,
    budget: IntegrationBudget | None = None,
    R: float | None = None,
    return_tol: float = 1e-8,
):
    """Forward limit of the trajectory of Re(mu Y) through ``w0``."""
    mu = complex(mu) / abs(mu)
    if any(abs(w0 - z) == 0 for z in Y.locations):
        raise ValidationError("w0 is a singular point")
    budget = budget or _default_budget(Y)
    R = default_radius(Y) if R is None else max(R, abs(w0) * 1.01)
    chart = InfinityChart(Y, R)
    v0 = mu * Y.p(w0)
    t_acc = 0.0
    w = w0
    for _ in range(64):
        rem_t = budget.max_time - t_acc
        if rem_t <= 0:
            break
        section = SectionCross(0, w0, v0, min_time=max(1e-9, 1e-6 / max(abs(v0), 1e-300)) if t_acc == 0 else 0.0)
        try:
            landing, pts, tms, el, rem, tr = _follow(
                Y, chart, mu, w, budget.with_time(rem_t), extra_events=[section], max_legs=8
            )
        except StepUnderflow as exc:
            return Unresolved(str(exc))
        t_acc += el
        if isinstance(landing, int):
            s = Y.singularities[landing]
            return SingLimit(s.index, s.location)
        if landing == "infinity":
            return InfinityLimit(t_acc + rem)
        if landing == "section":
            w = pts[-1]
            if abs(w - w0) < return_tol:
                return Periodic(t_acc)
            continue
        return Unresolved(str(landing))
    return Unresolved("budget")
