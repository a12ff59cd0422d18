"""A non-holomorphic conjugacy between two parabolic unfoldings.

The fields are

    X = (y**2 - x) / (1 + a y) d/dy,    Y = (y**2 - x) / (1 + b y) d/dy.

Both have the fixed curve y**2 = x and residues (+-1/sqrt(x) + a)/2 (resp. b)
at y = +-sqrt(x).  Given an R-linear map h(z) = s0 z + s1 conj(z) with h(1) = 1
and h(2 pi i a) = 2 pi i b, the reparametrization tau(x) is chosen so that h
also carries 2 pi i times the X-residues at +-sqrt(x) to the Y-residues at
+-sqrt(tau(x)).  After relocating Y to the parameter tau(x) by y -> k(x) y with
k = sqrt(tau)/sqrt(x), the two Fatou coordinates are interpolated,

    Psi_s = (1 - s) h(psi_X) + s psi_Y(tau, k y),

and the flow of Z = d/ds + v d/dy with Z(Psi) = 0 from s = 0 to 1 gives a
homeomorphism sigma with psi_Y o sigma = h o psi_X.  It conjugates Re(X) and
Re(Y) but is not holomorphic on x = 0 when s1 != 0.

rho = h(psi_X) - psi_Y(tau, k y) is single valued away from the fixed curve:
the monodromies of the two terms cancel because the residues match.  Its y
dependence is the explicit function rho_tilde below, and the remaining
x-dependent constant is fixed by the base point y0.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateBasis,
    NearFixedCurve,
    PathBlowup,
    ValidationError,
)
from .flow import (
    Arc,
    CallableField,
    CrossRadius,
    IntegrationBudget,
    Line,
    Path,
    fatou_integral,
    integrate,
    integrate_nonautonomous,
)

__all__ = [
    "RealLinearMap",
    "build_h",
    "TauMap",
    "tau",
    "sqrt_branch",
    "ConjugacyProblem",
    "residues_X",
    "residues_Y",
    "residue_match_check",
    "residue_transport",
    "PathMethodTerms",
    "path_method_terms",
    "path_method_field",
    "rho",
    "rho_tilde",
    "detour_path",
    "kappa_lower_bound",
    "denominator_bound",
    "remainder_growth",
    "tube_maxima",
    "Sigma",
    "build_sigma",
    "sigma_at_zero",
    "ConjugacyReport",
    "verify_conjugacy",
]

CUT_ARG = math.pi - 1e-3


@dataclass(frozen=True)
class RealLinearMap:
    """z -> s0 z + s1 conj(z), normalized by h(1) = 1."""

    s0: complex
    s1: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "s0", complex(self.s0))
        object.__setattr__(self, "s1", complex(self.s1))
        if abs(self.s0 + self.s1 - 1) > 1e-12:
            raise ValidationError(
                f"h(1) = {self.s0 + self.s1:.6g}, expected 1 (s0 + s1 must equal 1)"
            )
        if abs(abs(self.s0) - abs(self.s1)) < 1e-14:
            raise DegenerateBasis("|s0| = |s1|: h is not invertible")

    def __call__(self, z):
        return self.s0 * z + self.s1 * np.conj(z)

    @property
    def orientation_preserving(self) -> bool:
        return abs(self.s0) > abs(self.s1)

    @property
    def jacobian(self) -> float:
        return abs(self.s0) ** 2 - abs(self.s1) ** 2

    def conjugated(self) -> "RealLinearMap":
        """conj o h, which has the opposite orientation."""
        return RealLinearMap(self.s1.conjugate(), self.s0.conjugate())

    def inverse_apply(self, w: complex) -> complex:
        det = self.jacobian
        return (self.s0.conjugate() * w - self.s1 * np.conj(w)) / det

    def to_json(self) -> dict:
        return {
            "s0": [self.s0.real, self.s0.imag],
            "s1": [self.s1.real, self.s1.imag],
            "orientation_preserving": self.orientation_preserving,
        }


IDENTITY = RealLinearMap(1.0, 0.0)


def build_h(a: complex, b: complex, h: RealLinearMap | None = None) -> RealLinearMap:
    """The R-linear map with h(1) = 1 and h(2 pi i a) = 2 pi i b.

    When a is purely imaginary 2 pi i a is real, so b = a is forced and any
    normalized h works; pass it as ``h`` (default identity).
    """
    a, b = complex(a), complex(b)
    if abs(a.real) <= 1e-14 * max(1.0, abs(a)):
        if abs(b - a) > 1e-12 * max(1.0, abs(a)):
            raise DegenerateBasis(
                f"a = {a:.6g} is purely imaginary, so h(2 pi i a) = 2 pi i a and b must equal a"
            )
        return IDENTITY if h is None else h
    # s0 + s1 = 1 and s0 A + s1 conj(A) = B with A = 2 pi i a, B = 2 pi i b
    s0 = (b + a.conjugate()) / (2 * a.real)
    out = RealLinearMap(s0, 1 - s0)
    if h is not None and (abs(h.s0 - out.s0) > 1e-12 or abs(h.s1 - out.s1) > 1e-12):
        raise ValidationError("the given h does not satisfy h(2 pi i a) = 2 pi i b")
    return out


def sqrt_branch(x: complex) -> complex:
    """sqrt(x) with the cut along arg x = CUT_ARG, principal on the positive axis."""
    x = complex(x)
    if x == 0:
        return 0j
    th = cmath.phase(x)
    if th > CUT_ARG:
        th -= 2 * math.pi
    return math.sqrt(abs(x)) * cmath.exp(0.5j * th)


@dataclass(frozen=True)
class TauMap:
    h: RealLinearMap

    def ratio(self, x: complex) -> complex:
        """sqrt(x)/sqrt(tau(x)) = s0 - s1 x/|x|; independent of the branch."""
        x = complex(x)
        if x == 0:
            raise ValidationError("tau is defined on a punctured neighbourhood of 0")
        return self.h.s0 - self.h.s1 * x / abs(x)

    def kappa(self, x: complex) -> complex:
        """sqrt(tau(x))/sqrt(x)."""
        return 1.0 / self.ratio(x)

    def __call__(self, x: complex) -> complex:
        return complex(x) / self.ratio(x) ** 2

    def sqrt(self, x: complex, sqrt_x: complex | None = None) -> complex:
        """sqrt(tau(x)) on the branch induced by ``sqrt_x``."""
        sx = sqrt_branch(x) if sqrt_x is None else complex(sqrt_x)
        return sx * self.kappa(x)

    def inverse(self, xp: complex) -> complex:
        xp = complex(xp)
        if xp == 0:
            raise ValidationError("tau is defined on a punctured neighbourhood of 0")
        s0, s1 = self.h.s0, self.h.s1
        q = s1 / s0

        # arg tau(r e^{it}) = G(t) - 2 arg s0, G monotone with G(t + 2 pi) = G(t) + 2 pi
        def G(t):
            return t - 2 * cmath.phase(1 - q * cmath.exp(1j * t))

        lo = G(-math.pi)
        target = cmath.phase(xp) + 2 * cmath.phase(s0)
        target = lo + (target - lo) % (2 * math.pi)
        if target - lo < 1e-15:
            t = -math.pi
        else:
            t = brentq(lambda t: G(t) - target, -math.pi, math.pi, xtol=1e-15)
        e = cmath.exp(1j * t)
        r = abs(xp) * abs(s0 - s1 * e) ** 2
        return r * e


def tau(h: RealLinearMap, x: complex) -> complex:
    return TauMap(h)(x)


@dataclass(frozen=True)
class ConjugacyProblem:
    a: complex
    b: complex
    h: RealLinearMap
    y0: complex | None = None
    radius: float | None = None
    clearance: float = 1e-12

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        if self.radius is None:
            # keep the poles y = -1/a, -1/b of X and Y outside the working disk
            r = 0.9 * min(1.0, 1 / max(abs(self.a), 1e-300), 1 / max(abs(self.b), 1e-300))
            object.__setattr__(self, "radius", r)
        y0 = min(0.3, self.radius / 1.5) if self.y0 is None else self.y0
        object.__setattr__(self, "y0", complex(y0))
        lhs = self.h(2j * math.pi * self.a)
        rhs = 2j * math.pi * self.b
        if abs(lhs - rhs) > 1e-12 * max(1.0, abs(rhs)):
            raise ValidationError(f"h(2 pi i a) = {lhs:.12g} differs from 2 pi i b = {rhs:.12g}")
        if self.y0 == 0 or abs(self.y0) >= self.radius:
            raise ValidationError("the base point must satisfy 0 < |y0| < radius")

    @classmethod
    def from_ab(cls, a: complex, b: complex, **kw) -> "ConjugacyProblem":
        return cls(a, b, build_h(a, b, kw.pop("h", None)), **kw)

    @classmethod
    def from_h(cls, a: complex, h: RealLinearMap, **kw) -> "ConjugacyProblem":
        b = h(2j * math.pi * complex(a)) / (2j * math.pi)
        return cls(a, b, h, **kw)

    @property
    def tau(self) -> TauMap:
        return TauMap(self.h)

    @property
    def orientation_preserving(self) -> bool:
        return self.h.orientation_preserving

    def X(self, x: complex, y):
        return (y * y - x) / (1 + self.a * y)

    def Y(self, x: complex, y):
        return (y * y - x) / (1 + self.b * y)

    def to_json(self) -> dict:
        return {
            "a": [self.a.real, self.a.imag],
            "b": [self.b.real, self.b.imag],
            "h": self.h.to_json(),
            "y0": [self.y0.real, self.y0.imag],
            "radius": self.radius,
            "clearance": self.clearance,
        }


# --------------------------------------------------------------------------
# residues


def residues_X(a: complex, x: complex, sqrt_x: complex | None = None) -> tuple[complex, complex]:
    """Residues of (y**2 - x)/(1 + a y) d/dy at +sqrt(x) and -sqrt(x)."""
    sx = sqrt_branch(x) if sqrt_x is None else complex(sqrt_x)
    return 0.5 * (1 / sx + a), 0.5 * (-1 / sx + a)


residues_Y = residues_X


def _contour_residue(coef: complex, x: complex, p: complex, r: float) -> complex:
    field_ = CallableField(lambda y: (y * y - x) / (1 + coef * y))
    return fatou_integral(field_, Path.circle(p, r)) / (2j * math.pi)


def residue_match_check(problem: ConjugacyProblem, x_samples: Sequence[complex]) -> float:
    """Max discrepancy of h(2 pi i Res_X) against 2 pi i Res_Y at corresponding points.

    Residues are evaluated twice, from the closed form and from circle
    integrals, and the worst of all four comparisons is returned.  For an
    orientation-reversing h, conj o h is orientation preserving and matches X
    with Y' (b' = -conj(b)); the check is then h(2 pi i Res_X) =
    conj(2 pi i Res_Y') = -2 pi i conj(Res_Y').
    """
    h = problem.h
    reverse = not h.orientation_preserving
    hp = h.conjugated() if reverse else h
    bp = -problem.b.conjugate() if reverse else problem.b
    T = TauMap(hp)
    worst = 0.0
    for x in x_samples:
        x = complex(x)
        sx = sqrt_branch(x)
        st = T.sqrt(x, sx)
        tx = st * st
        rx = residues_X(problem.a, x, sx)
        ry = residues_Y(bp, tx, st)
        r = 0.25 * min(abs(sx), abs(1 / problem.a) if problem.a else math.inf)
        rt = 0.25 * min(abs(st), abs(1 / bp) if bp else math.inf)
        cx = (
            _contour_residue(problem.a, x, sx, r),
            _contour_residue(problem.a, x, -sx, r),
        )
        cy = (
            _contour_residue(bp, tx, st, rt),
            _contour_residue(bp, tx, -st, rt),
        )
        for lx, ly in ((rx, ry), (cx, cy)):
            for j in range(2):
                lhs = h(2j * math.pi * lx[j])
                rhs = 2j * math.pi * ly[j]
                if reverse:
                    rhs = rhs.conjugate()
                worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst


def residue_transport(problem: ConjugacyProblem) -> dict:
    """Residue of the x = 0 fields at the origin and its image under h.

    Res(y**2/(1 + a y) d/dy, 0) = a, the sum of the two residues above.
    """
    lhs = problem.h(2j * math.pi * problem.a)
    rhs = 2j * math.pi * problem.b
    half = problem.h(1j * math.pi * problem.a) - 1j * math.pi * problem.b
    return {"res_X": problem.a, "res_Y": problem.b, "full": abs(lhs - rhs), "half": abs(half)}


# --------------------------------------------------------------------------
# the path-method field


def _r_pm(problem: ConjugacyProblem, x: complex, sx: complex) -> tuple[complex, complex]:
    ratio = problem.tau.ratio(x)
    c = 0.5 * (problem.h.s0 * problem.a - problem.b)
    d = (problem.h.s0 - ratio) / (2 * sx)
    return d + c, -d + c


def rho_tilde(problem: ConjugacyProblem, x: complex, y):
    """R+ ln|y - sqrt(x)|^2 + R- ln|y + sqrt(x)|^2, which carries the y dependence of rho."""
    sx = sqrt_branch(x)
    rp, rm = _r_pm(problem, x, sx)
    return rp * np.log(np.abs(y - sx) ** 2) + rm * np.log(np.abs(y + sx) ** 2)


def _log_ratio_terms(coef: complex, x: complex, sx: complex, start: complex, end: complex):
    """Integral of (1 + coef e)/(e**2 - x) de along the segment start -> end."""
    rp, rm = residues_X(coef, x, sx)
    return rp * cmath.log((end - sx) / (start - sx)) + rm * cmath.log((end + sx) / (start + sx))


def _base_offset(problem: ConjugacyProblem, x: complex) -> complex:
    """rho(x, y0) = -psi_Y(tau(x), k y0), integrated along the segment y0 -> k y0."""
    k = problem.tau.kappa(x)
    sx = sqrt_branch(x)
    st = k * sx
    y0 = problem.y0
    return -_log_ratio_terms(problem.b, st * st, st, y0, k * y0)


def remainder(problem: ConjugacyProblem, x: complex) -> complex:
    """rho - rho_tilde, a function of x alone."""
    return _base_offset(problem, x) - complex(rho_tilde(problem, x, problem.y0))


def detour_path(a: complex, b: complex, poles: Sequence[complex], radius: float) -> Path:
    """Segment a -> b with a semicircle, on the left of travel, around each pole within ``radius``."""
    a, b = complex(a), complex(b)
    d = b - a
    if d == 0:
        return Path((Line(a, b),))
    L = abs(d)
    dh = d / L
    n = 1j * dh
    hits = []
    for p in poles:
        u = ((p - a) * dh.conjugate()).real
        foot = a + u * dh
        dist = abs(p - foot)
        if dist < radius and radius < u < L - radius:
            half = math.sqrt(radius * radius - dist * dist)
            hits.append((u - half, u + half, p))
    hits.sort(key=lambda t: t[0])
    pieces = []
    cur = a
    for u1, u2, p in hits:
        q1, q2 = a + u1 * dh, a + u2 * dh
        if ((q1 - cur) * dh.conjugate()).real < 0:
            raise ValidationError("detour circles overlap; shrink the detour radius")
        pieces.append(Line(cur, q1))
        base = cmath.phase(n)
        t1 = cmath.phase((q1 - p) / n)
        t2 = cmath.phase((q2 - p) / n)
        pieces.append(Arc(p, radius, base + t1, base + t2))
        cur = q2
    pieces.append(Line(cur, b))
    return Path(tuple(pieces))


def _detoured(problem: ConjugacyProblem, x: complex, start: complex, end: complex) -> Path:
    sx = sqrt_branch(x)
    ends = min(abs(start - sx), abs(start + sx), abs(end - sx), abs(end + sx))
    return detour_path(start, end, (sx, -sx), min(0.5 * abs(sx), 0.5 * ends))


def _scaled(path: Path, k: complex) -> Path:
    """Image of a path under y -> k y."""
    out = []
    for p in path.pieces:
        if isinstance(p, Line):
            out.append(Line(k * p.a, k * p.b))
        else:
            t = cmath.phase(k)
            out.append(Arc(k * p.center, abs(k) * p.radius, p.theta0 + t, p.theta1 + t))
    return Path(tuple(out))


def rho(problem: ConjugacyProblem, x: complex, y: complex, method: str = "closed") -> complex:
    """h(psi_X) - psi_Y(tau, k y), normalized at y0.

    ``closed`` uses rho_tilde plus the base offset.  ``path`` integrates both
    Fatou coordinates along the detoured segment y0 -> y; the Y integral runs
    over the image of that path under y -> k y.
    """
    x, y = complex(x), complex(y)
    if method == "closed":
        return complex(rho_tilde(problem, x, y)) + remainder(problem, x)
    if method != "path":
        raise ValidationError(f"unknown rho method {method!r}")
    sx = sqrt_branch(x)
    k = problem.tau.kappa(x)
    path = _detoured(problem, x, problem.y0, y)
    fx = CallableField(lambda e: problem.X(x, e), zeros=(sx, -sx))
    # integrand of the relocated Y: (1/k)(1 + b k e)/(e**2 - x)
    fy = CallableField(lambda e: k * (e * e - x) / (1 + problem.b * k * e), zeros=(sx, -sx))
    ix = fatou_integral(fx, path, pole_clearance=0.0)
    iy = fatou_integral(fy, path, pole_clearance=0.0)
    st = k * sx
    ty = CallableField(lambda e: problem.Y(st * st, e), zeros=(st, -st))
    base = fatou_integral(ty, [problem.y0, k * problem.y0], pole_clearance=0.0)
    return complex(problem.h(ix)) - iy - base


@dataclass(frozen=True)
class PathMethodTerms:
    c1: float
    c2: float
    rho: complex
    rho_tilde: complex
    remainder: complex
    d_y: complex
    d_ybar: complex
    D: float


def _scaled_derivs(problem: ConjugacyProblem, s: float, ratio: complex, y):
    """(y**2 - x) dPsi/dy and conj(y**2 - x) dPsi/dybar."""
    inv_ratio = 1.0 / ratio
    A = (1 - s) * problem.h.s0 * (1 + problem.a * y) + s * ratio * (1 + problem.b * inv_ratio * y)
    B = (1 - s) * problem.h.s1 * np.conj(1 + problem.a * y)
    return A, B


def path_method_terms(problem: ConjugacyProblem, s: float, x: complex, y: complex, method: str = "closed") -> PathMethodTerms:
    x, y = complex(x), complex(y)
    g = y * y - x
    if abs(g) < problem.clearance:
        raise NearFixedCurve(f"|y^2 - x| = {abs(g):.3e} below clearance at y={y:.6g}")
    ratio = problem.tau.ratio(x)
    A, B = _scaled_derivs(problem, s, ratio, y)
    den = abs(A) ** 2 - abs(B) ** 2
    r = rho(problem, x, y, method)
    # solve dPsi/dy v + dPsi/dybar conj(v) = rho for v = c1 + i c2
    v = g * (r * A.conjugate() - r.conjugate() * B) / den
    rt = complex(rho_tilde(problem, x, y))
    return PathMethodTerms(
        c1=v.real,
        c2=v.imag,
        rho=r,
        rho_tilde=rt,
        remainder=r - rt,
        d_y=A / g,
        d_ybar=B / g.conjugate(),
        D=den / abs(g) ** 2,
    )


def path_method_field(problem: ConjugacyProblem, s: float, x: complex, y: complex) -> tuple[float, float]:
    t = path_method_terms(problem, s, x, y)
    return t.c1, t.c2


def _velocity(problem: ConjugacyProblem, x: complex):
    """Fast v(s, y) for fixed x; zero on the clearance tube."""
    sx = sqrt_branch(x)
    rp, rm = _r_pm(problem, x, sx)
    off = remainder(problem, x)
    ratio = problem.tau.ratio(x)
    s0, s1, a, b = problem.h.s0, problem.h.s1, problem.a, problem.b
    binv = b / ratio
    clearance = problem.clearance

    def v(s, y):
        g = y * y - x
        if abs(g) < clearance:
            return 0j
        r = rp * math.log(abs(y - sx) ** 2) + rm * math.log(abs(y + sx) ** 2) + off
        ay = 1 + a * y
        A = (1 - s) * s0 * ay + s * ratio * (1 + binv * y)
        B = (1 - s) * s1 * ay.conjugate()
        return g * (r * A.conjugate() - r.conjugate() * B) / (abs(A) ** 2 - abs(B) ** 2)

    return v


# --------------------------------------------------------------------------
# bounds on the construction


def kappa_lower_bound(problem: ConjugacyProblem, x_samples: Sequence[complex], n_s: int = 101) -> float:
    """min over s and x of |(1 - s) s0 + s sqrt(x)/sqrt(tau(x))|; at least |s0| - |s1|."""
    worst = math.inf
    for x in x_samples:
        ratio = problem.tau.ratio(x)
        for s in np.linspace(0.0, 1.0, n_s):
            worst = min(worst, abs((1 - s) * problem.h.s0 + s * ratio))
    return worst


def denominator_bound(
    problem: ConjugacyProblem,
    x_samples: Sequence[complex],
    y_radius: float = 0.02,
    n_y: int = 9,
    n_s: int = 11,
) -> float:
    """min of D |y^2 - x|^2 over a grid of (s, x, y) with |y| <= y_radius."""
    grid = np.linspace(-y_radius, y_radius, n_y)
    ys = (grid[:, None] + 1j * grid[None, :]).ravel()
    ys = ys[np.abs(ys) <= y_radius * (1 + 1e-12)]
    worst = math.inf
    for x in x_samples:
        ratio = problem.tau.ratio(x)
        for s in np.linspace(0.0, 1.0, n_s):
            A, B = _scaled_derivs(problem, s, ratio, ys)
            worst = min(worst, float(np.min(np.abs(A) ** 2 - np.abs(B) ** 2)))
    return worst


def remainder_growth(
    problem: ConjugacyProblem,
    x0: float = 0.01,
    n_rays: int = 16,
    levels: int = 8,
) -> tuple[list[float], list[float]]:
    """sup of |rho - rho_tilde| over rays at |x| = x0 2^-j, and the ratios between levels."""
    sups = []
    for j in range(levels):
        r = x0 * 2.0**-j
        vals = []
        for i in range(n_rays):
            th = -math.pi + 2 * math.pi * (i + 0.5) / n_rays
            vals.append(abs(remainder(problem, r * cmath.exp(1j * th))))
        # round-off level values carry no growth information
        sups.append(max(vals) if max(vals) > 1e-12 else 0.0)
    ratios = [_ratio(sups[j + 1], sups[j]) for j in range(levels - 1)]
    return sups, ratios


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 0.0 if num == 0 else math.inf


def tube_maxima(
    problem: ConjugacyProblem,
    radii: Sequence[float],
    x_samples: Sequence[complex],
    n_theta: int = 64,
) -> list[float]:
    """sup of |rho (y^2 - x)| on the tubes |y^2 - x| = r, one value per radius."""
    out = []
    for r in radii:
        best = 0.0
        for x in x_samples:
            for th in np.linspace(0, 2 * math.pi, n_theta, endpoint=False):
                g = r * cmath.exp(1j * th)
                sy = cmath.sqrt(x + g)
                for y in (sy, -sy):
                    best = max(best, abs(rho(problem, x, y) * g))
        out.append(best)
    return out


# --------------------------------------------------------------------------
# sigma


@dataclass
class Sigma:
    """sigma(x, y) = (tau(x), k(x) y(1)), y(s) the Z trajectory started at y."""

    problem: ConjugacyProblem
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    tube_mapped: list = field(default_factory=list)

    def _guarded(self, x: complex):
        P = self.problem
        ratio = P.tau.ratio(x)
        # y(s) ends at k^-1 times a point of the disk; D > 0 is what keeps Z defined
        bound = P.radius / min(1.0, abs(1 / ratio))

        def guard(s, y):
            if not abs(y) < bound:
                raise PathBlowup(f"|y| = {abs(y):.4g} left the working disk at s = {s:.4g}")
            A, B = _scaled_derivs(P, s, ratio, y)
            if not abs(A) ** 2 - abs(B) ** 2 > 0:
                raise PathBlowup(f"D vanishes at y = {y:.4g}, s = {s:.4g}")

        return guard

    def flat_path(self, x: complex, y: complex, reverse: bool = False):
        x, y = complex(x), complex(y)
        if abs(y * y - x) < self.problem.clearance:
            self.tube_mapped.append((x, y))
        v = _velocity(self.problem, x)
        s0, s1 = (1.0, 0.0) if reverse else (0.0, 1.0)
        return integrate_nonautonomous(
            v, y, s0, s1, rel_tol=self.rel_tol, abs_tol=self.abs_tol, guard=self._guarded(x)
        )

    def flat(self, x: complex, y: complex) -> complex:
        return self.flat_path(x, y)[0]

    def __call__(self, x: complex, y: complex) -> tuple[complex, complex]:
        T = self.problem.tau
        return T(x), T.kappa(x) * self.flat(x, y)

    def inverse(self, xp: complex, w: complex) -> tuple[complex, complex]:
        T = self.problem.tau
        x = T.inverse(xp)
        y1 = complex(w) / T.kappa(x)
        return x, self.flat_path(x, y1, reverse=True)[0]

    def fatou_check(self, x: complex, y: complex) -> float:
        """|h(psi_X(x, y)) - psi_Y(sigma(x, y))| with both sides by quadrature.

        psi_Y is integrated from y0 through k y0, then along the image of the
        X path and of the Z trajectory, the route that defines its branch.
        """
        P = self.problem
        x, y = complex(x), complex(y)
        sx = sqrt_branch(x)
        k = P.tau.kappa(x)
        st = k * sx
        w1, _, ys = self.flat_path(x, y)
        fx = CallableField(lambda e: P.X(x, e), zeros=(sx, -sx))
        fy = CallableField(lambda e: P.Y(st * st, e), zeros=(st, -st))
        px = _detoured(P, x, P.y0, y)
        psi_x = fatou_integral(fx, px, pole_clearance=0.0)
        route = Path((Line(P.y0, k * P.y0),)) + _scaled(px, k)
        for q0, q1 in zip(ys[:-1], ys[1:]):
            route = route + _scaled(_detoured(P, x, q0, q1), k)
        psi_y = fatou_integral(fy, route, pole_clearance=0.0)
        return abs(complex(P.h(psi_x)) - psi_y)


def build_sigma(problem: ConjugacyProblem, rel_tol: float = 1e-12, abs_tol: float = 1e-14) -> Sigma:
    if not problem.orientation_preserving:
        raise ValidationError("the path method needs an orientation-preserving h")
    return Sigma(problem, rel_tol, abs_tol)


def sigma_at_zero(problem: ConjugacyProblem, y: complex, steps: int = 64) -> complex:
    """sigma on x = 0, solving psi_Y(0, w) = h(psi_X(0, y)) by continuation from y0.

    At x = 0 the Fatou coordinates are 1/y0 - 1/y + c log(y/y0); the logarithms
    are continued along the segment y0 -> y and along the Newton iterates.
    """
    P = problem
    y = complex(y)
    y0 = P.y0
    w, lw = y0, 0j
    yp, ly = y0, 0j
    for j in range(1, steps + 1):
        yj = y0 + (y - y0) * j / steps
        ly += cmath.log(yj / yp)
        yp = yj
        target = complex(P.h((1 / y0 - 1 / yj) + P.a * ly))
        for _ in range(50):
            val = (1 / y0 - 1 / w) + P.b * lw - target
            step = val * w * w / (1 + P.b * w)
            wn = w - step
            lw += cmath.log(wn / w)
            w = wn
            if abs(step) < 1e-15 * max(1.0, abs(w)):
                break
    return w


@dataclass
class ConjugacyReport:
    problem: ConjugacyProblem
    residue_match: float
    kappa_bound: float
    kappa_floor: float
    denominator_min: float
    denominator_floor: float
    remainder_sups: list
    remainder_ratios: list
    tube_radii: list
    tube_maxima: list
    transport_gap: float
    transport_rows: list
    transport_skipped: int
    fatou_gap: float
    base_point_gap: float
    affinity_gap: float
    nonholomorphy: float
    nonholomorphy_expected: float
    antiholomorphy: float
    tube_mapped: int
    largest_verified_radius: float
    settings: dict

    def checks(self) -> dict:
        tubes = self.tube_maxima
        if abs(self.problem.h.s1) > 0:
            witness = self.nonholomorphy > 0.1 * self.nonholomorphy_expected
        else:
            witness = self.nonholomorphy < 1e-6
        return {
            "residue_match": bool(self.residue_match < 1e-10),
            "denominator_bound": bool(
                self.kappa_bound >= self.kappa_floor - 1e-9
                and self.denominator_min >= self.denominator_floor
            ),
            "remainder_bounded": bool(max(self.remainder_ratios) < 1.1),
            "fixed_curve_vanishing": bool(
                all(b < a or a == 0 for a, b in zip(tubes, tubes[1:]))
            ),
            "transport": bool(self.transport_gap < 1e-5),
            "base_point": bool(self.base_point_gap < 1e-6),
            "fatou_relation": bool(self.fatou_gap < 1e-6),
            "affinity": bool(self.affinity_gap < 1e-6),
            "holomorphy_witness": bool(witness),
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def csv_rows(self) -> list[tuple]:
        """Transported pairs: start, time, sigma(flow_X) and flow_Y(sigma)."""
        return [
            (r[0].real, r[0].imag, r[1].real, r[1].imag, r[2], r[4].real, r[4].imag, r[5].real, r[5].imag, r[3])
            for r in self.transport_rows
        ]

    def to_json(self) -> dict:
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "problem": self.problem.to_json(),
            "settings": self.settings,
            "checks": self.checks(),
            "passed": self.passed,
            "residue_match": self.residue_match,
            "kappa_bound": self.kappa_bound,
            "kappa_floor": self.kappa_floor,
            "denominator_min": self.denominator_min,
            "denominator_floor": self.denominator_floor,
            "remainder_sups": self.remainder_sups,
            "remainder_ratios": self.remainder_ratios,
            "tube_radii": self.tube_radii,
            "tube_maxima": self.tube_maxima,
            "transport_gap": self.transport_gap,
            "transport_skipped": self.transport_skipped,
            "fatou_gap": self.fatou_gap,
            "base_point_gap": self.base_point_gap,
            "affinity_gap": self.affinity_gap,
            "nonholomorphy": self.nonholomorphy,
            "nonholomorphy_expected": self.nonholomorphy_expected,
            "antiholomorphy": self.antiholomorphy,
            "tube_mapped": self.tube_mapped,
            "largest_verified_radius": self.largest_verified_radius,
            "transport_rows": [
                {"x": c(r[0]), "y": c(r[1]), "t": r[2], "gap": r[3], "sigma_of_flow": c(r[4]), "flow_of_sigma": c(r[5])}
                for r in self.transport_rows
            ],
        }


# starts chosen through 1/y so that y' ~ y**2 keeps |y| moderate up to t = 2
DEFAULT_STARTS = tuple(
    (x, 1 / iy)
    for x, iy in (
        (0.04, -2.5),
        (0.01j, -3j),
        (-0.02, 3j),
        (0.03 + 0.03j, -2 + 2j),
        (-0.01 - 0.02j, -2 - 2j),
        (0.005, 4.5 + 1j),
        (0.02, 5.0),
        (0.05j, -3 + 1j),
        (-0.03, 1 + 3j),
        (0.01 - 0.01j, -1 - 3j),
    )
)


def _flow_to(problem: ConjugacyProblem, which: str, x: complex, y: complex, t: complex, budget: IntegrationBudget) -> complex | None:
    """exp(t F)(y) for F = X or Y at parameter x; None if the orbit leaves the working disk."""
    F = problem.X if which == "X" else problem.Y
    field_ = CallableField(lambda e: F(x, e))
    mu = t / abs(t)
    leave = CrossRadius(problem.radius, name="leave")
    tr = integrate(field_, mu, y, budget.with_time(abs(t)), events=(leave,), fatou=False)
    if tr.status == "event":
        return None
    if tr.status != "time":
        raise PathBlowup(f"flow of Re({which}) stopped with status {tr.status}")
    return tr.end


def _wirtinger(f, y: complex, hstep: float) -> tuple[complex, complex]:
    d1 = (f(y + hstep) - f(y - hstep)) / (2 * hstep)
    d2 = (f(y + 1j * hstep) - f(y - 1j * hstep)) / (2 * hstep)
    return 0.5 * (d1 - 1j * d2), 0.5 * (d1 + 1j * d2)


def verify_conjugacy(
    problem: ConjugacyProblem,
    sigma: Sigma | None = None,
    starts: Sequence[tuple[complex, complex]] = DEFAULT_STARTS,
    times: Sequence[float] = (0.5, 1.0, 2.0),
    budget: IntegrationBudget | None = None,
    tube_radii: Sequence[float] = (1e-3, 5e-4, 2.5e-4),
    petal_points: Sequence[complex] = (0.2, 0.15 + 0.1j, -0.2j),
    z_grid: Sequence[complex] = (0.5, 1.0, 0.5j, -0.5j, 1 + 0.3j),
    witness_y: complex | None = None,
) -> ConjugacyReport:
    P = problem
    sigma = sigma or build_sigma(P)
    budget = budget or IntegrationBudget(rel_tol=1e-12, abs_tol=1e-14)
    xs = [x for x, _ in starts] + [1e-4 * cmath.exp(1j * t) for t in np.linspace(-3, 3, 13)]

    res = residue_match_check(P, [0.01, -0.02, 0.01j, 0.005 - 0.005j])
    kb = kappa_lower_bound(P, xs)
    kf = abs(P.h.s0) - abs(P.h.s1)
    dmin = denominator_bound(P, xs)
    dfloor = kf * kf * 0.75
    sups, ratios = remainder_growth(P)
    tubes = tube_maxima(P, tube_radii, [0.01, 0.02j, -0.015])

    rows = []
    skipped = 0
    used = []
    for x, y in starts:
        try:
            xp, w = sigma(x, y)
        except PathBlowup:
            skipped += len(times)
            continue
        used.append((x, y))
        for t in times:
            yt = _flow_to(P, "X", x, y, t, budget)
            rhs = _flow_to(P, "Y", xp, w, t, budget)
            try:
                lhs = None if (yt is None or rhs is None) else sigma(x, yt)[1]
            except PathBlowup:
                lhs = None
            if lhs is None:
                skipped += 1
                continue
            rows.append((complex(x), complex(y), float(t), abs(lhs - rhs), lhs, rhs))
    gap = max((r[3] for r in rows), default=math.inf)
    fgap = max((sigma.fatou_check(x, y) for x, y in used), default=math.inf)
    bgap = 0.0
    for x, _ in used:
        xp, w = sigma(x, P.y0)
        bgap = max(bgap, abs(w - P.y0), abs(xp - P.tau(x)))

    agap = 0.0
    fy0 = CallableField(lambda e: P.Y(0.0, e), zeros=(0.0,))
    for y in petal_points:
        w = sigma_at_zero(P, y)
        for z in z_grid:
            yz = _flow_to(P, "X", 0.0, y, z, budget)
            if yz is None:
                continue
            wz = sigma_at_zero(P, yz)
            dpsi = fatou_integral(fy0, [w, wz], pole_clearance=0.0)
            agap = max(agap, abs(dpsi - complex(P.h(z))))

    # derivatives of sigma near x = 0 from the construction itself
    xw = 1e-8
    offset = 0.5j * P.y0 if witness_y is None else complex(witness_y) - P.y0
    for _ in range(8):
        yw = P.y0 + offset
        try:
            dy, dyb = _wirtinger(lambda q: sigma(xw, q)[1], yw, 1e-5)
            break
        except PathBlowup:
            offset *= 0.5
    else:
        dy = dyb = complex("nan")
    w0 = sigma_at_zero(P, yw)
    expected = abs(P.h.s1) * abs(P.Y(0.0, w0) / P.X(0.0, yw))

    radius = max((abs(y) for _, y in used), default=0.0)
    return ConjugacyReport(
        problem=P,
        residue_match=res,
        kappa_bound=kb,
        kappa_floor=kf,
        denominator_min=dmin,
        denominator_floor=dfloor,
        remainder_sups=sups,
        remainder_ratios=ratios,
        tube_radii=list(tube_radii),
        tube_maxima=tubes,
        transport_gap=gap,
        transport_rows=rows,
        transport_skipped=skipped,
        fatou_gap=fgap,
        base_point_gap=bgap,
        affinity_gap=agap,
        nonholomorphy=abs(dyb),
        nonholomorphy_expected=expected,
        antiholomorphy=abs(dy),
        tube_mapped=len(sigma.tube_mapped),
        largest_verified_radius=radius,
        settings={
            "times": list(times),
            "rel_tol": sigma.rel_tol,
            "abs_tol": sigma.abs_tol,
            "flow_rel_tol": budget.rel_tol,
            "tube_radii": list(tube_radii),
            "witness_point": [xw, [yw.real, yw.imag]],
            "denominator_margin": 0.25,
        },
    )
