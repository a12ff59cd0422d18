"""One-parameter unfoldings X = f(x, y)/D(x, y) d/dy of a parabolic point.

The fixed set of X near the origin is a union of curves y = gamma_j(x).  When a
branch is not a graph over x (for instance y**2 = x) the input is ramified
x = u**k, with k read off from the monodromy of the branches around x = 0,
and everything downstream runs in the variable u.

The dynamical splitting repeatedly blows up t = x w at the origin of a seed.
Every seed carries its own adapted coordinate t and the polynomial F(x, t)
with X = F(x, t)/D d/dt up to the Jacobian of the chart.  Writing
F = x**ord G and sigma = ord_t G(0, .), the blown-up polynomial is
H(x, w) = G(x, x w)/x**sigma, the compact-like set gets exponent
e + sigma - 1 and polynomial field lambda**e H(0, w)/D(0, 0), and the
children are the seeds t' = w - zeta over the distinct roots zeta of H(0, .).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .algebra import (
    BivariatePoly,
    ComplexPoly,
    RootCluster,
    contour_residue_oracle,
    residue_of_rational,
    roots,
    unit_root,
)
from .errors import (
    BranchCollision,
    DenominatorVanishes,
    DepthExceeded,
    NotParabolic,
    NotTransversal,
    ValidationError,
)
from .flow import CallableField, IntegrationBudget
from .polyfield import analyze, instability_directions

__all__ = [
    "UnfoldingField",
    "FixedCurve",
    "SplittingNode",
    "Petal",
    "InstabilityDirection",
    "load",
    "fixed_curves",
    "residue_function",
    "residue_at",
    "dynamical_splitting",
    "instability_set",
    "petals",
    "field_convergence",
    "MAX_DEPTH",
    "CLUSTER_TOL",
]

MAX_DEPTH = 8
CLUSTER_TOL = 1e-6
_REL_ZERO = 1e-9

PolyLike = Union[BivariatePoly, str, Sequence]


def _as_bivariate(obj, name: str) -> BivariatePoly:
    if isinstance(obj, BivariatePoly):
        return obj
    if isinstance(obj, (int, float, complex)):
        return BivariatePoly.constant(complex(obj))
    if isinstance(obj, str):
        import sympy as sp

        x, y = sp.symbols("x y")
        try:
            expr = sp.sympify(obj, locals={"x": x, "y": y, "I": sp.I, "i": sp.I})
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise ValidationError(f"{name}: cannot parse {obj!r}") from exc
        if expr.free_symbols - {x, y}:
            raise ValidationError(f"{name}: unknown symbols {expr.free_symbols - {x, y}}")
        try:
            return BivariatePoly.from_sympy(expr, x, y)
        except sp.PolynomialError as exc:
            raise ValidationError(f"{name}: not a polynomial in x, y") from exc
    try:
        return BivariatePoly.from_table(obj)
    except (TypeError, IndexError, ValueError) as exc:
        raise ValidationError(f"{name}: malformed coefficient table") from exc


# --------------------------------------------------------------------------
# square-free structure


def _squarefree_factors(f: BivariatePoly) -> list[tuple[BivariatePoly, int]]:
    """Primitive (in y) square-free factors of f with their multiplicities.

    Factors depending on x alone are dropped; they never meet a neighbourhood
    of the origin except along x = 0, which is accounted for by m.
    """
    import sympy as sp

    x, y = sp.symbols("x y")
    expr = f.to_sympy(x, y, exact=True)
    _, facs = sp.sqf_list(expr, x, y, domain="QQ_I")
    out = []
    for g, k in facs:
        if not g.has(y):
            continue
        prim = sp.Poly(g, y, domain=sp.QQ_I[x]).primitive()[1]
        out.append((BivariatePoly.from_sympy(prim.as_expr(), x, y), int(k)))
    return out


# --------------------------------------------------------------------------
# root continuation


def _match(prev: np.ndarray, new: np.ndarray) -> np.ndarray | None:
    """Nearest-neighbour assignment prev -> new, or None if ambiguous."""
    if len(prev) == 0:
        return np.zeros(0, dtype=int)
    d = np.abs(prev[:, None] - new[None, :])
    idx = np.argmin(d, axis=1)
    if len(set(idx.tolist())) != len(idx):
        return None
    for i, j in enumerate(idx):
        near = d[i, j]
        rest = np.delete(d[i], j)
        if len(rest) and near > 0.3 * float(np.min(rest)):
            return None
    return idx


def _all_roots(p: ComplexPoly) -> np.ndarray:
    if p.degree() < 1:
        return np.zeros(0, dtype=complex)
    out = []
    for rc in roots(p, tol_cluster=0.0, tol_root=1e-6):
        out.extend([rc.location] * rc.multiplicity)
    return np.array(out, dtype=complex)


def _continue(
    poly: BivariatePoly, ys: np.ndarray, path: Sequence[complex], depth: int = 0
) -> np.ndarray:
    """Carry the simple roots ``ys`` of poly(path[0], .) along the path."""
    cur = np.array(ys, dtype=complex)
    for a, b in zip(path[:-1], path[1:]):
        new = _all_roots(poly.in_y(b))
        idx = _match(cur, new) if len(new) else None
        if idx is None:
            if depth >= 12:
                raise BranchCollision(
                    f"root continuation ambiguous between x={a:.6g} and x={b:.6g}"
                )
            mid = [a + (b - a) * s for s in np.linspace(0.0, 1.0, 5)]
            cur = _continue(poly, cur, mid, depth + 1)
            continue
        cur = new[idx]
    return cur


def _circle(center: complex, r: float, t0: float, t1: float, n: int) -> list[complex]:
    return [center + r * cmath.exp(1j * t) for t in np.linspace(t0, t1, n)]


def _monodromy(poly: BivariatePoly, r: float, eps: float) -> int:
    """Lcm of cycle lengths of the branches |y| < eps over the loop |x| = r."""
    start = r * cmath.exp(0.1j)
    ys = _all_roots(poly.in_y(start))
    ys = ys[np.abs(ys) < eps]
    if len(ys) == 0:
        return 1
    end = _continue(poly, ys, _circle(0.0, r, 0.1, 0.1 + 2 * math.pi, 181))
    perm = [int(np.argmin(np.abs(ys - e))) for e in end]
    k, seen = 1, set()
    for i in range(len(ys)):
        if i in seen:
            continue
        n, j = 0, i
        while j not in seen:
            seen.add(j)
            j = perm[j]
            n += 1
        k = k * n // math.gcd(k, n)
    return k


# --------------------------------------------------------------------------
# the unfolding


@dataclass(frozen=True)
class UnfoldingField:
    """X = numerator/denominator d/dy on the polydisk |x| < delta, |y| <= epsilon.

    ``work`` is the numerator divided by x**m and ramified by x = u**k;
    ``work_den`` is the ramified denominator.  Fixed curves and the
    splitting live in the (u, y) plane.
    """

    numerator: BivariatePoly
    denominator: BivariatePoly
    N: int
    m: int
    nu: int
    ramification: int
    delta: float
    epsilon: float
    factors: tuple[tuple[BivariatePoly, int], ...]
    work: BivariatePoly
    work_den: BivariatePoly

    def __call__(self, x: complex, y: complex) -> complex:
        return self.numerator(x, y) / self.denominator(x, y)

    def u_of(self, x: complex) -> complex:
        """Principal k-th root of x."""
        if self.ramification == 1:
            return complex(x)
        return complex(x) ** (1.0 / self.ramification) if x != 0 else 0j

    def x_of(self, u: complex) -> complex:
        return complex(u) ** self.ramification

    def slice(self, x: complex) -> CallableField:
        """The one-variable field y -> X(x, y)."""
        num = self.numerator.in_y(x)
        den = self.denominator.in_y(x)
        hn = tuple(reversed(num.coeffs))
        hd = tuple(reversed(den.coeffs))

        def f(y):
            if isinstance(y, np.ndarray):
                return num(y) / den(y)
            a = 0j
            for c in hn:
                a = a * y + c
            b = 0j
            for c in hd:
                b = b * y + c
            return a / b

        zs = _all_roots(num) if num.degree() >= 1 else np.zeros(0)
        return CallableField(f, [z for z in zs if abs(z) < 2 * self.epsilon])

    def d00(self) -> complex:
        return complex(self.denominator.c[0, 0])

    def to_json(self) -> dict:
        return {
            "numerator": self.numerator.to_table(),
            "denominator": self.denominator.to_table(),
            "N": self.N,
            "m": self.m,
            "nu": self.nu,
            "ramification": self.ramification,
            "delta": self.delta,
            "epsilon": self.epsilon,
        }


def _check_denominator(den: BivariatePoly, delta: float, eps: float) -> None:
    if den.is_zero():
        raise DenominatorVanishes("denominator is identically zero")
    scale_ = den.max_coeff()
    xs = [0j] + [
        r * cmath.exp(1j * t)
        for r in np.linspace(delta / 8, delta, 8)
        for t in np.linspace(0.0, 2 * math.pi, 24, endpoint=False)
    ]
    ys = [r * cmath.exp(1j * t) for r in np.linspace(0.0, eps, 9) for t in np.linspace(0, 2 * math.pi, 24, endpoint=False)]
    for x0 in xs:
        p = den.in_y(x0)
        if p.degree() >= 1:
            z = _all_roots(p)
            if len(z) and float(np.min(np.abs(z))) <= eps:
                raise DenominatorVanishes(
                    f"denominator vanishes near (x, y) = ({x0:.4g}, {z[np.argmin(np.abs(z))]:.4g})"
                )
        vals = np.abs(p(np.array(ys)))
        if float(np.min(vals)) <= 1e-12 * scale_:
            raise DenominatorVanishes(f"denominator nearly vanishes on the slice x = {x0:.4g}")


def load(
    numerator: PolyLike,
    denominator: PolyLike | None = None,
    delta: float = 0.1,
    epsilon: float = 0.5,
    ramify: bool = True,
    require_parabolic: bool = True,
) -> UnfoldingField:
    """Validate an unfolding and compute N, m, nu and the ramification index.

    ``numerator`` and ``denominator`` are BivariatePoly instances, sympy-style
    strings in x and y, or ascending [re, im] coefficient tables.  With
    ``ramify=False`` a branch that is not a graph over x raises NotTransversal.
    """
    f = _as_bivariate(numerator, "numerator")
    D = _as_bivariate(denominator if denominator is not None else 1.0, "denominator")
    if not (delta > 0 and epsilon > 0):
        raise ValidationError("polydisk radii must be positive")
    if f.is_zero():
        raise ValidationError("numerator is identically zero")
    _check_denominator(D, delta, epsilon)
    m = f.x_order()
    f0 = f.divide_x(m)
    row0 = f0.c[0]
    if not np.any(row0):
        raise ValidationError("X/x**m vanishes identically on x = 0")
    if require_parabolic:
        scale_ = f0.max_coeff()
        if abs(f0.c[0, 0]) > _REL_ZERO * scale_ or (
            f0.c.shape[1] > 1 and abs(f0.c[0, 1]) > _REL_ZERO * scale_
        ):
            raise NotParabolic("need f(0,0) = 0 and df/dy(0,0) = 0 after removing x**m")
    nu = f0.y_order_at_x0() - 1
    x0 = 0.25 * delta * cmath.exp(0.7j)
    N = sum(1 for rc in roots(f0.in_y(x0)) if abs(rc.location) < epsilon)
    factors = tuple(_squarefree_factors(f0))
    k = 1
    r = 0.5 * delta
    for A, _ in factors:
        k_a = _monodromy(A, r, epsilon)
        k = k * k_a // math.gcd(k, k_a)
    if k > 1 and not ramify:
        raise NotTransversal(
            f"fixed set has a branch that is not a graph over x; substitute x -> x**{k} first"
        )
    work = f0.ramify_x(k)
    wden = D.ramify_x(k)
    facs = tuple((A.ramify_x(k), s) for A, s in factors)
    return UnfoldingField(f, D, N, m, nu, k, float(delta), float(epsilon), facs, work, wden)


# --------------------------------------------------------------------------
# fixed curves and residues


def residue_at(X: UnfoldingField, x: complex, y0: complex, multiplicity: int = 1) -> complex:
    """Res(X(x, .) d/dy, y0): residue of the form D dy/f at the point y0.

    ``y0`` only needs to be close to the root; it is refined by Newton on the
    square-free factor of the given multiplicity that vanishes closest to it.
    """
    u = X.u_of(x)
    loc = complex(y0)
    cands = [A.in_y(u) for A, s in X.factors if s == multiplicity]
    if cands:
        A = min(cands, key=lambda p: abs(p(loc)) / max(p.abs_eval(loc), 1e-300))
        d = A.derivative()
        for _ in range(8):
            dv = d(loc)
            if dv == 0:
                break
            step = A(loc) / dv
            loc -= step
            if abs(step) <= 1e-16 * (1 + abs(loc)):
                break
    num = X.numerator.in_y(x)
    den = X.denominator.in_y(x)
    return residue_of_rational(den, num, RootCluster(loc, multiplicity, 0.0))


@dataclass(frozen=True)
class FixedCurve:
    """A branch y = gamma(u) of the fixed set in the ramified variable u."""

    branch: int
    multiplicity: int
    factor: int  # index into X.factors
    seed_u: complex
    seed_y: complex
    samples: tuple[tuple[complex, complex], ...]
    X: UnfoldingField = field(repr=False, compare=False)

    def locate(self, u: complex) -> complex:
        """gamma(u) by continuation from the seed: arc to arg(u), then radially."""
        A = self.X.factors[self.factor][0]
        u = complex(u)
        if u == 0:
            return 0j
        r0, t0 = abs(self.seed_u), cmath.phase(self.seed_u)
        t1 = t0 + ((cmath.phase(u) - t0 + math.pi) % (2 * math.pi) - math.pi)
        n_arc = max(8, int(abs(t1 - t0) / 0.05))
        path = _circle(0.0, r0, t0, t1, n_arc)
        ratio = abs(u) / r0
        n_rad = max(4, int(abs(math.log(ratio)) / 0.1))
        path += [r0 * ratio ** s * cmath.exp(1j * t1) for s in np.linspace(0.0, 1.0, n_rad)[1:]]
        path[-1] = u
        return complex(_continue(A, np.array([self.seed_y]), path)[0])

    def residue_fn(self, u: complex) -> complex:
        """Res(X, (u**k, gamma(u))) as a function of the ramified variable."""
        A = self.X.factors[self.factor][0]
        x = self.X.x_of(u)
        y0 = self.locate(u)
        num = self.X.work.in_y(u)
        # the ramified numerator differs from f(x, .) by the factor x**m
        den = self.X.work_den.in_y(u)
        d = A.in_y(u).derivative()
        for _ in range(4):
            dv = d(y0)
            if dv == 0:
                break
            y0 = y0 - A.in_y(u)(y0) / dv
        res0 = residue_of_rational(den, num, RootCluster(y0, self.multiplicity, 0.0))
        return res0 / x ** self.X.m if self.X.m else res0

    def residue_oracle(self, u: complex, radius: float | None = None) -> complex:
        """Contour quadrature of D dy/f around gamma(u)."""
        x = self.X.x_of(u)
        y0 = self.locate(u)
        others = [y for y in _all_roots(self.X.numerator.in_y(x)) if abs(y - y0) > 1e-9 * (1 + abs(y0))]
        if radius is None:
            gap = min([abs(y - y0) for y in others] or [1.0])
            radius = 0.3 * gap
        num = self.X.numerator.in_y(x)
        den = self.X.denominator.in_y(x)
        return contour_residue_oracle(lambda y: den(y) / num(y), y0, radius, 256)


def fixed_curves(
    X: UnfoldingField,
    radii: Sequence[float] | None = None,
    directions: Sequence[complex] | None = None,
) -> list[FixedCurve]:
    """Branches of the fixed set through the origin, sampled on rays r * lambda.

    Radii and directions refer to the ramified variable u.  Branch identity
    is fixed once at the seed u* = r_max e^{0.1 i} and propagated by
    continuation.
    """
    rmax = 0.5 * X.delta ** (1.0 / X.ramification)
    radii = list(radii) if radii is not None else list(rmax * np.geomspace(1.0, 1e-3, 10))
    directions = list(directions) if directions is not None else [1.0, 1j, -1.0, -1j]
    seed_u = rmax * cmath.exp(0.1j)
    out: list[FixedCurve] = []
    pending = []
    for fi, (A, s) in enumerate(X.factors):
        ys = _all_roots(A.in_y(seed_u))
        for y in ys:
            if abs(y) < X.epsilon:
                pending.append((fi, s, complex(y)))
    scale_ = max([abs(y) for *_, y in pending] + [1.0])
    q = 1e-9 * scale_
    pending.sort(key=lambda t: (round(t[2].real / q), round(t[2].imag / q)))
    for j, (fi, s, y) in enumerate(pending):
        curve = FixedCurve(j, s, fi, seed_u, y, (), X)
        samples = []
        A = X.factors[fi][0]
        for lam in directions:
            lam = lam / abs(lam)
            if not radii:
                break
            u_prev = radii[0] * lam
            y_prev = curve.locate(u_prev)
            samples.append((u_prev, y_prev))
            for r in radii[1:]:
                u = r * lam
                steps = max(2, int(abs(math.log(abs(u) / abs(u_prev))) / 0.1) + 1)
                path = [u_prev * (u / u_prev) ** s_ for s_ in np.linspace(0.0, 1.0, steps)]
                path[-1] = u
                y_prev = complex(_continue(A, np.array([y_prev]), path)[0])
                u_prev = u
                samples.append((u, y_prev))
        object.__setattr__(curve, "samples", tuple(samples))
        out.append(curve)
    return out


def residue_function(X: UnfoldingField, curve: Union[int, FixedCurve], curves=None):
    """Evaluable u -> Res(X, (u**k, gamma_j(u)))."""
    if isinstance(curve, FixedCurve):
        return curve.residue_fn
    curves = curves if curves is not None else fixed_curves(X, radii=[], directions=[])
    return curves[curve].residue_fn


# --------------------------------------------------------------------------
# dynamical splitting


@dataclass
class SplittingNode:
    kind: str  # Seed | Exterior | CompactLike
    label: tuple[complex, ...]
    chart: tuple[tuple, ...]  # ("shift", zeta) and ("blow",) steps after the ramification
    e: int
    nu_local: int
    radii: dict = field(default_factory=dict)
    children: list["SplittingNode"] = field(default_factory=list)
    poly_field: ComplexPoly | None = None  # X_beta(lambda) = lambda**e * poly_field
    clusters: tuple[tuple[complex, int], ...] = ()
    h0: complex | None = None  # linear coefficient of a non-parabolic exterior set
    local: BivariatePoly | None = field(default=None, repr=False)

    @property
    def terminal(self) -> bool:
        return self.kind == "Seed" and not any(c.kind == "CompactLike" for c in self.children)

    @property
    def parabolic(self) -> bool:
        return self.nu_local > 0

    def label_str(self) -> str:
        return ".".join(_fmt(z) for z in self.label)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def y_of(self, u: complex, w: complex) -> complex:
        """Original y of the point with chart coordinate w at parameter u."""
        y = complex(w)
        for step in reversed(self.chart):
            if step[0] == "blow":
                y = u * y
            else:
                y = step[1] + y
        return y

    def blowups(self) -> int:
        return sum(1 for s in self.chart if s[0] == "blow")

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "label": [[z.real, z.imag] for z in self.label],
            "label_str": self.label_str(),
            "e": self.e,
            "nu_local": self.nu_local,
            "radii": self.radii,
        }
        if self.poly_field is not None:
            out["poly_field"] = [[c.real, c.imag] for c in self.poly_field.coeffs]
            out["clusters"] = [[[z.real, z.imag], s] for z, s in self.clusters]
        if self.h0 is not None:
            out["h0"] = [self.h0.real, self.h0.imag]
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out


def _fmt(z: complex) -> str:
    z = complex(z)
    if abs(z.imag) < 1e-12:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}i"


def _tol(P: BivariatePoly) -> float:
    return CLUSTER_TOL * max(P.max_coeff(), 1e-300)


def _grow(
    X: UnfoldingField,
    F: BivariatePoly,
    factors: list[BivariatePoly],
    e_pre: int,
    chart: tuple,
    label: tuple,
    depth: int,
    rho_override: float | None,
    eta_override: float | None,
) -> SplittingNode:
    d00 = complex(X.work_den.c[0, 0])
    ordx = F.x_order(_tol(F))
    e = e_pre + ordx
    G = F.divide_x(ordx).clean(_REL_ZERO * F.max_coeff())
    sig = G.y_order_at_x0(_tol(G))
    p = 0
    for A in factors:
        A0 = A.divide_x(A.x_order(_tol(A)))
        p += A0.y_order_at_x0(_tol(A0))
    seed = SplittingNode("Seed", label, chart, e, sig - 1, local=G)
    ext = SplittingNode("Exterior", label, chart, e, sig - 1)
    if sig == 1:
        ext.h0 = complex(G.c[0, 1]) / d00
    seed.children.append(ext)
    if p <= 1:
        seed.radii = {} if not label[1:] else dict(seed.radii)
        return seed
    if depth >= MAX_DEPTH:
        raise DepthExceeded(f"splitting deeper than {MAX_DEPTH} blow-up levels at {label}")
    B = G.blow_up()
    tolB = _tol(B)
    if np.any(np.abs(B.c[:sig]) > tolB):
        raise NotTransversal(f"seed {label} is not transversal after blow-up; pre-ramify x")
    H = B.divide_x(sig).clean(_REL_ZERO * B.max_coeff())
    ec = e + sig - 1
    h_w = H.in_y(0.0)
    poly = h_w.scale(1.0 / d00)
    clusters = [(rc.location, rc.multiplicity) for rc in roots(h_w, tol_cluster=CLUSTER_TOL)]
    locs = [z for z, _ in clusters]
    rho = rho_override if rho_override is not None else 4.0 * max(abs(z) for z in locs) + 4.0
    if eta_override is not None:
        eta = eta_override
    elif len(locs) > 1:
        eta = 0.25 * min(abs(a - b) for i, a in enumerate(locs) for b in locs[i + 1 :])
    else:
        eta = 1.0
    comp = SplittingNode(
        "CompactLike", label, chart + (("blow",),), ec, sig - 1,
        radii={"rho": rho, "eta": eta}, poly_field=poly, clusters=tuple(clusters), local=H,
    )
    seed.radii = {"rho": rho, "eta_children": eta}
    seed.children.append(comp)
    blown = []
    for A in factors:
        A0 = A.divide_x(A.x_order(_tol(A)))
        sa = A0.y_order_at_x0(_tol(A0))
        if sa == 0:
            continue  # never meets the blown-up chart near the divisor
        BA = A0.blow_up()
        blown.append(BA.divide_x(sa).clean(_REL_ZERO * BA.max_coeff()))
    for z, _ in clusters:
        child = _grow(
            X,
            H.shift_y(z),
            [A.shift_y(z) for A in blown],
            ec,
            chart + (("blow",), ("shift", z)),
            label + (z,),
            depth + 1,
            rho_override,
            eta_override,
        )
        child.radii = dict(child.radii, eta=eta)
        seed.children.append(child)
    return seed


def dynamical_splitting(
    X: UnfoldingField, rho: float | None = None, eta: float | None = None
) -> SplittingNode:
    """Root seed of the splitting tree of X/x**m in the ramified variable."""
    if X.N < 1:
        raise ValidationError("splitting needs N >= 1")
    root = _grow(
        X, X.work, [A for A, _ in X.factors], 0, (), (0j,), 0, rho, eta
    )
    root.radii = dict(root.radii, epsilon=X.epsilon, delta=X.delta)
    _check_exponent_law(root)
    return root


def _check_exponent_law(node: SplittingNode) -> None:
    for c in node.children:
        if c.kind == "CompactLike" and c.e != node.e + node.nu_local:
            raise AssertionError(f"exponent law broken at {node.label_str()}")
        if c.kind == "Seed":
            _check_exponent_law(c)


def field_convergence(
    X: UnfoldingField, node: SplittingNode, lam: complex, radii: Sequence[float], n: int = 48
) -> list[float]:
    """max |X_w/|u|**e - lambda**e P(w)| over the compact-like set, per |u|.

    X_w is computed from the original numerator through the chart, not from
    the blown-up polynomial, so it checks the construction independently.
    """
    if node.kind != "CompactLike":
        raise ValidationError("field_convergence needs a CompactLike node")
    lam = complex(lam) / abs(lam)
    rho, eta = node.radii["rho"], node.radii["eta"]
    L = node.blowups()
    pts = []
    for r in np.linspace(0.0, rho, 12)[1:]:
        for t in np.linspace(0.0, 2 * math.pi, n, endpoint=False):
            w = r * cmath.exp(1j * t)
            if all(abs(w - z) > eta for z, _ in node.clusters):
                pts.append(w)
    P = node.poly_field
    out = []
    for r in radii:
        u = r * lam
        x = X.x_of(u)
        worst = 0.0
        for w in pts:
            y = node.y_of(u, w)
            xw = X.numerator(x, y) / x ** X.m / X.denominator(x, y) / u**L
            worst = max(worst, abs(xw / abs(u) ** node.e - lam**node.e * P(w)))
        out.append(worst)
    return out


# --------------------------------------------------------------------------
# instability set


@dataclass(frozen=True)
class InstabilityDirection:
    lam: complex  # direction in the ramified variable
    x_direction: complex  # lam**k
    source: str  # node label
    kind: str  # compact | exterior


def _dedupe(dirs: list[InstabilityDirection]) -> list[InstabilityDirection]:
    out: list[InstabilityDirection] = []
    for d in dirs:
        if all(abs(d.lam - o.lam) > 1e-8 for o in out):
            out.append(d)
    out.sort(key=lambda d: cmath.phase(d.lam) % (2 * math.pi))
    return out


def instability_set(
    X: UnfoldingField,
    budget: IntegrationBudget | None = None,
    tree: SplittingNode | None = None,
) -> list[InstabilityDirection]:
    """Directions of instability tagged by the node that produces them.

    A compact-like node with field lambda**e P contributes the e-th roots of
    every mu for which Re(mu P) has a homoclinic trajectory; a non-parabolic
    exterior set with linear coefficient h0 contributes the lambda with
    lambda**e h0 purely imaginary.
    """
    tree = tree or dynamical_splitting(X)
    k = X.ramification
    dirs: list[InstabilityDirection] = []
    for node in tree.walk():
        if node.kind == "CompactLike":
            Y = analyze(node.poly_field)
            for mu in instability_directions(Y, budget):
                for lam in unit_root(mu, node.e):
                    dirs.append(InstabilityDirection(lam, lam**k, node.label_str(), "compact"))
        elif node.kind == "Exterior" and node.h0 is not None and node.e > 0:
            a = cmath.phase(node.h0)
            for j in range(2 * node.e):
                th = (math.pi / 2 - a + j * math.pi) / node.e
                lam = cmath.exp(1j * th)
                dirs.append(InstabilityDirection(lam, lam**k, node.label_str(), "exterior"))
    return _dedupe(dirs)


# --------------------------------------------------------------------------
# petals


@dataclass(frozen=True)
class Petal:
    index: int
    bisecting_angle: float
    attracting: bool
    radius: float
    half_width: float  # pi/nu minus the margin

    def contains(self, y: complex) -> bool:
        if y == 0 or abs(y) >= self.radius:
            return False
        d = (cmath.phase(y) - self.bisecting_angle + math.pi) % (2 * math.pi) - math.pi
        return abs(d) < self.half_width


def petals(X: UnfoldingField, epsilon: float | None = None, margin: float = 0.05) -> list[Petal]:
    """The 2 nu petals of X|_{x=0} (of X/x**m when m > 0).

    Petal j is bisected by theta_0 + pi j/nu where a e^{i nu theta_0} < 0,
    a = a_{nu+1}/D(0,0); even indices are attracting.
    """
    f0 = X.numerator.divide_x(X.m).in_y(0.0)
    row = list(f0.coeffs)
    nu = X.nu
    if nu < 1:
        raise NotParabolic("petals need a multiple zero at the origin")
    a = row[nu + 1] / complex(X.denominator.c[0, 0])
    th0 = (math.pi - cmath.phase(a)) / nu
    # radius where the higher order terms stay below 20% of the leading one
    tail = [abs(c) for c in row[nu + 2 :]]
    dser = [abs(c) for c in X.denominator.in_y(0.0).coeffs[1:]]
    d0 = abs(complex(X.denominator.c[0, 0]))

    def bound(r: float) -> float:
        num = sum(t * r ** (k + 1) for k, t in enumerate(tail)) / abs(row[nu + 1])
        den = sum(t * r ** (k + 1) for k, t in enumerate(dser)) / d0
        return num + den

    eps = X.epsilon if epsilon is None else float(epsilon)
    lo, hi = 0.0, eps
    if bound(hi) > 0.2:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if bound(mid) <= 0.2 else (lo, mid)
        hi = lo
    out = []
    for j in range(2 * nu):
        th = (th0 + math.pi * j / nu) % (2 * math.pi)
        attracting = (a * cmath.exp(1j * nu * th)).real < 0
        out.append(Petal(j, th, attracting, hi, math.pi / nu - margin))
    return out
