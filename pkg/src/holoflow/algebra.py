"""Complex polynomials, root clusters and residues of the dual form dw/P.

Everything here is immutable.  Coefficient tuples are stored in ascending
degree, so ``ComplexPoly((c0, c1, c2))`` is ``c0 + c1*w + c2*w**2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateDenominator, NonConvergence, ValidationError

__all__ = [
    "ComplexPoly",
    "RootCluster",
    "ResidueValue",
    "BivariatePoly",
    "roots",
    "residue_of_dual_form",
    "residue_of_rational",
    "contour_residue_oracle",
    "series_inverse",
    "eval_poly",
    "derivative",
    "scale",
    "compose_affine",
]

TOL_ROOT = 1e-9
_EPS = np.finfo(float).eps


def _as_complex_tuple(values: Iterable[complex]) -> tuple[complex, ...]:
    return tuple(complex(v) for v in values)


@dataclass(frozen=True)
class ComplexPoly:
    """Univariate complex polynomial with ascending coefficients.

    Exact trailing zeros are stripped on construction.  The zero polynomial is
    stored as ``()``, and its degree is reported as -1.
    """

    coeffs: tuple[complex, ...]

    def __post_init__(self) -> None:
        c = list(_as_complex_tuple(self.coeffs))
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_roots(cls, roots_: Sequence[complex], lead: complex = 1.0) -> "ComplexPoly":
        c = np.array([complex(lead)], dtype=complex)
        for r in roots_:
            # multiply by (w - r)
            c = np.concatenate([[0.0], c]) - r * np.concatenate([c, [0.0]])
        return cls(tuple(c))

    @classmethod
    def monomial(cls, k: int, coeff: complex = 1.0) -> "ComplexPoly":
        return cls((0.0,) * k + (coeff,))

    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> complex:
        if not self.coeffs:
            raise ValidationError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def max_coeff(self) -> float:
        return max((abs(c) for c in self.coeffs), default=0.0)

    def __call__(self, w):
        """Horner evaluation; accepts scalars or numpy arrays."""
        if isinstance(w, np.ndarray):
            acc = np.zeros_like(w, dtype=complex)
        else:
            acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * w + c
        return acc

    def abs_eval(self, w: complex) -> float:
        """Sum of |c_k| |w|^k, the natural scale for rounding errors."""
        r = abs(w)
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * r + abs(c)
        return acc

    def derivative(self, order: int = 1) -> "ComplexPoly":
        c = list(self.coeffs)
        for _ in range(order):
            c = [k * c[k] for k in range(1, len(c))]
        return ComplexPoly(tuple(c))

    def scale(self, lam: complex) -> "ComplexPoly":
        return ComplexPoly(tuple(lam * c for c in self.coeffs))

    def compose_affine(self, alpha: complex, beta: complex) -> "ComplexPoly":
        """Return the polynomial w -> P(alpha*w + beta)."""
        out = np.zeros(max(len(self.coeffs), 1), dtype=complex)
        inner = np.array([beta, alpha], dtype=complex)
        for c in reversed(self.coeffs):
            out = np.convolve(out, inner)[: len(out)]
            out[0] += c
        return ComplexPoly(tuple(out))

    def taylor(self, z0: complex) -> tuple[complex, ...]:
        """Coefficients of P(z0 + u) in powers of u (no stripping)."""
        c = list(self.coeffs)
        n = len(c)
        # repeated synthetic division
        for k in range(n):
            for j in range(n - 2, k - 1, -1):
                c[j] += z0 * c[j + 1]
        return tuple(c)

    def reversed(self, degree: int | None = None) -> "ComplexPoly":
        """Return w**d * P(1/w) for d = degree (default: deg P)."""
        d = self.degree() if degree is None else degree
        c = list(self.coeffs) + [0.0] * (d + 1 - len(self.coeffs))
        return ComplexPoly(tuple(reversed(c[: d + 1])))

    def __add__(self, other: "ComplexPoly") -> "ComplexPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0j] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0j] * (n - len(other.coeffs))
        return ComplexPoly(tuple(x + y for x, y in zip(a, b)))

    def __neg__(self) -> "ComplexPoly":
        return self.scale(-1.0)

    def __sub__(self, other: "ComplexPoly") -> "ComplexPoly":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, ComplexPoly):
            if self.is_zero() or other.is_zero():
                return ComplexPoly(())
            return ComplexPoly(tuple(np.convolve(self.coeffs, other.coeffs)))
        return self.scale(complex(other))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "ComplexPoly":
        out = ComplexPoly((1.0,))
        for _ in range(k):
            out = out * self
        return out

    def allclose(self, other: "ComplexPoly", tol: float = 1e-12) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.array(list(self.coeffs) + [0j] * (n - len(self.coeffs)))
        b = np.array(list(other.coeffs) + [0j] * (n - len(other.coeffs)))
        return bool(np.all(np.abs(a - b) <= tol))

    def to_pairs(self) -> list[list[float]]:
        return [[c.real, c.imag] for c in self.coeffs]

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "ComplexPoly":
        return cls(tuple(complex(p[0], p[1]) for p in pairs))


def eval_poly(p: ComplexPoly, w):
    return p(w)


def derivative(p: ComplexPoly) -> ComplexPoly:
    return p.derivative()


def scale(p: ComplexPoly, lam: complex) -> ComplexPoly:
    return p.scale(lam)


def compose_affine(p: ComplexPoly, alpha: complex, beta: complex) -> ComplexPoly:
    return p.compose_affine(alpha, beta)


@dataclass(frozen=True)
class RootCluster:
    location: complex
    multiplicity: int
    condition: float  # backward residual |P(z)| / sum |c_k||z|^k


@dataclass(frozen=True)
class ResidueValue:
    at: RootCluster
    value: complex


def _aberth(c: np.ndarray, maxit: int = 600) -> np.ndarray:
    n = len(c) - 1
    a = c / c[-1]
    da = a[1:] * np.arange(1, n + 1)
    # Fujiwara-type radius bound for the start circle
    bound = 2.0 * max(abs(a[n - k]) ** (1.0 / k) for k in range(1, n + 1))
    bound = max(bound, 1e-300)
    ang = 2.0 * np.pi * np.arange(n) / n + 0.4
    z = 0.5 * bound * np.exp(1j * ang)
    absa = np.abs(a)
    active = np.ones(n, dtype=bool)
    for _ in range(maxit):
        pv = np.polynomial.polynomial.polyval(z, a)
        scale_ = np.polynomial.polynomial.polyval(np.abs(z), absa)
        done = np.abs(pv) <= 4.0 * n * _EPS * scale_
        active &= ~done
        if not active.any():
            break
        dpv = np.polynomial.polynomial.polyval(z, da)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dpv != 0, pv / dpv, 1e-3 * (1.0 + np.abs(z)))
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            s = np.sum(np.where(diff == 0, 0.0, 1.0 / diff), axis=1)
            step = ratio / (1.0 - ratio * s)
        step = np.where(np.isfinite(step), step, 1e-8)
        z = np.where(active, z - step, z)
    return z


def _cluster(z: np.ndarray, tol: float) -> list[list[int]]:
    n = len(z)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i] - z[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _sort_key(z: complex, q: float) -> tuple[int, int]:
    # quantized so that rounding noise in a vanishing real part cannot flip order
    return (round(z.real / q), round(z.imag / q))


def roots(
    p: ComplexPoly,
    tol_cluster: float | None = None,
    tol_root: float = TOL_ROOT,
) -> list[RootCluster]:
    """All roots of ``p`` grouped into clusters.

    Simultaneous (Aberth) iteration from a scaled circle, then single-linkage
    merging of roots closer than ``tol_cluster`` (default
    ``1e-7 * max(1, max|root|)``).  A cluster starts at the mean of its
    members and is Newton-polished on the derivative of order
    multiplicity - 1, where it is a simple root.
    """
    d = p.degree()
    if d < 1:
        raise ValidationError("roots() needs a polynomial of degree >= 1")
    c = np.array(p.coeffs, dtype=complex)
    # exact roots at zero are split off first so they stay exact
    k0 = 0
    while c[k0] == 0:
        k0 += 1
    approx = np.zeros(0, dtype=complex)
    if d - k0 >= 1:
        approx = _aberth(c[k0:])
    approx = np.concatenate([np.zeros(k0, dtype=complex), approx])
    scale_ = max(1.0, float(np.max(np.abs(approx))) if len(approx) else 1.0)
    if tol_cluster is None:
        tol_cluster = 1e-7 * scale_
    dp = p.derivative()
    out: list[RootCluster] = []
    for group in _cluster(approx, tol_cluster):
        mult = len(group)
        loc = complex(np.mean(approx[group]))
        if loc != 0:
            # an m-fold root is a simple root of the (m-1)-th derivative
            f = p if mult == 1 else p.derivative(mult - 1)
            df = dp if mult == 1 else p.derivative(mult)
            for _ in range(3 if mult == 1 else 6):
                dv = df(loc)
                if dv == 0:
                    break
                new = loc - f(loc) / dv
                if abs(f(new)) >= abs(f(loc)):
                    break
                loc = new
        denom = p.abs_eval(loc)
        cond = abs(p(loc)) / denom if denom > 0 else 0.0
        if cond > tol_root:
            raise NonConvergence(
                f"root near {loc:.6g} has backward residual {cond:.2e} > {tol_root:.1e}"
            )
        out.append(RootCluster(loc, mult, cond))
    q = 1e-9 * scale_
    out.sort(key=lambda r: _sort_key(r.location, q))
    return out


def series_inverse(c: Sequence[complex], n: int) -> list[complex]:
    """First ``n`` coefficients of 1/(c0 + c1 u + ...)."""
    if c[0] == 0:
        raise DegenerateDenominator("series inverse of a series vanishing at 0")
    inv = [0j] * n
    inv[0] = 1.0 / c[0]
    for k in range(1, n):
        acc = 0j
        for j in range(1, min(k, len(c) - 1) + 1):
            acc += c[j] * inv[k - j]
        inv[k] = -acc / c[0]
    return inv


def residue_of_rational(
    num: ComplexPoly, den: ComplexPoly, root: RootCluster, rel_tol: float = 1e-10
) -> complex:
    """Residue of num(w)/den(w) dw at a root cluster of ``den``.

    For multiplicity s we write den(z+u) = u**s Q(u) and read off the
    coefficient of u**(s-1) in num(z+u)/Q(u).
    """
    s = root.multiplicity
    z = root.location
    if s == 1:
        dv = den.derivative()(z)
        if abs(dv) <= rel_tol * max(den.abs_eval(z), 1e-300):
            raise DegenerateDenominator(f"P'({z:.6g}) vanishes at a declared simple root")
        return num(z) / dv
    t = den.taylor(z)
    q = list(t[s:]) or [0j]
    if abs(q[0]) <= rel_tol * max(abs(v) for v in t):
        raise DegenerateDenominator(
            f"denominator vanishes at {z:.6g} beyond declared multiplicity {s}"
        )
    inv = series_inverse(q, s)
    nt = num.taylor(z) if not num.is_zero() else (0j,)
    acc = 0j
    for j in range(s):
        if j < len(nt):
            acc += nt[j] * inv[s - 1 - j]
    return acc


def residue_of_dual_form(p: ComplexPoly, root: RootCluster) -> ResidueValue:
    """Residue of dw/P at the cluster ``root``."""
    return ResidueValue(root, residue_of_rational(ComplexPoly((1.0,)), p, root))


def contour_residue_oracle(
    f: Callable[[complex], complex],
    center: complex,
    radius: float,
    n_samples: int = 128,
) -> complex:
    """Trapezoidal approximation of (1/2 pi i) times the loop integral of f.

    The rule is spectrally accurate for integrands analytic in an annulus
    around the circle, so moderate ``n_samples`` already reach round-off.
    """
    n = max(int(n_samples), 64)
    th = 2.0 * np.pi * np.arange(n) / n
    e = np.exp(1j * th)
    pts = center + radius * e
    try:
        vals = np.asarray(f(pts), dtype=complex)
        if vals.shape != pts.shape:
            raise TypeError
    except Exception:
        vals = np.array([f(complex(z)) for z in pts], dtype=complex)
    return complex(radius * np.mean(vals * e))


def _frac(v: float) -> Fraction:
    return Fraction(repr(float(v)))


class BivariatePoly:
    """Polynomial in (x, y) with coefficient array ``c[i, j]`` for x**i y**j."""

    __slots__ = ("c",)

    def __init__(self, coeffs) -> None:
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 2:
            raise ValidationError("bivariate coefficients must be a 2-d table")
        # trim all-zero trailing rows/columns
        while c.shape[0] > 1 and not np.any(c[-1]):
            c = c[:-1]
        while c.shape[1] > 1 and not np.any(c[:, -1]):
            c = c[:, :-1]
        c.setflags(write=False)
        self.c = c

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[int, int], complex]) -> "BivariatePoly":
        if not terms:
            return cls(np.zeros((1, 1)))
        ni = max(i for i, _ in terms) + 1
        nj = max(j for _, j in terms) + 1
        c = np.zeros((ni, nj), dtype=complex)
        for (i, j), v in terms.items():
            c[i, j] += v
        return cls(c)

    @classmethod
    def from_sympy(cls, expr, x, y) -> "BivariatePoly":
        import sympy as sp

        poly = sp.Poly(sp.expand(expr), x, y)
        terms = {}
        for (i, j), v in poly.terms():
            terms[(int(i), int(j))] = complex(sp.N(v, 30))
        return cls.from_terms(terms)

    @classmethod
    def constant(cls, v: complex = 1.0) -> "BivariatePoly":
        return cls([[v]])

    def __repr__(self) -> str:
        terms = [f"({v:.6g})x^{i}y^{j}" for (i, j), v in np.ndenumerate(self.c) if v != 0]
        return "BivariatePoly(" + " + ".join(terms or ["0"]) + ")"

    @property
    def x_degree(self) -> int:
        return self.c.shape[0] - 1

    @property
    def y_degree(self) -> int:
        return self.c.shape[1] - 1

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.c) <= tol))

    def max_coeff(self) -> float:
        return float(np.max(np.abs(self.c)))

    def __call__(self, x, y):
        acc = 0j
        for i in range(self.c.shape[0] - 1, -1, -1):
            row = 0j
            for v in self.c[i, ::-1]:
                row = row * y + v
            acc = acc * x + row
        return acc

    def in_y(self, x0: complex) -> ComplexPoly:
        """The one-variable polynomial y -> F(x0, y)."""
        xp = x0 ** np.arange(self.c.shape[0])
        return ComplexPoly(tuple(xp @ self.c))

    def dy(self) -> "BivariatePoly":
        if self.c.shape[1] == 1:
            return BivariatePoly(np.zeros((1, 1)))
        return BivariatePoly(self.c[:, 1:] * np.arange(1, self.c.shape[1]))

    def dx(self) -> "BivariatePoly":
        if self.c.shape[0] == 1:
            return BivariatePoly(np.zeros((1, 1)))
        return BivariatePoly(self.c[1:, :] * np.arange(1, self.c.shape[0])[:, None])

    def x_order(self, tol: float = 0.0) -> int:
        """Largest k such that x**k divides F (entries <= tol count as zero)."""
        for i in range(self.c.shape[0]):
            if np.any(np.abs(self.c[i]) > tol):
                return i
        return self.c.shape[0]

    def y_order_at_x0(self, tol: float = 0.0) -> int:
        """Vanishing order of y -> F(0, y) at y = 0."""
        row = self.c[0]
        for j, v in enumerate(row):
            if abs(v) > tol:
                return j
        return len(row)

    def divide_x(self, k: int) -> "BivariatePoly":
        if k == 0:
            return self
        return BivariatePoly(self.c[k:, :] if self.c.shape[0] > k else np.zeros((1, 1)))

    def ramify_x(self, k: int) -> "BivariatePoly":
        """F(x**k, y)."""
        if k == 1:
            return self
        ni, nj = self.c.shape
        out = np.zeros(((ni - 1) * k + 1, nj), dtype=complex)
        out[::k, :] = self.c
        return BivariatePoly(out)

    def shift_y(self, zeta: complex) -> "BivariatePoly":
        """F(x, zeta + y)."""
        out = np.zeros_like(self.c)
        for i, r in enumerate(self.c):
            if np.any(r):
                t = ComplexPoly(tuple(r)).taylor(zeta)
                out[i, : len(t)] = t
        return BivariatePoly(out)

    def blow_up(self) -> "BivariatePoly":
        """F(x, x*w) as a polynomial in (x, w)."""
        ni, nj = self.c.shape
        out = np.zeros((ni + nj - 1, nj), dtype=complex)
        for i in range(ni):
            for j in range(nj):
                out[i + j, j] += self.c[i, j]
        return BivariatePoly(out)

    def clean(self, tol: float) -> "BivariatePoly":
        c = np.where(np.abs(self.c) <= tol, 0.0, self.c)
        return BivariatePoly(c)

    def __mul__(self, other: "BivariatePoly") -> "BivariatePoly":
        a, b = self.c, other.c
        out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1), dtype=complex)
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                if a[i, j] != 0:
                    out[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
        return BivariatePoly(out)

    def __pow__(self, k: int) -> "BivariatePoly":
        out = BivariatePoly.constant(1.0)
        for _ in range(k):
            out = out * self
        return out

    def scale(self, lam: complex) -> "BivariatePoly":
        return BivariatePoly(lam * self.c)

    def to_sympy(self, x, y, exact: bool = True):
        """Sympy expression; with ``exact`` each float becomes the rational of its repr."""
        import sympy as sp

        expr = sp.Integer(0)
        for (i, j), v in np.ndenumerate(self.c):
            if v == 0:
                continue
            if exact:
                re = sp.Rational(_frac(v.real).numerator, _frac(v.real).denominator)
                im = sp.Rational(_frac(v.imag).numerator, _frac(v.imag).denominator)
                coef = re + sp.I * im
            else:
                coef = sp.Float(v.real) + sp.I * sp.Float(v.imag)
            expr += coef * x**i * y**j
        return expr

    def to_table(self) -> list[list[list[float]]]:
        return [[[v.real, v.imag] for v in row] for row in self.c]

    @classmethod
    def from_table(cls, table: Sequence[Sequence[Sequence[float]]]) -> "BivariatePoly":
        if not table:
            raise ValidationError("empty coefficient table")
        width = max(len(r) for r in table)
        c = np.zeros((len(table), max(width, 1)), dtype=complex)
        for i, row in enumerate(table):
            for j, pair in enumerate(row):
                c[i, j] = complex(pair[0], pair[1])
        return cls(c)


def unit_root(z: complex, k: int) -> list[complex]:
    """All k-th roots of z, sorted by argument in [0, 2 pi)."""
    r = abs(z) ** (1.0 / k)
    a = cmath.phase(z)
    out = [r * cmath.exp(1j * (a + 2 * math.pi * j) / k) for j in range(k)]
    return sorted(out, key=lambda u: cmath.phase(u) % (2 * math.pi))
