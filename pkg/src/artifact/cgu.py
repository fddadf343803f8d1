"""Rational modifications of the weight and their generators.

A weight multiplied by

    prod (z - alpha) prod (1 - alpha*/z) / (prod (z - beta) prod (1 - beta*/z))

has a bi-orthogonal system expressible through the base system alone.  The
modified polynomial is the first-row cofactor expansion of a square block
matrix whose constraint rows hold phi at the numerator zeros and xi at the
denominator zeros.  Here the cofactors are obtained as the null vector of
the constraint rows, the known numerator zeros are deflated exactly, and
the free constant is fixed by the leading-coefficient ratio
K^2 = 2 [z^n] Phi_n / [z^n] Xi_n.

The four single-factor cases also have closed 2 x 2 generators R with
Y^mod = R Y, which are implemented separately from the determinant route.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from .bops import BopsSystem, NegativeExtension, extend_negative, principal_sqrt, recurrence_matrix
from .errors import ConsistencyError, DegeneracyError, DomainError, GenericConditionError, InapplicableError, ShapeError
from .weight import CIRCLE_MARGIN, _as_complex, _on_circle

__all__ = [
    "KINDS",
    "CguShift",
    "GeneratorMatrix",
    "Coeffs",
    "TransformedSystem",
    "generator",
    "inverse_generator",
    "transformed_coeffs",
    "Column",
    "columns",
    "transform_system",
    "transpose_system",
    "transpose_shift",
    "recurrence_compat_residual",
    "transformed_spectral_matrix",
    "spectral_compat_residual",
]

Kind = Literal["K1", "L1", "K1star", "L1star"]
KINDS = ("K1", "L1", "K1star", "L1star")

HYPOTHESIS_TOL = 1e-13
GUARD = 1e-10
DEFLATE_TOL = 1e-7

_HYPOTHESIS = {
    "K1": "phi_n(alpha) != 0",
    "L1": "xi*_n(beta) != 0",
    "K1star": "phi*_n(alpha*) != 0",
    "L1star": "xi_n(beta*) != 0",
}


def _clist(values) -> tuple:
    return tuple(_as_complex(v) for v in values)


@dataclass(frozen=True)
class CguShift:
    """Zeros of the numerator and denominator of a rational modification.

    ``alphas``/``betas`` multiply the weight by (z - a) and 1/(z - b);
    ``alpha_stars``/``beta_stars`` by (1 - a/z) and 1/(1 - b/z).
    """

    alphas: tuple = ()
    alpha_stars: tuple = ()
    betas: tuple = ()
    beta_stars: tuple = ()

    def __post_init__(self):
        for name in ("alphas", "alpha_stars", "betas", "beta_stars"):
            vals = _clist(getattr(self, name))
            object.__setattr__(self, name, vals)
            for i, a in enumerate(vals):
                if _on_circle(a):
                    raise DomainError(f"{name}[{i}] = {a} lies on the unit circle")
                if any(abs(a - b) < 1e-12 for b in vals[:i]):
                    raise GenericConditionError(f"{name} contains a repeated entry {a}")
            if any(v == 0 for v in vals):
                raise DomainError(f"{name} may not contain 0; use the monomial exponent")

    @property
    def counts(self) -> tuple:
        """(K, K*, L, L*)."""
        return len(self.alphas), len(self.alpha_stars), len(self.betas), len(self.beta_stars)

    @property
    def empty(self) -> bool:
        return sum(self.counts) == 0

    @classmethod
    def single(cls, kind: Kind, location: complex) -> "CguShift":
        key = {"K1": "alphas", "L1": "betas", "K1star": "alpha_stars", "L1star": "beta_stars"}[kind]
        return cls(**{key: (location,)})

    def to_dict(self) -> dict:
        return {
            k: [[float(v.real), float(v.imag)] for v in getattr(self, k)]
            for k in ("alphas", "alpha_stars", "betas", "beta_stars")
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CguShift":
        if not isinstance(d, dict):
            raise ShapeError("shift must be a JSON object")
        unknown = set(d) - {"alphas", "alpha_stars", "betas", "beta_stars"}
        if unknown:
            raise ShapeError(f"unknown shift keys {sorted(unknown)}")
        try:
            return cls(**{k: [complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in vals]
                          for k, vals in d.items()})
        except TypeError as exc:
            raise ShapeError(f"malformed shift entry: {exc}") from None


# -- elementary generators


@dataclass(frozen=True)
class GeneratorMatrix:
    """R(z) = num(z) / den(z) with 2 x 2 polynomial numerators.

    The scalar prefactor is folded into ``num``.
    """

    num: tuple
    den: Polynomial
    kind: str
    location: complex
    n: int

    def __call__(self, z) -> np.ndarray:
        z = complex(z)
        d = self.den(z)
        if abs(d) < GUARD:
            raise DomainError(f"generator has a pole at z = {z}")
        return np.array([[p(z) for p in row] for row in self.num], dtype=complex) / d

    def derivative(self, z) -> np.ndarray:
        """Analytic dR/dz by the quotient rule."""
        z = complex(z)
        d, dd = self.den(z), self.den.deriv()(z)
        if abs(d) < GUARD:
            raise DomainError(f"generator has a pole at z = {z}")
        out = [[(p.deriv()(z) * d - p(z) * dd) / d**2 for p in row] for row in self.num]
        return np.array(out, dtype=complex)

    def det_poly(self) -> tuple:
        """(numerator, denominator) of det R as polynomials."""
        (a, b), (c, d) = self.num
        return a * d - b * c, self.den**2

    def det(self, z) -> complex:
        num, den = self.det_poly()
        return complex(num(z) / den(z))

    def residue(self) -> np.ndarray:
        """Residue of R at its simple pole (zero matrix for a polynomial R)."""
        roots = self.den.roots()
        if roots.size == 0:
            return np.zeros((2, 2), dtype=complex)
        if roots.size != 1:
            raise ShapeError("residue needs a single simple pole")
        a = roots[0]
        return np.array([[p(a) for p in row] for row in self.num], dtype=complex) / self.den.deriv()(a)

    def inverse(self) -> "GeneratorMatrix":
        """Adjugate inverse, with det(num) as the new denominator."""
        (a, b), (c, d) = self.num
        dn, _ = self.det_poly()
        return GeneratorMatrix(
            ((d * self.den, -b * self.den), (-c * self.den, a * self.den)),
            dn, self.kind + "-inverse", self.location, self.n,
        )

    def __matmul__(self, other: "GeneratorMatrix") -> "GeneratorMatrix":
        (a, b), (c, d) = self.num
        (e, f), (g, h) = other.num
        return GeneratorMatrix(
            ((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h)),
            self.den * other.den, f"{self.kind}*{other.kind}", self.location, self.n,
        )


def _poly(*coef) -> Polynomial:
    return Polynomial(np.array(coef, dtype=complex))


def _ensure_negative(system: BopsSystem, n_min: int) -> BopsSystem:
    if system.n_min <= n_min:
        return system
    key = ("extended", n_min)
    if key not in system._cache:
        system._cache[key] = extend_negative(system, n_min)
    return system._cache[key]


def _require(value: complex, scale: float, kind: str, n: int, loc: complex):
    if not abs(value) > HYPOTHESIS_TOL * max(1.0, scale):
        raise DegeneracyError(f"{kind} generator at {loc}, n = {n}: hypothesis {_HYPOTHESIS[kind]} violated")


class _Point(NamedTuple):
    """Base-system values at the generator location."""

    k0: complex
    k1: complex
    a: complex
    b: complex
    c: complex
    d: complex


def _point(system: BopsSystem, kind: Kind, loc: complex, n: int) -> _Point:
    loc = complex(loc)
    if kind in ("K1", "K1star"):
        if n < 0 or n + 1 > system.n_max:
            raise ShapeError(f"{kind} generator at n = {n} needs degrees up to {n + 1}")
        k0, k1 = system.kappa_at(n), system.kappa_at(n + 1)
        if kind == "K1":
            vals = system.phi_at(n, loc), system.phi_at(n + 1, loc), system.phistar_at(n, loc), 0j
        else:
            vals = system.phistar_at(n, loc), system.phistar_at(n + 1, loc), system.phi_at(n, loc), 0j
        scale = abs(k0) * max(1.0, abs(loc)) ** n
    else:
        if _on_circle(loc):
            raise DomainError(f"{kind} location {loc} lies on the unit circle")
        if n < 0 or n > system.n_max:
            raise ShapeError(f"{kind} generator at n = {n} outside [0, {system.n_max}]")
        system = _ensure_negative(system, n - 1)
        k0, k1 = system.kappa_at(n - 1), system.kappa_at(n)
        if kind == "L1":
            vals = system.xistar_at(n, loc), system.xistar_at(n - 1, loc), system.xi_at(n, loc), system.xi_at(n - 1, loc)
        else:
            vals = system.xi_at(n, loc), system.xi_at(n - 1, loc), system.xistar_at(n, loc), system.xistar_at(n - 1, loc)
        scale = 1.0 / abs(k1)
    _require(vals[0], scale, kind, n, loc)
    return _Point(k0, k1, *(complex(v) for v in vals))


class Coeffs(NamedTuple):
    kappa_sq: complex
    r: complex
    rbar: complex


def transformed_coeffs(system: BopsSystem, kind: Kind, location: complex, n: int) -> Coeffs:
    """(kappa^2, r, rbar) of the system modified by one linear factor."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    loc = complex(location)
    p = _point(system, kind, loc, n)
    if kind == "K1":
        # a = phi_n(alpha), b = phi_{n+1}(alpha), c = phi*_n(alpha)
        ksq = -p.k1 * p.k0 * p.a / p.b
        r = (system.phi0(n) * p.b - system.phi0(n + 1) * p.a) / (loc * p.k1 * p.a)
        rbar = p.c / p.a
    elif kind == "K1star":
        ksq = p.k1 * p.k0 * p.a / p.b
        r = p.c / p.a
        rbar = (system.phibar0(n) * p.b - system.phibar0(n + 1) * loc * p.a) / (p.k1 * p.a)
    elif kind == "L1":
        # a = xi*_n(beta), b = xi*_{n-1}(beta), c = xi_n(beta), d = xi_{n-1}(beta)
        sysn = _ensure_negative(system, n - 1)
        ksq = -p.k1 * p.k0 * loc * p.b / p.a
        r = loc * p.d / p.b
        rbar = (sysn.phibar0(n) * loc * p.b - sysn.phibar0(n - 1) * p.a) / (loc * p.k1 * p.b)
    else:
        # a = xi_n(beta*), b = xi_{n-1}(beta*), c = xi*_n, d = xi*_{n-1}
        sysn = _ensure_negative(system, n - 1)
        ksq = p.k1 * p.k0 * loc * p.b / p.a
        r = (sysn.phi0(n) * p.b - sysn.phi0(n - 1) * p.a) / (p.k1 * p.b)
        rbar = p.d / (loc * p.b)
    if ksq == 0 or not np.isfinite(ksq):
        raise DegeneracyError(f"{kind} at {loc}, n = {n}: transformed kappa^2 = {ksq}")
    return Coeffs(complex(ksq), complex(r), complex(rbar))


def generator(system: BopsSystem, kind: Kind, location: complex, n: int) -> GeneratorMatrix:
    """The 2 x 2 generator R_n with Y_n^mod = R_n Y_n.

    Raises
    ------
    DegeneracyError
        If the standing hypothesis of the generator (for instance
        phi_n(alpha) != 0) fails.
    """
    co = transformed_coeffs(system, kind, location, n)
    kp = principal_sqrt(co.kappa_sq)
    loc = complex(location)
    p = _point(system, kind, loc, n)
    if kind == "K1":
        s = kp / p.k0
        num = ((_poly(-p.k0 * p.b / (p.k1 * p.a), 1), _poly(system.phi0(n + 1) / p.k1)),
               (_poly(0, p.c / p.a), _poly(-loc)))
        den = _poly(-loc, 1)
    elif kind == "K1star":
        s = kp / p.k0
        num = ((_poly(0, 1), _poly(-loc * p.c / p.a)),
               (_poly(0, -system.phibar0(n + 1) * loc / p.k1), _poly(-loc, p.k0 * p.b / (p.k1 * p.a))))
        den = _poly(-loc, 1)
    elif kind == "L1":
        kn = p.k1
        s = -kn / kp
        num = ((_poly(loc), _poly(loc * p.c / p.a)),
               (_poly(0, system.phibar0(n) / kn), _poly(loc * p.k0 * p.b / (kn * p.a), -1)))
        den = _poly(1)
    else:
        kn = p.k1
        s = kp / kn
        q = kn / (p.k0 * p.b)
        num = ((_poly(-q * p.a, 1), _poly(system.phi0(n) * p.a / (p.k0 * p.b))),
               (_poly(0, q * p.c / loc), _poly(0, q * p.a / loc)))
        den = _poly(0, 1)
    num = tuple(tuple(e * s for e in row) for row in num)
    return GeneratorMatrix(num, den, kind, loc, n)


def inverse_generator(system: BopsSystem, kind: Kind, location: complex, n: int) -> GeneratorMatrix:
    """Closed-form inverse of the K1 or L1 generator.

    These are the printed inverses of the shift matrices with the singular
    point replaced by a free location; the conjugated kinds fall back to
    ``GeneratorMatrix.inverse``.
    """
    if kind in ("K1star", "L1star"):
        return generator(system, kind, location, n).inverse()
    co = transformed_coeffs(system, kind, location, n)
    kp = principal_sqrt(co.kappa_sq)
    loc = complex(location)
    p = _point(system, kind, loc, n)
    if kind == "K1":
        # a = phi_n, b = phi_{n+1}, c = phi*_n at alpha
        s = p.a / kp
        num = ((_poly(p.k1 * loc / p.b), _poly(system.phi0(n + 1) / p.b)),
               (_poly(0, p.k1 * p.c / (p.b * p.a)), _poly(p.k0 / p.a, -p.k1 / p.b)))
        den = _poly(1)
    else:
        kn = p.k1
        s = kn / kp
        num = ((_poly(-p.k0 * p.b * loc / (kn * p.a), 1), _poly(p.c * loc / p.a)),
               (_poly(0, system.phibar0(n) / kn), _poly(-loc)))
        den = _poly(-loc, 1)
    num = tuple(tuple(e * s for e in row) for row in num)
    return GeneratorMatrix(num, den, kind + "-inverse", loc, n)


def _kmatrix(k0, k1, p0, pb0, z) -> np.ndarray:
    return np.array([[k1 * z, p0], [pb0 * z, k1]], dtype=complex) / k0


def recurrence_compat_residual(system: BopsSystem, kind: Kind, location: complex, n: int, z) -> np.ndarray:
    """R_{n+1} K_n - K^mod_n R_n at z."""
    z = complex(z)
    c0 = transformed_coeffs(system, kind, location, n)
    c1 = transformed_coeffs(system, kind, location, n + 1)
    k0, k1 = principal_sqrt(c0.kappa_sq), principal_sqrt(c1.kappa_sq)
    Kmod = _kmatrix(k0, k1, c1.r * k1, c1.rbar * k1, z)
    Kn = _kmatrix(system.kappa_at(n), system.kappa_at(n + 1), system.phi0(n + 1), system.phibar0(n + 1), z)
    return generator(system, kind, location, n + 1)(z) @ Kn - Kmod @ generator(system, kind, location, n)(z)


def transformed_spectral_matrix(
    system: BopsSystem, a_n, kind: Kind, location: complex, n: int, z, route: str = "explicit"
) -> np.ndarray:
    """Spectral matrix of the modified system at z.

    Parameters
    ----------
    a_n : callable
        z -> A_n(z) of the base system.
    route : {"explicit", "residue"}
        ``"explicit"`` uses the sandwich formula with polynomial factors;
        ``"residue"`` adds the pole term to R A R^{-1}.
    """
    if kind not in ("K1", "L1"):
        raise InapplicableError(f"no transformed spectral matrix is available for {kind}")
    z, loc = complex(z), complex(location)
    if abs(z - loc) < GUARD:
        raise DomainError("z coincides with the generator location")
    A = np.asarray(a_n(z), dtype=complex)
    if route == "residue":
        R = generator(system, kind, loc, n)
        co = transformed_coeffs(system, kind, loc, n)
        ratio = principal_sqrt(co.kappa_sq) / system.kappa_at(n)
        Rz = R(z)
        conj = Rz @ A @ np.linalg.inv(Rz)
        if kind == "K1":
            return conj - ratio * R.residue() / (z - loc)
        return conj + ratio * R.derivative(loc) / (z - loc)
    if route != "explicit":
        raise ValueError(f"route must be 'explicit' or 'residue', got {route!r}")
    p = _point(system, kind, loc, n)
    if kind == "K1":
        k0, k1, a, b, c = p.k0, p.k1, p.a, p.b, p.c
        f1 = system.phi0(n + 1)
        first = np.array([[-f1 * c, f1 * a], [loc * k1 * c, -loc * k1 * a]]) / (k0 * b)
        left = np.array([[k0 * b - k1 * a * z, -f1 * a], [-k1 * c * z, loc * k1 * a]])
        right = np.array([[-loc * k1 * a, -f1 * a], [-k1 * c * z, k1 * a * z - k0 * b]])
        out = first + left @ A @ right / (k0 * k1 * a * b)
    else:
        km1, kn, xs, xsm, x = p.k0, p.k1, p.a, p.b, p.c
        pb = system.phibar0(n)
        first = np.array([[0, 0], [-pb, kn]]) / kn
        left = np.array([[loc * kn * xs, loc * kn * x], [pb * xs * z, -kn * xs * z + loc * km1 * xsm]])
        right = np.array([[kn * xs * z - loc * km1 * xsm, loc * kn * x], [pb * xs * z, -loc * kn * xs]])
        out = first + left @ A @ right / (loc * km1 * kn * xsm * xs)
    return out / (z - loc)


def spectral_compat_residual(system: BopsSystem, a_n, kind: Kind, location: complex, n: int, z) -> np.ndarray:
    """dR/dz + R A_n - A^mod_n R at z, with dR/dz from the rational entries."""
    z = complex(z)
    R = generator(system, kind, location, n)
    Amod = transformed_spectral_matrix(system, a_n, kind, location, n, z)
    Rz = R(z)
    return R.derivative(z) + Rz @ np.asarray(a_n(z), dtype=complex) - Amod @ Rz


# -- general determinant route


class Column(NamedTuple):
    """Column function z^e phi_m (``star`` False) or z^e phi*_m (``star`` True).

    Its partner in the associated-function rows is z^e xi_m or -z^e xi*_m,
    the pairing under which the recurrence acts on both columns of Y.
    """

    star: bool
    e: int
    m: int


def columns(n: int, counts: tuple, layout: str = "stable") -> list:
    """Column functions of the modification determinant at degree n.

    ``"printed"`` is the block layout z^{L-c} phi_{n-L*-L+c}, phi_{n-L*+c},
    z^{-c} phi_{n+c}, z^{-K*} phi_{n+K*+c}.  For n >= L + L* ``"stable"``
    spans the same space with z^{s-K*} phi*_{K*+n-L*-1-s} (s < K* + L) and
    z^L phi_{n-L-L*+t} (t <= K + L*); this basis stays independent when
    some r_m vanishes, where the printed one collapses.
    """
    K, Ks, L, Ls = counts
    if layout == "stable" and n >= L + Ls:
        a, ell = Ks + L, n - L - Ls
        out = [Column(True, s - Ks, a + ell - 1 - s) for s in range(a)]
        out += [Column(False, L, ell + t) for t in range(K + Ls + 1)]
        return out
    if layout not in ("stable", "printed"):
        raise ValueError(f"layout must be 'stable' or 'printed', got {layout!r}")
    out = [Column(False, L - c, n - Ls - L + c) for c in range(L)]
    out += [Column(False, 0, n - Ls + c) for c in range(Ls)]
    out += [Column(False, -c, n + c) for c in range(Ks + 1)]
    out += [Column(False, -Ks, n + Ks + c) for c in range(1, K + 1)]
    return out


def _poly_entry(system: BopsSystem, col: Column, x):
    f = system.phistar_at if col.star else system.phi_at
    return x**col.e * f(col.m, x)


def _assoc_entry(system: BopsSystem, col: Column, x):
    if col.star:
        return -(x**col.e) * system.xistar_at(col.m, x)
    return x**col.e * system.xi_at(col.m, x)


def _null_vector(rows: np.ndarray, context: str) -> np.ndarray:
    if rows.shape[0] == 0:
        return np.ones(1, dtype=complex)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0):
        raise DegeneracyError(f"{context}: a constraint row vanishes")
    _, s, vh = np.linalg.svd(rows / norms[:, None])
    if s[-1] < 1e-13 * s[0]:
        raise DegeneracyError(f"{context}: constraint rows are rank deficient (sigma ratio {s[-1] / s[0]:.1e})")
    return vh[-1].conj()


def _series_coef(system: BopsSystem, col: Column, p: int) -> complex:
    """[z^p] of the interior expansion of the associated partner of ``col``."""
    p -= col.e
    if col.m < 0:
        coeffs = system._negative_series(col.m)[int(col.star)]
        val = complex(coeffs[-p]) if 0 <= -p < coeffs.size else 0j
    else:
        ser = system.interior_series(col.m, "xis" if col.star else "xi")
        val = complex(ser[p]) if 0 <= p < ser.size else 0j
    return -val if col.star else val


def transpose_system(system: BopsSystem) -> BopsSystem:
    """System of the reflected weight w(1/z): the roles of phi and phibar swap."""
    if system.table is None:
        raise ShapeError("transposition needs the Fourier table")
    t = system.table
    table = type(t)(-t.k_max, -t.k_min, t.coeffs[::-1], t.tail_bound)
    neg = system.negative
    if neg is not None:
        neg = type(neg)(dict(neg.kappa), dict(neg.phibar0), dict(neg.phi0))
    return BopsSystem(
        system.n_max, system.I, system.kappa, system.phibar, system.phi, system.rbar, system.r,
        table=table, negative=neg, n_min=system.n_min,
    )


def transpose_shift(shift: CguShift) -> tuple:
    """Shift acting on w(1/z), and the constant c with w~(1/z) = c * w(1/z) * (monic shift)."""
    inv = lambda v: tuple(1.0 / x for x in v)
    t = CguShift(alphas=inv(shift.alpha_stars), alpha_stars=inv(shift.alphas),
                 betas=inv(shift.beta_stars), beta_stars=inv(shift.betas))
    c = np.prod([-a for a in shift.alphas + shift.alpha_stars]) / np.prod([-b for b in shift.betas + shift.beta_stars])
    return t, complex(c)


class _Route(NamedTuple):
    q: np.ndarray  # deflated polynomial, ascending, length n + 1
    u: np.ndarray  # cofactor vector
    cols: tuple
    lead: complex  # [z^{n+K+K*}] of the undeflated polynomial
    c_n: complex  # [z^n] of z^{L*} times the associated-function expansion


def _route(system: BopsSystem, shift: CguShift, n: int, layout: str) -> _Route:
    K, Ks, L, Ls = shift.counts
    ctx = f"n = {n}, shift counts {shift.counts}"
    cols = columns(n, shift.counts, layout)
    cons = [[_poly_entry(system, c, x) for c in cols] for x in shift.alphas + shift.alpha_stars]
    cons += [[_assoc_entry(system, c, x) for c in cols] for x in shift.betas + shift.beta_stars]
    u = _null_vector(np.array(cons, dtype=complex).reshape(-1, len(cols)), ctx)

    # z^{K*} sum_c u_c (column c) has degree n + K + K*
    D = np.zeros(n + K + Ks + 1, dtype=complex)
    for uc, col in zip(u, cols):
        if col.m >= 0:
            coef = system.phibar[col.m][::-1] if col.star else system.phi[col.m]
            sh = Ks + col.e
            D[sh:sh + col.m + 1] += uc * coef
    roots = shift.alphas + shift.alpha_stars
    q, rem = P.polydiv(D, P.polyfromroots(roots)) if roots else (D, np.zeros(1))
    if np.max(np.abs(rem)) > DEFLATE_TOL * max(1.0, np.max(np.abs(D))):
        raise ConsistencyError(f"{ctx}: determinant does not vanish at the numerator zeros")
    q = np.pad(q, (0, max(0, n + 1 - q.size)))[:n + 1]
    if abs(D[-1]) < 1e-300:
        raise DegeneracyError(f"{ctx}: leading coefficient of the determinant vanishes")
    c_n = sum(uc * _series_coef(system, col, n - Ls) for uc, col in zip(u, cols))
    if c_n == 0:
        raise DegeneracyError(f"{ctx}: [z^n] of the associated-function determinant vanishes")
    return _Route(q, u, tuple(cols), complex(D[-1]), complex(c_n))


def _assoc_sum(system: BopsSystem, shift: CguShift, route, z: complex) -> complex:
    """sum_c u_c (partner of column c)(z) / (prod (z - beta) prod (1 - beta*/z))."""
    total = sum(uc * _assoc_entry(system, col, z) for uc, col in zip(route.u, route.cols))
    den = np.prod([z - b for b in shift.betas]) * np.prod([1 - b / z for b in shift.beta_stars])
    return complex(total / den)


def _den_const(shift: CguShift) -> complex:
    return complex(np.prod([-b for b in shift.betas + shift.beta_stars]))


@dataclass(frozen=True)
class _Cofactors:
    route: _Route
    C: complex
    route_t: _Route
    C_t: complex


@dataclass(frozen=True, eq=False)
class TransformedSystem(BopsSystem):
    """System of the modified weight computed from the base system.

    xi_n uses the cofactors of the base system; xi*_n uses those of the
    reflected base system through xi*_n(z) = z^n xi^T_n(1/z).  No Fourier
    table of the modified weight is involved.
    """

    base: BopsSystem | None = None
    base_t: BopsSystem | None = None
    shift: CguShift | None = None
    shift_t: CguShift | None = None
    cofactors: tuple = ()
    ratio_residual: np.ndarray | None = None
    notes: tuple = ()
    stable_from: int = 0
    upper: "TransformedSystem | None" = None

    def _assoc(self, n, z, idx, margin):
        if n < 0:
            return super()._assoc(n, z, idx, margin)
        self._check(n)
        zarr = np.asarray(z, dtype=complex)
        out = np.array([self._assoc_point(n, complex(v), idx, margin) for v in np.atleast_1d(zarr)])
        return out[0] if zarr.ndim == 0 else out.reshape(zarr.shape)

    def _assoc_point(self, n: int, z: complex, idx: int, margin: float) -> complex:
        if abs(abs(z) - 1.0) <= margin:
            raise DomainError("associated functions are not defined on the unit circle")
        if z == 0:
            raise DomainError("evaluate the transformed associated functions away from z = 0")
        for b in self.shift.betas + self.shift.beta_stars:
            if abs(z - b) < GUARD:
                raise DomainError(f"z = {z} is within the guard band of a denominator zero")
        cf = self.cofactors[n]
        if cf is None:
            # degrees below the stable start come from the modified recurrence run backwards
            src, top = self.upper or self, self.stable_from
            y = np.array([src._assoc_point(top, z, 0, margin), -src._assoc_point(top, z, 1, margin)])
            for m in range(top - 1, n - 1, -1):
                y = recurrence_matrix(src, m, z, inverse=True) @ y
            return complex(y[0] if idx == 0 else -y[1])
        if idx == 0:
            return cf.C * _assoc_sum(self.base, self.shift, cf.route, z)
        return z**n * cf.C_t * _assoc_sum(self.base_t, self.shift_t, cf.route_t, 1.0 / z)


def transform_system(
    system: BopsSystem, shift: CguShift, n_max: int | None = None, layout: str = "stable"
) -> TransformedSystem:
    """Bi-orthogonal system of the weight modified by ``shift``.

    Degrees 0..n_max are produced, with n_max at most
    ``system.n_max - K - K*``.  With ``layout="printed"`` every degree comes
    from the block determinant, degrees below L + L* using the base system
    extended to negative degrees.  With ``layout="stable"`` degrees from
    L + L* on use the stable columns and lower degrees follow from the
    modified recurrence run backwards from degree L + L*; the printed
    columns collapse there for weights with vanishing r_m.

    Raises
    ------
    DegeneracyError
        If the constraint rows of some degree lose rank or the ratio formula
        degenerates.
    """
    if layout not in ("stable", "printed"):
        raise ValueError(f"layout must be 'stable' or 'printed', got {layout!r}")
    K, Ks, L, Ls = shift.counts
    top = system.n_max - K - Ks
    n_max = top if n_max is None else n_max
    if n_max < 0 or n_max > top:
        raise ShapeError(f"n_max must lie in [0, {top}] for this shift and base depth")
    start = L + Ls if layout == "stable" and L + Ls <= top else 0
    if start == 0 and L + Ls:
        # with phi_{-N}(0) = 0 the negative-degree partners collapse onto one power of z
        depth = range(-(L + Ls), 0)
        ext = NegativeExtension(phi0={m: 1.0 for m in depth}, phibar0={m: 1.0 for m in depth})
        system = extend_negative(system, -(L + Ls), ext)
    sys_t = transpose_system(system)
    shift_t, c_t = transpose_shift(shift)
    dc, dc_t = _den_const(shift), _den_const(shift_t)

    hi = max(n_max, start)
    phi, phibar, cofs = [None] * (hi + 1), [None] * (hi + 1), [None] * (hi + 1)
    kappa = np.empty(hi + 1, dtype=complex)
    ratio_res = np.full(hi + 1, np.nan)
    for n in range(start, hi + 1):
        a = _route(system, shift, n, layout)
        b = _route(sys_t, shift_t, n, layout)
        kn = principal_sqrt(2 * a.lead * dc / a.c_n)
        C, C_t = kn / a.lead, kn / b.lead
        kappa[n] = kn
        phi[n] = C * a.q
        phibar[n] = C_t * b.q
        # the reflected route must give [z^n] Xi^T_n = 2 / K_n on its own
        xi_t_n = c_t * C_t * b.c_n / dc_t
        ratio_res[n] = abs(kn * xi_t_n / 2 - 1)
        cofs[n] = _Cofactors(a, complex(C), b, complex(c_t * C_t))
    for n in range(start - 1, -1, -1):
        k1, p, pb = kappa[n + 1], phi[n + 1][0], phibar[n + 1][0]
        kn = principal_sqrt(k1 * k1 - p * pb)
        if abs(kn) < 1e-300:
            raise DegeneracyError(f"backward recurrence meets kappa_{n} = 0")
        up, up_s = phi[n + 1], phibar[n + 1][::-1]
        low = (k1 * up - p * up_s) / kn
        low_s = (k1 * up_s - pb * up) / kn
        kappa[n] = kn
        phi[n] = low[1:]
        phibar[n] = low_s[:n + 1][::-1]

    I = np.empty(hi + 2, dtype=complex)
    I[0] = 1.0
    for n in range(hi + 1):
        I[n + 1] = I[n] / kappa[n] ** 2
    r = np.array([p[0] for p in phi]) / kappa
    rbar = np.array([p[0] for p in phibar]) / kappa
    full = TransformedSystem(
        hi, I, kappa, phi, phibar, r, rbar,
        table=None, base=system, base_t=sys_t, shift=shift, shift_t=shift_t,
        cofactors=tuple(cofs), ratio_residual=ratio_res,
        notes=_generic_notes(r, rbar), stable_from=start,
    )
    if hi == n_max:
        return full
    # keep the degrees above n_max that the backward recurrence starts from
    return replace(
        full, n_max=n_max, I=I[:n_max + 2], kappa=kappa[:n_max + 1], phi=phi[:n_max + 1],
        phibar=phibar[:n_max + 1], r=r[:n_max + 1], rbar=rbar[:n_max + 1],
        cofactors=tuple(cofs[:n_max + 1]), ratio_residual=ratio_res[:n_max + 1],
        notes=_generic_notes(r[:n_max + 1], rbar[:n_max + 1]), upper=full, _cache={},
    )


def _generic_notes(r, rbar) -> tuple:
    prod = np.asarray(r) * np.asarray(rbar)
    out = []
    for n, v in enumerate(prod[1:], start=1):
        if abs(v) < 1e-12:
            out.append(f"r_{n} rbar_{n} = 0")
        elif abs(1 - v) < 1e-10:
            out.append(f"r_{n} rbar_{n} = 1")
    return tuple(out)
