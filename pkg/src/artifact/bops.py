"""Bi-orthogonal polynomial systems on the unit circle.

Given Fourier coefficients w_k of a (generally complex) weight, the pair
phi_n, phibar_n is fixed by

    int w(zeta) phi_n(zeta) zeta^{-m}      = delta_{mn} / kappa_n,   m <= n,
    int w(zeta) zeta^m phibar_n(1/zeta)    = delta_{mn} / kappa_n,   m <= n,

with kappa_n^2 = I_n / I_{n+1} and I_n the n x n Toeplitz determinant.
Each degree costs one LU factorisation of the (n+1) x (n+1) Toeplitz block,
shared by the two coefficient solves.  The associated functions xi_n,
xi*_n are Cauchy transforms of the polynomials, summed from the kernel
series on either side of the circle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import Polynomial

from .errors import DegeneracyError, DomainError, ExistenceError, InapplicableError, ShapeError
from .weight import CIRCLE_MARGIN, FourierTable, WeightSpec, evaluate_weight, transform_series

__all__ = [
    "principal_sqrt",
    "EXISTENCE_RATIO",
    "NegativeExtension",
    "BopsSystem",
    "YEval",
    "Associated",
    "Casoratians",
    "toeplitz_matrix",
    "toeplitz_det",
    "build_system",
    "reciprocal",
    "associated",
    "y_matrix",
    "recurrence_matrix",
    "recurrence_step",
    "second_order_residual",
    "casoratian_residuals",
    "expansion_residuals",
    "orthogonality_residual",
    "extend_negative",
    "system_to_records",
]

EXISTENCE_RATIO = 1e-13
CUT_RTOL = 1e-12


def principal_sqrt(x) -> complex:
    """Principal square root, stable for arguments on the negative real axis.

    A negative real argument carrying a roundoff-sized imaginary part of
    either sign yields the root with positive imaginary part.
    """
    x = complex(x)
    r = np.sqrt(x)
    if x.real < 0 and abs(x.imag) <= CUT_RTOL * abs(x) and r.imag < 0:
        r = -r
    return complex(r)


def toeplitz_matrix(table: FourierTable, n: int, cols: int | None = None) -> np.ndarray:
    """Matrix [w_{j-k}] with j = 0..n-1 and k = 0..cols-1."""
    cols = n if cols is None else cols
    need = max(n - 1, cols - 1, 0)
    if table.k_max < need or table.k_min > -need:
        raise ShapeError(f"Fourier table covers [{table.k_min}, {table.k_max}], need |k| <= {need}")
    j = np.arange(n)[:, None]
    k = np.arange(cols)[None, :]
    return np.asarray(table[j - k], dtype=complex).reshape(n, cols)


def _lu_det(lu: np.ndarray, piv: np.ndarray) -> complex:
    sign = (-1) ** int(np.sum(piv != np.arange(piv.size)))
    return complex(sign * np.prod(np.diag(lu)))


def toeplitz_det(table: FourierTable, n: int) -> complex:
    """Toeplitz determinant I_n = det[w_{j-k}], with I_0 = 1."""
    if n < 0:
        raise ShapeError("toeplitz_det needs n >= 0")
    if n == 0:
        return 1.0 + 0j
    return _lu_det(*sla.lu_factor(toeplitz_matrix(table, n)))


@dataclass(frozen=True)
class NegativeExtension:
    """Choices for the coefficients carried by negative degrees.

    Missing entries default to kappa_{-N} = 1 and phi_{-N}(0) = phibar_{-N}(0) = 0.
    """

    kappa: dict = field(default_factory=dict)
    phi0: dict = field(default_factory=dict)
    phibar0: dict = field(default_factory=dict)

    def kappa_at(self, n: int) -> complex:
        k = complex(self.kappa.get(n, 1.0))
        if k == 0:
            raise DegeneracyError(f"kappa_{n} chosen as zero")
        return k


class Associated(NamedTuple):
    xi: complex
    xi_star: complex


class Casoratians(NamedTuple):
    c1: complex
    c2: complex
    c3: complex


@dataclass(frozen=True, eq=False)
class BopsSystem:
    """Per-degree data of a bi-orthogonal system, n = 0..n_max.

    Attributes
    ----------
    I : ndarray
        Toeplitz determinants I_0..I_{n_max+1}.
    kappa, r, rbar : ndarray
        Leading coefficients and r-coefficients for n = 0..n_max.
    phi, phibar : list of ndarray
        Ascending coefficients of phi_n and phibar_n.
    table : FourierTable or None
        Source data for the associated functions.
    n_min : int
        Lowest degree with defined data (negative after ``extend_negative``).
    """

    n_max: int
    I: np.ndarray
    kappa: np.ndarray
    phi: list
    phibar: list
    r: np.ndarray
    rbar: np.ndarray
    table: FourierTable | None = None
    negative: NegativeExtension | None = None
    n_min: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- coefficient access, valid for negative degrees after extension

    def _check(self, n: int):
        if n > self.n_max or n < self.n_min:
            raise ShapeError(f"degree {n} outside [{self.n_min}, {self.n_max}]")

    def kappa_at(self, n: int) -> complex:
        self._check(n)
        if n < 0:
            return self.negative.kappa_at(n)
        return complex(self.kappa[n])

    def phi0(self, n: int) -> complex:
        """phi_n(0)."""
        self._check(n)
        if n < 0:
            return complex(self.negative.phi0.get(n, 0.0))
        return complex(self.phi[n][0])

    def phibar0(self, n: int) -> complex:
        """phibar_n(0)."""
        self._check(n)
        if n < 0:
            return complex(self.negative.phibar0.get(n, 0.0))
        return complex(self.phibar[n][0])

    def lam(self, n: int) -> complex:
        """Subleading coefficient lambda_n of phi_n."""
        return complex(self.phi[n][n - 1]) if n >= 1 else 0j

    def lambar(self, n: int) -> complex:
        return complex(self.phibar[n][n - 1]) if n >= 1 else 0j

    def mu(self, n: int) -> complex:
        return complex(self.phi[n][n - 2]) if n >= 2 else 0j

    def mubar(self, n: int) -> complex:
        return complex(self.phibar[n][n - 2]) if n >= 2 else 0j

    def phi_poly(self, n: int) -> Polynomial:
        self._check(n)
        if n < 0:
            return Polynomial([0j])
        return Polynomial(self.phi[n])

    def phibar_poly(self, n: int) -> Polynomial:
        self._check(n)
        if n < 0:
            return Polynomial([0j])
        return Polynomial(self.phibar[n])

    def phistar_poly(self, n: int) -> Polynomial:
        if n < 0:
            return Polynomial([0j])
        return reciprocal(self.phibar_poly(n), n)

    # -- evaluations

    def phi_at(self, n: int, z):
        self._check(n)
        z = np.asarray(z, dtype=complex)
        if n < 0:
            return np.zeros_like(z)[()]
        return np.polynomial.polynomial.polyval(z, self.phi[n])

    def phistar_at(self, n: int, z):
        self._check(n)
        z = np.asarray(z, dtype=complex)
        if n < 0:
            return np.zeros_like(z)[()]
        return np.polynomial.polynomial.polyval(z, self.phibar[n][::-1])

    def _series(self, n: int, which: str):
        key = (n, which)
        if key not in self._cache:
            if self.table is None:
                raise ShapeError("system carries no Fourier table; associated functions unavailable")
            if which == "xi":
                t_in, t_out = transform_series(self.table, self.phi[n], 0)
                if n == 0:
                    # initial value xi_0 = kappa_0 (w_0 + F); the kernel integral alone gives kappa_0 F
                    shift = self.kappa[0] * self.table[0]
                    t_in[0] += shift
                    t_out[0] -= shift
            else:
                # xi*_n = 1/kappa_n - transform of phi*_n
                t_in, t_out = transform_series(self.table, self.phibar[n][::-1], 0)
                t_in, t_out = -t_in, -t_out
                t_in[0] += 1.0 / self.kappa[n]
                t_out[0] -= 1.0 / self.kappa[n]
            self._cache[key] = (t_in, t_out)
        return self._cache[key]

    def _negative_series(self, n: int):
        """Coefficients in powers of 1/z of xi_n and xi*_n for n < 0."""
        key = (n, "negative")
        if key not in self._cache:
            k1 = self.negative.kappa_at(-1)
            xi = np.array([0.0, 2.0 / k1], dtype=complex)
            xs = np.array([2.0 / k1], dtype=complex)
            for m in range(-2, n - 1, -1):
                km, kp = self.negative.kappa_at(m), self.kappa_at(m + 1)
                p0, pb0 = self.phi0(m + 1), self.phibar0(m + 1)
                size = max(xi.size, xs.size) + 1
                new_xi = np.zeros(size, dtype=complex)
                new_xs = np.zeros(size, dtype=complex)
                new_xi[1:xi.size + 1] += kp * xi
                new_xi[1:xs.size + 1] += p0 * xs
                new_xs[:xi.size] += pb0 * xi
                new_xs[:xs.size] += kp * xs
                xi, xs = new_xi / km, new_xs / km
            self._cache[key] = (xi, xs)
        return self._cache[key]

    def xi_at(self, n: int, z, margin: float = CIRCLE_MARGIN):
        return self._assoc(n, z, 0, margin)

    def xistar_at(self, n: int, z, margin: float = CIRCLE_MARGIN):
        return self._assoc(n, z, 1, margin)

    def _assoc(self, n, z, idx, margin):
        self._check(n)
        z = np.asarray(z, dtype=complex)
        if n < 0:
            coeffs = self._negative_series(n)[idx]
            out = np.polynomial.polynomial.polyval(1.0 / z, coeffs)
            return out[()] if np.ndim(out) == 0 else out
        if np.any(np.abs(np.abs(z) - 1.0) <= margin):
            raise DomainError("associated functions are not defined on the unit circle")
        t_in, t_out = self._series(n, "xi" if idx == 0 else "xis")
        zz = np.atleast_1d(z)
        inside = np.abs(zz) < 1.0
        out = np.empty_like(zz)
        out[inside] = np.polynomial.polynomial.polyval(zz[inside], t_in)
        out[~inside] = -np.polynomial.polynomial.polyval(1.0 / zz[~inside], t_out)
        return out[0] if np.ndim(z) == 0 else out

    def interior_series(self, n: int, which: str = "xi") -> np.ndarray:
        """Taylor coefficients at z = 0 of xi_n (``"xi"``) or xi*_n (``"xis"``)."""
        return self._series(n, which)[0]

    def exterior_series(self, n: int, which: str = "xi") -> np.ndarray:
        """Coefficients c_m with the function equal to sum c_m z^{-m} for |z| > 1."""
        return -self._series(n, which)[1]


def build_system(table: FourierTable, n_max: int, tol: float = 1e-12) -> BopsSystem:
    """Construct the bi-orthogonal system up to degree ``n_max``.

    Raises
    ------
    ExistenceError
        If some |I_n| falls below ``EXISTENCE_RATIO * max(1, |I_{n-1}|)``.
    """
    if n_max < 0:
        raise ShapeError("n_max must be nonnegative")
    I = np.empty(n_max + 2, dtype=complex)
    I[0] = 1.0
    kappa = np.empty(n_max + 1, dtype=complex)
    phi, phibar = [], []
    T_full = toeplitz_matrix(table, n_max + 1)
    for n in range(1, n_max + 2):
        T = T_full[:n, :n]
        with warnings.catch_warnings():
            # a singular block is reported below as an existence error
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(T)
        I[n] = _lu_det(lu, piv)
        if not abs(I[n]) > EXISTENCE_RATIO * max(1.0, abs(I[n - 1])):
            raise ExistenceError(f"Toeplitz determinant I_{n} = {I[n]:.3e} vanishes; system does not exist at n = {n - 1}")
        m = n - 1
        kappa[m] = principal_sqrt(I[m] / I[n])
        e = np.zeros(n, dtype=complex)
        e[-1] = 1.0 / kappa[m]
        # T c = e / kappa  and  T^T d = e / kappa
        phi.append(sla.lu_solve((lu, piv), e))
        phibar.append(sla.lu_solve((lu, piv), e, trans=1))
    r = np.array([p[0] for p in phi]) / kappa
    rbar = np.array([p[0] for p in phibar]) / kappa
    return BopsSystem(n_max, I, kappa, phi, phibar, r, rbar, table)


def reciprocal(p: Polynomial, n: int) -> Polynomial:
    """Degree-n reciprocal z^n p(1/z) (coefficient reversal, no conjugation)."""
    c = np.trim_zeros(np.asarray(p.coef, dtype=complex), "b")
    if c.size - 1 > n:
        raise ShapeError(f"degree {c.size - 1} exceeds reciprocal frame {n}")
    out = np.zeros(n + 1, dtype=complex)
    out[:c.size] = c
    return Polynomial(out[::-1])


def associated(system: BopsSystem, n: int, z, check: bool = False, tol: float = 1e-10) -> Associated:
    """Associated functions xi_n(z) and xi*_n(z).

    With ``check`` the second definition of xi*_n, as -z^n times the
    transform of phibar_n(1/zeta), is evaluated and compared.
    """
    xi = system.xi_at(n, z)
    xs = system.xistar_at(n, z)
    if check and n >= 0:
        alt = alt_xi_star(system, n, z)
        scale = max(1.0, float(np.max(np.abs(xs))))
        if np.max(np.abs(alt - xs)) > tol * scale:
            raise DegeneracyError(f"the two definitions of xi*_{n} disagree by {np.max(np.abs(alt - xs)):.2e}")
    return Associated(xi, xs)


def alt_xi_star(system: BopsSystem, n: int, z):
    """xi*_n(z) = -z^n int (zeta+z)/(zeta-z) w(zeta) phibar_n(1/zeta)."""
    from .weight import cauchy_transform

    z = np.asarray(z, dtype=complex)
    # phibar_n(1/zeta) = sum d_j zeta^{-j}
    coeffs = system.phibar[n][::-1]
    out = -(z ** n) * cauchy_transform(system.table, coeffs, -n, z)
    if n == 0:
        # the kernel integral misses the constant of the initial value kappa_0 (w_0 - F)
        out = out + system.kappa[0] * system.table[0]
    return out


@dataclass(frozen=True)
class YEval:
    """Y_n(z) = [[phi_n, xi_n/w], [phi*_n, -xi*_n/w]] at one point."""

    entries: np.ndarray
    n: int
    z: complex
    w: complex
    region: Literal["interior", "exterior"]

    def det_residual(self) -> float:
        return abs(np.linalg.det(self.entries) + 2 * self.z ** self.n / self.w)


def y_matrix(system: BopsSystem, spec: WeightSpec, n: int, z: complex, w: complex | None = None) -> YEval:
    """Assemble Y_n(z) from polynomials, associated functions and w(z)."""
    z = complex(z)
    w = complex(evaluate_weight(spec, z)) if w is None else complex(w)
    if w == 0:
        raise DomainError("weight vanishes at z")
    xi, xs = system.xi_at(n, z), system.xistar_at(n, z)
    Y = np.array([[system.phi_at(n, z), xi / w], [system.phistar_at(n, z), -xs / w]], dtype=complex)
    return YEval(Y, n, z, w, "interior" if abs(z) < 1 else "exterior")


def recurrence_matrix(system: BopsSystem, n: int, z, inverse: bool = False) -> np.ndarray:
    """K_n(z) mapping Y_n to Y_{n+1}, or its inverse."""
    k0, k1 = system.kappa_at(n), system.kappa_at(n + 1)
    if k0 == 0:
        raise DegeneracyError(f"kappa_{n} vanishes")
    p, pb = system.phi0(n + 1), system.phibar0(n + 1)
    z = complex(z)
    if inverse:
        if z == 0:
            raise DomainError("inverse recurrence is singular at z = 0")
        return np.array([[k1 / z, -p / z], [-pb, k1]]) / k0
    return np.array([[k1 * z, p], [pb * z, k1]]) / k0


def recurrence_step(
    system: BopsSystem, n: int, direction: str, y: YEval, tol: float = 1e-9
) -> YEval:
    """Advance Y_n to Y_{n+1} (``"forward"``) or back to Y_{n-1} (``"backward"``)."""
    if y.n != n:
        raise ShapeError(f"YEval holds degree {y.n}, step requested from {n}")
    if direction == "forward":
        m = n + 1
        out = recurrence_matrix(system, n, y.z) @ y.entries
    elif direction == "backward":
        m = n - 1
        out = recurrence_matrix(system, n - 1, y.z, inverse=True) @ y.entries
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    res = YEval(out, m, y.z, y.w, y.region)
    scale = max(1.0, abs(2 * y.z ** m / y.w))
    if m >= 0 and res.det_residual() > tol * scale:
        raise DegeneracyError(f"det Y_{m} check failed after recurrence step ({res.det_residual():.2e})")
    return res


def second_order_residual(system: BopsSystem, n: int, z) -> complex:
    """Residual of the decoupled three-term recurrence for phi_n / kappa_n."""
    if not 1 <= n <= system.n_max - 1:
        raise ShapeError("second order recurrence needs 1 <= n <= n_max - 1")
    rn = system.r[n]
    if abs(rn) < 1e-14:
        raise InapplicableError(f"r_{n} vanishes; the decoupled recurrence divides by it")
    q = system.r[n + 1] / rn
    v = [system.phi_at(m, z) / system.kappa[m] for m in (n - 1, n, n + 1)]
    return v[2] - q * v[1] - z * (v[1] - q * (1 - rn * system.rbar[n]) * v[0])


def casoratian_residuals(system: BopsSystem, n: int, z) -> Casoratians:
    """Residuals of the three Casoratian identities at degree n."""
    z = complex(z)
    p0, p1 = system.phi_at(n, z), system.phi_at(n + 1, z)
    s0, s1 = system.phistar_at(n, z), system.phistar_at(n + 1, z)
    x0, x1 = system.xi_at(n, z), system.xi_at(n + 1, z)
    y0, y1 = system.xistar_at(n, z), system.xistar_at(n + 1, z)
    k = system.kappa_at(n)
    c1 = p1 * x0 - x1 * p0 - 2 * system.phi0(n + 1) / k * z ** n
    c2 = s1 * y0 - y1 * s0 - 2 * system.phibar0(n + 1) / k * z ** (n + 1)
    c3 = p0 * y0 + x0 * s0 - 2 * z ** n
    return Casoratians(complex(c1), complex(c2), complex(c3))


def expansion_residuals(system: BopsSystem, n: int) -> dict:
    """Leading expansion coefficients against their closed forms in kappa, lambda, mu.

    Interior: phi_n through z^2, phi*_n through z^2, (kappa_n/2) xi_n
    through z^{n+2} and (kappa_n/2) xi*_n through z^{n+3}.  Exterior:
    phi*_n through z^{n-2} and both associated functions through z^{-2}.
    Needs 2 <= n and degree n + 3 in the system.
    """
    if n < 2 or n + 3 > system.n_max:
        raise ShapeError(f"expansion checks need 2 <= n <= n_max - 3, got n = {n}")
    k, l, lb, mu, mb = system.kappa_at, system.lam, system.lambar, system.mu, system.mubar
    p0, pb0 = system.phi0, system.phibar0
    phi, ps = system.phi[n], system.phibar[n][::-1]
    xi = system.interior_series(n, "xi") * k(n) / 2
    xs = system.interior_series(n, "xis") * k(n) / 2
    xe = system.exterior_series(n, "xi") * k(n) / 2
    xse = system.exterior_series(n, "xis") * k(n) / 2
    c1, c2 = pb0(n + 1) / k(n + 1), pb0(n + 2) / k(n + 2)
    out = {
        "phi-1": phi[1] - (k(n) * p0(n - 1) + p0(n) * lb(n - 1)) / k(n - 1),
        "phi-2": phi[2]
        - k(n) / (k(n - 1) * k(n - 2)) * (k(n - 1) * p0(n - 2) + p0(n - 1) * lb(n - 2))
        - p0(n) * mb(n - 1) / k(n - 1),
        "phistar-0": ps[0] - k(n),
        "phistar-1": ps[1] - lb(n),
        "phistar-2": ps[2] - mb(n),
        "phistar-ext-1": ps[n - 1] - (k(n) * pb0(n - 1) + pb0(n) * l(n - 1)) / k(n - 1),
        "phistar-ext-2": ps[n - 2]
        - k(n) / (k(n - 1) * k(n - 2)) * (k(n - 1) * pb0(n - 2) + pb0(n - 1) * l(n - 2))
        - pb0(n) * mu(n - 1) / k(n - 1),
        "xi-0": xi[n] - 1,
        "xi-1": xi[n + 1] + lb(n + 1) / k(n + 1),
        "xi-2": xi[n + 2] - lb(n + 1) * lb(n + 2) / (k(n + 1) * k(n + 2)) + mb(n + 2) / k(n + 2),
        "xistar-1": xs[n + 1] - c1,
        "xistar-2": xs[n + 2] - c2 + c1 * lb(n + 2) / k(n + 2),
        "xistar-3": xs[n + 3]
        - pb0(n + 3) / k(n + 3)
        + c1 * mb(n + 3) / k(n + 3)
        - lb(n + 3) / k(n + 3) * (c1 * lb(n + 2) / k(n + 2) - c2),
        "xi-ext-1": xe[1] - p0(n + 1) / k(n + 1),
        "xi-ext-2": xe[2] - (k(n) / k(n + 1)) ** 2 * p0(n + 2) / k(n + 2) + p0(n + 1) * l(n + 1) / k(n + 1) ** 2,
        "xistar-ext-0": xse[0] - 1,
        "xistar-ext-1": xse[1] + l(n + 1) / k(n + 1),
        "xistar-ext-2": xse[2] - l(n + 2) * l(n + 1) / (k(n + 2) * k(n + 1)) + mu(n + 2) / k(n + 2),
    }
    return {key: complex(v) for key, v in out.items()}


def orthogonality_residual(system: BopsSystem, m_max: int | None = None) -> float:
    """max |<phi_m, phibar_n> - delta_{mn}| over m, n <= m_max.

    The pairing is the integral of w(zeta) phi_m(zeta) phibar_n(1/zeta),
    i.e. a^T [w_{k-j}] b for the coefficient vectors a, b.
    """
    m_max = system.n_max if m_max is None else m_max
    size = m_max + 1
    A = np.zeros((size, size), dtype=complex)
    B = np.zeros((size, size), dtype=complex)
    for m in range(size):
        A[m, : m + 1] = system.phi[m]
        B[m, : m + 1] = system.phibar[m]
    T = toeplitz_matrix(system.table, size).T
    return float(np.max(np.abs(A @ T @ B.T - np.eye(size))))


def extend_negative(system: BopsSystem, n_min: int, ext: NegativeExtension | None = None) -> BopsSystem:
    """Give meaning to degrees n_min..-1 through the backward recurrence.

    Polynomials of negative degree vanish; the associated functions become
    terminating series in 1/z seeded by (kappa_{-1}/2) xi_{-1} = 1/z and
    (kappa_{-1}/2) xi*_{-1} = 1.
    """
    if n_min >= 0:
        raise ShapeError("extend_negative needs a negative n_min")
    ext = ext or system.negative or NegativeExtension()
    for m in range(n_min, 0):
        ext.kappa_at(m)
    return replace(system, negative=ext, n_min=min(n_min, system.n_min), _cache={})


def _cpair(x) -> list:
    x = complex(x)
    return [float(x.real), float(x.imag)]


def system_to_records(system: BopsSystem) -> list[dict]:
    """Per-degree JSON-ready records."""
    return [
        {
            "n": n,
            "I": _cpair(system.I[n]),
            "kappa": _cpair(system.kappa[n]),
            "r": _cpair(system.r[n]),
            "rbar": _cpair(system.rbar[n]),
            "phi": [_cpair(c) for c in system.phi[n]],
            "phibar": [_cpair(c) for c in system.phibar[n]],
        }
        for n in range(system.n_max + 1)
    ]
