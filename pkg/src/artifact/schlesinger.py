"""Unit shifts of the exponents of a regular semi-classical weight.

Multiplying w by (z - z_j)^{+-1} moves rho_j by one.  Since z_j is a
singular point of the spectral matrix, these are the Schlesinger
transformations of the isomonodromic system: Y_n(rho_j +- 1) = R^{j+-}_n Y_n
with R^{j+} rational with a simple pole at z_j and R^{j-} linear in z.

The module provides the matrices and their inverses, the shifted
coefficients in evaluation form and in terms of the bilinear quantities
Theta, Omega, the shifted evaluations at the singular points, the shifted
residue matrices, and residuals of the compatibility conditions with the
recurrence, the spectral derivative and the deformation derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .bops import BopsSystem, principal_sqrt, recurrence_matrix
from .cgu import GeneratorMatrix, _ensure_negative, _poly, transform_system, CguShift
from .errors import ConsistencyError, DegeneracyError, InapplicableError, ShapeError
from .semiclassical import (
    ResidueSet,
    SemiClassicalData,
    Singularity,
    bilinear_products,
    deformation_matrix,
    perturb,
    point_values,
    rebuild,
    residue_set,
    spectral_matrix,
)
from .weight import WeightSpec, modify_weight

__all__ = [
    "ExponentShift",
    "SchlesingerMatrix",
    "ShiftedCoeffs",
    "ShiftedEvaluations",
    "Compatibility",
    "Commutation",
    "shift_data",
    "shifted_spec",
    "shifted_system",
    "schlesinger_matrix",
    "schlesinger_inverse",
    "shifted_coeffs",
    "shifted_evaluations",
    "transfer_sum",
    "transformed_residues",
    "compatibility_residuals",
    "double_shift_kappa_sq",
    "commutativity_residual",
]

HYPOTHESIS_TOL = 1e-13
FORMS_TOL = 1e-8


# -- exponent bookkeeping


@dataclass(frozen=True)
class ExponentShift:
    """Integer shifts of rho_0..rho_M together with a shift of n.

    The origin shift is carried by the monomial factor z^m so that the
    weight stays single valued.
    """

    shifts: tuple
    n_shift: int = 0

    def __post_init__(self):
        vals = []
        for s in self.shifts:
            if isinstance(s, bool) or int(s) != s:
                raise ShapeError(f"exponent shifts must be integers, got {s!r}")
            vals.append(int(s))
        object.__setattr__(self, "shifts", tuple(vals))
        if int(self.n_shift) != self.n_shift:
            raise ShapeError("n_shift must be an integer")
        object.__setattr__(self, "n_shift", int(self.n_shift))

    @classmethod
    def single(cls, M: int, j: int, direction: int) -> "ExponentShift":
        if direction not in (1, -1):
            raise ShapeError(f"direction must be +1 or -1, got {direction!r}")
        if not 0 <= j <= M:
            raise ShapeError(f"singularity index {j} outside 0..{M}")
        s = [0] * (M + 1)
        s[j] = direction
        return cls(tuple(s))

    @classmethod
    def from_request(cls, request, M: int) -> "ExponentShift":
        """Parse {"j": .., "direction": ..} or a list of such objects."""
        items = request if isinstance(request, list) else [request]
        s = [0] * (M + 1)
        try:
            for item in items:
                j, d = int(item["j"]), int(item["direction"])
                if d not in (1, -1) or not 0 <= j <= M:
                    raise ShapeError(f"bad shift request {item!r}")
                s[j] += d
        except (KeyError, TypeError, ValueError) as exc:
            raise ShapeError(f"malformed shift request: {exc}") from exc
        return cls(tuple(s))

    def theta_shift(self) -> dict:
        """Increments of theta_0, theta_j and theta_inf.

        theta_0 = n - rho_0, theta_j = -rho_j, theta_inf = n + sum rho.
        """
        out = {0: self.n_shift - self.shifts[0]}
        out.update({j: -s for j, s in enumerate(self.shifts) if j >= 1})
        out["inf"] = self.n_shift + sum(self.shifts)
        return out

    def to_dict(self) -> dict:
        return {"shifts": list(self.shifts), "n_shift": self.n_shift}


def shift_data(data: SemiClassicalData, shifts) -> SemiClassicalData:
    """Semi-classical data with rho_j moved by ``shifts[j]``."""
    shifts = tuple(shifts)
    if len(shifts) != data.M + 1:
        raise ShapeError(f"expected {data.M + 1} shifts, got {len(shifts)}")
    sing = tuple(Singularity(s.z, s.rho + d) for s, d in zip(data.singularities, shifts))
    out = replace(data, singularities=sing, warnings=())
    return replace(out, warnings=tuple(out._generic_warnings()))


def shifted_spec(spec: WeightSpec, data: SemiClassicalData, shifts) -> WeightSpec:
    """The weight with rho_j raised by ``shifts[j]`` (one linear factor at a time).

    Raises
    ------
    InputError
        If a resulting exponent is inadmissible.
    """
    shifts = tuple(shifts)
    if len(shifts) != data.M + 1:
        raise ShapeError(f"expected {data.M + 1} shifts, got {len(shifts)}")
    out = spec
    for z, d in zip(data.zs, shifts):
        for _ in range(abs(int(d))):
            out = modify_weight(out, alphas=[z]) if d > 0 else modify_weight(out, betas=[z])
    return out


def shifted_system(system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n_max: int | None = None):
    """(system, data) after rho_j -> rho_j + direction, from the base system alone."""
    z = _location(data, j)
    shift = CguShift(alphas=[z]) if direction == 1 else CguShift(betas=[z])
    return transform_system(system, shift, n_max), shift_data(data, ExponentShift.single(data.M, j, direction).shifts)


# -- matrices


@dataclass(frozen=True)
class SchlesingerMatrix(GeneratorMatrix):
    """Generator of rho_j -> rho_j + direction."""

    j: int = 0
    direction: int = 1


def _location(data: SemiClassicalData, j: int) -> complex:
    if not 1 <= j <= data.M:
        raise InapplicableError(f"Schlesinger matrices act at z_1..z_M (z_j != 0), got j = {j}")
    return complex(data.zs[j])


def _check_direction(direction: int):
    if direction not in (1, -1):
        raise ShapeError(f"direction must be +1 or -1, got {direction!r}")


class _Vals(NamedTuple):
    k0: complex  # kappa_n (up) or kappa_{n-1} (down)
    k1: complex  # kappa_{n+1} (up) or kappa_n (down)
    a: complex  # phi_n(z_j) or xi*_n(z_j)
    b: complex  # phi_{n+1}(z_j) or xi*_{n-1}(z_j)
    c: complex  # phi*_n(z_j) or xi_n(z_j)
    d: complex  # 0 or xi_{n-1}(z_j)


def _values(system: BopsSystem, z: complex, direction: int, n: int) -> _Vals:
    if direction == 1:
        if n < 0 or n + 1 > system.n_max:
            raise ShapeError(f"up shift at n = {n} needs degrees up to {n + 1}")
        v = _Vals(system.kappa_at(n), system.kappa_at(n + 1), complex(system.phi_at(n, z)),
                  complex(system.phi_at(n + 1, z)), complex(system.phistar_at(n, z)), 0j)
        if not abs(v.a) > HYPOTHESIS_TOL * abs(v.k0) * max(1.0, abs(z)) ** n:
            raise DegeneracyError(f"phi_{n}(z_j) vanishes at z_j = {z}; the up shift is undefined")
        return v
    if n < 0 or n > system.n_max:
        raise ShapeError(f"down shift at n = {n} outside [0, {system.n_max}]")
    s = _ensure_negative(system, n - 1)
    v = _Vals(s.kappa_at(n - 1), s.kappa_at(n), complex(s.xistar_at(n, z)), complex(s.xistar_at(n - 1, z)),
              complex(s.xi_at(n, z)), complex(s.xi_at(n - 1, z)))
    if not abs(v.a) > HYPOTHESIS_TOL / abs(v.k1):
        raise DegeneracyError(f"xi*_{n}(z_j) vanishes at z_j = {z}; the down shift is undefined")
    return v


def _phibar0(system: BopsSystem, n: int) -> complex:
    return _ensure_negative(system, n).phibar0(n) if n < 0 else system.phibar0(n)


def schlesinger_matrix(system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n: int) -> SchlesingerMatrix:
    """R^{j+}_n (``direction=1``) or R^{j-}_n (``direction=-1``).

    Raises
    ------
    DegeneracyError
        If phi_n(z_j) = 0 for the up shift or xi*_n(z_j) = 0 for the down shift.
    """
    _check_direction(direction)
    z = _location(data, j)
    v = _values(system, z, direction, n)
    kp = principal_sqrt(shifted_coeffs(system, data, j, direction, n, forms=False).kappa_sq)
    if direction == 1:
        s = kp / v.k0
        num = ((_poly(-v.k0 * v.b / (v.k1 * v.a), 1), _poly(system.phi0(n + 1) / v.k1)),
               (_poly(0, v.c / v.a), _poly(-z)))
        den = _poly(-z, 1)
    else:
        s = kp / v.k1
        q = v.k1 * v.a / (v.k0 * v.b)
        num = ((_poly(q), _poly(v.k1 * v.c / (v.k0 * v.b))),
               (_poly(0, _phibar0(system, n) * v.a / (v.k0 * v.b * z)), _poly(1, -q / z)))
        den = _poly(1)
    num = tuple(tuple(e * s for e in row) for row in num)
    return SchlesingerMatrix(num, den, "R+" if direction == 1 else "R-", z, n, j, direction)


def schlesinger_inverse(system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n: int) -> SchlesingerMatrix:
    """Closed-form inverse of R^{j+-}_n, equal to R^{j-+}_n of the shifted system."""
    _check_direction(direction)
    z = _location(data, j)
    v = _values(system, z, direction, n)
    kp = principal_sqrt(shifted_coeffs(system, data, j, direction, n, forms=False).kappa_sq)
    if direction == 1:
        s = v.a / kp
        num = ((_poly(v.k1 * z / v.b), _poly(system.phi0(n + 1) / v.b)),
               (_poly(0, v.k1 * v.c / (v.b * v.a)), _poly(v.k0 / v.a, -v.k1 / v.b)))
        den = _poly(1)
    else:
        s = v.k1 / kp
        num = ((_poly(-v.k0 * v.b * z / (v.k1 * v.a), 1), _poly(v.c * z / v.a)),
               (_poly(0, _phibar0(system, n) / v.k1), _poly(-z)))
        den = _poly(-z, 1)
    num = tuple(tuple(e * s for e in row) for row in num)
    return SchlesingerMatrix(num, den, "R+inv" if direction == 1 else "R-inv", z, n, j, -direction)


# -- shifted coefficients


class ShiftedCoeffs(NamedTuple):
    kappa_sq: complex
    r: complex
    rbar: complex
    bilinear: tuple | None  # (kappa_sq, r, rbar) from Theta and Omega
    forms_residual: float


def shifted_coeffs(
    system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n: int,
    forms: bool = True, tol: float = FORMS_TOL,
) -> ShiftedCoeffs:
    """kappa^2, r and rbar of the system with rho_j shifted by ``direction``.

    The evaluation form is returned; with ``forms`` the version through
    Theta, Omega of the bilinear relations is computed as well and the two
    must agree to ``tol`` (relative).  That version needs n >= 1 for the
    down shift and nonzero phi_{n+1}(0), phibar_{n+1}(0); where it is
    unavailable ``bilinear`` is None.

    Raises
    ------
    ConsistencyError
        If the two forms disagree.
    """
    _check_direction(direction)
    z = _location(data, j)
    v = _values(system, z, direction, n)
    if direction == 1:
        ksq = -v.k1 * v.k0 * v.a / v.b
        r = (system.phi0(n) * v.b - system.phi0(n + 1) * v.a) / (z * v.k1 * v.a)
        rbar = v.c / v.a
    else:
        ksq = -v.k1 * v.k0 * z * v.b / v.a
        r = z * v.d / v.b
        rbar = (_phibar0(system, n) * z * v.b - _phibar0(system, n - 1) * v.a) / (z * v.k1 * v.b)
    if ksq == 0 or not np.isfinite(ksq):
        raise DegeneracyError(f"shifted kappa^2 = {ksq} at n = {n}, j = {j}")
    out = ShiftedCoeffs(complex(ksq), complex(r), complex(rbar), None, 0.0)
    if not forms:
        return out
    alt = _bilinear_form(system, data, j, direction, n)
    if alt is None:
        return out
    res = max(abs(x - y) / max(1.0, abs(y)) for x, y in zip(alt, out[:3]))
    if res > tol:
        raise ConsistencyError(f"evaluation and Theta/Omega forms of the shifted coefficients differ by {res:.2e}")
    return out._replace(bilinear=alt, forms_residual=float(res))


def _bilinear_form(system, data, j, direction, n):
    m = n if direction == 1 else n - 1
    if m < 0 or m + 1 > system.n_max:
        return None
    try:
        B = bilinear_products(system, data, m, j)
    except DegeneracyError:
        return None
    z, V = complex(data.zs[j]), B.V_at
    if direction == 1:
        k0, k1 = system.kappa_at(n), system.kappa_at(n + 1)
        ksq = -k1 * k0 * B.Theta / (B.Omega + V)
        r = (system.phi0(n) * (B.Omega + V) - system.phi0(n + 1) * B.Theta) / (k1 * z * B.Theta)
        # extra z_j factor follows from the phi* xi* bilinear relation
        rbar = system.phibar0(n + 1) / k0 * z * B.ThetaStar / (B.OmegaStar - V - k1 / k0 * B.ThetaStar)
    else:
        km, kn = system.kappa_at(n - 1), system.kappa_at(n)
        ksq = -kn * km * z * B.ThetaStar / (B.OmegaStar + V)
        r = -system.phi0(n) / km * z * B.Theta / (B.Omega - V - kn / km * z * B.Theta)
        rbar = -(system.phibar0(n - 1) * (B.OmegaStar + V) - system.phibar0(n) * z * B.ThetaStar) / (kn * z * B.ThetaStar)
    return complex(ksq), complex(r), complex(rbar)


# -- shifted evaluations at the singular points


def transfer_sum(system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n: int) -> complex:
    """T^{j+-}_n(z_j), the derivative term in the shifted value at z_j itself.

    The sum over k != j includes the origin, whose summand is taken from the
    residue (n - rho_0)[[1, -r_n], [0, 0]] there.

    Raises
    ------
    DegeneracyError
        If rho_j = -1 (up shift) or rho_j = 1 (down shift).
    """
    _check_direction(direction)
    z = _location(data, j)
    rho = data.rhos[j]
    if abs(rho + direction) < 1e-12:
        raise DegeneracyError(f"rho_{j} = {rho}: the shifted value at z_{j} needs rho_j + {direction} != 0")
    p, ps, x, xs = point_values(system, n, z)
    r = system.r[n]
    total = 0j
    for k, s in enumerate(data.singularities):
        if k == j:
            continue
        if k == 0:
            if direction == 1:
                total += (n - data.rhos[0]) * (-ps) * (p - r * ps) / z
            else:
                total += (n - data.rhos[0]) * xs * (x + r * xs) / z
            continue
        pk, psk, xk, xsk = point_values(system, n, s.z)
        c = s.rho / (2 * s.z**n) / (z - s.z)
        if direction == 1:
            total += c * (p * psk - ps * pk) * (p * xsk + ps * xk)
        else:
            total += c * (x * xsk - xs * xk) * (xs * pk + x * psk)
    return complex(total / (rho + direction))


@dataclass(frozen=True)
class ShiftedEvaluations:
    """Phi, Phi*, Xi, Xi* of the shifted system at z_1..z_M (index k - 1)."""

    phi: np.ndarray
    phistar: np.ndarray
    xi: np.ndarray
    xistar: np.ndarray
    kappa: complex
    n: int


def shifted_evaluations(system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n: int) -> ShiftedEvaluations:
    """Values of the shifted system at every finite singular point but the origin."""
    _check_direction(direction)
    zj = _location(data, j)
    v = _values(system, zj, direction, n)
    kp = complex(principal_sqrt(shifted_coeffs(system, data, j, direction, n, forms=False).kappa_sq))
    out = np.empty((4, data.M), dtype=complex)
    if direction == 1:
        kn, k1 = v.k0, v.k1
        pj, p1j, psj = v.a, v.b, v.c
        ps1j = complex(system.phistar_at(n + 1, zj))
        f1, fb1 = system.phi0(n + 1), system.phibar0(n + 1)
        for k in range(1, data.M + 1):
            zk = complex(data.zs[k])
            if k == j:
                T = transfer_sum(system, data, j, 1, n)
                out[:, k - 1] = (
                    kp / kn * (pj + f1 / (k1 * pj) * T),
                    kp * psj / (kn * pj) * (pj - zj / psj * T),
                    -kp * f1 / (kn * k1 * pj) * 2 * zj**n,
                    -kp / (kn * pj) * 2 * zj ** (n + 1),
                )
                continue
            pk, psk, xk, xsk = point_values(system, n, zk)
            p1k, ps1k, x1k, xs1k = point_values(system, n + 1, zk)
            out[:, k - 1] = (
                kp / (k1 * pj) * (p1j * pk - pj * p1k) / (zj - zk),
                kp / (fb1 * pj) * (ps1j * psk - psj * ps1k) / (zj - zk),
                kp / (k1 * pj) * (pj * x1k - p1j * xk),
                kp / (fb1 * pj) * (psj * xs1k - ps1j * xsk),
            )
    else:
        km, kn = v.k0, v.k1
        xsj, xsmj, xj = v.a, v.b, v.c
        pbn = _phibar0(system, n)
        sysn = _ensure_negative(system, n - 1)
        for k in range(1, data.M + 1):
            zk = complex(data.zs[k])
            if k == j:
                T = transfer_sum(system, data, j, -1, n)
                out[:, k - 1] = (
                    kp / (km * xsmj) * 2 * zj**n,
                    kp * pbn / (kn * km * xsmj) * 2 * zj**n,
                    -kp / (km * xsmj) * T,
                    kp / kn * (pbn / (km * xsmj) * T - xsj / zj),
                )
                continue
            pk, psk, xk, xsk = point_values(system, n, zk)
            psmk, xsmk = complex(sysn.phistar_at(n - 1, zk)), complex(sysn.xistar_at(n - 1, zk))
            out[:, k - 1] = (
                kp / (km * xsmj) * (pk * xsj + psk * xj),
                kp / (kn * zj * xsmj) * (zj * xsmj * psk - zk * xsj * psmk),
                kp / (km * xsmj) * (xj * xsk - xsj * xk) / (zj - zk),
                -kp / (kn * zj * xsmj) * (zj * xsmj * xsk - zk * xsj * xsmk) / (zj - zk),
            )
    return ShiftedEvaluations(*out, kappa=kp, n=n)


# -- residues


def transformed_residues(
    rs: ResidueSet, system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n: int,
    route: str = "printed",
) -> ResidueSet:
    """Residue matrices of the shifted spectral matrix.

    ``"printed"`` uses the explicit sandwich products for k != j and the
    closed form at z_j; ``"conjugation"`` uses R(z_k) A_{n,k} R(z_k)^{-1}
    for k != j and closes the set at z_j with the sum rule against the
    residue at infinity.
    """
    _check_direction(direction)
    if rs.n != n:
        raise ShapeError(f"residue set holds degree {rs.n}, requested {n}")
    zj = _location(data, j)
    co = shifted_coeffs(system, data, j, direction, n, forms=False)
    srho = data.rhos.sum() + direction
    A_inf = np.array([[-n, 0], [-(n + srho) * co.rbar, srho]], dtype=complex)
    v = _values(system, zj, direction, n)
    A = [None] * (data.M + 1)
    if route == "conjugation":
        R = schlesinger_matrix(system, data, j, direction, n)
        for k, zk in enumerate(data.zs):
            if k != j:
                Rk = R(zk)
                A[k] = Rk @ rs.A[k] @ np.linalg.inv(Rk)
        A[j] = -A_inf - sum(A[k] for k in range(data.M + 1) if k != j)
        return ResidueSet(n, tuple(A), A_inf, rs.zs)
    if route != "printed":
        raise ValueError(f"route must be 'printed' or 'conjugation', got {route!r}")
    if direction == 1:
        kn, k1, pj, p1j, psj = v.k0, v.k1, v.a, v.b, v.c
        f1 = system.phi0(n + 1)
        for k, zk in enumerate(data.zs):
            if k == j:
                continue
            d = zj - zk
            left = np.array([[k1 * pj + f1 * psj / d, -f1 * pj / d], [-zk * k1 * psj / d, zj * k1 * pj / d]])
            right = np.array([[zj * k1 * pj, f1 * pj], [zk * k1 * psj, d * k1 * pj + f1 * psj]])
            A[k] = left @ rs.A[k] @ right / (kn * k1 * pj * p1j)
        front = np.array([[-f1 * psj, f1 * pj], [zj * k1 * psj, -zj * k1 * pj]]) / (kn * p1j)
        inner = np.array([[zj * k1 * pj, f1 * pj], [zj * k1 * psj, f1 * psj]])
        acc = (data.rhos[j] + 1) * np.eye(2, dtype=complex)
        for k, zk in enumerate(data.zs):
            if k != j:
                acc = acc + rs.A[k] @ inner / ((zj - zk) * k1 * pj)
        A[j] = front @ acc
    else:
        km, kn, xsj, xsmj, xj = v.k0, v.k1, v.a, v.b, v.c
        pb = _phibar0(system, n)
        for k, zk in enumerate(data.zs):
            if k == j:
                continue
            d = zj - zk
            left = np.array([[zj * kn * xsj / d, zj * kn * xj / d], [zk * pb * xsj / d, kn * xsj + zj * pb * xj / d]])
            right = np.array([[d * kn * xsj + zj * pb * xj, -zj * kn * xj], [-zk * pb * xsj, zj * kn * xsj]])
            A[k] = left @ rs.A[k] @ right / (km * kn * zj * xsmj * xsj)
        # the sum rule fixes the sign of the first term and a single power of z_j below
        first = np.array([[0, 0], [-pb, kn]], dtype=complex) / kn * (1 - data.rhos[j])
        outer = np.array([[kn * xsj, kn * xj], [pb * xsj, pb * xj]])
        inner = np.array([[-pb * xj, kn * xj], [pb * xsj, -kn * xsj]])
        acc = sum(rs.A[k] / (zj - zk) for k, zk in enumerate(data.zs) if k != j)
        A[j] = first + zj / (km * kn * xsmj * xsj) * outer @ acc @ inner
    return ResidueSet(n, tuple(A), A_inf, rs.zs)


# -- compatibility


class Compatibility(NamedTuple):
    recurrence: np.ndarray
    spectral: np.ndarray
    deformation: np.ndarray | None
    scales: dict = {}

    def relative(self) -> dict:
        """Largest entry of each residual over the largest entry of its terms."""
        out = {}
        for name in ("recurrence", "spectral", "deformation"):
            res = getattr(self, name)
            if res is not None:
                out[name] = float(np.max(np.abs(res))) / max(1.0, self.scales.get(name, 1.0))
        return out


def _kmat(kn, k1, r1, rb1, z) -> np.ndarray:
    return np.array([[k1 * z, r1 * k1], [rb1 * k1 * z, k1]], dtype=complex) / kn


def _align(M: np.ndarray, ref: np.ndarray) -> np.ndarray:
    # kappa of the shifted system is fixed only up to sign
    return M if np.linalg.norm(M - ref) <= np.linalg.norm(M + ref) else -M


def compatibility_residuals(
    system: BopsSystem, data: SemiClassicalData, j: int, direction: int, n: int, z,
    velocities: Sequence | None = None, spec: WeightSpec | None = None, delta: float = 1e-5,
) -> Compatibility:
    """Residuals of the shift against the recurrence, d/dz and d/dt.

    recurrence  R_{n+1} K_n - K_n(shifted) R_n
    spectral    dR/dz + R A_n - A_n(shifted) R
    deformation dR/dt + R B_n - B_n(shifted) R, with dR/dt by a central
                difference of rebuilt systems; needs ``velocities`` and
                ``spec``, otherwise None.
    """
    z = complex(z)
    R0 = schlesinger_matrix(system, data, j, direction, n)
    R1 = schlesinger_matrix(system, data, j, direction, n + 1)
    c0 = shifted_coeffs(system, data, j, direction, n, forms=False)
    c1 = shifted_coeffs(system, data, j, direction, n + 1, forms=False)
    Kmod = _kmat(principal_sqrt(c0.kappa_sq), principal_sqrt(c1.kappa_sq), c1.r, c1.rbar, z)
    left, right = R1(z) @ recurrence_matrix(system, n, z), Kmod @ R0(z)
    rec = left - right
    scales = {"recurrence": _mag(left, right)}

    rs = residue_set(system, data, n)
    rs_mod = transformed_residues(rs, system, data, j, direction, n)
    data_mod = shift_data(data, ExponentShift.single(data.M, j, direction).shifts)
    Rz = R0(z)
    terms = (R0.derivative(z), Rz @ spectral_matrix(rs, data, z), spectral_matrix(rs_mod, data_mod, z) @ Rz)
    spec_res = terms[0] + terms[1] - terms[2]
    scales["spectral"] = _mag(*terms)

    deform = None
    if velocities is not None and spec is not None:
        up = perturb(spec, data, velocities, delta, system.n_max)
        dn = perturb(spec, data, velocities, -delta, system.n_max)
        Rp = _align(schlesinger_matrix(up.system, up.data, j, direction, n)(z), Rz)
        Rm = _align(schlesinger_matrix(dn.system, dn.data, j, direction, n)(z), Rz)
        dR = (Rp - Rm) / (2 * delta)
        B = deformation_matrix(rs, system, data, velocities, z)
        mod_spec = shifted_spec(spec, data, ExponentShift.single(data.M, j, direction).shifts)
        sys_mod = rebuild(mod_spec, n + 2)
        data_b = SemiClassicalData.from_spec(mod_spec)
        B_mod = deformation_matrix(residue_set(sys_mod, data_b, n, tol=1e-6), sys_mod, data_b, velocities, z)
        deform = dR + Rz @ B - B_mod @ Rz
        scales["deformation"] = _mag(dR, Rz @ B, B_mod @ Rz)
    return Compatibility(rec, spec_res, deform, scales)


def _mag(*mats) -> float:
    return max(float(np.max(np.abs(m))) for m in mats)


# -- commutation


def double_shift_kappa_sq(system: BopsSystem, data: SemiClassicalData, j: int, k: int, n: int) -> complex:
    """kappa_n^2 after raising both rho_j and rho_k, from the base system."""
    zj, zk = _location(data, j), _location(data, k)
    if n + 2 > system.n_max:
        raise ShapeError(f"double shift at n = {n} needs degree {n + 2}")
    p = lambda m, x: complex(system.phi_at(m, x))
    num = p(n, zk) * p(n + 1, zj) - p(n, zj) * p(n + 1, zk)
    den = p(n + 1, zk) * p(n + 2, zj) - p(n + 1, zj) * p(n + 2, zk)
    if abs(den) < 1e-300:
        raise DegeneracyError("double-shift denominator vanishes")
    return complex(system.kappa_at(n) * system.kappa_at(n + 2) * num / den)


class Commutation(NamedTuple):
    residual: np.ndarray
    kappa_sq_jk: complex
    kappa_sq_kj: complex
    kappa_sq_formula: complex | None


def commutativity_residual(
    system: BopsSystem, data: SemiClassicalData, j: int, k: int, dir_j: int, dir_k: int, n: int, z,
) -> Commutation:
    """R^{j}(rho_k shifted) R^{k} - R^{k}(rho_j shifted) R^{j} at z.

    The shifted systems are produced from the base system by the single
    factor transformations.  For two up shifts the doubly shifted kappa_n^2
    is also compared with its closed form.
    """
    if j == k:
        raise ShapeError("commutation needs two distinct singular points")
    z = complex(z)
    depth = system.n_max - 1
    sys_k, data_k = shifted_system(system, data, k, dir_k, depth)
    sys_j, data_j = shifted_system(system, data, j, dir_j, depth)
    Rk = schlesinger_matrix(system, data, k, dir_k, n)(z)
    Rj = schlesinger_matrix(system, data, j, dir_j, n)(z)
    Rj_k = schlesinger_matrix(sys_k, data_k, j, dir_j, n)(z)
    Rk_j = schlesinger_matrix(sys_j, data_j, k, dir_k, n)(z)
    # each ordering fixes kappa of the doubly shifted system by its own square root
    left = Rj_k @ Rk
    right = _align(Rk_j @ Rj, left)
    ksq_jk = shifted_coeffs(sys_k, data_k, j, dir_j, n, forms=False).kappa_sq
    ksq_kj = shifted_coeffs(sys_j, data_j, k, dir_k, n, forms=False).kappa_sq
    formula = double_shift_kappa_sq(system, data, j, k, n) if dir_j == dir_k == 1 else None
    return Commutation(left - right, ksq_jk, ksq_kj, formula)
