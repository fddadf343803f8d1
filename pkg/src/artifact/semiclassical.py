"""Regular semi-classical structure of a factorised weight.

For w(z) = z^{rho_0'} prod (z - z_j)^{rho_j} the logarithmic derivative is
the rational function 2V/W with W = prod_{j=0}^M (z - z_j), z_0 = 0, and the
spectral matrix of Y_n has simple poles at the z_j and at infinity,

    A_n(z) = sum_j A_{n,j} / (z - z_j).

Residues at j >= 1 are rank one and built from the evaluations of
phi_n, phi*_n, xi_n, xi*_n at z_j; the residue at the origin only needs r_n.
Moving the singular points along z_j(t) gives the deformation matrix B_n.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .bops import BopsSystem, build_system, y_matrix
from .errors import ConsistencyError, DegeneracyError, DomainError, GenericConditionError, InapplicableError, ShapeError
from .weight import MERGE_TOL, WeightFactor, WeightSpec, evaluate_weight, fourier_coefficients, modify_weight

__all__ = [
    "Singularity",
    "SemiClassicalData",
    "ResidueSet",
    "MonodromyBlock",
    "Bilinear",
    "Rates",
    "point_values",
    "residue_set",
    "spectral_matrix",
    "sum_identities",
    "formal_monodromy",
    "exponents",
    "bilinear_products",
    "deformation_derivatives",
    "deformation_matrix",
    "schlesinger_rhs",
    "moved_spec",
    "branch_scale",
    "Perturbed",
    "perturb",
    "rebuild",
    "spectral_compat_residual",
]

RESIDUE_TOL = 1e-10


class Singularity(NamedTuple):
    z: complex
    rho: complex


@dataclass(frozen=True)
class SemiClassicalData:
    """Finite singular points with their exponents, origin first.

    Attributes
    ----------
    singularities : tuple of Singularity
        Entry 0 is the origin with the exponent collected from the monomial
        power and the conjugated factors.
    warnings : tuple of str
        Generic conditions that fail for this weight.
    """

    singularities: tuple
    n_range: tuple | None = None
    warnings: tuple = field(default=(), compare=False)

    @property
    def M(self) -> int:
        return len(self.singularities) - 1

    @property
    def zs(self) -> np.ndarray:
        return np.array([s.z for s in self.singularities], dtype=complex)

    @property
    def rhos(self) -> np.ndarray:
        return np.array([s.rho for s in self.singularities], dtype=complex)

    @property
    def W(self) -> Polynomial:
        return Polynomial.fromroots(self.zs)

    @property
    def V(self) -> Polynomial:
        zs, rhos = self.zs, self.rhos
        out = Polynomial([0j])
        for j in range(zs.size):
            out = out + rhos[j] * Polynomial.fromroots(np.delete(zs, j))
        return out / 2

    @classmethod
    def from_spec(cls, spec: WeightSpec, n_range: tuple | None = None) -> "SemiClassicalData":
        """Collect the singularity data of a factorised weight.

        A rational modification is folded into the factors first.

        Raises
        ------
        InapplicableError
            For a Fourier-table base.
        """
        if spec.base_fourier is not None:
            raise InapplicableError("semi-classical data needs a factorised weight")
        if spec.rational_mod is not None:
            rm = spec.rational_mod
            spec = modify_weight(WeightSpec(spec.factors), rm.alphas, rm.alpha_stars, rm.betas, rm.beta_stars)
        rho0 = 0j
        points: list[list] = []
        for f in spec.factors:
            if f.kind == "monomial":
                rho0 += f.exponent
                continue
            if f.kind == "conjugated":
                # 1 - z_j/z = (z - z_j)/z
                rho0 -= f.exponent
            for p in points:
                if abs(p[0] - f.zero) <= MERGE_TOL:
                    p[1] += f.exponent
                    break
            else:
                points.append([f.zero, f.exponent])
        sing = [Singularity(0j, complex(rho0))] + [Singularity(complex(z), complex(r)) for z, r in points]
        data = cls(tuple(sing), n_range)
        return replace(data, warnings=tuple(data._generic_warnings()))

    def _generic_warnings(self) -> list[str]:
        out = []
        if self.M < 1:
            out.append("deg W < 2: no singular point besides the origin")
        zs = self.zs
        for j in range(zs.size):
            for k in range(j):
                if abs(zs[j] - zs[k]) <= MERGE_TOL:
                    out.append(f"singular points {k} and {j} coincide")
        for j, s in enumerate(self.singularities):
            r = s.rho
            if r.imag == 0.0 and r.real == round(r.real) and r.real >= 0:
                out.append(f"rho_{j} = {r.real:g} is a nonnegative integer")
        if not out:
            # residues of 2V/W reproduce the exponents
            dW = self.W.deriv()
            for j, s in enumerate(self.singularities):
                if abs(2 * self.V(s.z) / dW(s.z) - s.rho) > 1e-10 * max(1.0, abs(s.rho)):
                    out.append(f"2V/W' at z_{j} does not reproduce rho_{j}")
        return out

    def require_generic(self):
        if self.M < 1:
            raise InapplicableError("weight is not semi-classical with deg W >= 2")
        for msg in self.warnings:
            warnings.warn(msg, stacklevel=3)

    def log_derivative(self, z):
        """2V(z)/W(z) as a partial fraction sum."""
        z = np.asarray(z, dtype=complex)
        out = sum(s.rho / (z - s.z) for s in self.singularities)
        return out[()] if np.ndim(out) == 0 else out

    def to_dict(self, velocities: Sequence | None = None) -> dict:
        d = {
            "singularities": [
                {"z": [s.z.real, s.z.imag], "rho": [s.rho.real, s.rho.imag]} for s in self.singularities
            ]
        }
        if velocities is not None:
            d["velocities"] = [[complex(v).real, complex(v).imag] for v in velocities]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SemiClassicalData":
        """Inverse of :meth:`to_dict`; the origin is prepended when absent."""
        try:
            sing = [Singularity(complex(*s["z"]), complex(*s["rho"])) for s in d["singularities"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise GenericConditionError(f"malformed singularity data: {exc}") from exc
        if not sing or sing[0].z != 0:
            sing = [Singularity(0j, 0j)] + sing
        data = cls(tuple(sing))
        return replace(data, warnings=tuple(data._generic_warnings()))


def point_values(system: BopsSystem, n: int, z: complex) -> tuple:
    """(phi_n, phi*_n, xi_n, xi*_n) at one point off the unit circle."""
    return (
        complex(system.phi_at(n, z)),
        complex(system.phistar_at(n, z)),
        complex(system.xi_at(n, z)),
        complex(system.xistar_at(n, z)),
    )


@dataclass(frozen=True)
class ResidueSet:
    n: int
    A: tuple
    A_inf: np.ndarray
    zs: np.ndarray


def _rank_one(rho, z, n, vals) -> np.ndarray:
    p, ps, x, xs = vals
    return -(rho / (2 * z**n)) * np.array([[ps * x, -p * x], [-ps * xs, p * xs]], dtype=complex)


def residue_set(system: BopsSystem, data: SemiClassicalData, n: int, tol: float = RESIDUE_TOL) -> ResidueSet:
    """Residue matrices of A_n at the origin, at each z_j and at infinity.

    Raises
    ------
    ConsistencyError
        If the closed form at infinity differs from minus the sum of the
        finite residues by more than ``tol`` (relative).
    """
    if n > system.n_max:
        raise ShapeError(f"system depth {system.n_max} < {n}")
    rhos = data.rhos
    A = [(n - rhos[0]) * np.array([[1, -system.r[n]], [0, 0]], dtype=complex)]
    for s in data.singularities[1:]:
        A.append(_rank_one(s.rho, s.z, n, point_values(system, n, s.z)))
    srho = rhos.sum()
    A_inf = np.array([[-n, 0], [-(n + srho) * system.rbar[n], srho]], dtype=complex)
    total = A_inf + sum(A)
    scale = max(1.0, float(np.max(np.abs(A_inf))))
    if np.max(np.abs(total)) > tol * scale:
        raise ConsistencyError(f"A_inf + sum A_j = {np.max(np.abs(total)):.2e} at n = {n}")
    return ResidueSet(n, tuple(A), A_inf, data.zs)


def spectral_matrix(rs: ResidueSet, data: SemiClassicalData, z) -> np.ndarray:
    """A_n(z) assembled from its partial fractions."""
    z = complex(z)
    if np.any(np.abs(z - rs.zs) <= MERGE_TOL):
        raise DomainError(f"A_n has a pole at {z}")
    return sum(Aj / (z - zj) for Aj, zj in zip(rs.A, rs.zs))


def sum_identities(system: BopsSystem, data: SemiClassicalData, n: int) -> dict:
    """Residuals of the four weighted sums of bilinear products over z_1..z_M."""
    acc = np.zeros(4, dtype=complex)
    for s in data.singularities[1:]:
        p, ps, x, xs = point_values(system, n, s.z)
        acc += s.rho / (2 * s.z**n) * np.array([p * x, ps * x, p * xs, ps * xs])
    rhos = data.rhos
    srho = rhos.sum()
    target = np.array([(n - rhos[0]) * system.r[n], -rhos[0], srho, (n + srho) * system.rbar[n]])
    return dict(zip("abcd", (complex(v) for v in acc - target)))


def exponents(data: SemiClassicalData, n: int) -> dict:
    """Formal monodromy exponents keyed by 0..M and "inf"."""
    rhos = data.rhos
    out = {0: n - rhos[0]}
    out.update({j: -rhos[j] for j in range(1, rhos.size)})
    out["inf"] = n + rhos.sum()
    return out


class MonodromyBlock(NamedTuple):
    label: object
    T: np.ndarray
    G: np.ndarray
    residual: float


def formal_monodromy(
    rs: ResidueSet, system: BopsSystem, data: SemiClassicalData, d: dict | None = None, tol: float = 1e-9
) -> list[MonodromyBlock]:
    """Diagonalisations A_{n,j} = G_j T_j G_j^{-1}, j = 0..M and infinity.

    ``d`` maps labels to the free column scales, default 1.

    Raises
    ------
    DegeneracyError
        If some G_j is numerically singular.
    """
    d = d or {}
    n = rs.n
    th = exponents(data, n)
    k, p0, pb0 = system.kappa[n], system.phi[n][0], system.phibar[n][0]
    blocks = [(0, np.diag([0, th[0]]), np.array([[p0, d.get(0, 1) / k], [k, 0]]), rs.A[0])]
    for j, s in enumerate(data.singularities[1:], start=1):
        p, ps, x, xs = point_values(system, n, s.z)
        dj = d.get(j, 1)
        blocks.append((j, np.diag([0, th[j]]), np.array([[p, dj * x], [ps, -dj * xs]]), rs.A[j]))
    blocks.append(("inf", np.diag([-n, data.rhos.sum()]), np.array([[k, 0], [pb0, d.get("inf", 1) / k]]), rs.A_inf))
    out = []
    for label, T, G, A in blocks:
        G = G.astype(complex)
        if np.linalg.cond(G) > 1e12:
            raise DegeneracyError(f"G_{label} is numerically singular")
        res = float(np.max(np.abs(G @ T @ np.linalg.inv(G) - A)))
        out.append(MonodromyBlock(label, T.astype(complex), G, res))
    return out


class Bilinear(NamedTuple):
    Theta: complex
    ThetaStar: complex
    Omega: complex
    OmegaStar: complex
    V_at: complex
    residuals: dict


def bilinear_products(system: BopsSystem, data: SemiClassicalData, n: int, j: int, tol: float = 1e-9) -> Bilinear:
    """Recover Theta_n, Theta*_n, Omega_n, Omega*_n at z_j from bilinear products.

    Theta and Theta* come from the products phi xi and phi* xi*; Omega and
    Omega* from phi_{n+1} xi_n and phi*_{n+1} xi*_n.  The redundant relations
    are returned as residuals and checked against ``tol`` (relative).

    Raises
    ------
    InapplicableError
        For j < 1 or a weight with no singular point off the origin.
    DegeneracyError
        If phi_{n+1}(0) or phibar_{n+1}(0) vanishes, or a check fails.
    """
    if data.M < 1:
        raise InapplicableError("weight is not semi-classical with deg W >= 2")
    if not 1 <= j <= data.M:
        raise InapplicableError(f"bilinear relations hold at z_1..z_M, got j = {j}")
    if n + 1 > system.n_max:
        raise ShapeError(f"bilinear relations at n = {n} need degree {n + 1}")
    z = data.singularities[j].z
    V = complex(data.V(z))
    k0, k1 = system.kappa[n], system.kappa[n + 1]
    a, b = system.phi[n + 1][0], system.phibar[n + 1][0]
    if abs(a) < 1e-14 or abs(b) < 1e-14 or abs(V) < 1e-14:
        raise DegeneracyError(f"phi_{n + 1}(0), phibar_{n + 1}(0) or V(z_{j}) vanishes")
    p, ps, x, xs = point_values(system, n, z)
    p1, ps1, x1, xs1 = point_values(system, n + 1, z)
    unit = 2 * a / k0 * z**n / (2 * V)
    ustar = -2 * b / k0 * z ** (n + 1) / (2 * V)
    Th = p * x / unit
    Ths = ps * xs / ustar
    Om = p1 * x / unit - V
    Oms = ps1 * xs / ustar + V
    q = k1 / k0
    res = {
        "d": p * x1 - unit * (Om - V),
        "e": ps * xs1 - ustar * (Oms + V),
        "g": p * xs + z**n / V * (Om - V - q * z * Th),
        "h": p * xs + z**n / V * (Oms - V - q * Ths),
        "i": ps * x - z**n / V * (Om + V - q * z * Th),
        "j": ps * x - z**n / V * (Oms + V - q * Ths),
    }
    scale = max(1.0, abs(p * x), abs(ps * xs), abs(p * xs), abs(ps * x))
    bad = {key: abs(v) for key, v in res.items() if abs(v) > tol * scale}
    if bad:
        raise DegeneracyError(f"bilinear relations fail at n = {n}, j = {j}: {bad}")
    return Bilinear(Th, Ths, Om, Oms, V, {key: complex(v) for key, v in res.items()})


@dataclass(frozen=True)
class Rates:
    """Deformation derivatives at one degree for a given velocity vector."""

    n: int
    kappa_log: complex
    r: complex
    rbar: complex
    phibar0: complex
    P: tuple
    Q: tuple
    P_dot: tuple
    Q_dot: tuple


def _velocities(data: SemiClassicalData, velocities) -> np.ndarray:
    v = np.asarray(velocities, dtype=complex).ravel()
    if v.size != data.M:
        raise ShapeError(f"expected {data.M} velocities, got {v.size}")
    # the origin is fixed
    return np.r_[0j, v]


def deformation_derivatives(system: BopsSystem, data: SemiClassicalData, n: int, velocities) -> Rates:
    """Time derivatives of kappa_n, r_n, rbar_n and of P_{n,j}, Q_{n,j}.

    P_{n,j} = phi*_n(z_j)/phi_n(z_j) and Q_{n,j} = xi_n(z_j)/xi*_n(z_j),
    differentiated along the moving point z_j(t).  Pair terms k != j run
    over k = 0..M; the k = 0 summand is the one produced by the residue
    A_{n,0}, since the generic summand is singular at the origin.

    Raises
    ------
    DegeneracyError
        If phi_n(z_j) or xi*_n(z_j) vanishes.
    """
    data.require_generic()
    zd = _velocities(data, velocities)
    zs, rhos = data.zs, data.rhos
    vals = [None] + [point_values(system, n, z) for z in zs[1:]]
    k, r, rb = system.kappa[n], system.r[n], system.rbar[n]

    two_kl = 0j
    r_dot = 0j
    rb_dot = 0j
    for m in range(1, data.M + 1):
        p, ps, x, xs = vals[m]
        c = rhos[m] * zd[m] / zs[m] / (2 * zs[m] ** n)
        two_kl -= c * p * xs
        r_dot += c * (p - r * ps) * x
        rb_dot += c * (rb * p - ps) * xs
    kl = two_kl / 2
    pb0_dot = rb_dot * k + rb * kl * k

    P, Q, P_dot, Q_dot = [], [], [], []
    for j in range(1, data.M + 1):
        p, ps, x, xs = vals[j]
        if abs(p) < 1e-300 or abs(xs) < 1e-300:
            raise DegeneracyError(f"phi_{n} or xi*_{n} vanishes at z_{j}")
        Pj, Qj = ps / p, x / xs
        dP = dQ = 0j
        for m in range(1, data.M + 1):
            pm, psm, xm, xsm = vals[m]
            c = rhos[m] * zd[m] / zs[m] / (2 * zs[m] ** n)
            dP += c * (pm * Pj - psm) * xsm
            dQ -= c * Qj * (pm + psm * Qj) * xsm
        for m in range(0, data.M + 1):
            if m == j:
                continue
            w = (zd[j] - zd[m]) / (zs[j] - zs[m])
            if m == 0:
                # residue (n - rho_0)[[1, -r_n], [0, 0]] at the origin
                dP += w * (n - rhos[0]) * (r * Pj**2 - Pj)
                dQ += w * (n - rhos[0]) * (Qj + r)
                continue
            pm, psm, xm, xsm = vals[m]
            c = rhos[m] * w / (2 * zs[m] ** n)
            dP -= c * (pm * Pj - psm) * (xm * Pj + xsm)
            dQ -= c * (pm + psm * Qj) * (xm - xsm * Qj)
        P.append(Pj)
        Q.append(Qj)
        P_dot.append(dP)
        Q_dot.append(dQ)
    return Rates(n, kl, r_dot, rb_dot, pb0_dot, tuple(P), tuple(Q), tuple(P_dot), tuple(Q_dot))


def _b_inf(system: BopsSystem, rates: Rates) -> np.ndarray:
    n = rates.n
    k, pb0 = system.kappa[n], system.phibar[n][0]
    kl = rates.kappa_log
    # G_inf' G_inf^{-1} with G_inf = [[kappa, 0], [phibar(0), 1/kappa]]
    return np.array([[kl, 0], [(kl * pb0 + rates.phibar0) / k, -kl]], dtype=complex)


def deformation_matrix(
    rs: ResidueSet, system: BopsSystem, data: SemiClassicalData, velocities, z, rates: Rates | None = None
) -> np.ndarray:
    """B_n(z) = B_inf - sum_{j>=1} A_{n,j} zdot_j / (z - z_j)."""
    z = complex(z)
    if np.any(np.abs(z - rs.zs[1:]) <= MERGE_TOL):
        raise DomainError(f"B_n has a pole at {z}")
    zd = _velocities(data, velocities)
    rates = rates or deformation_derivatives(system, data, rs.n, velocities)
    out = _b_inf(system, rates)
    for j in range(1, data.M + 1):
        out = out - rs.A[j] * zd[j] / (z - rs.zs[j])
    return out


def schlesinger_rhs(
    rs: ResidueSet, system: BopsSystem, data: SemiClassicalData, velocities, rates: Rates | None = None
) -> list[np.ndarray]:
    """Right-hand sides for dA_{n,j}/dt, j = 1..M, then dA_{n,inf}/dt."""
    zd = _velocities(data, velocities)
    rates = rates or deformation_derivatives(system, data, rs.n, velocities)
    B = _b_inf(system, rates)
    zs = rs.zs
    out = []
    for j in range(1, data.M + 1):
        Aj = rs.A[j]
        acc = B @ Aj - Aj @ B
        for m in range(0, data.M + 1):
            if m != j:
                Am = rs.A[m]
                acc = acc + (zd[j] - zd[m]) / (zs[j] - zs[m]) * (Am @ Aj - Aj @ Am)
        out.append(acc)
    out.append(B @ rs.A_inf - rs.A_inf @ B)
    return out


def moved_spec(spec: WeightSpec, data: SemiClassicalData, velocities, delta: float) -> WeightSpec:
    """The weight with every z_j (j >= 1) displaced by zdot_j * delta."""
    zd = _velocities(data, velocities)
    factors = []
    for f in spec.factors:
        if f.kind != "monomial":
            for j in range(1, data.M + 1):
                if abs(f.zero - data.zs[j]) <= MERGE_TOL:
                    f = WeightFactor(f.kind, f.zero + zd[j] * delta, f.exponent)
                    break
        factors.append(f)
    return replace(spec, factors=tuple(factors))


def branch_scale(spec: WeightSpec, moved: WeightSpec) -> complex:
    """Constant restoring continuity in t of the outer-factor prefactors.

    The principal (-z_j)^rho jumps when z_j crosses the positive real axis;
    the deformation equations assume the continuation from ``spec``.
    """
    out = 1.0 + 0j
    for f, g in zip(spec.factors, moved.factors):
        if f.kind == "outer":
            cont = np.log(-f.zero) + np.log(g.zero / f.zero)
            out *= np.exp(f.exponent * (cont - np.log(-g.zero)))
    return complex(out)


@dataclass(frozen=True)
class Perturbed:
    """System rebuilt after moving the singular points by zdot * delta."""

    system: BopsSystem
    spec: WeightSpec
    data: SemiClassicalData
    scale: complex

    def y(self, n: int, z) -> np.ndarray:
        w = self.scale * complex(evaluate_weight(self.spec, z))
        return y_matrix(self.system, self.spec, n, z, w=w).entries


def rebuild(spec: WeightSpec, n_max: int, tol: float = 1e-14, scale: complex = 1.0) -> BopsSystem:
    """Fresh system for ``scale * w``; used for finite-difference oracles."""
    t = fourier_coefficients(spec, tol=tol)
    if scale != 1.0:
        t = replace(t, coeffs=np.asarray(t.coeffs) * scale)
    return build_system(t, n_max)


def perturb(spec: WeightSpec, data: SemiClassicalData, velocities, delta: float, n_max: int) -> Perturbed:
    """Rebuild along the deformation direction, keeping w continuous in t."""
    moved = moved_spec(spec, data, velocities, delta)
    c = branch_scale(spec, moved)
    return Perturbed(rebuild(moved, n_max, scale=c), moved, SemiClassicalData.from_spec(moved), c)


def spectral_compat_residual(system: BopsSystem, data: SemiClassicalData, n: int, z) -> float:
    """max |K_n' - (A_{n+1} K_n - K_n A_n)| at one point."""
    from .bops import recurrence_matrix

    z = complex(z)
    K = recurrence_matrix(system, n, z)
    k0, k1, pb1 = system.kappa[n], system.kappa[n + 1], system.phibar[n + 1][0]
    dK = np.array([[k1, 0], [pb1, 0]]) / k0
    A0 = spectral_matrix(residue_set(system, data, n), data, z)
    A1 = spectral_matrix(residue_set(system, data, n + 1), data, z)
    return float(np.max(np.abs(dK - (A1 @ K - K @ A0))))
