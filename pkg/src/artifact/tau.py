"""Toeplitz determinants on the lattice of exponent shifts.

Each value I_n[{rho_j + d_j}] is computed afresh from the shifted weight
(quadrature for the Fourier coefficients, then an LU determinant), so the
bilinear equations checked here never feed back into the values they test.

Lattice points are keyed by ``(n, d)`` with ``d`` the integer shift vector of
rho_0..rho_M.  The formal monodromy labels

    theta_0 = n - rho_0,  theta_j = -rho_j,  theta_inf = n + sum(rho)

are derived from the key for display and for translating the tau(theta)
notation of the bilinear equations.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .bops import BopsSystem, build_system, toeplitz_det
from .errors import DomainError, ShapeError
from .schlesinger import shifted_spec
from .semiclassical import SemiClassicalData
from .weight import DEFAULT_QUAD_MAX, FourierTable, WeightSpec, fourier_coefficients, modify_weight

ABS_FLOOR = 1e-13
INF = "inf"


class HirotaResidual(NamedTuple):
    equation: str
    n: int
    j: int
    k: int | None
    residual: float
    normalizer: float

    def to_dict(self) -> dict:
        return {
            "equation": self.equation,
            "n": self.n,
            "j": self.j,
            "k": self.k,
            "residual": float(self.residual),
            "normalizer": float(self.normalizer),
        }


@dataclass
class TauLattice:
    """Cache of shifted Toeplitz determinants over one base weight.

    Parameters
    ----------
    spec : WeightSpec
        Base weight.
    data : SemiClassicalData, optional
        Singular points; derived from ``spec`` when omitted.
    depth : int
        Largest allowed |shift| in any single exponent.
    tol, quad_max
        Passed to :func:`fourier_coefficients`.
    """

    spec: WeightSpec
    data: SemiClassicalData | None = None
    depth: int = 3
    tol: float = 1e-14
    quad_max: int = DEFAULT_QUAD_MAX
    _values: dict = field(default_factory=dict, repr=False)
    _tables: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.data is None:
            self.data = SemiClassicalData.from_spec(self.spec)

    @property
    def M(self) -> int:
        return self.data.M

    def _key(self, shifts) -> tuple:
        if shifts is None:
            return (0,) * (self.M + 1)
        if isinstance(shifts, Mapping):
            d = [0] * (self.M + 1)
            for j, v in shifts.items():
                if not 0 <= int(j) <= self.M:
                    raise ShapeError(f"no singular point with index {j}")
                d[int(j)] += int(v)
            shifts = d
        key = tuple(int(s) for s in shifts)
        if len(key) != self.M + 1:
            raise ShapeError(f"expected {self.M + 1} shifts, got {len(key)}")
        if max(abs(s) for s in key) > self.depth:
            raise DomainError(f"shift {key} exceeds the lattice depth {self.depth}")
        return key

    def table(self, shifts=None) -> FourierTable:
        key = self._key(shifts)
        if key not in self._tables:
            spec = shifted_spec(self.spec, self.data, key)
            t = fourier_coefficients(spec, tol=self.tol, n_max=self.quad_max)
            with self._lock:
                self._tables.setdefault(key, t)
        return self._tables[key]

    def value(self, n: int, shifts=None) -> complex:
        """I_n of the weight with rho_j moved by ``shifts[j]``."""
        if n < 0:
            raise _Undefined(f"determinant size must be non-negative, got {n}")
        key = (int(n), self._key(shifts))
        if key not in self._values:
            v = toeplitz_det(self.table(key[1]), key[0])
            with self._lock:
                self._values.setdefault(key, v)
        return self._values[key]

    def theta(self, n: int, shifts=None) -> dict:
        """Monodromy labels of the lattice point, keyed 0..M and ``"inf"``."""
        rho = np.array([s.rho for s in self.data.singularities]) + np.array(self._key(shifts))
        out = {0: n - rho[0]}
        out.update({j: -rho[j] for j in range(1, self.M + 1)})
        out[INF] = n + rho.sum()
        return out

    def from_theta(self, n: int, dtheta: Mapping) -> tuple[int, tuple]:
        """Lattice key reached from ``(n, 0)`` by moving the theta labels.

        Raises
        ------
        ShapeError
            If the moves change theta_0 + theta_inf + sum theta_j by an odd
            amount, which no integer change of n can absorb.
        """
        d0 = int(dtheta.get(0, 0))
        dinf = int(dtheta.get(INF, 0))
        dj = [int(dtheta.get(j, 0)) for j in range(1, self.M + 1)]
        total = d0 + dinf + sum(dj)
        if total % 2:
            raise ShapeError(f"theta move {dict(dtheta)} has odd total {total}")
        dn = total // 2
        rho0 = (dinf + sum(dj) - d0) // 2
        return n + dn, (rho0, *(-x for x in dj))

    def tau(self, n: int, **moves) -> complex:
        """tau(theta + moves) relative to the unshifted point of size ``n``.

        Keywords are ``t0``, ``t1`` .. ``tM`` and ``tinf``.
        """
        dtheta = {}
        for name, v in moves.items():
            if not name.startswith("t"):
                raise ShapeError(f"unknown theta label {name!r}")
            lab = name[1:]
            dtheta[INF if lab == INF else int(lab)] = v
        m, key = self.from_theta(n, dtheta)
        return self.value(m, key)

    def base_system(self, n_max: int) -> BopsSystem:
        return build_system(self.table(), n_max)

    def modified_value(self, n: int, **mods) -> complex:
        """I_n of the base weight times a rational factor (keywords of modify_weight)."""
        key = ("mod", int(n), tuple(sorted((k, tuple(complex(x) for x in v)) for k, v in mods.items())))
        if key not in self._values:
            spec = modify_weight(self.spec, **mods)
            t = fourier_coefficients(spec, tol=self.tol, n_max=self.quad_max)
            v = toeplitz_det(t, n)
            with self._lock:
                self._values.setdefault(key, v)
        return self._values[key]


class _Undefined(ShapeError):
    pass


def _residual(terms: Sequence[complex]) -> tuple[float, float]:
    terms = np.asarray(terms, dtype=complex)
    total = abs(terms.sum())
    norm = float(np.max(np.abs(terms)))
    if norm < ABS_FLOOR:
        warnings.warn("all terms below the absolute floor; residual is indeterminate", RuntimeWarning, stacklevel=3)
        return total, norm
    return total / norm, norm


def _zs(lat: TauLattice, j: int) -> complex:
    return complex(lat.data.zs[j])


def hirota_one(lat: TauLattice, n: int, j: int) -> list[HirotaResidual]:
    """Residuals of the two bilinear equations in one exponent theta_j."""
    if not 1 <= j <= lat.M:
        raise ShapeError(f"j must lie in 1..{lat.M}, got {j}")
    t, zj, tj = lat.tau, _zs(lat, j), f"t{j}"
    a = lambda: [
        t(n) * t(n, t0=1, tinf=1),
        -t(n, **{tj: 1, "tinf": 1}) * t(n, **{"t0": 1, tj: -1}),
        zj * t(n, **{tj: -1, "tinf": 1}) * t(n, **{"t0": 1, tj: 1}),
    ]
    b = lambda: [
        t(n) * t(n, t0=-1, tinf=1),
        -t(n, **{tj: -1, "tinf": 1}) * t(n, **{"t0": -1, tj: 1}),
        -zj * t(n, **{tj: 1, "tinf": 1}) * t(n, **{"t0": -1, tj: -1}),
    ]
    return _collect(n, j, None, {"HM-a": a, "HM-b": b})


def _collect(n, j, k, equations) -> list[HirotaResidual]:
    # equations reaching a negative determinant size do not exist at this n
    out = []
    for name, terms in equations.items():
        try:
            vals = terms()
        except _Undefined:
            continue
        out.append(HirotaResidual(name, n, j, k, *_residual(vals)))
    return out


def _mv(*pairs) -> dict:
    out: dict = {}
    for lab, v in pairs:
        key = f"t{lab}"
        out[key] = out.get(key, 0) + v
    return out


def hirota_two(lat: TauLattice, n: int, j: int, k: int) -> list[HirotaResidual]:
    """Residuals of the four bilinear equations in theta_j and theta_k.

    ``j`` runs over 1..M and ``k`` over 0..M with k != j.
    """
    if not 1 <= j <= lat.M or not 0 <= k <= lat.M or j == k:
        raise ShapeError(f"need 1 <= j <= {lat.M}, 0 <= k <= {lat.M}, j != k; got ({j}, {k})")
    zj, zk = _zs(lat, j), _zs(lat, k)

    def t(*pairs):
        return lat.tau(n, **_mv(*pairs))

    I = INF
    d = lambda: [
        (zj - zk) * t((0, 1), (I, 1)) * t((j, -1), (k, -1), (I, 2)),
        -t((0, 1), (k, -1), (I, 2)) * t((j, -1), (I, 1)),
        t((0, 1), (j, -1), (I, 2)) * t((k, -1), (I, 1)),
    ]
    e = lambda: [
        t((0, 1), (I, 1)) * t((j, -1), (k, 1)),
        zk * t((0, 1), (k, 1)) * t((j, -1), (I, 1)),
        -t((k, 1), (I, 1)) * t((0, 1), (j, -1)),
    ]
    f = lambda: [
        (zj - zk) * t() * t((0, 1), (j, -1), (k, -1), (I, 1)),
        -zj * t((j, -1), (I, 1)) * t((0, 1), (k, -1)),
        zk * t((0, 1), (j, -1)) * t((k, -1), (I, 1)),
    ]
    g = lambda: [
        t() * t((0, 1), (j, -1), (k, 1), (I, -1)),
        -zj * t((j, -1), (I, -1)) * t((0, 1), (k, 1)),
        -t((0, 1), (j, -1)) * t((k, 1), (I, -1)),
    ]
    return _collect(n, j, k, {"HM-d": d, "HM-e": e, "HM-f": f, "HM-g": g})


def hirota_residuals(lat: TauLattice, n: int, j: int, k: int | None = None) -> list[HirotaResidual]:
    """HM-a and HM-b at (n, j); with ``k`` also HM-d..HM-g at (n, j, k)."""
    out = hirota_one(lat, n, j)
    if k is not None:
        out += hirota_two(lat, n, j, k)
    return out


# -- links to the polynomial system


def intrep_residuals(lat: TauLattice, system: BopsSystem, n: int, z) -> dict:
    """Relative residuals of the four integral representations at ``z``.

    Each compares I_n of the weight times (zeta - z), (1 - z/zeta),
    1/(1 - z/zeta) and 1/(zeta - z) with the polynomial or associated
    function of the base system at ``z``.
    """
    z = complex(z)
    In = lat.value(n)
    kn = system.kappa_at(n)
    sgn = (-1) ** n
    pairs = {
        "alpha": (lat.modified_value(n, alphas=[z]), sgn * In * system.phi_at(n, z) / kn),
        "alpha_star": (lat.modified_value(n, alpha_stars=[z]), In * system.phistar_at(n, z) / kn),
    }
    if n > 0:
        km = system.kappa_at(n - 1)
        pairs["beta_star"] = (lat.modified_value(n, beta_stars=[z]), In * km * system.xi_at(n - 1, z) / (2 * z ** (n - 1)))
        pairs["beta"] = (lat.modified_value(n, betas=[z]), sgn * In * km * system.xistar_at(n - 1, z) / (2 * z**n))
    return {name: abs(a - b) / max(abs(a), abs(b), ABS_FLOOR) for name, (a, b) in pairs.items()}


def _unit(M: int, *pairs) -> tuple:
    d = [0] * (M + 1)
    for idx, v in pairs:
        d[idx] += v
    return tuple(d)


def iform_residuals(lat: TauLattice, system: BopsSystem, n: int, j: int, k: int | None = None) -> dict:
    """Bilinear identities between shifted determinants of sizes n-1..n+1.

    Superscript j+ is the weight times (zeta - z_j); *j+ the weight times
    (1 - z_j/zeta); the minus versions divide instead.
    """
    M, v = lat.M, lat.value
    zj = _zs(lat, j)
    up, dn = _unit(M, (j, 1)), _unit(M, (j, -1))
    sup, sdn = _unit(M, (j, 1), (0, -1)), _unit(M, (j, -1), (0, 1))
    out = {}
    out["I-cas"] = _residual([v(n) * v(n + 1), -v(n, sup) * v(n + 1, sdn), zj * v(n, up) * v(n + 1, dn)])[0]
    if n >= 1:
        sg = (-1) ** n
        out["I-r"] = _residual([sg * system.r[n] * v(n) ** 2, -v(n, up) * v(n, sdn), -zj * v(n - 1, up) * v(n + 1, sdn)])[0]
        out["I-rbar"] = _residual([sg * system.rbar[n] * v(n) ** 2, -v(n, sup) * v(n, dn), -zj * v(n - 1, sup) * v(n + 1, dn)])[0]
    if k is None:
        return out
    zk = _zs(lat, k)
    kup, kdn = _unit(M, (k, 1)), _unit(M, (k, -1))
    ksup, ksdn = _unit(M, (k, 1), (0, -1)), _unit(M, (k, -1), (0, 1))
    jk_pp = _unit(M, (j, 1), (k, 1))
    jk_pm = _unit(M, (j, 1), (k, -1))
    sjk_pp = _unit(M, (j, 1), (0, -1), (k, 1))
    sjk_pm = _unit(M, (j, 1), (0, -1), (k, -1))
    out["I-jk++"] = _residual([v(n, up) * v(n + 1, kup), -v(n, kup) * v(n + 1, up), -(zj - zk) * v(n + 1) * v(n, jk_pp)])[0]
    out["I-jk+-"] = _residual([v(n, sup) * v(n + 1, ksdn), -zk * v(n, up) * v(n + 1, kdn), -v(n + 1) * v(n, jk_pm)])[0]
    out["I-*jk++"] = _residual([zj * v(n, up) * v(n, ksup), -zk * v(n, sup) * v(n, kup), -(zj - zk) * v(n) * v(n, sjk_pp)])[0]
    if n >= 1:
        out["I-*jk+-"] = _residual([zj * v(n - 1, sup) * v(n + 1, kdn), v(n, sup) * v(n, kdn), -v(n) * v(n, sjk_pm)])[0]
    return out
