"""Weights on the unit circle.

A weight is either a product of elementary factors

    (z - z_j)^rho        with |z_j| > 1          ("outer")
    (1 - z_j / z)^rho    with 0 < |z_j| < 1      ("conjugated")
    z^m                  with m an integer       ("monomial")

or an explicit table of Fourier coefficients.  Either base may carry a
rational modification

    prod (z - a) prod (1 - a*/z) / ( prod (z - b) prod (1 - b*/z) ).

All factors are single valued and analytic in an annulus around the unit
circle, so Fourier coefficients converge geometrically under the equispaced
trapezoid rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import AccuracyError, DomainError, GenericConditionError, InputError

__all__ = [
    "WeightError",
    "DomainError",
    "AccuracyError",
    "GenericConditionError",
    "WeightFactor",
    "RationalMod",
    "WeightSpec",
    "FourierTable",
    "evaluate_weight",
    "log_derivative",
    "fourier_coefficients",
    "caratheodory",
    "cauchy_transform",
    "g_moment",
    "modify_weight",
    "spec_to_dict",
    "spec_from_dict",
    "spec_to_json",
    "spec_from_json",
    "table_to_dict",
    "table_from_dict",
]

MERGE_TOL = 1e-14
CIRCLE_MARGIN = 1e-8
DEFAULT_TOL = 1e-12
DEFAULT_QUAD_MIN = 64
DEFAULT_QUAD_MAX = 2**16


WeightError = InputError


def _as_complex(x) -> complex:
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    return complex(x)


def _on_circle(a: complex, margin: float = CIRCLE_MARGIN) -> bool:
    return abs(abs(a) - 1.0) <= margin


@dataclass(frozen=True)
class WeightFactor:
    """One elementary factor of a factorised weight.

    Parameters
    ----------
    kind : {"outer", "conjugated", "monomial"}
        Type of factor.
    zero : complex or None
        Branch point location; ignored for monomials.
    exponent : complex
        Exponent rho, or the integer power for a monomial.
    """

    kind: str
    zero: complex | None
    exponent: complex

    def __post_init__(self):
        if self.kind not in ("outer", "conjugated", "monomial"):
            raise WeightError(f"unknown factor kind {self.kind!r}")
        object.__setattr__(self, "exponent", complex(self.exponent))
        if self.kind == "monomial":
            m = self.exponent
            if m.imag != 0.0 or m.real != round(m.real):
                raise WeightError(f"monomial exponent must be an integer, got {m}")
            object.__setattr__(self, "zero", None)
            return
        if self.zero is None:
            raise WeightError(f"{self.kind} factor needs a zero location")
        z0 = complex(self.zero)
        object.__setattr__(self, "zero", z0)
        if self.kind == "outer" and not abs(z0) > 1.0 + CIRCLE_MARGIN:
            raise WeightError(f"outer factor requires |zero| > 1, got {z0}")
        if self.kind == "conjugated" and not (0.0 < abs(z0) < 1.0 - CIRCLE_MARGIN):
            raise WeightError(f"conjugated factor requires 0 < |zero| < 1, got {z0}")
        e = self.exponent
        integral = e.imag == 0.0 and e.real == round(e.real)
        # integer powers are rational and need no integrability guard
        if not integral and e.real <= -1.0:
            raise WeightError(f"exponent real part must exceed -1, got {self.exponent}")

    @property
    def power(self) -> int:
        return int(round(self.exponent.real))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "monomial":
            return z ** self.power
        if self.kind == "outer":
            # (z - z_j)^rho = (-z_j)^rho (1 - z/z_j)^rho, principal branches
            return np.exp(self.exponent * np.log(-self.zero)) * np.power(1.0 - z / self.zero, self.exponent)
        return np.power(1.0 - self.zero / z, self.exponent)

    def log_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "monomial":
            return self.power / z
        if self.kind == "outer":
            return self.exponent / (z - self.zero)
        return self.exponent * (1.0 / (z - self.zero) - 1.0 / z)

    def describe(self) -> str:
        if self.kind == "monomial":
            return f"z^{self.power}"
        if self.kind == "outer":
            return f"(z - {self.zero})^{self.exponent}"
        return f"(1 - {self.zero}/z)^{self.exponent}"


@dataclass(frozen=True)
class RationalMod:
    """Zeros and poles of a rational modification (all complex tuples)."""

    alphas: tuple = ()
    alpha_stars: tuple = ()
    betas: tuple = ()
    beta_stars: tuple = ()

    def __post_init__(self):
        for name in ("alphas", "alpha_stars", "betas", "beta_stars"):
            vals = tuple(complex(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            for i, a in enumerate(vals):
                if _on_circle(a):
                    raise DomainError(f"{name}[{i}] = {a} lies on the unit circle")
                for b in vals[:i]:
                    if abs(a - b) <= MERGE_TOL:
                        raise GenericConditionError(f"repeated entry {a} in {name}")
        for a in self.alphas:
            for b in self.betas:
                if abs(a - b) <= MERGE_TOL:
                    raise GenericConditionError(f"alpha {a} coincides with beta {b}")
        for a in self.alpha_stars:
            for b in self.beta_stars:
                if abs(a - b) <= MERGE_TOL:
                    raise GenericConditionError(f"alpha* {a} coincides with beta* {b}")

    @property
    def empty(self) -> bool:
        return not (self.alphas or self.alpha_stars or self.betas or self.beta_stars)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for a in self.alphas:
            out = out * (z - a)
        for a in self.alpha_stars:
            out = out * (1.0 - a / z)
        for b in self.betas:
            out = out / (z - b)
        for b in self.beta_stars:
            out = out / (1.0 - b / z)
        return out

    def log_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for a in self.alphas:
            out = out + 1.0 / (z - a)
        for a in self.alpha_stars:
            out = out + 1.0 / (z - a) - 1.0 / z
        for b in self.betas:
            out = out - 1.0 / (z - b)
        for b in self.beta_stars:
            out = out - 1.0 / (z - b) + 1.0 / z
        return out


@dataclass(frozen=True)
class FourierTable:
    """Truncated two-sided sequence of Fourier coefficients.

    Attributes
    ----------
    k_min, k_max : int
        Index range held in ``coeffs``.
    coeffs : ndarray
        ``coeffs[k - k_min]`` is w_k.
    tail_bound : float
        Estimate of max |w_k| outside the held range.
    """

    k_min: int
    k_max: int
    coeffs: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.k_max - self.k_min + 1,):
            raise WeightError("coefficient array does not match the index range")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, k):
        """Return w_k, zero outside the held range (vectorised over k)."""
        k = np.asarray(k)
        idx = k - self.k_min
        inside = (idx >= 0) & (idx < self.coeffs.size)
        out = np.where(inside, self.coeffs[np.clip(idx, 0, self.coeffs.size - 1)], 0.0)
        return out[()] if out.ndim == 0 else out

    def evaluate(self, z):
        """Sum the Laurent series at ``z``."""
        z = np.asarray(z, dtype=complex)
        ks = np.arange(self.k_min, self.k_max + 1)
        return (z[..., None] ** ks) @ self.coeffs

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        ks = np.arange(self.k_min, self.k_max + 1)
        return (z[..., None] ** (ks - 1)) @ (ks * self.coeffs)


@dataclass(frozen=True)
class WeightSpec:
    """Symbolic description of a weight on the unit circle.

    Exactly one base is used: the factor list (possibly empty, meaning w = 1)
    or an explicit Fourier table.
    """

    factors: tuple = ()
    base_fourier: FourierTable | None = None
    rational_mod: RationalMod | None = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.base_fourier is not None and self.factors:
            raise WeightError("give either factors or base_fourier, not both")
        if self.rational_mod is not None and self.rational_mod.empty:
            object.__setattr__(self, "rational_mod", None)

    def _points_of_concern(self):
        for f in self.factors:
            if f.kind != "monomial":
                yield f.zero, f.describe()
        if self.rational_mod is not None:
            for name in ("alphas", "alpha_stars", "betas", "beta_stars"):
                for a in getattr(self.rational_mod, name):
                    yield a, f"{name} entry {a}"

    @property
    def needs_nonzero(self) -> bool:
        if any(f.kind != "outer" for f in self.factors):
            return True
        if self.base_fourier is not None and self.base_fourier.k_min < 0:
            return True
        rm = self.rational_mod
        return rm is not None and bool(rm.alpha_stars or rm.beta_stars)


def evaluate_weight(spec: WeightSpec, z):
    """Evaluate the weight at ``z`` (scalar or array).

    Raises
    ------
    DomainError
        If ``z`` sits on a zero or pole of some factor.
    """
    za = np.asarray(z, dtype=complex)
    for loc, label in spec._points_of_concern():
        if np.any(np.abs(za - loc) <= MERGE_TOL):
            raise DomainError(f"weight evaluated at the singular point of factor {label}")
    if spec.needs_nonzero and np.any(za == 0):
        raise DomainError("weight evaluated at z = 0")
    if spec.base_fourier is not None:
        out = spec.base_fourier.evaluate(za)
    else:
        out = np.ones_like(za)
        for f in spec.factors:
            out = out * f(za)
    if spec.rational_mod is not None:
        out = out * spec.rational_mod(za)
    return out[()] if np.ndim(out) == 0 else out


def log_derivative(spec: WeightSpec, z):
    """Return w'(z)/w(z)."""
    za = np.asarray(z, dtype=complex)
    if spec.base_fourier is not None:
        out = spec.base_fourier.derivative(za) / spec.base_fourier.evaluate(za)
    else:
        out = np.zeros_like(za)
        for f in spec.factors:
            out = out + f.log_derivative(za)
    if spec.rational_mod is not None:
        out = out + spec.rational_mod.log_derivative(za)
    return out[()] if np.ndim(out) == 0 else out


def _split_fft(c: np.ndarray) -> tuple[int, np.ndarray]:
    """Reorder raw FFT output into ascending k, dropping the Nyquist bin."""
    N = c.size
    h = N // 2
    return -(h - 1), np.r_[c[h + 1:], c[:h]]


def fourier_coefficients(
    spec: WeightSpec,
    tol: float = DEFAULT_TOL,
    n_min: int = DEFAULT_QUAD_MIN,
    n_max: int = DEFAULT_QUAD_MAX,
) -> FourierTable:
    """Fourier coefficients w_k of the weight by the equispaced trapezoid rule.

    The number of nodes doubles from ``n_min`` until the largest coefficient
    in the outer quarter of the index range drops below ``tol``.

    Raises
    ------
    AccuracyError
        If ``n_max`` nodes do not reach the tolerance.
    """
    if tol <= 0:
        raise WeightError("tol must be positive")
    if spec.base_fourier is not None and spec.rational_mod is None:
        return spec.base_fourier
    N = int(n_min)
    tail = np.inf
    while N <= n_max:
        theta = 2.0 * np.pi * np.arange(N) / N
        vals = evaluate_weight(spec, np.exp(1j * theta))
        k_min, c = _split_fft(np.fft.fft(vals) / N)
        ks = np.arange(k_min, k_min + c.size)
        tail = float(np.max(np.abs(c[np.abs(ks) >= N // 4])))
        if tail < tol:
            return FourierTable(k_min, k_min + c.size - 1, c, tail)
        N *= 2
    raise AccuracyError(f"Fourier tail {tail:.3e} above tol {tol:.1e} at {n_max} nodes")


def caratheodory(table: FourierTable, z, margin: float = CIRCLE_MARGIN):
    """Caratheodory function F(z) from the kernel (zeta + z)/(zeta - z).

    Inside the disk F = w_0 + 2 sum_{k>=1} w_k z^k; outside
    F = -w_0 - 2 sum_{k>=1} w_{-k} z^{-k}.
    """
    z = np.asarray(z, dtype=complex)
    return cauchy_transform(table, np.array([1.0 + 0j]), 0, z, margin=margin)


def cauchy_transform(table: FourierTable, coeffs, offset: int, z, margin: float = CIRCLE_MARGIN):
    """Integrate the Cauchy kernel against w times a Laurent polynomial.

    Computes  int (zeta+z)/(zeta-z) w(zeta) p(zeta) dzeta/(2 pi i zeta)
    with p(zeta) = sum_i coeffs[i] zeta^(i + offset), via the kernel series
    valid on the side of the unit circle where ``z`` lies.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(np.abs(z) - 1.0) <= margin):
        raise DomainError("Cauchy transform evaluated on the unit circle")
    t_in, t_out = transform_series(table, coeffs, offset)
    inside = np.abs(z) < 1.0
    out = np.empty_like(z)
    if np.any(inside):
        out[inside] = np.polynomial.polynomial.polyval(z[inside], t_in)
    if np.any(~inside):
        out[~inside] = -np.polynomial.polynomial.polyval(1.0 / z[~inside], t_out)
    return out[()] if out.ndim == 0 else out


def transform_series(table: FourierTable, coeffs, offset: int):
    """Power-series coefficients of the Cauchy transform on each side.

    Returns ``(t_in, t_out)`` with transform = sum t_in[m] z^m inside the disk
    and transform = -sum t_out[m] z^{-m} outside.
    """
    a = np.asarray(coeffs, dtype=complex)
    js = np.arange(a.size) + offset
    # inside: t_m = c_m sum_j a_j w_{m-j},  m = 0..k_max + max j
    m_in = np.arange(0, max(table.k_max + js[-1], 0) + 1)
    t_in = table[m_in[:, None] - js[None, :]] @ a
    t_in[1:] *= 2.0
    # outside: s_m = c_m sum_j a_j w_{-j-m},  m = 0..-k_min - min j
    m_out = np.arange(0, max(-table.k_min - js[0], 0) + 1)
    t_out = table[-m_out[:, None] - js[None, :]] @ a
    t_out[1:] *= 2.0
    return np.atleast_1d(t_in), np.atleast_1d(t_out)


def g_moment(table: FourierTable, j: int, z):
    """Interior moment g_j(z) = 2 sum_{m>=0} z^(m+1) w_(m+1-j)."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("g_moment uses the interior expansion and needs |z| < 1")
    m = np.arange(0, table.k_max + j + 1)
    c = 2.0 * np.atleast_1d(table[m + 1 - j])
    out = z * np.polynomial.polynomial.polyval(z, c)
    return out[()] if out.ndim == 0 else out


def _bump(factors: list, kind: str, zero, delta: int) -> bool:
    for i, f in enumerate(factors):
        if f.kind == kind and (kind == "monomial" or abs(f.zero - zero) <= MERGE_TOL):
            e = f.exponent + delta
            if e == 0:
                factors.pop(i)
            else:
                factors[i] = replace(f, exponent=e)
            return True
    return False


def _multiply_linear(factors: list, root: complex, delta: int):
    """Multiply the factor list by (z - root)^delta keeping single valuedness."""
    if abs(root) <= MERGE_TOL:
        _add_monomial(factors, delta)
        return
    if abs(root) > 1.0:
        if not _bump(factors, "outer", root, delta):
            factors.append(WeightFactor("outer", root, delta))
    else:
        # z - a = z (1 - a/z)
        if not _bump(factors, "conjugated", root, delta):
            factors.append(WeightFactor("conjugated", root, delta))
        _add_monomial(factors, delta)


def _add_monomial(factors: list, delta: int):
    if delta and not _bump(factors, "monomial", None, delta):
        factors.append(WeightFactor("monomial", None, delta))


def modify_weight(
    spec: WeightSpec,
    alphas: Sequence = (),
    alpha_stars: Sequence = (),
    betas: Sequence = (),
    beta_stars: Sequence = (),
) -> WeightSpec:
    """Multiply a weight by a rational factor.

    Factorised bases absorb each linear factor as an exponent change, so a
    zero placed on an existing branch point shifts that exponent by one.
    Fourier-table bases keep the modification symbolically.

    Raises
    ------
    DomainError
        A zero or pole lies on the unit circle.
    GenericConditionError
        An alpha equals a beta, or a list repeats an entry.
    """
    mod = RationalMod(alphas, alpha_stars, betas, beta_stars)
    if spec.base_fourier is not None:
        old = spec.rational_mod or RationalMod()
        merged = RationalMod(
            old.alphas + mod.alphas,
            old.alpha_stars + mod.alpha_stars,
            old.betas + mod.betas,
            old.beta_stars + mod.beta_stars,
        )
        return replace(spec, rational_mod=merged)
    factors = list(spec.factors)
    for a in mod.alphas:
        _multiply_linear(factors, a, +1)
    for b in mod.betas:
        _multiply_linear(factors, b, -1)
    # 1 - a/z = (z - a)/z
    for a in mod.alpha_stars:
        _multiply_linear(factors, a, +1)
        _add_monomial(factors, -1)
    for b in mod.beta_stars:
        _multiply_linear(factors, b, -1)
        _add_monomial(factors, +1)
    return replace(spec, factors=tuple(factors))


# --- JSON -----------------------------------------------------------------

def _cpair(x) -> list:
    x = complex(x)
    return [float(x.real), float(x.imag)]


def spec_to_dict(spec: WeightSpec) -> dict:
    out: dict = {
        "factors": [
            {"kind": f.kind, "zero": None if f.zero is None else _cpair(f.zero), "exponent": _cpair(f.exponent)}
            for f in spec.factors
        ]
    }
    if spec.base_fourier is not None:
        out["base_fourier"] = table_to_dict(spec.base_fourier)
    if spec.rational_mod is not None:
        rm = spec.rational_mod
        out["rational_mod"] = {
            name: [_cpair(a) for a in getattr(rm, name)]
            for name in ("alphas", "alpha_stars", "betas", "beta_stars")
        }
    return out


def spec_from_dict(d: dict) -> WeightSpec:
    if not isinstance(d, dict):
        raise WeightError("weight spec must be a JSON object")
    factors = []
    for item in d.get("factors", []):
        zero = item.get("zero")
        factors.append(
            WeightFactor(item["kind"], None if zero is None else _as_complex(zero), _as_complex(item["exponent"]))
        )
    base = d.get("base_fourier")
    rm = d.get("rational_mod")
    mod = None
    if rm:
        mod = RationalMod(**{
            name: tuple(_as_complex(a) for a in rm.get(name, []))
            for name in ("alphas", "alpha_stars", "betas", "beta_stars")
        })
    return WeightSpec(tuple(factors), None if base is None else table_from_dict(base), mod)


def spec_to_json(spec: WeightSpec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def spec_from_json(text: str) -> WeightSpec:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightError(f"malformed weight JSON: {exc}") from exc
    try:
        return spec_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise WeightError(f"malformed weight spec: {exc}") from exc


def table_to_dict(table: FourierTable) -> dict:
    return {
        "k_min": int(table.k_min),
        "k_max": int(table.k_max),
        "coeffs": [_cpair(c) for c in table.coeffs],
        "tail_bound": float(table.tail_bound),
    }


def table_from_dict(d: dict) -> FourierTable:
    return FourierTable(
        int(d["k_min"]), int(d["k_max"]), np.array([_as_complex(c) for c in d["coeffs"]]), float(d.get("tail_bound", 0.0))
    )
