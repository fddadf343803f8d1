"""Residual suites behind ``artifact verify``.

Each suite returns a list of :class:`Check` records, one per identity and
degree (maxima over the sampled points are taken inside a record).  Values
are relative residuals, scaled by the largest term where that is natural
and by max(1, |reference|) otherwise.  Tags name the identity by content.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import bops, cgu, schlesinger as sch, semiclassical as sc, tau
from .errors import InapplicableError
from .weight import WeightSpec, fourier_coefficients, log_derivative, modify_weight

SUITES = ("core", "cgu", "semiclassical", "schlesinger", "hirota")

TOLERANCES = {
    # core
    "kappa-det": 1e-12,
    "det-ratio": 1e-10,
    "kappa-step": 1e-10,
    "lambda-step": 1e-10,
    "det-Y": 1e-10,
    "casoratian-a": 1e-10,
    "casoratian-b": 1e-10,
    "casoratian-c": 1e-10,
    "expansions": 1e-10,
    "second-order": 1e-10,
    "orthogonality": 1e-10,
    # cgu
    "cgu-oracle": 1e-8,
    "cgu-recurrence-compat": 1e-10,
    "cgu-spectral-compat": 1e-8,
    # semiclassical
    "residue-sum": 1e-10,
    "sum-identities": 1e-9,
    "trace": 1e-9,
    "spectral-ode": 1e-7,
    "recurrence-spectral-compat": 1e-8,
    "formal-monodromy": 1e-9,
    "eigenvectors": 1e-9,
    "bilinear": 1e-9,
    "deformation-rates": 1e-5,
    "deformation-ode": 1e-5,
    "schlesinger-pde": 1e-5,
    # schlesinger
    "shift-oracle": 1e-8,
    "shift-forms": 1e-9,
    "shift-forms-down": 1e-8,
    "shift-roundtrip": 1e-9,
    "shift-commute": 1e-9,
    "shift-residues": 1e-9,
    "shift-recurrence-compat": 1e-10,
    "shift-spectral-compat": 1e-8,
    "shift-deformation-compat": 1e-5,
    # hirota
    "HM-a": 1e-8,
    "HM-b": 1e-8,
    "HM-d": 1e-8,
    "HM-e": 1e-8,
    "HM-f": 1e-8,
    "HM-g": 1e-8,
    "integral-rep": 1e-9,
    "I-form": 1e-8,
}

SPECTRAL_FD_STEP = 1e-6


class Check(NamedTuple):
    id: str
    suite: str
    tag: str
    n: int | None
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tol)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "suite": self.suite,
            "tag": self.tag,
            "n": self.n,
            "value": float(self.value),
            "tol": float(self.tol),
            "pass": self.passed,
        }


@dataclass
class Context:
    """Shared inputs of the suites."""

    spec: WeightSpec
    n_max: int = 8
    seed: int = 0
    fd_step: float = 1e-5
    quad_max: int = 2**16
    shift: cgu.CguShift | None = None
    tol_map: dict | None = None

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self._systems: dict = {}
        self._data = None

    def tol(self, tag: str) -> float:
        m = self.tol_map or {}
        return float(m.get(tag, TOLERANCES[tag]))

    def system(self, depth: int) -> bops.BopsSystem:
        if depth not in self._systems:
            t = fourier_coefficients(self.spec, tol=1e-14, n_max=self.quad_max)
            self._systems[depth] = bops.build_system(t, depth)
        return self._systems[depth]

    @property
    def data(self) -> sc.SemiClassicalData:
        if self._data is None:
            self._data = sc.SemiClassicalData.from_spec(self.spec)
        return self._data

    @property
    def semiclassical(self) -> bool:
        try:
            return self.spec.base_fourier is None and self.data.M >= 1
        except InapplicableError:
            return False

    def points(self, count: int, region: str, avoid=()) -> np.ndarray:
        """Seeded sample points off the circle, the real axis and ``avoid``."""
        lo, hi = (0.15, 0.85) if region == "interior" else (1.2, 3.0)
        out = []
        while len(out) < count:
            r = self.rng.uniform(lo, hi)
            t = self.rng.uniform(0, 2 * np.pi)
            z = r * np.exp(1j * t)
            if abs(z.imag) < 0.1 or any(abs(z - a) < 0.1 for a in avoid):
                continue
            out.append(z)
        return np.array(out)


def _rel(res, scale) -> float:
    return float(np.max(np.abs(res)) / max(1.0, float(np.max(np.abs(scale)))))


class _Collector:
    def __init__(self, ctx: Context, suite: str):
        self.ctx, self.suite, self.items = ctx, suite, []

    def add(self, tag: str, n, value, name: str | None = None):
        key = f"{self.suite}/{name or tag}" + ("" if n is None else f"/n={n:02d}")
        self.items.append(Check(key, self.suite, tag, n, float(value), self.ctx.tol(tag)))


# -- core


def core_suite(ctx: Context) -> list[Check]:
    out = _Collector(ctx, "core")
    N = ctx.n_max
    S = ctx.system(N + 3)
    inner = ctx.points(20, "interior")
    outer = ctx.points(20, "exterior")
    pts = np.r_[inner, outer]
    for n in range(N + 1):
        out.add("kappa-det", n, abs(S.kappa[n] ** 2 * S.I[n + 1] - S.I[n]) / abs(S.I[n]))
        if n >= 1:
            one = 1 - S.r[n] * S.rbar[n]
            out.add("det-ratio", n, abs(S.I[n + 1] * S.I[n - 1] / S.I[n] ** 2 - one) / max(1, abs(one)))
            d = S.kappa[n] ** 2 - S.kappa[n - 1] ** 2 - S.phi0(n) * S.phibar0(n)
            out.add("kappa-step", n, abs(d) / max(1, abs(S.kappa[n] ** 2)))
            d = S.lam(n) / S.kappa[n] - S.lam(n - 1) / S.kappa[n - 1] - S.r[n] * S.rbar[n - 1]
            out.add("lambda-step", n, abs(d))
        det, cas = 0.0, np.zeros(3)
        for z in pts:
            y = bops.y_matrix(S, ctx.spec, n, z)
            det = max(det, y.det_residual() / max(1, abs(2 * z**n / y.w)))
            p, ps, x, xs = sc.point_values(S, n, z)
            p1, ps1, x1, xs1 = sc.point_values(S, n + 1, z)
            c = bops.casoratian_residuals(S, n, z)
            scales = (
                max(abs(p1 * x), abs(x1 * p)),
                max(abs(ps1 * xs), abs(xs1 * ps)),
                max(abs(p * xs), abs(x * ps), abs(2 * z**n)),
            )
            cas = np.maximum(cas, [abs(v) / max(1, s) for v, s in zip(c, scales)])
        out.add("det-Y", n, det)
        for tag, v in zip(("casoratian-a", "casoratian-b", "casoratian-c"), cas):
            out.add(tag, n, v)
        if 2 <= n:
            e = bops.expansion_residuals(S, n)
            out.add("expansions", n, max(abs(v) for v in e.values()))
        if 1 <= n <= N - 1 and abs(S.r[n]) > 1e-14:
            vals = [abs(bops.second_order_residual(S, n, z)) / max(1, abs(S.phi_at(n + 1, z) / S.kappa[n + 1])) for z in pts]
            out.add("second-order", n, max(vals))
    out.add("orthogonality", None, bops.orthogonality_residual(S, N))
    return out.items


# -- cgu


def default_shifts() -> dict:
    return {
        "K1": cgu.CguShift(alphas=[3 + 1j]),
        "L1": cgu.CguShift(betas=[3]),
        "K1star": cgu.CguShift(alpha_stars=[-0.4]),
        "L1star": cgu.CguShift(beta_stars=[0.4]),
        "composite": cgu.CguShift([2.5], [0.5j], [3], [0.4]),
    }


def compare_systems(T: bops.BopsSystem, O: bops.BopsSystem, n_top: int) -> dict:
    """Relative column differences between two systems, phi up to the kappa sign."""
    n = np.arange(n_top + 1)
    kt, ko = np.asarray(T.kappa)[n], np.asarray(O.kappa)[n]
    sg = np.where(np.abs(kt - ko) <= np.abs(kt + ko), 1, -1)
    out = {
        "kappa_sq": float(np.max(np.abs(kt**2 - ko**2) / np.maximum(1, np.abs(ko**2)))),
        "r": float(np.max(np.abs(np.asarray(T.r)[n] - np.asarray(O.r)[n]) / np.maximum(1, np.abs(np.asarray(O.r)[n])))),
        "rbar": float(
            np.max(np.abs(np.asarray(T.rbar)[n] - np.asarray(O.rbar)[n]) / np.maximum(1, np.abs(np.asarray(O.rbar)[n])))
        ),
        "phi": max(
            float(np.max(np.abs(sg[m] * np.asarray(T.phi[m]) - O.phi[m])) / max(1, np.max(np.abs(O.phi[m]))))
            for m in n
        ),
        "phibar": max(
            float(np.max(np.abs(sg[m] * np.asarray(T.phibar[m]) - O.phibar[m])) / max(1, np.max(np.abs(O.phibar[m]))))
            for m in n
        ),
    }
    return out


def _a_callable(S, D, n):
    rs = sc.residue_set(S, D, n, tol=np.inf)
    return lambda z: sc.spectral_matrix(rs, D, z)


def cgu_suite(ctx: Context) -> list[Check]:
    out = _Collector(ctx, "cgu")
    N = min(ctx.n_max, 10)
    base = ctx.system(N + 4)
    shifts = default_shifts()
    if ctx.shift is not None:
        shifts = {"requested": ctx.shift}
    for name, shift in shifts.items():
        T = cgu.transform_system(base, shift, N)
        mod = modify_weight(ctx.spec, shift.alphas, shift.alpha_stars, shift.betas, shift.beta_stars)
        O = bops.build_system(fourier_coefficients(mod, tol=1e-15, n_max=ctx.quad_max), N)
        diff = compare_systems(T, O, N)
        out.add("cgu-oracle", None, max(diff.values()), name=f"oracle-{name}")
    single = {k: v for k, v in shifts.items() if k in cgu.KINDS}
    locs = {k: (s.alphas + s.alpha_stars + s.betas + s.beta_stars)[0] for k, s in single.items()}
    avoid = list(locs.values()) + (list(ctx.data.zs) if ctx.semiclassical else [])
    for kind, loc in locs.items():
        for n in range(min(ctx.n_max, 6) + 1):
            pts = np.r_[ctx.points(8, "interior", avoid), ctx.points(8, "exterior", avoid)]
            v = max(np.max(np.abs(cgu.recurrence_compat_residual(base, kind, loc, n, z))) for z in pts)
            out.add("cgu-recurrence-compat", n, v, name=f"recurrence-compat-{kind}")
            if ctx.semiclassical and kind in ("K1", "L1"):
                a_n = _a_callable(base, ctx.data, n)
                vals = []
                for z in pts:
                    R = cgu.generator(base, kind, loc, n)
                    scale = max(1, np.max(np.abs(R(z) @ a_n(z))))
                    vals.append(np.max(np.abs(cgu.spectral_compat_residual(base, a_n, kind, loc, n, z))) / scale)
                out.add("cgu-spectral-compat", n, max(vals), name=f"spectral-compat-{kind}")
    return out.items


# -- semiclassical


def default_velocities(M: int) -> list:
    cycle = [1.0, 0.5j, -0.3 + 0.2j, 0.7]
    return [cycle[i % len(cycle)] for i in range(M)]


def _sign_align(a, b):
    return 1 if abs(a - b) <= abs(a + b) else -1


def semiclassical_suite(ctx: Context) -> list[Check]:
    out = _Collector(ctx, "semiclassical")
    D = ctx.data
    N = min(ctx.n_max, 6)
    S = ctx.system(N + 2)
    avoid = list(D.zs)
    pts = np.r_[ctx.points(6, "interior", avoid), ctx.points(6, "exterior", avoid)]
    vel = default_velocities(D.M)
    delta = ctx.fd_step
    plus = sc.perturb(ctx.spec, D, vel, delta, N + 2)
    minus = sc.perturb(ctx.spec, D, vel, -delta, N + 2)
    zd = np.r_[0j, np.asarray(vel, dtype=complex)]
    for n in range(N + 1):
        rs = sc.residue_set(S, D, n, tol=np.inf)
        out.add("residue-sum", n, _rel(rs.A_inf + sum(rs.A), rs.A_inf))
        si = sc.sum_identities(S, D, n)
        out.add("sum-identities", n, max(abs(v) for v in si.values()) / max(1, abs(n + D.rhos.sum())))
        blocks = sc.formal_monodromy(rs, S, D)
        out.add("formal-monodromy", n, max(b.residual / max(1, np.max(np.abs(b.G))) for b in blocks))
        eig = 0.0
        for j in range(1, D.M + 1):
            p, ps, x, xs = sc.point_values(S, n, D.zs[j])
            A = rs.A[j]
            u = np.array([x, -xs])
            eig = max(eig, _rel(A @ np.array([p, ps]), A), _rel(A @ u + D.rhos[j] * u, A))
        out.add("eigenvectors", n, eig)
        tr, ode, comp = 0.0, 0.0, 0.0
        for z in pts:
            Az = sc.spectral_matrix(rs, D, z)
            lw = complex(log_derivative(ctx.spec, z))
            tr = max(tr, abs(np.trace(Az) - n / z + lw) / max(1, abs(lw), abs(n / z)))
            h = SPECTRAL_FD_STEP
            Yp = bops.y_matrix(S, ctx.spec, n, z + h).entries
            Ym = bops.y_matrix(S, ctx.spec, n, z - h).entries
            Y = bops.y_matrix(S, ctx.spec, n, z).entries
            ode = max(ode, _rel((Yp - Ym) / (2 * h) - Az @ Y, Az @ Y))
            if n + 1 <= S.n_max - 1:
                comp = max(comp, sc.spectral_compat_residual(S, D, n, z) / max(1, np.max(np.abs(Az))))
        out.add("trace", n, tr)
        out.add("spectral-ode", n, ode)
        out.add("recurrence-spectral-compat", n, comp)
        bl = 0.0
        for j in range(1, D.M + 1):
            B = sc.bilinear_products(S, D, n, j, tol=np.inf)
            p, ps, x, xs = sc.point_values(S, n, D.zs[j])
            scale = max(1.0, abs(p * x), abs(ps * xs), abs(p * xs), abs(ps * x))
            bl = max(bl, max(abs(v) for v in B.residuals.values()) / scale)
        out.add("bilinear", n, bl)
        # finite differences along the deformation
        rates = sc.deformation_derivatives(S, D, n, vel)
        Pp, Pm = plus.system, minus.system
        kp = Pp.kappa[n] * _sign_align(Pp.kappa[n], S.kappa[n])
        km = Pm.kappa[n] * _sign_align(Pm.kappa[n], S.kappa[n])
        fd = {
            "kappa": (kp - km) / (2 * delta) / S.kappa[n] - rates.kappa_log,
            "r": (Pp.r[n] - Pm.r[n]) / (2 * delta) - rates.r,
            "rbar": (Pp.rbar[n] - Pm.rbar[n]) / (2 * delta) - rates.rbar,
        }
        for j in range(1, D.M + 1):
            zp, zm = D.zs[j] + zd[j] * delta, D.zs[j] - zd[j] * delta
            P = [Q.phistar_at(n, z) / Q.phi_at(n, z) for Q, z in ((Pp, zp), (Pm, zm))]
            Qv = [Q.xi_at(n, z) / Q.xistar_at(n, z) for Q, z in ((Pp, zp), (Pm, zm))]
            fd[f"P{j}"] = ((P[0] - P[1]) / (2 * delta) - rates.P_dot[j - 1]) / max(1, abs(rates.P_dot[j - 1]))
            fd[f"Q{j}"] = ((Qv[0] - Qv[1]) / (2 * delta) - rates.Q_dot[j - 1]) / max(1, abs(rates.Q_dot[j - 1]))
        out.add("deformation-rates", n, max(abs(v) for v in fd.values()))
        dode = 0.0
        for z in pts:
            sp = _sign_align(Pp.kappa[n], S.kappa[n])
            sm = _sign_align(Pm.kappa[n], S.kappa[n])
            dY = (sp * plus.y(n, z) - sm * minus.y(n, z)) / (2 * delta)
            Bz = sc.deformation_matrix(rs, S, D, vel, z, rates)
            Y = bops.y_matrix(S, ctx.spec, n, z).entries
            dode = max(dode, _rel(dY - Bz @ Y, Bz @ Y))
        out.add("deformation-ode", n, dode)
        rhs = sc.schlesinger_rhs(rs, S, D, vel, rates)
        rp = sc.residue_set(Pp, plus.data, n, tol=np.inf)
        rm = sc.residue_set(Pm, minus.data, n, tol=np.inf)
        pde = 0.0
        for j in range(1, D.M + 1):
            dA = (rp.A[j] - rm.A[j]) / (2 * delta)
            pde = max(pde, _rel(dA - rhs[j - 1], rs.A[j]))
        pde = max(pde, _rel((rp.A_inf - rm.A_inf) / (2 * delta) - rhs[-1], rs.A_inf))
        out.add("schlesinger-pde", n, pde)
    return out.items


# -- schlesinger


def schlesinger_suite(ctx: Context, requests: list | None = None) -> list[Check]:
    out = _Collector(ctx, "schlesinger")
    D = ctx.data
    N = min(ctx.n_max, 8)
    S = ctx.system(N + 4)
    pairs = requests or [(j, d) for j in range(1, D.M + 1) for d in (1, -1)]
    avoid = list(D.zs)
    vel = default_velocities(D.M)
    for j, d in pairs:
        label = f"j{j}{'+' if d == 1 else '-'}"
        ms = sch.shifted_spec(ctx.spec, D, sch.ExponentShift.single(D.M, j, d).shifts)
        O = bops.build_system(fourier_coefficients(ms, tol=1e-14, n_max=ctx.quad_max), N)
        T, Dm = sch.shifted_system(S, D, j, d, N)
        back = None
        for n in range(N + 1):
            c = sch.shifted_coeffs(S, D, j, d, n, forms=False)
            ko2 = O.kappa[n] ** 2
            v = max(
                abs(c.kappa_sq - ko2) / max(1, abs(ko2)),
                abs(c.r - O.r[n]) / max(1, abs(O.r[n])),
                abs(c.rbar - O.rbar[n]) / max(1, abs(O.rbar[n])),
            )
            out.add("shift-oracle", n, v, name=f"oracle-{label}")
            f = sch.shifted_coeffs(S, D, j, d, n, forms=True, tol=np.inf).forms_residual
            if np.isfinite(f):
                out.add("shift-forms" if d == 1 else "shift-forms-down", n, f, name=f"forms-{label}")
        diff = compare_systems(T, O, N)
        out.add("shift-oracle", None, max(diff.values()), name=f"system-{label}")
        # round trip through the opposite shift
        rt = 0.0
        for n in range(1, min(N, 6) + 1):
            c = sch.shifted_coeffs(T, Dm, j, -d, n, forms=False)
            rt = max(
                rt,
                abs(c.kappa_sq - S.kappa[n] ** 2) / max(1, abs(S.kappa[n] ** 2)),
                abs(c.r - S.r[n]) / max(1, abs(S.r[n])),
                abs(c.rbar - S.rbar[n]) / max(1, abs(S.rbar[n])),
            )
        out.add("shift-roundtrip", None, rt, name=f"roundtrip-{label}")
        for n in range(min(N, 6) + 1):
            pts = np.r_[ctx.points(4, "interior", avoid), ctx.points(4, "exterior", avoid)]
            rs = sc.residue_set(S, D, n, tol=np.inf)
            A1 = sch.transformed_residues(rs, S, D, j, d, n)
            A2 = sch.transformed_residues(rs, S, D, j, d, n, route="conjugation")
            scale = max(1, max(np.max(np.abs(a)) for a in A2.A))
            out.add("shift-residues", n, max(np.max(np.abs(a - b)) for a, b in zip(A1.A, A2.A)) / scale, name=f"residues-{label}")
            rec = spc = dfm = 0.0
            for i, z in enumerate(pts):
                cr = sch.compatibility_residuals(
                    S, D, j, d, n, z, velocities=vel if i == 0 else None, spec=ctx.spec if i == 0 else None, delta=ctx.fd_step
                )
                rel = cr.relative()
                rec = max(rec, rel["recurrence"])
                spc = max(spc, rel["spectral"])
                dfm = max(dfm, rel.get("deformation", 0.0))
            out.add("shift-recurrence-compat", n, rec, name=f"recurrence-compat-{label}")
            out.add("shift-spectral-compat", n, spc, name=f"spectral-compat-{label}")
            out.add("shift-deformation-compat", n, dfm, name=f"deformation-compat-{label}")
    if D.M >= 2:
        z = ctx.points(1, "exterior", avoid)[0]
        for dj, dk in ((1, 1), (1, -1), (-1, -1)):
            worst = 0.0
            for n in range(1, min(N, 4) + 1):
                c = sch.commutativity_residual(S, D, 1, 2, dj, dk, n, z)
                worst = max(worst, _rel(c.residual, 1), abs(c.kappa_sq_jk - c.kappa_sq_kj) / max(1, abs(c.kappa_sq_jk)))
            out.add("shift-commute", None, worst, name=f"commute-{dj:+d}{dk:+d}")
    return out.items


# -- hirota


def hirota_suite(ctx: Context) -> list[Check]:
    out = _Collector(ctx, "hirota")
    lat = tau.TauLattice(ctx.spec, ctx.data, quad_max=ctx.quad_max)
    D = ctx.data
    N = min(ctx.n_max, 6)
    S = lat.base_system(N + 2)
    for n in range(N + 1):
        worst: dict = {}
        for j in range(1, D.M + 1):
            found = tau.hirota_one(lat, n, j)
            for k in range(D.M + 1):
                if k != j:
                    found += tau.hirota_two(lat, n, j, k)
            for r in found:
                worst[r.equation] = max(worst.get(r.equation, 0.0), r.residual)
        for eq in sorted(worst):
            out.add(eq, n, worst[eq])
        ir, fm = 0.0, 0.0
        pts = list(D.zs[1:]) + list(ctx.points(4, "interior", D.zs)) + list(ctx.points(4, "exterior", D.zs))
        for z in pts:
            ir = max(ir, max(tau.intrep_residuals(lat, S, n, z).values()))
        for j in range(1, D.M + 1):
            for k in [None] + [k for k in range(D.M + 1) if k != j]:
                res = tau.iform_residuals(lat, S, n, j, k)
                fm = max(fm, max(res.values()))
        out.add("integral-rep", n, ir)
        out.add("I-form", n, fm)
    return out.items


RUNNERS: dict[str, Callable[[Context], list[Check]]] = {
    "core": core_suite,
    "cgu": cgu_suite,
    "semiclassical": semiclassical_suite,
    "schlesinger": schlesinger_suite,
    "hirota": hirota_suite,
}

NEEDS_SINGULARITIES = {"semiclassical", "schlesinger", "hirota"}


def run(ctx: Context, suite: str) -> list[Check]:
    """Run one suite, or every applicable suite for ``"all"``.

    ``"all"`` skips the suites that need singular points when the weight
    has none besides the origin.
    """
    if suite == "all":
        names = [s for s in SUITES if ctx.semiclassical or s not in NEEDS_SINGULARITIES]
    elif suite in RUNNERS:
        names = [suite]
    else:
        raise KeyError(suite)
    checks: list[Check] = []
    for name in names:
        checks += RUNNERS[name](ctx)
    return sorted(checks, key=lambda c: c.id)
