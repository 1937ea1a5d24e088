"""Explicit solution family and function-level transforms for cylindrical functions on H^1.

Every transform returns a new :class:`~hverify.quad.CylFunc` carrying decay
metadata derived from that of its input, so results can be fed straight back
into the quadrature engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .hgroup import HPoint
from .kernel import KernelParams
from .quad import CylFunc, QuadConfig, apply_operator

# sample points (r, t) for the constancy certificate of C0
C0_POINTS: Tuple[Tuple[float, float], ...] = (
    (0.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 0.0), (1.0, 1.0), (0.5, -2.0))


class ConstancyError(RuntimeError):
    """Raised when the derived C0 is not constant across sample points."""


@dataclass(frozen=True)
class StandardSolutionParams:
    """u(xi) = s^{(Q-alpha)/2} u0(xi0 . delta_s xi), u0 = C0 ((1+r^2)^2+t^2)^{-(Q-alpha)/4}.

    Only translations along the t-axis keep u cylindrical, so ``xi0`` must
    have z = 0.
    """

    C0: float
    s: float = 1.0
    xi0: HPoint = field(default_factory=lambda: HPoint.origin(1))

    def __post_init__(self):
        if self.C0 <= 0 or self.s <= 0:
            raise ValueError("C0 and s must be positive")
        if self.xi0.t.ndim != 0:
            raise ValueError("xi0 must be a single point")
        if np.any(self.xi0.abs_z != 0):
            raise NotImplementedError("only t-axis translations preserve cylindrical symmetry")

    @property
    def t0(self) -> float:
        return float(self.xi0.t)


@dataclass(frozen=True)
class FuncWithLimit:
    """A cylindrical function together with u_inf = lim |xi|^{Q-alpha} f(xi)."""

    f: CylFunc
    u_infinity: float
    kexp: float
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.u_infinity < 0:
            raise ValueError("u_infinity must be nonnegative")
        if self.validate:
            self.check_limit()

    def __call__(self, r, t):
        return self.f(r, t)

    def check_limit(self, rho=(1e2, 1e3, 1e4)):
        """|rho^{Q-alpha} f - u_inf| must shrink along the r- and t-axis rays and be
        below 1% of the scale at the outermost radius."""
        rho = np.asarray(rho, dtype=float)
        for r, t in ((rho, 0 * rho), (0 * rho, rho**2), (0 * rho, -(rho**2))):
            g = rho**self.kexp * self.f(r, t)
            dev = np.abs(g - self.u_infinity)
            scale = max(self.u_infinity, float(np.max(g)), 1e-300)
            if np.any(np.diff(dev) > 1e-10 * scale) or dev[-1] > 1e-2 * scale:
                raise ValueError(f"rho^(Q-alpha) f does not approach u_infinity={self.u_infinity}")


def _h(kexp):
    e = kexp / 4.0
    return lambda r, t: ((1.0 + r * r) ** 2 + t * t) ** (-e)


def standard_solution(params: StandardSolutionParams, kp: KernelParams) -> FuncWithLimit:
    k = kp.kexp
    C0, s, t0 = params.C0, params.s, params.t0
    h = _h(k)
    amp = C0 * s ** (0.5 * k)

    def ev(r, t):
        return amp * h(s * r, s * s * t + t0)

    # |xi0 . delta_s xi| >= s|xi| - |xi0| >= s|xi|/2 once |xi| >= 2|xi0|/s
    c = math.sqrt(abs(t0))
    if c == 0:
        C, R = C0 * s ** (-0.5 * k), 1.0
    else:
        C, R = C0 * s ** (-0.5 * k) * 2.0**k, max(1.0, 2.0 * c / s)
    name = f"u0[C0={C0:.6g}, s={s:.6g}, t0={t0:.6g}]"
    f = CylFunc(ev, k, C, R, sup=amp, name=name)
    return FuncWithLimit(f, C0 * s ** (-0.5 * k), k)


def shape_function(kp: KernelParams) -> CylFunc:
    """h(r, t) = ((1+r^2)^2+t^2)^{-(Q-alpha)/4}, the standard solution with C0 = 1."""
    return standard_solution(StandardSolutionParams(1.0), kp).f


@dataclass
class C0Certificate:
    C0: float
    points: List[Tuple[float, float]]
    values: List[float]
    spread: float
    tolerance: float


def derive_C0(kp: KernelParams, cfg: QuadConfig, points=C0_POINTS, full_output=False):
    """C0 = (h / T[h^sigma])^{1/(sigma-1)}, certified constant across ``points``.

    The first point is the reported value; the relative spread
    (max - min) / C0 over all points must not exceed 2 * cfg.tol.
    """
    if not kp.is_critical:
        raise ValueError("derive_C0 needs the critical exponent p = sigma")
    if kp.n != 1:
        raise NotImplementedError("derive_C0 is implemented for n = 1")
    h = shape_function(kp)
    vals = []
    for r, t in points:
        Th = apply_operator(kp, h, HPoint.cyl(r, t), cfg)
        vals.append(float((h(r, t) / Th) ** (1.0 / (kp.sigma - 1.0))))
    C0 = vals[0]
    spread = (max(vals) - min(vals)) / C0
    cert = C0Certificate(C0, [tuple(p) for p in points], vals, spread, 2 * cfg.tol)
    if spread > 2 * cfg.tol:
        raise ConstancyError(f"C0 spread {spread:.3e} exceeds 2*tol = {2 * cfg.tol:.3e}")
    return (C0, cert) if full_output else C0


# -- transforms ----------------------------------------------------------------

def _gauge(r, t):
    return (r**4 + t * t) ** 0.25


def _no_origin(r, t):
    if np.any((np.asarray(r) == 0) & (np.asarray(t) == 0)):
        raise ValueError("inverted function is undefined at the origin")


def _f_sup(f: CylFunc) -> float:
    return f.sup_estimate()


def cr_invert_function(f: CylFunc, kp: KernelParams) -> CylFunc:
    """u_bar(r, t) = rho^{-(Q-alpha)} f(r / rho^2, -t / rho^4)."""
    return sphere_invert_function(1.0, f, kp)


def sphere_invert_function(s: float, f: CylFunc, kp: KernelParams) -> CylFunc:
    """u_bar_{s^2}(r, t) = s^{Q-alpha} rho^{-(Q-alpha)} f(s^2 r / rho^2, -s^4 t / rho^4)."""
    if s <= 0:
        raise ValueError("s must be positive")
    k = kp.kexp
    s2, s4, sk = s * s, s**4, s**k

    def ev(r, t):
        _no_origin(r, t)
        rho2 = np.sqrt(r**4 + t * t)
        return sk * rho2 ** (-0.5 * k) * f(s2 * r / rho2, -s4 * t / (rho2 * rho2))

    sup_f = _f_sup(f)
    # the image point has gauge norm s^2 / rho; split at s^2 / rho = R_decay
    sup = None
    d, Rf = f.decay_exponent, f.R_decay
    if d >= k:
        sup = max(f.C_decay * s ** (-k) * Rf ** (k - d), sup_f * Rf**k * s ** (-k))
    return CylFunc(ev, k, sk * sup_f, 1.0, sup=sup, name=f"inv[{s:.6g}]({f.name})",
                   check=f.check)


def scale_function(s: float, f: CylFunc, kp: KernelParams) -> CylFunc:
    """f_s(r, t) = s^{(Q-alpha)/2} f(s r, s^2 t)."""
    if s <= 0:
        raise ValueError("s must be positive")
    k = kp.kexp
    amp = s ** (0.5 * k)
    d = f.decay_exponent
    return CylFunc(lambda r, t: amp * f(s * r, s * s * t), d, f.C_decay * amp * s ** (-d),
                   f.R_decay / s, sup=None if f.sup is None else amp * f.sup,
                   name=f"scale[{s:.6g}]({f.name})", check=f.check)


def translate_function(t0: float, f: CylFunc) -> CylFunc:
    """f(xi0 . xi) for xi0 = (0, t0), i.e. f(r, t + t0)."""
    d = f.decay_exponent
    c = math.sqrt(abs(t0))
    if c == 0:
        return f
    return CylFunc(lambda r, t: f(r, t + t0), d, f.C_decay * 2.0**d,
                   max(2.0 * c, 2.0 * f.R_decay), sup=f.sup,
                   name=f"transl[{t0:.6g}]({f.name})", check=f.check)


def reflect_function(lam: float, f: CylFunc) -> CylFunc:
    """f_lam(r, t) = f(r, 2 lam - t)."""
    d = f.decay_exponent
    c = math.sqrt(abs(lam))
    if c == 0:
        C, R = f.C_decay, f.R_decay
    else:
        # |xi_lam| >= |xi| - 2|(0, lam)| >= |xi| / 2 for |xi| >= 4 |(0, lam)|
        C, R = f.C_decay * 2.0**d, max(4.0 * c, 2.0 * f.R_decay)
    return CylFunc(lambda r, t: f(r, 2.0 * lam - t), d, C, R, sup=f.sup,
                   name=f"refl[{lam:.6g}]({f.name})", check=f.check)


def measure_u_infinity(f: CylFunc, kp: KernelParams, rho: float = 100.0,
                       rel_tol: float = 0.01) -> float:
    """lim rho^{Q-alpha} f along the r-axis and t-axis rays, Richardson-extrapolated.

    The leading correction is taken to be O(rho^{-2}); rays disagreeing by
    more than ``rel_tol`` indicate non-cylindrical or non-decaying input.
    """
    k = kp.kexp
    rays = {
        "r": lambda q: f(q, 0.0),
        "t+": lambda q: f(0.0, q * q),
        "t-": lambda q: f(0.0, -q * q),
    }
    est = {}
    for name, ray in rays.items():
        g1 = rho**k * float(ray(rho))
        g2 = (2 * rho) ** k * float(ray(2 * rho))
        est[name] = (4.0 * g2 - g1) / 3.0
    vals = np.array(list(est.values()))
    mean = float(np.mean(vals))
    if mean <= 0 or (vals.max() - vals.min()) > rel_tol * mean:
        raise ValueError(f"ray limits disagree: {est}")
    return mean


def translate_limit_params(f: FuncWithLimit, target_uinf: float, kp: KernelParams) -> float:
    """Scale s with (scale_function(s, f))_inf = target_uinf.

    (f_s)_inf = s^{-(Q-alpha)/2} f_inf, hence s = (f_inf / target)^{2/(Q-alpha)}.
    """
    if f.u_infinity <= 0:
        raise ValueError("u_infinity must be positive")
    if target_uinf <= 0:
        raise ValueError("target must be positive")
    return (f.u_infinity / target_uinf) ** (2.0 / kp.kexp)


def with_limit(f: CylFunc, kp: KernelParams, u_infinity: Optional[float] = None) -> FuncWithLimit:
    """Attach a (measured, unless given) asymptotic constant to f."""
    if u_infinity is None:
        u_infinity = measure_u_infinity(f, kp)
    return FuncWithLimit(f, u_infinity, kp.kexp)
