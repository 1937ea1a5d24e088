"""Singular quadrature for T[f](zeta) = int_{H^1} G_alpha(zeta, xi) f(xi)^p dxi.

Heisenberg-polar coordinates around a centre c on the t-axis::

    xi = c . (rho sqrt(sin phi) e^{i psi}, rho^2 cos phi),   dxi = rho^3 drho dphi dpsi

so |c^{-1} xi| = rho exactly. The integral is split with a smooth cutoff
chi(|zeta^{-1} xi| / delta):

* near part, chi * G * f^p, in polar coordinates centred at zeta; the
  kernel becomes rho^{-(Q - alpha)} and the radial weight rho^{alpha - 1} is
  absorbed by Gauss-Jacobi nodes;
* far part, (1 - chi) * G * f^p, in polar coordinates centred on the t-axis,
  with the psi integral done by the periodic trapezoid rule (the angular
  reduction of the kernel for cylindrical f);
* beyond R_trunc an analytic tail bound from the decay metadata of f, which is
  reported as part of the error and never added to the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import roots_jacobi

from .hgroup import HPoint
from .kernel import HLSParams, KernelParams, angular_integrand

Q1 = 4  # homogeneous dimension of H^1
SPHERE_MEASURE = 2.0 * math.pi**2  # int dphi dpsi over the unit gauge sphere of H^1
CUTOFF_PLATEAU = 0.25


class TailTooLarge(RuntimeError):
    pass


class NonConvergentDecay(ValueError):
    pass


@dataclass(frozen=True)
class CylFunc:
    """Cylindrical function f(r, t) on H^1 with decay metadata.

    ``f(xi) <= C_decay * |xi|^{-decay_exponent}`` for ``|xi| >= R_decay``.
    ``eval`` must accept numpy arrays and broadcast.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    decay_exponent: float
    C_decay: float
    R_decay: float
    sup: Optional[float] = None
    name: str = ""
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.C_decay <= 0 or self.R_decay <= 0:
            raise ValueError("C_decay and R_decay must be positive")
        if self.check:
            self.spot_check()

    def __call__(self, r, t):
        return self.eval(np.asarray(r, dtype=float), np.asarray(t, dtype=float))

    def spot_check(self, n_rho=12, n_phi=9):
        rho = np.geomspace(self.R_decay, 10 * self.R_decay, n_rho)[:, None]
        phi = np.linspace(0.0, math.pi, n_phi)[None, :]
        vals = self(rho * np.sqrt(np.sin(phi)), rho**2 * np.cos(phi))
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{self.name or 'CylFunc'}: non-finite values")
        if np.any(vals < 0):
            raise ValueError(f"{self.name or 'CylFunc'}: negative values")
        bound = self.C_decay * rho ** (-self.decay_exponent)
        if np.any(vals > bound * (1 + 1e-9) + 1e-300):
            raise ValueError(f"{self.name or 'CylFunc'}: decay bound violated on "
                             f"rho in [{self.R_decay}, {10 * self.R_decay}]")

    def sup_estimate(self) -> float:
        if self.sup is not None:
            return self.sup
        rho = np.linspace(0.0, self.R_decay, 200)[:, None]
        phi = np.linspace(0.0, math.pi, 101)[None, :]
        vals = self(rho * np.sqrt(np.sin(phi)), rho**2 * np.cos(phi))
        tail = self.C_decay * self.R_decay ** (-self.decay_exponent)
        # 10% head-room over the sampled maximum
        return float(max(1.1 * np.max(vals), tail))


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature parameters.

    nodes_rho    Gauss order per radial panel
    nodes_angle  Gauss order per polar-angle (phi) panel
    nodes_outer  trapezoid nodes in the azimuth psi
    """

    delta: float = 0.5
    R_trunc: float = 100.0
    nodes_rho: int = 16
    nodes_angle: int = 12
    nodes_outer: int = 64
    mc_samples: int = 1_000_000
    seed: int = 0
    tol: float = 1e-3
    phi_panels: int = 12

    def __post_init__(self):
        if not 0 < self.delta < self.R_trunc:
            raise ValueError("need 0 < delta < R_trunc")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        for name in ("nodes_rho", "nodes_angle", "nodes_outer", "mc_samples", "phi_panels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def coarse(self) -> "QuadConfig":
        return replace(self,
                       nodes_rho=max(4, (2 * self.nodes_rho) // 3),
                       nodes_angle=max(4, (2 * self.nodes_angle) // 3),
                       nodes_outer=max(8, self.nodes_outer // 2))

    def refined(self) -> "QuadConfig":
        return replace(self, delta=self.delta / 2, nodes_rho=2 * self.nodes_rho,
                       nodes_angle=2 * self.nodes_angle, nodes_outer=2 * self.nodes_outer)


@dataclass(frozen=True)
class HalfSpace:
    """Sigma_lambda = {t >= lambda}."""

    lam: float


@dataclass
class QuadInfo:
    value: float
    quad_error: float
    tail_bound: float
    delta_used: float
    evaluations: int

    @property
    def error(self) -> float:
        return self.quad_error + self.tail_bound


# -- nodes ---------------------------------------------------------------

def _gauss_panels(breaks: Sequence[float], order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _jacobi_nodes(order: int, alpha: float, length: float):
    """Nodes/weights for int_0^length rho^{alpha-1} g(rho) drho."""
    x, w = roots_jacobi(order, 0.0, alpha - 1.0)
    return 0.5 * length * (1.0 + x), (0.5 * length) ** alpha * w


def _radial_breaks(upper: float, extra: Sequence[float] = ()):
    base = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0]
    b = base[-1]
    while b < upper:
        b *= 1.5
        base.append(b)
    pts = sorted({min(max(p, 0.0), upper) for p in list(base) + list(extra)} | {upper})
    out = [pts[0]]
    for p in pts[1:]:
        if p - out[-1] > 1e-3 * max(1.0, p):
            out.append(p)
    if out[-1] != upper:
        out[-1] = upper
    return out


def smooth_cutoff(x):
    """C-infinity cutoff: 1 on [0, 1/4], 0 on [1, inf)."""
    x = np.asarray(x, dtype=float)
    u = np.clip((1.0 - x) / (1.0 - CUTOFF_PLATEAU), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
        out = a / (a + b)
    return np.where(u >= 1.0, 1.0, np.where(u <= 0.0, 0.0, out))


def _polar(rho, phi, t_center=0.0):
    r = rho * np.sqrt(np.abs(np.sin(phi)))
    t = t_center + rho * rho * np.cos(phi)
    return r, t


def _cyl_coords(zeta: HPoint):
    if zeta.n != 1:
        raise NotImplementedError("quadrature is implemented for n = 1")
    return float(zeta.abs_z), float(zeta.t)


def _check_kp(kp: KernelParams):
    if kp.n != 1:
        raise NotImplementedError("quadrature is implemented for n = 1")


def _power(vals, p):
    vals = np.asarray(vals, dtype=float)
    return np.sign(vals) * np.abs(vals) ** p if p != 1 else vals


# -- the two parts ---------------------------------------------------------

@dataclass(frozen=True)
class _KernelTerm:
    rt: float
    tt: float
    coeff: float
    delta: Optional[float]  # cutoff radius if the near part handles this point


def _far_part(kexp, density, terms: Sequence[_KernelTerm], cfg: QuadConfig, *,
              t_center=0.0, rho_max, phi_range=(0.0, math.pi), rho_extra=(), abs_density=None):
    phi_lo, phi_hi = phi_range
    phi_breaks = list(np.linspace(phi_lo, phi_hi, cfg.phi_panels + 1))
    extra = list(rho_extra)
    for term in terms:
        rc = (term.rt**4 + (term.tt - t_center) ** 2) ** 0.25
        d = term.delta if term.delta is not None else 0.25
        extra += [rc - d, rc - 0.5 * d, rc, rc + 0.5 * d, rc + d]
        if rc > 0:
            ph = math.acos(max(-1.0, min(1.0, (term.tt - t_center) / rc**2)))
            if phi_lo < ph < phi_hi:
                phi_breaks.append(ph)
    rho, wr = _gauss_panels(_radial_breaks(rho_max, extra), cfg.nodes_rho)
    phi, wp = _gauss_panels(sorted(set(phi_breaks)), cfg.nodes_angle)
    psi = 2.0 * math.pi * np.arange(cfg.nodes_outer) / cfg.nodes_outer

    total = 0.0
    absolute = 0.0
    chunk = max(1, 2_000_000 // (phi.size * psi.size))
    for i0 in range(0, rho.size, chunk):
        R = rho[i0:i0 + chunk, None]
        r, t = _polar(R, phi[None, :], t_center)
        dens = density(r, t)
        K = np.zeros_like(r)
        r3, t3 = r[..., None], t[..., None]
        for term in terms:
            g = angular_integrand(kexp, term.rt, term.tt, r3, t3, psi)
            if term.delta is not None:
                dist = g ** (-1.0 / kexp)
                g = g * (1.0 - smooth_cutoff(dist / term.delta))
            K += term.coeff * (2.0 * math.pi) * np.mean(g, axis=-1)
        w = (wr[i0:i0 + chunk, None] * wp[None, :]) * R**3
        total += float(np.sum(w * K * dens))
        adens = dens if abs_density is None else abs_density(r, t)
        absolute += float(np.sum(w * np.abs(K * adens)))
    return total, absolute, rho.size * phi.size * psi.size * len(terms)


def _near_part(alpha, density, rt, tt, delta, cfg: QuadConfig, abs_density=None):
    """int chi(|eta|/delta) |eta|^{-(Q-alpha)} density(zeta . eta) deta, zeta = (rt, tt)."""
    inner = CUTOFF_PLATEAU * delta
    r1, w1 = _jacobi_nodes(cfg.nodes_rho, alpha, inner)
    r2, w2 = _gauss_panels(np.linspace(inner, delta, 4), cfg.nodes_rho)
    w2 = w2 * r2 ** (alpha - 1.0) * smooth_cutoff(r2 / delta)
    rho = np.concatenate([r1, r2])
    wr = np.concatenate([w1, w2])
    # phi = pi (1 - cos theta) / 2 removes the sqrt(sin phi) endpoint behaviour
    th, wth = _gauss_panels(np.linspace(0.0, math.pi, cfg.phi_panels // 2 + 1), cfg.nodes_angle)
    phi = 0.5 * math.pi * (1.0 - np.cos(th))
    wphi = wth * 0.5 * math.pi * np.sin(th)
    psi = 2.0 * math.pi * np.arange(cfg.nodes_outer) / cfg.nodes_outer

    R = rho[:, None, None]
    a = R * np.sqrt(np.sin(phi))[None, :, None]
    c, s = np.cos(psi)[None, None, :], np.sin(psi)[None, None, :]
    r = np.sqrt(rt * rt + a * a + 2.0 * rt * a * c)
    t = tt + R * R * np.cos(phi)[None, :, None] - 2.0 * rt * a * s
    dens = density(r, t)
    ang = (2.0 * math.pi) * np.mean(dens, axis=-1)
    val = float(np.sum(wr[:, None] * wphi[None, :] * ang))
    adens = dens if abs_density is None else abs_density(r, t)
    absval = float(np.sum(wr[:, None] * wphi[None, :] * (2.0 * math.pi) * np.mean(np.abs(adens), axis=-1)))
    return val, absval, dens.size


def _tail_bound(kp: KernelParams, f: CylFunc, p: float, R: float, kernel_offsets,
                center_offset: float, density_terms: int = 1, shell_fraction: float = 1.0):
    """Upper bound for the contribution of |c^{-1} xi| > R.

    kernel_offsets: gauge distances |c^{-1} a| of the kernel points a from the
    centre c (each with its |coefficient|); center_offset: |c|.
    """
    d = f.decay_exponent
    kexp = kp.kexp
    power = kexp + d * p - Q1
    if power <= 0:
        raise NonConvergentDecay(
            f"decay_exponent * p = {d * p:.4g} <= alpha = {kp.alpha:.4g}: integral diverges")
    if R - center_offset < f.R_decay:
        raise TailTooLarge(f"R_trunc={R} too small for R_decay={f.R_decay}")
    bound = 0.0
    for off, coeff in kernel_offsets:
        if 2.0 * max(off, center_offset) >= R:
            raise TailTooLarge(f"R_trunc={R} too small for kernel offset {off:.3g}")
        bound += (abs(coeff) * (1 - off / R) ** (-kexp) * (1 - center_offset / R) ** (-d * p)
                  * R ** (-power) / power)
    return density_terms * shell_fraction * SPHERE_MEASURE * f.C_decay**p * bound


def _finish(value, absolute, quad_err, tail, cfg: QuadConfig, delta, evals, full_output):
    if tail > 0.5 * cfg.tol * max(absolute, 1e-300):
        raise TailTooLarge(
            f"tail bound {tail:.3e} exceeds 0.5*tol of the integral ({absolute:.3e}); "
            "increase R_trunc")
    if full_output:
        return value, QuadInfo(value, quad_err, tail, delta, evals)
    return value


def _run_two_levels(compute, cfg: QuadConfig):
    fine = compute(cfg)
    coarse = compute(cfg.coarse())
    return fine, abs(fine[0] - coarse[0]), fine[2] + coarse[2]


def apply_operator(kp: KernelParams, f: CylFunc, zeta: HPoint, cfg: QuadConfig,
                   full_output=False):
    """int_{H^1} G_alpha(zeta, xi) f(xi)^p dxi."""
    _check_kp(kp)
    rt, tt = _cyl_coords(zeta)
    p = kp.p
    density = lambda r, t: _power(f(r, t), p)
    zn = (rt**4 + tt**2) ** 0.25
    R = cfg.R_trunc
    tail = _tail_bound(kp, f, p, R, [(zn, 1.0)], 0.0)
    delta = cfg.delta

    def compute(c: QuadConfig):
        nv, na, ne = _near_part(kp.alpha, density, rt, tt, delta, c)
        fv, fa, fe = _far_part(kp.kexp, density, [_KernelTerm(rt, tt, 1.0, delta)], c,
                               rho_max=R)
        return nv + fv, na + fa, ne + fe

    (value, absolute, _), qerr, evals = _run_two_levels(compute, cfg)
    return _finish(value, absolute, qerr, tail, cfg, delta, evals, full_output)


def apply_operator_ball(kp: KernelParams, f: CylFunc, s_ball: float, zeta: HPoint,
                        cfg: QuadConfig, full_output=False):
    """int_{B(0, s_ball)} G_alpha(zeta, xi) f(xi)^p dxi."""
    _check_kp(kp)
    if s_ball <= 0:
        raise ValueError("s_ball must be positive")
    rt, tt = _cyl_coords(zeta)
    p = kp.p
    density = lambda r, t: _power(f(r, t), p)
    zn = (rt**4 + tt**2) ** 0.25
    gap = abs(s_ball - zn)
    inside = zn < s_ball
    # keep the cutoff ball entirely on one side of the sphere |xi| = s_ball
    delta = min(cfg.delta, 0.5 * gap)
    if delta <= 0:
        raise ValueError("kernel point lies on the sphere |xi| = s_ball")

    def compute(c: QuadConfig):
        if inside:
            nv, na, ne = _near_part(kp.alpha, density, rt, tt, delta, c)
            term = _KernelTerm(rt, tt, 1.0, delta)
        else:
            nv = na = ne = 0
            term = _KernelTerm(rt, tt, 1.0, None)
        fv, fa, fe = _far_part(kp.kexp, density, [term], c, rho_max=s_ball,
                               rho_extra=[zn - gap, zn + gap])
        return nv + fv, na + fa, ne + fe

    (value, absolute, _), qerr, evals = _run_two_levels(compute, cfg)
    return _finish(value, absolute, qerr, 0.0, cfg, delta if inside else 0.0, evals,
                   full_output)


def apply_operator_halfspace(kp: KernelParams, f_pair, hs: HalfSpace, zeta: HPoint,
                             cfg: QuadConfig, full_output=False):
    """int_{t >= lam} (G(zeta, xi) - G(zeta_lam, xi)) (f(xi)^p - f_lam(xi)^p) dxi.

    ``f_pair = (f, f_lam)`` with f_lam the reflected function f(r, 2 lam - t).
    zeta_lam = (conj z, 2 lam - t).
    """
    _check_kp(kp)
    f, f_lam = f_pair
    lam = hs.lam
    rt, tt = _cyl_coords(zeta)
    if tt < lam:
        raise ValueError(f"zeta (t={tt}) lies below the plane t={lam}")
    if tt == lam:
        # zeta and its reflection coincide: the kernel difference vanishes identically
        if full_output:
            return 0.0, QuadInfo(0.0, 0.0, 0.0, 0.0, 0)
        return 0.0
    p = kp.p
    density = lambda r, t: _power(f(r, t), p) - _power(f_lam(r, t), p)
    # the tail test is relative to the uncancelled magnitude |K| (f^p + f_lam^p), which
    # stays meaningful when the difference itself is (nearly) zero
    magnitude = lambda r, t: _power(f(r, t), p) + _power(f_lam(r, t), p)
    gap = tt - lam
    # B(zeta, delta) stays inside {t > lam}: delta^2 + 2 rt delta <= gap / 2
    delta = min(cfg.delta, -rt + math.sqrt(rt * rt + 0.5 * gap))
    R = cfg.R_trunc
    c_off = math.sqrt(abs(lam))
    off1 = (rt**4 + (tt - lam) ** 2) ** 0.25
    dec = f if f.decay_exponent <= f_lam.decay_exponent else f_lam
    C = max(f.C_decay, f_lam.C_decay)
    Rd = max(f.R_decay, f_lam.R_decay)
    worst = CylFunc(f.eval, dec.decay_exponent, C, Rd, check=False)
    tail = _tail_bound(kp, worst, p, R, [(off1, 1.0), (off1, 1.0)], c_off,
                       density_terms=2, shell_fraction=0.5)

    def compute(c: QuadConfig):
        nv, na, ne = _near_part(kp.alpha, density, rt, tt, delta, c, abs_density=magnitude)
        terms = [_KernelTerm(rt, tt, 1.0, delta), _KernelTerm(rt, 2 * lam - tt, -1.0, None)]
        fv, fa, fe = _far_part(kp.kexp, density, terms, c, t_center=lam, rho_max=R,
                               phi_range=(0.0, 0.5 * math.pi), abs_density=magnitude)
        return nv + fv, na + fa, ne + fe

    (value, absolute, _), qerr, evals = _run_two_levels(compute, cfg)
    return _finish(value, absolute, qerr, tail, cfg, delta, evals, full_output)


# -- plain cylindrical integrals -----------------------------------------------

def integrate_cylindrical(F, cfg: QuadConfig, rho_max=None, t_center=0.0):
    """int F(r, t) dxi over B((0, t_center), rho_max) (whole rho range up to R_trunc by default)."""
    rho_max = cfg.R_trunc if rho_max is None else rho_max
    rho, wr = _gauss_panels(_radial_breaks(rho_max), cfg.nodes_rho)
    phi, wp = _gauss_panels(np.linspace(0.0, math.pi, cfg.phi_panels + 1), cfg.nodes_angle)
    r, t = _polar(rho[:, None], phi[None, :], t_center)
    vals = F(r, t)
    return float(2.0 * math.pi * np.sum(wr[:, None] * wp[None, :] * rho[:, None] ** 3 * vals))


def ball_volume(R: float, cfg: QuadConfig) -> float:
    """Measure of B(0, R) through the polar parametrization."""
    return integrate_cylindrical(lambda r, t: np.ones_like(r), cfg, rho_max=R)


def lp_norm(f: CylFunc, p_exp: float, cfg: QuadConfig, full_output=False):
    if p_exp < 1:
        raise ValueError("p_exp must be >= 1")
    d = f.decay_exponent
    if d * p_exp <= Q1:
        raise NonConvergentDecay(f"decay_exponent * p = {d * p_exp:.4g} <= Q: norm diverges")
    R = cfg.R_trunc
    if R < f.R_decay:
        raise TailTooLarge(f"R_trunc={R} below R_decay={f.R_decay}")
    integrand = lambda r, t: np.abs(f(r, t)) ** p_exp
    I = integrate_cylindrical(integrand, cfg)
    Ic = integrate_cylindrical(integrand, cfg.coarse())
    tail = SPHERE_MEASURE * f.C_decay**p_exp * R ** (Q1 - d * p_exp) / (d * p_exp - Q1)
    if I > 0 and tail > 0.5 * cfg.tol * I:
        raise TailTooLarge(f"tail bound {tail:.3e} exceeds 0.5*tol of the integral; "
                           "increase R_trunc")
    norm = I ** (1.0 / p_exp)
    if full_output:
        return norm, QuadInfo(norm, abs(I - Ic), tail, 0.0, 0)
    return norm


# -- Monte Carlo for the HLS double integral -------------------------------------

@dataclass
class MCResult:
    value: float
    stderr: float
    samples: int


def _radial_outer_sample(rng, size):
    # density 4 rho^3 / (1 + rho^4)^2 on (0, inf)
    u = rng.uniform(size=size)
    return (u / (1.0 - u)) ** 0.25


def _radial_outer_density(rho):
    return 4.0 * rho**3 / (1.0 + rho**4) ** 2


def _radial_rel_sample(rng, size, lam, tail_exp=2.0):
    # density proportional to rho^{Q-1-lam} on (0, 1], rho^{-1-tail_exp} beyond
    a = Q1 - lam
    m_in, m_out = 1.0 / a, 1.0 / tail_exp
    u = rng.uniform(size=size) * (m_in + m_out)
    inner = u < m_in
    out = np.empty(size)
    out[inner] = (u[inner] * a) ** (1.0 / a)
    v = (u[~inner] - m_in) * tail_exp  # in (0, 1)
    out[~inner] = (1.0 - v) ** (-1.0 / tail_exp)
    return out


def _radial_rel_density(rho, lam, tail_exp=2.0):
    a = Q1 - lam
    norm = 1.0 / a + 1.0 / tail_exp
    return np.where(rho <= 1.0, rho ** (a - 1.0), rho ** (-1.0 - tail_exp)) / norm


def _sphere_sample(rng, size, rho):
    phi = rng.uniform(0.0, math.pi, size)
    psi = rng.uniform(0.0, 2.0 * math.pi, size)
    a = rho * np.sqrt(np.sin(phi))
    return a * np.cos(psi), a * np.sin(psi), rho * rho * np.cos(phi)


def hls_double_integral(hp: HLSParams, f: CylFunc, g: CylFunc, cfg: QuadConfig,
                        chunk: int = 500_000) -> MCResult:
    """Importance-sampled estimate of iint f(xi) g(eta) |xi^{-1} eta|^{-lam}.

    xi is drawn gauge-radially about the origin; eta from a defensive mixture
    of the same proposal and a proposal centred at xi whose radial law matches
    the kernel singularity rho^{-lam}.
    """
    if hp.n != 1:
        raise NotImplementedError("HLS Monte Carlo is implemented for n = 1")
    lam = hp.lam
    rng = np.random.default_rng(cfg.seed)
    n_total = cfg.mc_samples
    s1 = s2 = 0.0
    done = 0
    running = []
    while done < n_total:
        m = min(chunk, n_total - done)
        rho1 = _radial_outer_sample(rng, m)
        x1, y1, t1 = _sphere_sample(rng, m, rho1)
        q1 = _radial_outer_density(rho1) / (SPHERE_MEASURE * rho1**3)

        pick_rel = rng.uniform(size=m) < 0.5
        rho_rel = _radial_rel_sample(rng, m, lam)
        ax, ay, at = _sphere_sample(rng, m, rho_rel)
        rho_ind = _radial_outer_sample(rng, m)
        bx, by, bt = _sphere_sample(rng, m, rho_ind)
        # eta = xi . a (relative draw) or eta = b (independent draw)
        ex = np.where(pick_rel, x1 + ax, bx)
        ey = np.where(pick_rel, y1 + ay, by)
        et = np.where(pick_rel, t1 + at + 2.0 * (y1 * ax - x1 * ay), bt)
        # displacement xi^{-1} eta
        dx, dy = ex - x1, ey - y1
        dt = et - t1 - 2.0 * (y1 * ex - x1 * ey)
        dn = ((dx * dx + dy * dy) ** 2 + dt * dt) ** 0.25
        en = ((ex * ex + ey * ey) ** 2 + et * et) ** 0.25
        q_rel = _radial_rel_density(dn, lam) / (SPHERE_MEASURE * dn**3)
        q_ind = _radial_outer_density(en) / (SPHERE_MEASURE * en**3)
        q2 = 0.5 * q_rel + 0.5 * q_ind

        fv = f(np.sqrt(x1 * x1 + y1 * y1), t1)
        gv = g(np.sqrt(ex * ex + ey * ey), et)
        w = fv * gv * dn ** (-lam) / (q1 * q2)
        s1 += float(np.sum(w))
        s2 += float(np.sum(w * w))
        done += m
        running.append(s2 / done - (s1 / done) ** 2)
    mean = s1 / n_total
    var = max(s2 / n_total - mean * mean, 0.0)
    if len(running) >= 4 and running[-1] > 0:
        # second-moment blow-up across chunks signals an infinite-variance proposal
        if running[-1] > 50.0 * np.median(running):
            raise RuntimeError("Monte Carlo variance estimate diverging")
    return MCResult(mean, math.sqrt(var / n_total), n_total)
