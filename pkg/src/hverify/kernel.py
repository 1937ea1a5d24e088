"""Riesz-type kernel G_alpha, its angular reduction, and closed-form constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hgroup import HPoint, dilate, distance


@dataclass(frozen=True)
class KernelParams:
    """Parameters (n, alpha, p) of u = int G_alpha(., xi) u(xi)^p dxi."""

    n: int
    alpha: float
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.alpha < self.Q:
            raise ValueError(f"alpha must lie in (0, Q={self.Q}), got {self.alpha}")
        if not 1.0 < self.p <= self.sigma * (1 + 1e-14):
            raise ValueError(f"p must lie in (1, sigma={self.sigma:.6g}], got {self.p}")

    @classmethod
    def critical(cls, n: int, alpha: float) -> "KernelParams":
        Q = 2 * n + 2
        return cls(n, alpha, (Q + alpha) / (Q - alpha))

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    @property
    def sigma(self) -> float:
        return (self.Q + self.alpha) / (self.Q - self.alpha)

    @property
    def kexp(self) -> float:
        """Kernel exponent Q - alpha."""
        return self.Q - self.alpha

    @property
    def is_critical(self) -> bool:
        return abs(self.p - self.sigma) <= 1e-12 * self.sigma


@dataclass(frozen=True)
class HLSParams:
    n: int
    lam: float

    def __post_init__(self):
        if not 0.0 < self.lam < self.Q:
            raise ValueError(f"lambda must lie in (0, Q={self.Q}), got {self.lam}")

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    @property
    def p_hls(self) -> float:
        return 2.0 * self.Q / (2.0 * self.Q - self.lam)


class KernelSingularity(ValueError):
    pass


def green_kernel(kp: KernelParams, zeta: HPoint, xi: HPoint):
    d = distance(zeta, xi)
    if np.any(d == 0.0):
        raise KernelSingularity("G_alpha is singular at coincident points")
    return d ** (-kp.kexp)


def kernel_scaling(kp: KernelParams, s: float, zeta: HPoint, xi: HPoint):
    """Return (G(delta_s zeta, delta_s xi), s^{-(Q-alpha)} G(zeta, xi))."""
    if np.any(np.asarray(s) <= 0):
        raise ValueError("s must be positive")
    lhs = green_kernel(kp, dilate(s, zeta), dilate(s, xi))
    rhs = s ** (-kp.kexp) * green_kernel(kp, zeta, xi)
    return lhs, rhs


def angular_integrand(kexp, rt, tt, r, t, psi):
    """G_alpha between (rt, tt) on the positive x-axis and (r e^{i psi}, t), n = 1.

    All arguments broadcast.
    """
    cos, sin = np.cos(psi), np.sin(psi)
    rr = r * rt
    a = r * r + rt * rt - 2.0 * rr * cos
    b = t - tt + 2.0 * rr * sin
    return (a * a + b * b) ** (-0.25 * kexp)


def reduced_kernel_cyl(kp: KernelParams, rt, tt, r, t, tol=1e-12,
                       min_nodes=16, max_nodes=1 << 16) -> float:
    """int_0^{2 pi} G_alpha((rt, tt), (r e^{i psi}, t)) d psi for n = 1.

    Periodic trapezoid rule, node count doubled until successive values agree
    to 0.1 * tol (relative).
    """
    if kp.n != 1:
        raise NotImplementedError("angular reduction is implemented for n = 1")
    if rt < 0 or r < 0:
        raise ValueError("radial coordinates must be nonnegative")
    if rt == r and tt == t:
        raise KernelSingularity("coincident points")
    if rt == 0.0 or r == 0.0:
        return 2.0 * math.pi * float(angular_integrand(kp.kexp, rt, tt, r, t, 0.0))
    if r == rt and tt == t:
        raise KernelSingularity("coincident points")
    m = min_nodes
    prev = None
    while True:
        psi = 2.0 * math.pi * np.arange(m) / m
        val = 2.0 * math.pi * float(np.mean(angular_integrand(kp.kexp, rt, tt, r, t, psi)))
        if prev is not None and abs(val - prev) <= 0.1 * tol * abs(val):
            return val
        if m >= max_nodes:
            raise RuntimeError(f"angular quadrature not converged at {m} nodes "
                               f"(last change {abs(val - prev) / abs(val):.3e})")
        prev = val
        m *= 2


def frac_fundamental_constant(n: int, alpha: float) -> float:
    """Constant in the fundamental solution g = c |xi|^{-(Q - alpha)} of L_{alpha/2}."""
    Q = 2 * n + 2
    if not 0.0 < alpha < Q:
        raise ValueError(f"alpha must lie in (0, {Q})")
    return (2.0 ** (n + 1 - 1.5 * alpha) * math.gamma((2 * n + 2 - alpha) / 4.0) ** 2
            / (math.pi ** (n + 1) * math.gamma(alpha / 2.0)))


def hls_constant(n: int, lam: float) -> float:
    """Sharp HLS constant on H^n (Frank-Lieb).

    (pi^{n+1} / (2^{n-1} n!))^{lam/Q} n! Gamma((Q - lam)/2) / Gamma((2Q - lam)/4)^2
    """
    Q = 2 * n + 2
    if not 0.0 < lam < Q:
        raise ValueError(f"lambda must lie in (0, {Q})")
    nf = math.factorial(n)
    return ((math.pi ** (n + 1) / (2.0 ** (n - 1) * nf)) ** (lam / Q)
            * nf * math.gamma((Q - lam) / 2.0) / math.gamma((2 * Q - lam) / 4.0) ** 2)


def hls_constant_printed(n: int, lam: float) -> float:
    """The constant with Gamma((Q - 2)/2) in place of Gamma((Q - lam)/2).

    Agrees with :func:`hls_constant` only at lam = 2; kept to document the
    discrepancy (see tests/test_kernel.py).
    """
    Q = 2 * n + 2
    if not 0.0 < lam < Q:
        raise ValueError(f"lambda must lie in (0, {Q})")
    nf = math.factorial(n)
    return ((math.pi ** (n + 1) / (2.0 ** (n - 1) * nf)) ** (lam / Q)
            * nf * math.gamma((Q - 2) / 2.0) / math.gamma((2 * Q - lam) / 4.0) ** 2)


def hls_extremizer(n: int, lam: float, xi: HPoint):
    """H(z, t) = ((1 + |z|^2)^2 + t^2)^{-(2Q - lam)/4}."""
    Q = 2 * n + 2
    z2 = np.sum(xi.x**2 + xi.y**2, axis=-1)
    return ((1.0 + z2) ** 2 + xi.t**2) ** (-(2 * Q - lam) / 4.0)
