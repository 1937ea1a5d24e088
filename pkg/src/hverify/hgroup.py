"""Heisenberg group algebra on H^n = C^n x R.

Points are stored as real triples ``(x, y, t)`` with ``x, y`` of shape
``(..., n)`` and ``t`` of shape ``(...)``, so every operation below works on a
single point or on a batch of points with numpy broadcasting.

Group law::

    (z, t)(p, s) = (z + p, t + s + 2 Im <z, p>),   <z, p> = sum_j z_j conj(p_j)

gauge norm ``|(z, t)| = (|z|^4 + t^2)^(1/4)``, dilations
``delta_s(z, t) = (s z, s^2 t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# points closer than this (in gauge norm) to the origin are not inverted
INVERSION_GUARD = 1e-150


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GroupContext:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")

    @property
    def Q(self) -> int:
        """Homogeneous dimension 2n + 2."""
        return 2 * self.n + 2


@dataclass(frozen=True, eq=False)
class HPoint:
    """A point (or batch of points) of H^n."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if y.ndim == 0:
            y = y.reshape(1)
        if x.shape != y.shape:
            raise DimensionMismatch(f"x{x.shape} and y{y.shape} differ")
        if x.shape[:-1] != t.shape:
            raise DimensionMismatch(f"batch shapes differ: {x.shape[:-1]} vs {t.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(t))):
            raise ValueError("HPoint coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_complex(cls, z, t) -> "HPoint":
        z = np.asarray(z, dtype=complex)
        return cls(z.real, z.imag, t)

    @classmethod
    def origin(cls, n: int = 1) -> "HPoint":
        return cls(np.zeros(n), np.zeros(n), 0.0)

    @classmethod
    def cyl(cls, r, t) -> "HPoint":
        """n = 1 point with z = r on the real axis (canonical cylindrical representative)."""
        r = np.asarray(r, dtype=float)
        return cls(r[..., None], np.zeros(r.shape + (1,)), t)

    @property
    def z(self) -> np.ndarray:
        return self.x + 1j * self.y

    @property
    def n(self) -> int:
        return self.x.shape[-1]

    @property
    def abs_z(self) -> np.ndarray:
        return np.sqrt(np.sum(self.x**2 + self.y**2, axis=-1))

    def __getitem__(self, idx) -> "HPoint":
        return HPoint(self.x[idx], self.y[idx], self.t[idx])

    def __len__(self):
        return len(self.t)

    def __repr__(self):
        if self.t.ndim == 0:
            return f"HPoint(z={np.round(self.z, 12).tolist()}, t={float(self.t):.12g})"
        return f"HPoint(batch={self.t.shape}, n={self.n})"

    def allclose(self, other: "HPoint", rtol=1e-12, atol=1e-12) -> bool:
        return (np.allclose(self.x, other.x, rtol=rtol, atol=atol)
                and np.allclose(self.y, other.y, rtol=rtol, atol=atol)
                and np.allclose(self.t, other.t, rtol=rtol, atol=atol))


def _check_same_n(a: HPoint, b: HPoint):
    if a.n != b.n:
        raise DimensionMismatch(f"points live in H^{a.n} and H^{b.n}")


def _im_inner(ax, ay, bx, by):
    # Im sum_j z_j conj(p_j) = sum_j (y_j p^x_j - x_j p^y_j)
    return np.sum(ay * bx - ax * by, axis=-1)


def multiply(a: HPoint, b: HPoint) -> HPoint:
    _check_same_n(a, b)
    return HPoint(a.x + b.x, a.y + b.y, a.t + b.t + 2.0 * _im_inner(a.x, a.y, b.x, b.y))


def inverse(a: HPoint) -> HPoint:
    return HPoint(-a.x, -a.y, -a.t)


def gauge_norm(a: HPoint) -> np.ndarray:
    z2 = np.sum(a.x**2 + a.y**2, axis=-1)
    # sqrt(hypot(.)) avoids squaring t, which underflows/overflows at extreme scales
    return np.sqrt(np.hypot(z2, a.t))


def distance(a: HPoint, b: HPoint) -> np.ndarray:
    """Left-invariant gauge distance |a^{-1} b|."""
    return gauge_norm(multiply(inverse(a), b))


def dilate(s, a: HPoint) -> HPoint:
    s = np.asarray(s, dtype=float)
    return HPoint(s[..., None] * a.x, s[..., None] * a.y, s * s * a.t)


def _rotate_xy(theta, x, y):
    c, s = np.cos(theta), np.sin(theta)
    return c * x - s * y, s * x + c * y


def rotate(theta, a: HPoint) -> HPoint:
    """(z, t) -> (e^{i theta} z, t), theta a scalar or a length-n vector."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float), a.x.shape)
    x, y = _rotate_xy(theta, a.x, a.y)
    return HPoint(x, y, a.t)


def h_reflect(lam, theta, a: HPoint) -> HPoint:
    """H-reflection (z, t) -> (e^{i theta} conj(z), 2 lam - t)."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float), a.x.shape)
    x, y = _rotate_xy(theta, a.x, -a.y)
    return HPoint(x, y, 2.0 * np.asarray(lam, dtype=float) - a.t)


def reflect_about_horizontal_plane(xi0: HPoint, a: HPoint, theta=0.0) -> HPoint:
    """Reflection in the horizontal plane through xi0: translate, reflect in H_0, translate back."""
    _check_same_n(xi0, a)
    local = multiply(inverse(xi0), a)
    return multiply(xi0, h_reflect(0.0, theta, local))


def reflect_about_horizontal_plane_closed_form(xi0: HPoint, a: HPoint, theta=0.0) -> HPoint:
    """Same map written out coordinate-wise, used as an independent evaluation path."""
    _check_same_n(xi0, a)
    z0, z = xi0.z, a.z
    rot = np.exp(1j * np.broadcast_to(np.asarray(theta, dtype=float), a.x.shape))
    w = z - z0
    z_new = rot * np.conj(w) + z0
    t_new = (-a.t + 2.0 * xi0.t
             + 2.0 * np.imag(np.sum(z0 * np.conj(z), axis=-1))
             + 2.0 * np.imag(np.sum(z0 * np.conj(rot) * w, axis=-1)))
    return HPoint.from_complex(z_new, t_new)


def cr_invert_point(a: HPoint) -> HPoint:
    """CR type inversion xi -> (z / omega, -t / |omega|^2), omega = t + i|z|^2."""
    if np.any(gauge_norm(a) < INVERSION_GUARD):
        raise ValueError("CR inversion is singular at the origin")
    z2 = np.sum(a.x**2 + a.y**2, axis=-1)
    w2 = a.t**2 + z2**2
    # z / omega = z * conj(omega) / |omega|^2, conj(omega) = t - i|z|^2
    wr, wi = (a.t / w2)[..., None], (-z2 / w2)[..., None]
    return HPoint(a.x * wr - a.y * wi, a.x * wi + a.y * wr, -a.t / w2)


def random_points(rng: np.random.Generator, size: int, n: int,
                  log_radius=(-2.0, 2.0)) -> HPoint:
    """Points with log-uniform gauge radius and a uniformly drawn gauge-sphere direction."""
    g = rng.normal(size=(size, 2 * n + 1))
    zpart = g[:, : 2 * n]
    zpart = zpart / np.linalg.norm(zpart, axis=1, keepdims=True)
    # mix |z|^4 and t^2 on the unit gauge sphere via an angle phi in [0, pi]
    phi = np.arccos(rng.uniform(-1.0, 1.0, size))
    a = np.sqrt(np.sin(phi))
    rho = 10.0 ** rng.uniform(*log_radius, size)
    x = (rho * a)[:, None] * zpart[:, :n]
    y = (rho * a)[:, None] * zpart[:, n:]
    return HPoint(x, y, rho**2 * np.cos(phi))
