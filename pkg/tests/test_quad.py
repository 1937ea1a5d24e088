import math

import numpy as np
import pytest

from hverify.hgroup import HPoint
from hverify.kernel import HLSParams, KernelParams
from hverify.quad import (CylFunc, HalfSpace, NonConvergentDecay, QuadConfig, TailTooLarge,
                          apply_operator, apply_operator_ball, apply_operator_halfspace,
                          ball_volume, hls_double_integral, integrate_cylindrical, lp_norm,
                          smooth_cutoff)

from conftest import T_H_AT_ZERO, T_H2_AT_ZERO, compact_bump, h_shape

# Adaptive nested scipy quadrature (dblquad over (r, t) of r * b^p * adaptive psi-integral
# of the kernel), relative error estimates below 1e-9:
# (r0, t0, w, on_axis, zeta_r, zeta_t, alpha) -> int G_alpha(zeta, .) b^sigma
BUMP_ORACLES = [
    ((1.0, 0.0, 0.5, False, 0.0, 0.0, 2.0), 0.05297479551034793),
    ((0.0, 2.0, 0.8, True, 0.0, 0.0, 2.0), 0.00633085230699151),
    ((2.0, -1.0, 0.7, False, 0.5, 1.0, 2.0), 0.04593639393885783),
    ((0.5, 0.5, 0.4, False, 0.0, -1.0, 1.0), 0.04907263828427411),
    ((1.5, 3.0, 1.0, False, 1.0, 0.0, 1.0), 0.24634583470980076),
]


def test_config_validation():
    with pytest.raises(ValueError):
        QuadConfig(delta=200.0)
    with pytest.raises(ValueError):
        QuadConfig(tol=1.5)
    with pytest.raises(ValueError):
        QuadConfig(nodes_rho=0)
    with pytest.raises(ValueError):
        QuadConfig(seed=-1)


def test_cylfunc_spot_check():
    with pytest.raises(ValueError):
        CylFunc(lambda r, t: np.ones_like(r + t), 2.0, 1.0, 1.0)  # does not decay
    with pytest.raises(ValueError):
        CylFunc(lambda r, t: -np.exp(-(r + t * t)), 2.0, 1.0, 1.0)  # negative
    f = h_shape(2.0)
    assert f(0.0, 0.0) == 1.0


def test_smooth_cutoff_profile():
    x = np.array([0.0, 0.25, 0.5, 0.999, 1.0, 3.0])
    c = smooth_cutoff(x)
    assert c[0] == 1 and c[1] == 1 and c[4] == 0 and c[5] == 0
    assert 0 < c[2] < 1 and 0 <= c[3] < 1e-10
    xs = np.linspace(0, 1.2, 500)
    assert np.all(np.diff(smooth_cutoff(xs)) <= 0)


def test_polar_volume_closed_form(cfg):
    # Jacobian rho^3: |B(0, R)| = 2 pi^2 R^4 / 4
    for R in (0.5, 1.0, 3.0):
        assert ball_volume(R, cfg) == pytest.approx(0.5 * math.pi**2 * R**4, rel=1e-12)


def test_polar_volume_against_monte_carlo(cfg):
    # hit-or-miss in the box |x|, |y| <= 1, |t| <= 1 contains B(0, 1)
    rng = np.random.default_rng(11)
    m = 2_000_000
    x, y, t = rng.uniform(-1, 1, (3, m))
    inside = (x * x + y * y) ** 2 + t * t < 1
    p = inside.mean()
    vol, se = 8 * p, 8 * math.sqrt(p * (1 - p) / m)
    assert abs(ball_volume(1.0, cfg) - vol) < 4 * se


def test_volume_exponent_loglog(cfg):
    Rs = np.array([1.0, 2.0, 4.0])
    vols = [ball_volume(R, cfg) for R in Rs]
    slope = np.polyfit(np.log(Rs), np.log(vols), 1)[0]
    assert abs(slope - 4) < 1e-6


@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_operator_at_origin_matches_reference(alpha, cfg):
    kp = KernelParams.critical(1, alpha)
    val, info = apply_operator(kp, h_shape(alpha), HPoint.origin(1), cfg, full_output=True)
    assert val == pytest.approx(T_H_AT_ZERO[alpha], rel=1e-5)
    assert info.error < 1e-3 * val


def test_operator_subcritical_reference(cfg):
    # slow rho^{-3} tail: the truncated value must sit within its own reported error bound
    kp = KernelParams(1, 2.0, 2.0)
    val, info = apply_operator(kp, h_shape(2.0), HPoint.origin(1), cfg, full_output=True)
    assert abs(val - T_H2_AT_ZERO) <= info.error
    assert abs(val - T_H2_AT_ZERO) / T_H2_AT_ZERO < cfg.tol


@pytest.mark.parametrize("pt", [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (0.3, -2.0), (3.0, 5.0)])
def test_operator_off_origin_alpha2(pt, kp2, cfg):
    # for alpha = 2, T[h^3] = 2 pi h (the constant at the origin is the reference above)
    r, t = pt
    h = h_shape(2.0)
    val = apply_operator(kp2, h, HPoint.cyl(r, t), cfg)
    assert val == pytest.approx(T_H_AT_ZERO[2.0] * float(h(r, t)), rel=1e-4)


@pytest.mark.parametrize("case, ref", BUMP_ORACLES)
def test_operator_against_3d_cubature(case, ref, cfg):
    r0, t0, w, axis, zr, zt, alpha = case
    kp = KernelParams.critical(1, alpha)
    val = apply_operator(kp, compact_bump(r0, t0, w, axis), HPoint.cyl(zr, zt), cfg)
    assert val == pytest.approx(ref, rel=1e-3)


def test_operator_rotation_of_zeta(kp1, cfg):
    h = h_shape(1.0)
    a = apply_operator(kp1, h, HPoint.cyl(0.8, 0.4), cfg)
    b = apply_operator(kp1, h, HPoint.from_complex([0.8 * np.exp(1.1j)], 0.4), cfg)
    assert a == b


def test_refinement_changes_little(kp1, cfg):
    h = h_shape(1.0)
    zeta = HPoint.cyl(0.7, -0.6)
    a = apply_operator(kp1, h, zeta, cfg)
    b = apply_operator(kp1, h, zeta, cfg.refined())
    assert abs(a - b) / abs(a) < 0.5 * cfg.tol


def test_scaling_covariance(kp2, cfg):
    # T[f_s^p](zeta) = s^{(Q-alpha)/2} T[f^p](delta_s zeta) for p = sigma
    s = 1.7
    h = h_shape(2.0)
    hs = CylFunc(lambda r, t: s * h(s * r, s * s * t), 2.0, 1.0 / s, 1.0 / s)
    zeta = HPoint.cyl(0.4, 0.9)
    lhs = apply_operator(kp2, hs, zeta, cfg)
    rhs = s * apply_operator(kp2, h, HPoint.cyl(0.4 * s, 0.9 * s * s), cfg)
    assert lhs == pytest.approx(rhs, rel=1e-4)


def test_positivity_and_monotonicity(kp2, cfg):
    small = compact_bump(1.0, 0.0, 0.5)
    big = CylFunc(lambda r, t: 2 * small(r, t) + 0.5 * compact_bump(0.0, 1.0, 0.5, True)(r, t),
                  10.0, 3.0, small.R_decay * 1.5)
    for pt in [(0.0, 0.0), (1.0, 0.0), (2.0, 2.0)]:
        zeta = HPoint.cyl(*pt)
        a = apply_operator(kp2, small, zeta, cfg)
        b = apply_operator(kp2, big, zeta, cfg)
        assert 0 <= a < b


def test_decay_and_tail_errors(kp2, cfg):
    slow = CylFunc(lambda r, t: ((1 + r * r) ** 2 + t * t) ** -0.125, 0.5, 1.0, 1.0)
    with pytest.raises(NonConvergentDecay):
        apply_operator(kp2, slow, HPoint.origin(1), cfg)
    with pytest.raises(TailTooLarge):
        apply_operator(kp2, h_shape(2.0), HPoint.origin(1), QuadConfig(R_trunc=3.0))


def test_zeta_far_out_raises_for_small_truncation(kp2):
    with pytest.raises(TailTooLarge):
        apply_operator(kp2, h_shape(2.0), HPoint.cyl(0.0, 100.0), QuadConfig(R_trunc=15.0))


def test_non_n1_rejected():
    with pytest.raises(NotImplementedError):
        apply_operator(KernelParams.critical(2, 2.0), h_shape(2.0), HPoint.origin(2), QuadConfig())


def test_ball_monotone_exhaustion(kp2, cfg):
    h = h_shape(2.0)
    zeta = HPoint.cyl(0.0, 0.5)
    vals = [apply_operator_ball(kp2, h, s, zeta, cfg) for s in (0.5, 1.0, 2.0, 5.0, 20.0)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    full = apply_operator(kp2, h, zeta, cfg)
    assert vals[-1] < full and vals[-1] == pytest.approx(full, rel=2e-3)


def test_ball_smaller_than_support_gap_is_zero(kp2, cfg):
    bump = compact_bump(2.0, 0.0, 0.5)
    assert apply_operator_ball(kp2, bump, 1.0, HPoint.cyl(0.2, 0.1), cfg) == 0.0


def test_ball_zeta_outside(kp2, cfg):
    # ball integral with the kernel point outside the ball, against the full-space
    # integral of a function supported in the ball
    bump = compact_bump(0.0, 0.0, 0.6, True)
    zeta = HPoint.cyl(1.5, 0.5)
    a = apply_operator_ball(kp2, bump, 0.9, zeta, cfg)
    b = apply_operator(kp2, bump, zeta, cfg)
    assert a == pytest.approx(b, rel=1e-6)


def test_ball_rejects_zeta_on_sphere(kp2, cfg):
    with pytest.raises(ValueError):
        apply_operator_ball(kp2, h_shape(2.0), 1.0, HPoint.cyl(0.0, 1.0), cfg)


def test_halfspace_symmetric_input_is_zero(kp2, cfg):
    h = h_shape(2.0)  # even in t: symmetric about lam = 0
    assert apply_operator_halfspace(kp2, (h, h), HalfSpace(0.0), HPoint.cyl(1.0, 0.5), cfg) == 0.0


def test_halfspace_zeta_on_plane_and_below(kp2, cfg):
    h = h_shape(2.0)
    hl = CylFunc(lambda r, t: h(r, -2.0 - t), 2.0, 4.0, 2.0)
    assert apply_operator_halfspace(kp2, (h, hl), HalfSpace(-1.0), HPoint.cyl(0.7, -1.0), cfg) == 0.0
    with pytest.raises(ValueError):
        apply_operator_halfspace(kp2, (h, hl), HalfSpace(-1.0), HPoint.cyl(0.7, -1.5), cfg)


@pytest.mark.parametrize("pt", [(0.0, 0.0), (1.0, 0.5), (0.5, -0.5)])
def test_halfspace_matches_closed_form_difference(pt, kp2, cfg):
    # for alpha = 2 and h = ((1+r^2)^2+t^2)^{-1/2}: T[h^3] = 2 pi h, so the
    # difference integral equals 2 pi (h - h_lam)
    lam = -1.0
    h = h_shape(2.0)
    hl = CylFunc(lambda r, t: h(r, 2 * lam - t), 2.0, 4.0, 2.0)
    r, t = pt
    val = apply_operator_halfspace(kp2, (h, hl), HalfSpace(lam), HPoint.cyl(r, t), cfg)
    ref = T_H_AT_ZERO[2.0] * float(h(r, t) - hl(r, t))
    assert val == pytest.approx(ref, rel=1e-4)


def test_integrate_cylindrical_gaussian(cfg):
    # int exp(-(r^4 + t^2)) dxi = 2 pi^2 int rho^3 exp(-rho^4) = pi^2 / 2
    val = integrate_cylindrical(lambda r, t: np.exp(-(r**4 + t * t)), cfg, rho_max=6.0)
    assert val == pytest.approx(0.5 * math.pi**2, rel=1e-10)


def test_lp_norm_examples(cfg):
    zero = CylFunc(lambda r, t: np.zeros(np.broadcast(r, t).shape), 10.0, 1.0, 1.0)
    assert lp_norm(zero, 2.0, cfg) == 0.0
    with pytest.raises(NonConvergentDecay):
        lp_norm(h_shape(2.0), 2.0, cfg)  # decay 2 * p = 4 = Q
    with pytest.raises(ValueError):
        lp_norm(h_shape(2.0), 0.5, cfg)


def test_lp_norm_radial_profile_closed_form(cfg):
    # f = 1 / (1 + rho^40): ||f||_p^p = 2 pi^2 int rho^3 (1 + rho^40)^{-p} = 2 pi^2 B(1/10, p - 1/10) / 40
    from scipy.special import beta
    f = CylFunc(lambda r, t: 1.0 / (1.0 + (r**4 + t * t) ** 10), 40.0, 1.0, 1.0)
    for p in (1.0, 2.0, 3.5):
        ref = (2 * math.pi**2 * beta(0.1, p - 0.1) / 40) ** (1 / p)
        assert lp_norm(f, p, cfg) == pytest.approx(ref, rel=1e-6)


def test_lp_norm_critical_scale_invariance(kp1, cfg):
    # ||f_s||_{2Q/(Q-alpha)} = ||f||, f_s = s^{(Q-alpha)/2} f(delta_s .)
    h = h_shape(1.0)
    pe = 8 / 3
    base = lp_norm(h, pe, cfg)
    for s in (0.5, 2.0, 3.0):
        hs = CylFunc(lambda r, t, s=s: s**1.5 * h(s * r, s * s * t), 3.0, s**-1.5, 1.0 / s)
        assert lp_norm(hs, pe, cfg) == pytest.approx(base, rel=1e-6)


def test_hls_mc_zero_and_determinism():
    hp = HLSParams(1, 2.0)
    cfg = QuadConfig(mc_samples=200_000, seed=7)
    H = h_shape(-2.0)  # ((1+r^2)^2+t^2)^{-3/2}
    zero = CylFunc(lambda r, t: np.zeros(np.broadcast(r, t).shape), 10.0, 1.0, 1.0)
    res = hls_double_integral(hp, H, zero, cfg)
    assert res.value == 0.0 and res.stderr == 0.0
    a = hls_double_integral(hp, H, H, cfg)
    b = hls_double_integral(hp, H, H, cfg)
    assert a.value == b.value and a.stderr == b.stderr
    c = hls_double_integral(hp, H, H, QuadConfig(mc_samples=200_000, seed=8))
    assert c.value != a.value
    assert abs(c.value - a.value) < 5 * math.hypot(a.stderr, c.stderr)


def test_hls_mc_against_closed_form_pairing():
    # for lam = 2 the pairing of H = h^3 with itself equals ||h^3||... via T[h^3] = 2 pi h:
    # iint H(xi) H(eta) |xi^{-1} eta|^{-2} = 2 pi int h^4
    hp = HLSParams(1, 2.0)
    cfg = QuadConfig(mc_samples=1_000_000, seed=3)
    H = h_shape(-2.0)
    res = hls_double_integral(hp, H, H, cfg)
    h = h_shape(2.0)
    ref = 2 * math.pi * integrate_cylindrical(lambda r, t: h(r, t) ** 4, QuadConfig())
    assert abs(res.value - ref) < 5 * res.stderr
    assert res.stderr < 2e-3 * ref
