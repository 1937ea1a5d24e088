import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from hverify import hgroup as hg
from hverify.hgroup import HPoint
from hverify.kernel import (HLSParams, KernelParams, KernelSingularity, angular_integrand,
                            frac_fundamental_constant, green_kernel, hls_constant,
                            hls_constant_printed, hls_extremizer, kernel_scaling,
                            reduced_kernel_cyl)


def test_kernel_params_validation():
    kp = KernelParams.critical(1, 2.0)
    assert kp.Q == 4 and kp.sigma == 3.0 and kp.p == 3.0 and kp.kexp == 2.0 and kp.is_critical
    assert not KernelParams(1, 2.0, 2.0).is_critical
    for bad in ((1, 0.0, 2.0), (1, 4.0, 2.0), (1, 2.0, 1.0), (1, 2.0, 3.5), (0, 1.0, 1.5)):
        with pytest.raises(ValueError):
            KernelParams(*bad)


def test_hls_params():
    hp = HLSParams(1, 2.0)
    assert hp.p_hls == pytest.approx(4 / 3)
    with pytest.raises(ValueError):
        HLSParams(1, 4.0)


def test_green_kernel_examples(kp2):
    o = HPoint.origin(1)
    assert green_kernel(kp2, o, HPoint.cyl(0.0, 1.0)) == pytest.approx(1.0)
    assert green_kernel(kp2, o, HPoint.cyl(0.0, 4.0)) == pytest.approx(0.25)
    with pytest.raises(KernelSingularity):
        green_kernel(kp2, o, o)


def test_kernel_scaling_examples(kp2):
    lhs, rhs = kernel_scaling(kp2, 2.0, HPoint.origin(1), HPoint.cyl(0.0, 1.0))
    assert lhs == pytest.approx(0.25, rel=1e-15) and rhs == pytest.approx(0.25, rel=1e-15)
    lhs, rhs = kernel_scaling(kp2, 1.0, HPoint.cyl(0.3, 0.1), HPoint.cyl(1.0, -1.0))
    assert lhs == rhs


def test_kernel_invariances_random(kp1):
    rng = np.random.default_rng(0)
    a, b, g = (hg.random_points(rng, 10_000, 1, log_radius=(-1, 1)) for _ in range(3))
    np.testing.assert_allclose(green_kernel(kp1, hg.multiply(g, a), hg.multiply(g, b)),
                               green_kernel(kp1, a, b), rtol=1e-11)
    s = 10 ** rng.uniform(-1, 1, 10_000)
    lhs, rhs = kernel_scaling(kp1, s, a, b)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_angular_integrand_matches_group_distance(kp1):
    rng = np.random.default_rng(1)
    rt, tt, r, t, psi = rng.uniform(0, 2, 5)
    zeta = HPoint.cyl(rt, tt)
    xi = HPoint(np.array([r * math.cos(psi)]), np.array([r * math.sin(psi)]), t)
    assert angular_integrand(kp1.kexp, rt, tt, r, t, psi) == pytest.approx(green_kernel(kp1, zeta, xi), rel=1e-13)


def test_reduced_kernel_axis_fast_paths(kp2):
    assert reduced_kernel_cyl(kp2, 0.0, 1.0, 2.0, 0.5) == pytest.approx(2 * math.pi * (16 + 0.25) ** -0.5)
    assert reduced_kernel_cyl(kp2, 2.0, 1.0, 0.0, 0.5) == pytest.approx(2 * math.pi * (16 + 0.25) ** -0.5)
    with pytest.raises(KernelSingularity):
        reduced_kernel_cyl(kp2, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(NotImplementedError):
        reduced_kernel_cyl(KernelParams.critical(2, 2.0), 1.0, 0.0, 0.5, 0.0)


@pytest.mark.parametrize("args", [(0.5, 0.2, 1.3, -0.4), (1.0, 0.0, 1.0, 0.3), (2.0, 3.0, 0.1, 2.5)])
@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_reduced_kernel_against_adaptive_quad(args, alpha):
    kp = KernelParams.critical(1, alpha)
    rt, tt, r, t = args
    ref = integrate.quad(lambda p: float(angular_integrand(kp.kexp, rt, tt, r, t, p)), 0, 2 * math.pi,
                         epsabs=0, epsrel=1e-13, limit=500)[0]
    assert reduced_kernel_cyl(kp, rt, tt, r, t) == pytest.approx(ref, rel=1e-10)


def test_frac_fundamental_constant_examples():
    assert frac_fundamental_constant(1, 2.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert frac_fundamental_constant(2, 2.0) == pytest.approx(math.pi**-3, rel=1e-14)
    for a in np.linspace(0.05, 3.95, 40):
        assert frac_fundamental_constant(1, a) > 0
    with pytest.raises(ValueError):
        frac_fundamental_constant(1, 4.0)


def test_gamma_values_used():
    assert math.gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)
    assert math.gamma(1.5) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)
    assert math.gamma(1.0) == 1.0


# Frank-Lieb constant evaluated with mpmath at 30 digits
HLS_REF = {0.5: 1.3459858536381701, 1.0: 1.8596437689832918, 2.0: 4.0,
           3.0: 12.013168757445038, 3.5: 30.306014561207217}


@pytest.mark.parametrize("lam", sorted(HLS_REF))
def test_hls_constant_reference(lam):
    assert hls_constant(1, lam) == pytest.approx(HLS_REF[lam], rel=1e-13)


def test_hls_constant_lambda2_is_4():
    assert abs(hls_constant(1, 2.0) - 4.0) <= 1e-12


def test_hls_constant_general_n_against_mpmath():
    for n in (2, 3):
        Q = 2 * n + 2
        for lam in (1.0, 0.5 * Q, Q - 0.5):
            ref = ((mp.pi ** (n + 1) / (2 ** (n - 1) * mp.factorial(n))) ** (mp.mpf(lam) / Q)
                   * mp.factorial(n) * mp.gamma((Q - mp.mpf(lam)) / 2) / mp.gamma((2 * Q - mp.mpf(lam)) / 4) ** 2)
            assert hls_constant(n, lam) == pytest.approx(float(ref), rel=1e-13)


def test_printed_variant_only_agrees_at_lambda_2():
    # the Gamma((Q-2)/2) numerator coincides with Gamma((Q-lam)/2) only when lam = 2
    assert hls_constant_printed(1, 2.0) == pytest.approx(hls_constant(1, 2.0), rel=1e-15)
    assert hls_constant_printed(1, 3.0) / hls_constant(1, 3.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-13)
    assert hls_constant_printed(1, 1.0) == pytest.approx(2.0983832871397266, rel=1e-13)
    assert abs(hls_constant_printed(1, 1.0) / hls_constant(1, 1.0) - 1) > 0.1


def test_hls_constant_range():
    for lam in np.linspace(0.01, 3.99, 50):
        v = hls_constant(1, lam)
        assert np.isfinite(v) and v > 0
    with pytest.raises(ValueError):
        hls_constant(1, 0.0)


def test_hls_extremizer_examples():
    assert hls_extremizer(1, 2.0, HPoint.origin(1)) == 1.0
    assert hls_extremizer(1, 2.0, HPoint.cyl(0.0, 1.0)) == pytest.approx(2**-1.5, rel=1e-15)
    rng = np.random.default_rng(2)
    xi = hg.random_points(rng, 100, 2)
    np.testing.assert_allclose(hls_extremizer(2, 3.0, hg.rotate(rng.uniform(0, 6, (100, 2)), xi)),
                               hls_extremizer(2, 3.0, xi), rtol=1e-13)


def test_extremizer_is_power_of_standard_shape():
    # with lam = Q - alpha the extremizer equals h^sigma, h the standard-solution shape
    rng = np.random.default_rng(3)
    xi = hg.random_points(rng, 200, 1, log_radius=(-1, 1))
    for alpha in (1.0, 2.0, 3.0):
        kp = KernelParams.critical(1, alpha)
        h = ((1 + xi.abs_z**2) ** 2 + xi.t**2) ** (-(4 - alpha) / 4)
        np.testing.assert_allclose(hls_extremizer(1, 4 - alpha, xi), h**kp.sigma, rtol=1e-12)
