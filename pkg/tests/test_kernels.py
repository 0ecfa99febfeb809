import math

import numpy as np
import pytest
from scipy import integrate, special

from ibsolve.kernels import (
    ChiTable,
    Coupling,
    Grid,
    GridMismatchError,
    KernelDomainError,
    bessel_J,
    bessel_J_integral,
    chi,
    chi_continued,
    chi_II,
    chi_plateau,
    cosh_convolve,
    cosh_convolve_at,
    ghat,
    kernel_G,
    phi_nu,
    pv_sinh_convolve,
    pv_sinh_convolve_at,
)


def _G_by_quad(theta, p):
    # independent cosine-weighted quadrature of the Fourier representation
    val, _ = integrate.quad(lambda k: ghat(np.array([k]), p)[0], 0, 60, weight="cos", wvar=theta, limit=400)
    return val / math.pi


@pytest.mark.parametrize("p", [0.4, 0.7, 1.5, 3.0])
@pytest.mark.parametrize("theta", [0.0, 0.3, 1.7, 4.0])
def test_kernel_matches_independent_quadrature(p, theta):
    assert kernel_G(theta, p) == pytest.approx(_G_by_quad(theta, p), abs=1e-9)


def test_kernel_vanishes_at_free_fermion_point():
    th = np.linspace(-10, 10, 101)
    assert np.max(np.abs(kernel_G(th, 1.0))) == 0.0
    assert np.max(np.abs(chi(th, 1.0))) == 0.0


def test_ghat_zero_mode_and_evenness():
    for p in (0.3, 1.0, 2.5):
        assert ghat(np.array([0.0]), p)[0] == pytest.approx((p - 1) / (2 * p))
        k = np.linspace(0.1, 5, 7)
        assert np.allclose(ghat(k, p), ghat(-k, p))


@pytest.mark.parametrize("p", [0.5, 2.0])
def test_chi_is_primitive_of_kernel(p):
    th = 1.3
    val, _ = integrate.quad(lambda t: kernel_G(t, p), 0, th)
    assert chi(th, p) == pytest.approx(2 * math.pi * val, abs=1e-9)
    assert chi(-th, p) == pytest.approx(-chi(th, p), abs=1e-14)


@pytest.mark.parametrize("p", [0.5, 2.0])
def test_chi_plateau(p):
    assert chi(60.0, p) == pytest.approx(chi_plateau(p), abs=1e-8)


def test_kernel_domain():
    with pytest.raises(KernelDomainError):
        Coupling(-1.0)
    with pytest.raises(KernelDomainError):
        kernel_G(1.0, 0.0)
    with pytest.raises(KernelDomainError):
        chi_II(0.1 + 0.1j, 2.0)


def test_coupling_maps():
    c = Coupling.from_beta2(4 * math.pi)
    assert c.p == pytest.approx(1.0)
    assert c.regime == "free-fermion"
    assert Coupling(2.0).beta2 == pytest.approx(16 * math.pi / 3)
    assert Coupling(0.5).regime == "attractive"


@pytest.mark.parametrize("p", [0.6, 2.0])
def test_chi_continuation_is_continuous_across_singular_line(p):
    lim = math.pi * min(1.0, p)
    x = 0.7
    d = 0.02
    vals = [complex(chi_continued(x + 1j * (lim + s * d), p)) for s in (-2, -1, 1, 2)]
    # cubic through the four points must be consistent with a smooth function
    mid_from_below = 2 * vals[1] - vals[0]
    mid_from_above = 2 * vals[2] - vals[3]
    assert abs(mid_from_below - mid_from_above) < 0.02
    with pytest.raises(KernelDomainError):
        chi(x + 1j * (lim - 1e-9), p)


def test_chi_table_matches_direct_values():
    tab = ChiTable(1.7, spacing=0.01)
    x = np.array([-3.0, -0.2, 0.55, 2.4])
    assert np.allclose(tab(x), chi(x, 1.7), atol=1e-8)


def test_phi_nu_odd_and_domain():
    th = np.array([0.2, 1.0, 3.0])
    assert np.allclose(phi_nu(-th, 0.5, 1.5), -phi_nu(th, 0.5, 1.5))
    with pytest.raises(KernelDomainError):
        phi_nu(0.1 + 2j, 0.5, 1.5)


def test_cosh_convolution_of_constant():
    # int dy / (2 pi cosh y) = 1/2
    g = Grid.sample(-40, 40, 4001, lambda x: np.ones_like(x))
    out = cosh_convolve(g)
    assert np.allclose(out.values[1000:3000], 0.5, atol=1e-10)
    assert cosh_convolve_at([0.0], g)[0] == pytest.approx(0.5, abs=1e-10)


def test_cosh_convolution_of_gaussian_against_quad():
    g = Grid.sample(-30, 30, 6001, lambda x: np.exp(-x * x))
    x0 = 0.8
    ref, _ = integrate.quad(lambda y: math.exp(-y * y) / (2 * math.pi * math.cosh(x0 - y)), -30, 30)
    assert cosh_convolve_at([x0], g)[0] == pytest.approx(ref, abs=1e-9)


def test_pv_sinh_convolution_against_quad():
    f = lambda y: np.exp(-y * y)
    g = Grid.sample(-30, 30, 6001, f)
    x0 = 0.4
    ref, _ = integrate.quad(lambda y: (f(y) - f(x0)) / (2 * math.pi * math.sinh(x0 - y)), -30, 30,
                            points=[x0], limit=400)
    # f(x0) times pv int dy / sinh(x0 - y) vanishes by oddness
    val = pv_sinh_convolve_at([x0], g)[0]
    assert val == pytest.approx(ref, abs=1e-7)
    grid_val = np.interp(x0, g.x, pv_sinh_convolve(g).values)
    assert grid_val == pytest.approx(ref, abs=1e-5)


def test_grid_mismatch_and_validation():
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 3, np.zeros(4))
    a = Grid.sample(0, 1, 5)
    assert a.same_support(a.with_values(np.ones(5)))
    assert issubclass(GridMismatchError, ValueError)


@pytest.mark.parametrize("n", [0, 1])
def test_bessel_against_scipy(n):
    z = np.linspace(0, 30, 61)
    assert np.allclose(bessel_J(n, z), special.jv(n, z), atol=1e-14)
    assert np.allclose(bessel_J_integral(n, z[:20]), special.jv(n, z[:20]), atol=1e-12)
