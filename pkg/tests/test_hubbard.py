import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import expit

from ibsolve.hubbard import (
    G_xxx,
    G_xxx_integral,
    HubbardModel,
    SpecialObjectError,
    gamma_sym,
    lieb_wu_continuation,
    lieb_wu_oracle,
    phi_kernel,
    solve_hubbard,
    solve_xxx_limit,
    sym_coupling_inverse,
    sym_coupling_map,
    sym_t_over_U_from_g,
)


@pytest.mark.parametrize("x", [0.0, 0.4, 1.7, 6.0])
def test_g_xxx_against_fourier_integral(x):
    # (1/pi) int_0^inf cos(kx) / (1 + e^k) dk
    f = lambda k: expit(-k)
    ref = (quad(f, 0, np.inf, weight="cos", wvar=x)[0] if x else quad(f, 0, np.inf)[0]) / math.pi
    assert float(G_xxx(x)) == pytest.approx(ref, abs=1e-10)


def test_g_xxx_integral_limits():
    assert float(G_xxx_integral(0.0)) == 0.0
    assert float(G_xxx_integral(400.0)) == pytest.approx(0.25, abs=1e-3)
    z = 1.3
    assert float(G_xxx_integral(z)) == pytest.approx(quad(G_xxx, 0, z)[0], abs=1e-12)


def test_phi_kernel_branch():
    assert phi_kernel(0.0, 0.5) == 0.0
    assert float(phi_kernel(1e9, 0.5)) == pytest.approx(math.pi)
    # i log((i xi + x)/(i xi - x)) on the principal branch
    x, xi = 0.8, 0.3
    assert float(phi_kernel(x, xi)) == pytest.approx((1j * np.log((1j * xi + x) / (1j * xi - x))).real)
    with pytest.raises(ValueError):
        phi_kernel(1.0, 0.0)


def test_model_validation():
    with pytest.raises(ValueError):
        HubbardModel(6, 1.0, 4.0)
    with pytest.raises(ValueError):
        HubbardModel(4, 1.0, -1.0)
    assert HubbardModel(8, 1.0, 4.0).c == pytest.approx(0.5)


@pytest.mark.parametrize("U", [4.0, 16.0])
def test_nlie_matches_lieb_wu_at_four_sites(U):
    m = HubbardModel(4, 1.0, U)
    ref = lieb_wu_oracle(m)
    sol = solve_hubbard(m)
    assert sol.energy == pytest.approx(ref.energy, abs=1e-5)
    assert sol.report.final_residual < 1e-9


def test_root_at_zone_boundary_is_rejected():
    with pytest.raises(SpecialObjectError):
        solve_hubbard(HubbardModel(4, 1.0, 1.0))


def test_strong_coupling_approaches_xxx_profile():
    m = HubbardModel(4, 1.0, 50.0)
    full = solve_hubbard(m)
    xxx = solve_xxx_limit(m)
    assert np.max(np.abs(full.Z - xxx.Z)) < 1e-3


def test_z_is_odd_for_the_symmetric_state():
    sol = solve_hubbard(HubbardModel(4, 1.0, 8.0))
    assert np.allclose(sol.Z, -sol.Z[::-1], atol=1e-8)


def test_w_energy_decreases_with_u():
    ew = [sum(solve_hubbard(HubbardModel(4, 1.0, U)).energy_parts[2:]) for U in (10.0, 20.0, 40.0)]
    assert ew[0] > ew[1] > ew[2]


def test_lieb_wu_continuation_distinct_momenta():
    res = lieb_wu_continuation(HubbardModel(4, 1.0, 1.0), steps=20)[-1]
    k = np.mod(res.k, 2 * math.pi)
    assert len(np.unique(np.round(k, 8))) == k.size
    assert res.residual < 1e-10
    with pytest.raises(ValueError):
        lieb_wu_oracle(HubbardModel(12, 1.0, 4.0))


def test_sym_coupling_map():
    lam = 3.7
    t_over_U, U = sym_coupling_map(lam)
    assert sym_coupling_inverse(t_over_U) == pytest.approx(lam)
    assert U < 0
    assert t_over_U == pytest.approx(math.sqrt(lam) / (4 * math.pi ** 2), abs=1e-15)
    assert sym_t_over_U_from_g(1 / math.sqrt(2)) == pytest.approx(0.5, abs=1e-15)
    assert gamma_sym(lam, 0.0) == 0.0
    with pytest.raises(ValueError):
        sym_coupling_map(0.0)
