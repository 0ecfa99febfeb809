import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import k1

from ibsolve.kernels import chi
from ibsolve.sg_nlie import (
    ClassificationError,
    ConfigurationError,
    RootConfig,
    SpecialObjectError,
    Theory,
    UnsupportedConfigurationError,
    check_counting_equation,
    classify_theory,
    default_eta,
    energy_momentum,
    free_fermion_energy,
    free_fermion_hole_positions,
    hole_quantization_residual,
    make_state,
    solve_sg,
)


def _vacuum_bessel_series(l, terms=60):
    # -(2/pi) sum_n (-1)^{n+1} K_1(n l) / n, from expanding log(1 + e^{-l cosh x})
    n = np.arange(1, terms + 1)
    return float(-2 / math.pi * np.sum((-1.0) ** (n + 1) * k1(n * l) / n))


@pytest.mark.parametrize("l", [0.5, 2.0, 10.0])
def test_free_fermion_vacuum_against_bessel_series(l):
    st = solve_sg(make_state(1.0, l))
    E, P = energy_momentum(st)
    assert E == pytest.approx(_vacuum_bessel_series(l), abs=1e-10)
    assert P == pytest.approx(0.0, abs=1e-12)


def test_free_fermion_two_holes():
    l = 3.0
    cfg = RootConfig(holes=(0.5, -0.5), spin=1)
    st = solve_sg(make_state(1.0, l, cfg))
    h_ref = free_fermion_hole_positions(l, [0.5, -0.5])
    assert np.allclose(np.sort(st.holes), np.sort(h_ref), atol=1e-10)
    E, P = energy_momentum(st)
    E_ref, P_ref = free_fermion_energy(l, [0.5, -0.5])
    assert E == pytest.approx(E_ref, abs=1e-10)
    assert hole_quantization_residual(st) < 1e-9


@pytest.mark.parametrize("p", [0.6, 1.5])
def test_vacuum_interacting_is_parity_symmetric_and_decays(p):
    st = solve_sg(make_state(p, 5.0))
    E, P = energy_momentum(st)
    assert abs(P) < 1e-12
    assert -0.01 < E < 0
    # Z(x + i eta) with the conjugate symmetry of a parity-even state
    Z = st.Z
    assert np.allclose(Z, -np.conj(Z[::-1]), atol=1e-8)


def test_two_hole_ir_quantization_at_large_l():
    p, l = 1.5, 20.0
    st = solve_sg(make_state(p, l, RootConfig(holes=(0.5, -0.5), spin=1)))
    h = st.holes
    res = [l * math.sinh(h[k]) + sum(chi(h[k] - h[j], p) for j in range(2)) - 2 * math.pi * float(st.config.holes[k])
           for k in range(2)]
    assert max(abs(r) for r in res) < 1e-6
    E, _ = energy_momentum(st)
    assert E == pytest.approx(float(np.sum(np.cosh(h))), abs=1e-6)


def test_counting_equation_and_theories():
    vac = RootConfig()
    assert check_counting_equation(vac, 1.5)
    two = RootConfig(holes=(0.5, -0.5), spin=1)
    assert check_counting_equation(two, 0.7)
    assert not check_counting_equation(RootConfig(holes=(0.5, -0.5), spin=0), 0.7)
    assert classify_theory(vac) == {Theory.SINE_GORDON, Theory.MASSIVE_THIRRING}
    odd = RootConfig(holes=(0.5,), spin=Fraction(1, 2))
    assert classify_theory(odd) == {Theory.MASSIVE_THIRRING}


def test_config_validation():
    with pytest.raises(ConfigurationError):
        RootConfig(delta=2)
    with pytest.raises(ConfigurationError):
        RootConfig(holes=(0.5, 0.5), spin=1)
    with pytest.raises(ConfigurationError):
        RootConfig(holes=(1, -1), spin=1)  # integers need delta = 1
    RootConfig(holes=(1, -1), spin=1, delta=1)
    with pytest.raises(ConfigurationError):
        RootConfig(holes=(0.5,), spin=1)   # parity of N_H against S_z


def test_unsupported_and_special_configurations():
    with pytest.raises(SpecialObjectError):
        solve_sg(make_state(1.5, 5.0, RootConfig(holes=(0.5, -0.5, 1.5, -1.5), specials=(0.0,), spin=1)))
    with pytest.raises(UnsupportedConfigurationError):
        solve_sg(make_state(0.5, 5.0, RootConfig(holes=(0.5, -0.5), close_pairs=((0.5, -0.5),), spin=0)))
    with pytest.raises(ConfigurationError):
        solve_sg(make_state(1.5, 5.0, RootConfig(holes=(0.5, -0.5), spin=0)))


def test_eta_bounds():
    assert default_eta(2.0) == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        make_state(0.5, 1.0, eta=0.9)
    assert issubclass(ClassificationError, ValueError)
