import math

import numpy as np
import pytest

from ibsolve.kernels import Coupling
from ibsolve.sg_limits import (
    breather_masses,
    ir_quantization_residual,
    match_vertex,
    soliton_amplitude,
    soliton_amplitude_plus,
    uv_effective_weights,
    vertex_weights,
)
from ibsolve.sg_nlie import RootConfig, energy_momentum, make_state, solve_sg
from ibsolve.solver import InsufficientDataError


def test_breathers_repulsive_is_empty():
    assert breather_masses(8 * math.pi) == []
    assert breather_masses(9 * math.pi) == []


def test_breathers_two_levels():
    m = breather_masses(8 * math.pi / 3, M=2.0)
    assert len(m) == 2
    assert m[0] == pytest.approx(4 * math.sin(math.pi / 6))
    assert m[1] == pytest.approx(4 * math.sin(math.pi / 3))


def test_breathers_small_coupling_ratio():
    gamma, M = 0.1, 1.0
    m = breather_masses(gamma, M)
    assert len(m) == math.ceil(8 * math.pi / gamma) - 1
    mu = gamma * M / 8
    for n in (1, 2, 3):
        assert abs(m[n - 1] / (n * mu) - 1) < 1e-4


def test_amplitudes_unitary_on_real_line():
    th = np.linspace(-3, 3, 13)
    for p in (0.7, 1.8):
        assert np.allclose(np.abs(soliton_amplitude(th, p)), 1.0, atol=1e-12)
        assert np.allclose(np.abs(soliton_amplitude_plus(th, p)), 1.0, atol=1e-12)


def test_vertex_table_and_matching():
    R2 = Coupling(1.5).R2
    assert vertex_weights(0, 0, R2) == (0.0, 0.0)
    dp, dm = vertex_weights(0, 2, R2)
    assert dp == pytest.approx(R2 / 2) and dm == pytest.approx(R2 / 2)
    assert match_vertex(dp, dm, R2, m_values=[2, -2]) in {(0, 2), (0, -2)}
    assert match_vertex(0.123, 0.456, R2) is None


def test_uv_needs_three_points():
    with pytest.raises(InsufficientDataError):
        uv_effective_weights([(1e-3, -100.0, 0.0), (3e-3, -30.0, 0.0)])
    with pytest.raises(ValueError):
        uv_effective_weights([(1e-1, 0.0, 0.0), (3e-3, 0.0, 0.0), (1e-3, 0.0, 0.0)])


def test_uv_weights_free_fermion_vacuum_and_two_holes():
    p = 1.0
    R2 = Coupling(p).R2
    ls = (1e-2, 3e-3, 1e-3)
    vac, two = [], []
    for l in ls:
        E, P = energy_momentum(solve_sg(make_state(p, l)))
        vac.append((l, E, P))
        E, P = energy_momentum(solve_sg(make_state(p, l, RootConfig(holes=(0.5, -0.5), spin=1))))
        two.append((l, E, P))
    w0 = uv_effective_weights(vac, central_charge=1.0, R2=R2)
    assert abs(w0.delta_plus) < 1e-2 and abs(w0.delta_minus) < 1e-2
    assert w0.c_eff == pytest.approx(1.0, abs=1e-2)
    w2 = uv_effective_weights(two, vacuum_trace=vac, R2=R2, spin=1)
    assert w2.delta_plus == pytest.approx(R2 / 2, abs=1e-2)
    assert w2.matched_vertex is not None


def test_ir_residual_requires_pure_holes():
    st = solve_sg(make_state(1.5, 20.0, RootConfig(holes=(0.5, -0.5), spin=1)))
    assert ir_quantization_residual(st) < 1e-6
    with pytest.raises(ValueError):
        ir_quantization_residual(make_state(1.5, 20.0))
