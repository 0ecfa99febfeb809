import math
from fractions import Fraction

import numpy as np
import pytest

from ibsolve.tba import (
    PositivityError,
    ResolutionError,
    StripState,
    TBAModel,
    admissible,
    boundary_flow,
    conformal_energy_closed_form,
    enumerate_states,
    integral_constant,
    integral_constant_exact,
    integrals_of_motion,
    kac_weight,
    psi_hat,
    scaling_energy,
    solve_tba,
    stationary_y_residual,
    tba_plateau,
)


@pytest.mark.parametrize("L", [3, 4, 5, 6])
def test_vacuum_energy_is_minus_c_over_24(L):
    m = TBAModel(L)
    sol = solve_tba(m, StripState.vacuum(m.strips))
    assert scaling_energy(m, sol) == pytest.approx(-m.central_charge / 24, abs=1e-8)


def test_model_validation():
    with pytest.raises(ValueError):
        TBAModel(2)
    with pytest.raises(ValueError):
        TBAModel(5, boundary_xi=1.0)
    with pytest.raises(ValueError):
        StripState((1,), ((0, 0),))
    with pytest.raises(ValueError):
        StripState((2,), ((0, 1),))  # must be non-increasing


def test_excited_state_zero_quantization():
    m = TBAModel(4)
    st = StripState((2, 0), ((1, 0), ()))
    sol = solve_tba(m, st)
    ys = sol.zeros[0]
    psi = psi_hat(m, sol.grid, sol.S, sol.zeros, ys, 0)
    assert np.allclose(psi, math.pi * st.n_values(1), atol=1e-9)
    assert scaling_energy(m, sol) == pytest.approx(conformal_energy_closed_form(m, st), abs=1e-8)
    assert np.all(sol.log1p_d() > -np.inf)


def test_admissibility_rule():
    m = TBAModel(4)
    assert admissible(m, StripState((2, 0), ((0, 0), ())))
    assert not admissible(m, StripState((1, 0), ((0,), ())))
    assert not admissible(m, StripState((0, 2), ((), (0, 0))))
    states = enumerate_states(m, 2, 2)
    assert len(states) == 7
    assert all(admissible(m, s) for s in states)


def test_integral_constants_exact():
    assert integral_constant_exact(1) == 1
    assert integral_constant_exact(2) == Fraction(1001, 1440)
    assert integral_constant(1) == pytest.approx(math.pi)


def test_first_integral_is_energy():
    m = TBAModel(4)
    for st in (StripState.vacuum(2), StripState((2, 0), ((0, 0), ()))):
        sol = solve_tba(m, st)
        assert integrals_of_motion(m, sol, 1) == pytest.approx(scaling_energy(m, sol), abs=1e-8)


def test_plateaus_solve_stationary_y_system():
    for L in (4, 5, 7):
        for s in range(1, L + 1):
            d = [tba_plateau(L, q, s) for q in range(1, L - 1)]
            assert stationary_y_residual(d) < 1e-12


def test_kac_weights():
    assert kac_weight(4, 1, 1) == 0
    assert kac_weight(4, 1, 2) == Fraction(1, 10)
    assert kac_weight(3, 2, 1) == Fraction(1, 2)


def test_resolution_error_for_high_integrals():
    m = TBAModel(4, x_min=-300.0)
    sol = solve_tba(m, StripState.vacuum(2))
    with pytest.raises(ResolutionError):
        integrals_of_motion(m, sol, 3)


def test_boundary_flow_endpoints():
    st = StripState((2, 0), ((0, 0), ()))
    flow = boundary_flow(st, [20.0, -20.0])
    (xi_p, sp), (xi_m, sm) = flow
    bulk = solve_tba(TBAModel(4), st)
    assert abs(scaling_energy(sp.model, sp) - scaling_energy(bulk.model, bulk)) < 1e-4
    target = float(1 - Fraction(7, 240) + kac_weight(4, 1, 2))
    assert abs(scaling_energy(sm.model, sm) - target) < 1e-4


def test_positivity_error_is_runtime_error():
    assert issubclass(PositivityError, RuntimeError)
