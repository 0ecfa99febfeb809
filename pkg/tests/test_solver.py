import numpy as np
import pytest

from ibsolve.kernels import Grid
from ibsolve.solver import (
    BracketingError,
    DivergenceError,
    InsufficientDataError,
    IterationConfig,
    estimate_contraction,
    fixed_point_solve,
    solve_source_positions,
)


def test_linear_contraction_rate_is_reported():
    # f <- 0.5 f + 1 has fixed point 2 and contraction 1/2
    v, rep = fixed_point_solve(lambda f: 0.5 * f + 1.0, np.zeros(3), IterationConfig(tol_function=1e-12))
    assert np.allclose(v, 2.0, atol=1e-11)
    assert rep.contraction_estimate == pytest.approx(0.5, abs=1e-6)
    assert not rep.fallback_used


def test_grid_iterates_are_accepted():
    g = Grid.sample(0, 1, 11)
    out, rep = fixed_point_solve(lambda f: f.with_values(0.25 * f.values + 3.0), g)
    assert isinstance(out, Grid)
    assert np.allclose(out.values, 4.0)


def test_divergence_carries_history():
    with pytest.raises(DivergenceError) as ei:
        fixed_point_solve(lambda f: -2.0 * f + 1.0, np.ones(2), IterationConfig(max_iter=20, auto_damping=False))
    assert len(ei.value.history) == 20


def test_auto_damping_rescues_oscillation():
    # map with slope -1.5 diverges undamped; damping 1/4 turns it into a contraction
    v, rep = fixed_point_solve(lambda f: -1.5 * f + 5.0, np.zeros(1), IterationConfig(max_iter=400))
    assert v[0] == pytest.approx(2.0, abs=1e-9)
    assert rep.fallback_used


def test_nonfinite_map_raises():
    with pytest.raises(DivergenceError):
        fixed_point_solve(lambda f: f * np.inf, np.ones(2))


@pytest.mark.parametrize("kw", [{"damping": 0.0}, {"tol_function": -1.0}, {"max_iter": 0}])
def test_iteration_config_validation(kw):
    with pytest.raises(ValueError):
        IterationConfig(**kw)


def test_source_positions_newton_like_update():
    targets = np.array([1.0, 2.0, 3.0])
    x, rep = solve_source_positions(lambda y: np.sinh(y) - targets, np.zeros(3),
                                    update=lambda y, r: np.arcsinh(np.sinh(y) - r))
    assert np.allclose(x, np.arcsinh(targets), atol=1e-10)


def test_source_positions_bisection_fallback():
    # the default update moves the wrong way for a decreasing residual
    x, rep = solve_source_positions(lambda y: -(y - 0.7), np.array([0.0]), bracket=(-5, 5))
    assert rep.fallback_used
    assert x[0] == pytest.approx(0.7, abs=1e-10)


def test_source_positions_unbracketed():
    with pytest.raises(BracketingError):
        solve_source_positions(lambda y: y * y + 1.0, np.array([0.0]), bracket=(-2, 2))


def test_estimate_contraction_geometric():
    assert estimate_contraction([1.0, 0.3, 0.09, 0.027]) == pytest.approx(0.3)
    with pytest.raises(InsufficientDataError):
        estimate_contraction([1.0])
