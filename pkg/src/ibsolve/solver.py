"""Damped fixed-point iteration and source-position root finding."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .kernels import Grid

__all__ = [
    "IterationConfig",
    "ConvergenceReport",
    "DivergenceError",
    "BracketingError",
    "InsufficientDataError",
    "fixed_point_solve",
    "estimate_contraction",
    "solve_source_positions",
]


class DivergenceError(RuntimeError):
    def __init__(self, message: str, history: Sequence[float]):
        super().__init__(message)
        self.history = list(history)


class BracketingError(RuntimeError):
    def __init__(self, message: str, label=None):
        super().__init__(message)
        self.label = label


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class IterationConfig:
    damping: float = 1.0
    tol_function: float = 1e-10
    tol_sources: float = 1e-10
    max_iter: int = 500
    auto_damping: bool = True

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol_function <= 0 or self.tol_sources <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class ConvergenceReport:
    iterations_used: int
    final_residual: float
    contraction_estimate: float
    fallback_used: bool = False
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations_used": int(self.iterations_used),
            "final_residual": float(self.final_residual),
            "contraction_estimate": float(self.contraction_estimate),
            "fallback_used": bool(self.fallback_used),
            "history": [float(h) for h in self.history],
        }


def estimate_contraction(history) -> float:
    """Median ratio of successive residuals."""
    h = np.asarray(history, dtype=float)
    if h.size < 3:
        raise InsufficientDataError("need at least 3 residuals to estimate the contraction")
    if np.any(h <= 0):
        raise InsufficientDataError("residuals must be strictly positive")
    return float(np.median(h[1:] / h[:-1]))


def _safe_contraction(history) -> float:
    pos = [r for r in history if r > 0]
    try:
        return estimate_contraction(pos)
    except InsufficientDataError:
        return float("nan")


def _values(f):
    return np.asarray(f.values if isinstance(f, Grid) else f)


def _wrap(template, values):
    return template.with_values(values) if isinstance(template, Grid) else values


def fixed_point_solve(fmap: Callable, initial, cfg: IterationConfig = IterationConfig()):
    """Iterate f <- (1 - a) f + a map(f) until sup|map(f) - f| <= tol_function.

    ``initial`` may be a :class:`Grid` or an ndarray; the map must return the
    same kind.  With ``cfg.auto_damping`` the damping is halved (down to 1/8)
    whenever the residual grows on two consecutive steps.
    """
    f = initial
    if not np.all(np.isfinite(_values(f))):
        raise ValueError("initial iterate is not finite")
    damping = cfg.damping
    history: list[float] = []
    growth = 0
    for it in range(1, cfg.max_iter + 1):
        m = fmap(f)
        mv, fv = _values(m), _values(f)
        if not np.all(np.isfinite(mv)):
            raise DivergenceError("map produced non-finite values", history)
        r = float(np.max(np.abs(mv - fv))) if mv.size else 0.0
        history.append(r)
        if r <= cfg.tol_function:
            rep = ConvergenceReport(it, r, _safe_contraction(history), damping != cfg.damping, history)
            return m, rep
        if len(history) >= 2 and r > history[-2]:
            growth += 1
            if cfg.auto_damping and growth >= 2 and damping > 0.125:
                damping *= 0.5
                growth = 0
        else:
            growth = 0
        f = m if damping == 1.0 else _wrap(f, (1 - damping) * fv + damping * mv)
    raise DivergenceError(
        f"fixed-point iteration did not converge in {cfg.max_iter} steps "
        f"(last residual {history[-1]:.3e})",
        history,
    )


def _bisect_coordinate(quantizer, x, k, lo, hi, tol, label):
    def g(t):
        y = x.copy()
        y[k] = t
        return float(np.real(quantizer(y)[k]))

    x0 = float(x[k])
    g0 = g(x0)
    if g0 == 0.0:
        return x0
    # expand outward from the current value until a sign change appears
    step = max(1e-3, 1e-2 * (hi - lo))
    a, b = x0, x0
    ga = gb = g0
    while True:
        moved = False
        if a > lo:
            a_new = max(lo, a - step)
            ga_new = g(a_new)
            if np.sign(ga_new) != np.sign(g0):
                a, b, ga, gb = a_new, a, ga_new, ga
                break
            a, ga, moved = a_new, ga_new, True
        if b < hi:
            b_new = min(hi, b + step)
            gb_new = g(b_new)
            if np.sign(gb_new) != np.sign(g0):
                a, b, ga, gb = b, b_new, gb, gb_new
                break
            b, gb, moved = b_new, gb_new, True
        if not moved:
            raise BracketingError(
                f"no sign change of the quantization residual in [{lo}, {hi}] "
                f"for quantum number {label}",
                label,
            )
        step *= 1.6
    return brentq(g, a, b, xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps, maxiter=200)


def solve_source_positions(
    quantizer: Callable[[np.ndarray], np.ndarray],
    initial,
    cfg: IterationConfig = IterationConfig(),
    update: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    bracket: tuple[float, float] = (-60.0, 60.0),
    labels: Sequence | None = None,
):
    """Find positions with quantizer(positions) = 0 componentwise.

    The default update is theta <- theta - r; callers with a log-form
    fixed-point rearrangement pass it via ``update``.  When the maximum
    residual fails to decrease for 5 consecutive steps the solver switches to
    coordinate-wise bracketing and bisection (Gauss-Seidel sweeps).

    Returns (positions, ConvergenceReport).
    """
    x = np.array(initial, dtype=float, copy=True)
    if x.size == 0:
        return x, ConvergenceReport(0, 0.0, float("nan"))
    labels = list(labels) if labels is not None else list(range(x.size))
    if update is None:
        def update(pos, res):
            return pos - res
    history: list[float] = []
    stalled = 0
    for it in range(1, cfg.max_iter + 1):
        r = np.real(np.asarray(quantizer(x), dtype=complex))
        rn = float(np.max(np.abs(r)))
        history.append(rn)
        if rn <= cfg.tol_sources:
            return x, ConvergenceReport(it, rn, _safe_contraction(history), False, history)
        if len(history) >= 2 and rn >= history[-2]:
            stalled += 1
        else:
            stalled = 0
        if stalled >= 5 or not np.all(np.isfinite(r)):
            break
        x_new = np.asarray(update(x, r), dtype=float)
        if not np.all(np.isfinite(x_new)):
            break
        x = np.clip(x_new, *bracket)

    # fallback: bracketing + bisection, coordinate by coordinate
    lo, hi = bracket
    x = np.clip(np.where(np.isfinite(x), x, np.asarray(initial, dtype=float)), lo, hi)
    for sweep in range(1, 200):
        for k in range(x.size):
            x[k] = _bisect_coordinate(quantizer, x, k, lo, hi, cfg.tol_sources, labels[k])
        r = np.real(np.asarray(quantizer(x), dtype=complex))
        rn = float(np.max(np.abs(r)))
        history.append(rn)
        if rn <= cfg.tol_sources:
            return x, ConvergenceReport(len(history), rn, _safe_contraction(history), True, history)
    raise DivergenceError("source positions did not converge after bisection sweeps", history)
