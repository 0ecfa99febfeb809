"""A_L thermodynamic Bethe ansatz for the critical RSOS strip with fixed boundaries.

Unknowns are the functions d^q(x), q = 1..L-2, on the real line of the scaled
variable x, and the 1-string zero positions y_k^(q).  Each d^q is written as

    d^q(x) = g_q(x) * prod_{j,k} tanh((x - y_k^(j))/2)^{A_qj} * exp(-4 delta_q1 e^{-x} + S_q(x))

so that only the smooth convolution part S_q is iterated.  The zero positions
obey Psi^q(y_k^(q)) = pi n_k^(q) with Psi^q(x) = Im log d^q(x + i pi/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .kernels import Grid, cosh_convolve, pv_sinh_convolve_at
from .solver import (
    ConvergenceReport,
    IterationConfig,
    fixed_point_solve,
    solve_source_positions,
)

__all__ = [
    "TBAModel",
    "StripState",
    "TBASolution",
    "PositivityError",
    "ResolutionError",
    "solve_tba",
    "scaling_energy",
    "conformal_energy_closed_form",
    "integrals_of_motion",
    "integral_constant",
    "integral_constant_exact",
    "tba_plateau",
    "stationary_y_residual",
    "admissible",
    "enumerate_states",
    "psi_hat",
    "kac_weight",
    "boundary_flow",
]


class PositivityError(RuntimeError):
    """1 + d^q(x) <= 0 somewhere on the real axis."""


class ResolutionError(RuntimeError):
    """Quadrature weight overflows on the configured grid."""


def _cartan(n: int) -> np.ndarray:
    return 2 * np.eye(n, dtype=int) - _adjacency(n)


def _adjacency(n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=int)
    for q in range(n - 1):
        a[q, q + 1] = a[q + 1, q] = 1
    return a


@dataclass(frozen=True)
class TBAModel:
    L: int
    boundary_xi: float | None = None
    x_min: float = -30.0
    x_max: float = 35.0
    n_points: int = 4096

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 3:
            raise ValueError(f"L must be an integer >= 3, got {self.L}")
        if self.boundary_xi is not None and self.L != 4:
            raise ValueError("the boundary flow term is defined for L = 4 only")

    @property
    def strips(self) -> int:
        return self.L - 2

    @property
    def central_charge(self) -> float:
        return 1.0 - 6.0 / (self.L * (self.L + 1))

    @property
    def central_charge_exact(self) -> Fraction:
        return 1 - Fraction(6, self.L * (self.L + 1))

    @property
    def adjacency(self) -> np.ndarray:
        return _adjacency(self.strips)

    @property
    def cartan(self) -> np.ndarray:
        return _cartan(self.strips)

    def grid(self) -> Grid:
        return Grid.sample(self.x_min, self.x_max, self.n_points)


@dataclass(frozen=True)
class StripState:
    """String content m_q and non-increasing non-negative quantum numbers per strip."""

    m: tuple
    I: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        I = tuple(tuple(int(v) for v in row) for row in self.I)
        if len(m) != len(I):
            raise ValueError("m and I must have one entry per strip")
        for q, (mq, row) in enumerate(zip(m, I), start=1):
            if mq < 0 or len(row) != mq:
                raise ValueError(f"strip {q}: need m_q >= 0 quantum numbers, got {row}")
            if any(v < 0 for v in row) or any(a < b for a, b in zip(row, row[1:])):
                raise ValueError(f"strip {q}: quantum numbers must be non-increasing and >= 0")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "I", I)

    @classmethod
    def vacuum(cls, strips: int) -> "StripState":
        return cls((0,) * strips, ((),) * strips)

    def n_values(self, q: int) -> np.ndarray:
        """Odd integers n_k = 1 + 2(I_k + m_q - k), k = 1..m_q (q is 1-based)."""
        mq = self.m[q - 1]
        return np.array([1 + 2 * (I + mq - k) for k, I in enumerate(self.I[q - 1], start=1)], dtype=int)


def admissible(model: TBAModel, state: StripState) -> bool:
    """Parity selection for the fixed (1,1) boundary with an even number of faces.

    The strip-q functions tend to -1 (or below) at x -> -infinity unless the
    number of zeros in the adjacent strips is even, which would break
    1 + d^q > 0.  The vacuum-module counting m_q <= (m_{q-1} + m_{q+1})/2 for
    q >= 2 is also imposed.
    """
    if len(state.m) != model.strips:
        return False
    m = (0,) + state.m + (0,)
    for q in range(1, model.strips + 1):
        if (m[q - 1] + m[q + 1]) % 2:
            return False
        if q >= 2 and m[q] > (m[q - 1] + m[q + 1]) // 2:
            return False
        if q >= 2 and state.I[q - 1] and state.I[q - 1][0] > (m[q - 1] + m[q + 1]) // 2 - m[q]:
            return False
    return True


def enumerate_states(model: TBAModel, max_total_m: int, max_I: int, only_admissible=True):
    """All strip states with sum(m) <= max_total_m and quantum numbers <= max_I."""
    from itertools import combinations_with_replacement, product

    out = []
    for m in product(range(max_total_m + 1), repeat=model.strips):
        if sum(m) > max_total_m:
            continue
        per_strip = []
        for mq in m:
            rows = [tuple(sorted(c, reverse=True)) for c in combinations_with_replacement(range(max_I + 1), mq)]
            per_strip.append(sorted(set(rows)))
        for I in product(*per_strip):
            st = StripState(m, I)
            if not only_admissible or admissible(model, st):
                out.append(st)
    return out


@dataclass
class TBASolution:
    model: TBAModel
    state: StripState
    grid: Grid
    S: np.ndarray                     # (strips, n) convolution parts
    zeros: tuple                      # per strip, sorted ascending
    report: ConvergenceReport
    quantization_residual: float = 0.0
    zero_reports: list = field(default_factory=list)

    @property
    def d_hat(self) -> list[Grid]:
        return [self.grid.with_values(v) for v in _d_values(self.model, self.grid.x, self.S, self.zeros)]

    def log1p_d(self) -> np.ndarray:
        return np.log1p(_d_values(self.model, self.grid.x, self.S, self.zeros))


def _sign_factor(model: TBAModel, x: np.ndarray, zeros, q: int) -> np.ndarray:
    """g_q(x) * prod over adjacent-strip zeros of tanh((x - y)/2); q is 0-based."""
    t = np.ones_like(x, dtype=float)
    A = model.adjacency
    for j in range(model.strips):
        if A[q, j]:
            for y in zeros[j]:
                t = t * np.tanh((x - y) / 2)
    if q == 0 and model.boundary_xi is not None:
        t = t * np.tanh((x + model.boundary_xi) / 2)
    return t


def _driving(x, q):
    if q != 0:
        return np.zeros_like(x, dtype=float)
    with np.errstate(over="ignore"):
        return -4.0 * np.exp(-x)


def _d_values(model, x, S, zeros) -> np.ndarray:
    out = np.empty((model.strips, x.size))
    for q in range(model.strips):
        with np.errstate(over="ignore", under="ignore"):
            out[q] = _sign_factor(model, x, zeros, q) * np.exp(_driving(x, q) + S[q])
    return out


def _log1p_checked(d: np.ndarray) -> np.ndarray:
    if np.any(1.0 + d <= 0) or not np.all(np.isfinite(d)):
        bad = np.argwhere(~(1.0 + d > 0))
        q = int(bad[0][0]) + 1 if bad.size else 0
        raise PositivityError(
            f"1 + d^{q}(x) <= 0 on the real axis; the state violates positivity"
        )
    return np.log1p(d)


def _convolution_part(model: TBAModel, grid: Grid, L1p: np.ndarray) -> np.ndarray:
    conv = np.array([cosh_convolve(grid.with_values(L1p[j]), tails="constant").values for j in range(model.strips)])
    return model.adjacency @ conv


def _strip_function(model, grid, S, zeros, r):
    """Callable x -> log(1 + d^r(x)) consistent with the grid values (r is 0-based)."""
    spl = CubicSpline(grid.x, S[r])

    def f(pts):
        pts = np.asarray(pts, dtype=float)
        with np.errstate(over="ignore", under="ignore"):
            d = _sign_factor(model, pts, zeros, r) * np.exp(_driving(pts, r) + spl(pts))
        if np.any(~(1.0 + d > 0)):
            raise PositivityError(f"1 + d^{r + 1}(x) <= 0 for the trial zero positions")
        return np.log1p(d)

    return f


def psi_hat(model: TBAModel, grid: Grid, S: np.ndarray, zeros, pts, q: int) -> np.ndarray:
    """Psi^q at arbitrary points (q is 0-based) for frozen convolution parts S."""
    pts = np.atleast_1d(np.asarray(pts, dtype=float))
    out = np.zeros(pts.size)
    if q == 0:
        out += 4.0 * np.exp(-pts)
        if model.boundary_xi is not None:
            out += np.arctan2(1.0, np.sinh(pts + model.boundary_xi))
    x = grid.x
    for r in range(model.strips):
        if not model.adjacency[q, r]:
            continue
        for y in zeros[r]:
            out += np.arctan2(1.0, np.sinh(pts - y))
        f = _strip_function(model, grid, S, zeros, r)
        h = 1e-4
        df = (f(pts + h) - f(pts - h)) / (2 * h)
        out -= pv_sinh_convolve_at(pts, grid.with_values(f(x)), f(pts), df).real
    return out


def _solve_zeros(model, grid, S, state, zeros, cfg):
    """Solve all quantization conditions with the function part frozen."""
    new = [np.array(z, dtype=float) for z in zeros]
    reports = []
    for q in range(model.strips):
        if state.m[q] == 0:
            continue
        targets = math.pi * state.n_values(q + 1)

        def quantizer(y, q=q, targets=targets):
            trial = list(new)
            trial[q] = np.asarray(y)
            return psi_hat(model, grid, S, trial, y, q) - targets

        def newton(y, r, quantizer=quantizer):
            # diagonal Newton step with a finite-difference slope
            y = np.asarray(y, dtype=float)
            out = np.empty_like(y)
            h = 1e-5
            for k in range(y.size):
                yp = y.copy()
                yp[k] += h
                try:
                    slope = (float(quantizer(yp)[k]) - r[k]) / h
                except PositivityError:
                    slope = 0.0
                out[k] = y[k] - r[k] / slope if abs(slope) > 1e-8 else np.nan
            return out

        if q == 0:
            def update(y, r, q=q, targets=targets, newton=newton):
                # log form 4 e^{-y} = pi n - (Psi - 4 e^{-y}) while the drive
                # dominates; Newton for zeros far to the right
                rest = r + targets - 4.0 * np.exp(-y)
                arg = (targets - rest) / 4.0
                log_form = np.where(arg > 0, -np.log(np.maximum(arg, 1e-300)), np.nan)
                far = (y > 2.0) | ~np.isfinite(log_form)
                if np.any(far):
                    nt = newton(y, r)
                    log_form = np.where(far, np.where(np.isfinite(nt), nt, y - r), log_form)
                return log_form
        else:
            def update(y, r):
                return y + r

        labels = [f"strip {q + 1}, I={I}" for I in state.I[q]]
        y, rep = solve_source_positions(
            quantizer, new[q], cfg, update=update, bracket=(grid.x_min + 1.0, grid.x_max - 1.0), labels=labels
        )
        new[q] = y
        reports.append(rep)
    return [np.sort(z) for z in new], reports


def _initial_zeros(model: TBAModel, state: StripState):
    zeros = []
    for q in range(model.strips):
        n = state.n_values(q + 1).astype(float)
        if q == 0:
            zeros.append(np.sort(np.log(4.0 / (math.pi * n))) if n.size else np.zeros(0))
        else:
            zeros.append(np.sort(-np.log(n)) if n.size else np.zeros(0))
    return zeros


def solve_tba(
    model: TBAModel,
    state: StripState,
    cfg: IterationConfig = IterationConfig(),
    initial: TBASolution | None = None,
) -> TBASolution:
    """Co-iterate the TBA functions and the 1-string zero positions.

    ``initial`` seeds the iteration (for continuation in the boundary
    parameter); it must share the grid and the string content.
    """
    if len(state.m) != model.strips:
        raise ValueError(f"state has {len(state.m)} strips, model has {model.strips}")
    grid = model.grid()
    x = grid.x
    nstrip = model.strips
    n = grid.n_points
    zeros = _initial_zeros(model, state)
    zero_reports: list = []

    def unpack(v):
        S = v[: nstrip * n].reshape(nstrip, n)
        ys, off = [], nstrip * n
        for q in range(nstrip):
            ys.append(v[off : off + state.m[q]])
            off += state.m[q]
        return S, ys

    def pack(S, ys):
        return np.concatenate([S.ravel()] + [np.asarray(y, dtype=float) for y in ys])

    def step(v):
        S, ys = unpack(v)
        L1p = _log1p_checked(_d_values(model, x, S, ys))
        S_new = _convolution_part(model, grid, L1p)
        if sum(state.m):
            _log1p_checked(_d_values(model, x, S_new, ys))
            ys_new, reps = _solve_zeros(model, grid, S_new, state, ys, cfg)
            zero_reports[:] = reps
        else:
            ys_new = ys
        return pack(S_new, ys_new)

    S0 = np.zeros((nstrip, n))
    if initial is not None:
        if not initial.grid.same_support(grid) or initial.state.m != state.m:
            raise ValueError("initial solution has a different grid or string content")
        S0 = np.array(initial.S, dtype=float)
        zeros = [np.array(z, dtype=float) for z in initial.zeros]
    v0 = pack(S0, zeros)
    v, report = fixed_point_solve(step, v0, cfg)
    S, ys = unpack(v)
    ys = [np.sort(y) for y in ys]
    L1p = _log1p_checked(_d_values(model, x, S, ys))
    qres = 0.0
    for q in range(nstrip):
        if state.m[q]:
            r = psi_hat(model, grid, S, ys, ys[q], q) - math.pi * state.n_values(q + 1)
            qres = max(qres, float(np.max(np.abs(r))))
    return TBASolution(model, state, grid, S, tuple(ys), report, qres, list(zero_reports))


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def _exp_weighted_integral(sol: TBASolution, power: int) -> float:
    """int dy e^{-power y} log(1 + d^1(y)), constant continuation past x_max."""
    grid = sol.grid
    if power * -grid.x_min > 700:
        raise ResolutionError(
            f"e^(-{power} y) overflows at the left grid edge {grid.x_min}; "
            "shorten the grid toward -infinity where log(1 + d^1) is already zero"
        )
    f = sol.log1p_d()[0]
    w = np.exp(-power * grid.x)
    tail = f[-1] * math.exp(-power * grid.x_max) / power
    return float(grid.integrate(w * f) + tail)


def scaling_energy(model: TBAModel, sol: TBASolution) -> float:
    """E = -(1/pi^2) int e^{-y} log(1 + d^1) + (2/pi) sum_k e^{-y_k^(1)}."""
    e = -_exp_weighted_integral(sol, 1) / math.pi**2
    e += 2.0 / math.pi * float(np.sum(np.exp(-np.asarray(sol.zeros[0]))))
    return e


def conformal_energy_closed_form(model: TBAModel, state: StripState) -> float:
    return float(conformal_energy_exact(model, state))


def conformal_energy_exact(model: TBAModel, state: StripState) -> Fraction:
    m = np.array(state.m, dtype=int)
    quad = int(m @ model.cartan @ m)
    return -model.central_charge_exact / 24 + Fraction(quad, 4) + sum(sum(row) for row in state.I)


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def integral_constant_exact(n: int) -> Fraction:
    """C_n / pi as an exact rational."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (
        Fraction(2) ** (2 - n)
        * Fraction(3) ** (1 - 2 * n)
        * Fraction(5) ** (1 - n)
        * Fraction(_double_factorial(10 * n - 7), math.factorial(n) * math.factorial(4 * n - 2))
    )


def integral_constant(n: int) -> float:
    return float(integral_constant_exact(n)) * math.pi


def integrals_of_motion(model: TBAModel, sol: TBASolution, n: int) -> float:
    """I_{2n-1} from the zeros of strip 1 and the exponentially weighted integral."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = 2 * n - 1
    val = 2.0 / k * float(np.sum(np.exp(-k * np.asarray(sol.zeros[0]))))
    val += (-1) ** n * _exp_weighted_integral(sol, k) / math.pi
    return val / integral_constant(n)


def tba_plateau(L: int, q: int, s: int) -> float:
    """Constant solution sin(q t) sin((q+2) t) / sin(t)^2 with t = s pi/(L+1)."""
    if not (1 <= s <= L):
        raise ValueError("need 1 <= s <= L")
    if q < 0 or q > L:
        raise ValueError("q out of range")
    t = s * math.pi / (L + 1)
    return math.sin(q * t) * math.sin((q + 2) * t) / math.sin(t) ** 2


def stationary_y_residual(values: Sequence[float]) -> float:
    """max_q |d_q^2 - (1 + d_{q-1})(1 + d_{q+1})| with d_0 = d_{L-1} = 0."""
    d = np.concatenate([[0.0], np.asarray(values, dtype=float), [0.0]])
    res = d[1:-1] ** 2 - (1 + d[:-2]) * (1 + d[2:])
    return float(np.max(np.abs(res)))


def kac_weight(L: int, r: int, s: int) -> Fraction:
    """Conformal weight h_{r,s} of the unitary minimal model with central charge c_L."""
    return Fraction((r * (L + 1) - s * L) ** 2 - 1, 4 * L * (L + 1))


def boundary_flow(
    state: StripState,
    xi_values: Sequence[float],
    cfg: IterationConfig = IterationConfig(),
    max_halvings: int = 8,
    max_step: float = 1.0,
    **model_kw,
):
    """Follow one state along the boundary parameter by continuation.

    Each step is seeded with a secant extrapolation of the zero positions from
    the two previous solutions; a failed step is retried with half the
    increment.  Returns a list of (xi, TBASolution) at the requested values.
    """
    import dataclasses

    xi_values = [float(v) for v in xi_values]
    out = []
    path: list[tuple[float, TBASolution]] = []

    def seed(xi):
        if not path:
            return None
        xi1, s1 = path[-1]
        if len(path) < 2:
            return s1
        xi0, s0 = path[-2]
        t = (xi - xi1) / (xi1 - xi0)
        zs = tuple(np.asarray(z1) + t * (np.asarray(z1) - np.asarray(z0)) for z0, z1 in zip(s0.zeros, s1.zeros))
        return dataclasses.replace(s1, zeros=zs)

    def attempt(xi):
        sol = solve_tba(TBAModel(4, boundary_xi=xi, **model_kw), state, cfg, initial=seed(xi))
        path.append((xi, sol))
        return sol

    current = None
    for target in xi_values:
        if current is None:
            attempt(target)
            current = target
            out.append(path[-1])
            continue
        direction = math.copysign(1.0, target - current)
        step = min(max_step, abs(target - current))
        min_step = max_step * 0.5 ** max_halvings
        while current != target:
            nxt = current + direction * step
            if (nxt - target) * direction > 0:
                nxt = target
            try:
                attempt(nxt)
                current = nxt
                step = min(max_step, 1.5 * step)
            except (PositivityError, RuntimeError):
                step *= 0.5
                if step < min_step:
                    raise
        out.append(path[-1])
    return out
