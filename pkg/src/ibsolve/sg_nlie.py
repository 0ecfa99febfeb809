"""Continuum nonlinear integral equation for the sine-Gordon / massive Thirring
model on a cylinder.

The counting function is represented by its values on the line x + i*eta.
For real analytic Z the equation reads

    Z(t) = l sinh t + S(t)
           + (1/i) [ int G(t - x - i eta) L(x) dx - int G(t - x + i eta) conj(L(x)) dx ]

with L(x) = log(1 + (-1)^delta exp(i Z(x + i eta))) and S the source term.
Real holes are the only sources that are solved for; complex roots are
accepted by the configuration layer and the source term, see
:class:`UnsupportedConfigurationError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .kernels import (
    ChiTable,
    Coupling,
    Grid,
    chi,
    chi_II,
    default_sg_grid,
    kernel_G,
)
from .solver import (
    ConvergenceReport,
    IterationConfig,
    fixed_point_solve,
    solve_source_positions,
)

__all__ = [
    "RootConfig",
    "SGState",
    "ConfigurationError",
    "ClassificationError",
    "SpecialObjectError",
    "UnsupportedConfigurationError",
    "Theory",
    "check_counting_equation",
    "classify_theory",
    "default_eta",
    "make_state",
    "nlie_rhs",
    "solve_sg",
    "evaluate_Z",
    "hole_quantization_residual",
    "energy_momentum",
    "free_fermion_hole_positions",
    "free_fermion_energy",
]


class ConfigurationError(ValueError):
    """Root configuration violates a structural constraint."""


class ClassificationError(ValueError):
    """A complex root lies outside the strip of its declared class."""


class SpecialObjectError(RuntimeError):
    def __init__(self, message: str, position: float, derivative: float):
        super().__init__(message)
        self.position = position
        self.derivative = derivative


class UnsupportedConfigurationError(NotImplementedError):
    """Configuration is valid but outside what the solver iterates on."""


def _as_half_int(v) -> Fraction:
    f = Fraction(v).limit_denominator(4)
    if f.denominator not in (1, 2) or abs(float(f) - float(v)) > 1e-12:
        raise ConfigurationError(f"{v} is not an integer or half-integer")
    return f


@dataclass(frozen=True)
class RootConfig:
    holes: tuple = ()
    specials: tuple = ()
    close_pairs: tuple = ()
    wide_pairs: tuple = ()
    self_conjugate: tuple = ()
    delta: int = 0
    spin: Fraction = Fraction(0)

    def __post_init__(self):
        if self.delta not in (0, 1):
            raise ConfigurationError("delta must be 0 or 1")
        object.__setattr__(self, "holes", tuple(_as_half_int(i) for i in self.holes))
        object.__setattr__(self, "specials", tuple(self.specials))
        object.__setattr__(self, "close_pairs",
                           tuple(tuple(_as_half_int(i) for i in pr) for pr in self.close_pairs))
        object.__setattr__(self, "wide_pairs",
                           tuple(tuple(_as_half_int(i) for i in pr) for pr in self.wide_pairs))
        object.__setattr__(self, "self_conjugate", tuple(_as_half_int(i) for i in self.self_conjugate))
        object.__setattr__(self, "spin", _as_half_int(self.spin))
        if self.spin < 0:
            raise ConfigurationError("spin S_z must be non-negative")
        if any(len(pr) != 2 for pr in self.close_pairs + self.wide_pairs):
            raise ConfigurationError("pairs need exactly two quantum numbers")
        if len(set(self.holes)) != len(self.holes):
            raise ConfigurationError("hole quantum numbers must be distinct")
        if len(set(self.close_pairs)) != len(self.close_pairs):
            raise ConfigurationError("close-pair quantum numbers must be distinct")
        if len(set(self.wide_pairs)) != len(self.wide_pairs):
            raise ConfigurationError("wide-pair quantum numbers must be distinct")
        if len(set(self.self_conjugate)) != len(self.self_conjugate):
            raise ConfigurationError("self-conjugate quantum numbers must be distinct")
        offset = Fraction(1 + self.delta, 2)
        for i in self.holes:
            if (i - offset).denominator != 1:
                raise ConfigurationError(
                    f"hole quantum number {i} must lie in Z + {offset} for delta = {self.delta}"
                )
        # odd hole numbers only make sense with half-integer spin
        if (self.spin.denominator == 1) != (self.n_holes % 2 == 0):
            raise ConfigurationError("N_H must be even for integer S_z and odd for half-integer S_z")

    @property
    def n_holes(self) -> int:
        return len(self.holes)

    @property
    def n_specials(self) -> int:
        return len(self.specials)

    @property
    def M_C(self) -> int:
        return 2 * len(self.close_pairs)

    @property
    def M_W(self) -> int:
        return 2 * len(self.wide_pairs) + len(self.self_conjugate)

    @property
    def M_SC(self) -> int:
        return len(self.self_conjugate)

    def to_dict(self) -> dict:
        s = lambda f: float(f)
        return {
            "holes": [s(i) for i in self.holes],
            "specials": list(self.specials),
            "close_pairs": [[s(a), s(b)] for a, b in self.close_pairs],
            "wide_pairs": [[s(a), s(b)] for a, b in self.wide_pairs],
            "self_conjugate": [s(i) for i in self.self_conjugate],
            "delta": self.delta,
            "spin": s(self.spin),
        }


def check_counting_equation(config: RootConfig, p: float) -> bool:
    """N_H - 2 N_S == 2 S_z + M_C + 2 theta(p - 1) M_W."""
    step = 1 if p > 1 else 0
    lhs = config.n_holes - 2 * config.n_specials
    rhs = 2 * config.spin + config.M_C + 2 * step * config.M_W
    return lhs == rhs


class Theory:
    SINE_GORDON = "sine-gordon"
    MASSIVE_THIRRING = "massive-thirring"
    NON_LOCAL = "non-local"


def classify_theory(config: RootConfig) -> frozenset:
    """Set of theories whose local spectrum contains the state."""
    out = set()
    if (2 * config.spin + config.delta + config.M_SC) % 2 == 0:
        out.add(Theory.SINE_GORDON)
    if (config.delta + config.M_SC) % 2 == 0:
        out.add(Theory.MASSIVE_THIRRING)
    if not out:
        out.add(Theory.NON_LOCAL)
    return frozenset(out)


def default_eta(p: float) -> float:
    # the kernel is evaluated at Im = 2 eta, which must stay below pi*min(1, p)
    return 0.25 * min(math.pi, math.pi * p)


@dataclass
class SGState:
    coupling: Coupling
    l: float
    eta: float
    config: RootConfig
    grid: Grid
    Z: np.ndarray | None = None           # values on x + i eta
    holes: np.ndarray | None = None       # real hole rapidities
    close: list = field(default_factory=list)     # complex positions (upper member)
    wide: list = field(default_factory=list)
    self_conj: list = field(default_factory=list)
    report: ConvergenceReport | None = None

    @property
    def p(self) -> float:
        return self.coupling.p

    @property
    def solved(self) -> bool:
        return self.report is not None

    def __post_init__(self):
        if self.l <= 0:
            raise ConfigurationError("l must be positive")
        lim = math.pi * min(1.0, self.p)
        if not 0 < self.eta < lim / 2:
            raise ConfigurationError(f"eta must lie in (0, {lim / 2:.6g})")


def make_state(p: float, l: float, config: RootConfig | None = None, eta: float | None = None,
               n_points: int = 4096) -> SGState:
    config = config or RootConfig()
    return SGState(Coupling(p), float(l), default_eta(p) if eta is None else float(eta),
                   config, default_sg_grid(l, n_points))


# ---------------------------------------------------------------------------
# kernels on the grid
# ---------------------------------------------------------------------------

class _Kernels:
    """Toeplitz kernels G(d) and G(d + 2 i eta) on grid differences."""

    _cache: dict = {}

    def __init__(self, grid: Grid, p: float, eta: float):
        key = (grid.x_min, grid.x_max, grid.n_points, p, eta)
        if key in _Kernels._cache:
            self.__dict__.update(_Kernels._cache[key].__dict__)
            return
        n, h = grid.n_points, grid.h
        d = h * np.arange(-(n - 1), n)
        self.grid = grid
        self.w = grid.trapezoid_weights()
        self.g0 = np.real(kernel_G(d, p)) if p != 1 else np.zeros_like(d)
        self.g2 = kernel_G(d + 2j * eta, p) if p != 1 else np.zeros(d.shape, complex)
        self.table = ChiTable(p, eta) if p != 1 else None
        # G(s - i eta) for real-axis evaluation, splined on a fine lattice
        if p != 1:
            s = np.arange(-(grid.x_max - grid.x_min) - 1.0, (grid.x_max - grid.x_min) + 1.0, 0.004)
            self.gm = CubicSpline(s, kernel_G(s - 1j * eta, p))
        else:
            self.gm = None
        if len(_Kernels._cache) > 16:
            _Kernels._cache.clear()
        _Kernels._cache[key] = self

    def conv(self, g, f):
        n = f.size
        return fftconvolve(g, f)[n - 1: 2 * n - 1]


def _L(state: SGState, Z):
    """log(1 + (-1)^delta e^{iZ}), branch unwound continuously from the right end."""
    q = np.exp(1j * Z)
    if state.config.delta:
        q = -q
    z = 1.0 + q
    phase = np.unwrap(np.angle(z)[::-1])[::-1]
    phase -= 2 * math.pi * np.round((phase[-1] - np.angle(z[-1])) / (2 * math.pi))
    return np.log(np.abs(z)) + 1j * phase


def _validate_complex_positions(state: SGState):
    lim = math.pi * min(1.0, state.p)
    for c in state.close:
        if not 0 < abs(c.imag) < lim:
            raise ClassificationError(f"close root {c} outside 0 < |Im| < {lim:.6g}")
    top = math.pi * (state.p + 1) / 2
    for w in list(state.wide) + list(state.self_conj):
        if not lim < abs(w.imag) <= top + 1e-12:
            raise ClassificationError(f"wide root {w} outside ({lim:.6g}, {top:.6g}]")


def _source(state: SGState, theta, table=None):
    """Source term at theta; holes use the tabulated chi on the contour line."""
    p = state.p
    theta = np.asarray(theta, dtype=complex)
    out = np.zeros(theta.shape, dtype=complex)
    if p == 1:
        return out
    on_line = table is not None
    for h in (state.holes if state.holes is not None else ()):
        out += table(theta.real - h) if on_line else chi(theta - h, p)
    for c in state.close:
        out -= chi(theta - c, p) + chi(theta - np.conj(c), p)
    for w in state.wide:
        out -= chi_II(theta - w, p) + chi_II(theta - np.conj(w), p)
    for w in state.self_conj:
        out -= chi_II(theta - w, p)
    return out


def nlie_rhs(state: SGState, Z: np.ndarray | None = None) -> Grid:
    """Right-hand side of the equation on the contour line x + i eta."""
    _validate_complex_positions(state)
    K = _Kernels(state.grid, state.p, state.eta)
    x = state.grid.x
    th = x + 1j * state.eta
    Z = state.Z if Z is None else Z
    if Z is None:
        Z = state.l * np.sinh(th) + _source(state, th, K.table)
    L = _L(state, Z) * K.w
    conv = (K.conv(K.g0, L) - K.conv(K.g2, np.conj(L))) / 1j
    out = state.l * np.sinh(th) + _source(state, th, K.table) + conv
    return state.grid.with_values(out)


def evaluate_Z(state: SGState, theta) -> np.ndarray:
    """Counting function at points with |Im theta| <= eta."""
    theta = np.atleast_1d(np.asarray(theta, dtype=complex))
    if np.any(np.abs(theta.imag) > state.eta + 1e-12):
        raise ValueError("evaluate_Z requires |Im theta| <= eta")
    if state.Z is None:
        raise ValueError("state has no counting function")
    K = _Kernels(state.grid, state.p, state.eta)
    x = state.grid.x
    L = _L(state, state.Z) * K.w
    out = state.l * np.sinh(theta) + _source(state, theta)
    if state.p != 1:
        for i, t in enumerate(theta):
            a = kernel_G(t - x - 1j * state.eta, state.p)
            b = kernel_G(t - x + 1j * state.eta, state.p)
            out[i] += (np.sum(a * L) - np.sum(b * np.conj(L))) / 1j
    return out


def _Z_real(state: SGState, t: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Real-axis counting function; L already carries quadrature weights."""
    out = state.l * np.sinh(t) + np.real(_source(state, t + 0j))
    if state.p != 1:
        K = _Kernels(state.grid, state.p, state.eta)
        x = state.grid.x
        for i, ti in enumerate(t):
            out[i] += 2 * np.imag(np.sum(K.gm(ti - x) * L))
    return out


def _hole_targets(config: RootConfig) -> np.ndarray:
    return np.array([2 * math.pi * float(i) for i in config.holes])


def solve_sg(state: SGState, cfg: IterationConfig = IterationConfig()) -> SGState:
    """Co-iterate the counting function and the hole positions."""
    config = state.config
    if not check_counting_equation(config, state.p):
        raise ConfigurationError(
            f"counting equation violated: N_H - 2 N_S = {config.n_holes - 2 * config.n_specials}, "
            f"2 S_z + M_C + 2 theta(p-1) M_W = "
            f"{2 * config.spin + config.M_C + 2 * (state.p > 1) * config.M_W}"
        )
    if config.specials:
        raise SpecialObjectError("special objects are not supported by the iteration", float("nan"), float("nan"))
    if config.close_pairs or config.wide_pairs or config.self_conjugate:
        raise UnsupportedConfigurationError("only real holes are solved for; complex roots are not iterated")

    targets = _hole_targets(config)
    nh = targets.size
    st = replace(state)
    if st.holes is None or len(st.holes) != nh:
        st.holes = np.arcsinh(targets / st.l)
    n = st.grid.n_points
    K = _Kernels(st.grid, st.p, st.eta)
    hole_reports = []

    def update(pos, res):
        # l sinh(new) = target - (Z(pos) - l sinh(pos))
        return np.arcsinh(np.sinh(pos) - res / st.l)

    def fmap(v):
        Z = v[:n]
        holes = np.real(v[n:])
        if nh:
            Lw = _L(st, Z) * K.w
            st.holes = holes

            def quant(h):
                st.holes = h
                return _Z_real(st, h, Lw) - targets

            holes, rep = solve_source_positions(quant, holes, cfg, update=update,
                                                labels=[float(i) for i in config.holes])
            hole_reports.append(rep)
            st.holes = holes
        Znew = nlie_rhs(st, Z).values
        return np.concatenate([Znew, holes.astype(complex)])

    th = st.grid.x + 1j * st.eta
    Z0 = st.l * np.sinh(th) + _source(st, th, K.table) if st.Z is None else st.Z
    v, report = fixed_point_solve(fmap, np.concatenate([Z0, st.holes.astype(complex)]), cfg)
    st.Z = v[:n]
    st.holes = np.real(v[n:])
    if hole_reports and hole_reports[-1].fallback_used:
        report.fallback_used = True
    st.report = report
    _check_special(st)
    return st


def _check_special(state: SGState):
    if state.holes is None or not len(state.holes):
        return
    K = _Kernels(state.grid, state.p, state.eta)
    Lw = _L(state, state.Z) * K.w
    eps = 1e-5
    for h in state.holes:
        d = (_Z_real(state, np.array([h + eps]), Lw) - _Z_real(state, np.array([h - eps]), Lw))[0] / (2 * eps)
        if d <= 0:
            raise SpecialObjectError(
                f"hole at {h:.6g} has Z' = {d:.3e} <= 0: special object", float(h), float(d)
            )


def hole_quantization_residual(state: SGState) -> float:
    """max |Z(h_j) - 2 pi I_j| over the solved holes."""
    if state.holes is None or not len(state.holes):
        return 0.0
    K = _Kernels(state.grid, state.p, state.eta)
    Lw = _L(state, state.Z) * K.w
    return float(np.max(np.abs(_Z_real(state, state.holes, Lw) - _hole_targets(state.config))))


def energy_momentum(state: SGState) -> tuple[float, float]:
    """(E, P) in units of the soliton mass, bulk term excluded."""
    if not state.solved or state.Z is None:
        raise ValueError("state is not solved")
    th = state.grid.x + 1j * state.eta
    Lw = _L(state, state.Z) * state.grid.trapezoid_weights()
    E = -np.sum(2 * np.imag(np.sinh(th) * Lw)) / (2 * math.pi)
    P = -np.sum(2 * np.imag(np.cosh(th) * Lw)) / (2 * math.pi)
    if state.holes is not None:
        E += np.sum(np.cosh(state.holes))
        P += np.sum(np.sinh(state.holes))
    return float(E), float(P)


# ---------------------------------------------------------------------------
# free-fermion closed forms (p = 1)
# ---------------------------------------------------------------------------

def free_fermion_hole_positions(l: float, quantum_numbers: Sequence) -> np.ndarray:
    return np.arcsinh(2 * math.pi * np.array([float(i) for i in quantum_numbers]) / l)


def free_fermion_energy(l: float, quantum_numbers: Sequence, delta: int = 0) -> tuple[float, float]:
    """(E, P) at p = 1 from the real-axis form of the vacuum integral."""
    sgn = -1.0 if delta else 1.0

    def f(x):
        return math.cosh(x) * math.log1p(sgn * math.exp(-l * math.cosh(x)))

    xmax = math.acosh(max(1.0, 40.0 / l)) + 2.0
    vac = -2.0 / math.pi * quad(f, 0.0, xmax, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    h = free_fermion_hole_positions(l, quantum_numbers)
    return float(vac + np.sum(np.cosh(h))), float(np.sum(np.sinh(h)))
