"""Coupled nonlinear integral equations for the half-filled Hubbard chain.

Counting functions: Z(u) on the real line (spin rapidities) and W(k) on the
circle [-pi, pi] (charge momenta).  The nonlinear terms are

    L_Z(x) = Im log(1 + exp(i Z(x + i0))),   L_W(k) = Im log(1 - exp(i W(k + i0))).

On the real axis these are sawtooth functions of Z and W with jumps where Z
crosses an odd multiple of pi and W an even one.  The integrals are split at
the crossings and done by Gauss-Legendre on each smooth piece, which is the
+i0 limit taken exactly.

A Lieb-Wu Newton solver is included as an independent oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import digamma, loggamma

from .kernels import bessel_J
from .sg_nlie import SpecialObjectError
from .solver import ConvergenceReport, DivergenceError, IterationConfig, fixed_point_solve

__all__ = [
    "HubbardModel",
    "SpecialObjectError",
    "HubbardSolution",
    "LiebWuResult",
    "LiebWuConvergenceError",
    "phi_kernel",
    "G_xxx",
    "G_xxx_integral",
    "solve_hubbard",
    "solve_xxx_limit",
    "hubbard_energy",
    "lieb_wu_oracle",
    "lieb_wu_continuation",
    "sym_coupling_map",
    "sym_coupling_inverse", "sym_t_over_U_from_g",
    "gamma_sym",
]


def phi_kernel(x, xi: float):
    """i log((i xi + x)/(i xi - x)) on the principal branch, i.e. 2 atan(x/xi)."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    return 2.0 * np.arctan(np.asarray(x, dtype=float) / xi)


def G_xxx(x):
    """int dp/2pi e^{ipx} / (1 + e^{|p|}) in closed form via digamma."""
    z = np.asarray(x, dtype=float)
    return np.real(digamma(1 + 0.5j * z) - digamma(0.5 + 0.5j * z)) / (2 * math.pi)


def G_xxx_integral(z):
    """int_0^z G_xxx, tending to +-1/4."""
    z = np.asarray(z, dtype=float)
    return (np.imag(loggamma(1 + 0.5j * z)) - np.imag(loggamma(0.5 + 0.5j * z))) / math.pi


def _gd(x):
    return 2.0 * np.arctan(np.tanh(0.5 * np.asarray(x)))


def _sech(x):
    return 1.0 / np.cosh(np.clip(x, -700, 700))


@dataclass(frozen=True)
class HubbardModel:
    L: int
    t: float
    U: float
    phi: float = 0.0

    def __post_init__(self):
        if self.L <= 0 or self.L % 4:
            raise ValueError("L must be a positive multiple of 4")
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.U <= 0:
            raise ValueError("U must be positive")

    @property
    def M(self) -> int:
        return self.L // 2

    @property
    def c(self) -> float:
        return 2.0 * self.t / self.U


@dataclass
class HubbardSolution:
    model: HubbardModel
    u: np.ndarray
    Z: np.ndarray
    k: np.ndarray
    W: np.ndarray
    energy_parts: tuple
    report: ConvergenceReport
    roots_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    roots_k: np.ndarray = field(default_factory=lambda: np.zeros(0))
    coupled: bool = True

    @property
    def energy(self) -> float:
        return float(sum(self.energy_parts))


class _GTable:
    """Spline of the even kernel G_xxx on [0, x_max] with a 1/(4 pi x^2) tail."""

    def __init__(self, x_max: float, h: float = 0.005):
        self.x_max = x_max
        s = np.arange(0.0, x_max + 2 * h, h)
        self.spline = CubicSpline(s, G_xxx(s))

    def __call__(self, x):
        a = np.abs(x)
        out = self.spline(np.minimum(a, self.x_max))
        far = a > self.x_max
        if np.any(far):
            out = np.where(far, G_xxx(np.where(far, a, 0.0)), out)
        return out


def _crossings(f, grid_vals, grid_x, offset):
    """All (position, level index) where f = offset + 2 pi n, from grid floor changes."""
    g = np.floor((grid_vals - offset) / (2 * math.pi))
    idx = np.nonzero(np.diff(g))[0]
    out = []
    for i in idx:
        lo, hi = grid_x[i], grid_x[i + 1]
        for n in range(int(min(g[i], g[i + 1])) + 1, int(max(g[i], g[i + 1])) + 1):
            level = offset + 2 * math.pi * n
            try:
                y = brentq(lambda y: f(y) - level, lo, hi, xtol=1e-14, rtol=1e-15)
            except ValueError:
                y = 0.5 * (lo + hi)
            out.append((y, n))
    return out


def _select_roots(crossings):
    """One root per level: the median crossing of that level.

    A level crossed three times (up, down, up) has its root on the decreasing
    branch; the two outer crossings are holes of the counting function and do
    not produce jumps.
    """
    by_level: dict = {}
    for y, n in crossings:
        by_level.setdefault(n, []).append(y)
    roots = []
    for n, ys in by_level.items():
        if len(ys) % 2 == 0:
            continue  # level crossed back and forth: no root
        ys = sorted(ys)
        roots.append((ys[len(ys) // 2], n))
    return sorted(roots)


def _piecewise_nodes(breaks, density, min_nodes=8):
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(min_nodes, int(math.ceil((b - a) * density)))
        t, w = np.polynomial.legendre.leggauss(n)
        xs.append(0.5 * (b - a) * t + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return xs, ws


def _sawtooth(F, n_branch):
    # Im log(1 + e^{iF}) = F/2 - pi n on the branch where |F - 2 pi n| < pi
    return 0.5 * F - math.pi * n_branch


class _Setup:
    def __init__(self, model: HubbardModel, n_u: int, u_max: float, n_k: int, density: float):
        self.model = model
        self.u = np.linspace(-u_max, u_max, n_u)
        self.k = -math.pi + 2 * math.pi * np.arange(n_k) / n_k
        self.dk = 2 * math.pi / n_k
        c, L = model.c, model.L
        sk = np.sin(self.k)
        self.G = _GTable(2 * u_max + 2 * c + 2.0)
        # driving terms (periodic trapezoid in k is spectrally accurate)
        self.Z0 = L / (2 * math.pi) * np.array(
            [np.sum(_gd(math.pi * (ui - c * sk))) * self.dk for ui in self.u])
        self.W0_extra = L * np.array(
            [np.sum(G_xxx_integral(c * (ski - sk))) * self.dk for ski in sk])
        self.density_u = density
        self.density_k = density * max(1.0, 2 * c)

    def W_of(self, k, omega_spline):
        m = self.model
        kk = (np.asarray(k) + math.pi) % (2 * math.pi) - math.pi
        return m.L * (np.asarray(k) - m.phi) + omega_spline(kk)

    def nodes(self, Z, omega):
        """Quadrature nodes and weighted log terms on both lines.

        Between consecutive roots the log term is F/2 - pi n with n fixed by
        the root on the left, so it runs from -pi/2 to pi/2 on every segment;
        for monotone counting functions this is the principal branch.
        """
        m = self.model
        zs = CubicSpline(self.u, Z)
        # u line: roots where Z = pi (mod 2 pi)
        ru = [(y, n) for y, n in _select_roots(_crossings(zs, Z, self.u, math.pi))
              if self.u[0] < y < self.u[-1]]
        cu = np.array([y for y, _ in ru])
        breaks = np.concatenate([[self.u[0]], cu, [self.u[-1]]])
        branch = ([ru[0][1]] if ru else [round(Z[0] / (2 * math.pi))]) + [n + 1 for _, n in ru]
        xs, ws = _piecewise_nodes(breaks, self.density_u)
        yu = np.concatenate(xs)
        lu = np.concatenate([w * _sawtooth(zs(x), nb) for x, w, nb in zip(xs, ws, branch)])
        # k circle: roots where W = 0 (mod 2 pi); the log term uses F = W - pi
        kp = np.concatenate([self.k, [math.pi]])
        op = np.concatenate([omega, [omega[0]]])
        os_ = CubicSpline(kp, op, bc_type="periodic")
        Wg = m.L * (kp - m.phi) + op
        rk = _select_roots(_crossings(lambda y: self.W_of(y, os_), Wg, kp, 0.0))
        # identify k = -pi with k = pi
        rk = [(y, n) for y, n in rk if y > -math.pi or not any(abs(z - math.pi) < 1e-12 for z, _ in rk)]
        if not rk:
            raise DivergenceError("counting function W has no roots", [])
        ck = np.array([y for y, _ in rk])
        breaks = np.concatenate([ck, [ck[0] + 2 * math.pi]])
        xs, ws = _piecewise_nodes(breaks, self.density_k)
        yk = np.concatenate(xs)
        lk = np.concatenate([w * _sawtooth(self.W_of(x, os_) - math.pi, n) for x, w, (_, n) in zip(xs, ws, rk)])
        return yu, lu, yk, lk, cu, ck


def _rhs(setup: _Setup, Z, omega, coupled=True):
    m = setup.model
    c = m.c
    yu, lu, yk, lk, _, _ = setup.nodes(Z, omega)
    Znew = setup.Z0 + 2 * setup.G(setup.u[:, None] - yu[None, :]) @ lu
    if coupled:
        Znew = Znew - c * (_sech(math.pi * (setup.u[:, None] - c * np.sin(yk)[None, :]))
                           * np.cos(yk)[None, :]) @ lk
        sk = np.sin(setup.k)
        Wx = setup.W0_extra - _sech(math.pi * (c * sk[:, None] - yu[None, :])) @ lu
        Wx = Wx - 2 * c * (setup.G(c * np.sin(yk)[None, :] - c * sk[:, None]) * np.cos(yk)[None, :]) @ lk
    else:
        Wx = omega
    return Znew, Wx


def _energy_parts(setup: _Setup, Z, omega, coupled=True):
    m = setup.model
    t, c, L = m.t, m.c, m.L
    yu, lu, yk, lk, _, _ = setup.nodes(Z, omega)

    def el(p):
        if p == 0:
            return 0.5 * c
        return float(bessel_J(0, c * p) * bessel_J(1, c * p) / (p * (math.exp(p) + 1)))

    E_L = -2 * t * L * 2 * quad(el, 0, 80, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    sk = np.sin(setup.k)
    KE = -(1 / (2 * math.pi)) * (_sech(math.pi * (yu[:, None] - c * sk[None, :])) * sk[None, :]).sum(axis=1) * setup.dk
    E_Z = -2 * t * float(KE @ lu)
    if not coupled:
        return (E_L, E_Z, 0.0, 0.0)
    B = (setup.G(c * (np.sin(yk)[:, None] - sk[None, :])) * sk[None, :]).sum(axis=1) * setup.dk
    E_W1 = 4 * t * t / (math.pi * m.U) * float((np.cos(yk) * B) @ lk)
    E_W2 = 2 * t / math.pi * float(np.sin(yk) @ lk)
    return (E_L, E_Z, E_W1, E_W2)


_EARLY_CHECK_EVERY = 25


def _check_monotone(setup: _Setup, Z, omega, anywhere=False):
    """Reject states where a root sits on a decreasing stretch of Z or W.

    With ``anywhere`` the whole circle is checked, which is used to diagnose
    an iteration that failed to settle.
    """
    m = setup.model
    _, _, _, _, cu, ck = setup.nodes(Z, omega)
    if cu.size:
        dZ = CubicSpline(setup.u, Z).derivative()(cu)
        i = int(np.argmin(dZ))
        if dZ[i] <= 0:
            raise SpecialObjectError(
                f"special object in Z at u = {cu[i]:.6g} (Z' = {dZ[i]:.3g})", float(cu[i]), float(dZ[i]))
    kp = np.concatenate([setup.k, [math.pi]])
    os_ = CubicSpline(kp, np.concatenate([omega, [omega[0]]]), bc_type="periodic")
    at = setup.k if anywhere else (ck + math.pi) % (2 * math.pi) - math.pi
    dW = m.L + os_.derivative()(at)
    i = int(np.argmin(dW))
    if dW[i] <= 0:
        raise SpecialObjectError(
            f"special object in W at k = {at[i]:.6g} (W' = {dW[i]:.3g}); "
            "the coupled NLIE is not continued through special objects", float(at[i]), float(dW[i]))


def _solve(model, cfg, n_u, u_max, n_k, density, coupled, initial=None):
    setup = _Setup(model, n_u, u_max, n_k, density)
    nu = setup.u.size
    omega0 = setup.W0_extra.copy()
    Z0 = setup.Z0.copy()
    if initial is not None:
        Z0 = np.interp(setup.u, initial.u, initial.Z)
        omega0 = np.interp(setup.k, initial.k, initial.W - model.L * (initial.k - model.phi), period=2 * math.pi)

    last = {"n": 0, "strikes": 0, "step": math.inf}

    def fmap(v):
        if coupled and "v" in last:
            step = float(np.max(np.abs(v - last["v"])))
            last["n"] += 1
            if last["n"] % _EARLY_CHECK_EVERY == 0:
                # a non-monotone W with a stalled step is a limit cycle, not a slow transient
                stalled = step > 0.5 * last["step"]
                last["step"] = step
                try:
                    _check_monotone(setup, v[:nu], v[nu:], anywhere=True)
                    last["strikes"] = 0
                except SpecialObjectError:
                    last["strikes"] = last["strikes"] + 1 if stalled else 0
                    if last["strikes"] >= 2:
                        raise
        last["v"] = v
        Zn, On = _rhs(setup, v[:nu], v[nu:], coupled)
        return np.concatenate([Zn, On])

    try:
        v, report = fixed_point_solve(fmap, np.concatenate([Z0, omega0]), cfg)
    except DivergenceError:
        # a non-monotone W usually means the state carries a special object
        if coupled and "v" in last:
            _check_monotone(setup, last["v"][:nu], last["v"][nu:], anywhere=True)
        raise
    Z, omega = v[:nu], v[nu:]
    if coupled:
        _check_monotone(setup, Z, omega)
    parts = _energy_parts(setup, Z, omega, coupled)
    _, _, _, _, cu, ck = setup.nodes(Z, omega)
    W = model.L * (setup.k - model.phi) + omega
    return HubbardSolution(model, setup.u, Z, setup.k, W, parts, report, cu, ck, coupled)


def solve_hubbard(model: HubbardModel, cfg: IterationConfig = IterationConfig(), n_u: int = 4096,
                  u_max: float = 20.0, n_k: int = 1024, density: float = 12.0,
                  initial: HubbardSolution | None = None) -> HubbardSolution:
    """Simultaneous fixed point of the Z and W equations for the highest-energy state."""
    return _solve(model, cfg, n_u, u_max, n_k, density, True, initial)


def solve_xxx_limit(model: HubbardModel, cfg: IterationConfig = IterationConfig(), n_u: int = 4096,
                    u_max: float = 20.0, n_k: int = 1024, density: float = 12.0) -> HubbardSolution:
    """Strong-coupling surrogate: Z equation without the W coupling, energy E_L + E_Z."""
    return _solve(model, cfg, n_u, u_max, n_k, density, False)


def hubbard_energy(model: HubbardModel, sol: HubbardSolution) -> float:
    if sol.model != model:
        raise ValueError("solution belongs to a different model")
    return sol.energy


# ---------------------------------------------------------------------------
# Lieb-Wu oracle
# ---------------------------------------------------------------------------

class LiebWuConvergenceError(RuntimeError):
    pass


@dataclass
class LiebWuResult:
    k: np.ndarray          # gauge-shifted momenta k_j = k_hat_j + phi
    u: np.ndarray
    energy: float
    residual: float
    iterations: int

    @property
    def k_hat(self):
        return self.k


def _lw_quantum_numbers(L, M):
    Iz = np.arange(M)
    Iw = (-L + 2 - M) // 2 + np.arange(L)
    return Iw, Iz


def _lw_residual(model, k, u, Iw, Iz):
    L, M, c = model.L, model.M, model.c
    d = u[None, :] - c * np.sin(k)[:, None]          # (L, M)
    F1 = L * (k - model.phi) - 2 * np.arctan(2 * d).sum(axis=1) - math.pi * (M + 2 * Iw)
    duu = u[:, None] - u[None, :]
    F2 = 2 * np.arctan(2 * d).sum(axis=0) - 2 * np.arctan(duu).sum(axis=1) - math.pi * (1 - M + 2 * Iz)
    return np.concatenate([F1, F2])


def _lw_jacobian(model, k, u):
    L, M, c = model.L, model.M, model.c
    d = u[None, :] - c * np.sin(k)[:, None]
    q = 4.0 / (1 + 4 * d * d)                          # d/dd of 2 atan(2 d)
    J = np.zeros((L + M, L + M))
    ck = c * np.cos(k)
    J[:L, :L] = np.diag(L + (q * ck[:, None]).sum(axis=1))
    J[:L, L:] = -q
    J[L:, :L] = -(q * ck[:, None]).T
    duu = u[:, None] - u[None, :]
    r = 2.0 / (1 + duu * duu)
    np.fill_diagonal(r, 0.0)
    J[L:, L:] = np.diag(q.sum(axis=0) - r.sum(axis=1)) + r
    return J


def _newton(model, x0, Iw, Iz, tol=1e-13, max_iter=100):
    L = model.L
    x = x0.copy()
    F = _lw_residual(model, x[:L], x[L:], Iw, Iz)
    nrm = np.max(np.abs(F))
    for it in range(1, max_iter + 1):
        if nrm <= tol:
            return x, nrm, it
        dx = np.linalg.solve(_lw_jacobian(model, x[:L], x[L:]), -F)
        step = 1.0
        while step > 1e-4:
            xn = x + step * dx
            Fn = _lw_residual(model, xn[:L], xn[L:], Iw, Iz)
            nn = np.max(np.abs(Fn))
            if nn < nrm:
                break
            step *= 0.5
        else:
            raise LiebWuConvergenceError(
                f"damped Newton stalled at residual {nrm:.3e}; continue in U from a converged larger-U solution"
            )
        x, F, nrm = xn, Fn, nn
    if nrm <= tol:
        return x, nrm, max_iter
    raise LiebWuConvergenceError(
        f"Newton did not converge (residual {nrm:.3e}); continue in U from a converged larger-U solution"
    )


def _decoupled_start(model):
    L, M = model.L, model.M
    Iw, Iz = _lw_quantum_numbers(L, M)
    # XXX limit for u: L * 2 atan(2u) - sum 2 atan(u - u') = pi (1 - M + 2 I)
    xxx = HubbardModel(L, model.t, 1e12, model.phi)
    u = np.tan(math.pi * (1 - M + 2 * Iz) / (2 * L)) / 2
    for _ in range(200):
        F = 2 * L * np.arctan(2 * u) - 2 * np.arctan(u[:, None] - u[None, :]).sum(axis=1) - math.pi * (1 - M + 2 * Iz)
        J = _lw_jacobian(xxx, np.zeros(L), u)[L:, L:]
        du = np.linalg.solve(J, -F)
        u = u + du
        if np.max(np.abs(du)) < 1e-15:
            break
    k = (math.pi * (M + 2 * Iw) + 2 * np.arctan(2 * u).sum()) / L + model.phi
    return np.concatenate([k, u])


def lieb_wu_oracle(model: HubbardModel, initial: LiebWuResult | None = None, tol: float = 1e-13) -> LiebWuResult:
    """Highest-energy real-root solution of the Lieb-Wu equations by damped Newton."""
    if model.L > 8:
        raise ValueError("the Lieb-Wu oracle is restricted to L <= 8")
    Iw, Iz = _lw_quantum_numbers(model.L, model.M)
    x0 = _decoupled_start(model) if initial is None else np.concatenate([initial.k, initial.u])
    x, res, it = _newton(model, x0, Iw, Iz, tol)
    k, u = x[:model.L], x[model.L:]
    if len(np.unique(np.round(np.mod(k, 2 * math.pi), 10))) != k.size:
        raise LiebWuConvergenceError("momenta are not pairwise distinct")
    E = float(-2 * model.t * np.sum(np.cos(k)))
    return LiebWuResult(k, u, E, float(res), it)


def lieb_wu_continuation(model: HubbardModel, U_start: float = 50.0, steps: int = 40) -> list[LiebWuResult]:
    """Follow the solution from U_start down (or up) to model.U in geometric steps."""
    Us = np.geomspace(U_start, model.U, steps)
    out, prev = [], None
    for U in Us:
        m = HubbardModel(model.L, model.t, float(U), model.phi)
        prev = lieb_wu_oracle(m, prev)
        out.append(prev)
    return out


# ---------------------------------------------------------------------------
# gauge-theory coupling map
# ---------------------------------------------------------------------------

def sym_coupling_map(lambda_thooft: float) -> tuple[float, float]:
    """(t/U, U) from the 't Hooft coupling; U comes out negative as written."""
    if lambda_thooft <= 0:
        raise ValueError("lambda must be positive")
    return math.sqrt(lambda_thooft) / (4 * math.pi ** 2), -8 * math.pi ** 2 / lambda_thooft


def sym_coupling_inverse(t_over_U: float) -> float:
    return (4 * math.pi ** 2 * t_over_U) ** 2


def gamma_sym(lambda_thooft: float, E: float) -> float:
    return lambda_thooft / (8 * math.pi ** 2) * E


def sym_t_over_U_from_g(g: float) -> float:
    """t/U = g/sqrt(2). With U = -1/g^2 this is sqrt(lambda)/(4 pi), not sqrt(lambda)/(4 pi^2)."""
    if g <= 0:
        raise ValueError("g must be positive")
    return g / math.sqrt(2)
