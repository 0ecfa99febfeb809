"""Analytic limits of the sine-Gordon spectrum: breathers, IR scattering
amplitudes and UV conformal weights of c = 1 vertex operators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .kernels import chi
from .sg_nlie import SGState
from .solver import InsufficientDataError

__all__ = [
    "breather_masses",
    "soliton_amplitude",
    "soliton_amplitude_plus",
    "ir_quantization_residual",
    "ConformalWeights",
    "vertex_weights",
    "match_vertex",
    "uv_effective_weights",
]


def breather_masses(gamma: float, M: float = 1.0) -> list[float]:
    """2 M sin(n gamma / 16) for integers 1 <= n < 8 pi / gamma."""
    if gamma <= 0 or M <= 0:
        raise ValueError("gamma and M must be positive")
    n_max = 8 * math.pi / gamma
    out = []
    n = 1
    while n < n_max and not math.isclose(n, n_max, rel_tol=1e-13):
        out.append(2 * M * math.sin(n * gamma / 16))
        n += 1
    return out


def soliton_amplitude(theta, p: float):
    """S(theta) = exp(i chi(theta))."""
    return np.exp(1j * chi(np.asarray(theta, dtype=complex), p))


def soliton_amplitude_plus(theta, p: float):
    """Transmission-type amplitude with the extra sinh ratio."""
    th = np.asarray(theta, dtype=complex)
    ratio = np.sinh((th + 1j * math.pi) / (2 * p)) / np.sinh((th - 1j * math.pi) / (2 * p))
    return ratio * soliton_amplitude(th, p)


def ir_quantization_residual(state: SGState) -> float:
    """max_k |l sinh h_k + sum_j chi(h_k - h_j) - 2 pi I_k| for a pure-hole state."""
    cfg = state.config
    if cfg.close_pairs or cfg.wide_pairs or cfg.self_conjugate or cfg.specials:
        raise ValueError("IR residual is defined for pure-hole states only")
    if state.holes is None or not state.solved:
        raise ValueError("state is not solved")
    h = np.asarray(state.holes, dtype=float)
    if h.size == 0:
        return 0.0
    d = h[:, None] - h[None, :]
    s = np.real(chi(d.astype(complex), state.p)).sum(axis=1) if state.p != 1 else 0.0
    targets = 2 * math.pi * np.array([float(i) for i in cfg.holes])
    return float(np.max(np.abs(state.l * np.sinh(h) + s - targets)))


@dataclass
class ConformalWeights:
    delta_plus: float
    delta_minus: float
    matched_vertex: tuple | None = None
    c_eff: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "delta_plus": self.delta_plus,
            "delta_minus": self.delta_minus,
            "matched_vertex": None if self.matched_vertex is None
            else [float(self.matched_vertex[0]), int(self.matched_vertex[1])],
            "c_eff": self.c_eff,
            "meta": self.meta,
        }


def vertex_weights(n, m, R2: float) -> tuple[float, float]:
    """(p_+^2/2, p_-^2/2) with p_pm = n/R +- m R/2."""
    R = math.sqrt(R2)
    pp = float(n) / R + 0.5 * m * R
    pm = float(n) / R - 0.5 * m * R
    return pp * pp / 2, pm * pm / 2


def match_vertex(dp: float, dm: float, R2: float, m_values: Sequence[int] | None = None,
                 tol: float = 1e-3, n_max: int = 4, m_max: int = 4):
    """Nearest vertex operator (n in Z/2, m in Z) within tol, or None.

    Ties are broken by smaller |n|, then smaller |m|.
    """
    ms = list(m_values) if m_values is not None else range(-m_max, m_max + 1)
    best = None
    for twice_n in range(-2 * n_max, 2 * n_max + 1):
        n = Fraction(twice_n, 2)
        for m in ms:
            a, b = vertex_weights(n, m, R2)
            err = max(abs(a - dp), abs(b - dm))
            key = (err > tol, round(err, 12) if err > tol else 0.0, abs(n), abs(m))
            if err <= tol and (best is None or key < best[0]):
                best = (key, (n, m))
    return None if best is None else best[1]


def _richardson(ls, values):
    """Extrapolate to l -> 0 assuming corrections linear in 1/log(1/l)."""
    x = 1.0 / np.log(1.0 / np.asarray(ls, dtype=float))
    v = np.asarray(values, dtype=float)
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return float(coef[0])


def uv_effective_weights(energy_trace, vacuum_trace=None, central_charge: float = 1.0,
                         R2: float | None = None, spin=None, tol: float = 1e-3,
                         extrapolate: bool = True) -> ConformalWeights:
    """Conformal weights from small-size energies.

    ``energy_trace`` is a list of (l, E, P).  The additive vacuum offset is
    taken per point from ``vacuum_trace`` (same l values) when given, and is
    -c/12 otherwise.  The three smallest l values are extrapolated to l -> 0
    with corrections linear in 1/log(1/l).
    """
    trace = sorted(((float(l), float(E), float(P)) for l, E, P in energy_trace), key=lambda r: r[0])
    if len(trace) < 3:
        raise InsufficientDataError("UV extraction needs at least 3 sample points")
    trace = trace[:3]
    ls = np.array([r[0] for r in trace])
    if np.any(ls > 1e-2 * (1 + 1e-12)):
        raise ValueError("UV extraction requires l <= 1e-2")
    scaled_E = np.array([r[0] * r[1] / (2 * math.pi) for r in trace])
    scaled_P = np.array([r[0] * r[2] / (2 * math.pi) for r in trace])
    meta = {"l": ls.tolist()}
    if vacuum_trace is not None:
        vac = {round(float(l), 15): float(E) for l, E, _ in vacuum_trace}
        try:
            off = np.array([l * vac[round(l, 15)] / (2 * math.pi) for l in ls])
        except KeyError as exc:
            raise ValueError("vacuum trace must contain the same l values") from exc
        meta["offset"] = "vacuum-run"
        c_eff = -12 * (_richardson(ls, off) if extrapolate else off[0])
    else:
        off = np.full(ls.shape, -central_charge / 12)
        meta["offset"] = f"-c/12 with c = {central_charge}"
        c_eff = -12 * (_richardson(ls, scaled_E) if extrapolate else scaled_E[0])
    s = scaled_E - off
    if extrapolate:
        tot, spin_diff = _richardson(ls, s), _richardson(ls, scaled_P)
    else:
        tot, spin_diff = float(s[0]), float(scaled_P[0])
    dp, dm = (tot + spin_diff) / 2, (tot - spin_diff) / 2
    match = None
    if R2 is not None:
        ms = None if spin is None else sorted({int(2 * spin), -int(2 * spin)})
        match = match_vertex(dp, dm, R2, ms, tol)
    meta["extrapolated"] = bool(extrapolate)
    return ConformalWeights(dp, dm, match, c_eff, meta)
