"""Brute-force lattice oracles.

* Double-row transfer matrices of the critical A_L RSOS model on a strip with
  fixed (1,1) boundaries, their fusion hierarchy, T-system and Y-system
  residuals, and the zero patterns of the eigenvalues.
* Universal XX R-matrices built from a projector and a Z_2 grading, and the
  Hubbard-like R-matrix obtained by gluing an up and a down copy, with
  Yang-Baxter residuals.

Everything is dense linear algebra on small spaces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "RSOSLattice",
    "DenseOperator",
    "LatticeScaleError",
    "HeightError",
    "face_weight",
    "boundary_weight",
    "build_transfer",
    "fused_transfer",
    "verify_t_system",
    "verify_y_system",
    "closure_residual",
    "commutation_residual",
    "crossing_residual",
    "periodicity_residual",
    "hermiticity_residual",
    "eigenvalue_zero_pattern",
    "ZeroPattern",
    "ProjectorSpec",
    "SPEC_GL2",
    "SPEC_GL11",
    "SPEC_GL22",
    "graded_permutation",
    "build_universal_r",
    "build_hubbard_r",
    "ybe_residual",
    "hubbard_ybe_residual",
    "xx_hamiltonian_density",
    "hubbard_hamiltonian",
    "fermionic_hubbard_hamiltonian",
]


class LatticeScaleError(ValueError):
    """Requested lattice exceeds the brute-force scale."""


class HeightError(ValueError):
    """Heights not admissible on the A_L diagram."""


# ---------------------------------------------------------------------------
# RSOS model
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _paths(L: int, N: int, start: int, end: int) -> tuple:
    """Admissible height paths of N steps, in lexicographic order."""
    out = []

    def rec(p):
        if len(p) == N + 1:
            if p[-1] == end:
                out.append(tuple(p))
            return
        for h in (p[-1] - 1, p[-1] + 1):
            if 1 <= h <= L:
                rec(p + [h])

    rec([start])
    return tuple(out)


@dataclass(frozen=True)
class RSOSLattice:
    L: int
    N: int

    def __post_init__(self):
        if self.L < 3:
            raise ValueError("L must be >= 3")
        if self.N < 2 or self.N % 2:
            raise ValueError("N must be a positive even integer")
        if self.N > 12:
            raise LatticeScaleError(f"N = {self.N} exceeds the oracle scale N <= 12")

    @property
    def lam(self) -> float:
        return math.pi / (self.L + 1)

    @property
    def paths(self) -> np.ndarray:
        return np.array(_paths(self.L, self.N, 1, 1), dtype=int)

    @property
    def middle_paths(self) -> np.ndarray:
        return np.array(_paths(self.L, self.N, 2, 2), dtype=int)

    @property
    def dim(self) -> int:
        return len(_paths(self.L, self.N, 1, 1))

    def s(self, x):
        return np.sin(x) / math.sin(self.lam)


@dataclass
class DenseOperator:
    matrix: np.ndarray
    u: complex | None = None
    q: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _check_heights(L, *hs):
    for h in hs:
        if int(h) != h or not 1 <= h <= L:
            raise HeightError(f"height {h} outside 1..{L}")


def face_weight(a: int, b: int, c: int, d: int, u: complex, L: int) -> complex:
    """Face weight with corners a (bottom-left), b, c, d counter-clockwise."""
    _check_heights(L, a, b, c, d)
    if abs(a - b) != 1 or abs(b - c) != 1 or abs(c - d) != 1 or abs(d - a) != 1:
        raise HeightError(f"inadmissible face ({a},{b},{c},{d})")
    lam = math.pi / (L + 1)
    w = 0.0
    if a == c:
        w += np.sin(lam - u) / math.sin(lam)
    if b == d:
        w += np.sin(u) / math.sin(lam) * math.sqrt(
            math.sin(a * lam) * math.sin(c * lam) / (math.sin(b * lam) * math.sin(d * lam))
        )
    return w


def boundary_weight(r: int, sign: int, u: complex, xi: float, L: int) -> complex:
    """Boundary triangle weight for heights r and r + sign."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    _check_heights(L, r, r + sign)
    lam = math.pi / (L + 1)
    pref = math.sqrt(math.sin((r + sign) * lam) / math.sin(r * lam))
    return pref * np.sin(xi + sign * u) * np.sin(r * lam + xi - sign * u) / math.sin(lam) ** 2


def _face_vec(a, b, c, d, u, lam, sq):
    """Vectorized face weight; returns 0 on inadmissible corners."""
    ok = (np.abs(a - b) == 1) & (np.abs(b - c) == 1) & (np.abs(c - d) == 1) & (np.abs(d - a) == 1)
    w = np.where(a == c, np.sin(lam - u) / math.sin(lam), 0.0).astype(complex)
    ratio = np.zeros(np.broadcast(a, b, c, d).shape)
    valid = ok & (b == d)
    if np.any(valid):
        aa, bb, cc, dd = (np.broadcast_to(v, ratio.shape)[valid] for v in (a, b, c, d))
        ratio[valid] = np.sqrt(sq[aa] * sq[cc] / (sq[bb] * sq[dd]))
    w = w + np.sin(u) / math.sin(lam) * ratio
    return np.where(ok, w, 0.0)


def _raw_transfer(lat: RSOSLattice, u: complex) -> np.ndarray:
    L, N, lam = lat.L, lat.N, lat.lam
    sq = np.sin(np.arange(L + 2) * lam)
    sq[0] = sq[-1] = 1.0  # never used for admissible faces
    P = lat.paths
    n = P.shape[0]
    sig = np.repeat(P, n, axis=0)      # lower row sigma
    sigp = np.tile(P, (n, 1))          # upper row sigma'
    heights = np.arange(1, L + 1)
    # v[pair, t]: partial sums over middle-row heights with tau_0 = 2
    v = np.zeros((n * n, L), dtype=complex)
    v[:, 2 - 1] = 1.0
    for j in range(N):
        vn = np.zeros_like(v)
        for t in heights:
            col = v[:, t - 1]
            if not np.any(col):
                continue
            for tp in heights:
                if abs(tp - t) != 1:
                    continue
                w1 = _face_vec(sig[:, j], sig[:, j + 1], tp, t, u, lam, sq)
                w2 = _face_vec(t, tp, sigp[:, j + 1], sigp[:, j], lam - u, lam, sq)
                vn[:, tp - 1] += col * w1 * w2
        v = vn
    return v[:, 2 - 1].reshape(n, n)


def build_transfer(lat: RSOSLattice, u: complex, dressed: bool = False, xi: float = 0.37) -> DenseOperator:
    """Double-row transfer matrix D(u) in the path basis.

    Normalized by s(2 lambda) so that the fusion hierarchy closes with the
    initial conditions D^0 = f_{-1} I, D^{-1} = 0.  With ``dressed=True`` the
    boundary-triangle factor sin(xi + lambda - u) sin(xi + u)/sin^2(lambda) is
    included, which makes each eigenvalue a Laurent polynomial of degree
    2N + 2 in exp(i u).
    """
    M = lat.s(2 * lat.lam) * _raw_transfer(lat, u)
    if dressed:
        M = M * np.sin(xi + lat.lam - u) * np.sin(xi + u) / math.sin(lat.lam) ** 2
    return DenseOperator(M, u, 1)


class _Fusion:
    """Fused transfer matrices D^q(u) from the fusion hierarchy."""

    def __init__(self, lat: RSOSLattice):
        self.lat = lat
        self._D1: dict = {}
        self.I = np.eye(lat.dim)

    def s_k(self, u, k):
        return self.lat.s(2 * u + k * self.lat.lam)

    def f_k(self, u, k):
        return (-1) ** self.lat.N * self.lat.s(u + k * self.lat.lam) ** (2 * self.lat.N)

    def D1(self, u):
        key = complex(u)
        if key not in self._D1:
            self._D1[key] = build_transfer(self.lat, u).matrix
        return self._D1[key]

    def D(self, q: int, u) -> np.ndarray:
        if q == -1:
            return 0 * self.I
        if q == 0:
            return self.f_k(u, -1) * self.I
        if q == 1:
            return self.D1(u)
        lam = self.lat.lam
        prev, cur = self.f_k(u, -1) * self.I, self.D1(u)
        for p in range(1, q):
            nxt = (
                self.s_k(u, p - 2) * self.s_k(u, 2 * p - 1) * cur @ self.D1(u + p * lam)
                - self.s_k(u, p - 3) * self.s_k(u, 2 * p) * self.f_k(u, p) * prev
            ) / (self.s_k(u, p - 1) * self.s_k(u, 2 * p - 2) * self.f_k(u, p - 1))
            prev, cur = cur, nxt
        return cur


def fused_transfer(lat: RSOSLattice, q: int, u: complex) -> DenseOperator:
    if not 0 <= q <= lat.L:
        raise ValueError(f"fusion level q must lie in 0..{lat.L}")
    return DenseOperator(_Fusion(lat).D(q, u), u, q)


def _rel(x, scale):
    return float(np.max(np.abs(x)) / scale) if scale > 0 else float(np.max(np.abs(x)))


def verify_t_system(lat: RSOSLattice, u: complex, q: int) -> float:
    """Relative residual of the T-system at fusion level q."""
    if not 1 <= q <= lat.L - 1:
        raise ValueError(f"q must lie in 1..{lat.L - 1}")
    F = _Fusion(lat)
    lam = lat.lam
    lhs = F.s_k(u, q - 2) * F.s_k(u, q) * F.D(q, u) @ F.D(q, u + lam)
    t1 = F.s_k(u, -2) * F.s_k(u, 2 * q) * F.f_k(u, -1) * F.f_k(u, q) * F.I
    t2 = F.s_k(u, q - 1) ** 2 * F.D(q + 1, u) @ F.D(q - 1, u + lam)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(t1)), np.max(np.abs(t2)))
    return _rel(lhs - t1 - t2, scale)


def _d_matrix(F: _Fusion, q: int, u):
    lam = F.lat.lam
    if q <= 0 or q >= F.lat.L - 1:
        return 0 * F.I
    num = F.s_k(u, q - 1) ** 2 * F.D(q - 1, u + lam) @ F.D(q + 1, u)
    return num / (F.s_k(u, -2) * F.s_k(u, 2 * q) * F.f_k(u, -1) * F.f_k(u, q))


def verify_y_system(lat: RSOSLattice, u: complex, q: int, on_eigenvalues: bool = True) -> float:
    """Residual of d^q_0 d^q_1 = (1 + d^{q+1}_0)(1 + d^{q-1}_1), 1 <= q <= L-2."""
    if not 1 <= q <= lat.L - 2:
        raise ValueError(f"q must lie in 1..{lat.L - 2}")
    F = _Fusion(lat)
    lam = lat.lam
    lhs = _d_matrix(F, q, u) @ _d_matrix(F, q, u + lam)
    rhs = (F.I + _d_matrix(F, q + 1, u)) @ (F.I + _d_matrix(F, q - 1, u + lam))
    if on_eigenvalues:
        _, V = np.linalg.eig(F.D1(0.1234 + 0.0567j))
        Vi = np.linalg.inv(V)
        lhs = np.diag(Vi @ lhs @ V)
        rhs = np.diag(Vi @ rhs @ V)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1.0)
    return _rel(lhs - rhs, scale)


def closure_residual(lat: RSOSLattice, u: complex = 0.23 + 0.17j) -> float:
    F = _Fusion(lat)
    return _rel(F.D(lat.L, u), np.max(np.abs(F.D(lat.L - 1, u))))


def commutation_residual(lat: RSOSLattice, u: complex, v: complex, q: int = 1) -> float:
    A = fused_transfer(lat, q, u).matrix
    B = fused_transfer(lat, q, v).matrix
    return _rel(A @ B - B @ A, np.max(np.abs(A)) * np.max(np.abs(B)))


def crossing_residual(lat: RSOSLattice, u: complex, q: int = 1) -> float:
    A = fused_transfer(lat, q, u).matrix
    B = fused_transfer(lat, q, (2 - q) * lat.lam - u).matrix
    return _rel(A - B, np.max(np.abs(A)))


def periodicity_residual(lat: RSOSLattice, u: complex, q: int = 1) -> float:
    A = fused_transfer(lat, q, u).matrix
    B = fused_transfer(lat, q, u + math.pi).matrix
    return _rel(A - B, np.max(np.abs(A)))


def hermiticity_residual(lat: RSOSLattice, y: float) -> float:
    """Hermiticity of the shifted matrix D(u + lambda/2) on the line Re u = 0."""
    A = build_transfer(lat, lat.lam / 2 + 1j * y).matrix
    return _rel(A - A.conj().T, np.max(np.abs(A)))


# ---------------------------------------------------------------------------
# zero patterns
# ---------------------------------------------------------------------------

@dataclass
class ZeroPattern:
    """Zeros of one eigenvalue of the shifted transfer matrix."""

    eigen_index: int
    zeros: np.ndarray               # all zeros with Re u in [-pi/2, pi/2)
    one_strings: list
    two_strings: list               # pairs (u1, u2)
    intermediate: list
    anomalies: list
    outside: list
    dressed_count: int = 0          # zeros per 2 pi of the triangle-dressed eigenvalue

    @property
    def m(self) -> int:
        return sum(1 for z in self.one_strings if z.imag > 0)

    @property
    def n(self) -> int:
        return sum(1 for a, _ in self.two_strings if a.imag > 0)

    def to_dict(self) -> dict:
        c = lambda z: [float(z.real), float(z.imag)]
        return {
            "eigen_index": self.eigen_index,
            "one_strings": [c(z) for z in self.one_strings],
            "two_strings": [[c(a), c(b)] for a, b in self.two_strings],
            "intermediate": [c(z) for z in self.intermediate],
            "anomalies": [c(z) for z in self.anomalies],
            "outside": [c(z) for z in self.outside],
            "dressed_count": self.dressed_count,
        }


def _trig_fit_roots(values: np.ndarray, y0: float, rel_cut: float = 1e-9):
    """Roots of f(u) = sum_k c_k exp(2 i k u) sampled at u_j = pi j/M + i y0."""
    M = values.size
    a = np.fft.fft(values) / M
    freqs = np.fft.fftfreq(M, 1.0 / M).astype(int)
    c = a * np.exp(2 * freqs * y0)
    sig = np.abs(a) > rel_cut * np.max(np.abs(a))
    kmin, kmax = int(freqs[sig].min()), int(freqs[sig].max())
    coeffs = np.array([c[k % M] for k in range(kmin, kmax + 1)])
    w = np.roots(coeffs[::-1])
    u = np.log(w.astype(complex)) / 2j
    u = (u.real + math.pi / 2) % math.pi - math.pi / 2 + 1j * u.imag
    return u, (kmin, kmax)


def eigenvalue_zero_pattern(lat: RSOSLattice, q: int = 1, tol_s: float = 0.2, samples: int = 256,
                            y0: float = 0.45, polish: bool = True) -> list[ZeroPattern]:
    """Classify the zeros of each eigenvalue of the shifted matrix D^q(u + (2 - q) lambda/2)."""
    if lat.N > 8:
        raise LatticeScaleError("zero patterns are computed for N <= 8")
    if not 1 <= q <= lat.L - 2:
        raise ValueError(f"q must lie in 1..{lat.L - 2}")
    F = _Fusion(lat)
    lam = lat.lam
    shift = (2 - q) * lam / 2
    _, V = np.linalg.eig(F.D1(0.1234 + 0.0567j))
    Vi = np.linalg.inv(V)

    def eig_at(u):
        return np.diag(Vi @ F.D(q, u + shift) @ V)

    us = math.pi * np.arange(samples) / samples + 1j * y0
    ev = np.array([eig_at(u) for u in us])
    out = []
    for k in range(ev.shape[1]):
        zs, _ = _trig_fit_roots(ev[:, k], y0)
        if polish:
            zs = np.array([_newton(lambda u: eig_at(u)[k], z) for z in zs])
            zs = (zs.real + math.pi / 2) % math.pi - math.pi / 2 + 1j * zs.imag
        pat = _classify(zs, lam, tol_s)
        pat.eigen_index = k
        if q == 1:
            pat.dressed_count = 2 * (zs.size + 2)
        out.append(pat)
    if q == 1:
        dressed = _dressed_counts(lat, V, Vi, samples, y0)
        for pat, cnt in zip(out, dressed):
            pat.dressed_count = cnt
    return out


def _dressed_counts(lat, V, Vi, samples, y0):
    """Zero count per 2 pi of the eigenvalues including the boundary-triangle factor."""
    us = 2 * math.pi * np.arange(2 * samples) / (2 * samples) + 1j * y0
    ev = np.array([np.diag(Vi @ build_transfer(lat, u, dressed=True).matrix @ V) for u in us])
    counts = []
    for k in range(ev.shape[1]):
        M = ev.shape[0]
        a = np.fft.fft(ev[:, k]) / M
        freqs = np.fft.fftfreq(M, 1.0 / M).astype(int)  # powers of exp(i u)
        sig = np.abs(a) > 1e-9 * np.max(np.abs(a))
        counts.append(int(freqs[sig].max() - freqs[sig].min()))
    return counts


def _newton(f, z, steps=30, h=1e-7):
    for _ in range(steps):
        fz = f(z)
        d = (f(z + h) - f(z - h)) / (2 * h)
        if d == 0:
            break
        dz = fz / d
        z = z - dz
        if abs(dz) < 1e-14:
            break
    return z


def _classify(zs, lam, tol_s) -> ZeroPattern:
    one, inter, anom, outside = [], [], [], []
    border = []
    for z in zs:
        r = z.real
        if abs(r) > lam + tol_s:
            outside.append(z)
        elif abs(r) <= tol_s:
            one.append(z)
        elif abs(abs(r) - lam) <= tol_s:
            border.append(z)
        elif abs(abs(r) - lam / 2) <= 0.05:
            inter.append(z)
        else:
            anom.append(z)
    # pair border zeros at +lambda and -lambda with equal imaginary parts
    left = sorted([z for z in border if z.real < 0], key=lambda z: z.imag)
    right = sorted([z for z in border if z.real > 0], key=lambda z: z.imag)
    pairs = []
    used = set()
    for a in left:
        best, bi = None, None
        for i, b in enumerate(right):
            if i in used:
                continue
            d = abs(a.imag - b.imag)
            if d <= tol_s and (best is None or d < best):
                best, bi = d, i
        if bi is None:
            anom.append(a)
        else:
            used.add(bi)
            pairs.append((a, right[bi]))
    anom.extend(b for i, b in enumerate(right) if i not in used)
    return ZeroPattern(-1, np.asarray(zs), one, pairs, inter, anom, outside)


# ---------------------------------------------------------------------------
# universal XX and Hubbard R-matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectorSpec:
    """Diagonal projector pi (1 on W, 0 on its complement) and Z_2 grading."""

    projector: tuple
    grading: tuple
    name: str = ""

    def __post_init__(self):
        if len(self.projector) != len(self.grading):
            raise ValueError("projector and grading must have the same length")
        if any(p not in (0, 1) for p in self.projector):
            raise ValueError("projector entries must be 0 or 1 (idempotent diagonal)")
        if any(g not in (0, 1) for g in self.grading):
            raise ValueError("grading entries must be 0 or 1")

    @property
    def dim(self) -> int:
        return len(self.projector)

    @property
    def pi(self) -> np.ndarray:
        return np.diag(np.asarray(self.projector, dtype=float))

    @property
    def C(self) -> np.ndarray:
        return 2 * self.pi - np.eye(self.dim)


SPEC_GL2 = ProjectorSpec((1, 0), (0, 0), "gl(2)")
SPEC_GL11 = ProjectorSpec((1, 0), (0, 1), "gl(1|1)")
SPEC_GL22 = ProjectorSpec((1, 1, 0, 0), (0, 1, 0, 1), "gl(2|2)")


def _as_spec(spec) -> ProjectorSpec:
    if isinstance(spec, ProjectorSpec):
        return spec
    pi = np.asarray(spec[0], dtype=float)
    if pi.ndim == 2:
        if not np.allclose(pi @ pi, pi):
            raise ValueError("projector is not idempotent")
        if not np.allclose(pi, np.diag(np.diag(pi))):
            raise ValueError("only diagonal projectors are supported")
        pi = np.diag(pi)
    return ProjectorSpec(tuple(int(round(v)) for v in pi), tuple(int(g) for g in spec[1]))


def graded_permutation(parities: Sequence[Sequence[int]], perm: Sequence[int]) -> np.ndarray:
    """Matrix of the graded permutation moving tensor slot i to position perm[i].

    ``parities[i]`` lists the grading of the basis of slot i.  A basis vector
    picks up (-1) for every pair of odd components whose order is exchanged.
    """
    dims = [len(p) for p in parities]
    k = len(dims)
    inv = np.argsort(perm)
    new_dims = [dims[inv[j]] for j in range(k)]
    total = int(np.prod(dims))
    M = np.zeros((total, total))
    for idx in np.ndindex(*dims):
        par = [parities[i][idx[i]] for i in range(k)]
        sign = 1
        for i in range(k):
            for j in range(i + 1, k):
                if perm[i] > perm[j] and par[i] and par[j]:
                    sign = -sign
        new_idx = tuple(idx[inv[j]] for j in range(k))
        M[np.ravel_multi_index(new_idx, new_dims), np.ravel_multi_index(idx, dims)] = sign
    return M


def _swap(spec: ProjectorSpec) -> np.ndarray:
    g = list(spec.grading)
    return graded_permutation([g, g], [1, 0])


def build_universal_r(projector_spec, grading_spec=None, lambda_spectral: float = 0.0) -> np.ndarray:
    """R(l) = Sigma P + Sigma sin l + (1 - Sigma) P cos l on V (x) V."""
    spec = _as_spec(projector_spec if grading_spec is None else (projector_spec, grading_spec))
    n = spec.dim
    pi, I = spec.pi, np.eye(n)
    pt = I - pi
    Sigma = np.kron(pi, pt) + np.kron(pt, pi)
    P = _swap(spec)
    one = np.eye(n * n)
    lam = lambda_spectral
    return Sigma @ P + Sigma * np.sin(lam) + (one - Sigma) @ P * np.cos(lam)


def _embed_pair(R, spec_grading, slots, n_slots):
    """Operator on slots (i, j) of an n_slots-fold graded tensor product."""
    g = list(spec_grading)
    parities = [g] * n_slots
    i, j = slots
    order = [i, j] + [k for k in range(n_slots) if k not in (i, j)]
    # perm maps slot s to position order.index(s)
    perm = [order.index(s) for s in range(n_slots)]
    Pi = graded_permutation(parities, perm)
    d = len(g)
    X = np.kron(R, np.eye(d ** (n_slots - 2)))
    return Pi.T @ X @ Pi


def ybe_residual(spec, l1: float, l2: float, l3: float) -> float:
    """max|R12 R13 R23 - R23 R13 R12| for the universal R with differences l_ij."""
    spec = _as_spec(spec)
    R = lambda l: build_universal_r(spec, lambda_spectral=l)
    g = spec.grading
    R12 = _embed_pair(R(l1 - l2), g, (0, 1), 3)
    R13 = _embed_pair(R(l1 - l3), g, (0, 2), 3)
    R23 = _embed_pair(R(l2 - l3), g, (1, 2), 3)
    return float(np.max(np.abs(R12 @ R13 @ R23 - R23 @ R13 @ R12)))


def xx_hamiltonian_density(spec) -> np.ndarray:
    spec = _as_spec(spec)
    n = spec.dim
    pi, pt = spec.pi, np.eye(n) - spec.pi
    Sigma = np.kron(pi, pt) + np.kron(pt, pi)
    return _swap(spec) @ Sigma


def _hubbard_h(lam: float, U: float) -> float:
    return 0.5 * math.asinh(U * math.sin(2 * lam))


def build_hubbard_r(up_spec, down_spec, lambda1: float, lambda2: float, U: float) -> np.ndarray:
    """Glued R-matrix on (V_up (x) V_dn)_1 (x) (V_up (x) V_dn)_2.

    Tensor slots are ordered (1 up, 1 down, 2 up, 2 down); the composite
    grading is the sum of the component gradings.
    """
    up, dn = _as_spec(up_spec), _as_spec(down_spec)
    parities = [list(up.grading), list(dn.grading), list(up.grading), list(dn.grading)]
    # reorder (1u, 1d, 2u, 2d) -> (1u, 2u, 1d, 2d)
    Pi = graded_permutation(parities, [0, 2, 1, 3])
    nu, nd = up.dim, dn.dim

    def updown(Ru, Rd):
        return Pi.T @ np.kron(Ru, Rd) @ Pi

    Cu1 = np.kron(np.kron(up.C, np.eye(nd)), np.eye(nu * nd))
    Cd1 = np.kron(np.kron(np.eye(nu), dn.C), np.eye(nu * nd))
    l12, lp = lambda1 - lambda2, lambda1 + lambda2
    Ru = build_universal_r(up, lambda_spectral=l12)
    Rd = build_universal_r(dn, lambda_spectral=l12)
    first = updown(Ru, np.eye(nd * nd)) @ updown(np.eye(nu * nu), Rd)
    if U == 0:
        return first
    hp = _hubbard_h(lambda1, U) + _hubbard_h(lambda2, U)
    coef = math.sin(l12) / math.sin(lp) * math.tanh(hp)
    Rup = updown(build_universal_r(up, lambda_spectral=lp), np.eye(nd * nd))
    Rdp = updown(np.eye(nu * nu), build_universal_r(dn, lambda_spectral=lp))
    return first + coef * Rup @ Cu1 @ Rdp @ Cd1


def _composite_grading(up: ProjectorSpec, dn: ProjectorSpec):
    return [(a + b) % 2 for a in up.grading for b in dn.grading]


def hubbard_ybe_residual(up_spec, down_spec, l1: float, l2: float, l3: float, U: float) -> float:
    up, dn = _as_spec(up_spec), _as_spec(down_spec)
    g = _composite_grading(up, dn)
    R12 = _embed_pair(build_hubbard_r(up, dn, l1, l2, U), g, (0, 1), 3)
    R13 = _embed_pair(build_hubbard_r(up, dn, l1, l3, U), g, (0, 2), 3)
    R23 = _embed_pair(build_hubbard_r(up, dn, l2, l3, U), g, (1, 2), 3)
    lhs, rhs = R12 @ R13 @ R23, R23 @ R13 @ R12
    return float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs))))


def hubbard_hamiltonian(up_spec, down_spec, sites: int, U: float) -> np.ndarray:
    """Sum over periodic bonds of Sigma_up P_up + Sigma_dn P_dn + U C_up C_dn on each site."""
    up, dn = _as_spec(up_spec), _as_spec(down_spec)
    nslot = 2 * sites
    parities = []
    for _ in range(sites):
        parities += [list(up.grading), list(dn.grading)]
    dims = [len(p) for p in parities]
    total = int(np.prod(dims))
    H = np.zeros((total, total))

    def embed(op, slots):
        order = list(slots) + [k for k in range(nslot) if k not in slots]
        perm = [order.index(s) for s in range(nslot)]
        Pi = graded_permutation(parities, perm)
        rest = int(np.prod([dims[k] for k in range(nslot) if k not in slots]))
        return Pi.T @ np.kron(op, np.eye(rest)) @ Pi

    hu, hd = xx_hamiltonian_density(up), xx_hamiltonian_density(dn)
    for j in range(sites):
        k = (j + 1) % sites
        H += embed(hu, (2 * j, 2 * k))
        H += embed(hd, (2 * j + 1, 2 * k + 1))
        H += U * embed(np.kron(up.C, dn.C), (2 * j, 2 * j + 1))
    return H


def fermionic_hubbard_hamiltonian(sites: int, t: float, U: float, phi: float = 0.0) -> np.ndarray:
    """Hubbard Hamiltonian with Jordan-Wigner fermions built from Pauli strings.

    H = -t sum (e^{i phi} c+_{i} c_{i+1} + h.c.) + U sum (1 - 2 n_up)(1 - 2 n_dn),
    periodic; modes ordered (1 up, 1 down, 2 up, 2 down, ...).  Each bond is
    summed once per site, so on two sites the bond appears twice, as in the
    periodic sum over j.
    """
    nm = 2 * sites
    Z = np.diag([1.0, -1.0])
    a = np.array([[0.0, 1.0], [0.0, 0.0]])  # empty <- occupied, basis (empty, occupied)
    I2 = np.eye(2)

    def c(mode):
        ops = [Z] * mode + [a] + [I2] * (nm - mode - 1)
        out = ops[0]
        for o in ops[1:]:
            out = np.kron(out, o)
        return out

    cs = [c(m) for m in range(nm)]
    n_ops = [ci.conj().T @ ci for ci in cs]
    dim = 2**nm
    H = np.zeros((dim, dim), dtype=complex)
    for i in range(sites):
        j = (i + 1) % sites
        for rho in range(2):
            ci, cj = cs[2 * i + rho], cs[2 * j + rho]
            hop = np.exp(1j * phi) * ci.conj().T @ cj
            H += -t * (hop + hop.conj().T)
        H += U * (np.eye(dim) - 2 * n_ops[2 * i]) @ (np.eye(dim) - 2 * n_ops[2 * i + 1])
    return H
