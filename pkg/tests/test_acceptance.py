"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (printed in the terminal summary and on
stdout) before asserting, so a failing criterion still reports its numbers.
"""
import functools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ibsolve.hubbard import HubbardModel, SpecialObjectError, lieb_wu_continuation, solve_hubbard, solve_xxx_limit
from ibsolve.kernels import Coupling, kernel_G
from ibsolve.lattice import (
    SPEC_GL2,
    SPEC_GL11,
    SPEC_GL22,
    RSOSLattice,
    build_hubbard_r,
    build_universal_r,
    commutation_residual,
    crossing_residual,
    eigenvalue_zero_pattern,
    graded_permutation,
    hubbard_ybe_residual,
    periodicity_residual,
    verify_t_system,
    ybe_residual,
)
from ibsolve.sg_limits import breather_masses, uv_effective_weights
from ibsolve.sg_nlie import (
    RootConfig,
    energy_momentum,
    free_fermion_energy,
    free_fermion_hole_positions,
    hole_quantization_residual,
    make_state,
    solve_sg,
)
from ibsolve.solver import IterationConfig
from ibsolve.tba import (
    StripState,
    TBAModel,
    conformal_energy_closed_form,
    enumerate_states,
    integral_constant,
    integral_constant_exact,
    integrals_of_motion,
    psi_hat,
    scaling_energy,
    solve_tba,
)


def _report(n: int, ok: bool, detail: str):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


# cached solves shared with the invariant check of criterion 12

@functools.lru_cache(maxsize=None)
def _tba_states_L4():
    m = TBAModel(4)
    states = enumerate_states(m, 2, 2)
    return m, [(s, solve_tba(m, s)) for s in states]


@functools.lru_cache(maxsize=None)
def _tba_vacua():
    out = {}
    for L in (3, 4, 5):
        m = TBAModel(L)
        out[L] = (m, solve_tba(m, StripState.vacuum(m.strips)))
    return out


@functools.lru_cache(maxsize=None)
def _sg_uv(p):
    vac, two, states = [], [], []
    for l in (1e-2, 3e-3, 1e-3):
        a = solve_sg(make_state(p, l))
        b = solve_sg(make_state(p, l, RootConfig(holes=(0.5, -0.5), spin=1)))
        vac.append((l, *energy_momentum(a)))
        two.append((l, *energy_momentum(b)))
        states += [a, b]
    return vac, two, states


@functools.lru_cache(maxsize=None)
def _sg_ir():
    return solve_sg(make_state(1.5, 20.0, RootConfig(holes=(0.5, -0.5), spin=1)))


@functools.lru_cache(maxsize=None)
def _sg_free():
    return solve_sg(make_state(1.0, 3.0, RootConfig(holes=(0.5, -0.5), spin=1)))


def test_criterion_01_free_fermion_point():
    t0 = time.perf_counter()
    th = np.linspace(-30, 30, 6001)
    g = float(np.max(np.abs(kernel_G(th, 1.0))))
    st = _sg_free()
    h_ref = free_fermion_hole_positions(3.0, [0.5, -0.5])
    dh = float(np.max(np.abs(np.sort(st.holes) - np.sort(h_ref))))
    E, P = energy_momentum(st)
    E_ref, P_ref = free_fermion_energy(3.0, [0.5, -0.5])
    dE = max(abs(E - E_ref), abs(P - P_ref))
    dt = time.perf_counter() - t0
    ok = g < 1e-12 and dh <= 1e-10 and dE <= 1e-10 and dt < 1.0
    _report(1, ok, f"sup|G|={g:.1e} |dh|={dh:.1e} |dE|={dE:.1e} t={dt:.2f}s")


def test_criterion_02_tba_vacuum_energies():
    expected = {3: Fraction(-1, 48), 4: Fraction(-7, 240), 5: Fraction(-1, 30)}
    worst, slowest = 0.0, 0.0
    for L, target in expected.items():
        t0 = time.perf_counter()
        m = TBAModel(L)
        sol = solve_tba(m, StripState.vacuum(m.strips))
        slowest = max(slowest, time.perf_counter() - t0)
        assert Fraction(m.central_charge).limit_denominator(1000) / -24 == target
        worst = max(worst, abs(scaling_energy(m, sol) - float(target)))
    ok = worst <= 1e-6 and slowest < 5.0
    _report(2, ok, f"max|E - (-c/24)|={worst:.1e} slowest={slowest:.2f}s")


def test_criterion_03_excited_states_closed_form():
    t0 = time.perf_counter()
    m, solved = _tba_states_L4()
    worst = max(abs(scaling_energy(m, sol) - conformal_energy_closed_form(m, s)) for s, sol in solved)
    dt = time.perf_counter() - t0
    ok = len(solved) >= 8 and worst <= 1e-6 and dt < 120
    _report(3, ok, f"states={len(solved)} (need >= 8) max|dE|={worst:.1e} t={dt:.1f}s")


def test_criterion_04_vacuum_convergence_rate():
    m = TBAModel(4)
    sol = solve_tba(m, StripState.vacuum(m.strips), IterationConfig(tol_function=1e-9, max_iter=200))
    r = sol.report
    ok = r.final_residual <= 1e-9 and r.iterations_used <= 40 and 0.3 <= r.contraction_estimate <= 0.7
    _report(4, ok, f"iterations={r.iterations_used} residual={r.final_residual:.1e} "
                   f"contraction={r.contraction_estimate:.3f}")


def test_criterion_05_integrals_of_motion():
    m, solved = _tba_states_L4()
    sols = [(m, sol) for _, sol in solved] + list(_tba_vacua().values())
    worst = max(abs(integrals_of_motion(mm, sol, 1) - scaling_energy(mm, sol)) for mm, sol in sols)
    exact = integral_constant_exact(1) == 1 and integral_constant_exact(2) == Fraction(1001, 1440)
    numeric = abs(integral_constant(1) - math.pi) < 1e-14 and \
        abs(integral_constant(2) - 1001 / 1440 * math.pi) < 1e-14
    ok = worst <= 1e-8 and exact and numeric
    _report(5, ok, f"max|I_1 - E|={worst:.1e} over {len(sols)} states, C_1 and C_2 exact={exact and numeric}")


def test_criterion_06_lattice_oracle():
    t0 = time.perf_counter()
    worst, counts_ok, anomalies, total = 0.0, True, 0, 0
    u, v = 0.23 + 0.11j, -0.31 + 0.07j
    for N in (4, 6):
        lat = RSOSLattice(4, N)
        worst = max(worst, commutation_residual(lat, u, v), crossing_residual(lat, u),
                    periodicity_residual(lat, u), *(verify_t_system(lat, u, q) for q in (1, 2, 3)))
        for pat in eigenvalue_zero_pattern(lat, tol_s=0.2):
            counts_ok &= pat.dressed_count == 4 * N + 4
            anomalies += len(pat.anomalies)
            total += len(pat.zeros)
    frac = anomalies / max(total, 1)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and counts_ok and frac <= 0.05 and dt < 120
    _report(6, ok, f"max residual={worst:.1e} zero counts 4N+4={counts_ok} anomalies={frac:.1%} t={dt:.1f}s")


def test_criterion_07_yang_baxter():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for spec in (SPEC_GL11, SPEC_GL2, SPEC_GL22):
        for l1, l2, l3 in rng.uniform(-2, 2, size=(20, 3)):
            worst = max(worst, ybe_residual(spec, l1, l2, l3))
    for l1, l2, l3 in rng.uniform(-2, 2, size=(20, 3)):
        worst = max(worst, hubbard_ybe_residual(SPEC_GL11, SPEC_GL11, l1, l2, l3, rng.uniform(0.2, 3)))
    reg = 0.0
    for spec in (SPEC_GL11, SPEC_GL2, SPEC_GL22):
        g = list(spec.grading)
        reg = max(reg, float(np.max(np.abs(build_universal_r(spec, lambda_spectral=0.0)
                                           - graded_permutation([g, g], [1, 0])))))
    g = [0, 1, 1, 0]
    reg = max(reg, float(np.max(np.abs(build_hubbard_r(SPEC_GL11, SPEC_GL11, 0.4, 0.4, 1.3)
                                       - graded_permutation([g, g], [1, 0])))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-11 and reg <= 1e-14 and dt < 60
    _report(7, ok, f"max YBE residual={worst:.1e} max|R(0) - P|={reg:.1e} t={dt:.1f}s")


def test_criterion_08_breathers():
    M = 1.0
    repulsive = breather_masses(8 * math.pi, M) == []
    two = breather_masses(8 * math.pi / 3, M)
    two_ok = len(two) == 2 and np.allclose(two, [2 * math.sin(math.pi / 6), 2 * math.sin(math.pi / 3)],
                                           atol=1e-15)
    small = breather_masses(0.1, M)
    mu = 0.1 * M / 8
    ratio = abs(small[0] / mu - 1)
    ok = repulsive and two_ok and len(small) == 251 and ratio <= 1e-4
    _report(8, ok, f"empty at 8pi={repulsive} two at 8pi/3={two_ok} n(0.1)={len(small)} "
                   f"|M_1/mu - 1|={ratio:.1e}")


def test_criterion_09_uv_weights():
    t0 = time.perf_counter()
    details, ok = [], True
    for p in (1.0, 1.5):
        R2 = Coupling(p).R2
        vac, two, _ = _sg_uv(p)
        w0 = uv_effective_weights(vac, central_charge=1.0, R2=R2)
        w2 = uv_effective_weights(two, vacuum_trace=vac, R2=R2, spin=1)
        e0 = max(abs(w0.delta_plus), abs(w0.delta_minus))
        e2 = max(abs(w2.delta_plus - R2 / 2), abs(w2.delta_minus - R2 / 2))
        ok &= e0 <= 1e-2 and e2 <= 1e-2
        details.append(f"p={p}: vac err={e0:.1e} two-hole err={e2:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    _report(9, ok, "; ".join(details) + f" t={dt:.1f}s")


def test_criterion_10_ir_limit():
    from ibsolve.sg_limits import ir_quantization_residual

    st = _sg_ir()
    res = ir_quantization_residual(st)
    E, _ = energy_momentum(st)
    dE = abs(E - float(np.sum(np.cosh(st.holes))))
    ok = res <= 1e-6 and dE <= 1e-6
    _report(10, ok, f"IR residual={res:.1e} |E - sum cosh h|={dE:.1e}")


HUB_SWEEP = (2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 35.0, 50.0)
OVERLAP_WINDOW = (5.0, 50.0)


def test_criterion_11_hubbard():
    t0 = time.perf_counter()
    parts, ok = [], True
    for U in (1.0, 4.0, 16.0):
        m = HubbardModel(4, 1.0, U)
        ref = lieb_wu_continuation(m, steps=20)[-1].energy
        try:
            dE = abs(solve_hubbard(m).energy - ref)
            ok &= dE <= 1e-5
            parts.append(f"U={U:g}: |dE|={dE:.1e}")
        except SpecialObjectError as exc:
            ok = False
            parts.append(f"U={U:g}: rejected ({exc.args[0].split(';')[0]})")
    t = 1 / math.sqrt(2)
    energies, gaps = [], []
    for U in HUB_SWEEP:
        m = HubbardModel(12, t, U)
        energies.append(solve_hubbard(m).energy)
        if OVERLAP_WINDOW[0] <= U <= OVERLAP_WINDOW[1]:
            gaps.append(abs(energies[-1] - solve_xxx_limit(m).energy))
    monotone = bool(np.all(np.diff(energies) > 0))
    overlap = max(gaps)
    dt = time.perf_counter() - t0
    ok &= monotone and overlap <= 5e-3 and dt < 600
    parts.append(f"L=12 monotone={monotone} overlap on U in [5, 50]={overlap:.1e} t={dt:.0f}s")
    _report(11, ok, "; ".join(parts))


def test_criterion_12_invariants():
    pos, psi_err, z_err, count = True, 0.0, 0.0, 0
    m4, solved = _tba_states_L4()
    tba = [(m4, s) for _, s in solved] + list(_tba_vacua().values())
    for m, sol in tba:
        d = np.exp(sol.log1p_d()) - 1
        pos &= bool(np.all(np.isfinite(sol.log1p_d())) and np.all(1 + d > 0))
        for q in range(m.strips):
            ys = sol.zeros[q]
            if len(ys):
                psi = psi_hat(m, sol.grid, sol.S, sol.zeros, ys, q)
                psi_err = max(psi_err, float(np.max(np.abs(psi - math.pi * sol.state.n_values(q + 1)))))
        count += 1
    sg = [_sg_free(), _sg_ir()] + _sg_uv(1.0)[2] + _sg_uv(1.5)[2]
    for st in sg:
        z_err = max(z_err, hole_quantization_residual(st))
        count += 1
    ok = pos and psi_err <= 1e-9 and z_err <= 1e-9
    _report(12, ok, f"{count} solutions: 1 + d > 0={pos} max|Psi - pi n|={psi_err:.1e} "
                    f"max|Z(h) - 2 pi I|={z_err:.1e}")
