"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Criteria are property- and oracle-based; every tolerance is pinned here.
"""

import time

import numpy as np
import pytest

from qdslab.fock import (
    build_diffusion_generator,
    build_fock,
    build_generator,
    choi_cp_check,
    coherent_fock_state,
    fock_to_position,
    moment_odes,
    fock_moments,
    propagate,
)
from qdslab.grids import SpatialGrid
from qdslab.hartree import (
    field_energy,
    gronwall_monitor,
    lieb_thirring_ratio,
    solve_poisson,
)
from qdslab.mollify import mollify_truncate, x_bump_operator_norm
from qdslab.model import DiffusionForm, LindbladModel, check_lindblad_condition, \
    diffusion_to_lindblad
from qdslab.propagator import SimulationPlan, simulate
from qdslab.states import (
    DensityState,
    coherent_state,
    harmonic_ground_state,
    inverse_wigner,
    particle_density,
    random_mixed_state,
    spectral_diagnostics,
    wigner_transform,
)


def _report(num: int, name: str, ok: bool, detail: str):
    verdict = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:2d} [{name}]: {verdict} -- {detail}", flush=True)
    assert ok, f"criterion {num} ({name}): {detail}"


BENCH_FORM = DiffusionForm(dpp=0.4, dqq=0.2, dpq=0.05, eta=0.3, d=1)
BENCH_MODEL = diffusion_to_lindblad(BENCH_FORM)
BENCH_CENTER = (1.0, 0.5)


@pytest.fixture(scope="module")
def bench_grid():
    return SpatialGrid(dim=1, points=128, extent=8.0)


@pytest.fixture(scope="module")
def bench_oracle_final(bench_grid):
    """Fock reference state at t=1 mapped to a Wigner function."""
    fock = build_fock(BENCH_MODEL, 32)
    gen = build_generator(fock)
    rho = propagate(gen, coherent_fock_state(32, *BENCH_CENTER), 1.0)
    return wigner_transform(fock_to_position(rho, fock, bench_grid))


def _bench_run(grid, dt, t_end=1.0):
    w0 = wigner_transform(coherent_state(grid, *BENCH_CENTER))
    plan = SimulationPlan(model=BENCH_MODEL, initial=w0, t_end=t_end, dt=dt,
                          diagnostics_every=max(1, int(round(t_end / dt))))
    return simulate(plan)


def test_criterion_1_conservativity():
    grid = SpatialGrid(dim=1, points=256, extent=8.0)
    w0 = wigner_transform(coherent_state(grid, *BENCH_CENTER))
    start = time.perf_counter()
    plan = SimulationPlan(model=BENCH_MODEL, initial=w0, t_end=2.0, dt=1e-3,
                          diagnostics_every=200)
    traj = simulate(plan)
    pde_seconds = time.perf_counter() - start
    drift = abs(traj.reports[-1].trace - traj.reports[0].trace) \
        / traj.reports[0].trace

    start = time.perf_counter()
    fock = build_fock(BENCH_MODEL, 32)
    gen = build_generator(fock)
    rho = propagate(gen, coherent_fock_state(32, *BENCH_CENTER), 2.0)
    fock_seconds = time.perf_counter() - start
    fock_drift = abs(float(np.trace(rho).real) - 1.0)

    ok = drift <= 1e-8 and fock_drift <= 1e-11 and pde_seconds <= 60 \
        and fock_seconds <= 60
    _report(1, "conservativity", ok,
            f"PDE drift {drift:.2e} (<=1e-8, {pde_seconds:.1f}s), "
            f"oracle drift {fock_drift:.2e} (<=1e-11, {fock_seconds:.1f}s)")


def test_criterion_2_cp_iff_condition():
    start = time.perf_counter()
    fock = build_fock(LindbladModel(d=1, coeffs=[]), 12)
    mismatches = []
    for dqq in np.linspace(0.05, 0.45, 20):
        form = DiffusionForm(dpp=1.0, dqq=float(dqq), dpq=0.0, eta=1.0, d=1)
        rep = check_lindblad_condition(form)
        assert abs(rep.margin) >= 1e-3
        gen = build_diffusion_generator(form, fock)
        is_cp, _ = choi_cp_check(gen, 0.1, tol=1e-8)
        if is_cp != rep.valid:
            mismatches.append(float(rep.margin))
    cl_gen = build_diffusion_generator(
        DiffusionForm(dpp=1.0, dqq=0.0, dpq=0.0, eta=1.0, d=1), fock)
    _, cl_eig = choi_cp_check(cl_gen, 0.1)
    seconds = time.perf_counter() - start
    ok = not mismatches and cl_eig < -1e-4 and seconds <= 120
    _report(2, "complete positivity iff condition", ok,
            f"20/20 verdicts match (|margin|>=1e-3), Caldeira-Leggett min "
            f"Choi eig {cl_eig:.3e} (< -1e-4), {seconds:.1f}s")


def test_criterion_3_moment_odes(bench_grid):
    traj = _bench_run(bench_grid, 1e-3)
    fock = build_fock(BENCH_MODEL, 32)
    system = moment_odes(BENCH_MODEL)
    rho0 = coherent_fock_state(32, *BENCH_CENTER)
    _, vals = system.integrate(fock_moments(rho0, fock), 1.0, 1e-4)
    mom = traj.moments[-1]
    pairs = {
        "trace": (mom.mass, vals[-1, 0].real),
        "mean_x": (mom.mean_x[0], vals[-1, 1].real),
        "mean_d": (mom.mean_xi[0], vals[-1, 2].imag),
        "ekin": (mom.ekin, vals[-1, 3].real),
        "eext": (mom.eext, vals[-1, 4].real),
    }
    worst = max(abs(a - b) / max(1.0, abs(b)) for a, b in pairs.values())

    # heating-rate identity on a pure position-coupling model
    alpha = 0.9
    w0 = wigner_transform(coherent_state(bench_grid, 0.0, 0.3))
    plan = SimulationPlan(model=DiffusionForm(dpp=0.5 * alpha**2, dqq=0.0, d=1),
                          initial=w0, t_end=1.0, dt=1e-2,
                          diagnostics_every=10, confinement=False)
    heat = simulate(plan)
    rate = (heat.moments[-1].ekin - heat.moments[0].ekin) / heat.times[-1]
    heat_err = abs(rate - 0.5 * alpha**2)
    ok = worst <= 1e-4 and heat_err <= 1e-6
    _report(3, "moment ODEs", ok,
            f"max relative moment error {worst:.2e} (<=1e-4), heating-rate "
            f"error {heat_err:.2e} (<=1e-6)")


def test_criterion_4_gronwall_envelope():
    grid = SpatialGrid(dim=1, points=256, extent=8.0)
    model = DiffusionForm(dpp=0.1, dqq=0.05, dpq=0.0, eta=0.0, d=1)
    w0 = wigner_transform(coherent_state(grid, 0.5, 0.0))
    plan = SimulationPlan(model=model, initial=w0, t_end=2.0, dt=1e-3,
                          hartree=True, diagnostics_every=20)
    traj = simulate(plan)
    probe = gronwall_monitor(traj.reports, k_bound=10.0, tol=1e-6)
    empirical = max(probe.empirical_k, 1e-12)
    final = gronwall_monitor(traj.reports, k_bound=empirical, tol=1e-6)
    drift = abs(traj.reports[-1].trace - traj.reports[0].trace) \
        / traj.reports[0].trace
    ok = final.passed and drift <= 1e-8
    _report(4, "Gronwall energy envelope", ok,
            f"empirical K = {empirical:.4f}, envelope holds at tol 1e-6 "
            f"(max excess {final.max_envelope_excess:.2e}), mass drift "
            f"{drift:.2e}")


def test_criterion_5_lieb_thirring_scaling():
    grid = SpatialGrid(dim=3, points=96, extent=10.0)
    r2 = grid.radius_squared()

    def dilated(s):
        psi = (s**1.5) * np.exp(-(s**2) * r2 / 2.0).astype(complex)
        psi /= grid.norm(psi)
        return DensityState(grid=grid, weights=np.array([1.0]),
                            vectors=psi[None])

    worst = 0.0
    for p in (1.0, 1.5, 2.0, 3.0):
        base = lieb_thirring_ratio(dilated(1.0), p)
        for s in (0.5, 2.0):
            worst = max(worst, abs(lieb_thirring_ratio(dilated(s), p) / base - 1))
    p1 = lieb_thirring_ratio(dilated(1.0), 1.0)
    ok = worst <= 1e-6 and abs(p1 - 1.0) < 1e-12
    _report(5, "Lieb-Thirring scaling", ok,
            f"dilation deviation {worst:.2e} (<=1e-6) over p in "
            f"{{1, 3/2, 2, 3}}, R(p=1) - 1 = {p1 - 1:.2e}")


def test_criterion_6_wigner_machinery(rng):
    grid = SpatialGrid(dim=1, points=128, extent=8.0)
    ground = harmonic_ground_state(grid)
    w = wigner_transform(ground)
    x = grid.axis()[:, None]
    xi = w.grid_xi.axis()[None, :]
    closed_err = np.max(np.abs(w.values - np.exp(-x**2 - xi**2) / np.pi))

    mixed = random_mixed_state(grid, 3, rng)
    wm = wigner_transform(mixed)
    back = inverse_wigner(wm)
    round_err = np.max(np.abs(wigner_transform(back).values - wm.values))

    trace = mixed.trace()
    mass_err = abs(wm.mass() - trace)
    l1_err = abs(grid.integrate(particle_density(mixed)) - trace)
    kernel_err = abs(back.trace() - trace)
    cons = max(mass_err, l1_err, kernel_err)
    ok = round_err <= 1e-10 and closed_err <= 1e-8 and cons <= 1e-10
    _report(6, "Wigner machinery", ok,
            f"roundtrip {round_err:.2e} (<=1e-10), ground-state closed form "
            f"{closed_err:.2e} (<=1e-8), mass/trace/density consistency "
            f"{cons:.2e} (<=1e-10)")


def test_criterion_7_mollifier_shadows():
    grid = SpatialGrid(dim=1, points=4096, extent=8.0)
    state = random_mixed_state(grid, 3, np.random.default_rng(7), width=1.0)
    trace0 = state.trace()
    contraction_ok = True
    distance64 = None
    for n in (8, 16, 32, 64):
        sigma = mollify_truncate(state, n)
        contraction_ok &= sigma.trace() <= trace0 + 1e-14
        if n == 64:
            combined = DensityState(
                grid=grid,
                weights=np.concatenate([state.weights, -sigma.weights]),
                vectors=np.concatenate([state.vectors, sigma.vectors]))
            distance64 = spectral_diagnostics(combined).trace_norm
    scales = np.array([2, 4, 8, 16, 32, 64])
    norms = np.array([x_bump_operator_norm(grid, n) for n in scales])
    slope = float(np.polyfit(np.log(scales), np.log(norms), 1)[0])
    ok = contraction_ok and distance64 < 1e-3 and -1.2 <= slope <= -0.8
    _report(7, "mollifier lemma shadows", ok,
            f"trace contraction holds for all n, trace-norm distance at n=64 "
            f"= {distance64:.2e} (<1e-3), operator-norm slope {slope:.3f} "
            f"(in [-1.2, -0.8])")


def test_criterion_8_hartree_solver():
    grid = SpatialGrid(dim=3, points=64, extent=8.0)
    sigma = 0.5
    r2 = grid.radius_squared()
    dens = (2 * np.pi * sigma**2) ** -1.5 * np.exp(-r2 / (2 * sigma**2))
    start = time.perf_counter()
    phi = solve_poisson(dens, grid)
    seconds = time.perf_counter() - start
    from scipy.special import erf

    r = np.sqrt(r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = erf(r / (sigma * np.sqrt(2))) / (4 * np.pi * r)
    exact[r < 1e-12] = np.sqrt(2 / np.pi) / (4 * np.pi * sigma)
    linf = np.max(np.abs(phi - exact)) / np.max(np.abs(exact))
    esc = 0.5 * grid.integrate(phi * dens)
    fe = field_energy(dens, grid)
    identity_err = abs(fe - esc) / esc
    ok = linf <= 1e-4 and seconds <= 60 and identity_err <= 1e-6
    _report(8, "Hartree solver", ok,
            f"erf closed-form Linf {linf:.2e} (<=1e-4) in {seconds:.1f}s, "
            f"field-energy identity {identity_err:.2e} (<=1e-6)")


def test_criterion_9_strang_order(bench_grid, bench_oracle_final):
    errors = {}
    for dt in (4e-3, 2e-3):
        traj = _bench_run(bench_grid, dt)
        errors[dt] = float(np.max(np.abs(
            traj.final.values - bench_oracle_final.values)))
    ratio = errors[4e-3] / errors[2e-3]
    ok = 3.5 <= ratio <= 4.5
    _report(9, "Strang second order", ok,
            f"error ratio under dt halving = {ratio:.3f} (in [3.5, 4.5]; "
            f"errors {errors[4e-3]:.2e} -> {errors[2e-3]:.2e})")


def test_criterion_10_oracle_agreement(bench_grid, bench_oracle_final):
    traj = _bench_run(bench_grid, 1e-3)
    linf = float(np.max(np.abs(traj.final.values - bench_oracle_final.values)))
    ok = linf <= 1e-4
    _report(10, "PDE vs Fock oracle", ok,
            f"Wigner Linf discrepancy at t=1 (N=32, 128^2) = {linf:.2e} "
            f"(<=1e-4)")
