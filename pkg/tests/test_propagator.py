"""Split-step substeps and full runs.

Each substep solves its piece exactly; the oracles here are independent of
the spectral machinery: characteristic flows for transport, moment ODEs for
the Ornstein-Uhlenbeck relaxation, a pseudo-spectral RK4 stepper for the
diffusion Green's function, and classical heat-kernel closed forms for the
semiclassical consistency of the velocity-diffusion substep.
"""

import numpy as np
import pytest

from qdslab.grids import SpatialGrid
from qdslab.model import DiffusionForm, diffusion_to_lindblad
from qdslab.propagator import (
    BlowUpError,
    SimulationPlan,
    simulate,
    step_diffusion,
    step_potential,
    step_transport,
    wigner_moments,
)
from qdslab.states import WignerGrid, coherent_state, wigner_transform


@pytest.fixture
def blob(grid128):
    return wigner_transform(coherent_state(grid128, 1.0, 0.5))


@pytest.fixture
def wide_grid():
    # sized so the blob's dual-variable content decays below roundoff at the
    # box boundary; moment identities then hold to machine precision
    return SpatialGrid(dim=1, points=192, extent=12.0)


@pytest.fixture
def wide_blob(wide_grid):
    return wigner_transform(coherent_state(wide_grid, 1.0, 0.5))


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------


def test_transport_moves_blob(wide_blob):
    dt = 0.25
    out = step_transport(wide_blob, dt)
    mom = wigner_moments(out)
    # exact characteristic flow: the blob center moves to (x0 + xi0 dt, xi0)
    assert mom.mean_x[0] == pytest.approx(1.0 + 0.5 * dt, abs=1e-10)
    assert mom.mean_xi[0] == pytest.approx(0.5, abs=1e-10)


def test_transport_conserves_mass(blob):
    out = step_transport(blob, 0.37)
    assert abs(out.mass() - blob.mass()) < 1e-13 * blob.mass()


def test_transport_semigroup(blob):
    dt = 0.2
    one = step_transport(blob, dt)
    two = step_transport(step_transport(blob, dt / 2), dt / 2)
    assert np.max(np.abs(one.values - two.values)) < 1e-13


# ---------------------------------------------------------------------------
# potential
# ---------------------------------------------------------------------------


def test_constant_potential_is_identity(blob, grid128):
    out = step_potential(blob, np.full(grid128.shape, 2.5), 0.4)
    assert np.max(np.abs(out.values - blob.values)) < 1e-13


def test_potential_conserves_mass(blob, grid128):
    x = grid128.axis()
    v = 0.3 * np.cos(1.7 * x)
    out = step_potential(blob, v, 0.2)
    assert abs(out.mass() - blob.mass()) < 1e-13 * blob.mass()


def test_potential_rejects_nan(blob, grid128):
    v = np.zeros(grid128.shape)
    v[5] = np.nan
    with pytest.raises(ValueError, match="finite"):
        step_potential(blob, v, 0.1)


def test_harmonic_full_rotation(blob):
    # T = 2 pi recurrence of the harmonic flow under Strang splitting
    form = DiffusionForm(dpp=0.0, dqq=0.0, d=1)
    plan = SimulationPlan(model=form, initial=blob, t_end=2 * np.pi,
                          dt=2 * np.pi / 6300, diagnostics_every=6300)
    traj = simulate(plan)
    rel = (np.linalg.norm(traj.final.values - blob.values)
           / np.linalg.norm(blob.values))
    assert rel < 1e-6


def test_harmonic_quarter_turn_direction(blob):
    form = DiffusionForm(dpp=0.0, dqq=0.0, d=1)
    plan = SimulationPlan(model=form, initial=blob, t_end=np.pi / 2,
                          dt=np.pi / 2 / 400, diagnostics_every=400)
    mom = wigner_moments(simulate(plan).final)
    assert mom.mean_x[0] == pytest.approx(0.5, abs=1e-4)
    assert mom.mean_xi[0] == pytest.approx(-1.0, abs=1e-4)


# ---------------------------------------------------------------------------
# diffusion
# ---------------------------------------------------------------------------


def test_heat_kernel_variance_growth(blob):
    form = DiffusionForm(dpp=1.0, dqq=0.0, d=1)
    dt = 0.1
    out = step_diffusion(blob, form, dt)
    m0, m1 = wigner_moments(blob), wigner_moments(out)
    var0 = 2 * m0.ekin - m0.mean_xi[0] ** 2
    var1 = 2 * m1.ekin - m1.mean_xi[0] ** 2
    assert var1 - var0 == pytest.approx(2 * dt, abs=1e-10)
    assert abs(out.mass() - blob.mass()) < 1e-13


def test_ou_relaxation_rate(grid128):
    # dVar/dt = 2 Dpp - 4 eta Var, fixed point Dpp / (2 eta)
    dpp, eta = 1.0, 0.8
    form = DiffusionForm(dpp=dpp, dqq=0.0, dpq=0.0, eta=eta, d=1)
    w = wigner_transform(coherent_state(grid128, 0.0, 0.0))
    dt, steps = 0.01, 100
    for _ in range(steps):
        w = step_diffusion(w, form, dt)
    mom = wigner_moments(w)
    var = 2 * mom.ekin - mom.mean_xi[0] ** 2
    t = dt * steps
    exact = dpp / (2 * eta) + (0.5 - dpp / (2 * eta)) * np.exp(-4 * eta * t)
    assert var == pytest.approx(exact, abs=1e-8)
    assert abs(w.mass() - 1.0) < 1e-12


def test_diffusion_green_function_vs_rk4(wide_blob, wide_grid):
    """Cross-check of the exactly integrated covariance against explicit
    4th-order stepping of the generator evaluated pseudo-spectrally."""
    blob, grid128 = wide_blob, wide_grid
    form = DiffusionForm(dpp=0.7, dqq=0.3, dpq=0.1, eta=0.5, d=1,
                         drift_x=np.array([0.2]), drift_p=np.array([-0.1]))
    dt = 0.05
    exact = step_diffusion(blob, form, dt)

    n = grid128.points
    k = grid128.wavenumbers()
    xi = exact.grid_xi.axis()
    dxi = exact.grid_xi.spacing

    def rhs(values):
        spec_x = np.fft.fft(values, axis=0)
        dxw = np.fft.ifft(1j * k[:, None] * spec_x, axis=0)
        spec_xi = np.fft.fft(values, axis=1)
        kxi = 2 * np.pi * np.fft.fftfreq(n, d=dxi)
        dxiw = np.fft.ifft(1j * kxi[None, :] * spec_xi, axis=1)
        d2xiw = np.fft.ifft(-(kxi[None, :] ** 2) * spec_xi, axis=1)
        d2xw = np.fft.ifft(-(k[:, None] ** 2) * spec_x, axis=0)
        dx_dxi = np.fft.ifft(1j * k[:, None] * np.fft.fft(dxiw, axis=0), axis=0)
        div_xi_xiw = np.fft.ifft(
            1j * kxi[None, :] * np.fft.fft(values * xi[None, :], axis=1), axis=1)
        out = (form.dpp * d2xiw + 2 * form.eta * div_xi_xiw
               + form.dqq * d2xw - 2 * form.dpq * dx_dxi
               - form.drift_x[0] * dxiw + form.drift_p[0] * dxw)
        return out.real

    sub = 200  # the stiff top modes need small explicit steps
    h = dt / sub
    vals = blob.values.copy()
    for _ in range(sub):
        k1 = rhs(vals)
        k2 = rhs(vals + 0.5 * h * k1)
        k3 = rhs(vals + 0.5 * h * k2)
        k4 = rhs(vals + h * k3)
        vals = vals + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    assert np.max(np.abs(vals - exact.values)) < 1e-9


def test_diffusion_rejects_negative_eta(blob):
    with pytest.raises(ValueError, match="nonnegative"):
        step_diffusion(blob, DiffusionForm(dpp=1.0, dqq=0.0, eta=-0.1, d=1), 0.1)


def test_semiclassical_heat_flow_closed_form(grid128):
    """With Dqq = Dpq = eta = 0 the velocity-diffusion substep is the
    classical kinetic Fokker-Planck heat flow; a classical Gaussian density
    evolves by the closed-form variance update."""
    x = grid128.axis()[:, None]
    xi_ax = np.pi / grid128.extent * (np.arange(grid128.points)
                                      - grid128.points // 2)[None, :]
    sx, sv = 1.3, 0.9
    amp = 1.0 / (2 * np.pi * sx * sv)
    f0 = amp * np.exp(-x**2 / (2 * sx**2) - xi_ax**2 / (2 * sv**2))
    w = WignerGrid(grid128, f0)
    dpp, t = 0.4, 0.5
    out = w
    for _ in range(10):
        out = step_diffusion(out, DiffusionForm(dpp=dpp, dqq=0.0, d=1), t / 10)
    sv2 = sv**2 + 2 * dpp * t
    exact = (amp * sv / np.sqrt(sv2)) * np.exp(
        -x**2 / (2 * sx**2) - xi_ax**2 / (2 * sv2))
    assert np.max(np.abs(out.values - exact)) < 1e-8 * np.max(np.abs(exact))


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------


def test_simulate_linear_mass_drift(blob):
    form = DiffusionForm(dpp=0.4, dqq=0.2, dpq=0.05, eta=0.3, d=1)
    model = diffusion_to_lindblad(form)
    plan = SimulationPlan(model=model, initial=blob, t_end=2.0, dt=2e-3,
                          diagnostics_every=100)
    traj = simulate(plan)
    drift = abs(traj.reports[-1].trace - traj.reports[0].trace)
    assert drift < 1e-10


def test_simulate_rejects_mu_mismatch(blob):
    from qdslab.model import LindbladModel

    model = LindbladModel(d=1, coeffs=[(np.array([1.0]), np.array([1.0]), 0.0)],
                          mu=0.0)  # required mu is 0.5
    plan = SimulationPlan(model=model, initial=blob, t_end=0.1, dt=0.01)
    with pytest.raises(ValueError, match="mu"):
        simulate(plan)


def test_heating_identity(grid128):
    # with beta = gamma = 0 and no potential, dE_kin/dt = 1/2 sum |alpha|^2
    alpha = 0.9
    form = DiffusionForm(dpp=0.5 * alpha**2, dqq=0.0, d=1)
    w = wigner_transform(coherent_state(grid128, 0.0, 0.3))
    plan = SimulationPlan(model=form, initial=w, t_end=1.0, dt=1e-2,
                          diagnostics_every=10, confinement=False)
    traj = simulate(plan)
    rate = (traj.moments[-1].ekin - traj.moments[0].ekin) / traj.times[-1]
    assert rate == pytest.approx(0.5 * alpha**2, abs=1e-6)


def test_strang_order(grid128, blob):
    form = DiffusionForm(dpp=0.4, dqq=0.2, dpq=0.05, eta=0.3, d=1)

    def run(dt):
        plan = SimulationPlan(model=form, initial=blob, t_end=0.5, dt=dt,
                              diagnostics_every=10**9)
        return simulate(plan).final.values

    ref = run(0.5 / 512)
    err_coarse = np.linalg.norm(run(0.5 / 32) - ref)
    err_fine = np.linalg.norm(run(0.5 / 64) - ref)
    ratio = err_coarse / err_fine
    assert 3.5 <= ratio <= 4.5


def test_lie_splitting_first_order(grid128, blob):
    form = DiffusionForm(dpp=0.4, dqq=0.2, dpq=0.05, eta=0.3, d=1)

    def run(dt):
        plan = SimulationPlan(model=form, initial=blob, t_end=0.5, dt=dt,
                              splitting="lie", diagnostics_every=10**9)
        return simulate(plan).final.values

    ref = run(0.5 / 512)
    ratio = (np.linalg.norm(run(0.5 / 32) - ref)
             / np.linalg.norm(run(0.5 / 64) - ref))
    assert 1.7 <= ratio <= 2.3


def test_positivity_weak_form(grid128):
    w = wigner_transform(coherent_state(grid128, 1.0, 0.5))
    form = DiffusionForm(dpp=0.4, dqq=0.2, dpq=0.05, eta=0.3, d=1)
    plan = SimulationPlan(model=form, initial=w, t_end=0.5, dt=1e-3,
                          diagnostics_every=250, track_positivity=True)
    traj = simulate(plan)
    for rep in traj.reports:
        assert rep.min_eig >= -1e-6 * rep.trace


def test_caldeira_leggett_positivity_violation(grid128):
    # Gaussian states can stay positive under the invalid flow; the first
    # excited state is the classic violator
    from qdslab.states import DensityState, hermite_functions

    h = hermite_functions(grid128, 2).astype(complex)
    psi1 = h[1] / grid128.norm(h[1])
    rho = DensityState(grid=grid128, weights=np.array([1.0]), vectors=psi1[None])
    w = wigner_transform(rho)
    form = DiffusionForm(dpp=1.0, dqq=0.0, dpq=0.0, eta=1.0, d=1)
    plan = SimulationPlan(model=form, initial=w, t_end=0.5, dt=1e-3,
                          diagnostics_every=500, track_positivity=True)
    traj = simulate(plan)
    # invalid coefficients are integrated without protest and the expected
    # positivity violation is observable
    assert traj.reports[-1].min_eig < -1e-2


def test_blow_up_guard(grid128):
    # negative momentum diffusion is a backward heat flow: well-defined on the
    # grid step by step, exponentially amplifying, and caught by the guard
    w = wigner_transform(coherent_state(grid128, 0.0, 0.0))
    form = DiffusionForm(dpp=-0.5, dqq=0.0, dpq=0.0, eta=0.0, d=1)
    plan = SimulationPlan(model=form, initial=w, t_end=2.0, dt=0.01,
                          diagnostics_every=10, confinement=False)
    with pytest.raises(BlowUpError) as info:
        simulate(plan)
    assert info.value.last_good is not None
    assert info.value.trajectory.reports


def test_t_end_zero_single_report(blob):
    form = DiffusionForm(dpp=0.1, dqq=0.0, d=1)
    plan = SimulationPlan(model=form, initial=blob, t_end=0.0, dt=1e-3)
    traj = simulate(plan)
    assert len(traj.reports) == 1
    assert traj.times == [0.0]
