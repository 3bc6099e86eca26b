"""Split-step spectral integration of the Wigner-Fokker-Planck(-Poisson) equation.

The phase-space equation

    d_t w + xi . grad_x w + Theta[V] w = Q w

is integrated by composing three substeps, each solved exactly on the grid:

  transport   d_t w + xi . grad_x w = 0
      multiply the x-Fourier transform by exp(-i k . xi dt) per xi slice.

  potential   d_t w + Theta[V] w = 0
      in the xi-dual variable u the pseudo-differential operator acts by
      multiplication with i [V(x + u/2) - V(x - u/2)], so the step multiplies
      by exp(-i dt deltaV(x, u)).  Analytic potentials are evaluated at the
      half-grid points directly; tabulated potentials (Hartree, tables) by
      trigonometric interpolation, preserving spectral accuracy.  The u = 0
      line carries multiplier one, so mass is conserved exactly.

  diffusion   d_t w = Q w  plus the residual drift terms
      in the double-dual variables (k, u) the generator reads

        d_t W = -(Dpp u^2 + Dqq k^2 + 2 Dpq k.u) W - 2 eta u . grad_u W
                + i (drift_x . u) W + i (drift_p . k) W,

      solved in closed form along the Ornstein-Uhlenbeck characteristics
      u(s) = u exp(-2 eta s): the step resamples u -> u exp(-2 eta dt)
      (an exact rescaled evaluation of the trigonometric interpolant via the
      chirp-z transform) and multiplies by the Gaussian factor with the
      exactly integrated covariance

        exp(-Dpp u^2 c4 - 2 Dpq k.u c2 - Dqq k^2 dt
            + i drift_x.u c2 + i drift_p.k dt),
        c2 = (1 - exp(-2 eta dt)) / (2 eta),   c4 = (1 - exp(-4 eta dt)) / (4 eta).

Note the sign of the k.u cross term: with the transform convention of
`states` (the one that makes the transport term come out as +xi . grad_x),
the kernel-template coefficient Dpq enters the phase-space generator with
the opposite sign to the position-representation display; the Fock-space
oracle fixes this convention end to end.

The Hartree coupling uses frozen-potential splitting: the density
n(x) = int w dxi and its Poisson potential are recomputed once per step and
held fixed during the potential substeps, so every substep stays exactly
mass-conserving.  Invalid (non-Lindblad) coefficient sets are integrated
without protest; the expected positivity violation is observable in the
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.signal import czt

from .grids import SpatialGrid, dual_velocity_grid
from .hartree import EnergyReport, solve_poisson
from .model import DiffusionForm, LindbladModel, V1Spec, lindblad_to_diffusion
from .runtime import worker_count
from .states import (
    DensityState,
    WignerGrid,
    inverse_wigner,
    refine_periodic,
    spectral_diagnostics,
    wigner_transform,
)

__all__ = [
    "SimulationPlan",
    "Trajectory",
    "MomentState",
    "BlowUpError",
    "step_transport",
    "step_potential",
    "step_diffusion",
    "simulate",
    "wigner_moments",
]

POSITIVITY_CAP = 512  # kernel eigensolves for positivity tracking up to this N


class BlowUpError(RuntimeError):
    """L2 norm grew beyond the guard threshold; carries the last good state."""

    def __init__(self, message: str, time: float, last_good: WignerGrid,
                 trajectory: "Trajectory"):
        super().__init__(message)
        self.time = time
        self.last_good = last_good
        self.trajectory = trajectory


@dataclass
class MomentState:
    time: float
    mass: float
    mean_x: np.ndarray
    mean_xi: np.ndarray
    ekin: float     # 1/2 int |xi|^2 w
    eext: float     # 1/2 int |x|^2 w
    cross: float    # int x . xi w


@dataclass
class SimulationPlan:
    model: LindbladModel | DiffusionForm
    initial: DensityState | WignerGrid
    t_end: float
    dt: float
    splitting: str = "strang"
    hartree: bool = False
    diagnostics_every: int = 10
    snapshot_every: int = 0
    track_positivity: bool = False
    confinement: bool | None = None  # default: taken from the model if present
    v1: V1Spec | None = None         # used when model is a DiffusionForm

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt and self.t_end != 0.0:
            raise ValueError("t_end must be 0 or at least dt")
        if self.splitting not in ("lie", "strang"):
            raise ValueError(f"unknown splitting {self.splitting!r}")
        if self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be >= 1")


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    reports: list[EnergyReport] = field(default_factory=list)
    moments: list[MomentState] = field(default_factory=list)
    snapshots: list[tuple[float, WignerGrid]] = field(default_factory=list)
    final: WignerGrid | None = None


# ---------------------------------------------------------------------------
# dual-representation helpers
# ---------------------------------------------------------------------------


def _xi_axes(d: int) -> tuple[int, ...]:
    return tuple(range(d, 2 * d))


def _x_axes(d: int) -> tuple[int, ...]:
    return tuple(range(d))


def _to_u(values: np.ndarray, d: int) -> np.ndarray:
    """xi -> u transform per velocity axis (unnormalized inverse DFT)."""
    return sfft.ifftn(values, axes=_xi_axes(d), workers=worker_count())


def _from_u(values: np.ndarray, d: int) -> np.ndarray:
    return sfft.fftn(values, axes=_xi_axes(d), workers=worker_count())


def _fft_order_values(n: int, spacing: float) -> np.ndarray:
    return spacing * np.rint(np.fft.fftfreq(n) * n)


def _scaled_to_u_axis(arr: np.ndarray, axis: int, scale: float,
                      grid: SpatialGrid) -> np.ndarray:
    """One velocity axis of the u transform, evaluated at contracted points.

    Input along `axis` is natural-order xi data v_p; output is the stored
    u representation whose implied physical transform satisfies
    U_stored(u_l) = U(scale * u_l), i.e.

        out[l] = (1/n) e^{i xi_0 (scale-1) u_l} sum_p v_p e^{2 pi i scale p l / n}

    with u_l the signed fft-order dual values.  scale = 1 reduces to ifft.
    """
    n = arr.shape[axis]
    moved = np.moveaxis(arr, axis, -1)
    # sum_p v_p e^{2 pi i s p (q - n/2) / n} = sum_p [v_p e^{-i pi s p}] e^{2 pi i s p q / n}
    out_nat = czt(moved, m=n, w=np.exp(2j * np.pi * scale / n),
                  a=np.exp(1j * np.pi * scale), axis=-1)
    out = np.fft.ifftshift(out_nat, axes=-1) / n
    u_vals = _fft_order_values(n, grid.spacing)
    xi0 = -0.5 * n * (np.pi / grid.extent)
    phase = np.exp(1j * xi0 * (scale - 1.0) * u_vals)
    out = out * phase[tuple([None] * (out.ndim - 1)) + (slice(None),)]
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# exact substeps
# ---------------------------------------------------------------------------


def _transport_values(values: np.ndarray, grid: SpatialGrid, dt: float) -> np.ndarray:
    d = grid.dim
    k = grid.wavenumbers()
    xi = dual_velocity_grid(grid).axis()
    out = sfft.fftn(values.astype(complex), axes=_x_axes(d), workers=worker_count())
    for ax in range(d):
        kshape = [1] * (2 * d)
        kshape[ax] = grid.points
        xshape = [1] * (2 * d)
        xshape[d + ax] = grid.points
        out *= np.exp(-1j * k.reshape(kshape) * xi.reshape(xshape) * dt)
    out = sfft.ifftn(out, axes=_x_axes(d), workers=worker_count())
    return out.real


def step_transport(w: WignerGrid, dt: float) -> WignerGrid:
    """Exact free streaming w(x, xi) -> w(x - xi dt, xi)."""
    return WignerGrid(w.grid_x, _transport_values(w.values, w.grid_x, dt))


def _delta_v_analytic(grid: SpatialGrid, confinement: bool,
                      v1: V1Spec | None) -> np.ndarray | None:
    """deltaV(x, u) for the analytic potential parts, or None if absent."""
    if not confinement and v1 is None:
        return None
    d = grid.dim
    x = grid.axis()
    u = _fft_order_values(grid.points, grid.spacing)
    total = np.zeros((grid.points,) * (2 * d))
    if confinement:
        for ax in range(d):
            xs = [1] * (2 * d)
            xs[ax] = grid.points
            us = [1] * (2 * d)
            us[d + ax] = grid.points
            total = total + x.reshape(xs) * u.reshape(us)
    if v1 is not None:
        plus = []
        minus = []
        for ax in range(d):
            xs = [1] * (2 * d)
            xs[ax] = grid.points
            us = [1] * (2 * d)
            us[d + ax] = grid.points
            plus.append(x.reshape(xs) + 0.5 * u.reshape(us))
            minus.append(x.reshape(xs) - 0.5 * u.reshape(us))
        total = total + v1.evaluate(*plus) - v1.evaluate(*minus)
    return total


def _delta_v_tabulated(grid: SpatialGrid, table: np.ndarray) -> np.ndarray:
    """deltaV(x, u) for a grid-sampled potential via trigonometric interpolation."""
    d = grid.dim
    n = grid.points
    fine = refine_periodic(table.astype(complex), axes=range(d)).real
    offs = np.rint(np.fft.fftfreq(n) * n).astype(int)
    idx_p = []
    idx_m = []
    for ax in range(d):
        xs = [1] * (2 * d)
        xs[ax] = n
        i = np.arange(n).reshape(xs)
        us = [1] * (2 * d)
        us[d + ax] = n
        j = offs.reshape(us)
        idx_p.append((2 * i + j) % (2 * n))
        idx_m.append((2 * i - j) % (2 * n))
    return fine[tuple(idx_p)] - fine[tuple(idx_m)]


def _potential_values(values: np.ndarray, grid: SpatialGrid, delta_v: np.ndarray,
                      dt: float) -> np.ndarray:
    d = grid.dim
    dual = _to_u(values.astype(complex), d)
    dual *= np.exp(-1j * dt * delta_v)
    return _from_u(dual, d).real


def step_potential(w: WignerGrid, potential: np.ndarray, dt: float) -> WignerGrid:
    """Exact Theta[V] step for a potential sampled on the x grid."""
    if np.any(~np.isfinite(potential)):
        raise ValueError("potential contains non-finite values")
    if potential.shape != w.grid_x.shape:
        raise ValueError("potential shape does not match the spatial grid")
    delta_v = _delta_v_tabulated(w.grid_x, potential)
    return WignerGrid(w.grid_x, _potential_values(w.values, w.grid_x, delta_v, dt))


def _diffusion_multiplier(grid: SpatialGrid, form: DiffusionForm,
                          dt: float) -> np.ndarray:
    dpp, dqq, dpq, eta = form.scalars()
    d = grid.dim
    k = grid.wavenumbers()
    u = _fft_order_values(grid.points, grid.spacing)
    if eta > 0:
        c2 = (1.0 - np.exp(-2.0 * eta * dt)) / (2.0 * eta)
        c4 = (1.0 - np.exp(-4.0 * eta * dt)) / (4.0 * eta)
    else:
        c2 = c4 = dt
    log_m = np.zeros((grid.points,) * (2 * d), dtype=complex)
    for ax in range(d):
        ks = [1] * (2 * d)
        ks[ax] = grid.points
        us = [1] * (2 * d)
        us[d + ax] = grid.points
        ka = k.reshape(ks)
        ua = u.reshape(us)
        log_m = log_m - dpp * ua**2 * c4 - dqq * ka**2 * dt - 2.0 * dpq * ka * ua * c2
        log_m = log_m + 1j * form.drift_x[ax] * ua * c2
        log_m = log_m + 1j * form.drift_p[ax] * ka * dt
    return np.exp(log_m)


def step_diffusion(w: WignerGrid, form: DiffusionForm, dt: float) -> WignerGrid:
    """Exact Green's-function step for d_t w = Q w plus residual drifts."""
    if form.eta < 0:
        raise ValueError("friction eta must be nonnegative")
    if not form.is_isotropic:
        raise ValueError("phase-space integrator supports isotropic coefficients")
    grid = w.grid_x
    d = grid.dim
    values = w.values.astype(complex)
    if form.eta > 0:
        scale = float(np.exp(-2.0 * form.eta * dt))
        dual = values
        for ax in _xi_axes(d):
            # the u=0 hyperplane (mass and its x moments) stays exact
            zero_slice = dual.mean(axis=ax)
            dual = _scaled_to_u_axis(dual, ax, scale, grid)
            idx = [slice(None)] * dual.ndim
            idx[ax] = 0
            dual[tuple(idx)] = zero_slice
    else:
        dual = _to_u(values, d)
    dual = sfft.fftn(dual, axes=_x_axes(d), workers=worker_count())
    dual *= _diffusion_multiplier(grid, form, dt)
    dual = sfft.ifftn(dual, axes=_x_axes(d), workers=worker_count())
    return WignerGrid(grid, _from_u(dual, d).real)


# ---------------------------------------------------------------------------
# moments and diagnostics from a Wigner snapshot
# ---------------------------------------------------------------------------


def wigner_moments(w: WignerGrid, time: float = 0.0) -> MomentState:
    grid = w.grid_x
    d = grid.dim
    x = grid.axis()
    xi = w.grid_xi.axis()
    cell = w.phase_cell
    vals = w.values
    mass = float(vals.sum() * cell)
    mean_x = np.zeros(d)
    mean_xi = np.zeros(d)
    ekin = 0.0
    eext = 0.0
    cross = 0.0
    for ax in range(d):
        xs = [1] * (2 * d)
        xs[ax] = grid.points
        us = [1] * (2 * d)
        us[d + ax] = grid.points
        xa = x.reshape(xs)
        va = xi.reshape(us)
        mean_x[ax] = float((vals * xa).sum() * cell)
        mean_xi[ax] = float((vals * va).sum() * cell)
        ekin += 0.5 * float((vals * va**2).sum() * cell)
        eext += 0.5 * float((vals * xa**2).sum() * cell)
        cross += float((vals * xa * va).sum() * cell)
    return MomentState(time, mass, mean_x, mean_xi, ekin, eext, cross)


def _density_from_wigner(w: WignerGrid) -> np.ndarray:
    d = w.grid_x.dim
    return w.values.sum(axis=_xi_axes(d)) * w.grid_xi.cell_volume


def _report_from_wigner(
    w: WignerGrid,
    time: float,
    confinement: bool,
    phi: np.ndarray | None,
    track_positivity: bool,
) -> EnergyReport:
    mom = wigner_moments(w, time)
    esc = 0.0
    if phi is not None:
        esc = 0.5 * float(
            w.grid_x.integrate(phi * _density_from_wigner(w))
        )
    min_eig = float("nan")
    if track_positivity and w.grid_x.points ** w.grid_x.dim <= POSITIVITY_CAP:
        diag = spectral_diagnostics(inverse_wigner(w))
        min_eig = diag.min_eigenvalue
    eext = mom.eext if confinement else 0.0
    etot = mom.ekin + eext + esc
    return EnergyReport(
        time=time,
        trace=mom.mass,
        min_eig=min_eig,
        ekin=mom.ekin,
        eext=eext,
        esc=esc,
        etot=etot,
        energy_norm=mom.mass + 2.0 * mom.ekin + 2.0 * eext,
    )


# ---------------------------------------------------------------------------
# full simulation loop
# ---------------------------------------------------------------------------


def _resolve_forms(plan: SimulationPlan) -> tuple[DiffusionForm, bool, V1Spec | None, bool]:
    """(diffusion form, confinement, v1, hartree) for the run."""
    model = plan.model
    if isinstance(model, LindbladModel):
        form = lindblad_to_diffusion(model, warn_mu_mismatch=False)
        mu_needed = 0.5 * form.eta
        if abs(model.mu - mu_needed) > 1e-12 * max(1.0, abs(mu_needed)):
            raise ValueError(
                "the phase-space equation fixes mu = eta/2 = "
                f"{mu_needed}; model has mu = {model.mu} (residual dilation "
                "is not part of the transport-potential-diffusion form)"
            )
        confinement = model.confinement
        v1 = model.v1
        hartree = plan.hartree or model.hartree
    else:
        form = model
        confinement = True if plan.confinement is None else plan.confinement
        v1 = plan.v1
        hartree = plan.hartree
    if plan.confinement is not None:
        confinement = plan.confinement
    return form, confinement, v1, hartree


def simulate(plan: SimulationPlan) -> Trajectory:
    """Run the split-step integration and collect diagnostics.

    Aborts with BlowUpError when the L2 norm grows by more than 1e3 over the
    initial value; the exception carries the last good snapshot and the
    trajectory collected so far.
    """
    if isinstance(plan.initial, WignerGrid):
        w = plan.initial.copy()
    else:
        w = wigner_transform(plan.initial)
    grid = w.grid_x
    form, confinement, v1, hartree = _resolve_forms(plan)
    if hartree and grid.dim not in (1, 3):
        raise ValueError("Hartree runs require d in {1, 3}")

    n_steps = int(round(plan.t_end / plan.dt))
    dt = plan.dt
    half = 0.5 * dt

    static_dv = _delta_v_analytic(grid, confinement, v1)
    d = grid.dim

    def potential_phase(step_dt: float, phi: np.ndarray | None) -> np.ndarray | None:
        dv = static_dv
        if phi is not None:
            dv_phi = _delta_v_tabulated(grid, phi)
            dv = dv_phi if dv is None else dv + dv_phi
        if dv is None:
            return None
        return np.exp(-1j * step_dt * dv)

    # static multipliers cached once; Hartree rebuilds the potential phase per step
    phase_static_half = None
    phase_static_full = None
    if not hartree:
        phase_static_half = potential_phase(half, None)
        phase_static_full = potential_phase(dt, None)

    k_axis = grid.wavenumbers()
    xi_axis = dual_velocity_grid(grid).axis()
    trans_mult_half = np.ones((grid.points,) * (2 * d), dtype=complex)
    for ax in range(d):
        ks = [1] * (2 * d)
        ks[ax] = grid.points
        xs = [1] * (2 * d)
        xs[d + ax] = grid.points
        trans_mult_half = trans_mult_half * np.exp(
            -1j * k_axis.reshape(ks) * xi_axis.reshape(xs) * half
        )
    trans_mult_full = trans_mult_half**2
    diff_mult = _diffusion_multiplier(grid, form, dt)
    eta_scale = float(np.exp(-2.0 * form.eta * dt)) if form.eta > 0 else None

    def transport_cached(values: np.ndarray, mult: np.ndarray) -> np.ndarray:
        out = sfft.fftn(values.astype(complex), axes=_x_axes(d),
                        workers=worker_count())
        out *= mult
        return sfft.ifftn(out, axes=_x_axes(d), workers=worker_count()).real

    def diffusion_cached(values: np.ndarray) -> np.ndarray:
        if eta_scale is not None:
            dual = values.astype(complex)
            for ax in _xi_axes(d):
                zero_slice = dual.mean(axis=ax)
                dual = _scaled_to_u_axis(dual, ax, eta_scale, grid)
                idx = [slice(None)] * dual.ndim
                idx[ax] = 0
                dual[tuple(idx)] = zero_slice
        else:
            dual = _to_u(values.astype(complex), d)
        dual = sfft.fftn(dual, axes=_x_axes(d), workers=worker_count())
        dual *= diff_mult
        dual = sfft.ifftn(dual, axes=_x_axes(d), workers=worker_count())
        return _from_u(dual, d).real

    traj = Trajectory()
    l2_initial = float(np.sqrt((w.values**2).sum()))
    phi_now = None

    def record(step_index: int, time: float):
        if hartree:
            phi_for_report = solve_poisson(_density_from_wigner(w), grid)
        else:
            phi_for_report = None
        traj.times.append(time)
        traj.reports.append(
            _report_from_wigner(w, time, confinement, phi_for_report,
                                plan.track_positivity)
        )
        traj.moments.append(wigner_moments(w, time))
        if plan.snapshot_every and step_index % plan.snapshot_every == 0:
            traj.snapshots.append((time, w.copy()))

    def apply_potential(phase: np.ndarray | None):
        nonlocal w
        if phase is None:
            return
        dual = _to_u(w.values.astype(complex), d)
        dual *= phase
        w = WignerGrid(grid, _from_u(dual, d).real)

    record(0, 0.0)
    for step in range(1, n_steps + 1):
        if hartree:
            phi_now = solve_poisson(_density_from_wigner(w), grid)
        if plan.splitting == "strang":
            phase = potential_phase(half, phi_now) if hartree else phase_static_half
            w = WignerGrid(grid, transport_cached(w.values, trans_mult_half))
            apply_potential(phase)
            w = WignerGrid(grid, diffusion_cached(w.values))
            apply_potential(phase)
            w = WignerGrid(grid, transport_cached(w.values, trans_mult_half))
        else:
            phase = potential_phase(dt, phi_now) if hartree else phase_static_full
            w = WignerGrid(grid, transport_cached(w.values, trans_mult_full))
            apply_potential(phase)
            w = WignerGrid(grid, diffusion_cached(w.values))
        time = step * dt
        l2 = float(np.sqrt((w.values**2).sum()))
        if l2 > 1e3 * l2_initial:
            traj.final = w
            raise BlowUpError(
                f"L2 norm grew by {l2 / l2_initial:.3e} at t = {time}; aborting",
                time=time,
                last_good=w,
                trajectory=traj,
            )
        if step % plan.diagnostics_every == 0 or step == n_steps:
            record(step, time)
    traj.final = w
    return traj
