"""Closed moment ODE system vs the finite-dimensional oracle.

The structural content of the kinetic/external energy balance: constant
heating source from the position-coupling coefficients, friction damping,
confinement coupling through the phase-space correlation, and the pairwise
cancellation of the imaginary bookkeeping terms between the two energy rows.
"""

import numpy as np
import pytest

from qdslab.fock import (
    build_fock,
    build_generator,
    coherent_fock_state,
    fock_moments,
    moment_odes,
    propagator_matrix,
)
from qdslab.model import LindbladModel, V1Spec


def _project_to_levels(rho, levels):
    out = np.zeros_like(rho)
    out[:levels, :levels] = rho[:levels, :levels]
    return out / np.trace(out).real


MILD_MODEL = LindbladModel(d=1, mu=0.05, confinement=True, coeffs=[
    (np.array([0.3 + 0.1j]), np.array([0.1 - 0.2j]), 0.05 + 0.1j),
    (np.array([0.05j]), np.array([0.2]), -0.1),
])


def test_full_quasifree_vs_fock_oracle():
    n = 24
    fock = build_fock(MILD_MODEL, n)
    gen = build_generator(fock)
    rho0 = _project_to_levels(coherent_fock_state(n, 0.6, -0.4), 8)
    system = moment_odes(MILD_MODEL)
    times, vals = system.integrate(fock_moments(rho0, fock), 1.0, 1e-3)
    step = propagator_matrix(gen, 0.1)
    rho = rho0.copy()
    worst = 0.0
    for i in range(0, len(times), 100):
        reference = fock_moments(rho, fock)
        for j, key in enumerate(system.labels):
            worst = max(worst, abs(vals[i, j] - reference[key]))
        rho = (step @ rho.reshape(-1, order="F")).reshape(n, n, order="F")
    assert worst < 1e-8
    assert system.imag_residual() < 1e-10


def test_heating_row():
    model = LindbladModel(d=1, mu=0.0, confinement=False,
                          coeffs=[(np.array([0.9]), np.array([0.0]), 0.0)])
    system = moment_odes(model)
    v0 = {"m0": 1.0, "mx": 0.2, "md": 0.1j, "kin": 0.25, "ext": 0.3, "xd": -0.5}
    times, vals = system.integrate(v0, 1.0, 1e-3)
    rate = (vals[-1, 3].real - vals[0, 3].real) / times[-1]
    assert rate == pytest.approx(0.5 * 0.81, abs=1e-12)
    # external energy row only couples through the transport correlation
    ext_rate_expected = -(1j * (vals[:, 5] + 0.5 * vals[:, 0])).real
    deriv = np.gradient(vals[:, 4].real, times)
    assert np.max(np.abs(deriv[2:-2] - ext_rate_expected[2:-2])) < 1e-6


def test_unitary_harmonic_energy_oscillation():
    model = LindbladModel(d=1, mu=0.0, coeffs=[])
    fock = build_fock(model, 24)
    system = moment_odes(model)
    rho0 = coherent_fock_state(24, 1.0, 0.0)
    times, vals = system.integrate(fock_moments(rho0, fock), 2 * np.pi, 1e-3)
    total = (vals[:, 3] + vals[:, 4]).real
    assert np.max(np.abs(total - total[0])) < 1e-12
    # kinetic part oscillates at angular frequency 2
    kin = vals[:, 3].real
    period_idx = int(round(np.pi / 1e-3))
    assert abs(kin[0] - kin[period_idx]) < 1e-6


def test_realness_monitoring():
    system = moment_odes(MILD_MODEL)
    fock = build_fock(MILD_MODEL, 16)
    rho0 = coherent_fock_state(16, 0.5, 0.5)
    system.integrate(fock_moments(rho0, fock), 0.5, 1e-3)
    assert system.imag_residual() < 1e-10


def test_hartree_model_rejected():
    model = LindbladModel(d=1, coeffs=[], hartree=True)
    with pytest.raises(ValueError, match="Hartree"):
        moment_odes(model)


def test_bounded_perturbation_rejected():
    model = LindbladModel(d=1, coeffs=[], v1=V1Spec(form="cosine", amplitude=0.1))
    with pytest.raises(ValueError, match="not closed"):
        moment_odes(model)


def test_d2_rejected():
    with pytest.raises(ValueError, match="d=1"):
        moment_odes(LindbladModel(d=2, coeffs=[]))
