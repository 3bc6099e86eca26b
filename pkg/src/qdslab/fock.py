"""Exact finite-dimensional oracle in the harmonic-oscillator (Fock) basis.

The ladder operators a|n> = sqrt(n)|n-1> give position and derivative
matrices X = (a + a^H)/sqrt(2), Dx = (a - a^H)/sqrt(2) with [X, Dx] = -I on
the leading (N-1) x (N-1) block; truncation corrupts only the last basis
level.  The generator

    L(rho) = -i[H, rho] + sum_j ( L_j rho L_j^H - 1/2 {L_j^H L_j, rho} )

is assembled from *products of the truncated matrices*, never truncations of
products.  That choice sacrifices fidelity in the top Fock levels but makes
the structural theorems exact at finite N: the trace functional annihilates
the generator identically (cyclicity of the finite-dimensional trace), the
drift matrix satisfies Y + Y^H + sum_j L_j^H L_j = 0 as a matrix identity,
and Lindblad-built semigroups are exactly completely positive, so
conservativity, contraction and Choi positivity are machine-checkable
rather than approximate.

Superoperators act on column-stacked density matrices:
vec(A rho B) = (B^T kron A) vec(rho).

The module also carries the closed moment system of the quasifree class
(d=1, no Hartree, no bounded perturbation): with

    m0 = tr(rho),  mx = tr(rho x),  md = tr(rho d/dx),
    K  = -1/2 tr(rho d^2/dx^2) (kinetic),  P = 1/2 tr(rho x^2) (external),
    C  = tr(rho x d/dx),

the generator closes a linear ODE system whose K row carries the constant
heating source 1/2 sum_j |alpha_j|^2, the friction -(4 mu + 2 eta) K, the
gamma cross term -i Im(alpha_j conj(gamma_j)) md, and the confinement
coupling +i c (C + m0/2); the P row mirrors it with source +1/2 sum |beta|^2
and friction +(4 mu - 2 eta) P.  (The position-diffusion source is a heating
term: beta-noise spreads position, so it enters with a plus sign, and
friction cancels against the mu adjustment for mu = eta/2; both signs are
pinned by the finite-dimensional oracle in the tests.)  For Hermitian input
all of m0, mx, K, P stay real and the combination i(m0/2 + C) is real (it is
minus the phase-space correlation integral of x.xi); residual imaginary
parts are monitored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .grids import SpatialGrid
from .model import DiffusionForm, LindbladModel
from .states import DensityState, hermite_functions

__all__ = [
    "FockTruncation",
    "Superoperator",
    "MomentSystem",
    "build_fock",
    "build_generator",
    "build_diffusion_generator",
    "propagate",
    "choi_cp_check",
    "moment_odes",
    "fock_moments",
    "coherent_fock_state",
    "number_state",
    "thermal_state",
    "fock_to_position",
]

FOCK_CAP_1D = 64
FOCK_CAP_2D = 32


@dataclass
class FockTruncation:
    n: int                       # levels per axis
    d: int
    x_ops: list[np.ndarray]      # position matrix per axis (composite space)
    dx_ops: list[np.ndarray]     # derivative matrix per axis
    ham: np.ndarray
    lindblad_ops: list[np.ndarray]
    y_op: np.ndarray             # -iH - 1/2 sum L^H L
    mu: float = 0.0

    @property
    def dim(self) -> int:
        return self.n**self.d


@dataclass
class Superoperator:
    dim: int                     # base Hilbert dimension
    matrix: np.ndarray           # dim^2 x dim^2, column-stacking convention


def _ladder(n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=complex)
    idx = np.arange(1, n)
    a[idx - 1, idx] = np.sqrt(idx)
    return a


def _axis_operators(n: int, d: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    a = _ladder(n)
    x1 = (a + a.conj().T) / np.sqrt(2.0)
    dx1 = (a - a.conj().T) / np.sqrt(2.0)
    if d == 1:
        return [x1], [dx1]
    eye = np.eye(n)
    xs, dxs = [], []
    for ax in range(d):
        ops = [eye] * d
        ops[ax] = x1
        xs.append(_kron_all(ops))
        ops[ax] = dx1
        dxs.append(_kron_all(ops))
    return xs, dxs


def _kron_all(mats: list[np.ndarray]) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def build_fock(model: LindbladModel, n: int) -> FockTruncation:
    """Truncated matrices for the model; d=1 primary, d=2 behind the size cap."""
    if n < 2:
        raise ValueError("need at least two Fock levels")
    if model.d == 1:
        if n > FOCK_CAP_1D:
            raise ValueError(f"d=1 oracle capped at {FOCK_CAP_1D} levels")
    elif model.d == 2:
        if n > FOCK_CAP_2D:
            raise ValueError(f"d=2 oracle capped at {FOCK_CAP_2D} levels per axis")
    else:
        raise ValueError("Fock oracle supports d=1 (primary) and d=2 (opt-in)")
    xs, dxs = _axis_operators(n, model.d)
    dim = n**model.d
    ham = np.zeros((dim, dim), dtype=complex)
    for x, dx in zip(xs, dxs):
        ham += -0.5 * dx @ dx
        if model.confinement:
            ham += 0.5 * x @ x
        ham += -1j * model.mu * (x @ dx + dx @ x)
    if model.v1 is not None:
        if model.d != 1:
            raise ValueError("V1 in the oracle is implemented for d=1")
        evals, evecs = np.linalg.eigh(xs[0])
        ham += (evecs * model.v1.evaluate(evals)) @ evecs.conj().T
    lops = []
    for alpha, beta, gamma in model.coeffs:
        op = gamma * np.eye(dim, dtype=complex)
        for ax in range(model.d):
            op = op + alpha[ax] * xs[ax] + beta[ax] * dxs[ax]
        lops.append(op)
    y_op = -1j * ham
    for op in lops:
        y_op = y_op - 0.5 * op.conj().T @ op
    return FockTruncation(n=n, d=model.d, x_ops=xs, dx_ops=dxs, ham=ham,
                          lindblad_ops=lops, y_op=y_op, mu=model.mu)


# ---------------------------------------------------------------------------
# superoperator assembly
# ---------------------------------------------------------------------------


def _left(a: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(a.shape[0]), a)


def _right(b: np.ndarray) -> np.ndarray:
    return np.kron(b.T, np.eye(b.shape[0]))


def _sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """vec(A rho B) = (B^T kron A) vec(rho)."""
    return np.kron(b.T, a)


def build_generator(fock: FockTruncation) -> Superoperator:
    """Lindblad-form generator; trace annihilation holds exactly at finite N."""
    dim = fock.dim
    mat = -1j * (_left(fock.ham) - _right(fock.ham))
    for op in fock.lindblad_ops:
        opd = op.conj().T
        opdop = opd @ op
        mat = mat + _sandwich(op, opd) - 0.5 * _left(opdop) - 0.5 * _right(opdop)
    return Superoperator(dim=dim, matrix=mat)


def build_diffusion_generator(form: DiffusionForm, fock: FockTruncation
                              ) -> Superoperator:
    """Commutator-form assembly of the macroscopic generator.

    A(rho) = -eta [X, {Dx, rho}] + Dqq [Dx,[Dx,rho]] - Dpp [X,[X,rho]]
             + 2i Dpq [X,[Dx,rho]] + i drift_x [X,rho] + drift_p [Dx,rho],

    plus -i[H_0, rho] with the *unadjusted* Hamiltonian: the kernel template
    describes the dissipator after its dilation terms have been cancelled by
    the mu = eta/2 adjustment, so any mu term the truncation carries is
    stripped here.  Works for any coefficient set, valid or not;
    completeness of the positivity verification rests exactly on that.
    """
    if not form.is_isotropic:
        raise ValueError("oracle diffusion assembly supports isotropic forms")
    dpp, dqq, dpq, eta = form.scalars()
    dim = fock.dim
    ham0 = fock.ham.copy()
    if fock.mu != 0.0:
        for x, dx in zip(fock.x_ops, fock.dx_ops):
            ham0 += 1j * fock.mu * (x @ dx + dx @ x)
    mat = -1j * (_left(ham0) - _right(ham0))
    for ax in range(fock.d):
        x = fock.x_ops[ax]
        dx = fock.dx_ops[ax]
        comm_x = _left(x) - _right(x)
        comm_dx = _left(dx) - _right(dx)
        anti_dx = _left(dx) + _right(dx)
        mat = mat - eta * comm_x @ anti_dx
        mat = mat + dqq * comm_dx @ comm_dx
        mat = mat - dpp * comm_x @ comm_x
        mat = mat + 2j * dpq * comm_x @ comm_dx
        mat = mat + 1j * form.drift_x[ax] * comm_x
        mat = mat + form.drift_p[ax] * comm_dx
    return Superoperator(dim=dim, matrix=mat)


# ---------------------------------------------------------------------------
# propagation and complete positivity
# ---------------------------------------------------------------------------


def propagate(gen: Superoperator, rho0: np.ndarray, t: float) -> np.ndarray:
    """rho(t) = exp(t L)(rho0) by dense matrix exponential."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (gen.dim, gen.dim):
        raise ValueError(f"state must be {gen.dim}x{gen.dim}")
    vec = rho0.reshape(-1, order="F")
    out = expm(t * gen.matrix) @ vec
    return out.reshape(gen.dim, gen.dim, order="F")


def propagator_matrix(gen: Superoperator, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    return expm(t * gen.matrix)


def choi_matrix(map_matrix: np.ndarray, dim: int) -> np.ndarray:
    """Reshuffle a column-stacking superoperator into its Choi matrix."""
    four = map_matrix.reshape(dim, dim, dim, dim)
    # map[a + dim*b, c + dim*d'] = Phi(E_{c d'})[a, b] -> Choi[(c,a), (d',b)]
    choi = four.transpose(2, 0, 3, 1).reshape(dim * dim, dim * dim)
    return choi


def choi_cp_check(gen: Superoperator, t: float, tol: float = 1e-10
                  ) -> tuple[bool, float]:
    """Complete positivity of exp(t L) via Choi-matrix eigenvalues.

    Returns (is_cp, min_choi_eig) with is_cp true iff the smallest eigenvalue
    stays above -tol times the spectral norm of the Choi matrix.
    """
    if t <= 0:
        if t < 0:
            raise ValueError("time must be nonnegative")
        mat = np.eye(gen.dim**2, dtype=complex)
    else:
        mat = propagator_matrix(gen, t)
    choi = choi_matrix(mat, gen.dim)
    herm_defect = np.max(np.abs(choi - choi.conj().T))
    scale = np.max(np.abs(choi))
    if herm_defect > 1e-10 * max(scale, 1.0):
        raise ValueError("Choi matrix is not Hermitian; generator is inconsistent")
    eigs = np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))
    norm = float(np.max(np.abs(eigs)))
    min_eig = float(eigs[0])
    return bool(min_eig >= -tol * norm), min_eig


# ---------------------------------------------------------------------------
# reference states and moments
# ---------------------------------------------------------------------------


def coherent_fock_state(n: int, center_x: float, center_xi: float) -> np.ndarray:
    """|z><z| with z = (x0 + i xi0)/sqrt(2), truncated and renormalized."""
    z = (center_x + 1j * center_xi) / np.sqrt(2.0)
    amps = np.zeros(n, dtype=complex)
    amps[0] = 1.0
    for m in range(1, n):
        amps[m] = amps[m - 1] * z / np.sqrt(m)
    amps *= np.exp(-0.5 * abs(z) ** 2)
    amps /= np.linalg.norm(amps)
    return np.outer(amps, amps.conj())


def number_state(n: int, level: int) -> np.ndarray:
    rho = np.zeros((n, n), dtype=complex)
    rho[level, level] = 1.0
    return rho


def thermal_state(n: int, beta: float) -> np.ndarray:
    pops = np.exp(-beta * np.arange(n))
    pops /= pops.sum()
    return np.diag(pops).astype(complex)


def fock_moments(rho: np.ndarray, fock: FockTruncation) -> dict[str, complex]:
    """Tracked moment set (d=1): trace, tr(rho x), tr(rho d), E_kin, E_ext, tr(rho x d)."""
    if fock.d != 1:
        raise ValueError("moments implemented for d=1")
    x = fock.x_ops[0]
    dx = fock.dx_ops[0]
    return {
        "m0": np.trace(rho),
        "mx": np.trace(rho @ x),
        "md": np.trace(rho @ dx),
        "kin": -0.5 * np.trace(rho @ (dx @ dx)),
        "ext": 0.5 * np.trace(rho @ (x @ x)),
        "xd": np.trace(rho @ (x @ dx)),
    }


def fock_to_position(rho: np.ndarray, fock: FockTruncation,
                     grid: SpatialGrid) -> DensityState:
    """Rank-form grid state from a Fock-basis density matrix (d=1)."""
    if fock.d != 1 or grid.dim != 1:
        raise ValueError("position bridge implemented for d=1")
    rho = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(rho)
    keep = np.abs(vals) > 1e-15
    vals, vecs = vals[keep], vecs[:, keep]
    basis = hermite_functions(grid, fock.n).astype(complex)
    vectors = vecs.T @ basis
    return DensityState(grid=grid, weights=vals, vectors=vectors)


# ---------------------------------------------------------------------------
# closed moment ODE system (quasifree class, d=1)
# ---------------------------------------------------------------------------

_MOMENT_ORDER = ("m0", "mx", "md", "kin", "ext", "xd")


@dataclass
class MomentSystem:
    matrix: np.ndarray
    labels: tuple[str, ...] = _MOMENT_ORDER
    imag_tolerance: float = 1e-10
    times: np.ndarray | None = None
    values: np.ndarray | None = None

    def integrate(self, v0: dict[str, complex] | np.ndarray, t_end: float,
                  dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Classical RK4 with fixed step; returns (times, values[:, 6])."""
        if isinstance(v0, dict):
            v = np.array([v0[k] for k in self.labels], dtype=complex)
        else:
            v = np.asarray(v0, dtype=complex)
        steps = int(round(t_end / dt))
        out = np.empty((steps + 1, len(v)), dtype=complex)
        out[0] = v
        a = self.matrix
        for i in range(steps):
            k1 = a @ v
            k2 = a @ (v + 0.5 * dt * k1)
            k3 = a @ (v + 0.5 * dt * k2)
            k4 = a @ (v + dt * k3)
            v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            out[i + 1] = v
        times = dt * np.arange(steps + 1)
        self.times, self.values = times, out
        return times, out

    def imag_residual(self) -> float:
        """Largest spurious imaginary part among the real-valued moments."""
        if self.values is None:
            raise ValueError("integrate first")
        real_rows = [0, 1, 3, 4]  # m0, mx, kin, ext
        resid = float(np.max(np.abs(self.values[:, real_rows].imag)))
        # i (m0/2 + C) must also be real
        combo = 1j * (0.5 * self.values[:, 0] + self.values[:, 5])
        return max(resid, float(np.max(np.abs(combo.imag))))


def moment_odes(model: LindbladModel) -> MomentSystem:
    """Assemble the closed linear moment system (d=1, linear models only)."""
    if model.hartree:
        raise ValueError("moment system is not closed with Hartree coupling")
    if model.v1 is not None:
        raise ValueError("moment system is not closed with a bounded perturbation")
    if model.d != 1:
        raise ValueError("moment system implemented for d=1")
    mu = model.mu
    conf = 1.0 if model.confinement else 0.0
    s_aa = sum(abs(al[0]) ** 2 for al, be, ga in model.coeffs)
    s_bb = sum(abs(be[0]) ** 2 for al, be, ga in model.coeffs)
    s_ab = sum(al[0] * np.conj(be[0]) for al, be, ga in model.coeffs)
    eta = float(np.real(s_ab))
    s_ag_im = sum(float(np.imag(al[0] * np.conj(ga))) for al, be, ga in model.coeffs)
    s_bg_re = sum(float(np.real(be[0] * np.conj(ga))) for al, be, ga in model.coeffs)

    a = np.zeros((6, 6), dtype=complex)
    # labels: m0, mx, md, kin, ext, xd
    # d mx = -i md + (2 mu - eta) mx - Re(beta conj(gamma)) m0
    a[1, 2] = -1j
    a[1, 1] = 2 * mu - eta
    a[1, 0] = -s_bg_re
    # d md = -i conf mx - (2 mu + eta) md + i Im(alpha conj(gamma)) m0
    a[2, 1] = -1j * conf
    a[2, 2] = -(2 * mu + eta)
    a[2, 0] = 1j * s_ag_im
    # d kin = 1/2 |alpha|^2 m0 - (4 mu + 2 eta) kin + i conf (xd + m0/2)
    #         - i Im(alpha conj(gamma)) md
    a[3, 0] = 0.5 * s_aa + 0.5j * conf
    a[3, 3] = -(4 * mu + 2 * eta)
    a[3, 5] = 1j * conf
    a[3, 2] = -1j * s_ag_im
    # d ext = 1/2 |beta|^2 m0 + (4 mu - 2 eta) ext - i (xd + m0/2)
    #         - Re(beta conj(gamma)) mx
    a[4, 0] = 0.5 * s_bb - 0.5j
    a[4, 4] = 4 * mu - 2 * eta
    a[4, 5] = -1j
    a[4, 1] = -s_bg_re
    # d xd = 2i (kin - conf ext) - 2 eta xd - sum(alpha conj(beta)) m0
    #        + i Im(alpha conj(gamma)) mx - Re(beta conj(gamma)) md
    a[5, 3] = 2j
    a[5, 4] = -2j * conf
    a[5, 5] = -2 * eta
    a[5, 0] = -s_ab
    a[5, 1] = 1j * s_ag_im
    a[5, 2] = -s_bg_re
    return MomentSystem(matrix=a)
