"""Mollifier / cutoff machinery for trace-class approximation.

The pair (phi_n, chi_n) consists of the scaled bump

    phi_n(x) = n^d phi(n x),   phi(x) = exp(-1 / (1 - |x|^2)) on |x| < 1,

normalized to unit *discrete* integral, and a radially symmetric C-infinity
cutoff chi_n(x) = chi(|x| / n) with chi = 1 on [0, 1/2] and 0 beyond 1.
Truncating a state rho = sum_j w_j |psi_j><psi_j| to

    sigma_n = sum_j w_j |chi_n (phi_n * psi_j)><...|

keeps sigma_n >= 0 and contracts the trace: each vector norm can only
shrink (the convolution multiplier has modulus <= 1 because phi_n >= 0 sums
to one, and |chi_n| <= 1), so tr(sigma_n) <= tr(rho) holds exactly on the
grid, not just in the limit.  As n grows, sigma_n -> rho in trace norm, and
the operator norm of the convolution by x_1 phi_n decays like 1/n, which is
the quantitative engine behind the approximation argument.

Both a Gaussian mollifier (used by the particle-density definition in
`states`) and this compactly supported bump appear in the package; they play
different roles and are deliberately kept separate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import SpatialGrid
from .states import DensityState

__all__ = [
    "MollifierPair",
    "build_mollifier_pair",
    "mollify_truncate",
    "convolution_multiplier_norm",
    "x_bump_operator_norm",
]


def _bump(r2: np.ndarray) -> np.ndarray:
    """exp(-1/(1-r^2)) on r^2 < 1, zero outside; smooth at the edge."""
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def _smooth_step_down(s: np.ndarray) -> np.ndarray:
    """C-infinity transition 1 -> 0 on [0, 1]."""
    out = np.empty_like(s)
    out[s <= 0.0] = 1.0
    out[s >= 1.0] = 0.0
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    h_up = np.exp(-1.0 / sm)
    h_down = np.exp(-1.0 / (1.0 - sm))
    out[mid] = h_down / (h_up + h_down)
    return out


@dataclass
class MollifierPair:
    n: int
    grid: SpatialGrid
    phi_n: np.ndarray
    chi_n: np.ndarray


def build_mollifier_pair(grid: SpatialGrid, n: int) -> MollifierPair:
    if n < 1:
        raise ValueError("mollifier scale must be a positive integer")
    if 1.0 / n < 2.0 * grid.spacing:
        raise ValueError(
            f"mollifier scale n = {n} is not resolvable: support radius 1/n "
            f"must cover at least two cells (spacing {grid.spacing})"
        )
    r2 = grid.radius_squared()
    phi = _bump(r2 * n**2)
    total = phi.sum() * grid.cell_volume
    phi /= total
    chi = _smooth_step_down(2.0 * np.sqrt(r2) / n - 1.0)
    return MollifierPair(n=n, grid=grid, phi_n=phi, chi_n=chi)


def _periodic_convolve(kernel: np.ndarray, f: np.ndarray,
                       grid: SpatialGrid) -> np.ndarray:
    """(kernel * f)(x) with the bump centered at the origin of [-L, L)^d."""
    # the kernel is sampled on [-L, L); roll so its center sits at index 0
    centered = np.roll(kernel, shift=[-(grid.points // 2)] * grid.dim,
                       axis=tuple(range(grid.dim)))
    spec = np.fft.fftn(centered) * grid.cell_volume
    return np.fft.ifftn(np.fft.fftn(f) * spec)


def mollify_truncate(rho: DensityState, n: int) -> DensityState:
    """sigma_n with vectors chi_n (phi_n * psi_j); trace-contractive, PSD."""
    if not rho.has_ranks:
        raise ValueError("mollified truncation requires the rank form")
    pair = build_mollifier_pair(rho.grid, n)
    vectors = np.stack([
        pair.chi_n * _periodic_convolve(pair.phi_n, psi, rho.grid)
        for psi in rho.vectors
    ])
    return DensityState(grid=rho.grid, weights=rho.weights.copy(), vectors=vectors)


def convolution_multiplier_norm(kernel: np.ndarray, grid: SpatialGrid) -> float:
    """Operator norm of f -> kernel * f on the periodic grid.

    Convolution diagonalizes in the Fourier basis, so probing every Fourier
    mode gives the exact norm: max_k |FFT(kernel)(k)| * dx^d.
    """
    centered = np.roll(kernel, shift=[-(grid.points // 2)] * grid.dim,
                       axis=tuple(range(grid.dim)))
    spec = np.fft.fftn(centered) * grid.cell_volume
    return float(np.max(np.abs(spec)))


def x_bump_operator_norm(grid: SpatialGrid, n: int) -> float:
    """Norm of the convolution by x_1 phi_n; decays like 1/n."""
    pair = build_mollifier_pair(grid, n)
    x1 = grid.meshgrid()[0]
    return convolution_multiplier_norm(x1 * pair.phi_n, grid)
