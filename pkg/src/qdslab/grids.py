"""Uniform tensor grids for position space and their FFT-dual velocity grids.

All spatial grids are uniform with per-axis domain [-L, L) and an even number
of points N, so x_i = -L + i * (2L/N).  The velocity grid attached to a Wigner
function is not free: the discrete transform pairs the kernel's difference
variable y (spacing dx, extent [-L, L)) with xi, which forces the spacing
dxi = pi / L.  Users cannot desynchronize the two grids; the xi axis is always
derived from the spatial one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """Tensor grid on [-extent, extent)^dim with `points` nodes per axis."""

    dim: int
    points: int
    extent: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if self.points < 4 or self.points % 2 != 0:
            raise ValueError("points per axis must be an even integer >= 4")
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise ValueError("extent must be positive and finite")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis(self) -> np.ndarray:
        """Per-axis coordinates x_i = -L + i*dx."""
        return -self.extent + self.spacing * np.arange(self.points)

    def axis_fine(self) -> np.ndarray:
        """Coordinates of the doubled (half-spacing) axis used for half-grid sampling."""
        return -self.extent + 0.5 * self.spacing * np.arange(2 * self.points)

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        ax = self.axis()
        return np.meshgrid(*([ax] * self.dim), indexing="ij")

    def radius_squared(self) -> np.ndarray:
        mesh = self.meshgrid()
        return sum(c**2 for c in mesh)

    def wavenumbers(self) -> np.ndarray:
        """Per-axis FFT wavenumbers (fft order) for spectral derivatives."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Discrete L^2 inner product <f, g> = dx^d * sum(conj(f) g)."""
        return self.cell_volume * np.vdot(f, g)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f).real))

    def integrate(self, f: np.ndarray) -> float | complex:
        total = self.cell_volume * f.sum()
        return total.real if np.isrealobj(f) else total


@dataclass(frozen=True)
class VelocityGrid:
    """FFT-dual velocity axis: spacing pi/L, same point count as the x axis."""

    dim: int
    points: int
    spacing: float

    @property
    def extent(self) -> float:
        return 0.5 * self.points * self.spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis(self) -> np.ndarray:
        return -self.extent + self.spacing * np.arange(self.points)


def dual_velocity_grid(grid: SpatialGrid) -> VelocityGrid:
    return VelocityGrid(dim=grid.dim, points=grid.points, spacing=np.pi / grid.extent)
