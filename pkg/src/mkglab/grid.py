"""Periodic-box geometry, spectral transforms, and field containers.

Conventions: fields live on the n^3 lattice of [0, L)^3 and are expanded as
u(x) = sum_k c_k exp(i k.x) with k on the lattice (2*pi/L)*{-n/2..n/2-1}^3.
Forward transform returns the coefficients c_k in FFT layout; Parseval reads
(L^3/n^3) sum_x |u(x)|^2 = L^3 sum_k |c_k|^2.

Nonlinear products are evaluated on a 2x zero-padded grid and truncated back
to the resolved band |k| <= (2*pi/L)*(n//3), which keeps quadratic and cubic
products of band-limited fields alias-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

_FFT_WORKERS = -1


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, L)^3 with n points per axis."""

    n: int
    L: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8:
            raise ValueError(f"grid size n must be an integer >= 8, got {self.n!r}")
        if not _is_power_of_two(int(self.n)):
            raise ValueError(f"grid size n must be a power of two, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"box side L must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dk(self) -> float:
        """Wavenumber spacing 2*pi/L."""
        return 2.0 * np.pi / self.L

    @property
    def k_nyquist(self) -> float:
        return self.dk * (self.n / 2)

    @property
    def k_resolved(self) -> float:
        """Radius of the retained (dealiased) wavenumber band."""
        return self.dk * (self.n // 3)

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def volume(self) -> float:
        return self.L**3

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical coordinates, broadcastable (n,1,1), (1,n,1), (1,1,n)."""
        ax = np.arange(self.n) * self.dx
        return (
            ax.reshape(-1, 1, 1),
            ax.reshape(1, -1, 1),
            ax.reshape(1, 1, -1),
        )

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumber components in FFT layout, broadcastable shapes."""
        kax = sfft.fftfreq(self.n, d=1.0 / self.n) * self.dk
        return (
            kax.reshape(-1, 1, 1),
            kax.reshape(1, -1, 1),
            kax.reshape(1, 1, -1),
        )

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.k
        return kx**2 + ky**2 + kz**2

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def band_mask(self) -> np.ndarray:
        """Boolean mask of the resolved band |k| <= k_resolved."""
        return self.kabs <= self.k_resolved + 1e-12 * self.dk


def make_grid(n: int, L: float) -> Grid:
    """Build a periodic grid; rejects non-power-of-two or tiny n and L <= 0."""
    return Grid(int(n), float(L))


def transform(values: np.ndarray, direction: str) -> np.ndarray:
    """Spectral transform between physical samples and coefficients c_k.

    direction "fwd": physical samples -> coefficients (FFT layout).
    direction "inv": coefficients -> physical samples.
    """
    if direction == "fwd":
        return sfft.fftn(values, axes=(-3, -2, -1), workers=_FFT_WORKERS) / values.shape[-1] ** 3
    if direction == "inv":
        return sfft.ifftn(values, axes=(-3, -2, -1), workers=_FFT_WORKERS) * values.shape[-1] ** 3
    raise ValueError(f"direction must be 'fwd' or 'inv', got {direction!r}")


class ScalarField:
    """Complex scalar field on a Grid, stored as physical samples.

    Immutable by convention: operations return new fields. The spectrum is
    computed lazily and cached.
    """

    __slots__ = ("grid", "values", "_hat")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != (grid.n,) * 3:
            raise ValueError(f"field shape {values.shape} does not match grid n={grid.n}")
        self.grid = grid
        self.values = values
        self._hat = None

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros((grid.n,) * 3, dtype=np.complex128))

    @classmethod
    def from_hat(cls, grid: Grid, hat: np.ndarray) -> "ScalarField":
        f = cls(grid, transform(np.asarray(hat, dtype=np.complex128), "inv"))
        f._hat = np.asarray(hat, dtype=np.complex128)
        return f

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            self._hat = transform(self.values, "fwd")
        return self._hat

    def band_limit(self) -> "ScalarField":
        """Truncate to the resolved band."""
        return ScalarField.from_hat(self.grid, np.where(self.grid.band_mask, self.hat, 0.0))

    def mean(self) -> complex:
        return complex(self.values.mean())

    def real_part(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.real.astype(np.complex128))

    def conj(self) -> "ScalarField":
        return ScalarField(self.grid, np.conj(self.values))

    def l2(self) -> float:
        """Physical-space L^2 norm (quadrature)."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


class VectorField:
    """Three-component field; components are expected real in physical space."""

    __slots__ = ("grid", "values", "_hat")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != (3, grid.n, grid.n, grid.n):
            raise ValueError(f"vector field shape {values.shape} does not match grid n={grid.n}")
        self.grid = grid
        self.values = values
        self._hat = None

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((3,) + (grid.n,) * 3, dtype=np.complex128))

    @classmethod
    def from_components(cls, components) -> "VectorField":
        comps = list(components)
        grid = comps[0].grid
        return cls(grid, np.stack([c.values for c in comps]))

    @classmethod
    def from_hat(cls, grid: Grid, hat: np.ndarray) -> "VectorField":
        v = cls(grid, transform(np.asarray(hat, dtype=np.complex128), "inv"))
        v._hat = np.asarray(hat, dtype=np.complex128)
        return v

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            self._hat = transform(self.values, "fwd")
        return self._hat

    def component(self, j: int) -> ScalarField:
        return ScalarField(self.grid, self.values[j])

    def band_limit(self) -> "VectorField":
        return VectorField.from_hat(self.grid, np.where(self.grid.band_mask, self.hat, 0.0))

    def max_imag(self) -> float:
        return float(np.max(np.abs(self.values.imag)))

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def __add__(self, other):
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return VectorField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.values)


# ---------------------------------------------------------------------------
# Dealiased products


def _half_slices(n: int, m: int):
    """Matching (source, destination) index pairs between FFT layouts of
    size n and m >= n: positive frequencies at the front, negative at the
    back of each axis.
    """
    h = n // 2
    return ((slice(0, h), slice(0, h)), (slice(n - h, n), slice(m - h, m)))


def _pad_hat(hat: np.ndarray, n: int) -> np.ndarray:
    """Embed coefficients from the n^3 lattice into the 2n^3 lattice."""
    m = 2 * n
    big = np.zeros(hat.shape[:-3] + (m, m, m), dtype=np.complex128)
    pairs = _half_slices(n, m)
    for (sa, da) in pairs:
        for (sb, db) in pairs:
            for (sc, dc) in pairs:
                big[..., da, db, dc] = hat[..., sa, sb, sc]
    return big


def _crop_hat(hat: np.ndarray, n: int) -> np.ndarray:
    """Restrict coefficients from the 2n^3 lattice back to the n^3 lattice."""
    m = 2 * n
    small = np.zeros(hat.shape[:-3] + (n, n, n), dtype=np.complex128)
    pairs = _half_slices(n, m)
    for (sa, da) in pairs:
        for (sb, db) in pairs:
            for (sc, dc) in pairs:
                small[..., sa, sb, sc] = hat[..., da, db, dc]
    return small


def pad_to_fine(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Physical samples on the 2x refined grid of a band-limited field."""
    hat = transform(values, "fwd")
    return transform(_pad_hat(hat, grid.n), "inv")


def pad_hat_to_fine(grid: Grid, hat: np.ndarray) -> np.ndarray:
    """Like pad_to_fine but starting from known coefficients."""
    return transform(_pad_hat(hat, grid.n), "inv")


def fine_to_coarse(grid: Grid, fine_values: np.ndarray) -> np.ndarray:
    """Transform fine-grid samples back, truncating to the resolved band."""
    hat = _crop_hat(transform(fine_values, "fwd"), grid.n)
    return transform(np.where(grid.band_mask, hat, 0.0), "inv")


def fine_to_coarse_hat(grid: Grid, fine_values: np.ndarray) -> np.ndarray:
    """Coefficients of the band-truncated coarse restriction of fine samples."""
    hat = _crop_hat(transform(fine_values, "fwd"), grid.n)
    return np.where(grid.band_mask, hat, 0.0)


def dealiased_product(grid: Grid, *factors: np.ndarray) -> np.ndarray:
    """Pointwise product of band-limited fields, alias-free, band-truncated.

    Accepts physical-sample arrays; with 2x padding the result is exact for
    up to cubic products of resolved-band fields.
    """
    if not factors:
        raise ValueError("need at least one factor")
    fine = pad_to_fine(grid, factors[0])
    for f in factors[1:]:
        fine = fine * pad_to_fine(grid, f)
    return fine_to_coarse(grid, fine)
