"""Fourier multiplier symbols: Riesz, fractional derivatives, band cutoffs,
the smoothing multiplier used by the almost-conservation experiments, and the
Leray projection.

Zero-mode conventions: riesz and homogeneous |k|^a (a != 0) send k=0 to 0;
the Leray projection is the identity on the zero mode (constants are
divergence-free); band cutoffs keep it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, VectorField

_LOG2 = np.log(2.0)


def i_symbol_values(kabs: np.ndarray, s: float, N: float) -> np.ndarray:
    """Radial smoothing symbol: 1 below N, (|k|/N)^(s-1) above 2N.

    On N < |k| < 2N the symbol is a monotone C^1 cubic in log-log variables
    matching both closed forms and their logarithmic slopes at the endpoints.
    """
    kabs = np.asarray(kabs, dtype=np.float64)
    m = np.ones_like(kabs)
    hi = kabs >= 2.0 * N
    m[hi] = (kabs[hi] / N) ** (s - 1.0)
    mid = (kabs > N) & ~hi
    t = np.log(kabs[mid] / N) / _LOG2  # in (0, 1)
    m[mid] = np.exp((s - 1.0) * _LOG2 * t**2 * (2.0 - t))
    return m


@dataclass(frozen=True)
class Symbol:
    """Per-wavenumber multiplier table on a grid's lattice.

    kind "leray" stores the projection implicitly (applied matrix-wise);
    all other kinds store a scalar table m(k).
    """

    grid: Grid
    kind: str
    params: tuple
    table: np.ndarray | None


def make_symbol(grid: Grid, kind: str, **params) -> Symbol:
    kabs = grid.kabs
    if kind == "riesz":
        j = int(params["j"])
        if j not in (0, 1, 2):
            raise ValueError(f"riesz component must be 0, 1 or 2, got {j}")
        kj = np.broadcast_to(grid.k[j], kabs.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            table = np.where(kabs > 0, kj / np.where(kabs > 0, kabs, 1.0), 0.0)
        return Symbol(grid, kind, (j,), table)
    if kind == "frac_hom":
        a = float(params["a"])
        with np.errstate(divide="ignore"):
            table = np.where(kabs > 0, np.where(kabs > 0, kabs, 1.0) ** a, 0.0)
        if a == 0.0:
            table = np.ones_like(kabs)
        return Symbol(grid, kind, (a,), table)
    if kind == "frac_inhom":
        a = float(params["a"])
        return Symbol(grid, kind, (a,), (1.0 + kabs**2) ** (a / 2.0))
    if kind == "i_op":
        s, N = float(params["s"]), float(params["N"])
        if not 0.5 < s < 1.0:
            raise ValueError(f"i_op exponent s must lie in (1/2, 1), got {s}")
        if N < 1.0:
            raise ValueError(f"i_op threshold N must be >= 1, got {N}")
        return Symbol(grid, kind, (s, N), i_symbol_values(kabs, s, N))
    if kind == "band":
        R = float(params["R"])
        if R <= 0:
            raise ValueError(f"band radius R must be positive, got {R}")
        return Symbol(grid, kind, (R,), (kabs <= R + 1e-12 * grid.dk).astype(np.float64))
    if kind == "leray":
        return Symbol(grid, kind, (), None)
    raise ValueError(f"unknown symbol kind {kind!r}")


def apply_symbol(field, symbol: Symbol):
    """Multiply spectral coefficients pointwise by the symbol table."""
    if field.grid is not symbol.grid and (
        field.grid.n != symbol.grid.n or field.grid.L != symbol.grid.L
    ):
        raise ValueError("field and symbol live on different grids")
    if symbol.kind == "leray":
        if not isinstance(field, VectorField):
            raise TypeError("leray projection applies to vector fields")
        return leray_project(field)
    if isinstance(field, ScalarField):
        return ScalarField.from_hat(field.grid, field.hat * symbol.table)
    if isinstance(field, VectorField):
        return VectorField.from_hat(field.grid, field.hat * symbol.table)
    raise TypeError(f"cannot apply symbol to {type(field)!r}")


def leray_project(v: VectorField) -> VectorField:
    """Project onto divergence-free fields: P(k) = Id - k k^T/|k|^2, P(0) = Id."""
    grid = v.grid
    kx, ky, kz = grid.k
    hat = v.hat
    k2 = grid.k2
    with np.errstate(divide="ignore", invalid="ignore"):
        kdotv = kx * hat[0] + ky * hat[1] + kz * hat[2]
        scale = np.where(k2 > 0, kdotv / np.where(k2 > 0, k2, 1.0), 0.0)
    out = hat.copy()
    out[0] -= kx * scale
    out[1] -= ky * scale
    out[2] -= kz * scale
    return VectorField.from_hat(grid, out)


def gradient(f: ScalarField) -> VectorField:
    """Spectral gradient of a scalar field."""
    kx, ky, kz = f.grid.k
    hat = f.hat
    return VectorField.from_hat(
        f.grid, np.stack([1j * kx * hat, 1j * ky * hat, 1j * kz * hat])
    )


def divergence(v: VectorField) -> ScalarField:
    kx, ky, kz = v.grid.k
    hat = v.hat
    return ScalarField.from_hat(v.grid, 1j * (kx * hat[0] + ky * hat[1] + kz * hat[2]))


def curl(v: VectorField) -> VectorField:
    kx, ky, kz = v.grid.k
    hat = v.hat
    return VectorField.from_hat(
        v.grid,
        np.stack(
            [
                1j * (ky * hat[2] - kz * hat[1]),
                1j * (kz * hat[0] - kx * hat[2]),
                1j * (kx * hat[1] - ky * hat[0]),
            ]
        ),
    )


def laplacian(f):
    if isinstance(f, ScalarField):
        return ScalarField.from_hat(f.grid, -f.grid.k2 * f.hat)
    return VectorField.from_hat(f.grid, -f.grid.k2 * f.hat)
