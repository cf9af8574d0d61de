"""Elliptic constraints: the scalar potential solve, its variational
functional, the potential's time derivative, and compatible initial data.

All nonlinear terms are evaluated on the 2x fine grid and truncated to the
resolved band exactly once, so that the operator applied by CG and the
residuals checked afterwards agree to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    ScalarField,
    VectorField,
    fine_to_coarse,
    pad_hat_to_fine,
    pad_to_fine,
    transform,
)
from .state import GaugeState
from .symbols import divergence, gradient, laplacian, leray_project


@dataclass(frozen=True)
class EllipticConfig:
    cg_tol: float = 1e-10
    cg_max_iter: int = 500

    def __post_init__(self):
        if not 0.0 < self.cg_tol < 1.0:
            raise ValueError(f"cg_tol must lie in (0,1), got {self.cg_tol}")
        if self.cg_max_iter < 1:
            raise ValueError(f"cg_max_iter must be >= 1, got {self.cg_max_iter}")


class EllipticError(RuntimeError):
    """CG failed to reach the requested residual within the iteration cap."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def solve_a0(
    phi: ScalarField,
    phi_t: ScalarField,
    config: EllipticConfig = EllipticConfig(),
    rhs: ScalarField | None = None,
    history: list | None = None,
    phi2_fine: np.ndarray | None = None,
    x0: np.ndarray | None = None,
) -> ScalarField:
    """Solve (-Laplace + |phi|^2) A0 = Im(phi conj(phi_t)) by preconditioned CG.

    The operator uses the spectral Laplacian and fine-grid multiplication by
    |phi|^2; the preconditioner is (-Laplace + mean|phi|^2)^(-1), diagonal in
    Fourier space. When |phi|^2 vanishes identically the problem reduces to a
    Poisson equation: the right side must then be mean-free and the solution
    is normalized to zero mean.

    rhs overrides the default right side (used for manufactured solutions);
    history, if given, collects the CG quadratic-form values per iteration.
    """
    grid = phi.grid
    if phi2_fine is None or rhs is None:
        phi_fine = pad_to_fine(grid, phi.values)
    if phi2_fine is None:
        phi2_fine = (phi_fine * np.conj(phi_fine)).real
    if rhs is not None:
        f = np.asarray(rhs.values, dtype=np.complex128)
    else:
        phit_fine = pad_to_fine(grid, phi_t.values)
        f = fine_to_coarse(grid, phi_fine * np.conj(phit_fine)).imag.astype(np.complex128)

    phi2_mean = float(phi2_fine.mean())
    pure_poisson = np.max(np.abs(phi2_fine)) == 0.0

    f_norm = float(np.sqrt(np.sum(np.abs(f) ** 2)))
    if f_norm == 0.0:
        return ScalarField.zeros(grid)

    if pure_poisson:
        mean_amp = abs(f.mean())
        if mean_amp > 1e-12 * np.max(np.abs(f)):
            raise EllipticError(
                "Poisson right side has nonzero mean "
                f"({mean_amp:.3e}); no periodic solution exists",
                residual=float("inf"),
            )
        f = f - f.mean()

    k2 = grid.k2
    precond_diag = k2 + max(phi2_mean, 0.0)
    precond_diag.flat[0] = max(phi2_mean, 1.0)

    def op(x: np.ndarray) -> np.ndarray:
        xh = transform(x, "fwd")
        lap = transform(k2 * xh, "inv")
        if pure_poisson:
            return lap
        return lap + fine_to_coarse(grid, phi2_fine * pad_hat_to_fine(grid, xh))

    def precond(r: np.ndarray) -> np.ndarray:
        rh = transform(r, "fwd") / precond_diag
        if pure_poisson:
            rh.flat[0] = 0.0
        return transform(rh, "inv")

    if x0 is not None:
        x = np.asarray(x0, dtype=np.complex128).copy()
        r = f - op(x)
    else:
        x = np.zeros_like(f)
        r = f.copy()
    z = precond(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    res = float(np.sqrt(np.sum(np.abs(r) ** 2)))
    for _ in range(config.cg_max_iter):
        if res / f_norm <= config.cg_tol:
            break
        Ap = op(p)
        alpha = rz / np.vdot(p, Ap).real
        x = x + alpha * p
        r = r - alpha * Ap
        if history is not None:
            # quadratic form 1/2 <x, Ax> - <f, x>, monotone along CG iterates
            history.append(float(0.5 * np.vdot(x, op(x)).real - np.vdot(f, x).real))
        res = float(np.sqrt(np.sum(np.abs(r) ** 2)))
        z = precond(r)
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    if res / f_norm > config.cg_tol:
        raise EllipticError(
            f"CG did not converge within {config.cg_max_iter} iterations "
            f"(relative residual {res / f_norm:.3e})",
            residual=res / f_norm,
        )
    if pure_poisson:
        x = x - x.mean()
    return ScalarField(grid, x.real.astype(np.complex128))


def a0_functional(A0: ScalarField, phi: ScalarField, phi_t: ScalarField) -> float:
    """Renormalized convex functional whose unique minimizer solves the
    potential equation; vanishes at A0 = 0 and is <= 0 at the minimizer.
    """
    grid = A0.grid
    grad = gradient(A0)
    a_fine = pad_to_fine(grid, A0.values).real
    phi_fine = pad_to_fine(grid, phi.values)
    phit_fine = pad_to_fine(grid, phi_t.values)
    g_fine = (phi_fine * np.conj(phit_fine)).imag
    phi2_fine = (phi_fine * np.conj(phi_fine)).real
    fine_cell = (grid.dx / 2.0) ** 3
    quad = float(
        np.sum(-a_fine * g_fine + 0.5 * a_fine * a_fine * phi2_fine) * fine_cell
    )
    grad_sq = float(0.5 * np.sum(np.abs(grad.values) ** 2) * grid.cell_volume)
    return grad_sq + quad


def solve_a0_t(
    phi: ScalarField,
    phi_t: ScalarField,
    A: VectorField,
    phi_fine: np.ndarray | None = None,
    phi2_fine: np.ndarray | None = None,
    grad_phi_fine: np.ndarray | None = None,
    A_fine: np.ndarray | None = None,
) -> ScalarField:
    """Recover dt A0 from grad(dt A0) = -(1-P) Im(phi grad(conj phi)) + (1-P)(A |phi|^2).

    The right side is curl-free by construction; inversion is diagonal in
    Fourier space with the zero mode set to 0.
    """
    grid = phi.grid
    if phi_fine is None:
        phi_fine = pad_to_fine(grid, phi.values)
    if phi2_fine is None:
        phi2_fine = (phi_fine * np.conj(phi_fine)).real
    if grad_phi_fine is None:
        kx, ky, kz = grid.k
        ph = phi.hat
        grad_phi_fine = pad_hat_to_fine(
            grid, np.stack([1j * kx * ph, 1j * ky * ph, 1j * kz * ph])
        )
    if A_fine is None:
        A_fine = pad_hat_to_fine(grid, A.hat).real
    fine = -(phi_fine[None] * np.conj(grad_phi_fine)).imag + A_fine.real * phi2_fine
    F = VectorField(grid, fine_to_coarse(grid, fine.astype(np.complex128)))
    F_cf = F - leray_project(F)
    kx, ky, kz = grid.k
    k2 = grid.k2
    fh = F_cf.hat
    with np.errstate(divide="ignore", invalid="ignore"):
        a0t_hat = np.where(
            k2 > 0,
            -1j * (kx * fh[0] + ky * fh[1] + kz * fh[2]) / np.where(k2 > 0, k2, 1.0),
            0.0,
        )
    return ScalarField.from_hat(grid, a0t_hat).real_part()


def init_compatible(
    phi0: ScalarField,
    phi_t0: ScalarField,
    A_raw: VectorField,
    A_t_raw: VectorField,
    config: EllipticConfig = EllipticConfig(),
    time: float = 0.0,
) -> GaugeState:
    """Build a state satisfying the constraint equations.

    A and dt A are the divergence-free parts of the inputs; A0 solves the
    potential equation; dt A0 comes from the covariant current Im(phi conj(D phi))
    expanded with the projected A.
    """
    phi0 = phi0.band_limit()
    phi_t0 = phi_t0.band_limit()
    A = leray_project(A_raw.band_limit())
    A_t = leray_project(A_t_raw.band_limit())
    A0 = solve_a0(phi0, phi_t0, config)
    A0_t = solve_a0_t(phi0, phi_t0, A)
    return GaugeState(A0=A0, A0_t=A0_t, A=A, A_t=A_t, phi=phi0, phi_t=phi_t0, time=time)


def compatibility_residuals(state: GaugeState) -> dict:
    """Relative residuals of the three constraint lines (diagnostic).

    Nonlinear terms use the same fine-grid evaluation as the solvers.
    """
    grid = state.grid

    def rel(lhs: float, diff: float) -> float:
        return diff / max(lhs, 1e-300)

    div_a = rel(state.A.l2(), divergence(state.A).l2()) if state.A.l2() > 0 else 0.0
    div_at = rel(state.A_t.l2(), divergence(state.A_t).l2()) if state.A_t.l2() > 0 else 0.0

    phi_fine = pad_to_fine(grid, state.phi.values)
    phi2_fine = (phi_fine * np.conj(phi_fine)).real
    phit_fine = pad_to_fine(grid, state.phi_t.values)
    a0_fine = pad_to_fine(grid, state.A0.values).real

    # second line: Laplace A0 = -Im(phi conj(phi_t)) + A0 |phi|^2
    lap = laplacian(state.A0)
    rhs2_fine = -(phi_fine * np.conj(phit_fine)).imag + a0_fine * phi2_fine
    rhs2 = ScalarField(grid, fine_to_coarse(grid, rhs2_fine.astype(np.complex128)))
    r2 = rel(max(lap.l2(), rhs2.l2(), 1e-300), (lap - rhs2).l2())

    # third line: grad(dt A0) = -(1-P) Im(phi conj(grad phi)) + (1-P)(A |phi|^2)
    grad_phi = gradient(state.phi)
    comps = []
    for j in range(3):
        dj_fine = pad_to_fine(grid, grad_phi.values[j])
        aj_fine = pad_to_fine(grid, state.A.values[j]).real
        fine = -(phi_fine * np.conj(dj_fine)).imag + aj_fine * phi2_fine
        comps.append(fine_to_coarse(grid, fine.astype(np.complex128)))
    F = VectorField(grid, np.stack(comps))
    rhs3 = F - leray_project(F)
    lhs3 = gradient(state.A0_t)
    r3 = rel(max(lhs3.l2(), rhs3.l2(), 1e-300), (lhs3 - rhs3).l2())
    return {"div_A": div_a, "div_A_t": div_at, "a0_eq": r2, "a0t_eq": r3}
