"""Gauge-field dynamics: right-hand sides, RK4 time stepping, the conserved
energy, its exact first variation, and the scaling transform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticConfig, solve_a0, solve_a0_t
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    fine_to_coarse,
    pad_hat_to_fine,
    pad_to_fine,
)
from .norms import bracket_norm
from .state import GaugeState
from .symbols import divergence, gradient, laplacian, leray_project


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_end: float
    reproject_every: int = 1
    cfl_factor: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.reproject_every < 0:
            raise ValueError("reproject_every must be >= 0 (0 disables)")

    def check_cfl(self, grid: Grid) -> None:
        limit = self.cfl_factor * grid.dx
        if self.dt > limit + 1e-15:
            raise ValueError(
                f"CFL violation: dt={self.dt} exceeds {self.cfl_factor}*dx={limit:.6g}"
            )


@dataclass(frozen=True)
class Nonlinearities:
    """The bilinear/trilinear building blocks of the equations.

    N0: (vector, scalar) pair -- the projected current and the transport term.
    N1: pair ((dt A0)*Ubar, A0*dt Ubar) over the dynamic components (A, phi).
    N2: tensor Ubar_a * d_j Ubar_b, indexed [a, b, j] over (A1, A2, A3, phi).
    N3: cubic tensor over unordered component triples of (A0, A, phi).
    """

    N0: tuple
    N1: tuple
    N2: np.ndarray
    N2_labels: tuple
    N3: dict


def null_form_q(phi: ScalarField, psi: ScalarField) -> np.ndarray:
    """Antisymmetric null-form tensor Q_jk = dj(phi) dk(psi) - dk(phi) dj(psi).

    Returns an array of shape (3, 3, n, n, n); products are alias-free.
    """
    grid = phi.grid
    gp = [pad_to_fine(grid, c) for c in gradient(phi).values]
    gq = [pad_to_fine(grid, c) for c in gradient(psi).values]
    out = np.zeros((3, 3) + (grid.n,) * 3, dtype=np.complex128)
    for j in range(3):
        for k in range(j + 1, 3):
            q = fine_to_coarse(grid, gp[j] * gq[k] - gp[k] * gq[j])
            out[j, k] = q
            out[k, j] = -q
    return out


def _dyn_components(state: GaugeState):
    """The dynamic fields (A1, A2, A3, phi) with labels."""
    comps = [(f"A{j+1}", state.A.component(j)) for j in range(3)]
    comps.append(("phi", state.phi))
    return comps


def nonlinearities(state: GaugeState) -> Nonlinearities:
    """Evaluate the caricature nonlinearities on a state, alias-free."""
    grid = state.grid
    phi_f = pad_to_fine(grid, state.phi.values)
    grad_phi = gradient(state.phi)
    grad_phi_f = [pad_to_fine(grid, c) for c in grad_phi.values]
    A_f = [pad_to_fine(grid, c).real for c in state.A.values]
    a0_f = pad_to_fine(grid, state.A0.values).real
    a0t_f = pad_to_fine(grid, state.A0_t.values).real

    # N0 = (P Im(phi grad conj(phi)), P(A) . grad phi); A is kept projected.
    current = VectorField(
        grid,
        np.stack(
            [
                fine_to_coarse(grid, (phi_f * np.conj(grad_phi_f[j])).imag.astype(complex))
                for j in range(3)
            ]
        ),
    )
    n0_vec = leray_project(current)
    transport = fine_to_coarse(grid, sum(A_f[j] * grad_phi_f[j] for j in range(3)))
    n0_scal = ScalarField(grid, transport)

    # N1 = ((dt A0) Ubar, A0 dt Ubar) over Ubar = (A, phi)
    dyn = _dyn_components(state)
    dyn_t = [(f"A{j+1}_t", state.A_t.component(j)) for j in range(3)]
    dyn_t.append(("phi_t", state.phi_t))
    n1_first = {
        name: ScalarField(grid, fine_to_coarse(grid, a0t_f * pad_to_fine(grid, f.values)))
        for name, f in dyn
    }
    n1_second = {
        name: ScalarField(grid, fine_to_coarse(grid, a0_f * pad_to_fine(grid, f.values)))
        for name, f in dyn_t
    }

    # N2 tensor: Ubar_a d_j Ubar_b
    labels = tuple(name for name, _ in dyn)
    comp_f = [pad_to_fine(grid, f.values) for _, f in dyn]
    grad_f = [[pad_to_fine(grid, c) for c in gradient(f).values] for _, f in dyn]
    n2 = np.zeros((4, 4, 3) + (grid.n,) * 3, dtype=np.complex128)
    for a in range(4):
        for b in range(4):
            for j in range(3):
                n2[a, b, j] = fine_to_coarse(grid, comp_f[a] * grad_f[b][j])

    # N3 cubic tensor over unordered triples of Phi = (A0, A, phi)
    full = [("A0", a0_f)] + [(f"A{j+1}", A_f[j].astype(complex)) for j in range(3)]
    full.append(("phi", phi_f))
    n3 = {}
    for i in range(5):
        for j in range(i, 5):
            for k in range(j, 5):
                key = (full[i][0], full[j][0], full[k][0])
                n3[key] = fine_to_coarse(grid, full[i][1] * full[j][1] * full[k][1])

    return Nonlinearities(
        N0=(n0_vec, n0_scal),
        N1=(n1_first, n1_second),
        N2=n2,
        N2_labels=labels,
        N3=n3,
    )


def rhs(
    state: GaugeState,
    config: EllipticConfig = EllipticConfig(),
    a0_guess: np.ndarray | None = None,
    resolve_elliptic: bool = True,
):
    """Second time derivatives (A_tt, phi_tt) of the hyperbolic fields.

    Solves the elliptic constraints for (A0, dt A0) from (phi, phi_t, A)
    unless resolve_elliptic is False, in which case the stored values are
    trusted. Returns (A_tt, phi_tt, A0, A0_t).
    """
    grid = state.grid
    kx, ky, kz = grid.k
    ph = state.phi.hat
    phi_f = pad_hat_to_fine(grid, ph)
    phit_f = pad_hat_to_fine(grid, state.phi_t.hat)
    phi2_f = (phi_f * np.conj(phi_f)).real
    grad_phi_f = pad_hat_to_fine(
        grid, np.stack([1j * kx * ph, 1j * ky * ph, 1j * kz * ph])
    )
    A_f = pad_hat_to_fine(grid, state.A.hat).real

    if resolve_elliptic:
        f_a0 = fine_to_coarse(grid, phi_f * np.conj(phit_f)).imag.astype(np.complex128)
        A0 = solve_a0(
            state.phi,
            state.phi_t,
            config,
            rhs=ScalarField(grid, f_a0),
            phi2_fine=phi2_f,
            x0=a0_guess,
        )
        A0_t = solve_a0_t(
            state.phi,
            state.phi_t,
            state.A,
            phi_fine=phi_f,
            phi2_fine=phi2_f,
            grad_phi_fine=grad_phi_f,
            A_fine=A_f,
        )
    else:
        A0, A0_t = state.A0, state.A0_t

    a0_f = pad_hat_to_fine(grid, A0.hat).real
    a0t_f = pad_hat_to_fine(grid, A0_t.hat).real
    A2_f = A_f[0] * A_f[0] + A_f[1] * A_f[1] + A_f[2] * A_f[2]

    # wave part of the connection: Box A = -P Im(phi grad conj phi) + P(A|phi|^2)
    fine = (phi_f[None] * np.conj(grad_phi_f)).imag - A_f * phi2_f
    A_tt = laplacian(state.A) + leray_project(
        VectorField(grid, fine_to_coarse(grid, fine.astype(np.complex128)))
    )

    # wave part of the scalar:
    # phi_tt = Lap phi + 2i A.grad phi - 2i A0 phi_t - i (dt A0) phi - |A|^2 phi + A0^2 phi
    fine = (
        2j * sum(A_f[j] * grad_phi_f[j] for j in range(3))
        - 2j * a0_f * phit_f
        - 1j * a0t_f * phi_f
        - A2_f * phi_f
        + a0_f * a0_f * phi_f
    )
    phi_tt = laplacian(state.phi) + ScalarField(grid, fine_to_coarse(grid, fine))
    return A_tt, phi_tt, A0, A0_t


def hamiltonian(state: GaugeState) -> float:
    """Conserved energy: electric, magnetic, and covariant kinetic/gradient
    densities integrated over the box (fine-grid quadrature, alias-free).
    """
    grid = state.grid
    fine_cell = (grid.dx / 2.0) ** 3

    grad_a0 = gradient(state.A0)
    electric = np.stack(
        [pad_to_fine(grid, grad_a0.values[j] - state.A_t.values[j]).real for j in range(3)]
    )
    from .symbols import curl

    magnetic = np.stack([pad_to_fine(grid, c).real for c in curl(state.A).values])

    phi_f = pad_to_fine(grid, state.phi.values)
    phit_f = pad_to_fine(grid, state.phi_t.values)
    a0_f = pad_to_fine(grid, state.A0.values).real
    d0phi = phit_f + 1j * a0_f * phi_f

    grad_phi = gradient(state.phi)
    dphi_sq = np.zeros_like(phi_f.real)
    for j in range(3):
        dj = pad_to_fine(grid, grad_phi.values[j]) + 1j * pad_to_fine(grid, state.A.values[j]).real * phi_f
        dphi_sq += np.abs(dj) ** 2

    density = (
        0.5 * np.sum(electric**2)
        + 0.5 * np.sum(magnetic**2)
        + 0.5 * np.sum(np.abs(d0phi) ** 2)
        + 0.5 * np.sum(dphi_sq)
    )
    return float(density * fine_cell)


@dataclass(frozen=True)
class StateDot:
    """Time derivatives along an arbitrary path, for the first variation.

    First derivatives of (A0, A, phi) are read from the state itself; this
    carries the second derivatives (and optionally the second derivative of
    A0, which the variation formula does not need).
    """

    A_tt: VectorField
    phi_tt: ScalarField
    A0_tt: ScalarField | None = None


def first_variation(state: GaugeState, state_dot: StateDot) -> float:
    """Exact time derivative of the energy along an arbitrary field path.

    Evaluates the curvature/covariant-derivative expression; it vanishes on
    solutions and equals d/dt of hamiltonian() along any smooth path.
    """
    grid = state.grid
    fine_cell = (grid.dx / 2.0) ** 3

    grad_a0 = gradient(state.A0)
    grad_a0t = gradient(state.A0_t)
    lap_A = laplacian(state.A)
    div_A = divergence(state.A)
    grad_div_A = gradient(div_A)

    phi_f = pad_to_fine(grid, state.phi.values)
    phit_f = pad_to_fine(grid, state.phi_t.values)
    phitt_f = pad_to_fine(grid, state_dot.phi_tt.values)
    a0_f = pad_to_fine(grid, state.A0.values).real
    a0t_f = pad_to_fine(grid, state.A0_t.values).real
    A_f = np.stack([pad_to_fine(grid, c).real for c in state.A.values])
    grad_phi_f = np.stack([pad_to_fine(grid, c) for c in gradient(state.phi).values])
    div_A_f = pad_to_fine(grid, div_A.values)

    total = 0.0
    # field-strength block: sum_j <F_j0, -dtt A_j + dj(dt A0) + Lap A_j - dj div A + Im(phi conj(Dj phi))>
    for j in range(3):
        Fj0 = pad_to_fine(grid, grad_a0.values[j] - state.A_t.values[j]).real
        linear = (
            -state_dot.A_tt.values[j]
            + grad_a0t.values[j]
            + lap_A.values[j]
            - grad_div_A.values[j]
        )
        G = pad_to_fine(grid, linear).real
        dj_phi = grad_phi_f[j] + 1j * A_f[j] * phi_f
        G = G + (phi_f * np.conj(dj_phi)).imag
        total += np.sum(Fj0 * G)

    # scalar block: <D0 phi, D0 D0 phi - sum_j Dj Dj phi>
    d0phi = phit_f + 1j * a0_f * phi_f
    d0d0 = phitt_f + 1j * a0t_f * phi_f + 2j * a0_f * phit_f - a0_f * a0_f * phi_f
    lap_phi_f = pad_to_fine(grid, laplacian(state.phi).values)
    A2_f = sum(A_f[j] * A_f[j] for j in range(3))
    A_dot_grad = sum(A_f[j] * grad_phi_f[j] for j in range(3))
    djdj = lap_phi_f + 2j * A_dot_grad + 1j * div_A_f * phi_f - A2_f * phi_f
    total += np.sum((d0phi * np.conj(d0d0 - djdj)).real)

    return float(total * fine_cell)


def step(
    state: GaugeState,
    cfg: StepConfig,
    ell: EllipticConfig = EllipticConfig(),
) -> GaugeState:
    """One classical RK4 step on (A, A_t, phi, phi_t) with elliptic re-solve
    per stage. A0 and dt A0 in the returned state are freshly solved.
    """
    cfg.check_cfl(state.grid)
    return _rk4(state, cfg.dt, ell)


def _rk4(state: GaugeState, dt: float, ell: EllipticConfig) -> GaugeState:
    grid = state.grid

    a0_cache = {"x0": state.A0.values}

    def deriv(A, A_t, phi, phi_t):
        st = GaugeState(
            A0=state.A0, A0_t=state.A0_t, A=A, A_t=A_t, phi=phi, phi_t=phi_t, time=0.0
        )
        A_tt, phi_tt, A0, A0_t = rhs(st, ell, a0_guess=a0_cache["x0"])
        a0_cache["x0"] = A0.values
        return (A_t, A_tt, phi_t, phi_tt, A0, A0_t)

    y = (state.A, state.A_t, state.phi, state.phi_t)
    k1 = deriv(*y)
    k2 = deriv(*(y[i] + 0.5 * dt * k1[i] for i in range(4)))
    k3 = deriv(*(y[i] + 0.5 * dt * k2[i] for i in range(4)))
    k4 = deriv(*(y[i] + dt * k3[i] for i in range(4)))
    new = [
        y[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(4)
    ]
    A, A_t, phi, phi_t = new
    if np.isnan(A.values).any() or np.isnan(phi.values).any():
        raise FloatingPointError(
            f"NaN detected in fields at t={state.time + dt:.6g}; "
            "reduce dt or the data amplitude"
        )
    A0 = solve_a0(phi, phi_t, ell, x0=a0_cache["x0"])
    A0_t = solve_a0_t(phi, phi_t, A)
    return GaugeState(
        A0=A0, A0_t=A0_t, A=A, A_t=A_t, phi=phi, phi_t=phi_t, time=state.time + dt
    )


@dataclass
class Trajectory:
    """Scalar diagnostics along an evolution."""

    times: list = field(default_factory=list)
    hamiltonians: list = field(default_factory=list)
    div_a_rel: list = field(default_factory=list)
    bracket: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    bracket_s: float = 1.0
    final_state: GaugeState | None = None

    def record(self, state: GaugeState) -> None:
        self.times.append(state.time)
        self.hamiltonians.append(hamiltonian(state))
        a_norm = state.A.l2()
        self.div_a_rel.append(
            divergence(state.A).l2() / a_norm if a_norm > 0 else 0.0
        )
        self.bracket.append(bracket_norm(state, self.bracket_s))
        self.mass.append(state.phi.l2())

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(["t", "H", "divA_rel", "bracket_norm_s", "mass_L2_phi"])
            for row in zip(self.times, self.hamiltonians, self.div_a_rel, self.bracket, self.mass):
                writer.writerow([f"{v:.16g}" for v in row])


def evolve(
    state: GaugeState,
    cfg: StepConfig,
    ell: EllipticConfig = EllipticConfig(),
    observer=None,
    observe_every: int = 1,
    bracket_s: float = 1.0,
    snapshot_cb=None,
    snapshot_stride: int = 0,
) -> Trajectory:
    """Advance to t_end, recording diagnostics each step.

    observer(state, step_index) runs every observe_every steps (and at t=0);
    snapshot_cb(state) runs every snapshot_stride steps when the stride is
    positive. A and dt A are re-projected every reproject_every steps.
    """
    cfg.check_cfl(state.grid)
    n_steps = int(round((cfg.t_end - state.time) / cfg.dt))
    traj = Trajectory(bracket_s=bracket_s)
    traj.record(state)
    if observer is not None:
        observer(state, 0)
    if snapshot_cb is not None and snapshot_stride > 0:
        snapshot_cb(state)
    for i in range(1, n_steps + 1):
        state = _rk4(state, cfg.dt, ell)
        if cfg.reproject_every and i % cfg.reproject_every == 0:
            state = state.with_fields(
                A=leray_project(state.A), A_t=leray_project(state.A_t)
            )
        traj.record(state)
        if observer is not None and i % observe_every == 0:
            observer(state, i)
        if snapshot_cb is not None and snapshot_stride > 0 and i % snapshot_stride == 0:
            snapshot_cb(state)
    traj.final_state = state
    return traj


def rescale(state: GaugeState, lam: float) -> GaugeState:
    """Scaling symmetry: fields to lam^di * field(t/lam, x/lam) on the box
    lam*L, realized exactly on the same lattice samples. Field values scale
    by 1/lam, stored time derivatives by 1/lam^2, the time label by lam.
    """
    if not lam > 0:
        raise ValueError(f"scaling parameter must be positive, got {lam}")
    old = state.grid
    grid = Grid(old.n, old.L * lam)
    s1 = 1.0 / lam
    s2 = 1.0 / lam**2
    return GaugeState(
        A0=ScalarField(grid, state.A0.values * s1),
        A0_t=ScalarField(grid, state.A0_t.values * s2),
        A=VectorField(grid, state.A.values * s1),
        A_t=VectorField(grid, state.A_t.values * s2),
        phi=ScalarField(grid, state.phi.values * s1),
        phi_t=ScalarField(grid, state.phi_t.values * s2),
        time=state.time * lam,
    )
