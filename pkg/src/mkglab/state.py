"""Full gauge-field state at a single time."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .grid import Grid, ScalarField, VectorField


@dataclass(frozen=True)
class GaugeState:
    """Field tuple (A0, dt A0, A, dt A, phi, dt phi) at one time.

    A and A_t are kept divergence-free; A0 and A0_t are determined by the
    elliptic constraints when the state is compatible.
    """

    A0: ScalarField
    A0_t: ScalarField
    A: VectorField
    A_t: VectorField
    phi: ScalarField
    phi_t: ScalarField
    time: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "GaugeState":
        z, v = ScalarField.zeros(grid), VectorField.zeros(grid)
        return cls(A0=z, A0_t=z, A=v, A_t=v, phi=z, phi_t=z, time=time)

    def with_fields(self, **kwargs) -> "GaugeState":
        return replace(self, **kwargs)

    def scalar_components(self):
        """All stored fields flattened to scalar components, with labels."""
        out = [("A0", self.A0), ("A0_t", self.A0_t)]
        for j in range(3):
            out.append((f"A{j+1}", self.A.component(j)))
        for j in range(3):
            out.append((f"A{j+1}_t", self.A_t.component(j)))
        out += [("phi", self.phi), ("phi_t", self.phi_t)]
        return out
