"""Sobolev norms and the data-size bracket norm."""

from __future__ import annotations

import numpy as np

from .grid import ScalarField, VectorField
from .state import GaugeState
from .symbols import gradient


def sobolev_norm(field, s: float, homogeneous: bool = False) -> float:
    """Weighted-spectrum norm ||u||^2 = L^3 sum_k w(k)^{2s} |c_k|^2.

    w = <k> (inhomogeneous) or |k| (homogeneous, k=0 dropped). Homogeneous
    norms of negative order reject fields with nonzero mean, where the k=0
    weight would diverge.
    """
    if isinstance(field, VectorField):
        return float(
            np.sqrt(sum(sobolev_norm(field.component(j), s, homogeneous) ** 2 for j in range(3)))
        )
    grid = field.grid
    hat = field.hat
    power = np.abs(hat) ** 2
    if homogeneous:
        zero_amp = np.sqrt(power.flat[0])
        scale = np.sqrt(power.sum())
        if s < 0 and zero_amp > 1e-13 * max(scale, 1.0):
            raise ValueError(
                "homogeneous negative-order norm requires a zero-mean field "
                f"(mean amplitude {zero_amp:.3e})"
            )
        w2 = grid.k2.copy()
        w2.flat[0] = 1.0  # k=0 term dropped below
        weighted = w2**s * power
        weighted.flat[0] = 0.0
    else:
        weighted = (1.0 + grid.k2) ** s * power
    return float(np.sqrt(grid.volume * weighted.sum()))


def bracket_norm(state: GaugeState, s: float) -> float:
    """Data-size norm: ||grad_{x,t} Phi||_{H^{s-1}} + ||(A, phi)||_{H^s}.

    Spatial gradients are spectral; time derivatives come from the stored
    d/dt fields. Component groups are combined in quadrature.
    """
    grad_sq = 0.0
    for f in (state.A0, state.phi, *(state.A.component(j) for j in range(3))):
        grad_sq += sobolev_norm(gradient(f), s - 1.0) ** 2
    for f in (state.A0_t, state.phi_t, *(state.A_t.component(j) for j in range(3))):
        grad_sq += sobolev_norm(f, s - 1.0) ** 2
    data_sq = sobolev_norm(state.phi, s) ** 2 + sobolev_norm(state.A, s) ** 2
    return float(np.sqrt(grad_sq) + np.sqrt(data_sq))
