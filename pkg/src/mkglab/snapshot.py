"""Binary field snapshot format.

Layout (little-endian):
  magic   "MKG1" (4 bytes)
  n       u32    points per axis
  L       f64    box side
  time    f64    snapshot time
  ncomp   u8     number of stored scalar components (10)
  data    ncomp * n^3 complex samples as f64 (re, im) pairs, x-index fastest

Component order: A0, A0_t, A1, A2, A3, A1_t, A2_t, A3_t, phi, phi_t.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Grid, ScalarField, VectorField
from .state import GaugeState

MAGIC = b"MKG1"
_N_COMPONENTS = 10


def _components(state: GaugeState):
    return [
        state.A0.values,
        state.A0_t.values,
        state.A.values[0],
        state.A.values[1],
        state.A.values[2],
        state.A_t.values[0],
        state.A_t.values[1],
        state.A_t.values[2],
        state.phi.values,
        state.phi_t.values,
    ]


def write_snapshot(path, state: GaugeState) -> None:
    grid = state.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IddB", grid.n, grid.L, state.time, _N_COMPONENTS))
        for comp in _components(state):
            flat = np.ascontiguousarray(comp.flatten(order="F"), dtype=np.complex128)
            pairs = np.empty((flat.size, 2), dtype="<f8")
            pairs[:, 0] = flat.real
            pairs[:, 1] = flat.imag
            fh.write(pairs.tobytes())


def read_snapshot(path) -> GaugeState:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        n, L, time, ncomp = struct.unpack("<IddB", fh.read(4 + 8 + 8 + 1))
        if ncomp != _N_COMPONENTS:
            raise ValueError(f"unexpected component count {ncomp}")
        grid = Grid(int(n), float(L))
        comps = []
        count = n**3
        for _ in range(ncomp):
            raw = np.frombuffer(fh.read(count * 16), dtype="<f8").reshape(count, 2)
            vals = (raw[:, 0] + 1j * raw[:, 1]).reshape((n, n, n), order="F")
            comps.append(vals)
    return GaugeState(
        A0=ScalarField(grid, comps[0]),
        A0_t=ScalarField(grid, comps[1]),
        A=VectorField(grid, np.stack(comps[2:5])),
        A_t=VectorField(grid, np.stack(comps[5:8])),
        phi=ScalarField(grid, comps[8]),
        phi_t=ScalarField(grid, comps[9]),
        time=float(time),
    )
