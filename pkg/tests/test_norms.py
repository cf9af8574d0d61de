import numpy as np
import pytest

from mkglab.grid import ScalarField, VectorField, make_grid
from mkglab.norms import bracket_norm, sobolev_norm
from mkglab.state import GaugeState


def single_mode(grid, k, amp=1.0):
    hat = np.zeros((grid.n,) * 3, dtype=complex)
    hat[tuple(np.asarray(k) % grid.n)] = amp
    return ScalarField.from_hat(grid, hat)


def test_sobolev_single_mode_closed_form():
    g = make_grid(16, 2 * np.pi)
    f = single_mode(g, (2, 1, 0), amp=0.5)
    k2 = 5.0
    want = np.sqrt(g.volume) * 0.5 * (1.0 + k2) ** 0.35
    assert sobolev_norm(f, 0.7) == pytest.approx(want, rel=1e-12)
    want_hom = np.sqrt(g.volume) * 0.5 * k2 ** 0.35
    assert sobolev_norm(f, 0.7, homogeneous=True) == pytest.approx(want_hom, rel=1e-12)


def test_sobolev_zero_order_is_l2():
    g = make_grid(16, 3.0)
    rng = np.random.default_rng(0)
    f = ScalarField(g, rng.standard_normal((16,) * 3) + 0j)
    assert sobolev_norm(f, 0.0) == pytest.approx(f.l2(), rel=1e-12)


def test_sobolev_negative_homogeneous_rejects_mean():
    g = make_grid(8, 2 * np.pi)
    f = ScalarField(g, np.ones((8, 8, 8), dtype=complex))
    with pytest.raises(ValueError):
        sobolev_norm(f, -0.5, homogeneous=True)


def test_sobolev_vector_quadrature():
    g = make_grid(8, 2 * np.pi)
    comps = [single_mode(g, (1, 0, 0)), single_mode(g, (0, 1, 0)), single_mode(g, (0, 0, 1))]
    v = VectorField.from_components(comps)
    one = sobolev_norm(comps[0], 0.3)
    assert sobolev_norm(v, 0.3) == pytest.approx(np.sqrt(3.0) * one, rel=1e-12)


def test_sobolev_monotone_in_s():
    g = make_grid(16, 2 * np.pi)
    rng = np.random.default_rng(1)
    hat = (rng.standard_normal((16,) * 3) + 1j * rng.standard_normal((16,) * 3)) * g.band_mask
    f = ScalarField.from_hat(g, hat)
    norms = [sobolev_norm(f, s) for s in (-1.0, 0.0, 0.5, 1.0)]
    assert all(a < b for a, b in zip(norms, norms[1:]))


def test_bracket_norm_scales_linearly():
    g = make_grid(16, 2 * np.pi)
    rng = np.random.default_rng(2)

    def rf():
        hat = (rng.standard_normal((16,) * 3) + 1j * rng.standard_normal((16,) * 3)) * g.band_mask
        return ScalarField.from_hat(g, hat)

    st = GaugeState(
        A0=rf(), A0_t=rf(),
        A=VectorField.from_components([rf() for _ in range(3)]),
        A_t=VectorField.from_components([rf() for _ in range(3)]),
        phi=rf(), phi_t=rf(),
    )
    b1 = bracket_norm(st, 0.9)
    st2 = GaugeState(
        A0=st.A0 * 2.0, A0_t=st.A0_t * 2.0, A=st.A * 2.0, A_t=st.A_t * 2.0,
        phi=st.phi * 2.0, phi_t=st.phi_t * 2.0,
    )
    assert bracket_norm(st2, 0.9) == pytest.approx(2.0 * b1, rel=1e-12)
    assert b1 > 0
