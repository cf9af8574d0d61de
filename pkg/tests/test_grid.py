import numpy as np
import pytest

from mkglab.grid import (
    Grid,
    ScalarField,
    VectorField,
    dealiased_product,
    fine_to_coarse,
    make_grid,
    pad_hat_to_fine,
    pad_to_fine,
    transform,
)


def rand_field(grid, rng, k_hi=None):
    hat = np.zeros((grid.n,) * 3, dtype=np.complex128)
    mask = grid.kabs <= (grid.k_resolved if k_hi is None else k_hi)
    cnt = int(mask.sum())
    hat[mask] = rng.standard_normal(cnt) + 1j * rng.standard_normal(cnt)
    return ScalarField.from_hat(grid, hat)


def test_grid_rejects_bad_n():
    with pytest.raises(ValueError):
        make_grid(12, 2 * np.pi)
    with pytest.raises(ValueError):
        make_grid(32, -1.0)


def test_grid_geometry():
    g = make_grid(32, 2 * np.pi)
    assert g.dx == pytest.approx(2 * np.pi / 32)
    assert g.dk == pytest.approx(1.0)
    assert g.k_resolved == pytest.approx(10.0)
    assert g.volume == pytest.approx((2 * np.pi) ** 3)


def test_transform_roundtrip():
    g = make_grid(16, 3.0)
    rng = np.random.default_rng(0)
    u = rng.standard_normal((16,) * 3) + 1j * rng.standard_normal((16,) * 3)
    v = transform(transform(u, "fwd"), "inv")
    assert np.max(np.abs(v - u)) < 1e-13 * np.max(np.abs(u))


def test_single_mode_coefficient():
    # u = exp(i k.x) must transform to a single unit coefficient at k
    g = make_grid(16, 2 * np.pi)
    x, y, z = g.x
    u = np.exp(1j * (2 * x - y + 0 * z))
    hat = transform(u, "fwd")
    assert hat[2, 16 - 1, 0] == pytest.approx(1.0, abs=1e-12)
    hat[2, 16 - 1, 0] = 0.0
    assert np.max(np.abs(hat)) < 1e-12


def test_parseval():
    g = make_grid(16, 5.0)
    rng = np.random.default_rng(1)
    u = rng.standard_normal((16,) * 3)
    hat = transform(u, "fwd")
    phys = g.cell_volume * np.sum(np.abs(u) ** 2)
    spec = g.volume * np.sum(np.abs(hat) ** 2)
    assert phys == pytest.approx(spec, rel=1e-12)


def test_field_l2_matches_parseval():
    g = make_grid(16, 2 * np.pi)
    f = rand_field(g, np.random.default_rng(2))
    direct = np.sqrt(g.cell_volume * np.sum(np.abs(f.values) ** 2))
    assert f.l2() == pytest.approx(direct, rel=1e-12)


def test_pad_crop_inverse():
    g = make_grid(16, 2 * np.pi)
    f = rand_field(g, np.random.default_rng(3))
    fine = pad_to_fine(g, f.values)
    assert fine.shape == (32, 32, 32)
    back = fine_to_coarse(g, fine)
    assert np.max(np.abs(back - f.values)) < 1e-13


def test_pad_preserves_point_values():
    # zero-padding is spectral interpolation: coarse samples are reproduced
    g = make_grid(16, 2 * np.pi)
    f = rand_field(g, np.random.default_rng(4))
    fine = pad_to_fine(g, f.values)
    assert np.max(np.abs(fine[::2, ::2, ::2] - f.values)) < 1e-12 * np.max(np.abs(f.values))


def test_pad_hat_matches_pad_values():
    g = make_grid(16, 2 * np.pi)
    f = rand_field(g, np.random.default_rng(5))
    a = pad_to_fine(g, f.values)
    b = pad_hat_to_fine(g, f.hat)
    assert np.max(np.abs(a - b)) < 1e-13 * np.max(np.abs(a))


def test_dealiased_product_exact_convolution():
    # product of two single modes lands exactly on the sum frequency
    g = make_grid(16, 2 * np.pi)
    x, y, z = g.x
    u = np.exp(1j * (2 * x + 0 * y + 0 * z))
    v = np.exp(1j * (x + y + 0 * z))
    w = dealiased_product(g, u, v)
    hat = transform(w, "fwd")
    assert hat[3, 1, 0] == pytest.approx(1.0, abs=1e-12)
    hat[3, 1, 0] = 0.0
    assert np.max(np.abs(hat)) < 1e-12


def test_dealiased_product_kills_aliases():
    # k=4 squared on a 16-grid (resolved band 5): the k=8 output must vanish,
    # not fold back onto -8
    g = make_grid(16, 2 * np.pi)
    x, y, z = g.x
    u = np.exp(1j * (4 * x + 0 * y + 0 * z))
    hat = transform(dealiased_product(g, u, u), "fwd")
    assert np.max(np.abs(hat)) < 1e-12


def test_band_limit_truncates_sphere():
    g = make_grid(16, 2 * np.pi)
    hat = np.zeros((16,) * 3, dtype=np.complex128)
    hat[5, 0, 0] = 1.0  # |k| = 5 = resolved band, kept
    hat[5, 3, 0] = 1.0  # |k| = 5.83 > resolved band, dropped
    f = ScalarField.from_hat(g, hat).band_limit()
    out = f.hat
    assert out[5, 0, 0] == pytest.approx(1.0, abs=1e-13)
    assert abs(out[5, 3, 0]) < 1e-13


def test_vector_field_components():
    g = make_grid(8, 2 * np.pi)
    rng = np.random.default_rng(6)
    comps = [rand_field(g, rng) for _ in range(3)]
    v = VectorField.from_components(comps)
    for j in range(3):
        assert np.allclose(v.component(j).values, comps[j].values)
    w = v * 2.0 - v
    assert np.max(np.abs(w.values - v.values)) < 1e-13

