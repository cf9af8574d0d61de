import numpy as np
import pytest

from mkglab.dynamics import StepConfig, hamiltonian, rescale
from mkglab.elliptic import EllipticConfig, init_compatible
from mkglab.grid import ScalarField, VectorField, make_grid
from mkglab.imethod import (
    DriftReport,
    apply_i_state,
    choose_parameters,
    commutators,
    drift_experiment,
    drift_terms,
    make_icontext,
    modified_hamiltonian,
    small_data_rescale,
)
from mkglab.state import GaugeState
from mkglab.symbols import i_symbol_values


def band_scalar(grid, rng, k_hi, amp=1.0, k_lo=0.0):
    hat = np.zeros((grid.n,) * 3, dtype=complex)
    mask = (grid.kabs >= k_lo) & (grid.kabs <= k_hi)
    cnt = int(mask.sum())
    hat[mask] = amp * (rng.standard_normal(cnt) + 1j * rng.standard_normal(cnt)) / np.sqrt(cnt)
    return ScalarField.from_hat(grid, hat)


def random_state(n=16, seed=0, amp=0.2, k_hi=4.0):
    g = make_grid(n, 2 * np.pi)
    rng = np.random.default_rng(seed)
    return init_compatible(
        band_scalar(g, rng, k_hi, amp),
        band_scalar(g, rng, k_hi, amp),
        VectorField.from_components(
            [band_scalar(g, rng, k_hi, amp).real_part() for _ in range(3)]
        ),
        VectorField.from_components(
            [band_scalar(g, rng, k_hi, amp).real_part() for _ in range(3)]
        ),
        EllipticConfig(cg_tol=1e-12),
    )


# --- context and mollification -----------------------------------------------


def test_icontext_validation():
    g = make_grid(16, 2 * np.pi)
    with pytest.raises(ValueError):
        make_icontext(g, 1.1, 2.0)
    with pytest.raises(ValueError):
        make_icontext(g, 0.9, 0.2)
    with pytest.raises(ValueError):
        make_icontext(g, 0.9, 100.0)


def test_apply_i_low_frequency_identity():
    # data supported below N is untouched
    st = random_state(k_hi=2.0)
    ctx = make_icontext(st.grid, 0.8, 4.0)
    out = apply_i_state(st, ctx)
    assert (out.phi - st.phi).l2() < 1e-13
    assert (out.A - st.A).l2() < 1e-13


def test_apply_i_damps_high_frequency():
    g = make_grid(16, 2 * np.pi)
    hat = np.zeros((16,) * 3, dtype=complex)
    hat[4, 0, 0] = 1.0
    f = ScalarField.from_hat(g, hat)
    z = ScalarField.zeros(g)
    st = GaugeState(A0=z, A0_t=z, A=VectorField.zeros(g), A_t=VectorField.zeros(g),
                    phi=f, phi_t=z)
    ctx = make_icontext(g, 0.7, 2.0)
    out = apply_i_state(st, ctx)
    want = i_symbol_values(np.array([4.0]), 0.7, 2.0)[0]
    assert out.phi.hat[4, 0, 0] == pytest.approx(want, rel=1e-13)
    assert want == pytest.approx(2.0 ** (0.7 - 1.0), rel=1e-13)


def test_modified_hamiltonian_limits():
    st = random_state(seed=1)
    g = st.grid
    # N at the resolved band: every resolved mode has symbol 1
    ctx_hi = make_icontext(g, 0.9, g.k_resolved)
    assert modified_hamiltonian(st, ctx_hi) == pytest.approx(hamiltonian(st), rel=1e-12)
    # smoothing strictly decreases the energy of generic data
    ctx_lo = make_icontext(g, 0.6, 1.0)
    assert modified_hamiltonian(st, ctx_lo) < hamiltonian(st)


# --- commutators -------------------------------------------------------------


def test_commutators_vanish_on_low_frequencies():
    st = random_state(seed=2, k_hi=1.4)
    # the solved potential is not band-limited; zero it so every nonlinearity
    # is a product of fields below N/3
    z = ScalarField.zeros(st.grid)
    st = st.with_fields(A0=z, A0_t=z)
    ctx = make_icontext(st.grid, 0.9, 4.4)
    com = commutators(st, ctx)
    assert com["N0"][0].l2() < 1e-13
    assert com["N0"][1].l2() < 1e-13
    assert np.max(np.abs(com["N2"])) < 1e-13
    assert max(np.max(np.abs(v)) for v in com["N3"].values()) < 1e-13


def test_two_mode_commutator_closed_form():
    # phi with unit coefficients at k1, k2: the transport-gradient commutator
    # at k1+k2 is (m(k1+k2) - m(k1) m(k2)) i (k1+k2)_x
    g = make_grid(16, 2 * np.pi)
    s, N = 0.8, 2.0
    ctx = make_icontext(g, s, N)
    k1 = np.array([1, 0, 0])
    k2 = np.array([3, 1, 0])
    hat = np.zeros((16,) * 3, dtype=complex)
    hat[tuple(k1)] = 1.0
    hat[tuple(k2)] = 1.0
    z = ScalarField.zeros(g)
    st = GaugeState(A0=z, A0_t=z, A=VectorField.zeros(g), A_t=VectorField.zeros(g),
                    phi=ScalarField.from_hat(g, hat), phi_t=z)
    com = commutators(st, ctx)["N2"][3, 3, 0]
    out_hat = np.fft.fftn(com) / g.n**3

    def m(k):
        return i_symbol_values(np.array([np.linalg.norm(k)]), s, N)[0]

    want = (m(k1 + k2) - m(k1) * m(k2)) * 1j * float(k1[0] + k2[0])
    got = out_hat[tuple((k1 + k2) % g.n)]
    assert got == pytest.approx(want, rel=1e-12)


# --- drift bookkeeping --------------------------------------------------------


def test_drift_terms_match_energy_derivative():
    # the three pairings combine to d/dt of the modified energy along the flow
    from mkglab.dynamics import step

    st = random_state(seed=3, amp=0.15, k_hi=3.0)
    g = st.grid
    ctx = make_icontext(g, 0.9, 2.0)
    ell = EllipticConfig(cg_tol=1e-13)
    h = 2.5e-4
    cfg = StepConfig(dt=h, t_end=h)
    s1 = step(st, cfg, ell)
    s2 = step(s1, cfg, ell)
    one, two, three = drift_terms(s1, ctx, ell)
    fd = (modified_hamiltonian(s2, ctx) - modified_hamiltonian(st, ctx)) / (2 * h)
    scale = max(abs(modified_hamiltonian(s1, ctx)), 1.0)
    assert abs((one - two + three) - fd) < 1e-7 * scale


def test_drift_report_csv_and_json(tmp_path):
    rep = DriftReport(
        N=[4.0, 8.0], H0=[0.5, 0.6], sup_drift=[1e-3, 4e-4], T=1.0,
        slope_fit=-1.32, noise_floor=1e-8, noise_limited=False,
    )
    p = tmp_path / "drift.csv"
    rep.write_csv(p, header_lines=["seed = 0"])
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "# seed = 0"
    assert lines[1] == "N,H0,sup_drift,T,slope_fit"
    assert len(lines) == 4
    q = tmp_path / "drift.json"
    rep.write_json(q, extra={"tag": 1})
    import json

    d = json.loads(q.read_text())
    assert d["N"] == [4.0, 8.0]
    assert d["tag"] == 1


def test_drift_experiment_rejects_large_energy():
    st = random_state(seed=4, amp=5.0)
    with pytest.raises(ValueError):
        drift_experiment(st, 0.1, (2.0,), 0.9, step_cfg=StepConfig(dt=0.05, t_end=0.1))


def test_drift_experiment_runs_and_reports():
    st = random_state(seed=5, amp=0.02, k_hi=3.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = drift_experiment(
            st, 0.1, (2.0, 4.0), 0.9, step_cfg=StepConfig(dt=0.025, t_end=0.1)
        )
    assert rep.N == [2.0, 4.0]
    assert all(d >= 0 for d in rep.sup_drift)
    assert rep.T == 0.1
    assert np.isfinite(rep.slope_fit)


# --- rescaling and scheduling --------------------------------------------------


def test_small_data_rescale_reaches_target():
    st = random_state(seed=6, amp=0.1, k_hi=2.0)
    out, lam = small_data_rescale(st, 0.9, (1.0,), target=8.0)
    ctx = make_icontext(out.grid, 0.9, 1.0)
    assert modified_hamiltonian(out, ctx) <= 8.0
    assert lam > 1.0
    assert out.grid.L == pytest.approx(st.grid.L * lam)


def test_small_data_rescale_threshold_guard():
    st = random_state(seed=7, amp=50.0)
    with pytest.raises(ValueError):
        small_data_rescale(st, 0.9, (st.grid.k_resolved,), target=1e-6)


def test_scheduler_feasible_above_crossover():
    res = choose_parameters(1e6, 0.87)
    assert res.feasible
    assert res.log10_N > 0
    assert res.log10_lambda > 0
    # both constraint ratios stay within the requested margin
    assert all(m <= 0.1 + 1e-12 for m in res.margins)
    assert res.margins[0] == pytest.approx(0.1, rel=1e-10)


def test_scheduler_infeasible_below_crossover():
    res = choose_parameters(1e6, 0.86)
    assert not res.feasible
    assert res.max_feasible_T is not None
    assert res.max_feasible_T < 1.0


def test_scheduler_crossover_bracket():
    # feasibility at huge T flips across s = sqrt(3)/2
    cross = np.sqrt(3.0) / 2.0
    assert choose_parameters(1e9, cross + 0.01).feasible
    assert not choose_parameters(1e9, cross - 0.01).feasible


def test_rescaled_run_consistency():
    # dilation commutes with the flow: evolving the rescaled data to lam*t
    # matches rescaling the evolved state
    from mkglab.dynamics import evolve

    st = random_state(seed=8, amp=0.1, k_hi=1.4)
    lam = 2.0
    t = 0.04
    ell = EllipticConfig(cg_tol=1e-13)
    a = evolve(st, StepConfig(dt=0.01, t_end=t), ell).final_state
    big = rescale(st, lam)
    b = evolve(big, StepConfig(dt=0.01 * lam, t_end=t * lam), ell).final_state
    diff = (rescale(a, lam).phi - b.phi).l2()
    assert diff < 1e-8 * max(b.phi.l2(), 1e-300)
