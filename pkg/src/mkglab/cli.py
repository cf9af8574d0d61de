"""Batch experiment runner.

Commands: simulate, drift-sweep, estimates, nosmoothing, selftest. Options
come from a flat key=value config file plus command-line flags (flags win).
Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import estimates as est
from .dynamics import StepConfig, evolve, hamiltonian
from .elliptic import EllipticConfig, EllipticError, init_compatible
from .grid import Grid, ScalarField, VectorField, make_grid
from .imethod import (
    choose_parameters,
    drift_experiment,
    make_icontext,
    small_data_rescale,
)
from .reports import (

    ensure_dir,
    render_drift,
    render_estimates,
    render_nosmoothing,
    render_trajectory,
    write_json_report,
)
from .snapshot import write_snapshot
from .state import GaugeState

COMMANDS = ("simulate", "drift-sweep", "estimates", "nosmoothing", "selftest")
DATA_PRESETS = ("zero", "plane-wave", "random-band", "appendix")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "simulate"
    grid: int = 32
    box: float = 2.0 * np.pi
    s: float = 0.9
    N: float | None = None
    N_list: tuple | None = None
    dt: float = 0.005
    t_end: float = 1.0
    seed: int = 0
    out: str = "."
    data: str = "random-band"
    k_lo: float = 1.0
    k_hi: float = 3.0
    amplitude: float = 0.1
    samples: int = 1_000_000
    eps: float = 0.01

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.data not in DATA_PRESETS:
            raise ConfigError(f"data must be one of {DATA_PRESETS}, got {self.data!r}")
        if not (isinstance(self.grid, int) and self.grid >= 8 and (self.grid & (self.grid - 1)) == 0):
            raise ConfigError(f"grid must be a power of two >= 8, got {self.grid}")
        if not self.box > 0:
            raise ConfigError(f"box must be positive, got {self.box}")
        if not 0.5 < self.s < 1.0:
            raise ConfigError(f"s must lie in (1/2,1), got {self.s}")
        if self.N is not None and self.N < 1:
            raise ConfigError(f"N must be at least 1, got {self.N}")
        if self.N_list is not None and (len(self.N_list) == 0 or min(self.N_list) < 1):
            raise ConfigError(f"N_list entries must be at least 1, got {self.N_list}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if not 0 < self.k_lo <= self.k_hi:
            raise ConfigError(f"need 0 < k_lo <= k_hi, got k_lo={self.k_lo} k_hi={self.k_hi}")
        if self.samples < 1:
            raise ConfigError(f"samples must be positive, got {self.samples}")
        if not 0 < self.eps < 1:
            raise ConfigError(f"eps must lie in (0,1), got {self.eps}")

    def as_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "N_list" and v is not None:
                v = ",".join(f"{x:g}" for x in v)
            d[f.name] = v
        return d


_FIELD_TYPES = {
    "grid": int, "seed": int, "samples": int,
    "box": float, "s": float, "N": float, "dt": float, "t_end": float,
    "k_lo": float, "k_hi": float, "amplitude": float, "eps": float,
    "out": str, "data": str, "command": str,
}


def _parse_n_list(text: str):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise ConfigError(f"N_list must be comma-separated numbers, got {text!r}") from e


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse flat `key = value` lines (# comments); unknown keys are rejected."""
    cfg = base if base is not None else RunConfig()
    updates = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "N_list":
            updates[key] = _parse_n_list(value)
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r} (line {ln})")
        caster = _FIELD_TYPES[key]
        try:
            updates[key] = caster(value)
        except ValueError as e:
            raise ConfigError(f"key {key!r}: cannot read {value!r} as {caster.__name__}") from e
    return replace(cfg, **updates)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkg",
        description="Gauge-field wave experiments on a periodic box.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--grid", type=int, help="points per axis (power of two, default 32)")
        p.add_argument("--box", type=float, help="box side length (default 2*pi)")
        p.add_argument("--s", type=float, help="regularity exponent in (1/2,1) (default 0.9)")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--N", type=float, help="smoothing threshold")
        group.add_argument("--N-list", dest="N_list", help="comma-separated thresholds a,b,c")
        p.add_argument("--dt", type=float, help="time step (default 0.005)")
        p.add_argument("--t-end", dest="t_end", type=float, help="final time (default 1.0)")
        p.add_argument("--seed", type=int, help="random seed (default 0)")
        p.add_argument("--out", help="output directory (default .)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if args.config:
        try:
            text = open(args.config).read()
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        cfg = parse_config_text(text, cfg)
        cfg.command = args.command
    for key in ("grid", "box", "s", "N", "dt", "t_end", "seed", "out"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "N_list", None) is not None:
        cfg.N_list = _parse_n_list(args.N_list)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Initial data presets


def _random_band_scalar(grid: Grid, k_lo, k_hi, amplitude, rng, real=False) -> ScalarField:
    mask = (grid.kabs >= k_lo - 1e-12) & (grid.kabs <= k_hi + 1e-12)
    hat = np.zeros((grid.n,) * 3, dtype=np.complex128)
    cnt = int(mask.sum())
    if cnt == 0:
        raise ConfigError(f"band [{k_lo}, {k_hi}] contains no grid modes")
    hat[mask] = amplitude * (rng.standard_normal(cnt) + 1j * rng.standard_normal(cnt)) / np.sqrt(cnt)
    f = ScalarField.from_hat(grid, hat)
    return f.real_part() if real else f


def make_initial_state(cfg: RunConfig, ell: EllipticConfig = EllipticConfig()) -> GaugeState:
    grid = make_grid(cfg.grid, cfg.box)
    rng = np.random.default_rng(cfg.seed)
    if cfg.data == "zero":
        z = ScalarField.zeros(grid)
        return GaugeState(A0=z, A0_t=z, A=VectorField.zeros(grid),
                          A_t=VectorField.zeros(grid), phi=z, phi_t=z)
    if cfg.data == "plane-wave":
        kvec = np.array([round(cfg.k_lo), 0, 0], dtype=int)
        hat = np.zeros((grid.n,) * 3, dtype=np.complex128)
        hat[tuple(kvec % grid.n)] = cfg.amplitude
        phi = ScalarField.from_hat(grid, hat)
        omega = grid.dk * np.linalg.norm(kvec)
        phi_t = ScalarField.from_hat(grid, -1j * omega * hat)
        return init_compatible(phi, phi_t, VectorField.zeros(grid),
                               VectorField.zeros(grid), ell)
    if cfg.data == "random-band":
        phi = _random_band_scalar(grid, cfg.k_lo, cfg.k_hi, cfg.amplitude, rng)
        phi_t = _random_band_scalar(grid, cfg.k_lo, cfg.k_hi, cfg.amplitude, rng)
        A = VectorField.from_components(
            [_random_band_scalar(grid, cfg.k_lo, cfg.k_hi, cfg.amplitude, rng, real=True)
             for _ in range(3)]
        )
        A_t = VectorField.from_components(
            [_random_band_scalar(grid, cfg.k_lo, cfg.k_hi, cfg.amplitude, rng, real=True)
             for _ in range(3)]
        )
        return init_compatible(phi, phi_t, A, A_t, ell)
    if cfg.data == "appendix":
        # grid realization of the two-ball construction: phi concentrated on
        # lattice modes within distance 1 of +N e1, its time derivative on
        # modes within 1 of -N e1, and a single transverse low mode for A
        N = cfg.N if cfg.N is not None else max(1.0, grid.k_resolved / 2)
        if N > grid.k_resolved:
            raise ConfigError(f"appendix preset needs N <= resolved band {grid.k_resolved:.4g}")
        kx, ky, kz = grid.k
        phi_hat = np.where(
            np.sqrt((kx - N) ** 2 + ky**2 + kz**2) <= 1.0 + 1e-12,
            cfg.eps * N ** (-cfg.s), 0.0,
        ).astype(np.complex128)
        phit_hat = np.where(
            np.sqrt((kx + N) ** 2 + ky**2 + kz**2) <= 1.0 + 1e-12,
            cfg.eps * N ** (cfg.s - 1.0), 0.0,
        ).astype(np.complex128)
        a_hat = np.zeros((3,) + (grid.n,) * 3, dtype=np.complex128)
        mode = (0, 1, 0)
        a_hat[0][mode] = cfg.amplitude
        a_hat[0][tuple(-np.array(mode) % grid.n)] = cfg.amplitude
        return init_compatible(
            ScalarField.from_hat(grid, phi_hat),
            ScalarField.from_hat(grid, phit_hat),
            VectorField.from_hat(grid, a_hat),
            VectorField.zeros(grid),
            ell,
        )
    raise ConfigError(f"unknown data preset {cfg.data!r}")


# ---------------------------------------------------------------------------
# Commands


def _cmd_simulate(cfg: RunConfig) -> int:
    out = ensure_dir(cfg.out)
    ell = EllipticConfig()
    state = make_initial_state(cfg, ell)
    step = StepConfig(dt=cfg.dt, t_end=cfg.t_end)
    traj = evolve(state, step, ell, bracket_s=cfg.s)
    traj.write_csv(out / "trajectory.csv")
    render_trajectory(traj, out / "trajectory.png")
    write_snapshot(out / "final_state.mkg1", traj.final_state)
    print(f"simulate: {len(traj.times)} samples -> {out / 'trajectory.csv'}")
    return 0


def _cmd_drift_sweep(cfg: RunConfig) -> int:
    out = ensure_dir(cfg.out)
    ell = EllipticConfig()
    state = make_initial_state(cfg, ell)
    n_list = cfg.N_list if cfg.N_list else ((cfg.N,) if cfg.N else (4.0, 8.0))
    state, lam = small_data_rescale(state, cfg.s, n_list)
    if lam != 1.0:
        print(f"drift-sweep: dilated data by {lam:g} to reach small modified energy")
    step = StepConfig(dt=cfg.dt, t_end=cfg.t_end)
    report = drift_experiment(state, cfg.t_end, n_list, cfg.s, step_cfg=step, config=ell)
    report.write_csv(out / "drift.csv")
    schedule = {}
    for s_val in sorted({cfg.s, 0.86, 0.87}):
        r = choose_parameters(max(cfg.t_end, 1.0), s_val)
        schedule[f"s={s_val:g}"] = {
            "feasible": r.feasible,
            "log10_lambda": r.log10_lambda,
            "log10_N": r.log10_N,
            "margins": list(r.margins),
            "max_feasible_T": r.max_feasible_T,
        }
    report.write_json(out / "drift.json", extra={"schedule": schedule, "config": cfg.as_dict()})
    render_drift(report, out / "drift.png")
    print(f"drift-sweep: slope {report.slope_fit:.3f} -> {out / 'drift.csv'}")
    return 0


def _cmd_estimates(cfg: RunConfig) -> int:
    out = ensure_dir(cfg.out)
    grid = make_grid(cfg.grid, cfg.box)
    N = cfg.N if cfg.N is not None else 1.0
    symbol = est.sample_symbol_bound(samples=max(cfg.samples, 100_000), seed=cfg.seed)
    comm = est.sample_commutator(grid, cfg.s, N, M_values=(1, 2, 4), samples=10, seed=cfg.seed)
    prod = est.sample_product_norm(grid, -1.0, cfg.s, -0.1, samples=50, seed=cfg.seed,
                                   k_hi=min(4.0, grid.k_resolved))
    loss = {
        f"N={nv:g}": est.sample_i_loss(grid, cfg.s, nv, samples=50, seed=cfg.seed)
        for nv in (cfg.N_list or (4.0, 8.0, 16.0))
        if nv <= 2 * grid.k_resolved
    }
    reports = {"symbol_bound": symbol, "product_norm": prod}
    reports.update({f"commutator_M={m:g}": r for m, r in comm.items()})
    reports.update({f"i_loss_{k}": v for k, v in loss.items()})
    payload = {name: rep.to_dict() for name, rep in reports.items()}
    write_json_report(out / "estimates.json", payload, cfg.as_dict())
    render_estimates(reports, out / "estimates.png")
    print(f"estimates: {len(reports)} reports -> {out / 'estimates.json'}")
    return 0


def _cmd_nosmoothing(cfg: RunConfig) -> int:
    out = ensure_dir(cfg.out)
    n_values = cfg.N_list if cfg.N_list else (50.0, 100.0, 200.0)
    results = [
        est.nosmoothing_integral(nv, cfg.eps, cfg.s, samples=cfg.samples, seed=cfg.seed)
        for nv in n_values
    ]
    payload = {
        "results": [
            {"N": r.N, "value": r.value, "stderr": r.stderr, "samples": r.samples}
            for r in results
        ],
        "eps_cubed": cfg.eps**3,
    }
    write_json_report(out / "nosmoothing.json", payload, cfg.as_dict())
    render_nosmoothing(results, cfg.eps, out / "nosmoothing.png")
    print(f"nosmoothing: {len(results)} values -> {out / 'nosmoothing.json'}")
    return 0


def _selftest_checks(cfg: RunConfig):
    """Exact-invariant suite: each check returns a relative error."""
    from .dynamics import null_form_q
    from .imethod import commutators
    from .symbols import divergence, gradient, leray_project

    grid = make_grid(cfg.grid, cfg.box)
    rng = np.random.default_rng(cfg.seed)

    def rand(real=False, k_hi=None, k_lo=1.0):
        return _random_band_scalar(grid, k_lo, k_hi or grid.k_resolved, 1.0, rng, real=real)

    def check_roundtrip():
        f = rand()
        g = ScalarField.from_hat(grid, f.hat)
        return np.max(np.abs(g.values - f.values)) / np.max(np.abs(f.values))

    def check_leray_idempotent():
        v = VectorField.from_components([rand(real=True) for _ in range(3)])
        p1 = leray_project(v)
        p2 = leray_project(p1)
        return (p2 - p1).l2() / max(p1.l2(), 1e-300)

    def check_leray_annihilates():
        f = rand(real=True)
        g = leray_project(gradient(f))
        return g.l2() / max(gradient(f).l2(), 1e-300)

    def check_leray_divfree():
        v = VectorField.from_components([rand(real=True) for _ in range(3)])
        p = leray_project(v)
        return divergence(p).l2() / max(p.l2(), 1e-300)

    def check_band_projection():
        f = rand()
        b = f.band_limit()
        return np.max(np.abs(b.band_limit().values - b.values)) / max(
            np.max(np.abs(b.values)), 1e-300
        )

    def check_q_antisymmetry():
        f, g = rand(k_hi=grid.k_resolved / 2), rand(k_hi=grid.k_resolved / 2)
        q1 = null_form_q(f, g)
        q2 = null_form_q(g, f)
        scale = max(np.max(np.abs(q1)), 1e-300)
        idx = np.max(np.abs(q1 + np.transpose(q1, (1, 0, 2, 3, 4))))
        arg = np.max(np.abs(q1 + q2))
        diag = np.max(np.abs(q1[0, 0])) + np.max(np.abs(q1[1, 1])) + np.max(np.abs(q1[2, 2]))
        return (idx + arg + diag) / scale

    def check_commutator_vanishing():
        N = 0.75 * grid.k_resolved
        ctx = make_icontext(grid, 0.9, N)
        z = ScalarField.zeros(grid)
        band = dict(k_lo=0.0, k_hi=N / 3.0)
        phi = rand(**band)
        A = VectorField.from_components([rand(real=True, **band) for _ in range(3)])
        st = GaugeState(A0=z, A0_t=z, A=leray_project(A), A_t=VectorField.zeros(grid),
                        phi=phi, phi_t=rand(**band))
        com = commutators(st, ctx)
        scale = max(np.max(np.abs(phi.values)), 1.0)
        worst = max(
            np.max(np.abs(com["N0"][0].values)),
            np.max(np.abs(com["N0"][1].values)),
            max(np.max(np.abs(v.values)) for v in com["N1"][0].values()),
            np.max(np.abs(com["N2"])),
            max(np.max(np.abs(v)) for v in com["N3"].values()),
        )
        return worst / scale

    def check_two_mode_commutator():
        from .symbols import i_symbol_values
        N = max(2.0, grid.k_resolved / 4.0)
        ctx = make_icontext(grid, 0.8, N)
        k1 = np.array([1, 0, 0])
        k2 = np.array([int(grid.k_resolved / grid.dk // 2), 1, 0])
        h = np.zeros((grid.n,) * 3, dtype=np.complex128)
        h[tuple(k1 % grid.n)] = 1.0
        h[tuple(k2 % grid.n)] = 1.0
        z = ScalarField.zeros(grid)
        st = GaugeState(A0=z, A0_t=z, A=VectorField.zeros(grid),
                        A_t=VectorField.zeros(grid),
                        phi=ScalarField.from_hat(grid, h), phi_t=z)
        com = commutators(st, ctx)["N2"][3, 3, 0]
        ch = np.fft.fftn(com) / grid.n**3

        def mv(k):
            return i_symbol_values(np.array([np.linalg.norm(k) * grid.dk]), 0.8, N)[0]

        expected = (mv(k1 + k2) - mv(k1) * mv(k2)) * 1j * grid.dk * (k1[0] + k2[0])
        got = ch[tuple((k1 + k2) % grid.n)]
        return abs(got - expected) / abs(expected)

    return [
        ("transform round-trip", check_roundtrip),
        ("projection idempotent", check_leray_idempotent),
        ("projection kills gradients", check_leray_annihilates),
        ("projection output divergence-free", check_leray_divfree),
        ("band projection idempotent", check_band_projection),
        ("null form antisymmetry", check_q_antisymmetry),
        ("commutators vanish below threshold", check_commutator_vanishing),
        ("two-mode commutator closed form", check_two_mode_commutator),
    ]


def _cmd_selftest(cfg: RunConfig) -> int:
    tol = 1e-10
    passed = 0
    checks = _selftest_checks(cfg)
    for name, fn in checks:
        err = float(fn())
        ok = err < tol
        passed += ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: relative error {err:.3e}")
    print(f"selftest: {passed}/{len(checks)} passed")
    return 0 if passed == len(checks) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    try:
        if cfg.command == "simulate":
            return _cmd_simulate(cfg)
        if cfg.command == "drift-sweep":
            return _cmd_drift_sweep(cfg)
        if cfg.command == "estimates":
            return _cmd_estimates(cfg)
        if cfg.command == "nosmoothing":
            return _cmd_nosmoothing(cfg)
        if cfg.command == "selftest":
            return _cmd_selftest(cfg)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (EllipticError, FloatingPointError, ValueError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
